"""Decay-rate fits, edge/bulk classification and valley detection."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .measure import CorrelationSeries

CLASSES = ("edge_like", "bulk_like", "indeterminate")


@dataclass
class GapEstimate:
    delta: float
    err: float
    window: tuple[float, float]
    quality: float = 0.0            # reduced chi-square, 0 if undetermined
    n_points: int = 0
    excluded: list = field(default_factory=list)   # grid points dropped as consistent with 0


@dataclass
class WormholeReport:
    beta: float
    n: int
    model: str
    delta_edge: GapEstimate | None
    delta_bulk: GapEstimate | None
    classification: str
    ratio_note: str = ""
    L: int | None = None
    valley_edge: tuple[float, float] | None = None
    valley_bulk: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        def gap(g):
            return None if g is None else dict(delta=g.delta, err=g.err, window=list(g.window),
                                               chi2=g.quality, points=g.n_points)

        def pair(v):
            return None if v is None else dict(depth=v[0], err=v[1])

        return dict(model=self.model, L=self.L, beta=self.beta, T=1.0 / self.beta, n=self.n,
                    delta_edge=gap(self.delta_edge), delta_bulk=gap(self.delta_bulk),
                    classification=self.classification, ratio_note=self.ratio_note,
                    valley_depth_edge=pair(self.valley_edge), valley_depth_bulk=pair(self.valley_bulk))


def default_window(series: CorrelationSeries) -> tuple[float, float]:
    if series.kind.endswith("continuous"):
        beta = float(series.meta.get("beta", series.grid[-1]))
        return (float(series.grid[1]), beta / 2)
    n = int(series.meta.get("n", series.grid[-1]))
    return (1.0, float(n // 2))


def fit_decay(series: CorrelationSeries, window=None, min_points: int = 3) -> GapEstimate:
    """Weighted least squares of ln G against the grid inside ``window``.

    Points whose value is not at least 2 sigma above zero are dropped; with exact
    (zero-error) input they are kept only if strictly positive.
    """
    lo, hi = default_window(series) if window is None else (float(window[0]), float(window[1]))
    if lo > hi:
        raise ValueError(f"empty fit window [{lo}, {hi}]")
    if series.kind.endswith("integer") and hi > series.meta.get("n", np.inf) / 2 + 1e-9:
        raise ValueError("integer fit window must stay within k <= n/2 (cyclic symmetry)")
    sel = (series.grid >= lo - 1e-12) & (series.grid <= hi + 1e-12)
    x, y, e = series.grid[sel], series.values[sel], series.errors[sel]
    ok = (y > 2 * e) & (y > 0)
    excluded = [float(t) for t in x[~ok]]
    x, y, e = x[ok], y[ok], e[ok]
    if x.size < min_points:
        raise ValueError(f"only {x.size} positive points in window [{lo}, {hi}], need {min_points}")

    ly = np.log(y)
    sig = e / y
    if np.all(sig > 0):
        w = 1.0 / sig ** 2
    else:
        # exact data: unweighted fit, error from residual scatter
        w = np.ones_like(ly)
    X = np.column_stack([np.ones_like(x), x])
    A = X.T @ (w[:, None] * X)
    coef = np.linalg.solve(A, X.T @ (w * ly))
    resid = ly - X @ coef
    dof = max(x.size - 2, 1)
    chi2 = float(np.sum(w * resid ** 2) / dof)
    cov = np.linalg.inv(A)
    if not np.all(sig > 0):
        cov = cov * chi2
    return GapEstimate(float(-coef[1]), float(np.sqrt(max(cov[1, 1], 0.0))), (lo, hi),
                       chi2 if np.all(sig > 0) else 0.0, int(x.size), excluded)


def classify(edge: GapEstimate | None, bulk: GapEstimate | None, beta: float, n: int,
             model: str = "", sigmas: float = 2.0) -> WormholeReport:
    """edge_like when the edge correlator decays slower than the bulk by a
    ``sigmas`` margin on both error bars, bulk_like for the mirror case."""
    if edge is None or bulk is None:
        return WormholeReport(beta, n, model, edge, bulk, "indeterminate",
                              "fit failed for at least one site class")
    if edge.delta + sigmas * edge.err < bulk.delta - sigmas * bulk.err:
        label = "edge_like"
        note = (f"edge decays slower ({edge.delta:.4g} < {bulk.delta:.4g}): the edge path "
                f"dominates the low-lying entanglement spectrum")
    elif bulk.delta + sigmas * bulk.err < edge.delta - sigmas * edge.err:
        label = "bulk_like"
        note = (f"bulk decays slower ({bulk.delta:.4g} < {edge.delta:.4g}): the bulk path "
                f"dominates the low-lying entanglement spectrum")
    else:
        label = "indeterminate"
        note = f"decay rates overlap at {sigmas:g} sigma ({edge.delta:.4g} vs {bulk.delta:.4g})"
    return WormholeReport(beta, n, model, edge, bulk, label, note)


def valley_depth(series: CorrelationSeries, min_interior: int = 5) -> tuple[float, float]:
    """Depth of the grid minimum below the straight line joining the two
    endpoint values.  A minimum at an endpoint gives exactly 0."""
    if not series.kind.endswith("continuous"):
        raise ValueError("valley depth needs a continuous-time series")
    g = series.grid
    if g.size < min_interior + 2:
        raise ValueError(f"grid too coarse: {g.size - 2} interior points, need {min_interior}")
    beta = float(series.meta.get("beta", g[-1]))
    if abs(g[0]) > 1e-9 or abs(g[-1] - beta) > 1e-9 * max(1.0, beta):
        raise ValueError("continuous series must include both endpoints tau=0 and tau=beta")
    v, e = series.values, series.errors
    i = int(np.argmin(v))
    if i in (0, g.size - 1):
        return 0.0, 0.0
    x = (g[i] - g[0]) / (g[-1] - g[0])
    line = (1 - x) * v[0] + x * v[-1]
    err = np.sqrt(((1 - x) * e[0]) ** 2 + (x * e[-1]) ** 2 + e[i] ** 2)
    return float(line - v[i]), float(err)


def write_report(path, reports) -> None:
    if isinstance(reports, WormholeReport):
        reports = [reports]
    body = [r.to_dict() if isinstance(r, WormholeReport) else r for r in reports]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(body, f, indent=2, sort_keys=True)
        f.write("\n")


def gap_to_dict(g: GapEstimate) -> dict:
    return asdict(g)
