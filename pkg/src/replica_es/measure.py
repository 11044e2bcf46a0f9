"""Estimators for the entanglement-Hamiltonian correlator at integer replica
separation and for the same-replica continuous-time correlator, with
jackknife errors over bins."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .model import Site
from .sse import RawSamples

CSV_COLUMNS = ("tau", "G", "err", "site_class", "kind", "n", "beta", "model")
KINDS = ("integer", "continuous", "oracle_integer", "oracle_continuous")
# meta keys that must agree before chains can be merged
_MERGE_KEYS = ("model", "geometry", "L", "pattern", "n", "beta", "n_sites", "jsum_quarter",
               "tau_points", "site_classes")


@dataclass
class BinnedEstimate:
    mean: float
    error: float
    n_bins: int
    tau_bins: float = 0.0   # integrated autocorrelation time in units of bins

    def __post_init__(self):
        if self.error < 0:
            raise ValueError("error must be non-negative")


@dataclass
class CorrelationSeries:
    site_class: str
    grid: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    kind: str = "integer"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if not (self.grid.shape == self.values.shape == self.errors.shape):
            raise ValueError("grid, values and errors must have equal length")
        if self.grid.size > 1 and np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.kind not in KINDS:
            raise ValueError(f"unknown series kind {self.kind!r}")

    def __len__(self):
        return self.grid.size


def jackknife(data: np.ndarray, func: Callable[[np.ndarray], np.ndarray] | None = None):
    """Leave-one-bin-out jackknife along axis 0.

    ``func`` maps an array of bin means (averaged over the retained bins) to the
    estimate; by default it is the identity, i.e. the plain mean.
    """
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    if n < 2:
        raise ValueError("jackknife needs at least two bins")
    func = func or (lambda x: x)
    total = data.sum(axis=0)
    full = func(total / n)
    loo = np.array([func((total - data[i]) / (n - 1)) for i in range(n)])
    mean_loo = loo.mean(axis=0)
    err = np.sqrt((n - 1) / n * ((loo - mean_loo) ** 2).sum(axis=0))
    # bias-corrected estimate
    return n * full - (n - 1) * mean_loo, err


def binning_tau(data: np.ndarray) -> float:
    """Integrated autocorrelation time of the bin series (in bins), from the
    growth of the error estimate when neighbouring bins are merged pairwise.
    Returns 0 for uncorrelated bins."""
    data = np.asarray(data, dtype=float)
    n = data.shape[0] // 2
    if n < 5:
        return 0.0
    fine = data.std(ddof=1) / np.sqrt(data.shape[0])
    if fine == 0:
        return 0.0
    coarse_bins = data[: 2 * n].reshape(n, 2, *data.shape[1:]).mean(axis=1)
    coarse = coarse_bins.std(ddof=1) / np.sqrt(n)
    return float(max(0.0, 0.5 * ((coarse / fine) ** 2 - 1.0)))


def estimate(bin_values: np.ndarray) -> BinnedEstimate:
    mean, err = jackknife(bin_values)
    return BinnedEstimate(float(mean), float(err), int(len(bin_values)), binning_tau(bin_values))


def _site_id(site) -> int:
    return site.id if isinstance(site, Site) else int(site)


def _a_index(samples: RawSamples, site) -> int:
    sid = _site_id(site)
    hits = np.flatnonzero(samples.a_sites == sid)
    if hits.size == 0:
        raise ValueError(f"site {sid} is not in region A")
    return int(hits[0])


def _g_int(samples: RawSamples, estimator: str) -> np.ndarray:
    if estimator == "loop":
        return samples.g_loop
    if estimator == "plain":
        return samples.g_int
    raise ValueError(f"unknown estimator {estimator!r}")


def corr_integer_tau(samples: RawSamples, site, k: int, estimator: str = "loop") -> BinnedEstimate:
    """<S^z_i(k) S^z_i(0)> with the two spins on glue layers k apart, averaged
    over all n choices of origin layer."""
    n = samples.meta["n"]
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    ai = _a_index(samples, site)
    return estimate(_g_int(samples, estimator)[:, ai, k])


def _class_sites(samples: RawSamples, site_class: str) -> list[int]:
    classes = samples.meta.get("site_classes", {})
    if site_class not in classes:
        raise ValueError(f"site class {site_class!r} was not recorded; have {sorted(classes)}")
    return list(classes[site_class])


def _series_meta(samples: RawSamples) -> dict:
    m = samples.meta
    return dict(n=m["n"], beta=m["beta"], model=m["model"])


def integer_series(samples: RawSamples, site_class: str = "edgeA", sites: Sequence[int] | None = None,
                   estimator: str = "loop") -> CorrelationSeries:
    """G(k), k = 0..n, averaged over the sites of ``site_class`` (or ``sites``)."""
    sites = _class_sites(samples, site_class) if sites is None else list(sites)
    idx = [_a_index(samples, s) for s in sites]
    data = _g_int(samples, estimator)[:, idx, :].mean(axis=1)
    mean, err = jackknife(data)
    n = samples.meta["n"]
    # G(0) = 1/4 holds configuration by configuration
    mean[0], err[0] = 0.25, 0.0
    return CorrelationSeries(site_class, np.arange(n + 1), mean, err, "integer", _series_meta(samples))


def corr_continuous_tau(samples: RawSamples, site, tau_grid=None) -> CorrelationSeries:
    """Same-replica correlator for one site on (a subset of) the sampled tau grid."""
    sid = _site_id(site)
    if sid not in set(samples.a_sites.tolist()):
        raise ValueError(f"site {sid} is not in region A")
    hits = np.flatnonzero(samples.cont_sites == sid)
    if hits.size == 0:
        raise ValueError(f"continuous correlator was not recorded for site {sid}")
    cols = _grid_columns(samples, tau_grid)
    data = samples.g_cont[:, hits[0], :][:, cols]
    mean, err = jackknife(data)
    return CorrelationSeries(_site_class_of(samples, sid), samples.tau_grid[cols], mean, err,
                             "continuous", _series_meta(samples))


def continuous_series(samples: RawSamples, site_class: str = "edgeA",
                      sites: Sequence[int] | None = None, tau_grid=None) -> CorrelationSeries:
    sites = _class_sites(samples, site_class) if sites is None else list(sites)
    pos = {int(s): i for i, s in enumerate(samples.cont_sites)}
    missing = [s for s in sites if s not in pos]
    if missing:
        raise ValueError(f"continuous correlator was not recorded for sites {missing}")
    cols = _grid_columns(samples, tau_grid)
    data = samples.g_cont[:, [pos[s] for s in sites], :].mean(axis=1)[:, cols]
    mean, err = jackknife(data)
    return CorrelationSeries(site_class, samples.tau_grid[cols], mean, err, "continuous",
                             _series_meta(samples))


def _grid_columns(samples: RawSamples, tau_grid) -> np.ndarray:
    grid = samples.tau_grid
    if grid.size == 0:
        raise ValueError("continuous correlator was disabled for this run")
    if tau_grid is None:
        return np.arange(grid.size)
    tau = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    beta = samples.meta["beta"]
    if np.any(tau < -1e-12) or np.any(tau > beta + 1e-12):
        raise ValueError(f"tau must lie in [0, {beta}]")
    cols = np.array([np.argmin(np.abs(grid - t)) for t in tau])
    if np.any(np.abs(grid[cols] - tau) > 1e-9 * max(1.0, beta)):
        raise ValueError("requested tau values are not on the sampled grid")
    return cols


def _site_class_of(samples: RawSamples, sid: int) -> str:
    for name, sites in samples.meta.get("site_classes", {}).items():
        if sid in sites:
            return name
    return "bulkA"


def energy(samples: RawSamples) -> BinnedEstimate:
    """Thermal energy from the mean operator count (meaningful for n = 1)."""
    return estimate(samples.energy_bins())


def bin_and_merge(chains: Sequence[RawSamples]) -> RawSamples:
    """Concatenate the bins of independent chains."""
    chains = list(chains)
    if not chains:
        raise ValueError("no chains to merge")
    if len(chains) == 1:
        return chains[0]
    ref = chains[0]
    for c in chains[1:]:
        for key in _MERGE_KEYS:
            if c.meta.get(key) != ref.meta.get(key):
                raise ValueError(f"cannot merge chains: metadata {key!r} differs "
                                 f"({ref.meta.get(key)!r} vs {c.meta.get(key)!r})")
        if not (np.array_equal(c.a_sites, ref.a_sites) and np.array_equal(c.cont_sites, ref.cont_sites)
                and np.allclose(c.tau_grid, ref.tau_grid)):
            raise ValueError("cannot merge chains: measured sites or tau grids differ")
    seeds = tuple(s for c in chains for s in c.seeds)
    if len(set(seeds)) < len(seeds):
        warnings.warn("merging chains with duplicate seeds; their bins are not independent",
                      RuntimeWarning, stacklevel=2)
    cat = lambda name: np.concatenate([getattr(c, name) for c in chains], axis=0)
    meta = dict(ref.meta)
    meta["measure_sweeps"] = sum(c.meta["measure_sweeps"] for c in chains)
    meta["chains"] = len(chains)
    return replace(ref, meta=meta, g_int=cat("g_int"), g_loop=cat("g_loop"), g_cont=cat("g_cont"),
                   nops=cat("nops"), mag_hist=cat("mag_hist"), seeds=seeds)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def series_rows(series: CorrelationSeries, kind: str | None = None) -> list[dict]:
    kind = kind or series.kind
    m = series.meta
    return [
        dict(tau=float(t), G=float(g), err=float(e), site_class=series.site_class, kind=kind,
             n=int(m.get("n", 0)), beta=float(m.get("beta", 0.0)), model=str(m.get("model", "")))
        for t, g, e in zip(series.grid, series.values, series.errors)
    ]


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_csv(path, series_list: Sequence[CorrelationSeries], kind: str | None = None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in series_list:
        for row in series_rows(s, kind):
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(buf.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: expected columns {CSV_COLUMNS}, got {reader.fieldnames}")
        rows = []
        for r in reader:
            rows.append(dict(tau=float(r["tau"]), G=float(r["G"]), err=float(r["err"]),
                             site_class=r["site_class"], kind=r["kind"], n=int(r["n"]),
                             beta=float(r["beta"]), model=r["model"]))
    return rows


def rows_to_series(rows: Sequence[dict]) -> list[CorrelationSeries]:
    """Group CSV rows back into series keyed by (site_class, kind)."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["site_class"], r["kind"]), []).append(r)
    out = []
    for (cls, kind), rs in groups.items():
        rs = sorted(rs, key=lambda r: r["tau"])
        meta = dict(n=rs[0]["n"], beta=rs[0]["beta"], model=rs[0]["model"])
        out.append(CorrelationSeries(cls, [r["tau"] for r in rs], [r["G"] for r in rs],
                                     [r["err"] for r in rs], kind, meta))
    return out
