"""Command-line experiment runner.

    replica-es run --config exp.yaml [--seed S --chains C --out DIR]
    replica-es oracle --config exp.yaml [--out DIR]
    replica-es compare qmc.csv oracle.csv
    replica-es reproduce fig2b [--size L]

Configs are YAML or JSON mappings.  Temperatures are given as ``T`` and turned
into beta = 1/T.  Exit codes: 0 success, 2 bad config or input, 3 sampler fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from . import analysis, measure, model, oracle, sse

log = logging.getLogger("replica_es")

EXIT_OK, EXIT_CONFIG, EXIT_FAULT = 0, 2, 3
WORKERS_ENV = "REPLICA_ES_WORKERS"
SITE_CLASSES = ("edgeA", "bulkA")

# temperature sweeps of the reproduction targets
TARGETS = {
    "fig2a": dict(T=[1.25, 0.625, 0.3125], therm=20_000, measure=200_000),
    "fig2b": dict(T=[1.25, 0.2, 0.1], therm=20_000, measure=200_000),
    "fig3a": dict(T=[2.5, 0.3125, 0.15625], therm=2_000, measure=20_000),
    "fig3b": dict(T=[2.5, 0.3125, 0.15625], therm=2_000, measure=20_000),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    preset: str | None = None
    geometry: str | None = None
    L: int | None = None
    pattern: str | None = None
    J_weak: float | None = None
    J_strong: float | None = None
    J_cut: float | None = None
    T: list = field(default_factory=lambda: [1.0])
    n: int = 8
    therm: int = 10_000
    measure: int = 100_000
    bins: int = 50
    chains: int = 1
    seed: int = 0
    site_classes: list = field(default_factory=lambda: list(SITE_CLASSES))
    tau_points: int = 16
    out: str = "results"
    name: str | None = None

    def __post_init__(self):
        if isinstance(self.T, (int, float)):
            self.T = [self.T]
        self.T = [float(t) for t in self.T]
        if not self.T:
            raise ConfigError("temperature list is empty")
        if any(not t > 0 for t in self.T):
            raise ConfigError("temperatures must be positive")
        for key in ("n", "therm", "measure", "bins", "chains", "tau_points"):
            v = getattr(self, key)
            if int(v) != v or v < (0 if key in ("therm", "tau_points") else 1):
                raise ConfigError(f"{key} must be a positive integer, got {v!r}")
            setattr(self, key, int(v))
        for key in ("J_weak", "J_strong", "J_cut"):
            v = getattr(self, key)
            if v is not None and not float(v) > 0:
                raise ConfigError(f"{key} must be positive")
        if self.preset is None and self.geometry is None:
            raise ConfigError("config needs either 'preset' or 'geometry'")
        if self.preset is not None and self.preset not in model.PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; expected one of {sorted(model.PRESETS)}")
        bad = set(self.site_classes) - set(SITE_CLASSES)
        if bad:
            raise ConfigError(f"unknown site classes {sorted(bad)}")

    @property
    def model_id(self) -> str:
        return self.name or self.preset or f"{self.geometry}{self.L}_{self.pattern or 'uniform'}"

    def betas(self) -> list[float]:
        return [1.0 / t for t in self.T]

    def graph(self) -> model.BondGraph:
        keys = ("geometry", "L", "pattern", "J_weak", "J_strong", "J_cut")
        over = {k: getattr(self, k) for k in keys}
        try:
            if self.preset is not None:
                return model.from_preset(self.preset, **over)
            return model.build(**{k: v for k, v in over.items() if v is not None})
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    if "beta" in raw:
        raise ConfigError("give temperatures as 'T'; beta is derived as 1/T")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc


def _fmt_T(t: float) -> str:
    return f"{t:g}".replace(".", "p")


def _chain_job(args):
    graph, n, beta, params, model_id = args
    part = model.bipartition_half(graph)
    return sse.run(graph, part, sse.ReplicaManifold(n, beta), params, model_id)


def sample(graph: model.BondGraph, n: int, beta: float, therm: int, measure_sweeps: int, bins: int,
           chains: int = 1, seed: int = 0, tau_points: int | None = 16, model_id: str = "custom",
           workers: int = 1) -> sse.RawSamples:
    """Run ``chains`` independent samplers with seeds seed, seed+1, ... and merge them."""
    jobs = [(graph, n, beta, sse.RunParams(therm, measure_sweeps, bins, seed + c, tau_points or None),
             model_id) for c in range(chains)]
    if workers > 1 and chains > 1:
        with ProcessPoolExecutor(max_workers=min(workers, chains)) as pool:
            results = list(pool.map(_chain_job, jobs))
    else:
        results = [_chain_job(j) for j in jobs]
    return measure.bin_and_merge(results)


def _try_fit(series):
    try:
        return analysis.fit_decay(series)
    except ValueError as exc:
        log.warning("%s fit failed: %s", series.site_class, exc)
        return None


def _try_valley(series):
    if series is None:
        return None
    try:
        return analysis.valley_depth(series)
    except ValueError:
        return None


def analyse(samples: sse.RawSamples, site_classes=SITE_CLASSES, L: int | None = None):
    """Series for each site class plus the classification report."""
    integer = {c: measure.integer_series(samples, c) for c in site_classes}
    cont = {}
    if samples.tau_grid.size:
        cont = {c: measure.continuous_series(samples, c) for c in site_classes}
    fits = {c: _try_fit(s) for c, s in integer.items()}
    rep = analysis.classify(fits.get("edgeA"), fits.get("bulkA"), samples.meta["beta"],
                            samples.meta["n"], samples.meta["model"])
    rep.L = L
    rep.valley_edge = _try_valley(cont.get("edgeA"))
    rep.valley_bulk = _try_valley(cont.get("bulkA"))
    return integer, cont, rep


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> list[str]:
    graph = cfg.graph()
    os.makedirs(cfg.out, exist_ok=True)
    workers = _workers() if workers is None else workers
    written, reports = [], []
    for T, beta in zip(cfg.T, cfg.betas()):
        log.info("%s: T=%g (beta=%g), n=%d, %d chain(s)", cfg.model_id, T, beta, cfg.n, cfg.chains)
        samples = sample(graph, cfg.n, beta, cfg.therm, cfg.measure, cfg.bins, cfg.chains, cfg.seed,
                         cfg.tau_points, cfg.model_id, workers)
        integer, cont, rep = analyse(samples, cfg.site_classes, graph.L)
        d = rep.to_dict()
        e = measure.energy(samples)
        d["energy"] = dict(E=e.mean, err=e.error) if cfg.n == 1 else None
        d["chains"] = cfg.chains
        d["seed"] = cfg.seed
        reports.append(d)
        path = os.path.join(cfg.out, f"{cfg.model_id}_T{_fmt_T(T)}.csv")
        measure.write_csv(path, list(integer.values()) + list(cont.values()))
        written.append(path)
    path = os.path.join(cfg.out, f"{cfg.model_id}_report.json")
    analysis.write_report(path, reports)
    written.append(path)
    return written


def oracle_series(graph, part, beta: float, n: int, site_classes=SITE_CLASSES, tau_points: int = 16,
                  model_id: str = "custom") -> list[measure.CorrelationSeries]:
    """Exact integer and continuous series averaged over the sites of each class."""
    classes = {"edgeA": model.edge_sites(part), "bulkA": model.bulk_sites(part)}
    rdm = oracle.thermal_rdm(graph, part, beta)
    meta = dict(n=n, beta=beta, model=model_id)
    out = []
    for c in site_classes:
        sites = classes[c]
        vals = np.mean([oracle.integer_series(rdm, n, oracle.sz_a(part, s)) for s in sites], axis=0)
        out.append(measure.CorrelationSeries(c, np.arange(n + 1), vals, np.zeros(n + 1),
                                             "oracle_integer", meta))
    if tau_points:
        grid = sse.tau_grid_for(beta, tau_points)
        for c in site_classes:
            vals = np.mean([oracle.continuous_corr(graph, part, beta, n, s, grid) for s in classes[c]],
                           axis=0)
            out.append(measure.CorrelationSeries(c, grid, vals, np.zeros(grid.size),
                                                 "oracle_continuous", meta))
    return out


def run_oracle(cfg: ExperimentConfig) -> list[str]:
    graph = cfg.graph()
    if graph.n_sites > oracle.MAX_SITES:
        raise ConfigError(f"{graph.n_sites} sites exceed the oracle cap of {oracle.MAX_SITES}")
    part = model.bipartition_half(graph)
    os.makedirs(cfg.out, exist_ok=True)
    written, spectra = [], []
    for T, beta in zip(cfg.T, cfg.betas()):
        series = oracle_series(graph, part, beta, cfg.n, cfg.site_classes, cfg.tau_points, cfg.model_id)
        path = os.path.join(cfg.out, f"{cfg.model_id}_T{_fmt_T(T)}_oracle.csv")
        measure.write_csv(path, series)
        written.append(path)
        spec = oracle.eh_spectrum(oracle.thermal_rdm(graph, part, beta))
        spectra.append(dict(model=cfg.model_id, L=graph.L, T=T, beta=beta,
                            energy=oracle.thermal_energy(graph, part, beta),
                            levels=[float(x) for x in spec.levels],
                            degeneracies=[[float(x), int(d)] for x, d in spec.degeneracies],
                            dropped=spec.dropped))
    path = os.path.join(cfg.out, f"{cfg.model_id}_spectrum.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(spectra, f, indent=2)
        f.write("\n")
    written.append(path)
    return written


def _base_kind(kind: str) -> str:
    return kind.split("_")[-1]


def compare_rows(rows_a: list[dict], rows_b: list[dict], threshold: float = 3.0) -> dict:
    """Pointwise z-scores between two datasets in the shared CSV schema."""
    for key in ("n", "beta"):
        va = {r[key] for r in rows_a}
        vb = {r[key] for r in rows_b}
        if va != vb:
            raise ConfigError(f"datasets disagree on {key}: {sorted(va)} vs {sorted(vb)}")
    index = {(r["site_class"], _base_kind(r["kind"]), round(r["tau"], 9)): r for r in rows_b}
    points = []
    for r in rows_a:
        key = (r["site_class"], _base_kind(r["kind"]), round(r["tau"], 9))
        other = index.get(key)
        if other is None:
            continue
        sig = float(np.hypot(r["err"], other["err"]))
        diff = r["G"] - other["G"]
        if sig > 0:
            z = diff / sig
        else:
            # both values exact: equal up to round-off or a genuine mismatch
            z = 0.0 if abs(diff) <= 1e-10 else float("inf")
        points.append(dict(site_class=key[0], kind=key[1], tau=r["tau"], a=r["G"], b=other["G"],
                           err=sig, z=z))
    if not points:
        raise ConfigError("datasets have no points in common")
    zmax = max(abs(p["z"]) for p in points)
    expected = len(points) * 0.0027
    return dict(points=points, n_points=len(points), max_abs_z=zmax, threshold=threshold,
                passed=bool(zmax <= threshold),
                note=(f"{len(points)} comparisons; about {expected:.2f} points beyond 3 sigma "
                      f"are expected by chance alone"))


def format_table(result: dict) -> str:
    lines = [f"{'class':8s} {'kind':10s} {'tau':>9s} {'a':>11s} {'b':>11s} {'err':>9s} {'z':>7s}"]
    for p in result["points"]:
        lines.append(f"{p['site_class']:8s} {p['kind']:10s} {p['tau']:9.4f} {p['a']:11.6f} "
                     f"{p['b']:11.6f} {p['err']:9.2e} {p['z']:7.2f}")
    lines.append(f"max |z| = {result['max_abs_z']:.2f}: {'PASS' if result['passed'] else 'FAIL'} "
                 f"at {result['threshold']:g} sigma ({result['note']})")
    return "\n".join(lines)


def reproduce(target: str, size: int | None = None, out: str = "results", seed: int = 0,
              chains: int = 1, T=None, therm=None, measure_sweeps=None, n: int = 8) -> list[str]:
    if target not in TARGETS:
        raise ConfigError(f"unknown target {target!r}; expected one of {sorted(TARGETS)}")
    t = TARGETS[target]
    cfg = ExperimentConfig(preset=target, L=size, T=T or t["T"], n=n, therm=therm or t["therm"],
                           measure=measure_sweeps or t["measure"], chains=chains, seed=seed,
                           out=out, name=target if size is None else f"{target}_L{size}")
    return run_experiment(cfg)


# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="replica-es", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="sample a configured experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--chains", type=int)
    r.add_argument("--out")

    o = sub.add_parser("oracle", help="exact reference for a small configured system")
    o.add_argument("--config", required=True)
    o.add_argument("--out")

    c = sub.add_parser("compare", help="pointwise z-scores between two CSV datasets")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--json", help="also write the comparison as JSON here")
    c.add_argument("--threshold", type=float, default=3.0)

    g = sub.add_parser("reproduce", help="temperature sweep of a named benchmark geometry")
    g.add_argument("target", choices=sorted(TARGETS))
    g.add_argument("--size", type=int, help="linear size L (square default 16; 32 for the full-size run)")
    g.add_argument("--out", default="results")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--chains", type=int, default=1)
    g.add_argument("--T", type=float, nargs="+", help="override the temperature list")
    g.add_argument("--therm", type=int)
    g.add_argument("--sweeps", type=int, help="measurement sweeps per chain")
    g.add_argument("--n", type=int, default=8, help="replica count")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.cmd == "run":
            cfg = load_config(args.config, seed=args.seed, chains=args.chains, out=args.out)
            paths = run_experiment(cfg)
        elif args.cmd == "oracle":
            cfg = load_config(args.config, out=args.out)
            paths = run_oracle(cfg)
        elif args.cmd == "compare":
            try:
                rows_a, rows_b = measure.read_csv(args.a), measure.read_csv(args.b)
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(str(exc)) from exc
            result = compare_rows(rows_a, rows_b, args.threshold)
            print(format_table(result))
            if args.json:
                with open(args.json, "w", encoding="utf-8") as f:
                    json.dump(result, f, indent=2)
                    f.write("\n")
            return EXIT_OK if result["passed"] else 1
        else:
            paths = reproduce(args.target, args.size, args.out, args.seed, args.chains, args.T,
                              args.therm, args.sweeps, args.n)
            with open(paths[-1], encoding="utf-8") as f:
                for rep in json.load(f):
                    print(f"T={rep['T']:g}: {rep['classification']}  ({rep['ratio_note']})")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except oracle.OracleSizeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except sse.SamplerFault as exc:
        print(f"sampler fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
