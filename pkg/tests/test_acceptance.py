"""Acceptance criteria, one PASS/FAIL line each (shown in the pytest summary).

Sweep counts are sized for a single core; every run uses a fixed seed, so the
outcome is reproducible.
"""

import json
import time

import numpy as np
import pytest
import yaml

from replica_es import analysis, cli, measure, model, oracle, sse
from replica_es.measure import CorrelationSeries

from conftest import ACCEPTANCE_LINES

SEED = 2024
CYCLIC_CHECKS = []   # (label, series) from every acceptance run


def record(num, ok, detail):
    line = f"CRITERION {num}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _cyclic_ok(series):
    n = len(series.grid) - 1
    v, e = series.values, series.errors
    return all(abs(v[k] - v[n - k]) <= 2 * np.hypot(e[k], e[n - k]) for k in range(n + 1))


def _sweep(preset, temps, therm, sweeps, n=8):
    g = model.from_preset(preset)
    reports = []
    for T in temps:
        s = cli.sample(g, n, 1.0 / T, therm, sweeps, 50, seed=SEED, tau_points=None, model_id=preset)
        integer, _, rep = cli.analyse(s, L=g.L)
        CYCLIC_CHECKS.extend((f"{preset} T={T} {c}", ser) for c, ser in integer.items())
        reports.append((T, rep))
    return reports


def _fmt(rep):
    e, b = rep.delta_edge, rep.delta_bulk
    f = lambda x: "n/a" if x is None else f"{x.delta:.4f}+-{x.err:.4f}"
    return f"edge {f(e)} bulk {f(b)} -> {rep.classification}"


@pytest.fixture(scope="module")
def dimer8():
    g = model.build_chain(8, "dimer_bulk", 1.0, 2.0)
    return g, model.bipartition_half(g)


def test_criterion_1_integer_oracle(dimer8):
    g, p = dimer8
    beta, n = 1.0, 4
    s = sse.run(g, p, sse.ReplicaManifold(n, beta), sse.RunParams(20_000, 1_000_000, 50, SEED, None), "dimer8")
    rdm = oracle.thermal_rdm(g, p, beta)
    worst_z, worst_dev, ok = 0.0, 0.0, True
    for cls, sites in (("edgeA", model.edge_sites(p)), ("bulkA", model.bulk_sites(p))):
        ser = measure.integer_series(s, cls)
        CYCLIC_CHECKS.append((f"dimer8 beta=1 {cls}", ser))
        exact = np.mean([oracle.integer_series(rdm, n, oracle.sz_a(p, i)) for i in sites], axis=0)
        dev = np.abs(ser.values - exact)
        z = np.where(ser.errors > 0, dev / np.where(ser.errors > 0, ser.errors, 1), np.where(dev < 1e-12, 0, np.inf))
        worst_z, worst_dev = max(worst_z, z.max()), max(worst_dev, dev.max())
        ok &= bool(np.all(z <= 3) and np.all(dev <= 5e-3))
    assert record(1, ok, f"L=8 dimer chain beta=1 n=4, 1e6 sweeps: max|z|={worst_z:.2f} (<=3), "
                         f"max|dev|={worst_dev:.2e} (<=5e-3)")


def test_criterion_2_continuous_oracle(dimer8):
    g, p = dimer8
    beta, n = 2.0, 2
    s = sse.run(g, p, sse.ReplicaManifold(n, beta), sse.RunParams(20_000, 400_000, 50, SEED, 16), "dimer8")
    worst_z, ok = 0.0, True
    depth = {}
    for cls, sites in (("edgeA", model.edge_sites(p)), ("bulkA", model.bulk_sites(p))):
        ser = measure.continuous_series(s, cls)
        exact = np.mean([oracle.continuous_corr(g, p, beta, n, i, ser.grid) for i in sites], axis=0)
        dev = np.abs(ser.values - exact)
        z = np.where(ser.errors > 0, dev / np.where(ser.errors > 0, ser.errors, 1), np.where(dev < 1e-12, 0, np.inf))
        worst_z = max(worst_z, z.max())
        ok &= bool(np.all(z <= 3))
        depth[cls] = analysis.valley_depth(ser)
        CYCLIC_CHECKS.append((f"dimer8 beta=2 {cls}", measure.integer_series(s, cls)))
    de, db = depth["edgeA"], depth["bulkA"]
    ok &= de[0] > 2 * de[1] and abs(db[0]) <= 2 * db[1] + 1e-15
    assert record(2, ok, f"beta=2 n=2 18-point grid: max|z|={worst_z:.2f}; edge valley {de[0]:.4f}+-{de[1]:.4f} "
                         f"(>2 sigma); bulk valley {db[0]:.4f}+-{db[1]:.4f} (consistent with 0)")


def test_criterion_3_n1_reduction():
    g = model.build_chain(4, "uniform", 1.0, 1.0)
    p = model.bipartition_half(g)
    s = sse.run(g, p, sse.ReplicaManifold(1, 2.0), sse.RunParams(5000, 400_000, 50, SEED, None), "ring4")
    e = measure.energy(s)
    exact = oracle.thermal_energy(g, p, 2.0)
    g0_exact = bool(np.all(s.g_int[:, :, 0] == 0.25) and np.all(s.g_loop[:, :, 0] == 0.25))
    ok = abs(e.mean - exact) <= 3 * e.error and g0_exact
    assert record(3, ok, f"n=1 L=4 ring beta=2: E={e.mean:.5f}+-{e.error:.5f} vs exact {exact:.5f}; "
                         f"G(0)=1/4 exactly: {g0_exact}")


def test_criterion_4_dimer_chain_edge_like():
    t = time.time()
    reps = _sweep("fig2a", [1.25, 0.625, 0.3125], 20_000, 100_000)
    classes_ok = all(r.classification == "edge_like" for _, r in reps)
    d = [r.delta_edge for _, r in reps]
    mono = all(d[i + 1].delta <= d[i].delta + 2 * np.hypot(d[i].err, d[i + 1].err) for i in range(len(d) - 1))
    detail = "; ".join(f"T={T}: {_fmt(r)}" for T, r in reps)
    assert record(4, classes_ok and mono, f"L=32 dimer chain, edge rate non-increasing={mono} "
                                          f"[{time.time() - t:.0f}s]: {detail}")


def test_criterion_5_edge_gapped_chain_reversal():
    t = time.time()
    (_, hi), (_, lo) = _sweep("fig2b", [1.25, 0.1], 20_000, 100_000)
    ok = hi.classification == "bulk_like" and lo.classification == "edge_like"
    assert record(5, ok, f"L=32 edge-gapped chain [{time.time() - t:.0f}s]: T=1.25 {_fmt(hi)}; T=0.1 {_fmt(lo)}")


@pytest.mark.xfail(reason="no edge-gapped square layout found whose bulk decays faster than the edge "
                          "at low T; the ordered bulk plateau keeps the bulk rate far below the edge rate",
                   strict=True)
def test_criterion_6_square_reversal():
    t = time.time()
    (_, hi), (_, lo) = _sweep("fig3b", [2.5, 0.15625], 2_000, 10_000)
    ok = hi.classification == "bulk_like" and lo.classification == "edge_like"
    assert record(6, ok, f"L=16 edge-gapped torus [{time.time() - t:.0f}s]: T=2.5 {_fmt(hi)}; "
                         f"T=0.15625 {_fmt(lo)}")


def test_criterion_7_properties(tmp_path):
    # cyclicity on every run above (test order is file order)
    bad = [label for label, ser in CYCLIC_CHECKS if not _cyclic_ok(ser)]
    cyc_ok = bool(CYCLIC_CHECKS) and not bad

    rng = np.random.default_rng(SEED)
    k = np.arange(41)
    fits = {}
    for rate in (0.1, 0.7, 2.0):
        g = 0.25 * np.exp(-rate * k)
        ser = CorrelationSeries("bulkA", k, g * (1 + 0.01 * rng.normal(size=k.size)), 0.01 * g, "integer",
                                dict(n=40, beta=1.0, model="synthetic"))
        fits[rate] = analysis.fit_decay(ser, window=(0, 20)).delta
    fit_ok = all(abs(fits[r] - r) <= 0.02 * r for r in fits)

    worst_norm = 0.0
    for pattern in ("uniform", "dimer_bulk", "edge_gapped"):
        g = model.build_chain(8, pattern, 1.0, 2.0)
        p = model.bipartition_half(g)
        for beta in (0.1, 1.0, 10.0):
            spec = oracle.eh_spectrum(oracle.thermal_rdm(g, p, beta))
            worst_norm = max(worst_norm, abs(spec.probabilities.sum() - 1))
    norm_ok = worst_norm <= 1e-10

    cfg = dict(geometry="chain", L=8, pattern="dimer_bulk", J_weak=1.0, J_strong=2.0, T=[0.5], n=4,
               therm=500, measure=5000, bins=10, name="rerun")
    path = tmp_path / "rerun.yaml"
    path.write_text(yaml.safe_dump(cfg))
    for d in ("a", "b"):
        assert cli.main(["run", "--config", str(path), "--seed", "3", "--out", str(tmp_path / d)]) == 0
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("rerun_T0p5.csv", "rerun_report.json"))

    ok = cyc_ok and fit_ok and norm_ok and same
    fits_txt = ", ".join(f"{r}->{v:.4f}" for r, v in fits.items())
    assert record(7, ok, f"cyclicity on {len(CYCLIC_CHECKS)} series ok={cyc_ok} {bad}; synthetic fits {fits_txt} "
                         f"(2%); EH normalization max dev {worst_norm:.1e}; byte-identical rerun={same}")
