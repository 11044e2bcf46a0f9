import numpy as np
import pytest

from replica_es import model, oracle

from conftest import ring4_energy

# frozen reference values, dimer_bulk L=8, beta=1, n=4
EDGE_B1_N4 = [0.25, 0.2115642855817074, 0.2038366818826658, 0.2115642855817074, 0.25]
BULK_B1_N4 = [0.25, 0.0529216351098181, 0.03287941402634837, 0.0529216351098181, 0.25]
# continuous, beta=2, n=2, tau = 0, 0.5, 1, 2
EDGE_CONT = [0.25, 0.11126101, 0.07875827, 0.22815234]
BULK_CONT = [0.25, 0.09556839, 0.0441374, 0.02558899]


def test_thermal_energy_against_closed_form(ring4):
    g, p = ring4
    for beta in (0.5, 2.0, 10.0):
        assert oracle.thermal_energy(g, p, beta) == pytest.approx(ring4_energy(beta), abs=1e-12)


def test_two_site_singlet_rdm():
    g = model.two_site()
    p = model.bipartition_custom(g, [0])
    rdm = oracle.thermal_rdm(g, p, 100.0)
    np.testing.assert_allclose(rdm, np.eye(2) / 2, atol=1e-12)
    series = oracle.integer_series(rdm, 4, oracle.sz_a(p, 0))
    np.testing.assert_allclose(series, 0.25, atol=1e-12)


def test_integer_series_frozen(dimer8):
    g, p = dimer8
    rdm = oracle.thermal_rdm(g, p, 1.0)
    for s in (0, 3):
        np.testing.assert_allclose(oracle.integer_series(rdm, 4, oracle.sz_a(p, s)), EDGE_B1_N4, atol=1e-10)
    for s in (1, 2):
        np.testing.assert_allclose(oracle.integer_series(rdm, 4, oracle.sz_a(p, s)), BULK_B1_N4, atol=1e-10)


def test_continuous_frozen(dimer8):
    g, p = dimer8
    taus = [0, 0.5, 1.0, 2.0]
    np.testing.assert_allclose(oracle.continuous_corr(g, p, 2.0, 2, 3, taus), EDGE_CONT, atol=1e-7)
    np.testing.assert_allclose(oracle.continuous_corr(g, p, 2.0, 2, 1, taus), BULK_CONT, atol=1e-7)


def test_continuous_endpoints_match_integer(dimer8):
    g, p = dimer8
    rdm = oracle.thermal_rdm(g, p, 2.0)
    for s in (0, 1):
        ends = oracle.continuous_corr(g, p, 2.0, 2, s, [0.0, 2.0])
        sz = oracle.sz_a(p, s)
        assert ends[0] == pytest.approx(oracle.integer_corr(rdm, 2, sz, 0), abs=1e-12)
        assert ends[1] == pytest.approx(oracle.integer_corr(rdm, 2, sz, 1), abs=1e-12)


def test_n1_continuous_is_thermal_autocorrelation(ring4):
    g, p = ring4
    # for n = 1 the glue is trivial: tau = beta closes on the same layer
    vals = oracle.continuous_corr(g, p, 1.0, 1, 0, [0.0, 1.0])
    np.testing.assert_allclose(vals, 0.25, atol=1e-12)


def test_cyclic_symmetry():
    g = model.build_chain(8, "edge_gapped", 1, 2)
    p = model.bipartition_half(g)
    rdm = oracle.thermal_rdm(g, p, 1.0)
    sz = oracle.sz_a(p, 0)
    assert oracle.integer_corr(rdm, 3, sz, 1) == pytest.approx(oracle.integer_corr(rdm, 3, sz, 2), abs=1e-12)


def test_high_temperature_flat(dimer8):
    # rho_A -> identity, so every replica separation gives 1/4
    g, p = dimer8
    rdm = oracle.thermal_rdm(g, p, 1e-6)
    series = oracle.integer_series(rdm, 6, oracle.sz_a(p, 1))
    np.testing.assert_allclose(series, 0.25, atol=1e-6)


def test_eh_spectrum_normalization(dimer8):
    g, p = dimer8
    spec = oracle.eh_spectrum(oracle.thermal_rdm(g, p, 1.0))
    assert abs(spec.probabilities.sum() - 1) < 1e-10
    assert np.all(np.diff(spec.levels) >= 0)
    assert sum(d for _, d in spec.degeneracies) == spec.levels.size


def test_eh_spectrum_rejects_non_psd():
    with pytest.raises(ValueError):
        oracle.eh_spectrum(np.diag([1.5, -0.5]))


def test_size_cap():
    g = model.build_chain(16)
    with pytest.raises(oracle.OracleSizeError):
        oracle.thermal_rdm(g, model.bipartition_half(g), 1.0)


def test_bad_arguments(dimer8):
    g, p = dimer8
    rdm = oracle.thermal_rdm(g, p, 1.0)
    with pytest.raises(ValueError):
        oracle.integer_corr(rdm, 4, oracle.sz_a(p, 0), 5)
    with pytest.raises(ValueError):
        oracle.sz_a(p, 6)
    with pytest.raises(ValueError):
        oracle.continuous_corr(g, p, 1.0, 2, 0, 1.5)
    with pytest.raises(ValueError):
        oracle.thermal_rdm(g, p, 0.0)


def test_large_beta_stays_finite(dimer8):
    g, p = dimer8
    rdm = oracle.thermal_rdm(g, p, 200.0)
    assert np.all(np.isfinite(rdm)) and abs(np.trace(rdm) - 1) < 1e-12


def test_sector_weights(ring4):
    g, p = ring4
    w = oracle.sector_weights(g, p, 2.0, 1)
    assert sum(w.values()) == pytest.approx(1.0)
    assert w[2] == pytest.approx(w[-2])
    assert oracle.sector_weights(g, p, 2.0, 3)[0] > 0
