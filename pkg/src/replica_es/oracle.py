"""Exact dense reference for small systems.

Basis: S^z product states with region-A sites in the most significant bits,
A sites ordered by id, then Abar sites ordered by id.  Bit value 1 means
S^z = +1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import BondGraph, Bipartition

MAX_SITES = 14


class OracleSizeError(ValueError):
    pass


@dataclass
class EhSpectrum:
    levels: np.ndarray          # xi_m = -ln p_m, ascending
    degeneracies: list[tuple[float, int]]
    dropped: int = 0

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(-self.levels)


def _site_order(part: Bipartition) -> list[int]:
    return part.sites_a + part.sites_abar


def _check_cap(graph: BondGraph, max_sites: int | None) -> None:
    cap = MAX_SITES if max_sites is None else max_sites
    if graph.n_sites > cap:
        raise OracleSizeError(f"{graph.n_sites} sites exceed the oracle cap of {cap}")


def hamiltonian(graph: BondGraph, part: Bipartition, max_sites: int | None = None) -> np.ndarray:
    """Dense H = sum_b J_b S_i . S_j in the oracle basis."""
    _check_cap(graph, max_sites)
    order = _site_order(part)
    N = graph.n_sites
    pos = {site: N - 1 - p for p, site in enumerate(order)}  # bit position
    dim = 1 << N
    states = np.arange(dim)
    H = np.zeros((dim, dim))
    for b in graph.bonds:
        bi, bj = pos[b.i], pos[b.j]
        si = ((states >> bi) & 1) - 0.5
        sj = ((states >> bj) & 1) - 0.5
        H[states, states] += b.J * si * sj
        anti = si != sj
        flipped = states[anti] ^ ((1 << bi) | (1 << bj))
        H[flipped, states[anti]] += 0.5 * b.J
    return H


@lru_cache(maxsize=8)
def _eig(graph: BondGraph, part: Bipartition, max_sites=None):
    return np.linalg.eigh(hamiltonian(graph, part, max_sites))


def _expm_h(w: np.ndarray, v: np.ndarray, t: float, shift: float) -> np.ndarray:
    """exp(-t (H - shift)) from the eigendecomposition."""
    return (v * np.exp(-t * (w - shift))) @ v.T


def _partial_trace_env(op: np.ndarray, n_a: int, n_env: int) -> np.ndarray:
    da, de = 1 << n_a, 1 << n_env
    return np.einsum("aebe->ab", op.reshape(da, de, da, de))


def thermal_rdm(graph: BondGraph, part: Bipartition, beta: float,
                normalize: bool = True, max_sites: int | None = None) -> np.ndarray:
    """rho_A = Tr_Abar exp(-beta H) / Z.

    With ``normalize=False`` the result is scaled by exp(beta E_0) instead, which
    keeps it finite at large beta; ratios of traces are unaffected.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    _check_cap(graph, max_sites)
    w, v = _eig(graph, part, max_sites)
    rho = _partial_trace_env(_expm_h(w, v, beta, w[0]), len(part.region_a),
                             graph.n_sites - len(part.region_a))
    rho = 0.5 * (rho + rho.T)
    if normalize:
        rho /= np.trace(rho)
    return rho


def sz_a(part: Bipartition, site: int) -> np.ndarray:
    """Diagonal of S^z_site acting on the A Hilbert space."""
    order = part.sites_a
    if site not in part.region_a:
        raise ValueError(f"site {site} is not in region A")
    n_a = len(order)
    bit = n_a - 1 - order.index(site)
    return ((np.arange(1 << n_a) >> bit) & 1) - 0.5


def eh_spectrum(rdm: np.ndarray, cutoff: float = 1e-14, tol: float = 1e-10) -> EhSpectrum:
    """Entanglement-Hamiltonian levels xi = -ln p of a normalized RDM."""
    p = np.linalg.eigvalsh(0.5 * (rdm + rdm.conj().T))
    if p.min() < -tol:
        raise ValueError(f"density matrix is not positive semi-definite (min eigenvalue {p.min():.3e})")
    keep = p > cutoff
    levels = np.sort(-np.log(p[keep]))
    degens: list[tuple[float, int]] = []
    for xi in levels:
        if degens and abs(degens[-1][0] - xi) < 1e-8:
            degens[-1] = (degens[-1][0], degens[-1][1] + 1)
        else:
            degens.append((float(xi), 1))
    return EhSpectrum(levels, degens, int((~keep).sum()))


def integer_corr(rdm: np.ndarray, n: int, sz: np.ndarray, k: int) -> float:
    """Tr[rho^(n-k) S rho^k S] / Tr[rho^n] for a diagonal S (given as ``sz``)."""
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    p, u = np.linalg.eigh(0.5 * (rdm + rdm.T))
    p = np.clip(p, 0.0, None) / p.max()
    s = (u.T * sz) @ u  # S in the eigenbasis of rho
    num = np.einsum("a,ab,b,ba->", p ** (n - k), s, p ** k, s)
    return float(num / np.sum(p ** n))


def integer_series(rdm: np.ndarray, n: int, sz: np.ndarray) -> np.ndarray:
    return np.array([integer_corr(rdm, n, sz, k) for k in range(n + 1)])


def continuous_corr(graph: BondGraph, part: Bipartition, beta: float, n: int,
                    site: int, tau, max_sites: int | None = None) -> np.ndarray | float:
    """Same-replica correlator <S^z_i(tau) S^z_i(0)> on the n-replica manifold.

    Returns Tr_A[Tr_Abar(e^{-(beta-tau)H} S e^{-tau H} S) rho~^(n-1)] / Tr[rho~^n].
    ``tau`` may be a scalar or an array.
    """
    _check_cap(graph, max_sites)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus < 0) or np.any(taus > beta):
        raise ValueError("tau must lie in [0, beta]")
    if site not in part.region_a:
        raise ValueError(f"site {site} is not in region A")
    w, v = _eig(graph, part, max_sites)
    n_a = len(part.region_a)
    n_env = graph.n_sites - n_a
    e0 = w[0]
    rho = _partial_trace_env(_expm_h(w, v, beta, e0), n_a, n_env)
    rho_pow = np.linalg.matrix_power(rho, n - 1) if n > 1 else np.eye(rho.shape[0])
    norm = np.trace(rho_pow @ rho)
    s_full = np.repeat(sz_a(part, site), 1 << n_env)  # S^z on the full space
    # exp(-t H) S exp(-(beta-t) H) in the eigenbasis: S_eig[a,b] e^{-t w_a} e^{-(beta-t) w_b}
    s_eig = (v.T * s_full) @ v
    out = np.empty(taus.size)
    for idx, t in enumerate(taus):
        left = np.exp(-(beta - t) * (w - e0))
        right = np.exp(-t * (w - e0))
        mid = v @ ((left[:, None] * s_eig * right[None, :]) @ v.T)
        op = mid * s_full[None, :]
        x = _partial_trace_env(op, n_a, n_env)
        out[idx] = np.real(np.trace(x @ rho_pow)) / np.real(norm)
    return out if np.ndim(tau) else float(out[0])


def thermal_energy(graph: BondGraph, part: Bipartition, beta: float,
                   max_sites: int | None = None) -> float:
    w, _ = _eig(graph, part, max_sites)
    p = np.exp(-beta * (w - w[0]))
    return float(np.sum(w * p) / np.sum(p))


def sector_weights(graph: BondGraph, part: Bipartition, beta: float, n: int,
                   max_sites: int | None = None) -> dict[int, float]:
    """Probability of each total-S^z sector (in units of 1/2 ... stored as 2*Sz)
    of the glue-layer-0 configuration on the n-replica manifold.

    For n = 1 this is the thermal magnetization distribution.
    """
    _check_cap(graph, max_sites)
    w, v = _eig(graph, part, max_sites)
    n_a = len(part.region_a)
    n_env = graph.n_sites - n_a
    boltz = _expm_h(w, v, beta, w[0])
    da, de = 1 << n_a, 1 << n_env
    mag_a = np.array([bin(a).count("1") * 2 - n_a for a in range(da)])
    mag_e = np.array([bin(e).count("1") * 2 - n_env for e in range(de)])
    rho = _partial_trace_env(boltz, n_a, n_env)
    rho_pow = np.linalg.matrix_power(rho, n - 1) if n > 1 else np.eye(da)
    b4 = boltz.reshape(da, de, da, de)
    # weight of replica 0 having bottom state (a, e): <a e| e^{-beta H} ... contracted
    weights: dict[int, float] = {}
    total = 0.0
    for e in range(de):
        block = b4[:, e, :, e]  # <a' e| B |a e>
        diag = np.einsum("ab,ba->a", rho_pow, block)  # sum over chains returning to a
        for a in range(da):
            m = int(mag_a[a] + mag_e[e])
            weights[m] = weights.get(m, 0.0) + diag[a]
            total += diag[a]
    return {m: wgt / total for m, wgt in sorted(weights.items())}
