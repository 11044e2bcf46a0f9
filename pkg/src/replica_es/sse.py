"""Stochastic series expansion sampler on the n-replica manifold.

The n replicas are laid end to end in imaginary time.  Each replica ``r`` owns
an operator string of length ``M_r`` and a bottom spin layer ``spins[r]``.
Sites in region A continue from the top of replica r into the bottom of
replica r+1 (mod n), so their worldlines have period n*beta.  Sites in Abar
wrap back to the bottom of the same replica (period beta).

Operator codes: 0 is an empty slot, ``2*(b+1)`` a diagonal operator on bond b,
``2*(b+1) + 1`` an off-diagonal one.  Spins are stored as +-1 (twice S^z).
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import BondGraph, Bipartition, bulk_sites, edge_sites, is_bipartite

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class SamplerFault(RuntimeError):
    """Internal consistency failure in the sampler (e.g. a loop that never closes)."""

    def __init__(self, message: str, dump_path: str | None = None):
        super().__init__(message if dump_path is None else f"{message} (state dumped to {dump_path})")
        self.dump_path = dump_path


@dataclass(frozen=True)
class ReplicaManifold:
    n: int
    beta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"replica count must be a positive integer, got {self.n}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    def glue_map(self, part: Bipartition) -> np.ndarray:
        """``glue[s, r]`` is the replica whose bottom layer follows the top of replica r on site s."""
        n_sites = part.graph.n_sites
        r = np.arange(self.n)
        glue = np.tile(r, (n_sites, 1))
        for s in part.region_a:
            glue[s] = (r + 1) % self.n
        return glue


@dataclass
class RunParams:
    therm_sweeps: int = 10_000
    measure_sweeps: int = 100_000
    bins: int = 50
    seed: int = 0
    tau_points: int | None = 16   # interior points of the continuous grid; None disables it
    cont_every: int = 1           # continuous-tau estimator evaluated every this many sweeps
    debug_checks: bool = False

    def __post_init__(self):
        if self.therm_sweeps < 0 or self.measure_sweeps <= 0:
            raise ValueError("sweep counts must be positive")
        if self.bins < 10:
            raise ValueError("at least 10 bins are needed for jackknife errors")
        if self.measure_sweeps < self.bins:
            raise ValueError("need at least one measurement sweep per bin")
        if self.cont_every < 1:
            raise ValueError("cont_every must be >= 1")


@dataclass
class _Lattice:
    """Numba-friendly arrays derived from the graph and bipartition."""
    bsites: np.ndarray
    cumj: np.ndarray
    jtot: float
    jsum_quarter: float
    in_a: np.ndarray
    a_sites: np.ndarray
    abar_sites: np.ndarray

    @classmethod
    def from_graph(cls, graph: BondGraph, part: Bipartition) -> "_Lattice":
        J = graph.couplings()
        in_a = part.in_a_mask()
        return cls(
            bsites=graph.bond_array(),
            cumj=np.cumsum(J),
            jtot=float(J.sum()),
            jsum_quarter=float(J.sum()) / 4.0,
            in_a=in_a,
            a_sites=np.flatnonzero(in_a).astype(np.int64),
            abar_sites=np.flatnonzero(~in_a).astype(np.int64),
        )


@dataclass
class SseState:
    spins: np.ndarray       # int8 [n, N], bottom layer of each replica
    ops: np.ndarray         # int64 [sum M_r], replicas concatenated
    offsets: np.ndarray     # int64 [n + 1]
    nops: np.ndarray        # int64 [n]
    rng: np.random.Generator
    seed: int
    beta: float
    lattice: _Lattice = field(repr=False)
    frozen: bool = False

    @property
    def n(self) -> int:
        return self.spins.shape[0]

    @property
    def cutoffs(self) -> np.ndarray:
        return np.diff(self.offsets)

    def replica_ops(self, r: int) -> np.ndarray:
        return self.ops[self.offsets[r]:self.offsets[r + 1]]


@dataclass
class RawSamples:
    """Binned raw measurements from one or more Markov chains.

    Every array has the bin index as its leading axis.
    """
    meta: dict
    a_sites: np.ndarray        # site ids for g_int's second axis
    g_int: np.ndarray          # [bins, |A|, n+1], plain boundary-spin products
    g_loop: np.ndarray         # same, loop-improved estimator
    cont_sites: np.ndarray     # site ids for g_cont's second axis
    tau_grid: np.ndarray       # [ngrid] (empty when disabled)
    g_cont: np.ndarray         # [bins, len(cont_sites), ngrid]
    nops: np.ndarray           # [bins, n] mean operator count per replica
    mag_hist: np.ndarray       # [bins, N+1] distribution of up-spin count in layer 0
    seeds: tuple = ()

    @property
    def n_bins(self) -> int:
        return self.g_int.shape[0]

    def energy_bins(self) -> np.ndarray:
        """Per-bin thermal energy estimate; meaningful for n = 1."""
        beta = self.meta["beta"]
        return self.meta["jsum_quarter"] - self.nops.mean(axis=1) / beta


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _pick_bond(cumj, u):
    lo, hi = 0, cumj.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cumj[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@numba.njit(cache=True)
def _diagonal_pass(ops, offsets, nops, spins, in_a, bsites, cumj, jtot, beta, rng):
    n_rep = offsets.size - 1
    n_sites = spins.shape[1]
    state = spins[0].copy()
    add = 0.5 * beta * jtot
    for r in range(n_rep):
        if r > 0:
            for s in range(n_sites):
                if not in_a[s]:
                    state[s] = spins[r, s]
        m_r = offsets[r + 1] - offsets[r]
        n_r = nops[r]
        for p in range(offsets[r], offsets[r + 1]):
            op = ops[p]
            if op == 0:
                b = _pick_bond(cumj, rng.random() * jtot)
                if state[bsites[b, 0]] != state[bsites[b, 1]]:
                    if rng.random() * (m_r - n_r) < add:
                        ops[p] = 2 * b + 2
                        n_r += 1
            elif op & 1 == 0:
                if rng.random() * add < (m_r - n_r + 1):
                    ops[p] = 0
                    n_r -= 1
            else:
                b = (op >> 1) - 1
                state[bsites[b, 0]] = -state[bsites[b, 0]]
                state[bsites[b, 1]] = -state[bsites[b, 1]]
        nops[r] = n_r


@numba.njit(cache=True)
def _build_links(ops, offsets, bsites, a_sites, abar_sites, link, first_leg, last_leg, first_in_rep):
    n_rep = offsets.size - 1
    for v in range(4 * offsets[n_rep]):
        link[v] = -1
    first_leg[:] = -1
    last_leg[:] = -1
    first_in_rep[:, :] = -1
    for r in range(n_rep):
        for s in abar_sites:
            first_leg[s] = -1
            last_leg[s] = -1
        for p in range(offsets[r], offsets[r + 1]):
            op = ops[p]
            if op == 0:
                continue
            b = (op >> 1) - 1
            v0 = 4 * p
            for side in range(2):
                s = bsites[b, side]
                vb = v0 + side
                vl = last_leg[s]
                if vl >= 0:
                    link[vl] = vb
                    link[vb] = vl
                else:
                    first_leg[s] = vb
                if first_in_rep[r, s] < 0:
                    first_in_rep[r, s] = vb
                last_leg[s] = vb + 2
        # Abar worldlines close inside the replica
        for s in abar_sites:
            if first_leg[s] >= 0:
                link[first_leg[s]] = last_leg[s]
                link[last_leg[s]] = first_leg[s]
    # A worldlines close around the whole manifold
    for s in a_sites:
        if first_leg[s] >= 0:
            link[first_leg[s]] = last_leg[s]
            link[last_leg[s]] = first_leg[s]


@numba.njit(cache=True)
def _loop_pass(ops, offsets, spins, bsites, a_sites, abar_sites, link, first_leg, last_leg,
               first_in_rep, loop_of, labels, rng):
    """Build the linked vertex list, flip every deterministic loop with
    probability 1/2 and update the boundary layers.

    ``labels[r, s]`` receives the loop id through which the bottom layer of
    replica r passes on A site s (sites touched by no operator get ``-1 - s``).
    Returns 0, or -1 if a loop fails to close.
    """
    _build_links(ops, offsets, bsites, a_sites, abar_sites, link, first_leg, last_leg, first_in_rep)
    n_rep = offsets.size - 1
    n_legs = 4 * offsets[n_rep]
    n_loops = 0
    for v0 in range(0, n_legs, 2):
        if link[v0] < 0:
            continue
        v1 = v0
        steps = 0
        mark = -2 if rng.random() < 0.5 else -1
        while True:
            if mark == -2:
                ops[v1 >> 2] ^= 1
            link[v1] = mark
            loop_of[v1] = n_loops
            v2 = v1 ^ 1
            v1 = link[v2]
            link[v2] = mark
            loop_of[v2] = n_loops
            steps += 1
            if v1 == v0:
                break
            if v1 < 0 or steps > n_legs:
                return -1
        n_loops += 1
    for r in range(n_rep):
        for s in abar_sites:
            v = first_in_rep[r, s]
            if v < 0:
                if rng.random() < 0.5:
                    spins[r, s] = -spins[r, s]
            elif link[v] == -2:
                spins[r, s] = -spins[r, s]
    for s in a_sites:
        if first_leg[s] < 0:
            flip = rng.random() < 0.5
            for r in range(n_rep):
                labels[r, s] = -1 - s
                if flip:
                    spins[r, s] = -spins[r, s]
            continue
        nxt = first_leg[s]
        for r in range(n_rep - 1, -1, -1):
            if first_in_rep[r, s] >= 0:
                nxt = first_in_rep[r, s]
            labels[r, s] = loop_of[nxt]
            if link[nxt] == -2:
                spins[r, s] = -spins[r, s]
    return 0


@numba.njit(cache=True)
def _check_state(ops, offsets, spins, in_a, bsites):
    """Propagate every replica and verify worldline continuity and operator
    legality.  Returns 0 on success, a negative code otherwise."""
    n_rep = offsets.size - 1
    n_sites = spins.shape[1]
    state = spins[0].copy()
    for r in range(n_rep):
        for s in range(n_sites):
            if not in_a[s]:
                state[s] = spins[r, s]
            elif state[s] != spins[r, s]:
                return -1
        for p in range(offsets[r], offsets[r + 1]):
            op = ops[p]
            if op == 0:
                continue
            b = (op >> 1) - 1
            i, j = bsites[b, 0], bsites[b, 1]
            if state[i] == state[j]:
                return -2
            if op & 1:
                state[i] = -state[i]
                state[j] = -state[j]
        for s in range(n_sites):
            if not in_a[s] and state[s] != spins[r, s]:
                return -3
    for s in range(n_sites):
        if in_a[s] and state[s] != spins[0, s]:
            return -1
    return 0


@numba.njit(cache=True)
def _tail_weights(n_ops, x, lgf, tail):
    """tail[b] = P(B >= b) for B ~ Binomial(n_ops, x); returns the window [lo, hi]
    outside of which the tail is exactly 1 (below) or 0 (above)."""
    if x <= 0.0:
        return 0, 0
    if x >= 1.0:
        for b in range(n_ops + 1):
            tail[b] = 1.0
        return 0, n_ops
    mu = n_ops * x
    sd = math.sqrt(n_ops * x * (1.0 - x))
    lo = max(0, int(mu - 12.0 * sd - 3.0))
    hi = min(n_ops, int(mu + 12.0 * sd + 3.0))
    lx = math.log(x)
    l1x = math.log1p(-x)
    acc = 0.0
    for b in range(hi, lo - 1, -1):
        acc += math.exp(lgf[n_ops] - lgf[b] - lgf[n_ops - b] + b * lx + (n_ops - b) * l1x)
        tail[b] = acc
    if lo == 0:
        tail[0] = 1.0
    return lo, hi


@numba.njit(cache=True)
def _measure(ops, offsets, spins, labels, bsites, a_sites, cont_pos, cont_sites, x_grid, lgf,
             g_int, g_loop, g_cont, do_cont, tail, change_b, change_n):
    n_rep = offsets.size - 1
    inv_n = 1.0 / n_rep
    for ai in range(a_sites.size):
        s = a_sites[ai]
        for k in range(n_rep + 1):
            acc = 0.0
            acc_loop = 0.0
            for r in range(n_rep):
                r2 = (r + k) % n_rep
                prod = spins[r, s] * spins[r2, s]
                acc += prod
                if labels[r, s] == labels[r2, s]:
                    acc_loop += prod
            g_int[ai, k] += 0.25 * acc * inv_n
            g_loop[ai, k] += 0.25 * acc_loop * inv_n
    if not do_cont or cont_sites.size == 0:
        return
    ngrid = x_grid.size
    nc = cont_sites.size
    for r in range(n_rep):
        # record op indices after which each measured site flips
        for c in range(nc):
            change_n[c] = 0
        q = 0
        for p in range(offsets[r], offsets[r + 1]):
            op = ops[p]
            if op == 0:
                continue
            q += 1
            if op & 1:
                b = (op >> 1) - 1
                for side in range(2):
                    c = cont_pos[bsites[b, side]]
                    if c >= 0:
                        if change_n[c] >= change_b.shape[1]:
                            return
                        change_b[c, change_n[c]] = q
                        change_n[c] += 1
        n_ops = q
        for t in range(ngrid):
            lo, hi = _tail_weights(n_ops, x_grid[t], lgf, tail)
            x = x_grid[t]
            for c in range(nc):
                s0 = spins[r, cont_sites[c]]
                cur = s0
                total = float(cur)
                for m in range(change_n[c]):
                    bc = change_b[c, m]
                    if x <= 0.0:
                        w = 0.0
                    elif bc < lo:
                        w = 1.0
                    elif bc > hi:
                        w = 0.0
                    else:
                        w = tail[bc]
                    total += -2.0 * cur * w
                    cur = -cur
                g_cont[c, t] += 0.25 * s0 * total * inv_n


@numba.njit(cache=True)
def _measure_block(n_sweeps, ops, offsets, nops, spins, in_a, bsites, cumj, jtot, beta, rng,
                   a_sites, abar_sites, link, first_leg, last_leg, first_in_rep, loop_of, labels,
                   cont_pos, cont_sites, x_grid, lgf, cont_every, tail, change_b, change_n,
                   g_int, g_loop, g_cont, nops_acc, mag_hist, debug):
    """Run ``n_sweeps`` full sweeps and accumulate (unnormalized) sums.
    Returns the number of continuous-tau measurements, or a negative fault code."""
    n_cont = 0
    for sweep in range(n_sweeps):
        _diagonal_pass(ops, offsets, nops, spins, in_a, bsites, cumj, jtot, beta, rng)
        if _loop_pass(ops, offsets, spins, bsites, a_sites, abar_sites, link, first_leg,
                      last_leg, first_in_rep, loop_of, labels, rng) < 0:
            return -1
        if debug and _check_state(ops, offsets, spins, in_a, bsites) < 0:
            return -2
        do_cont = (sweep % cont_every) == 0
        _measure(ops, offsets, spins, labels, bsites, a_sites, cont_pos, cont_sites, x_grid, lgf,
                 g_int, g_loop, g_cont, do_cont, tail, change_b, change_n)
        if do_cont:
            n_cont += 1
        for r in range(nops.size):
            nops_acc[r] += nops[r]
        up = 0
        for s in range(spins.shape[1]):
            if spins[0, s] > 0:
                up += 1
        mag_hist[up] += 1
    return n_cont


# ---------------------------------------------------------------------------
# python-level API
# ---------------------------------------------------------------------------

def init_state(graph: BondGraph, part: Bipartition, manifold: ReplicaManifold,
               seed: int = 0) -> SseState:
    if part.graph.n_sites != graph.n_sites or max(part.region_a) >= graph.n_sites:
        raise ValueError("bipartition does not belong to this graph")
    if not is_bipartite(graph):
        raise ValueError("graph is not bipartite; the sampler would have a sign problem")
    lat = _Lattice.from_graph(graph, part)
    rng = np.random.default_rng(seed)
    n = manifold.n
    spins = np.empty((n, graph.n_sites), dtype=np.int8)
    spins[:] = rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, graph.n_sites))
    # A sites are one continuous worldline while the strings are empty
    spins[:, lat.a_sites] = spins[0, lat.a_sites]
    m0 = max(20, graph.n_bonds // 2)
    offsets = np.arange(n + 1, dtype=np.int64) * m0
    return SseState(spins, np.zeros(n * m0, dtype=np.int64), offsets,
                    np.zeros(n, dtype=np.int64), rng, int(seed), float(manifold.beta), lat)


class _Work:
    """Scratch arrays for the loop update, resized when cutoffs grow."""

    def __init__(self, state: SseState):
        n_sites = state.spins.shape[1]
        self.first_leg = np.empty(n_sites, dtype=np.int64)
        self.last_leg = np.empty(n_sites, dtype=np.int64)
        self.first_in_rep = np.empty((state.n, n_sites), dtype=np.int64)
        self.labels = np.zeros((state.n, n_sites), dtype=np.int64)
        self.link = np.empty(0, dtype=np.int64)
        self.loop_of = np.empty(0, dtype=np.int64)
        self.fit(state)

    def fit(self, state: SseState):
        need = 4 * int(state.offsets[-1])
        if self.link.size < need:
            self.link = np.empty(need, dtype=np.int64)
            self.loop_of = np.empty(need, dtype=np.int64)


def diagonal_update(state: SseState, graph: BondGraph = None, manifold: ReplicaManifold = None) -> SseState:
    lat = state.lattice
    beta = state.beta if manifold is None else manifold.beta
    _diagonal_pass(state.ops, state.offsets, state.nops, state.spins, lat.in_a, lat.bsites,
                   lat.cumj, lat.jtot, beta, state.rng)
    return state


def loop_update(state: SseState, graph: BondGraph = None, manifold: ReplicaManifold = None,
                work: _Work | None = None) -> SseState:
    lat = state.lattice
    work = work or _Work(state)
    work.fit(state)
    code = _loop_pass(state.ops, state.offsets, state.spins, lat.bsites, lat.a_sites,
                      lat.abar_sites, work.link, work.first_leg, work.last_leg,
                      work.first_in_rep, work.loop_of, work.labels, state.rng)
    if code < 0:
        raise SamplerFault("operator loop failed to close", dump_fault(state))
    return state


def adjust_cutoff(state: SseState) -> SseState:
    """Grow each replica's string to at least 1.25 times its operator count.

    New empty slots are appended at the end of the replica's string.  No-op
    once the state is frozen.
    """
    if state.frozen:
        return state
    old = state.cutoffs
    new = np.maximum(old, np.ceil(1.25 * state.nops).astype(np.int64))
    if np.array_equal(new, old):
        return state
    ops = np.zeros(int(new.sum()), dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(new)]).astype(np.int64)
    for r in range(state.n):
        ops[offsets[r]:offsets[r] + old[r]] = state.replica_ops(r)
    state.ops, state.offsets = ops, offsets
    return state


def check_state(state: SseState) -> None:
    lat = state.lattice
    code = _check_state(state.ops, state.offsets, state.spins, lat.in_a, lat.bsites)
    if code < 0:
        raise SamplerFault(f"worldline configuration invalid (code {code})")


def tau_grid_for(beta: float, interior_points: int | None) -> np.ndarray:
    if not interior_points:
        return np.zeros(0)
    return np.linspace(0.0, beta, interior_points + 2)


def default_cont_sites(part: Bipartition) -> np.ndarray:
    return np.array(sorted(set(edge_sites(part)) | set(bulk_sites(part))), dtype=np.int64)


def run(graph: BondGraph, part: Bipartition, manifold: ReplicaManifold, params: RunParams,
        model_id: str = "custom", cont_sites=None, state: SseState | None = None) -> RawSamples:
    """Thermalize, then measure in ``params.bins`` equal bins."""
    if state is None:
        state = init_state(graph, part, manifold, params.seed)
    lat = state.lattice
    work = _Work(state)
    for _ in range(params.therm_sweeps):
        diagonal_update(state, manifold=manifold)
        loop_update(state, work=work)
        adjust_cutoff(state)
        work.fit(state)
    state.frozen = True
    if params.debug_checks:
        check_state(state)

    n, n_sites = manifold.n, graph.n_sites
    cont_sites = default_cont_sites(part) if cont_sites is None else np.asarray(cont_sites, dtype=np.int64)
    tau_grid = tau_grid_for(manifold.beta, params.tau_points)
    if tau_grid.size == 0:
        cont_sites = np.zeros(0, dtype=np.int64)
    cont_pos = -np.ones(n_sites, dtype=np.int64)
    cont_pos[cont_sites] = np.arange(cont_sites.size)
    x_grid = tau_grid / manifold.beta
    m_total = int(state.offsets[-1])
    lgf = np.array([math.lgamma(k + 1.0) for k in range(m_total + 2)])
    tail = np.zeros(m_total + 2)
    change_b = np.zeros((max(cont_sites.size, 1), m_total + 1), dtype=np.int64)
    change_n = np.zeros(max(cont_sites.size, 1), dtype=np.int64)

    bins = params.bins
    per_bin = params.measure_sweeps // bins
    g_int = np.zeros((bins, lat.a_sites.size, n + 1))
    g_loop = np.zeros_like(g_int)
    g_cont = np.zeros((bins, cont_sites.size, tau_grid.size))
    nops_b = np.zeros((bins, n))
    mag_b = np.zeros((bins, n_sites + 1))
    for b in range(bins):
        gi = np.zeros((lat.a_sites.size, n + 1))
        gl = np.zeros_like(gi)
        gc = np.zeros((cont_sites.size, tau_grid.size))
        na = np.zeros(n)
        mh = np.zeros(n_sites + 1)
        count = _measure_block(per_bin, state.ops, state.offsets, state.nops, state.spins,
                               lat.in_a, lat.bsites, lat.cumj, lat.jtot, manifold.beta, state.rng,
                               lat.a_sites, lat.abar_sites, work.link, work.first_leg,
                               work.last_leg, work.first_in_rep, work.loop_of, work.labels,
                               cont_pos, cont_sites, x_grid, lgf, params.cont_every, tail,
                               change_b, change_n, gi, gl, gc, na, mh, params.debug_checks)
        if count < 0:
            raise SamplerFault("operator loop failed to close" if count == -1
                               else "worldline configuration invalid", dump_fault(state))
        g_int[b] = gi / per_bin
        g_loop[b] = gl / per_bin
        if count > 0:
            g_cont[b] = gc / count
        nops_b[b] = na / per_bin
        mag_b[b] = mh / per_bin
    if params.debug_checks:
        check_state(state)

    meta = dict(
        model=model_id, geometry=graph.geometry, L=graph.L, pattern=graph.pattern,
        n=n, beta=float(manifold.beta), n_sites=n_sites,
        jsum_quarter=lat.jsum_quarter,
        therm_sweeps=params.therm_sweeps, measure_sweeps=per_bin * bins,
        tau_points=params.tau_points, cont_every=params.cont_every,
        site_classes={"edgeA": [int(i) for i in edge_sites(part)],
                      "bulkA": [int(i) for i in bulk_sites(part)]},
    )
    return RawSamples(meta, lat.a_sites.copy(), g_int, g_loop, cont_sites, tau_grid, g_cont,
                      nops_b, mag_b, (int(params.seed),))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(state: SseState, path) -> None:
    """Write an .npz checkpoint; resuming from it continues bit-exactly."""
    bg = state.rng.bit_generator.state
    np.savez(
        path,
        version=CHECKPOINT_VERSION,
        spins=state.spins, ops=state.ops, offsets=state.offsets, nops=state.nops,
        seed=state.seed, beta=state.beta, frozen=state.frozen,
        rng_name=bg["bit_generator"],
        rng_state=np.array([bg["state"]["state"], bg["state"]["inc"]], dtype=object).astype(str),
        rng_extra=np.array([bg["has_uint32"], bg["uinteger"]], dtype=np.int64),
    )


def load_checkpoint(path, graph: BondGraph, part: Bipartition) -> SseState:
    with np.load(path, allow_pickle=False) as f:
        if int(f["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(f['version'])}")
        name = str(f["rng_name"])
        if name != "PCG64":
            raise ValueError(f"unsupported bit generator {name}")
        rng = np.random.Generator(np.random.PCG64())
        st, inc = (int(x) for x in f["rng_state"])
        has, uint = (int(x) for x in f["rng_extra"])
        rng.bit_generator.state = {"bit_generator": name, "state": {"state": st, "inc": inc},
                                   "has_uint32": has, "uinteger": uint}
        state = SseState(f["spins"].copy(), f["ops"].copy(), f["offsets"].copy(),
                         f["nops"].copy(), rng, int(f["seed"]), float(f["beta"]),
                         _Lattice.from_graph(graph, part), bool(f["frozen"]))
    if state.spins.shape[1] != graph.n_sites:
        raise ValueError("checkpoint does not match the graph")
    return state


def dump_fault(state: SseState) -> str | None:
    """Best-effort diagnostic dump of a faulty state; returns the path."""
    path = os.path.join(os.environ.get("REPLICA_ES_FAULT_DIR", "."), f"sse_fault_seed{state.seed}.npz")
    try:
        save_checkpoint(state, path)
    except OSError:
        log.exception("could not write fault dump")
        return None
    return path
