"""Bond graphs for the spin-1/2 Heisenberg chains and square tori, plus the
half-system bipartition into region A and environment Abar.

Site ids are dense.  Chains use ``id = x``; square lattices use
``id = x + L * y``.  Region A is always ``x < L // 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

PATTERNS = ("uniform", "dimer_bulk", "edge_gapped")
REGIONS = ("A", "Abar")
EDGE_CLASSES = ("edgeA", "edgeAbar", "bulkA", "bulkAbar")


@dataclass(frozen=True)
class Site:
    id: int
    coords: tuple[int, ...]
    region: str = "A"
    edge_class: str = "bulkA"


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    J: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError(f"bond connects site {self.i} to itself")
        if not self.J > 0:
            raise ValueError(f"coupling must be positive, got J={self.J}")


@dataclass(frozen=True)
class BondGraph:
    sites: tuple[Site, ...]
    bonds: tuple[Bond, ...]
    geometry: str  # "chain" or "square"
    L: int
    periodic: bool = True
    pattern: str = "uniform"

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    def bond_array(self) -> np.ndarray:
        return np.array([(b.i, b.j) for b in self.bonds], dtype=np.int64).reshape(-1, 2)

    def couplings(self) -> np.ndarray:
        return np.array([b.J for b in self.bonds], dtype=np.float64)

    def x(self, site_id: int) -> int:
        return self.sites[site_id].coords[0]


@dataclass(frozen=True)
class Bipartition:
    region_a: frozenset[int]
    cut_bonds: frozenset[int]
    graph: BondGraph = field(repr=False, compare=False)

    @property
    def sites_a(self) -> list[int]:
        return sorted(self.region_a)

    @property
    def sites_abar(self) -> list[int]:
        return [s.id for s in self.graph.sites if s.id not in self.region_a]

    def in_a_mask(self) -> np.ndarray:
        mask = np.zeros(self.graph.n_sites, dtype=np.bool_)
        mask[list(self.region_a)] = True
        return mask

    def sites_of_class(self, edge_class: str) -> list[int]:
        if edge_class not in EDGE_CLASSES:
            raise ValueError(f"unknown site class {edge_class!r}")
        return [s.id for s in self.graph.sites if s.edge_class == edge_class]


def _check_args(L: int, pattern: str, J_weak: float, J_strong: float, J_cut=None) -> None:
    if int(L) != L or L < 4 or L % 2:
        raise ValueError(f"L must be an even integer >= 4, got {L}")
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")
    if not (J_weak > 0 and J_strong > 0) or (J_cut is not None and not J_cut > 0):
        raise ValueError("couplings must be positive")
    if J_cut is not None and pattern != "edge_gapped":
        raise ValueError("J_cut only applies to the edge_gapped pattern")
    if pattern == "dimer_bulk" and (L // 2) % 2:
        # both cuts must land on strong bonds
        raise ValueError(f"dimer_bulk needs L divisible by 4, got {L}")


def _strong_x_bonds(L: int, pattern: str) -> set[int]:
    """x-positions ``x`` whose bond (x, x+1) carries J_strong along a row."""
    half = L // 2
    if pattern == "uniform":
        return set()
    if pattern == "dimer_bulk":
        # dimers (1,2), (3,4), ...: both cut bonds (half-1, half) and (L-1, 0) are
        # strong, so each region is dimerized inside and ends on a cut dimer
        return set(range(1, L, 2))
    # edge_gapped: the bond just inside each region at each cut
    return {0, half - 2, half, L - 2}


def _x_coupling(L: int, pattern: str, J_weak: float, J_strong: float, J_cut) -> list[float]:
    """Coupling of the bond (x, x+1) for every x along a row."""
    strong = _strong_x_bonds(L, pattern)
    out = [J_strong if x in strong else J_weak for x in range(L)]
    if J_cut is not None:
        for x in (L // 2 - 1, L - 1):
            out[x] = J_cut
    return out


def build_chain(L: int, pattern: str = "uniform", J_weak: float = 1.0,
                J_strong: float = 2.0, J_cut: float | None = None) -> BondGraph:
    """Periodic spin chain of ``L`` sites; bond ``x`` joins sites x and x+1.

    ``J_cut`` (edge_gapped only) sets the two bonds crossing the cuts; by
    default they stay at J_weak.
    """
    _check_args(L, pattern, J_weak, J_strong, J_cut)
    jx = _x_coupling(L, pattern, J_weak, J_strong, J_cut)
    sites = tuple(Site(x, (x,)) for x in range(L))
    bonds = tuple(Bond(x, (x + 1) % L, jx[x]) for x in range(L))
    graph = BondGraph(sites, bonds, "chain", L, True, pattern)
    return _tag_sites(graph)


def build_square(L: int, pattern: str = "uniform", J_weak: float = 1.0,
                 J_strong: float = 2.0, J_cut: float | None = None) -> BondGraph:
    """L x L torus.  Bond ``2*id`` points along +x, ``2*id + 1`` along +y.

    Strong bonds always point along x, i.e. perpendicular to the two cut lines.
    """
    _check_args(L, pattern, J_weak, J_strong, J_cut)
    jx = _x_coupling(L, pattern, J_weak, J_strong, J_cut)
    sites = tuple(Site(x + L * y, (x, y)) for y in range(L) for x in range(L))
    bonds = []
    for y in range(L):
        for x in range(L):
            s = x + L * y
            bonds.append(Bond(s, (x + 1) % L + L * y, jx[x]))
            bonds.append(Bond(s, x + L * ((y + 1) % L), J_weak))
    graph = BondGraph(sites, tuple(bonds), "square", L, True, pattern)
    return _tag_sites(graph)


def cut_bonds_of(graph: BondGraph, region_a: Iterable[int]) -> frozenset[int]:
    a = set(region_a)
    return frozenset(
        k for k, b in enumerate(graph.bonds) if (b.i in a) != (b.j in a)
    )


def _tag_sites(graph: BondGraph) -> BondGraph:
    half = graph.L // 2
    region_a = {s.id for s in graph.sites if s.coords[0] < half}
    cut = cut_bonds_of(graph, region_a)
    touching = set()
    for k in cut:
        touching.add(graph.bonds[k].i)
        touching.add(graph.bonds[k].j)
    sites = []
    for s in graph.sites:
        if s.id in region_a:
            sites.append(replace(s, region="A", edge_class="edgeA" if s.id in touching else "bulkA"))
        else:
            sites.append(replace(s, region="Abar",
                                 edge_class="edgeAbar" if s.id in touching else "bulkAbar"))
    return replace(graph, sites=tuple(sites))


def bipartition_half(graph: BondGraph) -> Bipartition:
    half = graph.L // 2
    region_a = frozenset(s.id for s in graph.sites if s.coords[0] < half)
    return Bipartition(region_a, cut_bonds_of(graph, region_a), graph)


def bipartition_custom(graph: BondGraph, region_a: Iterable[int]) -> Bipartition:
    """Arbitrary proper bipartition; site edge classes are re-tagged to match."""
    a = frozenset(int(i) for i in region_a)
    if not a or len(a) >= graph.n_sites or not a <= set(range(graph.n_sites)):
        raise ValueError("region A must be a nonempty proper subset of the sites")
    cut = cut_bonds_of(graph, a)
    touching = {graph.bonds[k].i for k in cut} | {graph.bonds[k].j for k in cut}
    sites = tuple(
        replace(s, region="A" if s.id in a else "Abar",
                edge_class=("edge" if s.id in touching else "bulk") + ("A" if s.id in a else "Abar"))
        for s in graph.sites
    )
    g = replace(graph, sites=sites)
    return Bipartition(a, cut, g)


def bulk_sites(part: Bipartition) -> list[int]:
    """Sites of A farthest from both cuts: the central site pair (chain) or
    the central column pair (square)."""
    g = part.graph
    half = g.L // 2
    xs = {half // 2 - 1, half // 2} if half % 2 == 0 else {half // 2}
    return [s.id for s in g.sites if s.id in part.region_a and s.coords[0] in xs]


def edge_sites(part: Bipartition) -> list[int]:
    return part.sites_of_class("edgeA")


def is_bipartite(graph: BondGraph) -> bool:
    color = -np.ones(graph.n_sites, dtype=np.int64)
    adj: list[list[int]] = [[] for _ in range(graph.n_sites)]
    for b in graph.bonds:
        adj[b.i].append(b.j)
        adj[b.j].append(b.i)
    for start in range(graph.n_sites):
        if color[start] >= 0:
            continue
        color[start] = 0
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    stack.append(v)
                elif color[v] == color[u]:
                    return False
    return True


def two_site(J: float = 1.0) -> BondGraph:
    """Two spins joined by a single bond, A = site 0.  Used for sanity checks."""
    sites = (Site(0, (0,), "A", "edgeA"), Site(1, (1,), "Abar", "edgeAbar"))
    return BondGraph(sites, (Bond(0, 1, J),), "chain", 2, False, "uniform")


PRESETS = {
    "fig2a": dict(geometry="chain", L=32, pattern="dimer_bulk", J_weak=1.0, J_strong=2.0),
    "fig2b": dict(geometry="chain", L=32, pattern="edge_gapped", J_weak=1.0, J_strong=2.0, J_cut=4.5),
    "fig3a": dict(geometry="square", L=16, pattern="dimer_bulk", J_weak=1.0, J_strong=2.0),
    "fig3b": dict(geometry="square", L=16, pattern="edge_gapped", J_weak=1.0, J_strong=2.0, J_cut=4.5),
    "uniform_chain": dict(geometry="chain", L=8, pattern="uniform", J_weak=1.0, J_strong=1.0),
    "uniform_square": dict(geometry="square", L=4, pattern="uniform", J_weak=1.0, J_strong=1.0),
}


def build(geometry: str, L: int, pattern: str = "uniform", J_weak: float = 1.0,
          J_strong: float = 2.0, J_cut: float | None = None) -> BondGraph:
    if geometry == "chain":
        return build_chain(L, pattern, J_weak, J_strong, J_cut)
    if geometry == "square":
        return build_square(L, pattern, J_weak, J_strong, J_cut)
    raise ValueError(f"unknown geometry {geometry!r}")


def from_preset(name: str, **overrides) -> BondGraph:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    params = {**PRESETS[name], **{k: v for k, v in overrides.items() if v is not None}}
    return build(**params)
