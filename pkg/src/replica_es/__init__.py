"""Replica-manifold SSE simulation of entanglement-Hamiltonian correlators
for spin-1/2 Heisenberg models, with an exact-diagonalization reference."""

from .model import (Bipartition, Bond, BondGraph, Site, bipartition_custom, bipartition_half,
                    build, build_chain, build_square, bulk_sites, edge_sites, from_preset, two_site)
from .sse import RawSamples, ReplicaManifold, RunParams, SamplerFault, run
from .measure import (BinnedEstimate, CorrelationSeries, bin_and_merge, continuous_series,
                      corr_continuous_tau, corr_integer_tau, integer_series)
from .analysis import GapEstimate, WormholeReport, classify, fit_decay, valley_depth

__version__ = "0.1.0"
