import pytest

from replica_es import model


def test_chain_counts_and_bonds():
    g = model.build_chain(32, "dimer_bulk", 1, 2)
    assert g.n_sites == 32 and g.n_bonds == 32
    for b in g.bonds:
        assert (b.j - b.i) % 32 in (1, 31)


def test_square_counts():
    g = model.build_square(4, "uniform", 1, 1)
    assert g.n_sites == 16 and g.n_bonds == 32
    assert all(b.J == 1 for b in g.bonds)
    assert model.build_square(32, "dimer_bulk", 1, 2).n_bonds == 2048


def test_edge_gapped_chain_default_layout():
    g = model.build_chain(8, "edge_gapped", 1, 2)
    part = model.bipartition_half(g)
    strong = [k for k, b in enumerate(g.bonds) if b.J == 2]
    assert len(strong) == 4
    assert not set(strong) & part.cut_bonds


def test_edge_gapped_square_strong_count():
    g = model.build_square(8, "edge_gapped", 1, 2)
    assert sum(b.J == 2 for b in g.bonds) == 32


def test_j_cut_sets_only_cut_bonds():
    g = model.build_chain(8, "edge_gapped", 1, 2, J_cut=4.5)
    part = model.bipartition_half(g)
    assert {k for k, b in enumerate(g.bonds) if b.J == 4.5} == set(part.cut_bonds)
    with pytest.raises(ValueError):
        model.build_chain(8, "uniform", 1, 2, J_cut=3)


def test_dimer_bulk_cut_bonds_are_strong():
    g = model.build_chain(8, "dimer_bulk", 1, 2)
    part = model.bipartition_half(g)
    assert all(g.bonds[k].J == 2 for k in part.cut_bonds)
    # inside A the pattern alternates weak/strong away from the cut
    assert [g.bonds[x].J for x in range(3)] == [1, 2, 1]


def test_half_bipartition_chain():
    g = model.build_chain(8)
    part = model.bipartition_half(g)
    assert part.sites_a == [0, 1, 2, 3]
    assert len(part.cut_bonds) == 2
    assert model.edge_sites(part) == [0, 3]
    assert model.bulk_sites(part) == [1, 2]


def test_half_bipartition_square():
    g = model.build_square(4)
    part = model.bipartition_half(g)
    assert len(part.region_a) == 8 and len(part.cut_bonds) == 8
    g16 = model.build_square(16)
    p16 = model.bipartition_half(g16)
    assert len(model.edge_sites(p16)) == 2 * 16
    assert {g16.sites[s].coords[0] for s in model.bulk_sites(p16)} == {3, 4}


def test_custom_bipartition_retags():
    g = model.build_chain(6)
    part = model.bipartition_custom(g, [0, 1])
    assert part.graph.sites[0].edge_class == "edgeA"
    assert part.graph.sites[3].edge_class == "bulkAbar"
    with pytest.raises(ValueError):
        model.bipartition_custom(g, [])


@pytest.mark.parametrize("L", [3, 5, 2])
def test_bad_sizes(L):
    with pytest.raises(ValueError):
        model.build_chain(L)


def test_bad_couplings_and_pattern():
    with pytest.raises(ValueError):
        model.build_chain(8, "uniform", 0, 1)
    with pytest.raises(ValueError):
        model.build_chain(8, "zigzag")
    with pytest.raises(ValueError):
        model.build_chain(6, "dimer_bulk")
    with pytest.raises(ValueError):
        model.Bond(1, 1, 1.0)


def test_presets_resolve():
    for name in model.PRESETS:
        g = model.from_preset(name)
        assert model.is_bipartite(g)
    assert model.from_preset("fig3b", L=8).L == 8
    with pytest.raises(ValueError):
        model.from_preset("fig9")


def test_two_site():
    g = model.two_site()
    assert g.n_sites == 2 and g.n_bonds == 1
