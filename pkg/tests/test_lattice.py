import numpy as np
import pytest

from gaugepeps.lattice import Boundary, LatticeError, LatticeGeometry


def test_counts_open_and_torus():
    assert LatticeGeometry(3, 2).n_links == 7
    assert LatticeGeometry(2, 2, "torus").n_links == 8
    assert LatticeGeometry(4, 1, "open").n_links == 3


def test_vertex_indexing_round_trip():
    g = LatticeGeometry(3, 2)
    for i in range(g.n_vertices):
        assert g.vertex_index(g.vertex_at(i)) == i
    assert g.vertex_at(4) == (1, 1)


def test_parity_is_staggered():
    g = LatticeGeometry(2, 2)
    assert [g.parity(v) for v in g.vertices()] == [1, -1, -1, 1]


def test_star_links_signs():
    g = LatticeGeometry(3, 3)
    star = g.star_links((1, 1))
    assert sorted(s for _, s in star) == [-1, -1, 1, 1]
    corner = g.star_links((0, 0))
    assert all(s == 1 for _, s in corner) and len(corner) == 2


def test_every_link_in_two_stars_with_opposite_signs():
    g = LatticeGeometry(3, 2, "torus")
    total = {l: 0 for l in g.links}
    count = {l: 0 for l in g.links}
    for v in g.vertices():
        for l, s in g.star_links(v):
            total[l] += s
            count[l] += 1
    assert set(total.values()) == {0} and set(count.values()) == {2}


def test_rectangle_loop_closes_and_phase():
    g = LatticeGeometry(3, 3, "torus")
    loop = g.rectangle_loop((0, 0), 2, 1)
    assert loop.closed and len(loop) == 6 and loop.start == loop.end == (0, 0)
    phi = np.zeros(g.n_links)
    phi[g.link_index(((0, 0), 1))] = 0.3
    phi[g.link_index(((0, 1), 1))] = 0.1
    assert loop.phase(phi) == pytest.approx(0.3 - 0.1)


def test_rectangle_must_fit():
    with pytest.raises(LatticeError):
        LatticeGeometry(2, 2).rectangle_loop((0, 0), 2, 1)
    with pytest.raises(LatticeError):
        LatticeGeometry(2, 2, "torus").rectangle_loop((0, 0), 2, 1)


def test_walk_backwards_and_errors():
    g = LatticeGeometry(3, 1)
    p = g.walk((2, 0), [(1, -1), (1, -1)])
    assert p.start == (2, 0) and p.end == (0, 0)
    assert all(o == -1 for _, o in p.signed_link_indices())
    with pytest.raises(LatticeError):
        g.walk((0, 0), [(1, -1)])
    with pytest.raises(LatticeError):
        g.walk((0, 0), [(2, 1)])


def test_invalid_geometry():
    with pytest.raises(LatticeError):
        LatticeGeometry(0, 2)
    with pytest.raises(LatticeError):
        LatticeGeometry(1, 2, "torus")
    with pytest.raises(ValueError):
        LatticeGeometry(2, 2, "mobius")
    assert LatticeGeometry(2, 3, "periodic-y").boundary is Boundary.PERIODIC_Y


def test_plaquettes():
    assert LatticeGeometry(3, 3).plaquettes() == [(0, 0), (1, 0), (0, 1), (1, 1)]
    assert len(LatticeGeometry(2, 2, "torus").plaquettes()) == 4


def test_plaquette_phase_orientation():
    g = LatticeGeometry(2, 2, "torus")
    phi = np.random.default_rng(0).uniform(0, 2 * np.pi, g.n_links)
    loop = g.rectangle_loop((0, 0), 1, 1)
    p1, p2 = phi[g.link_index(((0, 0), 1))], phi[g.link_index(((1, 0), 2))]
    p3, p4 = phi[g.link_index(((0, 1), 1))], phi[g.link_index(((0, 0), 2))]
    assert loop.phase(phi) == pytest.approx(p1 + p2 - p3 - p4)
