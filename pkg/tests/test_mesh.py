import json

import numpy as np
import pytest

from wgsteklov.mesh import (
    DOMAIN_AREA,
    L_SHAPE,
    UNIT_SQUARE,
    Mesh,
    build_structured_mesh,
    locate_cell,
    mesh_stats,
    mesh_to_json,
    outward_normal,
)


@pytest.mark.parametrize(
    "domain,n,nv,ne,nc,nb",
    [
        (UNIT_SQUARE, 2, 9, 16, 8, 8),
        (L_SHAPE, 2, 8, 13, 6, 8),
        (UNIT_SQUARE, 1, 4, 5, 2, 4),
    ],
)
def test_entity_counts(domain, n, nv, ne, nc, nb):
    mesh = build_structured_mesh(domain, n)
    assert mesh.n_vertices == nv
    assert mesh.n_edges == ne
    assert mesh.n_cells == nc
    assert int(mesh.boundary_edge.sum()) == nb
    # simply connected: V - E + C = 1
    assert mesh.n_vertices - mesh.n_edges + mesh.n_cells == 1


def test_smallest_square_mesh_boundary():
    mesh = build_structured_mesh(UNIT_SQUARE, 1)
    assert mesh.n_cells == 2
    # every edge is boundary except the shared diagonal
    assert int((~mesh.boundary_edge).sum()) == 1
    interior = int(np.where(~mesh.boundary_edge)[0][0])
    assert set(mesh.edges[interior]) == {0, 3}  # (0,0) and (1,1)


@pytest.mark.parametrize("domain,n", [(UNIT_SQUARE, 2), (UNIT_SQUARE, 5), (L_SHAPE, 2), (L_SHAPE, 6)])
def test_geometry_invariants(domain, n):
    mesh = build_structured_mesh(domain, n)
    assert np.all(mesh.area > 0)
    assert abs(mesh.area.sum() - DOMAIN_AREA[domain]) < 1e-12
    # incidence: interior edges touch two cells, boundary edges one
    counts = (mesh.edge_cells >= 0).sum(axis=1)
    assert np.all(counts[mesh.boundary_edge] == 1)
    assert np.all(counts[~mesh.boundary_edge] == 2)
    # closed cell boundary: sum of length-weighted outward normals vanishes
    for ci in range(mesh.n_cells):
        total = np.zeros(2)
        for l in range(3):
            ei = mesh.cell_edges[ci, l]
            total += mesh.length[ei] * mesh.normals[ci, l]
        assert np.linalg.norm(total) < 1e-13
    # normals are unit and outward
    verts = mesh.vertices[mesh.cells]
    centroids = verts.mean(axis=1)
    for ci in range(mesh.n_cells):
        for l in range(3):
            nrm = mesh.normals[ci, l]
            assert abs(np.linalg.norm(nrm) - 1.0) < 1e-14
            midpoint = 0.5 * (verts[ci, l] + verts[ci, (l + 1) % 3])
            assert nrm @ (centroids[ci] - midpoint) < 0


def test_stats_and_refinement():
    mesh2 = build_structured_mesh(UNIT_SQUARE, 2)
    stats = mesh_stats(mesh2)
    assert stats["h_max"] == pytest.approx(np.sqrt(2) / 2, rel=1e-14)
    assert stats["total_area"] == pytest.approx(1.0, abs=1e-14)
    assert mesh_stats(build_structured_mesh(L_SHAPE, 2))["total_area"] == pytest.approx(0.75)
    assert mesh_stats(build_structured_mesh(UNIT_SQUARE, 8))["n_cells"] == 128
    # refinement n -> 2n exactly halves the max diameter
    for n in (2, 4, 8):
        h1 = build_structured_mesh(UNIT_SQUARE, n).h_max
        h2 = build_structured_mesh(UNIT_SQUARE, 2 * n).h_max
        assert h2 == pytest.approx(h1 / 2, rel=1e-15)


def test_outward_normal_reference_cell():
    mesh = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    assert outward_normal(mesh, 0, 0) == pytest.approx([0.0, -1.0])
    s = 1 / np.sqrt(2)
    assert outward_normal(mesh, 0, 1) == pytest.approx([s, s])
    assert outward_normal(mesh, 0, 2) == pytest.approx([-1.0, 0.0])
    with pytest.raises(IndexError):
        outward_normal(mesh, 1, 0)
    with pytest.raises(IndexError):
        outward_normal(mesh, 0, 3)


def test_build_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build_structured_mesh(UNIT_SQUARE, 0)
    with pytest.raises(ValueError):
        build_structured_mesh(L_SHAPE, 3)
    with pytest.raises(ValueError):
        build_structured_mesh("hexagon", 2)


def test_lshape_boundary_edges_on_perimeter():
    mesh = build_structured_mesh(L_SHAPE, 4)
    segments = [
        lambda p: p[1] == 0.0,                      # bottom
        lambda p: p[0] == 1.0 and p[1] <= 0.5,      # right
        lambda p: p[1] == 0.5 and p[0] >= 0.5,      # notch, horizontal
        lambda p: p[0] == 0.5 and p[1] >= 0.5,      # notch, vertical
        lambda p: p[1] == 1.0 and p[0] <= 0.5,      # top
        lambda p: p[0] == 0.0,                      # left
    ]
    for ei in np.where(mesh.boundary_edge)[0]:
        a, b = mesh.vertices[mesh.edges[ei]]
        assert any(seg(a) and seg(b) for seg in segments), (a, b)


@pytest.mark.parametrize("domain,n", [(UNIT_SQUARE, 4), (L_SHAPE, 4)])
def test_locate_cell_contains_point(domain, n, rng):
    mesh = build_structured_mesh(domain, n)
    hits = 0
    for _ in range(200):
        x, y = rng.uniform(0, 1, 2)
        ci = locate_cell(mesh, x, y)
        if ci < 0:
            assert domain == L_SHAPE and x > 0.5 and y > 0.5
            continue
        hits += 1
        v = mesh.vertices[mesh.cells[ci]]
        T = np.column_stack([v[1] - v[0], v[2] - v[0]])
        lam = np.linalg.solve(T, np.array([x, y]) - v[0])
        assert lam[0] >= -1e-12 and lam[1] >= -1e-12 and lam.sum() <= 1 + 1e-12
    assert hits > 100


def test_locate_cell_notch_boundary():
    mesh = build_structured_mesh(L_SHAPE, 4)
    assert locate_cell(mesh, 0.75, 0.75) == -1
    for x, y in [(0.5, 0.75), (0.75, 0.5), (0.5, 0.5), (1.0, 0.5), (0.5, 1.0)]:
        assert locate_cell(mesh, x, y) >= 0, (x, y)


def test_json_dump_schema():
    mesh = build_structured_mesh(L_SHAPE, 2)
    payload = json.loads(mesh_to_json(mesh))
    assert payload["domain"] == L_SHAPE and payload["n"] == 2
    assert len(payload["vertices"]) == mesh.n_vertices
    assert len(payload["cells"]) == mesh.n_cells
    assert len(payload["edges"]) == len(payload["boundary_edge"]) == mesh.n_edges
