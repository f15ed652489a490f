import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bulksurf.mesh import (GAMMA0, GAMMA1, AnnulusParams, Mesh, MeshError, MeshFormatError,
                           connected_components, euler_characteristic, generate_annulus,
                           load_mesh, refine_uniform, ring_radii, rotate, save_mesh,
                           triangle_edges, validate)


def test_tiny_annulus_counts(tiny_mesh):
    assert tiny_mesh.n_vertices == 24
    assert tiny_mesh.n_triangles == 32
    assert len(tiny_mesh.edges_with_label(GAMMA1)) == 8
    assert len(tiny_mesh.edges_with_label(GAMMA0)) == 8


def test_tiny_annulus_area_is_two_octagons(tiny_mesh):
    octagon = lambda r: 0.5 * 8 * r * r * math.sin(2 * math.pi / 8)
    expected = octagon(2.0) - octagon(1.0)
    assert tiny_mesh.area() == pytest.approx(expected, rel=1e-14)
    assert tiny_mesh.area() < math.pi * (2.0**2 - 1.0**2)


def test_vertices_on_nominal_circles():
    p = AnnulusParams(1.0, 2.0, 16, 64)
    mesh = generate_annulus(p)
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1]).reshape(17, 64)
    nominal = ring_radii(p)
    assert np.abs(r - nominal[:, None]).max() <= 4 * np.finfo(float).eps * 2.0


def test_triangles_positive_and_edge_multiplicity(fine_mesh):
    assert np.all(fine_mesh.signed_areas() > 0)
    _, counts = triangle_edges(fine_mesh)
    assert set(np.unique(counts)) == {1, 2}
    assert int(np.sum(counts == 1)) == len(fine_mesh.boundary_edges)


@pytest.mark.parametrize("nr,na", [(2, 8), (3, 11), (16, 64)])
def test_euler_characteristic_of_annulus(nr, na):
    assert euler_characteristic(generate_annulus(AnnulusParams(1, 2, nr, na))) == 0


@pytest.mark.parametrize(
    "args,fragment",
    [
        ((2.0, 1.0, 2, 8), "r_inner < r_outer"),
        ((0.0, 1.0, 2, 8), "r_inner must be positive"),
        ((1.0, 2.0, 1, 8), "n_radial"),
        ((1.0, 2.0, 2, 7), "n_angular"),
    ],
)
def test_invalid_params_name_the_constraint(args, fragment):
    with pytest.raises(ValueError, match=fragment):
        AnnulusParams(*args)


def test_refine_counts_and_labels(tiny_mesh):
    once = refine_uniform(tiny_mesh)
    twice = refine_uniform(once)
    assert once.n_triangles == 4 * tiny_mesh.n_triangles
    assert twice.n_triangles == 16 * tiny_mesh.n_triangles
    for label in (GAMMA0, GAMMA1):
        assert len(once.edges_with_label(label)) == 2 * len(tiny_mesh.edges_with_label(label))
    assert not np.intersect1d(once.label_vertices(GAMMA0), once.label_vertices(GAMMA1)).size


def test_refine_projects_boundary_midpoints(tiny_mesh):
    once = refine_uniform(tiny_mesh)
    for label, radius in ((GAMMA1, 1.0), (GAMMA0, 2.0)):
        idx = once.label_vertices(label)
        r = np.hypot(once.vertices[idx, 0], once.vertices[idx, 1])
        assert np.abs(r - radius).max() <= 1e-12


def test_refine_keeps_parent_vertices(tiny_mesh):
    once = refine_uniform(tiny_mesh)
    np.testing.assert_array_equal(once.vertices[: tiny_mesh.n_vertices], tiny_mesh.vertices)


def test_refine_without_circles_keeps_midpoints():
    mesh = generate_annulus(AnnulusParams(1, 2, 2, 8))
    plain = Mesh(mesh.vertices, mesh.triangles, mesh.boundary_edges, mesh.boundary_labels)
    once = refine_uniform(plain)
    r = np.hypot(*once.vertices[once.label_vertices(GAMMA1)].T)
    assert r.min() < 1.0 - 1e-3


def test_rotate_identity_inverse_periodic(tiny_mesh):
    np.testing.assert_array_equal(rotate(tiny_mesh, 0.0).vertices, tiny_mesh.vertices)
    back = rotate(rotate(tiny_mesh, 0.37), -0.37)
    np.testing.assert_allclose(back.vertices, tiny_mesh.vertices, atol=1e-15, rtol=0)
    full = rotate(tiny_mesh, 2 * math.pi)
    np.testing.assert_allclose(full.vertices, tiny_mesh.vertices, atol=1e-15, rtol=0)
    assert rotate(tiny_mesh, 1.0).boundary_labels == tiny_mesh.boundary_labels


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-20.0, max_value=20.0, allow_nan=False))
def test_rotate_preserves_distances(angle):
    mesh = generate_annulus(AnnulusParams(1, 2, 2, 8))
    rot = rotate(mesh, angle)
    d0 = np.linalg.norm(mesh.vertices[:, None] - mesh.vertices[None], axis=-1)
    d1 = np.linalg.norm(rot.vertices[:, None] - rot.vertices[None], axis=-1)
    # a handful of roundoff units per coordinate operation on O(1) coordinates
    assert np.abs(d1 - d0).max() <= 16 * np.finfo(float).eps * 4


@settings(max_examples=25, deadline=None)
@given(
    st.floats(min_value=0.1, max_value=5.0),
    st.floats(min_value=1.05, max_value=4.0),
    st.integers(min_value=2, max_value=5),
    st.integers(min_value=8, max_value=20),
)
def test_generated_annuli_are_valid(r_in, ratio, nr, na):
    mesh = generate_annulus(AnnulusParams(r_in, r_in * ratio, nr, na))
    validate(mesh)
    assert euler_characteristic(mesh) == 0
    assert connected_components(mesh) == 1


def test_save_load_roundtrip(tmp_path, tiny_mesh):
    path = tmp_path / "m.txt"
    save_mesh(tiny_mesh, path)
    loaded = load_mesh(path)
    assert loaded == tiny_mesh
    assert loaded.vertices.tobytes() == tiny_mesh.vertices.tobytes()
    assert dict(loaded.circles) == pytest.approx(dict(tiny_mesh.circles))
    assert path.read_text().startswith("bse-mesh 1\nvertices 24\n")


def test_roundtrip_of_refined_rotated_mesh_is_bitwise(tmp_path, tiny_mesh):
    mesh = rotate(refine_uniform(tiny_mesh), 0.123456789)
    save_mesh(mesh, tmp_path / "m.txt")
    assert load_mesh(tmp_path / "m.txt").vertices.tobytes() == mesh.vertices.tobytes()


def _write(tmp_path, mesh, edit):
    path = tmp_path / "m.txt"
    save_mesh(mesh, path)
    lines = path.read_text().splitlines()
    edit(lines)
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_rejects_negative_area(tmp_path, tiny_mesh):
    start = 2 + tiny_mesh.n_vertices + 1

    def flip(lines):
        i, j, k = lines[start + 5].split()
        lines[start + 5] = f"{i} {k} {j}"

    with pytest.raises(MeshError, match="triangle 5 "):
        load_mesh(_write(tmp_path, tiny_mesh, flip))


def test_load_rejects_unknown_label(tmp_path, tiny_mesh):
    def relabel(lines):
        lines[-1] = lines[-1].rsplit(" ", 1)[0] + " g2"

    with pytest.raises(MeshFormatError, match="label must be g0 or g1"):
        load_mesh(_write(tmp_path, tiny_mesh, relabel))


def test_load_rejects_trailing_section(tmp_path, tiny_mesh):
    with pytest.raises(MeshFormatError, match="trailing"):
        load_mesh(_write(tmp_path, tiny_mesh, lambda lines: lines.append("extra 0")))


def test_load_reports_line_numbers(tmp_path, tiny_mesh):
    def corrupt(lines):
        lines[4] = "1.0 nope"

    with pytest.raises(MeshFormatError, match="line 5"):
        load_mesh(_write(tmp_path, tiny_mesh, corrupt))


def test_load_rejects_bad_header(tmp_path, tiny_mesh):
    def corrupt(lines):
        lines[0] = "bse-mesh 2"

    with pytest.raises(MeshFormatError, match="header"):
        load_mesh(_write(tmp_path, tiny_mesh, corrupt))


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_mesh(tmp_path / "nope.txt")


def test_validation_requires_both_labels(tiny_mesh):
    labels = tuple(GAMMA0 for _ in tiny_mesh.boundary_labels)
    with pytest.raises(MeshError, match="Gamma1 edge set is empty"):
        validate(Mesh(tiny_mesh.vertices, tiny_mesh.triangles, tiny_mesh.boundary_edges, labels))


def test_validation_rejects_touching_components():
    # unit square split in two triangles; Gamma0 and Gamma1 meet at corners
    v = [(0, 0), (1, 0), (1, 1), (0, 1)]
    t = [(0, 1, 2), (0, 2, 3)]
    b = [(0, 1), (1, 2), (2, 3), (3, 0)]
    labels = (GAMMA0, GAMMA0, GAMMA1, GAMMA1)
    with pytest.raises(MeshError, match="both Gamma0 and Gamma1"):
        validate(Mesh(v, t, b, labels))


def test_validation_rejects_unlabeled_boundary(tiny_mesh):
    keep = slice(0, len(tiny_mesh.boundary_edges) - 1)
    with pytest.raises(MeshError, match="carry no label"):
        validate(Mesh(tiny_mesh.vertices, tiny_mesh.triangles, tiny_mesh.boundary_edges[keep],
                      tiny_mesh.boundary_labels[keep]))


def test_mesh_is_immutable(tiny_mesh):
    with pytest.raises(ValueError):
        tiny_mesh.vertices[0, 0] = 5.0
