import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenlab.geometry import (DomainSpec, MeshError, PointLocator, build_mesh, read_mesh, refine,
                               transfer, truncation_family, write_mesh)

SPECS = [DomainSpec.disk(1.0), DomainSpec.annulus(1.0, 0.2), DomainSpec.truncated_plane(4.0),
         DomainSpec.annulus(2.0, 0.05)]


def _euler(mesh):
    e, _ = mesh.edges()
    return mesh.nv - len(e) + mesh.nt


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}-{s.radius}-{s.inner_radius}")
@pytest.mark.parametrize("level", [0, 2])
def test_mesh_invariants(spec, level):
    m = build_mesh(spec, level)
    assert np.all(m.signed_areas() > 0)
    _, counts = m.edges()
    assert counts.max() == 2
    # boundary edges have both ends flagged, flags sit on the boundary circles
    be = m.boundary_edges()
    assert np.all(m.boundary_flags[be])
    rho = m.origin_distance
    tol = 1e-12 * spec.radius
    on = np.zeros(m.nv, bool)
    for R in spec.boundary_radii:
        on |= np.abs(rho - R) <= tol
    assert np.array_equal(on, m.boundary_flags)
    assert _euler(m) == (0 if spec.kind == "annulus" else 1)


def test_coarse_disk_area_and_orientation():
    m = build_mesh(DomainSpec.disk(1.0), 0)
    assert abs(m.areas().sum() - np.pi) <= 0.05 * np.pi
    assert np.any(np.all(m.vertices == 0.0, axis=1))


def test_annulus_excludes_inner_ball():
    m = build_mesh(DomainSpec.annulus(1.0, 0.2), 3)
    assert m.origin_distance.min() >= 0.2 - 1e-12


def test_area_error_ratio_about_four():
    errs = [abs(build_mesh(DomainSpec.disk(1.0), L).areas().sum() - np.pi) for L in range(2, 6)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(ratios - 4.0) < 0.1)


def test_refine_quadrisects_and_keeps_vertices():
    m0 = build_mesh(DomainSpec.disk(1.0), 1)
    m1 = refine(m0)
    m2 = refine(m1)
    assert m1.nt == 4 * m0.nt and m2.nt == 4 * m1.nt
    assert np.array_equal(m2.vertices[:m0.nv], m0.vertices)
    new = np.arange(m0.nv, m1.nv)
    bnew = new[m1.boundary_flags[new]]
    assert len(bnew) and np.all(np.abs(m1.origin_distance[bnew] - 1.0) <= 1e-12)


def test_h_halves_up_to_projection():
    # quadrisection halves every edge; projecting midpoints to the circle adds at most the sagitta
    for L in range(0, 4):
        a, b = build_mesh(DomainSpec.disk(1.0), L), build_mesh(DomainSpec.disk(1.0), L + 1)
        sagitta = 1.0 - np.cos(np.pi / 16 / 2 ** L)
        assert b.h <= 0.5 * a.h * (1 + 1e-6) + sagitta


def test_determinism():
    a = build_mesh(DomainSpec.annulus(1.0, 0.1), 2)
    b = build_mesh(DomainSpec.annulus(1.0, 0.1), 2)
    assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.triangles, b.triangles)


def test_meshes_are_read_only():
    m = build_mesh(DomainSpec.disk(1.0), 0)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 1.0


@pytest.mark.parametrize("bad", [
    lambda: DomainSpec.annulus(1.0, 1.0), lambda: DomainSpec.annulus(1.0, 0.0),
    lambda: DomainSpec.disk(0.0), lambda: DomainSpec.disk(-1.0),
    lambda: DomainSpec("square", 1.0), lambda: DomainSpec("disk", 1.0, center=(0.5, 0.0)),
])
def test_invalid_specs(bad):
    with pytest.raises(MeshError):
        bad()


def test_level_limit():
    with pytest.raises(MeshError):
        build_mesh(DomainSpec.disk(1.0), 11)


def test_truncation_families():
    inner = truncation_family(DomainSpec.disk(1.0), [0.2, 0.1, 0.05], 1)
    assert [m.spec.kind for m in inner] == ["annulus"] * 3
    outer = truncation_family(DomainSpec.truncated_plane(2.0), [2, 4, 8], 0)
    assert [m.spec.radius for m in outer] == [2.0, 4.0, 8.0]
    with pytest.raises(MeshError):
        truncation_family(DomainSpec.disk(1.0), [0.1, 0.2], 1)
    with pytest.raises(MeshError):
        truncation_family(DomainSpec.truncated_plane(2.0), [4, 2], 0)


def test_nested_families_share_vertices():
    # outside the snapped inner ring (0.1 -> next ring 0.125) annulus vertices are disk vertices
    d = build_mesh(DomainSpec.disk(1.0), 2)
    a = build_mesh(DomainSpec.annulus(1.0, 0.1), 2)
    pts = a.vertices[a.origin_distance >= 0.125 - 1e-12]
    tri, bary = PointLocator(d).locate(pts)
    assert np.all(tri >= 0)
    assert np.all(np.isclose(bary.max(axis=1), 1.0, atol=1e-9))


def test_transfer_reproduces_linear_functions_and_extends_by_zero():
    src = build_mesh(DomainSpec.annulus(1.0, 0.2), 2)
    dst = build_mesh(DomainSpec.disk(1.0), 3)
    f = lambda x: 1.0 + 2.0 * x[:, 0] - x[:, 1]
    out = transfer(f(src.vertices), src, dst, outside=0.0)
    inside = dst.origin_distance >= 0.2 + 1e-9
    hole = dst.origin_distance < 0.2 * np.cos(np.pi / 16) - 1e-9
    assert np.allclose(out[inside & (dst.origin_distance <= np.cos(np.pi / 64))],
                       f(dst.vertices)[inside & (dst.origin_distance <= np.cos(np.pi / 64))], atol=1e-12)
    assert np.all(out[hole] == 0.0)


def test_mesh_dump_round_trip(tmp_path):
    m = build_mesh(DomainSpec.annulus(1.0, 0.3), 1)
    text = write_mesh(m, tmp_path / "m.mesh")
    assert text.splitlines()[0] == f"MESH {m.nv} {m.nt}"
    assert (tmp_path / "m.mesh").read_text() == text
    v, t, f = read_mesh(text)
    assert np.array_equal(v, m.vertices) and np.array_equal(t, m.triangles) and np.array_equal(f, m.boundary_flags)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 0.9), st.integers(0, 2))
def test_annulus_property(r, level):
    m = build_mesh(DomainSpec.annulus(1.0, r), level)
    assert np.all(m.signed_areas() > 0)
    assert m.origin_distance.min() >= r - 1e-12
    assert np.all(m.boundary_flags[m.boundary_edges()])
