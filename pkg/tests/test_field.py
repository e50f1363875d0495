import numpy as np
import pytest

from gplap.field import (
    GridSpec,
    ScalarField,
    StencilError,
    SymMatrixField,
    VectorField,
    annulus_mask,
    box_mask,
    directional_second_difference,
    directional_second_difference_field,
    discrete_norms,
    disk_mask,
    gradient_central,
    hessian_central,
    oscillation,
    pack_sym,
    read_field,
    unpack_sym,
    write_field,
)


def sample(grid, fn):
    return ScalarField(grid, fn(grid.points()))


@pytest.fixture
def square():
    g = GridSpec.cube(2, -1, 1, 1 / 16)
    return g, box_mask(g)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec((0, 0), (1, 2), (5, 5))
    with pytest.raises(ValueError):
        GridSpec((0,), (1,), (2,))
    with pytest.raises(ValueError):
        GridSpec.cube(2, 0, 1, 0.3)
    g = GridSpec.cube(3, 0, 1, 0.25)
    assert g.shape == (5, 5, 5) and g.dim == 3 and g.h == 0.25
    assert g.nearest_node([0.26, 0.5, 1.0]) == (1, 2, 4)


def test_mask_tags():
    g = GridSpec.cube(2, -1, 1, 1 / 8)
    m = disk_mask(g, radius=1.0)
    # every interior node has its full 3x3 neighbourhood active
    from gplap.field import _shift
    for off in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]:
        assert np.all(_shift(m.active, off, False)[m.interior])
    assert not m.active[0, 0]
    am = annulus_mask(g, inner=0.25)
    assert not am.active[8, 8]


def test_gradient_affine_exact(square):
    g, m = square
    u = sample(g, lambda x: 3 * x[..., 0] - 2 * x[..., 1])
    Du = gradient_central(u, m).values[m.interior]
    np.testing.assert_allclose(Du, np.broadcast_to([3.0, -2.0], Du.shape), rtol=0, atol=1e-12)


def test_gradient_quadratic_exact(square):
    g, m = square
    u = sample(g, lambda x: 0.5 * np.sum(x**2, axis=-1))
    Du = gradient_central(u, m).values
    np.testing.assert_allclose(Du[m.interior], g.points()[m.interior], atol=1e-12)


def test_gradient_one_sided_near_boundary():
    g = GridSpec.cube(2, 0, 1, 0.25)
    m = box_mask(g)
    u = sample(g, lambda x: x[..., 0] ** 2 + x[..., 1])
    Du = gradient_central(u, m, where=m.boundary).values
    np.testing.assert_allclose(Du[m.boundary][:, 0], 2 * g.points()[m.boundary][:, 0], atol=1e-12)


def test_gradient_error_names_node():
    g = GridSpec((0, 0), (2, 2), (3, 3))
    tags = np.zeros((3, 3), dtype=np.int8)
    tags[1, 1] = 2
    tags[0, 1] = 1
    tags[2, 1] = 1
    from gplap.field import DomainMask
    m = DomainMask(g, tags)
    with pytest.raises(StencilError, match=r"\(1, 1\)"):
        gradient_central(ScalarField(g, np.zeros((3, 3))), m)


def _orders(errs):
    return [np.log2(a / b) for a, b in zip(errs, errs[1:])]


def test_gradient_and_hessian_order_on_annulus():
    # errors measured at the interior nodes of the coarsest grid, which are
    # nodes of every finer grid
    base = None
    gerr, herr = [], []
    for N in (16, 32, 64, 128):
        g = GridSpec.cube(2, -1, 1, 1 / N)
        m = annulus_mask(g, inner=0.25)
        x = g.points()
        r = np.linalg.norm(x, axis=-1)
        u = ScalarField(g, np.where(m.active, r**1.5, np.nan))
        if base is None:
            base = x[m.interior]
        idx = tuple(np.rint((base + 1) * N).astype(int).T)
        xi = x[idx]
        ri = r[idx]
        Dex = 1.5 * ri[:, None] ** -0.5 * xi
        xh = xi / ri[:, None]
        Hex = 1.5 * ri[:, None, None] ** -0.5 * (np.eye(2) - 0.5 * xh[:, :, None] * xh[:, None, :])
        assert np.all(m.interior[idx])
        gerr.append(np.max(np.abs(gradient_central(u, m).values[idx] - Dex)))
        herr.append(np.max(np.abs(hessian_central(u, m).values[idx] - Hex)))
    hs = [1 / 16, 1 / 32, 1 / 64, 1 / 128]
    assert np.polyfit(np.log(hs), np.log(gerr), 1)[0] >= 1.9
    assert np.polyfit(np.log(hs), np.log(herr), 1)[0] >= 1.9


def test_hessian_quadratic_and_affine(square):
    g, m = square
    H = hessian_central(sample(g, lambda x: 0.5 * np.sum(x**2, -1)), m).values[m.interior]
    np.testing.assert_allclose(H, np.broadcast_to(np.eye(2), H.shape), atol=1e-10)
    H = hessian_central(sample(g, lambda x: x[..., 0] - 4 * x[..., 1] + 1), m).values[m.interior]
    np.testing.assert_allclose(H, 0, atol=1e-10)
    Q = np.array([[1.0, 0.4], [0.4, -2.0]])
    H = hessian_central(sample(g, lambda x: np.einsum("...i,ij,...j", x, Q, x)), m).values[m.interior]
    np.testing.assert_allclose(H, np.broadcast_to(2 * Q, H.shape), atol=1e-10)


def test_directional_second_difference(square):
    g, m = square
    node = (8, 8)
    half = sample(g, lambda x: 0.5 * np.sum(x**2, -1))
    for e in [(1, 0), (0, 1), (1, 1), (1, -1)]:
        e = np.array(e) / np.linalg.norm(e)
        assert directional_second_difference(half, m, node, e) == pytest.approx(1.0, abs=1e-12)
        assert directional_second_difference(half, m, node, e, m=2) == pytest.approx(1.0, abs=1e-12)
    aff = sample(g, lambda x: 2 * x[..., 0] + x[..., 1])
    assert directional_second_difference(aff, m, node, (1, 1)) == pytest.approx(0.0, abs=1e-12)
    xy = sample(g, lambda x: x[..., 0] * x[..., 1])
    assert directional_second_difference(xy, m, node, np.array([1, 1]) / np.sqrt(2)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(StencilError):
        directional_second_difference(xy, m, (0, 3), (1, 0))
    with pytest.raises(ValueError):
        directional_second_difference(xy, m, node, (2, 1))
    fld = directional_second_difference_field(xy, m, (1, 1)).values[m.interior]
    np.testing.assert_allclose(fld, 1.0, atol=1e-12)


def test_oscillation(square):
    g, m = square
    assert oscillation(ScalarField(g, np.full(g.shape, 3.0)), (0, 0), 0.5, m)[0] == 0.0
    q = np.array([0.6, -0.8])
    osc, count = oscillation(sample(g, lambda x: x @ q), (0, 0), 0.5, m)
    assert osc <= 2 * 0.5 * np.linalg.norm(q) + 1e-12 and count > 4
    with pytest.raises(ValueError):
        oscillation(sample(g, lambda x: x[..., 0]), (0, 0), 0.01, m)
    gf = GridSpec.cube(2, -1, 1, 1 / 128)
    mf = box_mask(gf)
    osc, _ = oscillation(sample(gf, lambda x: np.sum(x**2, -1)), (0, 0), 0.5, mf)
    assert abs(osc - 0.25) <= gf.h**2


def test_discrete_norms():
    g = GridSpec.cube(2, 0, 1, 1 / 64)
    m = box_mask(g)
    z = discrete_norms(ScalarField(g, np.zeros(g.shape)), m)
    assert z["sup"] == z["l2"] == z["h2"] == 0.0
    u = sample(g, lambda x: 0.5 * x[..., 0] ** 2)
    assert discrete_norms(u, m)["h2"] == pytest.approx(1.0, abs=4 * g.h)


def test_power_profile_seminorm_limit():
    from gplap.regularity import power_profile_seminorm_sq
    val = power_profile_seminorm_sq(2.0, 256)
    assert val == pytest.approx(8.0, rel=1e-9 + 2 / 256)


@pytest.mark.parametrize("kind", ["scalar", "vector", "symmatrix"])
def test_field_file_roundtrip(tmp_path, kind):
    rng = np.random.default_rng(3)
    g = GridSpec.box([0, -1, 2], [1, 0, 3], 0.5)
    if kind == "scalar":
        f = ScalarField(g, rng.normal(size=g.shape))
    elif kind == "vector":
        f = VectorField(g, rng.normal(size=g.shape + (3,)))
    else:
        a = rng.normal(size=g.shape + (3, 3))
        f = SymMatrixField(g, a + np.swapaxes(a, -1, -2))
    write_field(tmp_path / "f.field", f, provenance={"source": "test"})
    back, header = read_field(tmp_path / "f.field")
    assert back.kind == kind and header["provenance"] == {"source": "test"}
    assert np.array_equal(back.values, f.values)
    raw = (tmp_path / "f.field").read_bytes()
    assert raw.split(b"\n", 1)[0].startswith(b'{"counts": [3, 3, 3]')


def test_sym_pack_roundtrip():
    a = np.arange(9.0).reshape(3, 3)
    a = a + a.T
    assert np.array_equal(unpack_sym(pack_sym(a), 3), a)


def test_symmatrix_rejects_asymmetric():
    g = GridSpec.cube(2, 0, 1, 0.5)
    with pytest.raises(ValueError):
        SymMatrixField.constant(g, [[1.0, 2.0], [0.0, 1.0]])


def test_one_dimensional_grid():
    g = GridSpec.cube(1, -1, 1, 1 / 8)
    m = box_mask(g)
    u = sample(g, lambda x: x[..., 0] ** 2)
    np.testing.assert_allclose(hessian_central(u, m).values[m.interior][:, 0, 0], 2.0, atol=1e-12)
