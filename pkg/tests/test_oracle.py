import numpy as np
import pytest

from gplap.field import GridSpec, annulus_mask, box_mask, read_field
from gplap.operator import ProblemParams, apply_gamma_p
from gplap.oracle import (
    AnalyticField,
    affine,
    export_oracle,
    manufactured,
    numeric_operator,
    power_profile_1d,
    radial_exponent,
    radial_oracle,
    rescale,
    verify_radial_oracle,
)


def test_radial_exponent():
    assert radial_exponent(0) == 2 and radial_exponent(1) == 1.5 and radial_exponent(-0.5) == 3
    with pytest.raises(ValueError):
        radial_exponent(-1)


def test_radial_oracle_constants():
    o = radial_oracle(1, 1, 2, 2)
    assert o.s == 1.5 and o.f_const == pytest.approx(-27 / 8)
    for n in (1, 2, 3):
        assert radial_oracle(1, 0, 2, n).f_const == pytest.approx(-2 * n)
    assert radial_oracle(1, 0, 3, 2).f_const == pytest.approx(-6)
    assert radial_oracle(1, -0.5, 2.5, 2).f_const == pytest.approx(-4 * np.sqrt(3))
    with pytest.raises(ValueError):
        radial_oracle(0, 1, 2, 2)


def test_verify_rejects_wrong_constant():
    o = radial_oracle(1, 1, 2, 2)
    bad = type(o)(o.c, o.s, o.f_const * 1.001, o.gamma, o.p, o.n)
    with pytest.raises(AssertionError):
        verify_radial_oracle(bad)


def test_gradient_exponent_matches_profile():
    o = radial_oracle(2.0, 1.0, 3.0, 2)
    x = np.array([[0.1, 0.0], [0.4, 0.0]])
    g = np.linalg.norm(o.grad(x), axis=-1)
    assert np.log(g[1] / g[0]) / np.log(4) == pytest.approx(o.gradient_holder_exponent())


def test_power_profile():
    g = GridSpec.cube(1, -1, 1, 0.25)
    _, info = power_profile_1d(1.6, g)
    assert info["finite"] and info["value"] == pytest.approx(9.216)
    _, info = power_profile_1d(1.5, g)
    assert not info["finite"]
    _, info = power_profile_1d(2.0, g)
    assert info["value"] == pytest.approx(8.0)


def test_manufactured_paths():
    g = GridSpec.cube(2, -1, 1, 1 / 8)
    prm = ProblemParams(0, 3, 0.0)
    _, f, prov = manufactured(affine([1.0, 2.0], 0.5), prm, g)
    assert prov["method"] == "closed-form"
    np.testing.assert_allclose(f.values, 0.0, atol=1e-14)
    half = AnalyticField(lambda x: 0.5 * np.sum(x**2, -1))
    _, f, prov = manufactured(half, prm, g)
    assert prov["method"] == "fd4" and prov["step"] == g.h / 4
    np.testing.assert_allclose(f.values, -3.0, atol=1e-9)
    o = radial_oracle(1, 1, 2, 2)
    m = annulus_mask(g, inner=0.25)
    _, f1, _ = manufactured(o.as_analytic(), ProblemParams(1, 2, 0.0), g, where=m.active)
    _, f2, _ = manufactured(AnalyticField(o.value), ProblemParams(1, 2, 0.0), g, where=m.active, refine=16)
    np.testing.assert_allclose(f1.values[m.active], o.f_const, rtol=1e-12)
    np.testing.assert_allclose(f2.values[m.active], o.f_const, rtol=1e-6)


def test_oracle_residual_order():
    o = radial_oracle(1, -0.5, 2.5, 2)
    errs = []
    for N in (16, 32, 64):
        g = GridSpec.cube(2, -1, 1, 1 / N)
        m = annulus_mask(g, inner=0.25)
        u = o.sample(g, m.active)
        res = apply_gamma_p(u, ProblemParams(-0.5, 2.5, 1e-12), m).values[m.interior] - o.f_const
        errs.append(np.max(np.abs(res)))
    assert np.polyfit(np.log([16, 32, 64]), np.log(errs), 1)[0] <= -1.5


def test_scaling_closure_of_radial_oracle():
    o = radial_oracle(1.3, 0.5, 3.0, 2)
    for r, x0 in [(0.5, (0.0, 0.0)), (2.0, (0.0, 0.0))]:
        ur = rescale(o.as_analytic(), r, x0, 0.5)
        pts = np.array([[0.3, 0.4], [-0.5, 0.1]])
        np.testing.assert_allclose(ur.value(pts), o.value(pts), rtol=1e-12)
        f = numeric_operator(ur.value, pts, 0.5, 3.0)
        np.testing.assert_allclose(f, o.f_const, rtol=1e-6)


def test_export(tmp_path):
    o = radial_oracle(1, 1, 2, 2)
    g = GridSpec.cube(2, -1, 1, 0.25)
    export_oracle(tmp_path / "o.field", o, g, box_mask(g).active)
    fld, header = read_field(tmp_path / "o.field")
    assert header["provenance"]["f_const"] == pytest.approx(-27 / 8)
    assert header["provenance"]["certified_at_origin"] is False
    assert fld.values[4, 4] == 0.0
