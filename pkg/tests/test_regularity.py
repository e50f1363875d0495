import warnings

import numpy as np
import pytest

from gplap.field import GridSpec, ScalarField, VectorField, box_mask, discrete_norms, disk_mask
from gplap.regularity import (
    EXACT_PLANE,
    LIPSCHITZ,
    W22Report,
    band_margin,
    best_plane,
    flatness_sequence,
    holder_fit_gradient,
    loglog_fit,
    power_profile_seminorm_sq,
    power_profile_sweep,
    theorem3_band_check,
    w22_sweep,
)
from gplap.solver import Domain, Problem, SolverConfig


@pytest.fixture(scope="module")
def fine():
    g = GridSpec.cube(2, -1, 1, 1 / 128)
    return g, box_mask(g)


def sample(grid, fn):
    return ScalarField(grid, fn(grid.points()))


def test_loglog_fit_recovers_power():
    x = np.array([1, 2, 4, 8.0])
    a, b, res = loglog_fit(x, 3 * x**1.7)
    assert a == pytest.approx(1.7) and np.exp(b) == pytest.approx(3) and res < 1e-12


def test_best_plane_affine_exact(fine):
    g, m = fine
    q0 = np.array([0.7, -0.2])
    q, osc = best_plane(sample(g, lambda x: x @ q0 + 1.5), (0.1, 0.2), 0.3, m)
    assert np.allclose(q, q0, atol=1e-12) and osc <= 1e-12


def test_best_plane_symmetric_quadratic(fine):
    g, m = fine
    q, _ = best_plane(sample(g, lambda x: np.sum(x * x, -1)), (0, 0), 0.5, m)
    assert np.max(np.abs(q)) <= 1e-12


def test_best_plane_power_profile():
    g = GridSpec.cube(2, -1, 1, 1 / 128)
    m = box_mask(g)
    q, _ = best_plane(sample(g, lambda x: np.linalg.norm(x, axis=-1) ** 1.5), (0.5, 0), 0.25, m)
    exact = 1.5 * 0.5**0.5
    assert abs(q[0] - exact) <= 0.1 * exact and abs(q[1]) <= 1e-10


def test_best_plane_rank_deficient(fine):
    g, m = fine
    with pytest.raises(ValueError, match="rank-deficient"):
        best_plane(sample(g, lambda x: x[..., 0]), (0, 0), 1e-4, m)


def test_plane_fit_idempotence(fine):
    g, m = fine
    u = sample(g, lambda x: np.sin(2 * x[..., 0]) + x[..., 1] ** 3)
    q, _ = best_plane(u, (0.2, -0.1), 0.4, m)
    w = ScalarField(g, u.values - g.points() @ q)
    q2, _ = best_plane(w, (0.2, -0.1), 0.4, m)
    assert np.max(np.abs(q2)) <= 1e-12


def test_flatness_affine_exact_plane(fine):
    g, m = fine
    rep = flatness_sequence(sample(g, lambda x: 2 * x[..., 0] - x[..., 1]), (0, 0), 0.5, 4, m)
    assert rep.alpha_hat == EXACT_PLANE
    assert rep.to_dict()["alpha_hat"] == EXACT_PLANE


def test_flatness_quadratic(fine):
    g, m = fine
    rep = flatness_sequence(sample(g, lambda x: 0.5 * np.sum(x * x, -1)), (0, 0), 0.5, 4, m)
    assert rep.alpha_hat == pytest.approx(1.0, abs=0.05)
    assert all(o >= 0 for o in rep.osc_k) and len(rep.q_steps) == 4
    assert rep.decay_holds()


def test_flatness_truncates_with_warning():
    g = GridSpec.cube(2, -1, 1, 1 / 16)
    m = box_mask(g)
    with pytest.warns(RuntimeWarning, match="truncating"):
        rep = flatness_sequence(sample(g, lambda x: x[..., 0] ** 2), (0, 0), 0.5, 6, m)
    assert rep.truncated and len(rep.radii) < 7 and min(rep.counts) >= 8


def test_flatness_preconditions(fine):
    g, m = fine
    u = sample(g, lambda x: x[..., 0] ** 2)
    with pytest.raises(ValueError):
        flatness_sequence(u, (0, 0), 0.5, 2, m)
    with pytest.raises(ValueError):
        flatness_sequence(u, (0, 0), 1.5, 4, m)
    with pytest.raises(ValueError, match="leaves the mask"):
        flatness_sequence(u, (0.5, 0), 0.5, 4, m)


def grad_field(g, fn):
    return VectorField(g, fn(g.points()))


def test_holder_constant_gradient(fine):
    g, m = fine
    Du = grad_field(g, lambda x: np.broadcast_to([1.0, -2.0], x.shape).copy())
    fit = holder_fit_gradient(Du, [(0, 0)], [0.5, 0.25, 0.125, 0.0625], m)
    assert fit.alpha_hat == LIPSCHITZ


def test_holder_power_profile(fine):
    g, m = fine

    def grad(x):
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(r > 0, 1.5 * r**-0.5, 0.0)
        return fac[..., None] * x

    fit = holder_fit_gradient(grad_field(g, grad), [(0, 0), (1 / 128, 0)], [0.5, 0.25, 0.125, 0.0625], m)
    assert fit.alpha_hat == pytest.approx(0.5, abs=0.07)


def test_holder_quadratic(fine):
    g, m = fine
    fit = holder_fit_gradient(grad_field(g, lambda x: x.copy()), [(0, 0)], [0.5, 0.25, 0.125, 0.0625], m)
    assert fit.alpha_hat == pytest.approx(1.0, abs=0.05)


def test_holder_needs_decade(fine):
    g, m = fine
    Du = grad_field(g, lambda x: x.copy())
    with pytest.raises(ValueError):
        holder_fit_gradient(Du, [(0, 0)], [0.5, 0.25, 0.125], m)
    with pytest.raises(ValueError):
        holder_fit_gradient(Du, [(0, 0)], [0.5, 0.4, 0.3, 0.2], m)


def test_subdomain_monotonicity():
    g = GridSpec.cube(2, -1, 1, 1 / 64)
    m = disk_mask(g, (0, 0), 1.0)
    u = ScalarField(g, np.where(m.active, np.linalg.norm(g.points(), axis=-1) ** 1.5, np.nan))
    r = np.linalg.norm(g.points(), axis=-1)
    vals = [discrete_norms(u, m, subdomain=r < rad)["h2"] for rad in (0.2, 0.4, 0.6, 0.8)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_w22_affine_zero_and_subdomain_check():
    prob = Problem(gamma=-0.5, p=2.5, bc=lambda x: 0.3 * x[..., 0] - x[..., 1], f=0.0, lam=0.0,
                   domain=Domain("disk", radius=1.0))
    sub = lambda x: np.linalg.norm(x, axis=-1) < 0.6
    rep = w22_sweep(prob, [1 / 16, 1 / 32], [1e-1, 1e-2], sub, SolverConfig(inner_tol=1e-13))
    assert max(rep.seminorms.values()) <= 1e-8
    assert set(rep.ratio) == {1 / 16, 1 / 32}
    d = rep.to_dict()
    assert len(d["seminorms"]) == 4
    both = W22Report.combine([w22_sweep(prob, [h], [1e-1, 1e-2], sub, SolverConfig(inner_tol=1e-13))
                              for h in (1 / 16, 1 / 32)])
    assert both.seminorms.keys() == rep.seminorms.keys()
    with pytest.raises(ValueError, match="2h"):
        w22_sweep(prob, [1 / 16], [1e-1], lambda x: np.linalg.norm(x, axis=-1) < 0.99)


def test_power_profile_seminorm():
    assert power_profile_seminorm_sq(2.0, 64) == pytest.approx(4.0 * 63 * (2 / 64), rel=1e-12)
    with pytest.raises(ValueError):
        power_profile_seminorm_sq(1.4, 63)
    out = power_profile_sweep(1.4, [2**k for k in range(12, 19, 2)])
    assert out["exponent"] == pytest.approx(2 * 1.4 - 3, abs=0.05)
    assert "limit" not in out
    assert power_profile_sweep(1.6, [64, 128])["limit"] == pytest.approx(9.216)


def test_band_check_examples():
    assert theorem3_band_check(0.1, 2.1, 0.5)
    assert band_margin(0.1, 2.1, 0.5) == pytest.approx(0.5)
    assert not theorem3_band_check(0.1, 3.0, 0.5)
    assert not theorem3_band_check(0.1, 2.1, 1.0)
    assert not theorem3_band_check(0.6, 2.6, 0.5)
    assert not theorem3_band_check(0.0, 2.0, 0.5)
