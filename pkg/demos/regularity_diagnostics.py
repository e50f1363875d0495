# %% [markdown]
# Regularity diagnostics on exact and solved fields
#
# Gradient oscillation over shrinking balls, plane-fit flatness, and the
# squared H2 seminorm of |t|^beta under refinement.

# %%
import numpy as np

from gplap.field import GridSpec, ScalarField, box_mask, gradient_central
from gplap.oracle import radial_oracle
from gplap.regularity import (
    flatness_sequence, holder_fit_gradient, power_profile_sweep, theorem3_band_check,
)
from gplap.solver import Domain, Problem, SolverConfig, continuation_solve

# %%
g = GridSpec.cube(2, -1, 1, 1 / 128)
m = box_mask(g)
u = ScalarField(g, np.linalg.norm(g.points(), axis=-1) ** 1.5)
radii = [0.5, 0.25, 0.125, 0.0625]
print("exact |x|^1.5, gradient exponent:",
      holder_fit_gradient(gradient_central(u, m), [(0, 0)], radii, m).alpha_hat)
print("exact |x|^1.5, flatness exponent:", flatness_sequence(u, (0, 0), 0.5, 4, m).alpha_hat)

# %%
# the same measurement on a solved field (gamma = 1, full disk)
o = radial_oracle(1.0, 1.0, 2.0, 2)
prob = Problem(gamma=1.0, p=2.0, bc=o.value, f=o.f_const, lam=0.0, domain=Domain("disk", radius=1.0))
dp = prob.discretize(1 / 64)
rep = continuation_solve(dp, SolverConfig(discretization="central", acceleration="anderson"), schedule=(5e-2,))
fit = holder_fit_gradient(gradient_central(rep.solution, dp.mask), [(0, 0)], radii, dp.mask)
print("solved field, gradient exponent:", round(fit.alpha_hat, 3))

# %%
for beta in (1.4, 1.6):
    sw = power_profile_sweep(beta, [2**k for k in range(10, 21, 2)])
    print(f"beta={beta}: growth exponent {sw['exponent']:.3f}, last value {sw['seminorm_sq'][-1]:.4f}",
          "" if "limit" not in sw else f"(limit {sw['limit']:.4f})")

# %%
for gamma, p, beta in [(0.1, 2.1, 0.5), (0.1, 3.0, 0.5), (0.1, 2.1, 1.0)]:
    print((gamma, p, beta), theorem3_band_check(gamma, p, beta))
