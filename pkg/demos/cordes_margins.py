# %% [markdown]
# Cordes margins of the coefficient matrices
#
# For A = I + (p-2) e e^T with |e| = 1 the margin (tr A)^2/|A|^2 - (n-1) stays
# positive only for p below 3 + 2/(n-2).

# %%
import numpy as np

from gplap.cordes import cordes_delta_matrix, cordes_field, empirical_p_threshold, max_p_for_cordes
from gplap.field import GridSpec, ScalarField, box_mask, gradient_central
from gplap.operator import ProblemParams, coefficient_field

# %%
for n in range(3, 8):
    print(f"n={n}: closed form {max_p_for_cordes(n):.6f}  bisection {empirical_p_threshold(n):.6f}")

# %%
print("identity:", cordes_delta_matrix(np.eye(3)))
print("diag(3,1,1):", cordes_delta_matrix(np.diag([3.0, 1, 1])), "= 3/11 =", 3 / 11)

# %%
# margin along a solution-like field in 2D, where it is always positive
g = GridSpec.cube(2, -1, 1, 1 / 16)
m = box_mask(g)
x = g.points()
u = ScalarField(g, np.sin(2 * x[..., 0]) + x[..., 1] ** 2)
for p in (1.5, 2.5, 6.0):
    A = coefficient_field(gradient_central(u, m), ProblemParams(0.0, p, 1e-3), where=m.interior)
    rep = cordes_field(A, m)
    print(f"p={p}: delta={rep.delta:.4f} at node {rep.worst_node}, satisfied={rep.satisfied}")
