"""
The quadratic case in closed form
=================================

For p = 2 the potentials are explicit and the minimal density is additive:
``h(x, y) = g1(x) + g2(y) - 1`` for unit-mass marginals. We check the
sharp bound against a few other joints with the same marginals.
"""

import numpy as np

from marginal_lp import MarginalSpec, build_mesh, l2_bound, l2_potentials, sample_marginal
from marginal_lp.analysis import product_joint, project_vanishing

mesh = build_mesh(2, 30)
g1 = sample_marginal(MarginalSpec("gaussian", mu=1 / 3, sigma2=0.1), mesh)
g2 = sample_marginal(MarginalSpec("gaussian", mu=2 / 3, sigma2=0.1), mesh)

sol = l2_potentials([g1, g2])
print("phi_1 = 2 g1 ?", np.allclose(sol.potentials[0], 2 * g1.values))
print("phi_2 = 2 (g2 - 1) ?", np.allclose(sol.potentials[1], 2 * (g2.values - 1)))

bound = l2_bound([g1, g2])
h = sol.minimal_density()
print(f"bound             {bound:.6f}")
print(f"mean h**2         {np.mean(h ** 2):.6f}")

# The independent joint has the same marginals, so its second moment is larger.
print(f"independent joint {np.mean(product_joint([g1, g2]) ** 2):.6f}")

# Adding any table with vanishing marginals can only increase the norm.
rng = np.random.default_rng(0)
for _ in range(3):
    other = h + 0.2 * project_vanishing(rng.standard_normal(mesh.shape), mesh)
    print(f"perturbed joint   {np.mean(other ** 2):.6f}")
