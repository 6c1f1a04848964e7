"""
Potentials away from p = 2
==========================

Continuation from the closed form at p = 2 down to p = 1.2 and up to
p = 3, for the three marginal pairs: equal Gaussians, shifted Gaussians and
a uniform/Gaussian pair. Potentials flatten as p decreases and peak as it
increases; with a uniform first marginal, phi_1 stays constant.

Writes ``figure1.png`` when matplotlib is available.
"""

import numpy as np

from marginal_lp import MarginalSpec, build_mesh, continuation_sweep, sample_marginal

mesh = build_mesh(2, 30)


def gauss(mu):
    return sample_marginal(MarginalSpec("gaussian", mu=mu, sigma2=0.1), mesh)


rows = {
    "equal means": [gauss(0.5), gauss(0.5)],
    "means 1/3, 2/3": [gauss(1 / 3), gauss(2 / 3)],
    "g1 uniform": [sample_marginal(MarginalSpec("uniform"), mesh), gauss(0.5)],
}
targets = np.round(np.arange(1.2, 3.01, 0.2), 10)

sweeps = {name: continuation_sweep(gs, targets) for name, gs in rows.items()}

for name, reps in sweeps.items():
    print(name)
    for r in reps:
        print(f"  p={r.p:.1f}  range(phi_1)={np.ptp(r.potentials.phis[0]):.4f}  "
              f"range(phi_2)={np.ptp(r.potentials.phis[1]):.4f}  residual={r.residual_inf:.1e}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, axes = plt.subplots(3, 2, figsize=(9, 10), sharex=True)
    for row, (name, reps) in zip(axes, sweeps.items()):
        for r in reps:
            style = ":" if r.p == 2 else ("--" if r.p < 2 else "-")
            for i, ax in enumerate(row):
                ax.plot(mesh.centers, r.potentials.phis[i], style, color=plt.cm.viridis((r.p - 1.2) / 1.8), lw=1)
        row[0].set_ylabel(name)
    axes[0, 0].set_title("phi_1")
    axes[0, 1].set_title("phi_2")
    fig.tight_layout()
    fig.savefig("figure1.png", dpi=120)
    print("wrote figure1.png")
