"""Gallery of the dictionary atoms: Hermite functions, rescaling, sigmoid.

Run from the repository root:  python3 demos/atoms_gallery.py
Figures land in demos/output/.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vpecg import AtomSpec, atom_value, hermite_fn
from vpecg.atoms import RESCALE_BASE

os.makedirs("demos/output", exist_ok=True)

t = np.linspace(-6, 6, 1200)

# The first Hermite functions widen with order...
fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
for j in range(4):
    axes[0].plot(t, hermite_fn(j, t), label=f"order {j}")
axes[0].set_title("plain Hermite functions")
axes[0].legend(frameon=False)

# ...while the 1.11^j argument rescale pulls their supports together,
# which is what lets one (lambda, tau) pair control a whole wave.
for j in range(4):
    axes[1].plot(t, hermite_fn(j, RESCALE_BASE**j * t), label=f"order {j}")
axes[1].set_title("rescaled (unified support)")
axes[1].legend(frameon=False)
for ax in axes:
    ax.set_xlabel("t")
fig.tight_layout()
fig.savefig("demos/output/hermite_rescaling.png", dpi=120)

# A dilated/translated atom pair as used for an actual beat: a QRS-width
# Gaussian and the sigmoid step that models an ST shift.
tt = np.linspace(-0.3, 0.55, 2000)
gauss = atom_value(AtomSpec("hermite", lam=60.0, tau=0.01, j=0), tt)
step = atom_value(AtomSpec("sigmoid", lam=60.0, tau=0.01), tt)
fig, ax = plt.subplots(figsize=(7, 3.5))
ax.plot(tt, gauss, label="Gaussian atom (lam=60/s, tau=10ms)")
ax.plot(tt, step, label="sigmoid atom (ST step)")
ax.set_xlabel("time relative to R peak [s]")
ax.legend(frameon=False)
fig.tight_layout()
fig.savefig("demos/output/beat_atoms.png", dpi=120)

print("wrote demos/output/hermite_rescaling.png and beat_atoms.png")
