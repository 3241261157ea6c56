"""Fit one noisy beat and show the recovered components.

Run from the repository root:  python3 demos/fit_single_beat.py
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vpecg import BeatSignal, NonlinearParams, WaveKind, fit
from vpecg.synth import beat_waveform, model_template

os.makedirs("demos/output", exist_ok=True)

f_s = 500.0
t = np.arange(-0.3, 0.6, 1.0 / f_s)

# one clean template beat plus a slow baseline drift
template = model_template(st_offset=0.1)
clean = beat_waveform(template, t)
drift = 0.35 * np.sin(2 * np.pi * 0.4 * (t + 0.2)) + 0.2
beat = BeatSignal(samples=clean + drift, f_s=f_s, t=t)

# warm start a little off the truth, as the record pipeline would provide
start = NonlinearParams(55.0, 0.0, 22.0, 0.27, 47.0, -0.21)
mf = fit(beat, start)
print(f"converged={mf.converged} after {mf.iterations} iterations, residual={mf.residual_sq:.2e}")
print("recovered params:", np.round(mf.params.as_array(), 3))

fig, axes = plt.subplots(2, 1, figsize=(9, 7), sharex=True)
axes[0].plot(t, beat.samples, color="0.6", label="observed (with drift)")
axes[0].plot(t, mf.reconstruction(), "k--", lw=1, label="model")
axes[0].plot(t, mf.baseline, color="tab:red", label="baseline estimate")
axes[0].legend(frameon=False)
axes[0].set_ylabel("mV")

labels = {WaveKind.P: "P", WaveKind.QRS: "QRS", WaveKind.T: "T"}
for wave, name in labels.items():
    axes[1].plot(t, mf.components[wave], label=name)
axes[1].plot(t, beat.samples - mf.baseline, color="0.8", zorder=0, label="denoised beat")
axes[1].legend(frameon=False)
axes[1].set_xlabel("time relative to R peak [s]")
axes[1].set_ylabel("mV")
fig.tight_layout()
fig.savefig("demos/output/single_beat_fit.png", dpi=120)
print("wrote demos/output/single_beat_fit.png")
