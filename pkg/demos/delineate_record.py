"""Wave delineation on fitted beats, scored against the generator's ground truth.

Run from the repository root:  python3 demos/delineate_record.py
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vpecg import (
    AnnotatedBeat,
    GaConfig,
    GateThresholds,
    OptimizerConfig,
    PipelineConfig,
    SynthConfig,
    WaveKind,
    delineate,
    generate_dataset,
    process_record,
    score_delineation,
)
from vpecg.synth import piecewise_template

os.makedirs("demos/output", exist_ok=True)

ds = generate_dataset(
    SynthConfig(template=piecewise_template(-0.1), n_beats=60, snr_db=0.0, seed=6)
)
cfg = PipelineConfig(
    ga=GaConfig(generations=30, seed=1),
    optimizer=OptimizerConfig(step_tol=1e-6, obj_tol=5e-9),
    thresholds=GateThresholds(np.inf, np.inf, np.inf, np.inf),
)
res = process_record(ds.noisy, 0, range(0, 20), range(20, 55), cfg)

annotated = [
    AnnotatedBeat(r_time=ds.noisy.r_peaks[20 + i] / ds.noisy.f_s, marks=delineate(mf))
    for i, mf in enumerate(res.fits)
]
stats = score_delineation([annotated], ds.truth.beats[20:55])
print(f"{'fiducial':10s} {'Se %':>6s} {'bias ms':>8s} {'std ms':>7s} group")
for kind, st in stats.items():
    print(f"{kind:10s} {st.sensitivity:6.1f} {st.bias_ms:8.2f} {st.std_ms:7.2f} {st.group:>5s}")

# draw a few beats with their marks
fig, ax = plt.subplots(figsize=(11, 4))
colors = {WaveKind.P: "tab:green", WaveKind.QRS: "tab:red", WaveKind.T: "tab:purple"}
for i in (0, 1, 2):
    mf = res.fits[i]
    r_t = ds.noisy.r_peaks[20 + i] / ds.noisy.f_s
    t_abs = mf.grid + r_t
    denoised = np.sum([mf.components[w] for w in WaveKind], axis=0)
    ax.plot(t_abs, denoised, color="0.3", lw=0.9)
    marks = delineate(mf)
    for wave in WaveKind:
        wm = marks.for_wave(wave)
        if wm is None:
            continue
        for x in (wm.onset, wm.peak, wm.end):
            ax.axvline(r_t + x, color=colors[wave], alpha=0.5, lw=0.8)
ax.set_xlabel("time [s]")
ax.set_ylabel("mV")
ax.set_title("fitted waves with onset/peak/end marks (P green, QRS red, T purple)")
fig.tight_layout()
fig.savefig("demos/output/delineation.png", dpi=120)
print("wrote demos/output/delineation.png")
