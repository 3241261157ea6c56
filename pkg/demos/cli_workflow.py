"""End-to-end CLI workflow driven from Python: simulate -> denoise -> delineate -> evaluate.

Run from the repository root:  python3 demos/cli_workflow.py
Equivalent shell commands are printed as they run.
"""

import json
import shutil
import tempfile
from pathlib import Path

from vpecg import cli

base = Path(tempfile.mkdtemp(prefix="vpecg_demo_"))
print(f"working in {base}")

(base / "sim.cfg").write_text(
    "seed=12\n"
    "synth.template=model\n"
    "synth.n_beats=60\n"
    "synth.snr_db=0\n"
)
(base / "run.cfg").write_text(
    "seed=12\n"
    "pipeline.train_start=0\n"
    "pipeline.train_end=20\n"
    "pipeline.test_start=20\n"
    "pipeline.test_end=50\n"
    "ga.generations=25\n"
    "optimizer.step_tol=1e-6\n"
    "optimizer.obj_tol=5e-9\n"
    "gate.prd_beat=60\ngate.prd_p=80\ngate.prd_qrs=60\ngate.prd_t=70\n"
)

steps = [
    ["simulate", "--config", str(base / "sim.cfg"), "--out", str(base / "truth")],
    ["denoise", "--record", str(base / "truth" / "record.csv"),
     "--config", str(base / "run.cfg"), "--out", str(base / "pred")],
    ["delineate", "--record", str(base / "truth" / "record.csv"),
     "--config", str(base / "run.cfg"), "--out", str(base / "pred")],
    ["evaluate", "--truth", str(base / "truth"), "--pred", str(base / "pred"),
     "--out", str(base / "eval")],
]
for argv in steps:
    print("$ vpecg " + " ".join(argv))
    code = cli.main(argv)
    assert code == 0, f"step failed with exit code {code}"

summary = json.loads((base / "eval" / "summary.json").read_text())
print("\nsummary.json medians (proposed vs spline):")
for method, metrics in summary.items():
    line = ", ".join(f"{k}={v['median']:.4g}" for k, v in metrics.items())
    print(f"  {method}: {line}")

print("\ndelineation_scores.csv:")
print((base / "eval" / "delineation_scores.csv").read_text())
shutil.rmtree(base)
