"""Command-line surface: simulate, fit, denoise, delineate, evaluate.

File formats are plain CSV with a repr-roundtrip float convention, so a
read-write cycle preserves values bitwise. Configuration is a flat
key=value text file with dotted keys; environment variables are never
consulted. Every run with a fixed seed and fixed inputs is
bit-reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, synth
from .delineation import AnnotatedBeat, Delineation, WaveMarks, delineate
from .errors import NonUniformSampling, ParseError, VpecgError
from .pipeline import (
    EcgRecord,
    GaConfig,
    GateThresholds,
    PipelineConfig,
    denoise_lead,
    process_record,
)
from .varpro import OptimizerConfig

_TIME_JITTER_TOL = 1e-6  # seconds


# -- configuration ---------------------------------------------------------


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """Flat dotted-key configuration: `section.key=value` per line."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{origin}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), origin=str(path))


def _get(cfg: dict, key: str, default, cast):
    raw = cfg.get(key)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError as exc:
        raise ParseError(f"bad value for {key}: {raw!r}") from exc


def _float_list(raw: str):
    return tuple(float(x) for x in raw.split(",") if x.strip())


def _int_list(raw: str):
    return tuple(int(x) for x in raw.split(",") if x.strip())


def _bounds_overrides(cfg: dict) -> dict | None:
    out = {}
    for key, raw in cfg.items():
        if key.startswith("bounds."):
            pair = _float_list(raw)
            if len(pair) != 2:
                raise ParseError(f"bounds override {key} needs two values")
            out[key.removeprefix("bounds.")] = pair
    return out or None


def pipeline_config(cfg: dict) -> PipelineConfig:
    seed = _get(cfg, "seed", 0, int)
    ga = GaConfig(
        population=_get(cfg, "ga.population", 50, int),
        generations=_get(cfg, "ga.generations", 100, int),
        tournament=_get(cfg, "ga.tournament", 3, int),
        blend_alpha=_get(cfg, "ga.blend_alpha", 0.5, float),
        crossover_prob=_get(cfg, "ga.crossover_prob", 0.9, float),
        mutation_prob=_get(cfg, "ga.mutation_prob", 0.15, float),
        mutation_scale=_get(cfg, "ga.mutation_scale", 0.05, float),
        elitism=_get(cfg, "ga.elitism", 2, int),
        seed=_get(cfg, "ga.seed", seed, int),
    )
    optimizer = OptimizerConfig(
        max_iters=_get(cfg, "optimizer.max_iters", 200, int),
        step_tol=_get(cfg, "optimizer.step_tol", 1e-8, float),
        obj_tol=_get(cfg, "optimizer.obj_tol", 1e-10, float),
        penalty_weight=_get(cfg, "optimizer.penalty_weight", None, float),
    )
    thresholds = GateThresholds(
        beat=_get(cfg, "gate.prd_beat", 20.0, float),
        p=_get(cfg, "gate.prd_p", 35.0, float),
        qrs=_get(cfg, "gate.prd_qrs", 20.0, float),
        t=_get(cfg, "gate.prd_t", 30.0, float),
    )
    return PipelineConfig(
        ga=ga,
        optimizer=optimizer,
        thresholds=thresholds,
        bounds_overrides=_bounds_overrides(cfg),
        pre_r=_get(cfg, "slicing.pre_r", None, float),
    )


def _ranges(cfg: dict):
    train = range(
        _get(cfg, "pipeline.train_start", 0, int), _get(cfg, "pipeline.train_end", 100, int)
    )
    test = range(
        _get(cfg, "pipeline.test_start", 100, int), _get(cfg, "pipeline.test_end", 200, int)
    )
    if not len(train) or not len(test) or train.stop > test.start:
        raise ParseError("train/test beat ranges must be nonempty, ordered, non-overlapping")
    return train, test


# -- record and table io ---------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _read_signal_table(path: Path):
    """Leads matrix and sampling rate from a `time_s,lead1..leadL` table."""
    if not path.exists():
        raise ParseError(f"record file not found: {path}")
    with path.open() as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if cols[0] != "time_s" or len(cols) < 2 or any(not c.startswith("lead") for c in cols[1:]):
            raise ParseError(f"{path}:1: expected header time_s,lead1..leadL, got {header!r}")
        times = []
        leads = []
        for lineno, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            parts = raw.split(",")
            if len(parts) != len(cols):
                raise ParseError(f"{path}:{lineno}: expected {len(cols)} fields")
            try:
                times.append(float(parts[0]))
                leads.append([float(p) for p in parts[1:]])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric value") from exc
    if len(times) < 2:
        raise ParseError(f"{path}: need at least two samples")
    t = np.array(times)
    dt = np.diff(t)
    step = float(np.median(dt))
    if step <= 0 or np.any(np.abs(dt - step) > _TIME_JITTER_TOL):
        raise NonUniformSampling(f"{path}: time axis jitter exceeds {_TIME_JITTER_TOL} s")
    return np.array(leads).T, 1.0 / step


def read_record_csv(path) -> EcgRecord:
    """Record CSV `time_s,lead1..leadL` plus the `<name>.rpeaks.csv` sidecar."""
    path = Path(path)
    leads, f_s = _read_signal_table(path)
    sidecar = path.with_name(path.stem + ".rpeaks.csv")
    if not sidecar.exists():
        raise ParseError(f"missing R-peak sidecar: {sidecar}")
    r_peaks = []
    with sidecar.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                r_peaks.append(int(raw))
            except ValueError as exc:
                raise ParseError(f"{sidecar}:{lineno}: expected an integer sample index") from exc
    return EcgRecord(leads=leads, f_s=f_s, r_peaks=np.array(r_peaks))


def write_record_csv(path, record: EcgRecord, with_rpeaks: bool = True) -> None:
    path = Path(path)
    names = ",".join(f"lead{i + 1}" for i in range(record.n_leads))
    with path.open("w") as fh:
        fh.write(f"time_s,{names}\n")
        for n in range(record.n_samples):
            row = ",".join(_fmt(record.leads[i, n]) for i in range(record.n_leads))
            fh.write(f"{_fmt(n / record.f_s)},{row}\n")
    if with_rpeaks:
        sidecar = path.with_name(path.stem + ".rpeaks.csv")
        sidecar.write_text("".join(f"{int(i)}\n" for i in record.r_peaks))


_FID_HEADER = "lead,beat,r_time_s,wave,onset_s,peak_s,end_s,onset_fallback,end_fallback"


def write_fiducials_csv(path, rows) -> None:
    """rows: (lead, beat, r_time, Delineation); lead -1 marks ground truth."""
    with Path(path).open("w") as fh:
        fh.write(_FID_HEADER + "\n")
        for lead, beat, r_time, marks in rows:
            for wave, wm in (("p", marks.p), ("qrs", marks.qrs), ("t", marks.t)):
                if wm is None:
                    continue
                fh.write(
                    f"{lead},{beat},{_fmt(r_time)},{wave},{_fmt(wm.onset)},{_fmt(wm.peak)},"
                    f"{_fmt(wm.end)},{int(wm.onset_fallback)},{int(wm.end_fallback)}\n"
                )


def read_fiducials_csv(path):
    """Returns {lead: [AnnotatedBeat, ...]} keyed by lead index."""
    path = Path(path)
    per_beat: dict = {}
    with path.open() as fh:
        header = fh.readline().strip()
        if header != _FID_HEADER:
            raise ParseError(f"{path}:1: unexpected fiducials header")
        for lineno, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            parts = raw.strip().split(",")
            if len(parts) != 9:
                raise ParseError(f"{path}:{lineno}: expected 9 fields")
            lead, beat = int(parts[0]), int(parts[1])
            wm = WaveMarks(
                onset=float(parts[4]),
                peak=float(parts[5]),
                end=float(parts[6]),
                onset_fallback=bool(int(parts[7])),
                end_fallback=bool(int(parts[8])),
            )
            key = (lead, beat)
            entry = per_beat.setdefault(key, {"r_time": float(parts[2]), "waves": {}})
            entry["waves"][parts[3]] = wm
    out: dict = {}
    for (lead, beat), entry in sorted(per_beat.items()):
        marks = Delineation(
            p=entry["waves"].get("p"), qrs=entry["waves"].get("qrs"), t=entry["waves"].get("t")
        )
        out.setdefault(lead, []).append(AnnotatedBeat(r_time=entry["r_time"], marks=marks))
    return out


def write_fits_csv(path, per_lead_fits) -> None:
    """per_lead_fits: {lead: PipelineResult}."""
    coeff_names = ",".join(f"c{i}" for i in range(17))
    header = (
        "lead,beat,lambda_qrs,tau_qrs,lambda_t,tau_t,lambda_p,tau_p,"
        f"{coeff_names},residual_sq,converged"
    )
    with Path(path).open("w") as fh:
        fh.write(header + "\n")
        for lead in sorted(per_lead_fits):
            result = per_lead_fits[lead]
            for beat, mf in enumerate(result.fits):
                alpha = ",".join(_fmt(v) for v in mf.params.as_array())
                coeffs = ",".join(_fmt(v) for v in mf.coeffs)
                fh.write(
                    f"{lead},{beat},{alpha},{coeffs},{_fmt(mf.residual_sq)},{int(mf.converged)}\n"
                )


def write_denoised_csv(path, start: int, f_s: float, leads: dict) -> None:
    """leads: {lead index: denoised vector}, all over the same sample span."""
    names = ",".join(f"lead{idx + 1}" for idx in sorted(leads))
    vectors = [leads[idx] for idx in sorted(leads)]
    n = min(v.size for v in vectors)
    with Path(path).open("w") as fh:
        fh.write(f"sample,time_s,{names}\n")
        for k in range(n):
            s = start + k
            row = ",".join(_fmt(v[k]) for v in vectors)
            fh.write(f"{s},{_fmt(s / f_s)},{row}\n")


def read_denoised_csv(path):
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["sample", "time_s"]:
            raise ParseError(f"{path}:1: unexpected denoised header")
        lead_idx = [int(c.removeprefix("lead")) - 1 for c in header[2:]]
        samples = []
        rows = []
        for raw in fh:
            if not raw.strip():
                continue
            parts = raw.strip().split(",")
            samples.append(int(parts[0]))
            rows.append([float(p) for p in parts[2:]])
    return int(samples[0]), lead_idx, np.array(rows).T


def _quantiles(values):
    values = [v for v in values if np.isfinite(v)]
    if not values:
        return {"median": None, "p25": None, "p75": None, "n": 0}
    arr = np.array(values)
    return {
        "median": float(np.median(arr)),
        "p25": float(np.percentile(arr, 25)),
        "p75": float(np.percentile(arr, 75)),
        "n": int(arr.size),
    }


_METRIC_KEYS = ("snr_improvement_db", "rho", "l_operator", "kp_dev_mv")


def write_summary_json(path, metrics_rows) -> None:
    """Median / interquartile summary per method over the metric rows."""
    by_method: dict = {}
    for row in metrics_rows:
        by_method.setdefault(row["method"], []).append(row)
    if not by_method:
        by_method = {"proposed": []}
    summary = {}
    for method, rows in sorted(by_method.items()):
        summary[method] = {key: _quantiles([r[key] for r in rows]) for key in _METRIC_KEYS}
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


# -- subcommands ------------------------------------------------------------


def _template_from_config(cfg: dict):
    kind = _get(cfg, "synth.template", "model", str)
    st = _get(cfg, "synth.st_offset_mv", 0.1 if kind == "model" else -0.1, float)
    if kind == "model":
        return synth.model_template(st)
    if kind == "piecewise":
        return synth.piecewise_template(st)
    raise ParseError(f"unknown synth.template {kind!r}")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scfg = synth.SynthConfig(
        template=_template_from_config(cfg),
        n_beats=_get(cfg, "synth.n_beats", 100, int),
        f_s=_get(cfg, "synth.f_s", 500.0, float),
        rr_mean=_get(cfg, "synth.rr_mean", 1.0, float),
        rr_std=_get(cfg, "synth.rr_std", 0.05, float),
        lead_scales=_get(cfg, "synth.lead_scales", (1.0, 0.8, 1.2), _float_list),
        snr_db=_get(cfg, "synth.snr_db", 0.0, float),
        seed=_get(cfg, "seed", 0, int),
    )
    ds = synth.generate_dataset(scfg)
    write_record_csv(out / "record.csv", ds.noisy)
    baseline_rec = EcgRecord(leads=ds.truth.baseline, f_s=scfg.f_s, r_peaks=ds.noisy.r_peaks)
    write_record_csv(out / "baseline.csv", baseline_rec, with_rpeaks=False)
    rows = [
        (-1, i, beat.r_time, beat.marks) for i, beat in enumerate(ds.truth.beats)
    ]
    write_fiducials_csv(out / "fiducials.csv", rows)
    print(f"wrote {out / 'record.csv'} ({ds.noisy.n_leads} leads, {ds.noisy.n_samples} samples)")
    return 0


def _run_pipeline(args):
    cfg = load_config(args.config)
    if args.manual_sidecar:
        sidecar = load_config(args.manual_sidecar)
        cfg.update(sidecar)
    record = read_record_csv(args.record)
    train, test = _ranges(cfg)
    leads = _get(cfg, "record.leads", tuple(range(record.n_leads)), _int_list)
    if any(lead < 0 or lead >= record.n_leads for lead in leads):
        raise ParseError(f"record.leads={leads} outside the record's {record.n_leads} leads")
    if test.stop >= record.r_peaks.size:
        raise ParseError(
            f"test range ends at beat {test.stop} but the record has only "
            f"{record.r_peaks.size - 1} sliceable beats"
        )
    pcfg = pipeline_config(cfg)
    pcfg.manual = args.manual_sidecar is not None
    results = {}
    shared_init = None
    for lead in leads:
        pcfg.init = shared_init
        result = process_record(record, lead, train, test, pcfg)
        if shared_init is None and result.alpha_ga is not None:
            shared_init = result.alpha_ga
        results[lead] = result
    return cfg, record, leads, results, test


def _gate_payload(results) -> dict:
    return {
        str(lead): {
            "prd_beat": r.gate_report.prd_beat,
            "prd_p": r.gate_report.prd_p,
            "prd_qrs": r.gate_report.prd_qrs,
            "prd_t": r.gate_report.prd_t,
            "passed": r.gate_report.passed,
            "needs_manual_annotation": r.gate_report.needs_manual_annotation,
        }
        for lead, r in results.items()
    }


def _write_run_json(out: Path, record, leads, results, test) -> None:
    first = results[leads[0]]
    payload = {
        "leads": list(leads),
        "pre_r": first.pre_r,
        "test_start": test.start,
        "test_stop": test.stop,
        "beat_starts": [int(s) for s in first.beat_starts],
        "beat_lengths": [int(b.n) for b in first.test_beats],
        "r_offset": int(first.test_beats[0].r_index) if first.test_beats else None,
        "f_s": record.f_s,
        "gate": _gate_payload(results),
    }
    (out / "run.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fail_gate(out: Path, results) -> int:
    reason = {"error": "gate_failed", "gate": _gate_payload(results)}
    (out / "gate_failure.json").write_text(json.dumps(reason, indent=2, sort_keys=True) + "\n")
    print(json.dumps(reason, sort_keys=True), file=sys.stderr)
    return 2


def cmd_fit(args, also_denoise=False, also_delineate=False) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg, record, leads, results, test = _run_pipeline(args)
    gate_failed = any(not r.gate_report.passed for r in results.values())
    if gate_failed and not args.manual_sidecar:
        return _fail_gate(out, results)
    write_fits_csv(out / "fits.csv", results)
    _write_run_json(out, record, leads, results, test)
    if also_denoise:
        den = {}
        start = None
        for lead in leads:
            start, vec = denoise_lead(record, lead, results[lead])
            den[lead] = vec
        write_denoised_csv(out / "denoised.csv", start, record.f_s, den)
    if also_delineate:
        rows = []
        for lead in leads:
            result = results[lead]
            for beat, mf in enumerate(result.fits):
                r_idx = record.r_peaks[test.start + beat]
                rows.append((lead, beat, r_idx / record.f_s, delineate(mf)))
        write_fiducials_csv(out / "fiducials.csv", rows)
    print(f"wrote outputs to {out}")
    return 0


def _metric_rows(truth_dir: Path, pred_dir: Path):
    record = read_record_csv(truth_dir / "record.csv")
    baseline_leads, _ = _read_signal_table(truth_dir / "baseline.csv")
    clean = record.leads - baseline_leads
    start, lead_idx, den = read_denoised_csv(pred_dir / "denoised.csv")
    span = slice(start, start + den.shape[1])
    run_path = pred_dir / "run.json"
    if not run_path.exists():
        raise ParseError(f"missing run metadata: {run_path}")
    run = json.loads(run_path.read_text())
    name = truth_dir.name

    pred_fid_path = pred_dir / "fiducials.csv"
    qrs_end = None
    if pred_fid_path.exists():
        fids = read_fiducials_csv(pred_fid_path)
        first = fids.get(min(fids)) if fids else None
        if first:
            ends = [b.marks.qrs.end for b in first if b.marks.qrs is not None]
            if ends:
                qrs_end = float(np.median(ends))

    def kp_for(leads_matrix) -> float:
        starts_rel = np.array(run["beat_starts"]) - start
        blen = int(min(run["beat_lengths"]))
        keep = starts_rel[starts_rel + blen <= leads_matrix.shape[1]]
        return evaluation.beat_averaged_kp(
            leads_matrix, record.f_s, keep, blen, int(run["r_offset"]), qrs_end
        )

    rows = []
    kp_clean = kp_for(clean[lead_idx][:, span])
    kp_den = kp_for(den)
    for k, lead in enumerate(lead_idx):
        rows.append(
            {
                "method": "proposed",
                "record": name,
                "lead": lead,
                "snr_improvement_db": evaluation.snr_improvement(
                    clean[lead, span], record.leads[lead, span], den[k]
                ),
                "rho": evaluation.correlation(clean[lead, span], den[k]),
                "l_operator": evaluation.l_operator(clean[lead, span], den[k]),
                "kp_dev_mv": evaluation.kp_deviation(kp_den, kp_clean),
            }
        )
    spline = evaluation.reference_spline_denoise(record)
    kp_spline = kp_for(spline[lead_idx][:, span])
    for lead in lead_idx:
        rows.append(
            {
                "method": "spline",
                "record": name,
                "lead": lead,
                "snr_improvement_db": evaluation.snr_improvement(
                    clean[lead, span], record.leads[lead, span], spline[lead, span]
                ),
                "rho": evaluation.correlation(clean[lead, span], spline[lead, span]),
                "l_operator": evaluation.l_operator(clean[lead, span], spline[lead, span]),
                "kp_dev_mv": evaluation.kp_deviation(kp_spline, kp_clean),
            }
        )
    return rows


def write_metrics_csv(path, rows) -> None:
    header = "method,record,lead,snr_improvement_db,rho,l_operator,kp_dev_mv"
    with Path(path).open("w") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(
                f"{r['method']},{r['record']},{r['lead']},{_fmt(r['snr_improvement_db'])},"
                f"{_fmt(r['rho'])},{_fmt(r['l_operator'])},{_fmt(r['kp_dev_mv'])}\n"
            )


def cmd_evaluate(args) -> int:
    truth_dir = Path(args.truth)
    pred_dir = Path(args.pred)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    produced = False

    rows = []
    if (pred_dir / "denoised.csv").exists():
        rows = _metric_rows(truth_dir, pred_dir)
        write_metrics_csv(out / "metrics.csv", rows)
        produced = True
    write_summary_json(out / "summary.json", rows)

    truth_fid = truth_dir / "fiducials.csv"
    pred_fid = pred_dir / "fiducials.csv"
    if truth_fid.exists() and pred_fid.exists() and (pred_dir / "run.json").exists():
        truth_beats = read_fiducials_csv(truth_fid).get(-1, [])
        run = json.loads((pred_dir / "run.json").read_text())
        lo, hi = int(run["test_start"]), int(run["test_stop"])
        truth_beats = truth_beats[lo:hi]
        channels = list(read_fiducials_csv(pred_fid).values())
        stats = evaluation.score_delineation(channels, truth_beats)
        with (out / "delineation_scores.csv").open("w") as fh:
            fh.write("kind,n_annotated,n_detected,sensitivity,bias_ms,std_ms,group\n")
            for kind in evaluation.FIDUCIAL_KINDS:
                if kind not in stats:
                    continue
                st = stats[kind]
                fh.write(
                    f"{kind},{st.n_annotated},{st.n_detected},{_fmt(st.sensitivity)},"
                    f"{_fmt(st.bias_ms)},{_fmt(st.std_ms)},{st.group}\n"
                )
        produced = True

    if not produced:
        print(
            json.dumps({"error": "nothing_to_evaluate", "pred": str(pred_dir)}, sort_keys=True),
            file=sys.stderr,
        )
        return 2
    print(f"wrote evaluation to {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vpecg",
        description="Variable-projection ECG beat modeling: simulation, fitting, "
        "baseline removal, delineation, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic record with ground truth")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)

    for name, help_text in (
        ("fit", "fit every test beat of a record"),
        ("denoise", "fit and write the baseline-removed record"),
        ("delineate", "fit and write wave fiducials"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--record", required=True)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--manual-sidecar", default=None)

    p_eval = sub.add_parser("evaluate", help="score predictions against ground truth")
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "denoise":
            return cmd_fit(args, also_denoise=True)
        if args.command == "delineate":
            return cmd_fit(args, also_delineate=True)
        if args.command == "evaluate":
            return cmd_evaluate(args)
    except VpecgError as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
