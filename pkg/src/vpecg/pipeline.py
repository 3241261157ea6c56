"""Record-level orchestration: slicing, mean beat, GA initialization, gating, per-beat fits.

The flow per lead: slice the training beats a fixed distance before each R
peak, average them, globally initialize the nonlinear parameters with a
real-coded genetic algorithm (no baseline column at this stage), gate the
setup on segment-wise PRD, refine the initializer on the mean beat with
the baseline column active, then warm-start every test-beat fit from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beat import BeatSignal
from .dictionary import DictionarySet, NonlinearParams, WaveKind, default_dictionaries, ordering_violations
from .errors import EmptyInput, InfeasibleInit, TooFewPeaks
from .varpro import ModelFit, OptimizerConfig, evaluate_fit, fit, residual


@dataclass(eq=False)
class EcgRecord:
    """Multi-lead record in mV with known R-peak sample indices."""

    leads: np.ndarray  # (L, N)
    f_s: float
    r_peaks: np.ndarray

    def __post_init__(self):
        self.leads = np.atleast_2d(np.asarray(self.leads, dtype=float))
        self.r_peaks = np.asarray(self.r_peaks, dtype=int)
        if not self.f_s > 0:
            raise ValueError("f_s must be positive")
        if self.r_peaks.size and (
            np.any(np.diff(self.r_peaks) <= 0)
            or self.r_peaks[0] < 0
            or self.r_peaks[-1] >= self.leads.shape[1]
        ):
            raise ValueError("r_peaks must be strictly increasing sample indices in range")

    @property
    def n_leads(self) -> int:
        return self.leads.shape[0]

    @property
    def n_samples(self) -> int:
        return self.leads.shape[1]


@dataclass(frozen=True)
class GateThresholds:
    """PRD acceptance thresholds (%) for the mean-beat approximation."""

    beat: float = 20.0
    p: float = 35.0
    qrs: float = 20.0
    t: float = 30.0


@dataclass(eq=False)
class GateReport:
    prd_beat: float
    prd_p: float
    prd_qrs: float
    prd_t: float
    passed: bool
    needs_manual_annotation: bool


@dataclass(frozen=True)
class GaConfig:
    """Real-coded GA settings for the mean-beat initialization."""

    population: int = 50
    generations: int = 100
    tournament: int = 3
    blend_alpha: float = 0.5
    crossover_prob: float = 0.9
    mutation_prob: float = 0.15
    mutation_scale: float = 0.05  # sigma as a fraction of each bound range
    elitism: int = 2
    seed: int = 0


def median_pre_r(record: EcgRecord, beats) -> float:
    """Slicing distance before each R peak: median training RR over 3."""
    beats = list(beats)
    lo, hi = min(beats), max(beats)
    if hi + 1 >= record.r_peaks.size:
        raise TooFewPeaks("training range needs a following R peak")
    rr = np.diff(record.r_peaks[lo : hi + 2]) / record.f_s
    return float(np.median(rr)) / 3.0


def slice_beats(record: EcgRecord, lead: int, beats, pre_r: float | None = None):
    """Slice beats [R_i - pre_r, R_{i+1} - pre_r) with the time origin at R_i."""
    if record.r_peaks.size < 2:
        raise TooFewPeaks("need at least two R peaks to slice a beat")
    beats = list(beats)
    if pre_r is None:
        pre_r = median_pre_r(record, beats)
    pre_samples = int(np.floor(pre_r * record.f_s))
    out = []
    for i in beats:
        if i < 0 or i + 1 >= record.r_peaks.size:
            raise ValueError(f"beat index {i} has no following R peak")
        start = record.r_peaks[i] - pre_samples
        end = record.r_peaks[i + 1] - pre_samples
        if start < 0 or end > record.n_samples:
            raise ValueError(f"beat {i} window [{start}, {end}) falls outside the record")
        t = (np.arange(start, end) - record.r_peaks[i]) / record.f_s
        out.append(BeatSignal(samples=record.leads[lead, start:end].copy(), f_s=record.f_s, t=t))
    return out


def mean_beat(beats) -> BeatSignal:
    """Samplewise mean after truncation to the shortest beat, aligned at R."""
    beats = list(beats)
    if not beats:
        raise EmptyInput("no beats to average")
    n = min(b.n for b in beats)
    stacked = np.stack([b.samples[:n] for b in beats])
    return BeatSignal(samples=stacked.mean(axis=0), f_s=beats[0].f_s, t=beats[0].t[:n].copy())


def _knots_placeable(params: NonlinearParams, signal: BeatSignal) -> bool:
    """True when the baseline knots x1 < x2 < x3 < x4 fit inside the window."""
    x2 = params.tau_qrs - 4.0 / params.lambda_qrs
    x3 = params.tau_t + 4.0 / params.lambda_t
    return signal.t[0] < x2 < x3 < signal.t[-1]


def _project_feasible_init(
    params: NonlinearParams, signal: BeatSignal, dicts: DictionarySet
) -> NonlinearParams:
    """Minimally adjust a warm start so the beat's baseline knots fit its window.

    RR jitter shortens some beats enough that the record-level initializer
    puts the post-T knot past the window end; pulling tau_t (then lambda_t)
    back keeps the beat fittable instead of dropping its baseline estimate.
    """
    if _knots_placeable(params, signal):
        return params
    a = params.as_array()
    dt = 2.0 / signal.f_s
    lo_t, hi_t = dicts.t.tau_bounds
    a[3] = float(np.clip(min(a[3], signal.t[-1] - 4.0 / a[2] - dt), lo_t, hi_t))
    if a[3] + 4.0 / a[2] >= signal.t[-1]:
        a[2] = float(np.clip(4.0 / (signal.t[-1] - a[3] - dt), *dicts.t.lambda_bounds))
    lo_q, hi_q = dicts.qrs.tau_bounds
    if a[1] - 4.0 / a[0] <= signal.t[0]:
        a[1] = float(np.clip(signal.t[0] + 4.0 / a[0] + dt, lo_q, hi_q))
    return NonlinearParams.from_array(a)


def _penalized_residual(params: NonlinearParams, signal: BeatSignal, dicts: DictionarySet, mu: float):
    # candidates whose baseline knots cannot be placed would not be usable
    # as initializers for the full model; rule them out here
    if not _knots_placeable(params, signal):
        return np.inf
    value = residual(params, signal, dicts, include_baseline=False)
    g = ordering_violations(params, signal.n, signal.f_s, signal.t[0])
    viol = np.maximum(g, 0.0)
    return value + mu * float(viol @ viol)


def ga_init(
    mean: BeatSignal, cfg: GaConfig, dicts: DictionarySet | None = None
) -> NonlinearParams:
    """Best-of-population nonlinear parameters for the mean beat.

    The fitness is the penalized VP residual without the baseline column;
    selection is tournament, crossover is blend (BLX-alpha), mutation is
    Gaussian with sigma proportional to each bound range. Reproducible for
    a fixed seed.
    """
    if dicts is None:
        dicts = default_dictionaries(mean.t[0])
    rng = np.random.default_rng(cfg.seed)
    lb, ub = dicts.lower_bounds(), dicts.upper_bounds()
    span = ub - lb
    mu = 1e3 * float(mean.samples @ mean.samples) / mean.n

    def fitness(row: np.ndarray) -> float:
        return _penalized_residual(NonlinearParams.from_array(row), mean, dicts, mu)

    pop = lb + rng.uniform(0.0, 1.0, (cfg.population, 6)) * span
    scores = np.array([fitness(row) for row in pop])
    for _ in range(cfg.generations):
        order = np.argsort(scores)
        new_pop = [pop[order[k]] for k in range(cfg.elitism)]
        new_scores = [scores[order[k]] for k in range(cfg.elitism)]
        while len(new_pop) < cfg.population:
            parents = []
            for _ in range(2):
                contenders = rng.integers(0, cfg.population, cfg.tournament)
                parents.append(pop[contenders[np.argmin(scores[contenders])]])
            p1, p2 = parents
            if rng.random() < cfg.crossover_prob:
                lo = np.minimum(p1, p2)
                hi = np.maximum(p1, p2)
                d = hi - lo
                child = rng.uniform(lo - cfg.blend_alpha * d, hi + cfg.blend_alpha * d)
            else:
                child = p1.copy()
            mask = rng.random(6) < cfg.mutation_prob
            if np.any(mask):
                child = child + mask * rng.normal(0.0, cfg.mutation_scale * span)
            child = np.clip(child, lb, ub)
            new_pop.append(child)
            new_scores.append(fitness(child))
        pop = np.array(new_pop)
        scores = np.array(new_scores)
    return NonlinearParams.from_array(pop[int(np.argmin(scores))])


def _prd(err: np.ndarray, dev: np.ndarray) -> float:
    num = float(np.linalg.norm(err))
    den = float(np.linalg.norm(dev))
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return 100.0 * num / den


def gate(mean: BeatSignal, fit_result: ModelFit, thresholds: GateThresholds) -> GateReport:
    """PRD of the mean-beat approximation, whole-beat and per wave segment.

    The fit is expected to exclude the baseline column: mis-slicing must not
    be masked by the spline. Segments are the three-sigma supports of each
    wave; the reference level is the mean-beat average.
    """
    f = mean.samples
    fhat = fit_result.wave_reconstruction()
    err = f - fhat
    dev = f - f.mean()
    prds = {"beat": _prd(err, dev)}
    for wave, name in ((WaveKind.P, "p"), (WaveKind.QRS, "qrs"), (WaveKind.T, "t")):
        lam, tau = fit_result.params.for_wave(wave)
        mask = (mean.t >= tau - 3.0 / lam) & (mean.t <= tau + 3.0 / lam)
        prds[name] = _prd(err[mask], dev[mask])
    passed = (
        prds["beat"] < thresholds.beat
        and prds["p"] < thresholds.p
        and prds["qrs"] < thresholds.qrs
        and prds["t"] < thresholds.t
    )
    return GateReport(
        prd_beat=prds["beat"],
        prd_p=prds["p"],
        prd_qrs=prds["qrs"],
        prd_t=prds["t"],
        passed=passed,
        needs_manual_annotation=not passed,
    )


@dataclass
class PipelineConfig:
    ga: GaConfig = field(default_factory=GaConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    thresholds: GateThresholds = field(default_factory=GateThresholds)
    bounds_overrides: dict | None = None
    pre_r: float | None = None  # manual slicing override (seconds)
    manual: bool = False  # proceed past a failed gate (manual annotation supplied)
    init: NonlinearParams | None = None  # skip the GA and start here


@dataclass(eq=False)
class PipelineResult:
    fits: list
    gate_report: GateReport
    alpha_ga: NonlinearParams | None
    alpha_init: NonlinearParams | None
    pre_r: float
    mean: BeatSignal
    dicts: DictionarySet
    test_beats: list
    beat_starts: np.ndarray  # absolute start sample of each test beat


def process_record(
    record: EcgRecord,
    lead: int,
    train_range,
    test_range,
    cfg: PipelineConfig | None = None,
) -> PipelineResult:
    """Run the full per-lead pipeline over a record.

    Training beats produce the mean beat, GA initialization, and gate; on a
    passed (or manually overridden) gate the initializer is refined with the
    baseline column and every test beat is fitted from it. A per-beat fit
    that cannot be evaluated yields converged=False and the pipeline
    continues.
    """
    if cfg is None:
        cfg = PipelineConfig()
    train = list(train_range)
    test = list(test_range)
    if not train or not test:
        raise EmptyInput("train and test ranges must be nonempty")
    if max(train) >= min(test):
        raise ValueError("training range must precede the test range")

    pre_r = cfg.pre_r if cfg.pre_r is not None else median_pre_r(record, train)
    train_beats = slice_beats(record, lead, train, pre_r)
    mean = mean_beat(train_beats)
    dicts = default_dictionaries(mean.t[0], cfg.bounds_overrides)

    alpha_ga = cfg.init if cfg.init is not None else ga_init(mean, cfg.ga, dicts)
    gate_fit = evaluate_fit(alpha_ga, mean, dicts, include_baseline=False)
    report = gate(mean, gate_fit, cfg.thresholds)
    pre_samples = int(np.floor(pre_r * record.f_s))

    if not report.passed and not cfg.manual:
        return PipelineResult(
            fits=[],
            gate_report=report,
            alpha_ga=alpha_ga,
            alpha_init=None,
            pre_r=pre_r,
            mean=mean,
            dicts=dicts,
            test_beats=[],
            beat_starts=np.array([], dtype=int),
        )

    try:
        refined = fit(mean, alpha_ga, cfg.optimizer, dicts, include_baseline=True)
        alpha_init = refined.params
    except InfeasibleInit:
        # baseline knots not placeable at the GA point; keep it as-is
        alpha_init = alpha_ga

    test_beats = slice_beats(record, lead, test, pre_r)
    fits = []
    for beat in test_beats:
        start_params = _project_feasible_init(alpha_init, beat, dicts)
        try:
            fits.append(fit(beat, start_params, cfg.optimizer, dicts, include_baseline=True))
        except InfeasibleInit:
            fits.append(
                evaluate_fit(alpha_init, beat, dicts, include_baseline=False, converged=False)
            )
    starts = np.array([record.r_peaks[i] - pre_samples for i in test], dtype=int)
    return PipelineResult(
        fits=fits,
        gate_report=report,
        alpha_ga=alpha_ga,
        alpha_init=alpha_init,
        pre_r=pre_r,
        mean=mean,
        dicts=dicts,
        test_beats=test_beats,
        beat_starts=starts,
    )


def stitch_baseline(result: PipelineResult) -> np.ndarray:
    """Concatenated per-beat baseline estimates over the test segment."""
    if not result.fits:
        raise EmptyInput("no fits to stitch")
    return np.concatenate([f.baseline for f in result.fits])


def denoise_lead(record: EcgRecord, lead: int, result: PipelineResult):
    """Raw minus the stitched baseline; returns (start sample, denoised vector)."""
    bl = stitch_baseline(result)
    start = int(result.beat_starts[0])
    return start, record.leads[lead, start : start + bl.size] - bl
