"""Synthetic multi-lead ECG records with harmonic baseline noise and exact ground truth.

Beats are built from the model's own atom family (Gaussian-dominated P and
T, multi-Hermite or piecewise-linear QRS, a sigmoid pair realizing an ST
offset), quasiperiodically extended with Gaussian-jittered RR intervals.
Baseline noise is a harmonic sum confined below 0.5 Hz, scaled per lead to
an exact target SNR. All randomness flows from the single config seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .atoms import RESCALE_BASE, _hermite_upto, sigmoid, sigmoid_deriv
from .delineation import (
    AnnotatedBeat,
    Delineation,
    WaveMarks,
    delineate_component,
)
from .dictionary import WaveKind
from .errors import ZeroNoise
from .pipeline import EcgRecord

# Default QRS breakpoints for the non-model template, in (u, fraction of
# peak) with u = lambda * (t - tau): a sharp triangular R with Q/S dips.
# Narrow (high lambda) keeps the Hermite fit's corner smear inside the
# delineation tolerances.
_PIECEWISE_QRS = (
    (-3.0, 0.0),
    (-2.4, 0.0),
    (-1.6, -0.2),
    (-0.9, 0.0),
    (0.0, 1.0),
    (1.0, -0.28),
    (1.8, 0.0),
    (3.0, 0.0),
)


@dataclass(frozen=True)
class WaveTemplate:
    """One wave of the clean template: peak amplitude (mV), dilation, translation.

    shape holds relative weights of the rescaled Hermite orders; the
    component is rescaled so its absolute peak equals `amplitude`.
    """

    amplitude: float
    lam: float
    tau: float
    shape: tuple = (1.0,)


@dataclass(frozen=True)
class BeatTemplate:
    p: WaveTemplate
    qrs: WaveTemplate
    t: WaveTemplate
    st_offset: float = 0.0  # mV, realized by the sigmoid pair
    piecewise_qrs: bool = False


# Wave shapes load every dictionary order so (lambda, tau) are identifiable:
# a rank-deficient shape can be re-expressed by the unused orders at a
# different dilation/translation.
_QRS_SHAPE = (1.0, -0.35, 0.25, -0.12, 0.08, -0.05, 0.03)
_T_SHAPE = (1.0, 0.34, -0.14, 0.07)
_P_SHAPE = (1.0, 0.5, -0.17, 0.08)


def model_template(st_offset: float = 0.1) -> BeatTemplate:
    """Template drawn from the model's own span (smooth Hermite waves)."""
    return BeatTemplate(
        p=WaveTemplate(amplitude=0.15, lam=50.0, tau=-0.2, shape=_P_SHAPE),
        qrs=WaveTemplate(amplitude=1.0, lam=60.0, tau=0.01, shape=_QRS_SHAPE),
        t=WaveTemplate(amplitude=0.3, lam=20.0, tau=0.25, shape=_T_SHAPE),
        st_offset=st_offset,
    )


def piecewise_template(st_offset: float = -0.1) -> BeatTemplate:
    """Non-model template: piecewise-linear QRS outside the fitter's span."""
    return BeatTemplate(
        p=WaveTemplate(amplitude=0.15, lam=50.0, tau=-0.2, shape=_P_SHAPE),
        qrs=WaveTemplate(amplitude=1.0, lam=78.0, tau=0.01),
        t=WaveTemplate(amplitude=0.3, lam=20.0, tau=0.25, shape=_T_SHAPE),
        st_offset=st_offset,
        piecewise_qrs=True,
    )


@dataclass(frozen=True)
class SynthConfig:
    template: BeatTemplate = field(default_factory=model_template)
    n_beats: int = 100
    f_s: float = 500.0
    rr_mean: float = 1.0
    rr_std: float = 0.05
    lead_scales: tuple = (1.0, 0.8, 1.2)
    snr_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.rr_mean > 3.0 * self.rr_std > 0.0):
            raise ValueError("need rr_mean > 3 * rr_std > 0")
        if self.f_s < 250.0:
            raise ValueError("f_s must be at least 250 Hz")


@dataclass(frozen=True)
class NoiseParams:
    """Harmonic baseline-noise model: k-th term a_k cos(2 pi k df t + theta_k)."""

    delta_f: float
    amplitudes: np.ndarray  # K+1 values in [0, 1], including the k=0 DC term
    phases: np.ndarray  # K+1 values in [0, 2 pi)

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes, dtype=float))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))
        if self.delta_f <= 0 or self.amplitudes.size < 2:
            raise ValueError("need delta_f > 0 and at least one harmonic")


def draw_noise_params(rng: np.random.Generator, n_harmonics: int = 50, delta_f: float = 0.01):
    return NoiseParams(
        delta_f=delta_f,
        amplitudes=rng.uniform(0.0, 1.0, n_harmonics + 1),
        phases=rng.uniform(0.0, 2.0 * np.pi, n_harmonics + 1),
    )


def baseline_noise(params: NoiseParams, n: int, f_s: float, c: float = 1.0) -> np.ndarray:
    """Sampled harmonic baseline noise; spectrum confined below K * delta_f."""
    t = np.arange(n) / f_s
    k = np.arange(params.amplitudes.size)
    phase = 2.0 * np.pi * params.delta_f * np.outer(k, t) + params.phases[:, None]
    return c * (params.amplitudes @ np.cos(phase))


def scale_for_snr(clean: np.ndarray, noise: np.ndarray, target_db: float) -> float:
    """Weighting factor C so that 10 log10(P_signal / P_{C noise}) = target_db.

    Signal power is mean-removed; noise power is taken as-is.
    """
    clean = np.asarray(clean, dtype=float)
    noise = np.asarray(noise, dtype=float)
    p_noise = float(np.mean(noise * noise))
    if p_noise == 0.0:
        raise ZeroNoise("noise vector has zero power")
    dev = clean - clean.mean()
    p_signal = float(np.mean(dev * dev))
    return float(np.sqrt(p_signal / (p_noise * 10.0 ** (target_db / 10.0))))


def _hermite_shape(shape: tuple, u: np.ndarray) -> np.ndarray:
    """Weighted sum of rescaled Hermite orders evaluated in u-coordinates."""
    out = np.zeros_like(u)
    for j, w in enumerate(shape):
        if w:
            out += w * _hermite_upto(j, RESCALE_BASE**j * u)[j]
    return out


def _shape_peak(shape: tuple) -> float:
    u = np.linspace(-6.0, 6.0, 4001)
    return float(np.max(np.abs(_hermite_shape(shape, u))))


def wave_signal(tmpl: WaveTemplate, trel: np.ndarray, piecewise: bool = False) -> np.ndarray:
    """One clean wave sampled at R-relative times, peak-normalized to `amplitude`."""
    trel = np.asarray(trel, dtype=float)
    u = tmpl.lam * (trel - tmpl.tau)
    if piecewise:
        bp_u = np.array([b[0] for b in _PIECEWISE_QRS])
        bp_v = np.array([b[1] for b in _PIECEWISE_QRS])
        return tmpl.amplitude * np.interp(u, bp_u, bp_v)
    return tmpl.amplitude / _shape_peak(tmpl.shape) * _hermite_shape(tmpl.shape, u)


def _st_pair(template: BeatTemplate, trel: np.ndarray):
    """ST offset realized as opposite-sign sigmoid steps on QRS and T."""
    s_qrs = template.st_offset * sigmoid(template.qrs.lam * (trel - template.qrs.tau))
    s_t = -template.st_offset * sigmoid(template.t.lam * (trel - template.t.tau))
    return s_qrs, s_t


def beat_waveform(template: BeatTemplate, trel: np.ndarray) -> np.ndarray:
    """Full clean beat (all waves plus the ST step pair) at R-relative times."""
    trel = np.asarray(trel, dtype=float)
    s_qrs, s_t = _st_pair(template, trel)
    return (
        wave_signal(template.p, trel)
        + wave_signal(template.qrs, trel, piecewise=template.piecewise_qrs)
        + wave_signal(template.t, trel)
        + s_qrs
        + s_t
    )


def _component_and_derivative(template: BeatTemplate, wave: WaveKind, trel: np.ndarray):
    """Clean per-wave component (with its ST share) and analytic derivative."""
    tmpl = {WaveKind.P: template.p, WaveKind.QRS: template.qrs, WaveKind.T: template.t}[wave]
    u = tmpl.lam * (trel - tmpl.tau)
    if wave is WaveKind.QRS and template.piecewise_qrs:
        comp = wave_signal(tmpl, trel, piecewise=True)
        deriv = np.gradient(comp, trel)
    else:
        scale = tmpl.amplitude / _shape_peak(tmpl.shape)
        comp = scale * _hermite_shape(tmpl.shape, u)
        deriv = np.zeros_like(trel)
        for j, w in enumerate(tmpl.shape):
            if not w:
                continue
            arg = RESCALE_BASE**j * u
            table = _hermite_upto(j + 1, arg)
            dphi = -np.sqrt((j + 1) / 2.0) * table[j + 1]
            if j >= 1:
                dphi += np.sqrt(j / 2.0) * table[j - 1]
            deriv += w * dphi * RESCALE_BASE**j * tmpl.lam
        deriv *= scale
    if wave is not WaveKind.P and template.st_offset:
        sign = 1.0 if wave is WaveKind.QRS else -1.0
        lam_s, tau_s = tmpl.lam, tmpl.tau
        comp = comp + sign * template.st_offset * sigmoid(lam_s * (trel - tau_s))
        deriv = deriv + sign * template.st_offset * lam_s * sigmoid_deriv(lam_s * (trel - tau_s))
    return comp, deriv


def template_truth(template: BeatTemplate, f_s: float) -> Delineation:
    """Ground-truth fiducials of one template beat, R-relative seconds.

    Hermite waves are delineated by the derivative rule on the exact clean
    component, sampled 8x finer than the record; the piecewise-linear QRS
    uses its geometric breakpoints (the wave is exactly zero outside them).
    """
    trel = np.arange(-0.45, 0.75, 1.0 / (8.0 * f_s))
    marks = {}
    for wave in (WaveKind.P, WaveKind.QRS, WaveKind.T):
        tmpl = {WaveKind.P: template.p, WaveKind.QRS: template.qrs, WaveKind.T: template.t}[wave]
        if wave is WaveKind.QRS and template.piecewise_qrs:
            bp_u = [b[0] for b in _PIECEWISE_QRS]
            nonzero = [i for i, (_, v) in enumerate(_PIECEWISE_QRS) if v != 0.0]
            onset = tmpl.tau + bp_u[nonzero[0] - 1] / tmpl.lam
            end = tmpl.tau + bp_u[nonzero[-1] + 1] / tmpl.lam
            marks[wave] = WaveMarks(onset=onset, peak=tmpl.tau, end=end)
            continue
        comp, deriv = _component_and_derivative(template, wave, trel)
        marks[wave] = delineate_component(trel, comp, deriv, wave, tmpl.lam, tmpl.tau)
    return Delineation(p=marks[WaveKind.P], qrs=marks[WaveKind.QRS], t=marks[WaveKind.T])


@dataclass(eq=False)
class GroundTruth:
    """Per-beat fiducials plus the per-sample additive baseline of each lead."""

    beats: list
    baseline: np.ndarray  # (L, N); zeros for a clean record
    template: BeatTemplate


@dataclass(eq=False)
class SynthDataset:
    clean: EcgRecord
    noisy: EcgRecord
    truth: GroundTruth
    noise_scale: np.ndarray  # per-lead C


def _clean_from_rng(cfg: SynthConfig, rng: np.random.Generator):
    rr = rng.normal(cfg.rr_mean, cfg.rr_std, cfg.n_beats + 1)
    r_times = np.cumsum(rr)
    n = int(np.ceil((r_times[-1] + 0.5) * cfg.f_s))
    t = np.arange(n) / cfg.f_s
    base = np.zeros(n)
    for r in r_times:
        lo = np.searchsorted(t, r - 0.6)
        hi = np.searchsorted(t, r + 0.8)
        base[lo:hi] += beat_waveform(cfg.template, t[lo:hi] - r)
    leads = np.stack([s * base for s in cfg.lead_scales])
    r_peaks = np.round(r_times * cfg.f_s).astype(int)
    record = EcgRecord(leads=leads, f_s=cfg.f_s, r_peaks=r_peaks)
    marks = template_truth(cfg.template, cfg.f_s)
    beats = [AnnotatedBeat(r_time=float(r_times[i]), marks=marks) for i in range(cfg.n_beats)]
    truth = GroundTruth(beats=beats, baseline=np.zeros_like(leads), template=cfg.template)
    return record, truth


def generate_clean(cfg: SynthConfig):
    """Clean record plus ground truth (fiducials; baseline identically zero)."""
    return _clean_from_rng(cfg, np.random.default_rng(cfg.seed))


def generate_dataset(cfg: SynthConfig) -> SynthDataset:
    """Clean + noise-contaminated record pair at the configured target SNR."""
    rng = np.random.default_rng(cfg.seed)
    clean, truth = _clean_from_rng(cfg, rng)
    n = clean.n_samples
    noisy_leads = np.empty_like(clean.leads)
    baseline = np.empty_like(clean.leads)
    scales = np.empty(clean.n_leads)
    for lead in range(clean.n_leads):
        params = draw_noise_params(rng)
        noise = baseline_noise(params, n, cfg.f_s)
        scales[lead] = scale_for_snr(clean.leads[lead], noise, cfg.snr_db)
        baseline[lead] = scales[lead] * noise
        noisy_leads[lead] = clean.leads[lead] + baseline[lead]
    noisy = EcgRecord(leads=noisy_leads, f_s=cfg.f_s, r_peaks=clean.r_peaks.copy())
    truth = GroundTruth(beats=truth.beats, baseline=baseline, template=cfg.template)
    return SynthDataset(clean=clean, noisy=noisy, truth=truth, noise_scale=scales)
