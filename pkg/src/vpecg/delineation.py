"""Derivative-based onset/peak/end extraction from fitted wave reconstructions.

Each fitted component is an analytic expression, so its time derivative is
computed from the atom derivative recurrences rather than by differencing.
Onset and end come from a two-candidate rule on the derivative: the point
where |derivative| falls below a wave-specific fraction of its outermost
significant extremum, or an opposite-sense derivative extremum, whichever
lies closer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import varpro
from .dictionary import WaveKind, build_wave_time_derivs
from .errors import NoSignificantExtrema

# Divisor applied to the derivative extrema when discarding insignificant
# ones, and the onset/end threshold factors, per wave.
SIGNIFICANCE_DIVISOR = {WaveKind.QRS: 20.0, WaveKind.P: 2.0, WaveKind.T: 2.0}
ONSET_FACTOR = {WaveKind.QRS: 0.05, WaveKind.P: 0.25, WaveKind.T: 0.25}
END_FACTOR = {WaveKind.QRS: 0.07, WaveKind.P: 0.4, WaveKind.T: 0.4}


@dataclass(frozen=True)
class WaveMarks:
    """Fiducials of one wave in R-relative seconds."""

    onset: float
    peak: float
    end: float
    onset_fallback: bool = False
    end_fallback: bool = False


@dataclass(frozen=True)
class Delineation:
    """Per-wave fiducials for one beat; a wave is None when not detected."""

    p: WaveMarks | None
    qrs: WaveMarks | None
    t: WaveMarks | None

    def for_wave(self, wave: WaveKind) -> WaveMarks | None:
        return {WaveKind.P: self.p, WaveKind.QRS: self.qrs, WaveKind.T: self.t}[wave]

    def fiducials(self) -> dict:
        """Scored fiducial kinds -> R-relative times (seconds)."""
        out = {}
        if self.p is not None:
            out["p_on"], out["p_peak"], out["p_end"] = self.p.onset, self.p.peak, self.p.end
        if self.qrs is not None:
            out["qrs_on"], out["qrs_end"] = self.qrs.onset, self.qrs.end
        if self.t is not None:
            out["t_peak"], out["t_end"] = self.t.peak, self.t.end
        return out


@dataclass(frozen=True)
class AnnotatedBeat:
    """A beat's fiducials anchored at its absolute R-peak time."""

    r_time: float
    marks: Delineation


def _local_extrema_indices(deriv: np.ndarray):
    interior = deriv[1:-1]
    maxima = np.flatnonzero((interior > deriv[:-2]) & (interior >= deriv[2:])) + 1
    minima = np.flatnonzero((interior < deriv[:-2]) & (interior <= deriv[2:])) + 1
    return maxima, minima


def significant_extrema(grid: np.ndarray, deriv: np.ndarray, divisor: float):
    """Chronological derivative extrema surviving the significance threshold.

    Maxima below max(deriv)/divisor and minima above min(deriv)/divisor are
    discarded. Returns (time, value, sign) triples, sign +1 for maxima.
    """
    grid = np.asarray(grid, dtype=float)
    deriv = np.asarray(deriv, dtype=float)
    maxima, minima = _local_extrema_indices(deriv)
    hi = deriv.max() / divisor
    lo = deriv.min() / divisor
    keep = [(i, 1) for i in maxima if deriv[i] >= hi] + [(i, -1) for i in minima if deriv[i] <= lo]
    keep.sort()
    if not keep:
        raise NoSignificantExtrema("no derivative extremum survives the threshold")
    return [(float(grid[i]), float(deriv[i]), sign) for i, sign in keep]


def _scan_bound(deriv: np.ndarray, start: int, threshold: float, direction: int) -> int | None:
    """Nearest of the two boundary candidates scanning from a derivative extremum.

    Candidate 1: first sample where |deriv| drops below threshold.
    Candidate 2: first opposite-sense local extremum of the derivative.
    """
    n = deriv.size
    want_min = deriv[start] > 0  # past a positive lobe the derivative turns at a minimum
    cand1 = cand2 = None
    i = start + direction
    while 0 < i < n - 1:
        if cand1 is None and abs(deriv[i]) < threshold:
            cand1 = i
        if cand2 is None:
            if want_min and deriv[i] < deriv[i - 1] and deriv[i] <= deriv[i + 1]:
                cand2 = i
            elif not want_min and deriv[i] > deriv[i - 1] and deriv[i] >= deriv[i + 1]:
                cand2 = i
        if cand1 is not None and cand2 is not None:
            break
        i += direction
    if cand1 is None and cand2 is None:
        return None
    if cand1 is None:
        return cand2
    if cand2 is None:
        return cand1
    return cand1 if abs(cand1 - start) <= abs(cand2 - start) else cand2


def locate_bounds(grid: np.ndarray, component: np.ndarray, deriv: np.ndarray, wave: WaveKind):
    """Onset/end sample times from the outermost significant derivative extrema.

    Either side may come back None when the threshold is never crossed and
    no opposite extremum exists; callers fall back to the three-sigma
    support edge.
    """
    grid = np.asarray(grid, dtype=float)
    deriv = np.asarray(deriv, dtype=float)
    ext = significant_extrema(grid, deriv, SIGNIFICANCE_DIVISOR[wave])
    t1, v1, _ = ext[0]
    t2, v2, _ = ext[-1]
    idx1 = int(np.argmin(np.abs(grid - t1)))
    idx2 = int(np.argmin(np.abs(grid - t2)))
    on_idx = _scan_bound(deriv, idx1, ONSET_FACTOR[wave] * abs(v1), -1)
    end_idx = _scan_bound(deriv, idx2, END_FACTOR[wave] * abs(v2), +1)
    onset = float(grid[on_idx]) if on_idx is not None else None
    end = float(grid[end_idx]) if end_idx is not None else None
    return onset, end


def component_time_derivative(fit: "varpro.ModelFit", wave: WaveKind) -> np.ndarray:
    """Analytic d/dt of one fitted wave component, sampled on the beat grid."""
    cfg = fit.dicts[wave]
    lam, tau = fit.params.for_wave(wave)
    tds = build_wave_time_derivs(cfg, lam, tau, fit.grid)
    cols = {WaveKind.QRS: varpro.QRS_COLS, WaveKind.T: varpro.T_COLS, WaveKind.P: varpro.P_COLS}
    d = tds[:, : cfg.num_hermite] @ fit.coeffs[cols[wave]]
    if cfg.has_sigmoid:
        sign = 1.0 if wave is WaveKind.QRS else -1.0
        d = d + sign * fit.coeffs[varpro.SIGMOID_COL] * tds[:, -1]
    return d


def _wave_coeff_vector(fit: "varpro.ModelFit", wave: WaveKind) -> np.ndarray:
    cols = {WaveKind.QRS: varpro.QRS_COLS, WaveKind.T: varpro.T_COLS, WaveKind.P: varpro.P_COLS}
    c = fit.coeffs[cols[wave]]
    if fit.dicts[wave].has_sigmoid:
        c = np.append(c, fit.coeffs[varpro.SIGMOID_COL])
    return c


def delineate_component(
    grid: np.ndarray,
    component: np.ndarray,
    deriv: np.ndarray,
    wave: WaveKind,
    lam: float,
    tau: float,
) -> WaveMarks | None:
    """Apply the boundary rule to one sampled component; None when undetectable."""
    grid = np.asarray(grid, dtype=float)
    component = np.asarray(component, dtype=float)
    if not np.any(component):
        return None
    try:
        onset, end = locate_bounds(grid, component, deriv, wave)
    except NoSignificantExtrema:
        return None
    peak = float(grid[int(np.argmax(np.abs(component)))])
    onset_fb = onset is None or onset >= peak
    end_fb = end is None or end <= peak
    if onset_fb:
        onset = max(tau - 3.0 / lam, float(grid[0]))
    if end_fb:
        end = min(tau + 3.0 / lam, float(grid[-1]))
    if not onset < peak < end:
        return None
    return WaveMarks(onset=onset, peak=peak, end=end, onset_fallback=onset_fb, end_fallback=end_fb)


def delineate(fit: "varpro.ModelFit") -> Delineation:
    """Onset/peak/end of P, QRS, T from a fitted beat, in R-relative seconds."""
    marks = {}
    for wave in (WaveKind.P, WaveKind.QRS, WaveKind.T):
        if not np.any(_wave_coeff_vector(fit, wave)):
            marks[wave] = None
            continue
        lam, tau = fit.params.for_wave(wave)
        deriv = component_time_derivative(fit, wave)
        marks[wave] = delineate_component(
            fit.grid, fit.components[wave], deriv, wave, lam, tau
        )
    return Delineation(p=marks[WaveKind.P], qrs=marks[WaveKind.QRS], t=marks[WaveKind.T])
