"""Per-wave adaptive dictionaries: sampled atom columns and their parameter Jacobians.

Column layouts, atom counts, and default (lambda, tau) boxes follow the
fixed per-wave setup: QRS uses 7 Hermite orders plus a sigmoid, T uses 4
plus a sigmoid, P uses 4 Hermite orders only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .atoms import RESCALE_BASE, sigmoid, sigmoid_deriv
from .errors import BoundsViolation


class WaveKind(Enum):
    QRS = "qrs"
    T = "t"
    P = "p"


@dataclass(frozen=True)
class WaveDictionaryConfig:
    """Atom counts and (lambda, tau) box for one wave's dictionary."""

    wave: WaveKind
    num_hermite: int
    has_sigmoid: bool
    lambda_bounds: tuple[float, float]  # 1/s
    tau_bounds: tuple[float, float]  # s, relative to the R peak

    def __post_init__(self):
        if not self.lambda_bounds[0] < self.lambda_bounds[1]:
            raise ValueError("lambda_bounds must be a nonempty interval")
        if not self.tau_bounds[0] < self.tau_bounds[1]:
            raise ValueError("tau_bounds must be a nonempty interval")

    @property
    def n_columns(self) -> int:
        return self.num_hermite + (1 if self.has_sigmoid else 0)


# Default boxes (lambda in 1/s, tau in s). The P-wave tau lower bound is
# window-start dependent: its center must lie at least 44 ms after the
# start of the sliced beat.
_LAMBDA_DEFAULTS = {
    WaveKind.QRS: (44.12, 85.71),
    WaveKind.T: (14.78, 30.61),
    WaveKind.P: (39.47, 68.18),
}
_TAU_DEFAULTS = {
    WaveKind.QRS: (-0.068, 0.068),
    WaveKind.T: (0.133, 0.343),
}
_TAU_P_START_MARGIN = 0.044
_TAU_P_MAX = -0.112
_NUM_HERMITE = {WaveKind.QRS: 7, WaveKind.T: 4, WaveKind.P: 4}
_HAS_SIGMOID = {WaveKind.QRS: True, WaveKind.T: True, WaveKind.P: False}


def table_config(wave: WaveKind, window_start: float) -> WaveDictionaryConfig:
    """Default dictionary configuration for one wave.

    window_start is the first time-axis value of the sliced beat (negative,
    R-relative seconds); it sets the P-wave tau lower bound.
    """
    if wave is WaveKind.P:
        tau_bounds = (window_start + _TAU_P_START_MARGIN, _TAU_P_MAX)
    else:
        tau_bounds = _TAU_DEFAULTS[wave]
    return WaveDictionaryConfig(
        wave=wave,
        num_hermite=_NUM_HERMITE[wave],
        has_sigmoid=_HAS_SIGMOID[wave],
        lambda_bounds=_LAMBDA_DEFAULTS[wave],
        tau_bounds=tau_bounds,
    )


@dataclass(frozen=True)
class DictionarySet:
    """The three wave dictionaries used to model one beat."""

    qrs: WaveDictionaryConfig
    t: WaveDictionaryConfig
    p: WaveDictionaryConfig

    def __getitem__(self, wave: WaveKind) -> WaveDictionaryConfig:
        return {WaveKind.QRS: self.qrs, WaveKind.T: self.t, WaveKind.P: self.p}[wave]

    def lower_bounds(self) -> np.ndarray:
        """Box lower bounds in parameter order (l_qrs, t_qrs, l_t, t_t, l_p, t_p)."""
        return np.array(
            [
                self.qrs.lambda_bounds[0],
                self.qrs.tau_bounds[0],
                self.t.lambda_bounds[0],
                self.t.tau_bounds[0],
                self.p.lambda_bounds[0],
                self.p.tau_bounds[0],
            ]
        )

    def upper_bounds(self) -> np.ndarray:
        return np.array(
            [
                self.qrs.lambda_bounds[1],
                self.qrs.tau_bounds[1],
                self.t.lambda_bounds[1],
                self.t.tau_bounds[1],
                self.p.lambda_bounds[1],
                self.p.tau_bounds[1],
            ]
        )


def default_dictionaries(
    window_start: float, bounds_overrides: dict[str, tuple[float, float]] | None = None
) -> DictionarySet:
    """Build the default dictionary set for a beat window.

    bounds_overrides may replace individual boxes, keyed by
    'lambda_qrs', 'tau_qrs', 'lambda_t', 'tau_t', 'lambda_p', 'tau_p'.
    """
    cfgs = {w: table_config(w, window_start) for w in WaveKind}
    if bounds_overrides:
        for key, interval in bounds_overrides.items():
            field, _, wave_name = key.partition("_")
            wave = WaveKind(wave_name)
            if field == "lambda":
                cfgs[wave] = replace(cfgs[wave], lambda_bounds=tuple(interval))
            elif field == "tau":
                cfgs[wave] = replace(cfgs[wave], tau_bounds=tuple(interval))
            else:
                raise ValueError(f"unknown bounds override {key!r}")
    return DictionarySet(qrs=cfgs[WaveKind.QRS], t=cfgs[WaveKind.T], p=cfgs[WaveKind.P])


@dataclass(frozen=True)
class NonlinearParams:
    """Translations and dilations for QRS/T/P; the baseline reuses the QRS/T entries."""

    lambda_qrs: float
    tau_qrs: float
    lambda_t: float
    tau_t: float
    lambda_p: float
    tau_p: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.lambda_qrs, self.tau_qrs, self.lambda_t, self.tau_t, self.lambda_p, self.tau_p]
        )

    @classmethod
    def from_array(cls, a) -> "NonlinearParams":
        a = np.asarray(a, dtype=float)
        if a.shape != (6,):
            raise ValueError("expected 6 parameters")
        return cls(*a.tolist())

    def for_wave(self, wave: WaveKind) -> tuple[float, float]:
        return {
            WaveKind.QRS: (self.lambda_qrs, self.tau_qrs),
            WaveKind.T: (self.lambda_t, self.tau_t),
            WaveKind.P: (self.lambda_p, self.tau_p),
        }[wave]

    def within_bounds(self, dicts: DictionarySet, tol: float = 0.0) -> bool:
        a = self.as_array()
        lb, ub = dicts.lower_bounds(), dicts.upper_bounds()
        slack = tol * (ub - lb)
        return bool(np.all(a >= lb - slack) and np.all(a <= ub + slack))


def _check_bounds(cfg: WaveDictionaryConfig, lam: float, tau: float) -> None:
    lo, hi = cfg.lambda_bounds
    if not lo <= lam <= hi:
        raise BoundsViolation(f"lambda={lam} outside {cfg.wave.name} bounds [{lo}, {hi}]")
    lo, hi = cfg.tau_bounds
    if not lo <= tau <= hi:
        raise BoundsViolation(f"tau={tau} outside {cfg.wave.name} bounds [{lo}, {hi}]")


def _hermite_blocks(num_hermite: int, lam: float, tau: float, grid: np.ndarray):
    """Per-order value, d/du, and argument scale for the rescaled Hermite columns.

    Order j is evaluated at its own rescaled argument, so the three-term
    recurrence runs on the stacked argument matrix and the needed rows are
    captured as the recurrence passes orders j-1, j, and j+1.
    """
    dt = grid - tau
    scales = RESCALE_BASE ** np.arange(num_hermite)
    u = (scales * lam)[:, None] * dt[None, :]  # row j: argument for order j
    vals = np.empty((num_hermite, grid.size))
    below = np.zeros_like(vals)  # phi_{j-1} at order-j arguments
    above = np.empty_like(vals)  # phi_{j+1} at order-j arguments
    prev = np.pi**-0.25 * np.exp(-0.5 * u * u)
    cur = np.sqrt(2.0) * u * prev
    vals[0] = prev[0]
    if num_hermite > 1:
        vals[1] = cur[1]
        below[1] = prev[1]
    above[0] = cur[0]
    for m in range(2, num_hermite + 1):
        prev, cur = cur, np.sqrt(2.0 / m) * u * cur - np.sqrt((m - 1) / m) * prev
        if m < num_hermite:
            vals[m] = cur[m]
            below[m] = prev[m]
        above[m - 1] = cur[m - 1]
    orders = np.arange(num_hermite)[:, None]
    dus = np.sqrt(orders / 2.0) * below - np.sqrt((orders + 1) / 2.0) * above
    return vals.T, dus.T, scales, dt


def build_wave_columns(
    cfg: WaveDictionaryConfig, lam: float, tau: float, grid: np.ndarray
) -> np.ndarray:
    """Sampled dictionary matrix (N x n_columns) for one wave."""
    _check_bounds(cfg, lam, tau)
    grid = np.asarray(grid, dtype=float)
    vals, _, _, dt = _hermite_blocks(cfg.num_hermite, lam, tau, grid)
    if not cfg.has_sigmoid:
        return vals
    return np.column_stack([vals, sigmoid(lam * dt)])


def build_wave_jacobian(cfg: WaveDictionaryConfig, lam: float, tau: float, grid: np.ndarray):
    """Entrywise (d/dlam, d/dtau) of build_wave_columns."""
    _check_bounds(cfg, lam, tau)
    grid = np.asarray(grid, dtype=float)
    _, dus, scales, dt = _hermite_blocks(cfg.num_hermite, lam, tau, grid)
    d_dlam = dus * (scales[None, :] * dt[:, None])
    d_dtau = dus * (-scales[None, :] * lam)
    if cfg.has_sigmoid:
        sp = sigmoid_deriv(lam * dt)
        d_dlam = np.column_stack([d_dlam, sp * dt])
        d_dtau = np.column_stack([d_dtau, -lam * sp])
    return d_dlam, d_dtau


def build_wave_time_derivs(
    cfg: WaveDictionaryConfig, lam: float, tau: float, grid: np.ndarray
) -> np.ndarray:
    """Analytic d/dt of every column; equals -d/dtau for these affine atoms."""
    _, d_dtau = build_wave_jacobian(cfg, lam, tau, grid)
    return -d_dtau


@dataclass(frozen=True)
class OrderingReport:
    """Feasibility of the wave-ordering constraints, in sample coordinates."""

    feasible: bool
    violations: np.ndarray  # 4 values, > 0 means violated by that many samples


def ordering_violations(
    params: NonlinearParams, n_samples: int, f_s: float, t_start: float
) -> np.ndarray:
    """Signed constraint values g_i (<= 0 feasible) in sample units.

    The four constraints: P onset after the first sample; P end before QRS
    onset; QRS end before T onset; T end before the last sample. tau values
    are R-relative seconds; t_start is the beat window start.
    """
    p = params
    g1 = (t_start - (p.tau_p - 3.0 / p.lambda_p)) * f_s
    g2 = ((p.tau_p + 3.0 / p.lambda_p) - (p.tau_qrs - 3.0 / p.lambda_qrs)) * f_s
    g3 = ((p.tau_qrs + 3.0 / p.lambda_qrs) - (p.tau_t - 3.0 / p.lambda_t)) * f_s
    g4 = (p.tau_t + 3.0 / p.lambda_t - t_start) * f_s + 1.0 - n_samples
    return np.array([g1, g2, g3, g4])


def ordering_violation_jacobian(params: NonlinearParams, f_s: float) -> np.ndarray:
    """d g_i / d alpha_k, shape (4, 6), parameter order as NonlinearParams."""
    p = params
    jac = np.zeros((4, 6))
    # g1 = (t_start - tau_p + 3/lambda_p) * f_s
    jac[0, 4] = 3.0 / p.lambda_p**2 * -f_s
    jac[0, 5] = -f_s
    # g2 = (tau_p + 3/lambda_p - tau_qrs + 3/lambda_qrs) * f_s
    jac[1, 4] = -3.0 / p.lambda_p**2 * f_s
    jac[1, 5] = f_s
    jac[1, 0] = -3.0 / p.lambda_qrs**2 * f_s
    jac[1, 1] = -f_s
    # g3 = (tau_qrs + 3/lambda_qrs - tau_t + 3/lambda_t) * f_s
    jac[2, 0] = -3.0 / p.lambda_qrs**2 * f_s
    jac[2, 1] = f_s
    jac[2, 2] = -3.0 / p.lambda_t**2 * f_s
    jac[2, 3] = -f_s
    # g4 = (tau_t + 3/lambda_t - t_start) * f_s + 1 - N
    jac[3, 2] = -3.0 / p.lambda_t**2 * f_s
    jac[3, 3] = f_s
    return jac


def check_ordering(
    params: NonlinearParams, n_samples: int, f_s: float, t_start: float
) -> OrderingReport:
    """Evaluate the four wave-ordering constraints for a beat window."""
    g = ordering_violations(params, n_samples, f_s, t_start)
    return OrderingReport(feasible=bool(np.all(g <= 0.0)), violations=g)
