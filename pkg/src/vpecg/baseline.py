"""Baseline-wander atom: knot placement and shape-preserving cubic interpolation.

The baseline dictionary contributes a single column per beat: a monotone
piecewise-cubic (Fritsch-Carlson slope-limited) interpolant through four
knots whose interior positions follow the QRS/T nonlinear parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import NonlinearParams
from .errors import KnotCollision


@dataclass(frozen=True)
class KnotSet:
    """Four interpolation knots: positions in seconds, values in mV."""

    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.positions.shape != (4,) or self.values.shape != (4,):
            raise ValueError("expected exactly 4 knots")
        if not np.all(np.diff(self.positions) > 0):
            raise KnotCollision(f"knot positions not strictly increasing: {self.positions}")


def compute_knots(params: NonlinearParams, grid: np.ndarray, samples: np.ndarray) -> KnotSet:
    """Knots for one beat: window edges plus the PQ and post-T fiducials.

    x2 = tau_qrs - 4/lambda_qrs and x3 = tau_t + 4/lambda_t; knot values are
    the raw signal amplitudes at the samples nearest each position.
    """
    grid = np.asarray(grid, dtype=float)
    samples = np.asarray(samples, dtype=float)
    x2 = params.tau_qrs - 4.0 / params.lambda_qrs
    x3 = params.tau_t + 4.0 / params.lambda_t
    positions = np.array([grid[0], x2, x3, grid[-1]])
    if not np.all(np.diff(positions) > 0):
        raise KnotCollision(f"knot ordering failed: {positions}")
    dt = (grid[-1] - grid[0]) / (grid.size - 1)
    idx = np.clip(np.round((positions - grid[0]) / dt).astype(int), 0, grid.size - 1)
    return KnotSet(positions=positions, values=samples[idx])


def _edge_slope(h0: float, h1: float, d0: float, d1: float) -> float:
    """One-sided three-point slope with the standard monotonicity clamp."""
    d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if d * d0 <= 0.0:
        return 0.0
    if d0 * d1 < 0.0 and abs(d) > 3.0 * abs(d0):
        return 3.0 * d0
    return d


def _pchip_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    delta = np.diff(y) / h
    n = x.size
    m = np.zeros(n)
    for k in range(1, n - 1):
        if delta[k - 1] * delta[k] > 0.0:
            w1 = 2.0 * h[k] + h[k - 1]
            w2 = h[k] + 2.0 * h[k - 1]
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k])
    m[0] = _edge_slope(h[0], h[1], delta[0], delta[1])
    m[-1] = _edge_slope(h[-1], h[-2], delta[-1], delta[-2])
    return m


def pchip_column(knots: KnotSet, grid: np.ndarray) -> np.ndarray:
    """Monotonicity-preserving cubic interpolant sampled on grid."""
    grid = np.asarray(grid, dtype=float)
    x, y = knots.positions, knots.values
    m = _pchip_slopes(x, y)
    seg = np.clip(np.searchsorted(x, grid, side="right") - 1, 0, x.size - 2)
    h = x[seg + 1] - x[seg]
    s = (grid - x[seg]) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * y[seg] + h10 * h * m[seg] + h01 * y[seg + 1] + h11 * h * m[seg + 1]


def baseline_column(params: NonlinearParams, grid: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """The single baseline dictionary column p(alpha; .) for one beat."""
    return pchip_column(compute_knots(params, grid, samples), grid)


def _pchip_batch(positions: np.ndarray, values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Evaluate several 4-knot pchip interpolants on one grid, shape (M, N)."""
    m = positions.shape[0]
    x, y = positions, values
    h = np.diff(x, axis=1)
    delta = np.diff(y, axis=1) / h
    slopes = np.zeros((m, 4))
    for k in (1, 2):
        same = delta[:, k - 1] * delta[:, k] > 0.0
        w1 = 2.0 * h[:, k] + h[:, k - 1]
        w2 = h[:, k] + 2.0 * h[:, k - 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            harm = (w1 + w2) / (w1 / delta[:, k - 1] + w2 / delta[:, k])
        slopes[:, k] = np.where(same, harm, 0.0)
    for col, a in ((0, 0), (3, 2)):
        d0 = delta[:, a]
        d1 = delta[:, a + (1 if col == 0 else -1)]
        h0 = h[:, a]
        h1 = h[:, a + (1 if col == 0 else -1)]
        d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        d = np.where(d * d0 <= 0.0, 0.0, d)
        clamp = (d0 * d1 < 0.0) & (np.abs(d) > 3.0 * np.abs(d0))
        slopes[:, col] = np.where(clamp, 3.0 * d0, d)
    # segment index per (set, sample): 3 intervals per knot set
    seg = (grid[None, :] >= x[:, 1:2]).astype(int) + (grid[None, :] >= x[:, 2:3])
    rows = np.arange(m)[:, None]
    x0 = x[rows, seg]
    hseg = x[rows, seg + 1] - x0
    s = (grid[None, :] - x0) / hseg
    s2 = s * s
    s3 = s2 * s
    return (
        (2.0 * s3 - 3.0 * s2 + 1.0) * y[rows, seg]
        + (s3 - 2.0 * s2 + s) * hseg * slopes[rows, seg]
        + (-2.0 * s3 + 3.0 * s2) * y[rows, seg + 1]
        + (s3 - s2) * hseg * slopes[rows, seg + 1]
    )


def baseline_jacobian(
    params: NonlinearParams,
    grid: np.ndarray,
    samples: np.ndarray,
    rel_step: float = 1e-5,
) -> np.ndarray:
    """Central finite-difference sensitivities of the baseline column.

    Columns are d p / d (lambda_qrs, tau_qrs, lambda_t, tau_t). The knot
    values snap to the nearest sample, so an analytic derivative would be
    discontinuous anyway; a fixed relative step is robust and cheap.
    """
    grid = np.asarray(grid, dtype=float)
    samples = np.asarray(samples, dtype=float)
    base = params.as_array()
    steps = np.empty(4)
    positions = np.empty((8, 4))
    for k in range(4):
        steps[k] = rel_step * max(1.0, abs(base[k]))
        for sign, row in ((+1.0, 2 * k), (-1.0, 2 * k + 1)):
            p = base.copy()
            p[k] += sign * steps[k]
            pk = NonlinearParams.from_array(p)
            positions[row] = (
                grid[0],
                pk.tau_qrs - 4.0 / pk.lambda_qrs,
                pk.tau_t + 4.0 / pk.lambda_t,
                grid[-1],
            )
    if np.any(np.diff(positions, axis=1) <= 0.0):
        raise KnotCollision("knot ordering failed within the FD stencil")
    dt = (grid[-1] - grid[0]) / (grid.size - 1)
    idx = np.clip(np.round((positions - grid[0]) / dt).astype(int), 0, grid.size - 1)
    cols = _pchip_batch(positions, samples[idx], grid)
    return ((cols[0::2] - cols[1::2]) / (2.0 * steps[:, None])).T
