import numpy as np
import pytest

from vpecg.beat import BeatSignal
from vpecg.dictionary import NonlinearParams, default_dictionaries, ordering_violations
from vpecg.varpro import assemble

F_S = 500.0


def beat_grid(start=-0.3, end=0.55, f_s=F_S):
    return np.arange(start, end, 1.0 / f_s)


def feasible_params():
    return NonlinearParams(60.0, 0.01, 20.0, 0.25, 40.5, -0.14)


def model_coeffs():
    """A physiological-looking 16-coefficient vector (no baseline slot).

    Every Hermite order carries weight so the nonlinear parameters are
    identifiable: a rank-deficient shape can be re-expressed by the
    remaining orders at a different (lambda, tau), leaving planted
    parameters undetermined.
    """
    c = np.zeros(16)
    c[0:7] = [1.0, -0.35, 0.25, -0.12, 0.08, -0.05, 0.03]  # QRS
    c[7:11] = [0.35, 0.12, -0.05, 0.025]  # T
    c[11:15] = [0.18, 0.09, -0.03, 0.015]  # P, Gaussian share positive
    c[15] = 0.1  # merged sigmoid (ST offset)
    return c


def wave_span_signal(params, grid=None, coeffs=None, noise=0.0, seed=0, f_s=F_S):
    """Signal lying exactly in the wave-dictionary span, plus optional noise."""
    if grid is None:
        grid = beat_grid(f_s=f_s)
    dummy = BeatSignal(samples=np.zeros(grid.size), f_s=f_s, t=grid)
    sys = assemble(params, dummy, include_baseline=False)
    c = model_coeffs() if coeffs is None else coeffs
    f = sys.phi @ c
    if noise:
        f = f + np.random.default_rng(seed).normal(0.0, noise, f.size)
    return BeatSignal(samples=f, f_s=f_s, t=grid)


def _clear_of_knot_snap(p, grid):
    """True when both interior baseline knots sit away from half-sample points.

    Knot values snap to the nearest sample, so the objective is
    discontinuous in alpha exactly at half-sample knot positions;
    finite-difference checks are only valid away from those boundaries.
    """
    dt = 1.0 / F_S
    for x in (p.tau_qrs - 4.0 / p.lambda_qrs, p.tau_t + 4.0 / p.lambda_t):
        frac = ((x - grid[0]) / dt) % 1.0
        if abs(frac - 0.5) < 0.05:
            return False
    return True


def random_feasible_params(rng, dicts, margin=0.02, require_ordering=True, grid=None):
    """Rejection-sample a parameter vector inside the box (and ordering cone)."""
    lb, ub = dicts.lower_bounds(), dicts.upper_bounds()
    span = ub - lb
    while True:
        a = lb + margin * span + rng.uniform(0.0, 1.0, 6) * (1.0 - 2.0 * margin) * span
        p = NonlinearParams.from_array(a)
        if grid is not None:
            # keep the post-T baseline knot strictly inside the window
            if p.tau_t + 4.0 / p.lambda_t >= grid[-1] - 2.0 / F_S:
                continue
            if not _clear_of_knot_snap(p, grid):
                continue
            if require_ordering:
                g = ordering_violations(p, grid.size, F_S, grid[0])
                if np.any(g > 0):
                    continue
        return p


@pytest.fixture
def grid():
    return beat_grid()


@pytest.fixture
def dicts(grid):
    return default_dictionaries(grid[0])
