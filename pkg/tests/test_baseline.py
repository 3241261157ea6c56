import numpy as np
import pytest
from scipy.interpolate import PchipInterpolator

from vpecg.baseline import (
    KnotSet,
    baseline_column,
    baseline_jacobian,
    compute_knots,
    pchip_column,
)
from vpecg.dictionary import NonlinearParams
from vpecg.errors import KnotCollision

F_S = 500.0
GRID = np.arange(-0.3, 0.55, 1.0 / F_S)
PARAMS = NonlinearParams(60.0, 0.0, 20.0, 0.25, 50.0, -0.2)


class TestComputeKnots:
    def test_interior_knot_formulas(self):
        knots = compute_knots(PARAMS, GRID, np.zeros(GRID.size))
        assert knots.positions[1] == pytest.approx(-4.0 / 60.0)
        assert knots.positions[2] == pytest.approx(0.25 + 0.2)

    def test_boundary_knots_at_grid_ends(self):
        knots = compute_knots(PARAMS, GRID, np.zeros(GRID.size))
        assert knots.positions[0] == GRID[0]
        assert knots.positions[3] == GRID[-1]

    def test_values_from_nearest_samples(self):
        samples = np.sin(GRID * 7.0)
        knots = compute_knots(PARAMS, GRID, samples)
        for pos, val in zip(knots.positions, knots.values):
            idx = int(np.argmin(np.abs(GRID - pos)))
            assert val == samples[idx]

    def test_collision_raises(self):
        # x3 = tau_t + 4/lambda_t pushed past the window end
        bad = NonlinearParams(60.0, 0.0, 14.78, 0.343, 50.0, -0.2)
        short_grid = np.arange(-0.3, 0.45, 1.0 / F_S)
        with pytest.raises(KnotCollision):
            compute_knots(bad, short_grid, np.zeros(short_grid.size))

    def test_knotset_validates_ordering(self):
        with pytest.raises(KnotCollision):
            KnotSet(positions=[0.0, 0.2, 0.1, 0.4], values=[0, 0, 0, 0])


class TestPchip:
    def test_constant_values_give_constant_column(self):
        knots = KnotSet(positions=[-0.3, -0.05, 0.4, 0.548], values=[0.7, 0.7, 0.7, 0.7])
        col = pchip_column(knots, GRID)
        np.testing.assert_allclose(col, 0.7, atol=1e-14)

    def test_linear_values_reproduced_exactly(self):
        pos = np.array([-0.3, -0.05, 0.4, 0.548])
        vals = 1.3 * pos + 0.2
        col = pchip_column(KnotSet(positions=pos, values=vals), GRID)
        np.testing.assert_allclose(col, 1.3 * GRID + 0.2, atol=1e-12)

    def test_interpolates_knots(self):
        pos = np.array([GRID[0], -0.0667, 0.45, GRID[-1]])
        vals = np.array([0.1, -0.4, 0.3, 0.05])
        knots = KnotSet(positions=pos, values=vals)
        dense = np.sort(np.concatenate([GRID, pos]))
        col = pchip_column(knots, dense)
        for p, v in zip(pos, vals):
            assert col[np.argmin(np.abs(dense - p))] == pytest.approx(v, abs=1e-12)

    def test_monotone_data_no_overshoot(self):
        pos = np.array([0.0, 0.2, 0.5, 1.0])
        vals = np.array([0.0, 0.1, 0.7, 0.8])
        dense = np.linspace(0.0, 1.0, 5001)
        col = pchip_column(KnotSet(positions=pos, values=vals), dense)
        assert np.all(np.diff(col) >= -1e-14)
        for k in range(3):
            seg = col[(dense >= pos[k]) & (dense <= pos[k + 1])]
            assert seg.min() >= vals[k] - 1e-12
            assert seg.max() <= vals[k + 1] + 1e-12

    def test_shape_preserved_on_each_segment(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            pos = np.sort(rng.uniform(0.0, 1.0, 4))
            pos[0], pos[-1] = 0.0, 1.0
            if np.any(np.diff(pos) < 0.05):
                continue
            vals = rng.normal(size=4)
            dense = np.linspace(0.0, 1.0, 4001)
            col = pchip_column(KnotSet(positions=pos, values=vals), dense)
            for k in range(3):
                seg = col[(dense >= pos[k]) & (dense <= pos[k + 1])]
                lo, hi = min(vals[k], vals[k + 1]), max(vals[k], vals[k + 1])
                assert seg.min() >= lo - 1e-10
                assert seg.max() <= hi + 1e-10

    def test_matches_scipy_pchip_oracle(self):
        rng = np.random.default_rng(33)
        for _ in range(25):
            pos = np.sort(rng.uniform(0.0, 1.0, 4))
            pos[0], pos[-1] = 0.0, 1.0
            if np.any(np.diff(pos) < 0.05):
                continue
            vals = rng.normal(size=4)
            dense = np.linspace(0.0, 1.0, 999)
            ours = pchip_column(KnotSet(positions=pos, values=vals), dense)
            ref = PchipInterpolator(pos, vals)(dense)
            np.testing.assert_allclose(ours, ref, atol=1e-12)

    def test_first_derivative_continuous_at_interior_knots(self):
        pos = np.array([0.0, 0.3, 0.6, 1.0])
        vals = np.array([0.2, -0.5, 0.4, 0.1])
        knots = KnotSet(positions=pos, values=vals)
        h = 1e-6
        for x in pos[1:-1]:
            left = (
                pchip_column(knots, np.array([x - h])) - pchip_column(knots, np.array([x - 2 * h]))
            ) / h
            right = (
                pchip_column(knots, np.array([x + 2 * h])) - pchip_column(knots, np.array([x + h]))
            ) / h
            assert left[0] == pytest.approx(right[0], abs=1e-3)


class TestBaselineJacobian:
    def test_constant_signal_has_zero_sensitivity(self):
        samples = np.full(GRID.size, 0.42)
        jac = baseline_jacobian(PARAMS, GRID, samples)
        np.testing.assert_allclose(jac, 0.0, atol=1e-9)

    def test_tau_t_shift_moves_third_knot_exactly(self):
        samples = np.sin(3.0 * GRID)
        delta = 0.004
        shifted = NonlinearParams(60.0, 0.0, 20.0, 0.25 + delta, 50.0, -0.2)
        k0 = compute_knots(PARAMS, GRID, samples)
        k1 = compute_knots(shifted, GRID, samples)
        assert k1.positions[2] - k0.positions[2] == pytest.approx(delta, abs=1e-15)

    def test_two_step_sizes_agree(self):
        # away from knot-sample snap boundaries the FD estimate is stable
        samples = 0.3 * np.sin(2.0 * np.pi * 0.4 * GRID) + 0.1 * GRID
        params = NonlinearParams(60.0, 0.0012, 20.0, 0.2507, 50.0, -0.2)
        j1 = baseline_jacobian(params, GRID, samples, rel_step=1e-5)
        j2 = baseline_jacobian(params, GRID, samples, rel_step=2e-5)
        scale = np.abs(j1).max()
        assert np.abs(j1 - j2).max() < 1e-3 * scale

    def test_collision_propagates(self):
        bad = NonlinearParams(60.0, 0.0, 14.78, 0.343, 50.0, -0.2)
        short_grid = np.arange(-0.3, 0.45, 1.0 / F_S)
        with pytest.raises(KnotCollision):
            baseline_jacobian(bad, short_grid, np.zeros(short_grid.size))

    def test_column_passes_through_knots(self):
        samples = 0.2 * np.cos(2.0 * np.pi * 0.3 * GRID)
        col = baseline_column(PARAMS, GRID, samples)
        knots = compute_knots(PARAMS, GRID, samples)
        for pos, val in zip(knots.positions, knots.values):
            idx = int(np.argmin(np.abs(GRID - pos)))
            if abs(GRID[idx] - pos) < 1e-12:  # boundary knots sit on the grid
                assert col[idx] == pytest.approx(val, abs=1e-12)
