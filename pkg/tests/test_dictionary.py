import numpy as np
import pytest

from vpecg.atoms import AtomSpec, atom_value
from vpecg.dictionary import (
    NonlinearParams,
    WaveKind,
    build_wave_columns,
    build_wave_jacobian,
    check_ordering,
    default_dictionaries,
    table_config,
)
from vpecg.errors import BoundsViolation

WINDOW_START = -0.3
GRID = np.arange(-0.3, 0.55, 1.0 / 500.0)


def mid(bounds):
    return 0.5 * (bounds[0] + bounds[1])


class TestConfigs:
    def test_column_counts_per_wave(self):
        dicts = default_dictionaries(WINDOW_START)
        assert dicts.qrs.n_columns == 8
        assert dicts.t.n_columns == 5
        assert dicts.p.n_columns == 4
        assert not dicts.p.has_sigmoid

    def test_default_bounds(self):
        dicts = default_dictionaries(WINDOW_START)
        assert dicts.qrs.lambda_bounds == (44.12, 85.71)
        assert dicts.t.lambda_bounds == (14.78, 30.61)
        assert dicts.p.lambda_bounds == (39.47, 68.18)
        assert dicts.qrs.tau_bounds == (-0.068, 0.068)
        assert dicts.t.tau_bounds == (0.133, 0.343)
        # P center at least 44 ms after the window start
        assert dicts.p.tau_bounds == (WINDOW_START + 0.044, -0.112)

    def test_overrides(self):
        dicts = default_dictionaries(WINDOW_START, {"lambda_qrs": (40.0, 90.0)})
        assert dicts.qrs.lambda_bounds == (40.0, 90.0)
        assert dicts.t.lambda_bounds == (14.78, 30.61)

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            default_dictionaries(WINDOW_START, {"tau_t": (0.3, 0.3)})


class TestBuildColumns:
    def test_qrs_has_eight_columns(self):
        cfg = table_config(WaveKind.QRS, WINDOW_START)
        cols = build_wave_columns(cfg, 60.0, 0.0, GRID)
        assert cols.shape == (GRID.size, 8)

    def test_p_has_four_columns_no_sigmoid(self):
        cfg = table_config(WaveKind.P, WINDOW_START)
        cols = build_wave_columns(cfg, 50.0, -0.2, GRID)
        assert cols.shape == (GRID.size, 4)

    def test_columns_match_atom_values(self):
        cfg = table_config(WaveKind.QRS, WINDOW_START)
        lam, tau = 60.0, 0.01
        cols = build_wave_columns(cfg, lam, tau, GRID)
        k = 137
        for j in range(7):
            spec = AtomSpec("hermite", lam=lam, tau=tau, j=j)
            assert cols[k, j] == pytest.approx(atom_value(spec, GRID[k]), rel=1e-13)
        sig = AtomSpec("sigmoid", lam=lam, tau=tau)
        assert cols[k, 7] == pytest.approx(atom_value(sig, GRID[k]), rel=1e-13)

    def test_bounds_enforced(self):
        cfg = table_config(WaveKind.QRS, WINDOW_START)
        with pytest.raises(BoundsViolation):
            build_wave_columns(cfg, 100.0, 0.0, GRID)
        with pytest.raises(BoundsViolation):
            build_wave_columns(cfg, 60.0, 0.1, GRID)

    def test_translation_covariance(self):
        cfg = table_config(WaveKind.T, WINDOW_START)
        lam, tau = 20.0, 0.25
        # dyadic grid, shift, and tau make the float arithmetic exact
        grid = np.arange(-128, 256) / 512.0
        delta = 32.0 / 512.0
        a = build_wave_columns(cfg, lam, tau, grid)
        b = build_wave_columns(cfg, lam, tau + delta, grid + delta)
        np.testing.assert_array_equal(a, b)

    def test_deterministic(self):
        cfg = table_config(WaveKind.P, WINDOW_START)
        a = build_wave_columns(cfg, 50.0, -0.2, GRID)
        b = build_wave_columns(cfg, 50.0, -0.2, GRID)
        np.testing.assert_array_equal(a, b)


class TestJacobian:
    @pytest.mark.parametrize("wave", list(WaveKind))
    def test_matches_finite_differences(self, wave):
        cfg = table_config(wave, WINDOW_START)
        rng = np.random.default_rng(hash(wave.value) % 2**31)
        for _ in range(35):
            lam = rng.uniform(*cfg.lambda_bounds)
            tau = rng.uniform(*cfg.tau_bounds)
            # keep the FD stencil inside the bounds
            h_lam = 1e-6 * max(1.0, abs(lam))
            h_tau = 1e-6 * max(1.0, abs(tau))
            lam = np.clip(lam, cfg.lambda_bounds[0] + h_lam, cfg.lambda_bounds[1] - h_lam)
            tau = np.clip(tau, cfg.tau_bounds[0] + h_tau, cfg.tau_bounds[1] - h_tau)
            d_lam, d_tau = build_wave_jacobian(cfg, lam, tau, GRID)
            fd_lam = (
                build_wave_columns(cfg, lam + h_lam, tau, GRID)
                - build_wave_columns(cfg, lam - h_lam, tau, GRID)
            ) / (2 * h_lam)
            fd_tau = (
                build_wave_columns(cfg, lam, tau + h_tau, GRID)
                - build_wave_columns(cfg, lam, tau - h_tau, GRID)
            ) / (2 * h_tau)
            scale_lam = np.abs(fd_lam).max()
            scale_tau = np.abs(fd_tau).max()
            assert np.abs(d_lam - fd_lam).max() < 1e-5 * scale_lam
            assert np.abs(d_tau - fd_tau).max() < 1e-5 * scale_tau

    def test_gaussian_center_row_is_flat_in_tau(self):
        cfg = table_config(WaveKind.QRS, WINDOW_START)
        tau = GRID[150]  # tau exactly on a grid point
        _, d_tau = build_wave_jacobian(cfg, 60.0, tau, GRID)
        assert d_tau[150, 0] == pytest.approx(0.0, abs=1e-12)

    def test_sigmoid_dlambda_zero_at_center(self):
        cfg = table_config(WaveKind.QRS, WINDOW_START)
        tau = GRID[150]
        d_lam, _ = build_wave_jacobian(cfg, 60.0, tau, GRID)
        assert d_lam[150, 7] == pytest.approx(0.0, abs=1e-12)


class TestOrdering:
    def test_spec_feasible_case(self):
        params = NonlinearParams(60.0, 0.0, 20.0, 0.25, 50.0, -0.2)
        report = check_ordering(params, n_samples=425, f_s=500.0, t_start=-0.3)
        assert report.feasible
        assert np.all(report.violations <= 0)

    def test_p_on_top_of_qrs_is_infeasible(self):
        params = NonlinearParams(60.0, 0.0, 20.0, 0.25, 60.0, 0.0)
        # P would need tau_p outside its own box; bypass via direct predicate
        report = check_ordering(params, n_samples=425, f_s=500.0, t_start=-0.3)
        assert not report.feasible
        assert report.violations[1] > 0  # P end exceeds QRS onset

    def test_t_end_beyond_last_sample_is_infeasible(self):
        params = NonlinearParams(60.0, 0.0, 15.0, 0.34, 50.0, -0.2)
        n = int(0.55 * 500)  # window ends at 0.25 s after R
        report = check_ordering(params, n_samples=n, f_s=500.0, t_start=-0.3)
        assert not report.feasible
        assert report.violations[3] > 0

    def test_component_supports_nearly_orthogonal(self):
        params = NonlinearParams(60.0, 0.0, 20.0, 0.25, 50.0, -0.2)
        dicts = default_dictionaries(WINDOW_START)
        recon = {}
        rng = np.random.default_rng(5)
        for wave in WaveKind:
            cfg = dicts[wave]
            lam, tau = params.for_wave(wave)
            cols = build_wave_columns(cfg, lam, tau, GRID)
            c = rng.normal(size=cols.shape[1])
            recon[wave] = cols[:, : cfg.num_hermite] @ c[: cfg.num_hermite]
        for a in WaveKind:
            for b in WaveKind:
                if a is b:
                    continue
                dot = abs(recon[a] @ recon[b])
                bound = 1e-3 * np.linalg.norm(recon[a]) * np.linalg.norm(recon[b])
                assert dot < bound
