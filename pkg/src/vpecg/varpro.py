"""Separable nonlinear least-squares engine built on variable projection.

For a fixed nonlinear parameter vector the linear coefficients come from a
rank-revealing constrained least-squares solve; the nonlinear parameters
are then driven by a bound-constrained trust-region descent on the
projection residual plus a quadratic penalty for the wave-ordering
constraints. The QRS and T sigmoid atoms are merged into a single column
s_QRS - s_T so their coefficients are structurally equal and opposite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .baseline import baseline_column, baseline_jacobian
from .beat import BeatSignal
from .dictionary import (
    DictionarySet,
    NonlinearParams,
    WaveKind,
    build_wave_columns,
    build_wave_jacobian,
    default_dictionaries,
    ordering_violation_jacobian,
    ordering_violations,
)
from .errors import InfeasibleInit, KnotCollision, RankDeficientWarning

# Fixed column layout of the assembled system.
QRS_COLS = slice(0, 7)
T_COLS = slice(7, 11)
P_COLS = slice(11, 15)
SIGMOID_COL = 15
BASELINE_COL = 16
P_GAUSS_COL = 11

# Parameter indices within the 6-vector (lambda_qrs, tau_qrs, lambda_t, tau_t, lambda_p, tau_p).
_WAVE_PARAM_COLS = {WaveKind.QRS: (0, 1), WaveKind.T: (2, 3), WaveKind.P: (4, 5)}


@dataclass(eq=False)
class AssembledSystem:
    """Concatenated dictionary matrix and its per-parameter derivative blocks."""

    phi: np.ndarray
    sig_qrs: np.ndarray  # sampled s_QRS column (pre-merge)
    sig_t: np.ndarray  # sampled s_T column (pre-merge)
    p_gauss_col: int
    baseline_col: int | None
    # For each of the 6 nonlinear parameters: (column indices, derivative
    # columns) or None when Jacobians were not requested.
    dphi: list[tuple[np.ndarray, np.ndarray]] | None = None

    @property
    def n_columns(self) -> int:
        return self.phi.shape[1]


def assemble(
    params: NonlinearParams,
    signal: BeatSignal,
    dicts: DictionarySet | None = None,
    include_baseline: bool = True,
    with_jacobian: bool = False,
) -> AssembledSystem:
    """Build the N x 17 system (N x 16 without the baseline column)."""
    if dicts is None:
        dicts = default_dictionaries(signal.t[0])
    grid = signal.t
    blocks = []
    jac_entries: list[tuple[np.ndarray, np.ndarray]] = []
    sig_parts = {}
    col0 = 0
    for wave in (WaveKind.QRS, WaveKind.T, WaveKind.P):
        cfg = dicts[wave]
        lam, tau = params.for_wave(wave)
        cols = build_wave_columns(cfg, lam, tau, grid)
        if cfg.has_sigmoid:
            sig_parts[wave] = cols[:, -1].copy()
            hermite = cols[:, :-1]
        else:
            hermite = cols
        blocks.append(hermite)
        if with_jacobian:
            d_dlam, d_dtau = build_wave_jacobian(cfg, lam, tau, grid)
            idx = np.arange(col0, col0 + cfg.num_hermite)
            if cfg.has_sigmoid:
                # The sigmoid derivative attaches to the merged column; the
                # T-wave sigmoid enters that column with a minus sign.
                sign = 1.0 if wave is not WaveKind.T else -1.0
                idx = np.append(idx, SIGMOID_COL)
                d_dlam = np.column_stack([d_dlam[:, :-1], sign * d_dlam[:, -1]])
                d_dtau = np.column_stack([d_dtau[:, :-1], sign * d_dtau[:, -1]])
            k_lam, k_tau = _WAVE_PARAM_COLS[wave]
            jac_entries.append((k_lam, idx, d_dlam))
            jac_entries.append((k_tau, idx, d_dtau))
        col0 += cfg.num_hermite
    merged = sig_parts[WaveKind.QRS] - sig_parts[WaveKind.T]
    columns = [np.column_stack(blocks), merged[:, None]]
    baseline_idx = None
    if include_baseline:
        columns.append(baseline_column(params, grid, signal.samples)[:, None])
        baseline_idx = BASELINE_COL
    phi = np.column_stack(columns)
    if not np.all(np.isfinite(phi)):
        raise ValueError("assembled dictionary contains non-finite entries")

    dphi = None
    if with_jacobian:
        per_param: list[list[tuple[np.ndarray, np.ndarray]]] = [[] for _ in range(6)]
        for k, idx, mat in jac_entries:
            per_param[k].append((idx, mat))
        if include_baseline:
            bl_jac = baseline_jacobian(params, grid, signal.samples)
            for k in range(4):  # baseline depends on (l_qrs, t_qrs, l_t, t_t)
                per_param[k].append((np.array([BASELINE_COL]), bl_jac[:, k : k + 1]))
        dphi = []
        for k in range(6):
            idx = np.concatenate([e[0] for e in per_param[k]]).astype(int)
            mat = np.column_stack([e[1] for e in per_param[k]])
            dphi.append((idx, mat))

    return AssembledSystem(
        phi=phi,
        sig_qrs=sig_parts[WaveKind.QRS],
        sig_t=sig_parts[WaveKind.T],
        p_gauss_col=P_GAUSS_COL,
        baseline_col=baseline_idx,
        dphi=dphi,
    )


def _rrqr_lstsq(phi: np.ndarray, f: np.ndarray):
    """Basic least-squares solution via column-pivoted QR with rank truncation.

    Returns the coefficients, the numerical rank, and the orthonormal basis
    of the retained column space.
    """
    q, r, perm = scipy.linalg.qr(phi, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = 1e-10 * (diag[0] if diag.size and diag[0] > 0 else 1.0)
    rank = int(np.sum(diag > tol))
    c = np.zeros(phi.shape[1])
    if rank > 0:
        qtf = q[:, :rank].T @ f
        c_perm = scipy.linalg.solve_triangular(r[:rank, :rank], qtf)
        c[perm[:rank]] = c_perm
    return c, rank, q[:, :rank]


def _solve_with_basis(sys: AssembledSystem, f: np.ndarray):
    """Constrained solve plus the orthonormal basis of the active column space."""
    f = np.asarray(f, dtype=float)
    c, rank, basis = _rrqr_lstsq(sys.phi, f)
    deficient = rank < sys.phi.shape[1]
    if c[sys.p_gauss_col] < 0.0:
        keep = np.arange(sys.phi.shape[1]) != sys.p_gauss_col
        c_red, rank_red, basis = _rrqr_lstsq(sys.phi[:, keep], f)
        c = np.zeros(sys.phi.shape[1])
        c[keep] = c_red
        deficient = deficient or rank_red < int(np.sum(keep))
    if deficient:
        warnings.warn("dictionary matrix is rank deficient", RankDeficientWarning, stacklevel=3)
    return c, basis


def solve_coeffs(sys: AssembledSystem, f: np.ndarray) -> np.ndarray:
    """Least-squares coefficients subject to a non-negative P Gaussian.

    Solves min ||f - phi c|| with c[p_gauss_col] >= 0 by a single-constraint
    active set: if the unconstrained solution violates the sign, that
    coefficient is fixed to zero and the reduced system is re-solved.
    """
    c, _ = _solve_with_basis(sys, f)
    return c


def _components(sys: AssembledSystem, c: np.ndarray) -> dict:
    """Per-wave reconstructions; the merged sigmoid splits with opposite signs."""
    c_sig = c[SIGMOID_COL]
    comps = {
        WaveKind.QRS: sys.phi[:, QRS_COLS] @ c[QRS_COLS] + c_sig * sys.sig_qrs,
        WaveKind.T: sys.phi[:, T_COLS] @ c[T_COLS] - c_sig * sys.sig_t,
        WaveKind.P: sys.phi[:, P_COLS] @ c[P_COLS],
    }
    if sys.baseline_col is not None:
        comps["baseline"] = sys.phi[:, sys.baseline_col] * c[sys.baseline_col]
    else:
        comps["baseline"] = np.zeros(sys.phi.shape[0])
    return comps


def residual(
    params: NonlinearParams,
    signal: BeatSignal,
    dicts: DictionarySet | None = None,
    include_baseline: bool = True,
) -> float:
    """VP functional r_2: squared norm of the projection residual."""
    sys = assemble(params, signal, dicts, include_baseline)
    c = solve_coeffs(sys, signal.samples)
    r = signal.samples - sys.phi @ c
    return float(r @ r)


def _gradient_parts(
    params: NonlinearParams,
    signal: BeatSignal,
    dicts: DictionarySet | None,
    include_baseline: bool,
):
    """Residual value, gradient, and the projected model Jacobian.

    The Jacobian columns are (I - P) (d phi / d alpha_k) c: tangent
    directions with their in-span share removed, since the linear solve
    re-absorbs that share (Kaufman form).
    """
    sys = assemble(params, signal, dicts, include_baseline, with_jacobian=True)
    c, basis = _solve_with_basis(sys, signal.samples)
    r = signal.samples - sys.phi @ c
    tangents = np.empty((signal.n, 6))
    for k in range(6):
        idx, mat = sys.dphi[k]
        tangents[:, k] = mat @ c[idx]
    g = -2.0 * (tangents.T @ r)
    tangents -= basis @ (basis.T @ tangents)
    return float(r @ r), g, tangents


def gradient(
    params: NonlinearParams,
    signal: BeatSignal,
    dicts: DictionarySet | None = None,
    include_baseline: bool = True,
) -> np.ndarray:
    """Gradient of r_2 over the six nonlinear parameters.

    Uses d r_2 / d alpha_k = -2 r^T (d phi / d alpha_k) c with r the residual
    vector and c the constrained least-squares coefficients; the baseline
    column's dependence on the QRS/T parameters is included.
    """
    _, g, _ = _gradient_parts(params, signal, dicts, include_baseline)
    return g


@dataclass(eq=False)
class ModelFit:
    """Result of fitting one beat: parameters, coefficients, and reconstructions."""

    params: NonlinearParams
    coeffs: np.ndarray
    residual_sq: float
    components: dict
    iterations: int
    converged: bool
    grid: np.ndarray
    f_s: float
    include_baseline: bool
    dicts: DictionarySet
    objective_trace: list = field(default_factory=list)

    @property
    def baseline(self) -> np.ndarray:
        return self.components["baseline"]

    def reconstruction(self) -> np.ndarray:
        total = self.components["baseline"].copy()
        for wave in (WaveKind.QRS, WaveKind.T, WaveKind.P):
            total += self.components[wave]
        return total

    def wave_reconstruction(self) -> np.ndarray:
        """Sum of the QRS/T/P components, excluding the baseline."""
        return self.reconstruction() - self.components["baseline"]


def evaluate_fit(
    params: NonlinearParams,
    signal: BeatSignal,
    dicts: DictionarySet | None = None,
    include_baseline: bool = True,
    iterations: int = 0,
    converged: bool = True,
) -> ModelFit:
    """Solve the linear subproblem at fixed alpha and package a ModelFit."""
    if dicts is None:
        dicts = default_dictionaries(signal.t[0])
    sys = assemble(params, signal, dicts, include_baseline)
    c = solve_coeffs(sys, signal.samples)
    r = signal.samples - sys.phi @ c
    coeffs = c
    if sys.baseline_col is None:
        coeffs = np.append(c, 0.0)  # keep the 17-slot layout
    return ModelFit(
        params=params,
        coeffs=coeffs,
        residual_sq=float(r @ r),
        components=_components(sys, c),
        iterations=iterations,
        converged=converged,
        grid=signal.t,
        f_s=signal.f_s,
        include_baseline=include_baseline,
        dicts=dicts,
    )


@dataclass(frozen=True)
class OptimizerConfig:
    """Trust-region settings for the per-beat nonlinear fit."""

    max_iters: int = 200
    step_tol: float = 1e-8  # on the bound-scaled step norm
    obj_tol: float = 1e-10  # relative decrease of the penalized objective
    penalty_weight: float | None = None  # None -> 1e3 * ||f||^2 / N
    trust_init: float = 0.1
    trust_max: float = 1.0


def _trust_region_step(g: np.ndarray, b: np.ndarray, radius: float) -> np.ndarray:
    """Exact solution of min g.p + 0.5 p.B.p s.t. ||p|| <= radius for PSD B.

    Solved through the eigendecomposition of the 6x6 model Hessian with a
    bisection on the Levenberg shift; handles the near-singular directions a
    projected Gauss-Newton model produces.
    """
    evals, vecs = np.linalg.eigh(b)
    evals = np.maximum(evals, 0.0)
    gt = vecs.T @ g
    gt2 = gt * gt

    tiny = 1e-14 * max(evals[-1], 1.0)
    shift = tiny
    norm_sq = float(np.sum(gt2 / (evals + shift) ** 2))
    if norm_sq <= radius * radius:
        return -(gt / (evals + shift)) @ vecs.T
    # Newton on the secular equation 1/||p(shift)|| = 1/radius
    for _ in range(60):
        norm_p = np.sqrt(norm_sq)
        if abs(norm_p - radius) <= 1e-10 * radius:
            break
        dnorm_sq = -2.0 * float(np.sum(gt2 / (evals + shift) ** 3))
        dphi = -dnorm_sq / (2.0 * norm_p**3)  # d(1/||p||)/dshift
        shift += (1.0 / radius - 1.0 / norm_p) / dphi
        shift = max(shift, tiny)
        norm_sq = float(np.sum(gt2 / (evals + shift) ** 2))
    return -(gt / (evals + shift)) @ vecs.T


def fit(
    signal: BeatSignal,
    init: NonlinearParams,
    cfg: OptimizerConfig | None = None,
    dicts: DictionarySet | None = None,
    include_baseline: bool = True,
) -> ModelFit:
    """Bound-constrained trust-region descent on the penalized VP functional.

    Steps are clamped to the parameter box, so every returned alpha respects
    the bounds exactly; the sequence of accepted penalized objectives is
    non-increasing. Infeasible trial points (baseline knot collisions) are
    rejected rather than raised.
    """
    if cfg is None:
        cfg = OptimizerConfig()
    if dicts is None:
        dicts = default_dictionaries(signal.t[0])
    lb, ub = dicts.lower_bounds(), dicts.upper_bounds()
    span = ub - lb
    x0 = init.as_array()
    if np.any(x0 < lb) or np.any(x0 > ub):
        raise InfeasibleInit(f"init {x0} outside bounds [{lb}, {ub}]")

    f = signal.samples
    mu = cfg.penalty_weight
    if mu is None:
        mu = 1e3 * float(f @ f) / signal.n

    def penalty_parts(p: NonlinearParams):
        g = ordering_violations(p, signal.n, signal.f_s, signal.t[0])
        viol = np.maximum(g, 0.0)
        return mu * float(viol @ viol), viol

    def objective(z: np.ndarray) -> float:
        p = NonlinearParams.from_array(np.clip(lb + z * span, lb, ub))
        pen, _ = penalty_parts(p)
        return residual(p, signal, dicts, include_baseline) + pen

    def objective_model(z: np.ndarray):
        """Objective, gradient, and Gauss-Newton model Hessian in box coordinates."""
        p = NonlinearParams.from_array(np.clip(lb + z * span, lb, ub))
        r2, g, tangents = _gradient_parts(p, signal, dicts, include_baseline)
        jac = tangents * span[None, :]
        b = 2.0 * jac.T @ jac
        pen, viol = penalty_parts(p)
        if np.any(viol > 0.0):
            jac_con = ordering_violation_jacobian(p, signal.f_s)
            g = g + 2.0 * mu * (viol @ jac_con)
            jac_con_z = jac_con * span[None, :]
            b = b + 2.0 * mu * jac_con_z.T @ jac_con_z
        g_z = g * span
        b += np.eye(6) * max(1e-8 * np.trace(b) / 6.0, 1e-12)
        return r2 + pen, g_z, b

    z = (x0 - lb) / span
    try:
        obj, grad_z, b = objective_model(z)
    except KnotCollision as exc:
        raise InfeasibleInit(f"initial point not evaluable: {exc}") from exc
    radius = cfg.trust_init
    trace = [obj]
    converged = False
    iterations = 0

    for iterations in range(1, cfg.max_iters + 1):
        # coordinates pressed against an active bound are frozen so the
        # trust region is spent on the free subspace
        free = ~(((z <= 1e-12) & (grad_z > 0.0)) | ((z >= 1.0 - 1e-12) & (grad_z < 0.0)))
        if not np.any(free):
            converged = True
            break
        step = np.zeros(6)
        step[free] = _trust_region_step(grad_z[free], b[np.ix_(free, free)], radius)
        z_trial = np.clip(z + step, 0.0, 1.0)
        step_eff = z_trial - z
        step_norm = float(np.linalg.norm(step_eff))
        if step_norm < cfg.step_tol:
            converged = True
            break
        try:
            obj_trial = objective(z_trial)
        except KnotCollision:
            obj_trial = np.inf
        predicted = -(grad_z @ step_eff + 0.5 * step_eff @ b @ step_eff)
        rho = (obj - obj_trial) / predicted if predicted > 0 else -np.inf
        if rho < 0.25:
            radius = 0.25 * max(step_norm, 1e-16)
        elif rho > 0.75 and step_norm > 0.8 * radius:
            radius = min(2.0 * radius, cfg.trust_max)
        if obj_trial < obj and rho > 1e-4:
            try:
                obj_new, grad_new, b_new = objective_model(z_trial)
            except KnotCollision:
                # value was evaluable but the Jacobian stencil crosses a
                # knot boundary; treat the step as infeasible and back off
                radius = 0.25 * max(step_norm, 1e-16)
                continue
            decrease = obj - obj_trial
            z, obj, grad_z, b = z_trial, obj_new, grad_new, b_new
            trace.append(obj)
            if decrease < cfg.obj_tol * max(obj, 1e-300):
                converged = True
                break
        elif radius < 1e-3 * cfg.step_tol:
            converged = True
            break

    best = NonlinearParams.from_array(np.clip(lb + z * span, lb, ub))
    result = evaluate_fit(best, signal, dicts, include_baseline, iterations, converged)
    result.objective_trace = trace
    return result
