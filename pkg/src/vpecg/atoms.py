"""Hermite and sigmoid atom primitives with analytic derivatives.

The Hermite functions are evaluated through a normalized three-term
recurrence that carries the Gaussian weight, so values stay finite for
|t| <= 12 and order j <= 7 where the raw polynomial-times-factorial form
would overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# Per-order argument rescale unifying the effective supports of the
# Hermite family; the bound constraints assume this exact value.
RESCALE_BASE = 1.11

# Highest order used by any wave dictionary.
MAX_HERMITE_ORDER = 7

_PI_M14 = np.pi ** -0.25


def hermite_poly(j: int, t):
    """Physicists' Hermite polynomial h_j(t) by the standard recurrence."""
    if j < 0:
        raise ValueError("order must be non-negative")
    t = np.asarray(t, dtype=float)
    h_prev = np.ones_like(t)
    if j == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * t
    for k in range(1, j):
        h, h_prev = 2.0 * t * h - 2.0 * k * h_prev, h
    return h if h.ndim else float(h)


def _hermite_upto(jmax: int, u: np.ndarray) -> np.ndarray:
    """All orthonormal Hermite functions 0..jmax at u, shape (jmax+1, len(u))."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty((jmax + 1, u.size))
    out[0] = _PI_M14 * np.exp(-0.5 * u * u)
    if jmax >= 1:
        out[1] = np.sqrt(2.0) * u * out[0]
    for j in range(1, jmax):
        out[j + 1] = np.sqrt(2.0 / (j + 1)) * u * out[j] - np.sqrt(j / (j + 1)) * out[j - 1]
    return out


def hermite_fn(j: int, t):
    """Orthonormal Hermite function phi_j(t)."""
    if j < 0:
        raise ValueError("order must be non-negative")
    t = np.asarray(t, dtype=float)
    val = _hermite_upto(j, t)[j]
    return val if t.ndim else float(val[0])


def hermite_fn_deriv(j: int, t):
    """d/dt phi_j(t) via phi_j' = sqrt(j/2) phi_{j-1} - sqrt((j+1)/2) phi_{j+1}."""
    t = np.asarray(t, dtype=float)
    table = _hermite_upto(j + 1, t)
    d = -np.sqrt((j + 1) / 2.0) * table[j + 1]
    if j >= 1:
        d += np.sqrt(j / 2.0) * table[j - 1]
    return d if t.ndim else float(d[0])


def sigmoid(t):
    """Logistic step s(t) = 1 / (1 + exp(-2t)) with fixed inner slope 2."""
    t = np.asarray(t, dtype=float)
    val = expit(2.0 * t)
    return val if t.ndim else float(val)


def sigmoid_deriv(t):
    """d/dt s(t) = 2 s (1 - s)."""
    t = np.asarray(t, dtype=float)
    s = expit(2.0 * t)
    d = 2.0 * s * (1.0 - s)
    return d if t.ndim else float(d)


@dataclass(frozen=True)
class AtomSpec:
    """One parametrized atom: rescaled Hermite function or sigmoid step.

    lam is the dilation (1/s, > 0), tau the translation (s); j is the
    Hermite order and is ignored for sigmoid atoms.
    """

    kind: str  # "hermite" | "sigmoid"
    lam: float
    tau: float
    j: int = 0

    def __post_init__(self):
        if self.kind not in ("hermite", "sigmoid"):
            raise ValueError(f"unknown atom kind {self.kind!r}")
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if self.kind == "hermite" and not 0 <= self.j <= MAX_HERMITE_ORDER:
            raise ValueError(f"hermite order must be in 0..{MAX_HERMITE_ORDER}")


def atom_value(spec: AtomSpec, t):
    """Sampled atom value; Hermite arguments carry the 1.11^j rescale."""
    t = np.asarray(t, dtype=float)
    if spec.kind == "sigmoid":
        return sigmoid(spec.lam * (t - spec.tau))
    u = RESCALE_BASE ** spec.j * spec.lam * (t - spec.tau)
    return hermite_fn(spec.j, u)


def atom_time_deriv(spec: AtomSpec, t):
    """Exact d/dt of atom_value."""
    t = np.asarray(t, dtype=float)
    if spec.kind == "sigmoid":
        return spec.lam * sigmoid_deriv(spec.lam * (t - spec.tau))
    scale = RESCALE_BASE ** spec.j
    u = scale * spec.lam * (t - spec.tau)
    return scale * spec.lam * hermite_fn_deriv(spec.j, u)


def atom_param_derivs(spec: AtomSpec, t):
    """Exact partials (d/dlam, d/dtau) of atom_value by the chain rule."""
    t = np.asarray(t, dtype=float)
    dt = t - spec.tau
    if spec.kind == "sigmoid":
        sp = sigmoid_deriv(spec.lam * dt)
        return sp * dt, -spec.lam * sp
    scale = RESCALE_BASE ** spec.j
    dphi = hermite_fn_deriv(spec.j, scale * spec.lam * dt)
    return scale * dt * dphi, -scale * spec.lam * dphi
