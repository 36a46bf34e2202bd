"""Extremal solutions of the power-law Peano ODE and their time shifts.

Every solution of ``x' = sgn(x)|x|^gamma`` started at the origin has the form
``±H(t - t0)`` with ``H(s) = [(1 - gamma) s^+]^(1 / (1 - gamma))``.  The
functions here evaluate ``H``, its shifts, the envelope shifts used by the
comparison argument, and a brute-force quadrature oracle for the integral
inequalities those envelopes bracket.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Oracle tolerance is QUAD_TOL_CONSTANT * (grid step).  The trapezoid error
# for a Lipschitz-in-time integrand on [0, T] with T <= 10 and f <= 10 stays
# well below this; the constant is conservative on purpose.
QUAD_TOL_CONSTANT = 10.0


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (0.0 <= gamma < 1.0):
        raise ValueError(f"gamma must lie in [0, 1), got {gamma!r}")
    return gamma


def extremal_value(gamma, s):
    """Evaluate ``H_gamma(s) = [(1 - gamma) max(s, 0)]^(1/(1 - gamma))``.

    Accepts scalars or arrays; the positive part is taken before the power so
    that slightly negative arguments produced by rounding are harmless.
    """
    gamma = check_gamma(gamma)
    s_pos = np.maximum(np.asarray(s, dtype=np.float64), 0.0)
    if gamma == 0.0:
        out = s_pos
    else:
        out = ((1.0 - gamma) * s_pos) ** (1.0 / (1.0 - gamma))
    return out[()] if out.ndim == 0 else out


def extremal_derivative(gamma, s):
    """``d/ds H_gamma(s) = H_gamma(s)^gamma`` for ``s > 0`` (zero for ``s <= 0``)."""
    gamma = check_gamma(gamma)
    s_pos = np.maximum(np.asarray(s, dtype=np.float64), 0.0)
    if gamma == 0.0:
        out = (s_pos > 0).astype(np.float64)
    else:
        out = ((1.0 - gamma) * s_pos) ** (gamma / (1.0 - gamma))
    return out[()] if out.ndim == 0 else out


def extremal_shifted(gamma, t, t0, sign: int = 1):
    """``sign * H_gamma(t - t0)``: the extremal solution departing at ``t0``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return sign * extremal_value(gamma, np.asarray(t, dtype=np.float64) - t0)


@dataclass(frozen=True)
class EnvelopeShift:
    """Time shift ``r`` such that ``t -> H_gamma(t - r)`` is an envelope."""

    r: float

    def __float__(self) -> float:
        return float(self.r)


def shift_R(gamma: float, t_bar: float, delta: float) -> EnvelopeShift:
    """Shift making ``H_gamma(t - r)`` solve ``x(t) = delta + int_{t_bar}^t x^gamma``.

    Solving ``H_gamma(t_bar - r) = delta`` gives
    ``r = t_bar - delta^(1 - gamma) / (1 - gamma)``.
    """
    gamma = check_gamma(gamma)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if t_bar < 0:
        raise ValueError(f"t_bar must be nonnegative, got {t_bar!r}")
    return EnvelopeShift(float(t_bar) - delta ** (1.0 - gamma) / (1.0 - gamma))


def shift_R_printed(gamma: float, t_bar: float, delta: float) -> EnvelopeShift:
    """The shift with exponent ``1 + gamma``, kept only for discrepancy reports.

    It does not satisfy the anchoring property ``H(t_bar - r) = delta`` unless
    ``gamma == 0``.
    """
    gamma = check_gamma(gamma)
    return EnvelopeShift(float(t_bar) - delta ** (1.0 + gamma) / (1.0 - gamma))


def envelope_value(gamma, shift: EnvelopeShift, t):
    return extremal_value(gamma, np.asarray(t, dtype=np.float64) - float(shift))


@dataclass(frozen=True)
class ComparisonVerdict:
    """Per-grid-point result of :func:`comparison_oracle`.

    ``lower[i]`` holds when ``f(t_i) >= delta + int f^gamma - tol`` and
    ``upper[i]`` when ``f(t_i) <= delta + int f^gamma + tol``.
    """

    t: np.ndarray
    integral: np.ndarray
    residual: np.ndarray  # f - (delta + integral)
    lower: np.ndarray
    upper: np.ndarray
    tol: float

    @property
    def neither(self) -> np.ndarray:
        return ~(self.lower | self.upper)


def comparison_oracle(gamma, t_bar, delta, f, t_end, tol=None) -> ComparisonVerdict:
    """Check the integral inequalities ``f(t) >=/<= delta + int_{t_bar}^t f^gamma``.

    ``f`` holds samples on the uniform grid ``linspace(t_bar, t_end, len(f))``.
    The integral is accumulated with the trapezoid rule; ``tol`` defaults to
    ``QUAD_TOL_CONSTANT * step``.
    """
    gamma = check_gamma(gamma)
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("f must be a nonempty 1-d sample")
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ValueError("f must be finite and nonnegative")
    if f.size == 1:
        step = 0.0
        t = np.array([float(t_bar)])
    else:
        step = (t_end - t_bar) / (f.size - 1)
        if not step > 0:
            raise ValueError("grid step must be positive")
        t = np.linspace(t_bar, t_end, f.size)
    g = f**gamma if gamma > 0 else np.ones_like(f)
    integral = np.zeros_like(f)
    integral[1:] = np.cumsum(0.5 * step * (g[1:] + g[:-1]))
    if tol is None:
        tol = QUAD_TOL_CONSTANT * step
    residual = f - (delta + integral)
    return ComparisonVerdict(
        t=t,
        integral=integral,
        residual=residual,
        lower=residual >= -tol,
        upper=residual <= tol,
        tol=float(tol),
    )
