"""Mollified absolute value ``|x|_delta`` built from a C^2 plateau kernel.

The kernel is ``rho = psi / Z`` with ``psi = 1`` on ``[-1/2, 1/2]``, a quintic
smoothstep shoulder decaying to zero on ``1/2 <= |u| <= 3/4`` and ``psi = 0``
beyond.  Because the shoulder is polynomial, the CDF and the convolution
``|x|_delta = int rho(u) |x - delta u| du`` have exact closed forms, so every
derivative used by the simulator is evaluated without quadrature.

Scalar kernels are numba-compiled and reused inside the path simulator; the
public functions are ufuncs built from the same scalar code.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

PLATEAU_HALF_WIDTH = 0.5
SHOULDER_WIDTH = 0.25
SUPPORT_HALF_WIDTH = PLATEAU_HALF_WIDTH + SHOULDER_WIDTH

# int_0^1 S(s) ds = 1/2 for the smoothstep S(s) = 10 s^3 - 15 s^4 + 6 s^5,
# so each shoulder carries mass SHOULDER_WIDTH / 2.
NORMALIZATION = 2.0 * PLATEAU_HALF_WIDTH + SHOULDER_WIDTH  # = 1.25
_INV_Z = 1.0 / NORMALIZATION

# int_0^inf u psi(u) du, closed form: 1/8 + (1/8) G(1) + (1/16) J(1)
_G1 = 0.5
_J1 = 0.5 - (6.0 / 7.0 - 2.5 + 2.0)
_HALF_MOMENT = 0.125 + 0.125 * _G1 + 0.0625 * _J1


@numba.njit(cache=True)
def _shoulder_psi(s):
    # 1 - S(s) on s in [0, 1]
    return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


@numba.njit(cache=True)
def _shoulder_G(s):
    # int_0^s (1 - S)
    s4 = s * s * s * s
    return s - s4 * (2.5 + s * (-3.0 + s))


@numba.njit(cache=True)
def _shoulder_J(s):
    # int_0^s sigma (1 - S(sigma)) d sigma
    s5 = s * s * s * s * s
    return 0.5 * s * s - s5 * (2.0 + s * (-2.5 + s * (6.0 / 7.0)))


@numba.njit(cache=True)
def density_scalar(u):
    a = abs(u)
    if a <= 0.5:
        return _INV_Z
    if a >= 0.75:
        return 0.0
    return _INV_Z * _shoulder_psi((a - 0.5) * 4.0)


@numba.njit(cache=True)
def _mass_from_zero(a):
    # int_0^a psi, a >= 0
    if a <= 0.5:
        return a
    if a >= 0.75:
        return 0.625
    return 0.5 + 0.25 * _shoulder_G((a - 0.5) * 4.0)


@numba.njit(cache=True)
def _moment_from_zero(a):
    # int_0^a u psi(u) du, a >= 0
    if a <= 0.5:
        return 0.5 * a * a
    if a >= 0.75:
        return _HALF_MOMENT
    s = (a - 0.5) * 4.0
    return 0.125 + 0.125 * _shoulder_G(s) + 0.0625 * _shoulder_J(s)


@numba.njit(cache=True)
def cdf_scalar(u):
    if u <= -0.75:
        return 0.0
    if u >= 0.75:
        return 1.0
    m = _mass_from_zero(abs(u)) * _INV_Z
    return 0.5 + m if u >= 0.0 else 0.5 - m


@numba.njit(cache=True)
def smoothed_abs_unit(v):
    """``int rho(u) |v - u| du`` (the ``delta = 1`` convolution)."""
    a = abs(v)
    if a >= 0.75:
        return a
    # v (2F(v) - 1) - 2 (M(v) - M(inf)) with M the first-moment function
    return a * 2.0 * _mass_from_zero(a) * _INV_Z - 2.0 * (
        _moment_from_zero(a) - _HALF_MOMENT
    ) * _INV_Z


@numba.njit(cache=True)
def d1_scalar(x, delta):
    # 2 F(u) - 1 written via the mass from zero so it is exactly odd
    u = x / delta
    if u >= 0.75:
        return 1.0
    if u <= -0.75:
        return -1.0
    m = 2.0 * _mass_from_zero(abs(u)) * _INV_Z
    return m if u >= 0.0 else -m


@numba.njit(cache=True)
def d2_scalar(x, delta):
    return 2.0 * density_scalar(x / delta) / delta


@numba.njit(cache=True)
def smoothed_abs_scalar(x, delta):
    return delta * smoothed_abs_unit(x / delta)


_kernel_density = numba.vectorize(["float64(float64)"], cache=True)(
    lambda u: density_scalar(u)
)
_kernel_cdf = numba.vectorize(["float64(float64)"], cache=True)(lambda u: cdf_scalar(u))
_smoothed_abs = numba.vectorize(["float64(float64, float64)"], cache=True)(
    lambda x, d: smoothed_abs_scalar(x, d)
)
_smoothed_abs_d1 = numba.vectorize(["float64(float64, float64)"], cache=True)(
    lambda x, d: d1_scalar(x, d)
)
_smoothed_abs_d2 = numba.vectorize(["float64(float64, float64)"], cache=True)(
    lambda x, d: d2_scalar(x, d)
)


def _scalarize(out):
    return out[()] if isinstance(out, np.ndarray) and out.ndim == 0 else out


def _check_delta(delta):
    if not np.all(np.asarray(delta) > 0):
        raise ValueError("delta must be positive")


def kernel_density(u):
    return _scalarize(_kernel_density(np.asarray(u, dtype=np.float64)))


def kernel_cdf(u):
    return _scalarize(_kernel_cdf(np.asarray(u, dtype=np.float64)))


def smoothed_abs(x, delta):
    """Closed-form value of ``(1/delta) int rho(y/delta) |x - y| dy``."""
    _check_delta(delta)
    return _scalarize(_smoothed_abs(np.asarray(x, dtype=np.float64), delta))


def smoothed_abs_d1(x, delta):
    """First derivative ``2 F(x/delta) - 1``; odd, in ``[-1, 1]``."""
    _check_delta(delta)
    return _scalarize(_smoothed_abs_d1(np.asarray(x, dtype=np.float64), delta))


def smoothed_abs_d2(x, delta):
    """Second derivative ``2 rho(x/delta) / delta``; nonnegative."""
    _check_delta(delta)
    return _scalarize(_smoothed_abs_d2(np.asarray(x, dtype=np.float64), delta))


@dataclass(frozen=True)
class MollifierKernel:
    plateau_half_width: float = PLATEAU_HALF_WIDTH
    support_half_width: float = SUPPORT_HALF_WIDTH
    normalization: float = NORMALIZATION

    @property
    def plateau_value(self) -> float:
        return 1.0 / self.normalization

    @property
    def abs_moment(self) -> float:
        """``int |u| rho(u) du``, equal to ``|0|_delta / delta``."""
        return 2.0 * _HALF_MOMENT / self.normalization


KERNEL = MollifierKernel()


@dataclass(frozen=True)
class SmoothedAbs:
    delta: float
    kernel: MollifierKernel = KERNEL

    def __post_init__(self):
        _check_delta(self.delta)

    def __call__(self, x):
        return smoothed_abs(x, self.delta)

    def d1(self, x):
        return smoothed_abs_d1(x, self.delta)

    def d2(self, x):
        return smoothed_abs_d2(x, self.delta)


@dataclass(frozen=True)
class BoundReport:
    """Worst margin of each inequality; a margin ``>= 0`` means it holds."""

    delta: float
    n_points: int
    gap: float  # delta - ||x| - |x|_delta|
    d1_abs: float  # 1 - |d1|
    d2_nonneg: float  # d2
    d1_half: float  # d1 sgn(x) - 1/2 on |x| >= delta/2
    d1_full: float  # d1 sgn(x) - 1 on |x| >= delta (equality expected)
    d2_plateau: float  # d2 - 3/(4 delta) on |x| <= delta/2
    gap_argmax: float  # location of the largest | |x| - |x|_delta |

    def margins(self) -> dict[str, float]:
        return {
            "gap": self.gap,
            "d1_abs": self.d1_abs,
            "d2_nonneg": self.d2_nonneg,
            "d1_half": self.d1_half,
            "d1_full": self.d1_full,
            "d2_plateau": self.d2_plateau,
        }

    def ok(self, atol: float = 1e-12) -> bool:
        return all(m >= -atol for m in self.margins().values())


def verify_mollifier_bounds(delta: float, grid_points: int = 10_000, n_random: int = 10_000,
                            seed: int = 0) -> BoundReport:
    """Evaluate the smoothed-absolute-value inequalities on a grid plus random points.

    Points cover ``[-2 delta, 2 delta]``.  Margins are scaled so that each is
    dimensionless relative to its natural size (``delta`` for values, 1 for
    first derivatives, ``1/delta`` for second derivatives); a margin
    ``>= -1e-12`` means the inequality holds up to rounding.
    """
    if grid_points < 100:
        raise ValueError("grid_points must be at least 100")
    _check_delta(delta)
    rng = np.random.default_rng(seed)
    x = np.concatenate(
        [
            np.linspace(-2 * delta, 2 * delta, grid_points),
            rng.uniform(-2 * delta, 2 * delta, n_random),
            delta * np.array([-1.0, -0.5, 0.0, 0.5, 1.0]),
        ]
    )
    v = smoothed_abs(x, delta)
    d1 = smoothed_abs_d1(x, delta)
    d2 = smoothed_abs_d2(x, delta)
    gap = np.abs(np.abs(x) - v)
    sgn = np.sign(x)
    half = np.abs(x) >= delta / 2
    full = np.abs(x) >= delta
    plat = np.abs(x) <= delta / 2
    return BoundReport(
        delta=float(delta),
        n_points=int(x.size),
        gap=float(np.min(delta - gap) / delta),
        d1_abs=float(np.min(1.0 - np.abs(d1))),
        d2_nonneg=float(np.min(d2) * delta),
        d1_half=float(np.min(d1[half] * sgn[half] - 0.5)),
        d1_full=float(np.min(d1[full] * sgn[full] - 1.0)),
        d2_plateau=float(np.min(d2[plat] - 3.0 / (4.0 * delta)) * delta),
        gap_argmax=float(x[np.argmax(gap)]),
    )
