"""Euler-Maruyama simulation of ``dX = sgn(X)|X|^gamma dt + eps dW``, ``X_0 = 0``.

Alongside the state the simulator accumulates, with left-point (Ito) sums,
the Brownian path, the martingales ``int sgn(X) dW`` and ``int |X|'_delta dW``
and the occupation time ``int 1{X != 0} ds``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from . import rng
from .mollifier import d1_scalar, smoothed_abs
from .trajectories import check_gamma

log = logging.getLogger(__name__)

CSV_HEADER = "t,x,w,m_sgn,m_moll,occupation"


class NonFiniteStateError(FloatingPointError):
    """The scheme produced inf/NaN; the step size is too large for the drift."""


@dataclass(frozen=True)
class SimConfig:
    """Experiment parameters.  ``a`` is the deviation exponent (``eta = eps^a``)."""

    gamma: float = 0.0
    epsilon: float = 0.05
    a: float = 0.5
    T: float = 1.0
    dt: float = 1e-4
    n_paths: int = 1000
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        check_gamma(self.gamma)
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be finite and nonnegative")
        if not (self.T > 0 and self.dt > 0):
            raise ValueError("T and dt must be positive")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic mode needs an even number of paths")
        lo = 2 * self.gamma / (1 + self.gamma)
        if not (lo < self.a < 1) or (self.gamma == 0 and not self.a > 0):
            raise ValueError(f"a must lie in ({lo:g}, 1) for gamma={self.gamma:g}, got {self.a!r}")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.T / self.dt - 1e-9))

    @property
    def partial_last_step(self) -> bool:
        return not math.isclose(self.n_steps * self.dt, self.T, rel_tol=1e-9)

    def step_sizes(self) -> np.ndarray:
        n = self.n_steps
        dts = np.full(n, float(self.dt))
        dts[-1] = self.T - (n - 1) * self.dt
        return dts

    def step_size_warnings(self, delta: float | None = None) -> list[str]:
        """Rule-of-thumb resolution checks; empty when the step is fine enough."""
        out = []
        if self.epsilon > 0 and self.dt > self.epsilon**2:
            out.append(f"dt={self.dt:g} exceeds eps^2={self.epsilon**2:g}")
        if self.gamma > 0 and delta and self.epsilon * math.sqrt(self.dt) > delta / 10:
            out.append(
                f"noise per step eps*sqrt(dt)={self.epsilon * math.sqrt(self.dt):g} "
                f"exceeds delta/10={delta / 10:g}"
            )
        if self.partial_last_step:
            out.append("T/dt is not an integer; last step is partial")
        return out

    def replace(self, **changes) -> "SimConfig":
        d = asdict(self)
        d.update(changes)
        return SimConfig(**d)


@dataclass
class PathSample:
    times: np.ndarray
    x: np.ndarray
    w: np.ndarray
    m_sgn: np.ndarray
    m_moll: np.ndarray
    occupation: np.ndarray
    delta: float
    path_index: int = 0
    meta: dict = field(default_factory=dict)

    def to_csv(self, fh) -> None:
        fh.write(CSV_HEADER + "\n")
        cols = (self.times, self.x, self.w, self.m_sgn, self.m_moll, self.occupation)
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


@numba.njit(cache=True)
def _euler_kernel(dw, dts, gamma, eps, delta, x0, t, x, w, m_sgn, m_moll, occ):
    t[0] = 0.0
    x[0] = x0
    w[0] = 0.0
    m_sgn[0] = 0.0
    m_moll[0] = 0.0
    occ[0] = 0.0
    for k in range(dw.size):
        xk = x[k]
        if xk > 0.0:
            s = 1.0
        elif xk < 0.0:
            s = -1.0
        else:
            s = 0.0
        if gamma == 0.0 or s == 0.0:
            drift = s
        else:
            drift = s * abs(xk) ** gamma
        h = dts[k]
        dwk = dw[k]
        xn = xk + drift * h + eps * dwk
        if not np.isfinite(xn):
            return k + 1
        x[k + 1] = xn
        t[k + 1] = t[k] + h
        w[k + 1] = w[k] + dwk
        m_sgn[k + 1] = m_sgn[k] + s * dwk
        m_moll[k + 1] = m_moll[k] + d1_scalar(xk, delta) * dwk
        occ[k + 1] = occ[k] + (h if s != 0.0 else 0.0)
    return -1


def integrate_increments(dw, dts, gamma, epsilon, delta, x0=0.0, path_index=0) -> PathSample:
    """Run the scheme on given Brownian increments ``dw`` with steps ``dts``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    dw = np.ascontiguousarray(dw, dtype=np.float64)
    dts = np.ascontiguousarray(dts, dtype=np.float64)
    n = dw.size + 1
    t, x, w, ms, mm, occ = (np.empty(n) for _ in range(6))
    bad = _euler_kernel(dw, dts, float(gamma), float(epsilon), float(delta), float(x0),
                        t, x, w, ms, mm, occ)
    if bad >= 0:
        raise NonFiniteStateError(
            f"path {path_index}: non-finite state at step {bad}; reduce dt"
        )
    return PathSample(t, x, w, ms, mm, occ, float(delta), int(path_index))


def path_increments(config: SimConfig, path_index: int) -> np.ndarray:
    """Brownian increments of one path (antithetic pairs share a stream)."""
    if config.antithetic:
        base, flip = divmod(path_index, 2)
    else:
        base, flip = path_index, 0
    z = rng.standard_normals(config.seed, base, config.n_steps)
    dw = np.sqrt(config.step_sizes()) * z
    return -dw if flip else dw


def simulate_path(config: SimConfig, delta: float, path_index: int, x0: float = 0.0) -> PathSample:
    """Simulate one path.

    ``x0 != 0`` is a diagnostic mode for validating the scheme; the problem
    itself always starts at the origin.
    """
    dw = path_increments(config, path_index)
    return integrate_increments(dw, config.step_sizes(), config.gamma, config.epsilon, delta,
                                x0=x0, path_index=path_index)


def tanaka_residual(path: PathSample, config: SimConfig) -> np.ndarray:
    """Discrete local time ``|X_t| - int 1{X != 0} ds - eps int sgn(X) dW``.

    In the scheme ``|X_{k+1}| - |X_k| >= sgn(X_k)(X_{k+1} - X_k)``, so the
    residual is nonnegative and nondecreasing up to rounding.
    """
    if config.gamma != 0:
        raise ValueError("the Tanaka residual identity is for gamma = 0 only")
    return np.abs(path.x) - path.occupation - config.epsilon * path.m_sgn


def rounding_slack(path: PathSample, epsilon: float) -> float:
    """Absolute slack for checks that hold exactly in exact arithmetic."""
    scale = path.times[-1] + epsilon * np.max(np.abs(path.w)) + np.max(np.abs(path.x))
    return 64 * np.finfo(float).eps * (1.0 + scale) * math.sqrt(path.x.size)


def abs_upper_margin(path: PathSample, epsilon: float) -> float:
    """min over the grid of ``t + eps|W_t| - |X_t|`` (gamma = 0 upper bound)."""
    return float(np.min(path.times + epsilon * np.abs(path.w) - np.abs(path.x)))


def abs_lower_margin(path: PathSample, epsilon: float) -> float:
    """min over the grid of ``|X_t| - (occ_t - eps|m_sgn_t|)`` (gamma = 0 lower bound)."""
    return float(np.min(np.abs(path.x) - path.occupation + epsilon * np.abs(path.m_sgn)))


def lower_bound_margins(path: PathSample, gamma: float, epsilon: float) -> np.ndarray:
    """``|X_t|_delta - (delta^gamma / 2^(gamma+1)) t + eps |m_moll_t|`` on the grid."""
    rate = path.delta**gamma / 2.0 ** (gamma + 1)
    return smoothed_abs(path.x, path.delta) - rate * path.times + epsilon * np.abs(path.m_moll)


def pathwise_lower_bound_check(path: PathSample, params) -> float:
    """Worst margin of the running lower bound for ``|X_t|_delta`` (gamma > 0)."""
    if params.gamma <= 0:
        raise ValueError("the mollified lower bound is stated for gamma > 0")
    if not math.isclose(path.delta, params.delta, rel_tol=1e-12):
        raise ValueError("path was simulated with a different delta")
    return float(np.min(lower_bound_margins(path, params.gamma, params.epsilon)))


@dataclass(frozen=True)
class ToleranceCalibration:
    """Discretization tolerance from matched paths at ``dt`` and ``dt/2``.

    ``tol = q / (1 - 2^-order)`` where ``q`` is the ``quantile`` of the
    per-path difference between the worst coarse and worst refined margins;
    the factor extrapolates the coarse error assuming strong order ``order``.
    """

    dt: float
    dt_fine: float
    n_paths: int
    order: float
    quantile: float
    diff_quantile: float
    tol: float
    violations_coarse: int
    violations_fine: int

    def as_dict(self) -> dict:
        return asdict(self)


def calibrate_lower_bound_tol(config: SimConfig, params, n_paths: int = 64,
                              quantile: float = 0.99, order: float = 0.5) -> ToleranceCalibration:
    """Calibrate ``tol(dt)`` for :func:`pathwise_lower_bound_check`.

    Uses the first ``n_paths`` paths of ``config``; each is re-simulated on a
    grid refined by Brownian-bridge midpoints so both levels share the same
    Brownian motion.  Violation counts (margin < 0) at both levels are
    recorded for the refinement-monotonicity diagnostic.
    """
    if params.gamma <= 0:
        raise ValueError("calibration targets the gamma > 0 lower bound")
    dts = config.step_sizes()
    n = min(n_paths, config.n_paths)
    diffs = np.empty(n)
    v_coarse = v_fine = 0
    for p in range(n):
        dw = path_increments(config, p)
        coarse = integrate_increments(dw, dts, config.gamma, config.epsilon, params.delta,
                                      path_index=p)
        fdw, fdts = rng.refine_increments(dw, dts, config.seed, p)
        fine = integrate_increments(fdw, fdts, config.gamma, config.epsilon, params.delta,
                                    path_index=p)
        mc = lower_bound_margins(coarse, config.gamma, config.epsilon)
        mf = lower_bound_margins(fine, config.gamma, config.epsilon)
        diffs[p] = abs(mc.min() - mf.min())
        v_coarse += int(mc.min() < 0)
        v_fine += int(mf.min() < 0)
    q = float(np.quantile(diffs, quantile))
    return ToleranceCalibration(
        dt=float(config.dt),
        dt_fine=float(config.dt) / 2,
        n_paths=n,
        order=order,
        quantile=quantile,
        diff_quantile=q,
        tol=q / (1.0 - 2.0**-order),
        violations_coarse=v_coarse,
        violations_fine=v_fine,
    )
