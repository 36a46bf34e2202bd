"""Explicit constants of the selection theorem for both drift regimes.

For ``gamma = 0`` the tube is ``||X_t| - t| <= h`` with ``h = eps^a``,
``t_bar = 2h`` and failure probability ``alpha = 2 eps^(2(1-a)) T``.  For
``gamma > 0`` a mollification radius ``delta`` balances the convexity gain
against the drift loss near the origin, and the tube comes from two shifted
extremal envelopes.  Parameter sets where ``t_bar > T`` or ``alpha >= 1``
are reported as vacuous rather than rejected.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .trajectories import (EnvelopeShift, check_gamma, extremal_value, shift_R,
                           shift_R_printed)


@dataclass(frozen=True)
class TheoremParams:
    gamma: float
    epsilon: float
    a: float
    T: float
    eta: float
    delta: float  # 0.0 for gamma = 0
    c1: float  # 0.0 for gamma = 0
    t_bar: float
    alpha: float
    alpha_paper_variant: float
    h: float
    r_lower: EnvelopeShift
    r_upper: EnvelopeShift
    r_lower_paper_variant: EnvelopeShift

    @property
    def informative_t_bar(self) -> bool:
        return self.t_bar <= self.T

    @property
    def informative_alpha(self) -> bool:
        return self.alpha < 1.0

    @property
    def informative_h(self) -> bool:
        return bool(self.h < extremal_value(self.gamma, self.T))

    @property
    def informative(self) -> bool:
        return self.informative_t_bar and self.informative_alpha and self.informative_h

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("r_lower", "r_upper", "r_lower_paper_variant"):
            d[k] = float(getattr(self, k))
        d["informative_t_bar"] = self.informative_t_bar
        d["informative_alpha"] = self.informative_alpha
        d["informative_h"] = self.informative_h
        return d

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_dict().items())

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def doob_event_bound(epsilon: float, a: float, T: float) -> float:
    """``2 eps^2 T / eta^2`` with ``eta = eps^a``: bound on the union of both deviation events."""
    return 2.0 * T * epsilon ** (2.0 * (1.0 - a))


def balance_constant(gamma: float) -> float:
    return 2.0 ** ((gamma - 2.0) / (1.0 + gamma))


def balance_delta(gamma: float, epsilon: float) -> float:
    """Closed-form root of ``3 eps^2/(8 delta) - delta^g/2^g = delta^g/2^(g+1)``."""
    return balance_constant(gamma) * epsilon ** (2.0 / (1.0 + gamma))


def selection_time(gamma: float, epsilon: float, a: float, delta: float) -> float:
    return 2.0 ** (gamma + 1.0) * (2.0 * delta + 2.0 * epsilon**a) / delta**gamma


def tube_halfwidth(gamma: float, r_lower: EnvelopeShift, r_upper: EnvelopeShift,
                   T: float) -> float:
    """``max_{0<=t<=T}`` of the two envelope gaps, evaluated at ``t = T``.

    ``H`` is convex and nondecreasing, so ``|H(t) - H(t - r)|`` is
    nondecreasing in ``t`` for either sign of ``r``.
    """
    hT = extremal_value(gamma, T)
    return float(max(abs(hT - extremal_value(gamma, T - float(r_lower))),
                     abs(hT - extremal_value(gamma, T - float(r_upper)))))


def tube_halfwidth_grid(gamma, r_lower, r_upper, T, n=100_001) -> float:
    t = np.linspace(0.0, T, n)
    ht = extremal_value(gamma, t)
    g1 = np.abs(ht - extremal_value(gamma, t - float(r_lower)))
    g2 = np.abs(ht - extremal_value(gamma, t - float(r_upper)))
    return float(max(g1.max(), g2.max()))


def params_gamma0(epsilon: float, a: float, T: float) -> TheoremParams:
    if not (0 < a < 1):
        raise ValueError(f"a must lie in (0, 1), got {a!r}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    h = epsilon**a
    alpha = doob_event_bound(epsilon, a, T)
    # envelopes t - h and t + h reproduce the tube ||X_t| - t| <= h
    return TheoremParams(
        gamma=0.0, epsilon=float(epsilon), a=float(a), T=float(T), eta=h, delta=0.0, c1=0.0,
        t_bar=2.0 * h, alpha=alpha, alpha_paper_variant=alpha, h=h,
        r_lower=EnvelopeShift(h), r_upper=EnvelopeShift(-h),
        r_lower_paper_variant=EnvelopeShift(h),
    )


def params_gamma_pos(gamma: float, epsilon: float, a: float, T: float) -> TheoremParams:
    gamma = check_gamma(gamma)
    if gamma == 0:
        raise ValueError("use params_gamma0 for gamma = 0")
    lo = 2 * gamma / (1 + gamma)
    if not (lo < a < 1):
        raise ValueError(f"a must lie in ({lo:g}, 1) for gamma={gamma:g}, got {a!r}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    eta = epsilon**a
    delta = balance_delta(gamma, epsilon)
    t_bar = selection_time(gamma, epsilon, a, delta)
    r_lower = shift_R(gamma, t_bar, delta)
    r_upper = shift_R(gamma, 0.0, eta)
    return TheoremParams(
        gamma=gamma, epsilon=float(epsilon), a=float(a), T=float(T), eta=eta, delta=delta,
        c1=balance_constant(gamma), t_bar=t_bar,
        alpha=doob_event_bound(epsilon, a, T),
        alpha_paper_variant=2.0 * T * epsilon ** (2.0 - a),
        h=tube_halfwidth(gamma, r_lower, r_upper, T),
        r_lower=r_lower, r_upper=r_upper,
        r_lower_paper_variant=shift_R_printed(gamma, t_bar, delta),
    )


def theorem_params(gamma: float, epsilon: float, a: float, T: float) -> TheoremParams:
    if gamma == 0:
        return params_gamma0(epsilon, a, T)
    return params_gamma_pos(gamma, epsilon, a, T)


def max_stable_dt(gamma: float, epsilon: float) -> float:
    """Largest step satisfying ``dt <= eps^2`` and, for gamma > 0, ``eps sqrt(dt) <= delta/10``."""
    dt = epsilon**2
    if gamma > 0 and epsilon > 0:
        dt = min(dt, (balance_delta(gamma, epsilon) / (10.0 * epsilon)) ** 2)
    return dt


@dataclass(frozen=True)
class VacuityReport:
    """Where the explicit constants start to carry information.

    ``eps_t_bar`` is the largest ``eps`` with ``t_bar <= T``; ``eps_alpha``
    the largest with ``alpha < 1``; ``dt_required`` the step size the
    resolution rule demands at ``min(eps_t_bar, eps_alpha)``.
    """

    gamma: float
    a: float
    T: float
    eps_t_bar: float
    eps_alpha: float
    eps_informative: float
    dt_required: float

    def as_dict(self) -> dict:
        return asdict(self)


def vacuity_report(gamma: float, a: float, T: float) -> VacuityReport:
    theorem_params(gamma, 0.1, a, T)  # validates the exponent range

    def log_tbar_gap(log_eps):
        # log t_bar - log T, in log space so tiny eps does not underflow
        if gamma == 0:
            return math.log(2.0) + a * log_eps - math.log(T)
        log_delta = math.log(balance_constant(gamma)) + 2.0 / (1.0 + gamma) * log_eps
        return ((gamma + 2.0) * math.log(2.0) + np.logaddexp(log_delta, a * log_eps)
                - gamma * log_delta - math.log(T))

    # t_bar and alpha are increasing power laws in eps
    lo, hi = -1e5, math.log(1e6)
    log_eps_t = lo if log_tbar_gap(lo) > 0 else brentq(log_tbar_gap, lo, hi, xtol=1e-12)
    eps_t = math.exp(log_eps_t)  # 0.0 when below the smallest double
    eps_a = (1.0 / (2.0 * T)) ** (1.0 / (2.0 * (1.0 - a)))
    eps_i = min(eps_t, eps_a)
    return VacuityReport(gamma=float(gamma), a=float(a), T=float(T), eps_t_bar=eps_t,
                         eps_alpha=eps_a, eps_informative=eps_i,
                         dt_required=max_stable_dt(gamma, eps_i))
