"""Named pass/fail checks shared by the ``verify`` and ``selftest`` commands."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect

from . import bounds, mollifier, sde
from .experiments import event_frequency_check
from .trajectories import comparison_oracle, envelope_value, extremal_value, shift_R


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail}"

    def as_dict(self) -> dict:
        return {"name": self.name, "ok": bool(self.ok), "detail": self.detail}


def mollifier_checks(deltas=(1.0, 1e-3, 1e-6), atol=1e-12) -> list[Check]:
    out = []
    for d in deltas:
        rep = mollifier.verify_mollifier_bounds(d, 10_000, 10_000)
        worst = min(rep.margins().values())
        out.append(Check(f"mollifier bounds delta={d:g}", rep.ok(atol),
                         f"worst margin {worst:.3e}"))
    return out


def admissible_function(gamma, t_bar, delta, t_end, rng, upper=False, n=2001):
    """Sample a function satisfying the lower (or upper) integral inequality.

    Lower: ``f' = f^gamma + k(t)``, ``f(t_bar) = delta (1 + c)`` with random
    ``k, c >= 0``.  Upper: ``f' = (1 - theta(t)) f^gamma``,
    ``f(t_bar) = delta (1 - c)`` with ``theta`` in [0, 1].
    """
    knots = np.sort(rng.uniform(t_bar, t_end, 4))
    levels = rng.uniform(0.0, 1.0, 5)
    c = rng.uniform(0.0, 0.5)

    def piece(t):
        return levels[np.searchsorted(knots, t)]

    if upper:
        f0 = delta * (1 - c)
        rhs = lambda t, y: [(1 - piece(t)) * max(y[0], 0.0) ** gamma]
    else:
        f0 = delta * (1 + c)
        rhs = lambda t, y: [max(y[0], 0.0) ** gamma + piece(t)]
    t = np.linspace(t_bar, t_end, n)
    sol = solve_ivp(rhs, (t_bar, t_end), [f0], t_eval=t, rtol=1e-11, atol=1e-13,
                    max_step=(t_end - t_bar) / 200)
    return t, np.maximum(sol.y[0], 0.0)


def comparison_checks(n_cases=100, seed=0) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst_anchor = 0.0
    bad_bracket = 0
    bad_oracle = 0
    for _ in range(n_cases):
        gamma = rng.uniform(0.0, 0.95)
        t_bar = rng.uniform(0.0, 1.0)
        delta = rng.uniform(0.05, 1.0)
        t_end = t_bar + rng.uniform(0.5, 2.0)
        r = shift_R(gamma, t_bar, delta)
        anchor = extremal_value(gamma, t_bar - r.r)
        worst_anchor = max(worst_anchor, abs(anchor - delta) / delta)
        for upper in (False, True):
            t, f = admissible_function(gamma, t_bar, delta, t_end, rng, upper=upper)
            v = comparison_oracle(gamma, t_bar, delta, f, t_end)
            holds = v.upper if upper else v.lower
            bad_oracle += int(not holds.all())
            env = envelope_value(gamma, r, t)
            if upper:
                bad_bracket += int(np.any(f > env + v.tol))
            else:
                bad_bracket += int(np.any(f < env - v.tol))
    return [
        Check("envelope anchoring H(t_bar - R) = delta", worst_anchor <= 1e-12,
              f"worst relative error {worst_anchor:.2e} over {n_cases} cases"),
        Check("comparison oracle accepts admissible f", bad_oracle == 0,
              f"{bad_oracle} rejections over {2 * n_cases} functions"),
        Check("envelope brackets admissible f", bad_bracket == 0,
              f"{bad_bracket} bracket failures over {2 * n_cases} functions"),
    ]


def balance_equation(gamma, epsilon, delta):
    return (3 * epsilon**2 / (8 * delta) - delta**gamma / 2**gamma
            - delta**gamma / 2 ** (gamma + 1))


def balance_checks(n_cases=100, seed=1) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        gamma = rng.uniform(0.01, 0.99)
        eps = 10 ** rng.uniform(-4, 0)
        closed = bounds.balance_delta(gamma, eps)
        # bisection in log(delta); the residual is decreasing in delta
        root = math.exp(bisect(lambda ld: balance_equation(gamma, eps, math.exp(ld)),
                               math.log(closed) - 5, math.log(closed) + 5, xtol=1e-15,
                               rtol=4 * np.finfo(float).eps, maxiter=500))
        worst = max(worst, abs(root - closed) / closed)
    return [Check("balance equation closed form vs bisection", worst <= 1e-12,
                  f"worst relative error {worst:.2e} over {n_cases} cases")]


def tanaka_checks(n_paths=20, seed=3) -> list[Check]:
    cfg = sde.SimConfig(gamma=0.0, epsilon=0.2, a=0.5, T=0.5, dt=1e-3, n_paths=n_paths, seed=seed)
    worst_min = math.inf
    worst_drop = -math.inf
    ok = True
    for p in range(n_paths):
        path = sde.simulate_path(cfg, 0.1, p)
        lt = sde.tanaka_residual(path, cfg)
        slack = sde.rounding_slack(path, cfg.epsilon)
        worst_min = min(worst_min, lt.min())
        drop = float(-np.diff(lt).min())
        worst_drop = max(worst_drop, drop)
        ok &= lt.min() >= -slack and drop <= slack
    return [Check("discrete Tanaka residual nonnegative and nondecreasing", bool(ok),
                  f"min {worst_min:.2e}, max drop {worst_drop:.2e}")]


def selftest_checks() -> list[Check]:
    return mollifier_checks() + comparison_checks() + balance_checks() + tanaka_checks()


def gamma0_run_checks(report) -> list[Check]:
    """Tube, limit-law, pathwise and Doob checks for a gamma = 0 report."""
    n = report["n_paths"]
    alpha = report["alpha_bound"]
    sigma = math.sqrt(alpha * (1 - alpha) / n) if alpha < 1 else 0.0
    tube = report["tube_violation"]["freq"]
    plus = report["count_plus"] / n
    half_width = 3 * math.sqrt(0.25 / n)
    pw = report["pathwise"]
    ev = event_frequency_check(report)
    dic = report["dichotomy"]
    return [
        Check("tube violation <= alpha + 3 sigma", tube <= alpha + 3 * sigma,
              f"freq {tube:.4g}, alpha {alpha:.4g}, sigma {sigma:.3g}"),
        Check("count_plus/n within 3 sigma of 1/2", abs(plus - 0.5) <= half_width,
              f"{plus:.4f} (band +/-{half_width:.4f})"),
        Check("discrete lower bound |X| >= occ - eps|int sgn dW|", pw["abs_lower_violations"] == 0,
              f"{pw['abs_lower_violations']} violations, "
              f"worst margin {pw['abs_lower_worst_margin']:.2e}"),
        Check("discrete upper bound |X| <= t + eps|W|", pw["abs_upper_violations"] == 0,
              f"{pw['abs_upper_violations']} violations, "
              f"worst margin {pw['abs_upper_worst_margin']:.2e}"),
        Check("Tanaka residual nonnegative and nondecreasing", pw["tanaka_violations"] == 0,
              f"{pw['tanaka_violations']} violations"),
        Check("union deviation event <= Doob bound + 3 sigma", ev.ok,
              f"freq {ev.union_freq:.4g}, bound {ev.alpha_bound:.4g}"
              + (" (vacuous)" if ev.vacuous else "")),
        Check("tube_ok implies constant sign", dic["tube_ok"] == dic["tube_ok_and_sign_constant"],
              f"{dic['tube_ok_and_sign_constant']}/{dic['tube_ok']}"),
    ]


def gamma_pos_run_checks(report, min_ok_fraction=0.99) -> list[Check]:
    pw = report["pathwise"]
    ev = event_frequency_check(report)
    vac = report.content.get("vacuity") or {}
    t_bar = report["params"]["t_bar"]
    out = [
        Check("mollified running lower bound holds within tol(dt)",
              pw["moll_lower_ok_fraction"] >= min_ok_fraction,
              f"{pw['moll_lower_ok_fraction']:.4f} of paths, tol {pw['moll_lower_tol']:.3e}"),
        Check("union deviation event <= Doob bound + 3 sigma", ev.ok,
              f"freq {ev.union_freq:.4g}, bound {ev.alpha_bound:.4g}"
              + (" (vacuous)" if ev.vacuous else "")),
        Check("martingale mean at T within 3 standard errors", ev.martingale_ok,
              f"z = {ev.martingale_z:.2f}"),
    ]
    if vac:
        out.append(Check(
            "explicit constants reported vacuous at this eps", not report["informative"],
            f"t_bar = {t_bar:.4g} vs T = {report['config']['T']:g}; informative only for "
            f"eps <= {vac['eps_informative']:.3e}, needing dt <= {vac['dt_required']:.3e}"))
    return out
