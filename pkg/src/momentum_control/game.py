"""Speculator payoffs and equilibrium checks.

Speculator ``n`` trades ``x1`` in period ``n`` and the offsetting ``-x1`` in
period ``n + 1``, earning ``(p_{n+1} - p_n) * x1``. Actions are encoded by
``x1`` alone, one of ``-1, 0, 1``.

``Gamma(x)`` below is the subgame in which speculator 1 opens with
``(x, -x)``; speculators 2 and 3 then choose, later speculators stay out.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._fmt import dumps
from .control import QuickResponse, pole_place, quick_response_control
from .dynamics import NULL_CONTROL, ControlPolicy, MarketParams, PricingRule, simulate
from .viability import in_maximal_set, viability_values

ACTIONS = (-1, 0, 1)
DEVIATION_TOL = 1e-12
EXHAUSTIVE_MAX_HORIZON = 12
P0_SYMMETRIC = 100.0
P0_CONTROLLED = 0.0
THIRDS_POLES = (1 / 3, 1 / 3, 1 / 3)


def check_action(x) -> int:
    if x not in ACTIONS:
        raise ValueError(f"speculator action must be one of -1, 0, 1; got {x!r}")
    return int(x)


def profile_orders(profile: Sequence[int]) -> list[int]:
    """Aggregate orders ``y_1..y_{N+1}`` with ``y_n = x^2_{n-1} + x^1_n``."""
    xs = [check_action(x) for x in profile]
    return [xs[0] if xs else 0] + [
        (xs[n] if n < len(xs) else 0) - xs[n - 1] for n in range(1, len(xs) + 1)
    ]


def profile_payoffs(rule, beta, profile, policy=NULL_CONTROL, p0=0.0):
    """Payoff of each speculator in ``profile`` and the trajectory behind it."""
    ys = profile_orders(profile)
    traj = simulate(MarketParams(beta=beta, p0=p0, horizon=len(ys)), rule, ys, policy)
    pis = [(traj.price(n + 1) - traj.price(n)) * x for n, x in enumerate(profile, start=1)]
    return pis, traj


# Benchmark without momentum traders ------------------------------------------------


def _check_zero_sum(x):
    x = np.asarray(x, dtype=float)
    if abs(x.sum()) > 1e-12 * max(1.0, np.abs(x).sum()):
        raise ValueError(f"benchmark position must net to zero, sum={x.sum():g}")
    return x


def benchmark_payoff(rule: PricingRule, x) -> float:
    """Closed form ``(2 mu - lam) * (-sum(x^2) / 2)`` for a zero-sum order vector."""
    x = _check_zero_sum(x)
    return (2 * rule.mu - rule.lam) * (-0.5 * float(x @ x))


def benchmark_payoff_direct(rule: PricingRule, x, p0: float = 0.0) -> float:
    """``-sum(p_n x_n)`` with ``p_n = p0 + lam * sum_{k<n} x_k + mu * x_n``."""
    x = _check_zero_sum(x)
    before = np.concatenate([[0.0], np.cumsum(x)[:-1]])
    p = p0 + rule.lam * before + rule.mu * x
    return float(-(p @ x))


# Lone deviation from no trade ------------------------------------------------------


def prop2_deviation_payoff(rule: PricingRule, beta) -> float:
    return viability_values(rule.lam, rule.mu, beta).R


def lone_deviation_simulated(rule, beta, x1=1, p0=P0_SYMMETRIC, policy=NULL_CONTROL) -> float:
    pis, _ = profile_payoffs(rule, beta, [check_action(x1)], policy, p0)
    return pis[0]


# Subgame Gamma(1) without control --------------------------------------------------


def price_increment_gamma1(rule: PricingRule, beta, x2: int, x3: int) -> float:
    """``p_3 - p_2`` in ``Gamma(1)`` without control."""
    lam, mu = rule.lam, rule.mu
    lm = lam - mu
    momentum = beta * mu * (beta * mu * mu + (x2 - 3) * mu + 2 * lam)
    speculative = mu * (x3 - x2) + lm * (x2 - 1)
    return momentum + speculative


def subgame_payoffs_no_control(rule: PricingRule, beta, x1: int, x2: int, x3: int):
    """Closed-form ``(pi_1, pi_2)`` in ``Gamma(x1)`` without control.

    ``Gamma(-1)`` is the mirror image of ``Gamma(1)``: negating every
    action leaves both payoffs unchanged.
    """
    x1, x2, x3 = check_action(x1), check_action(x2), check_action(x3)
    if x1 == 0:
        raise ValueError("Gamma(0) has no opening trade")
    x2, x3 = x2 * x1, x3 * x1
    mu, lam = rule.mu, rule.lam
    pi1 = mu * (beta * mu + x2 - 1) + (lam - mu)
    pi2 = x2 * price_increment_gamma1(rule, beta, x2, x3)
    return pi1, pi2


def simulate_subgame(rule, beta, x1, x2, x3, policy=NULL_CONTROL, p0=P0_SYMMETRIC):
    pis, traj = profile_payoffs(rule, beta, [x1, x2, x3], policy, p0)
    return pis[0], pis[1], traj


@dataclass(frozen=True)
class CaseCell:
    x2: int
    x3: int
    pi1: float
    pi2: float
    source: str

    def as_dict(self):
        return {"x2": self.x2, "x3": self.x3, "pi1": self.pi1, "pi2": self.pi2, "source": self.source}


def subgame_table_no_control(rule, beta, x1: int = 1, p0: float = P0_SYMMETRIC):
    """All nine ``(x2, x3)`` cells, closed form and simulated."""
    cells = []
    for x2, x3 in itertools.product(ACTIONS, ACTIONS):
        pi1, pi2 = subgame_payoffs_no_control(rule, beta, x1, x2, x3)
        cells.append(CaseCell(x2, x3, pi1, pi2, "closed_form"))
        s1, s2, _ = simulate_subgame(rule, beta, x1, x2, x3, p0=p0)
        cells.append(CaseCell(x2, x3, s1, s2, "simulation"))
    return cells


@dataclass(frozen=True)
class SufficiencyCertificate:
    """Chain of inequalities showing speculator 1 will not open a trade.

    ``buy_rejected``: in ``Gamma(1)`` speculator 2 does strictly worse
    with ``(1, -1)`` than with no trade, whatever speculator 3 does.
    ``admissible_x2``: the replies speculator 2 may still choose (a tie keeps
    ``(1, -1)`` in). ``max_pi1``: speculator 1's best payoff over those.
    ``mirror_consistent``: the simulated ``Gamma(-1)`` reproduces the
    ``Gamma(1)`` table with all actions negated.
    """

    L: float
    R: float
    buy_rejected: bool
    buy_pi2: tuple[float, float, float]
    admissible_x2: tuple[int, ...]
    max_pi1: float
    certified: bool
    mirror_consistent: bool

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def spe_viability_sufficiency_check(rule: PricingRule, beta, tol: float = DEVIATION_TOL):
    v = viability_values(rule.lam, rule.mu, beta)
    buy_pi2 = tuple(subgame_payoffs_no_control(rule, beta, 1, 1, x3)[1] for x3 in ACTIONS)
    rejected = all(p < -tol for p in buy_pi2)
    admissible = (-1, 0) if rejected else ACTIONS
    pi1 = {x2: subgame_payoffs_no_control(rule, beta, 1, x2, 0)[0] for x2 in ACTIONS}
    max_pi1 = max(pi1[x2] for x2 in admissible)
    mirror = True
    for x2, x3 in itertools.product(ACTIONS, ACTIONS):
        s1, s2, _ = simulate_subgame(rule, beta, -1, -x2, -x3)
        c1, c2 = subgame_payoffs_no_control(rule, beta, 1, x2, x3)
        if abs(s1 - c1) > 1e-9 * max(1.0, abs(c1)) or abs(s2 - c2) > 1e-9 * max(1.0, abs(c2)):
            mirror = False
    certified = max_pi1 < -tol and mirror
    return SufficiencyCertificate(
        L=v.L,
        R=v.R,
        buy_rejected=rejected,
        buy_pi2=buy_pi2,
        admissible_x2=admissible,
        max_pi1=max_pi1,
        certified=certified,
        mirror_consistent=mirror,
    )


# One-shot deviation checks -----------------------------------------------------


@dataclass(frozen=True)
class Deviation:
    speculator: int
    action: int
    payoff: float
    gain: float


@dataclass(frozen=True)
class PayoffReport:
    """Payoffs of an open-loop profile and every one-shot deviation from it.

    Speculators in the last three slots are flagged in ``truncated``: the
    horizon cut (later speculators pinned to no trade) feeds into their
    payoffs.
    """

    profile: tuple[int, ...]
    payoffs: tuple[float, ...]
    best_alternative: dict
    profitable: tuple[Deviation, ...]
    indifferent: tuple[Deviation, ...]
    truncated: tuple[int, ...] = field(default=())

    @property
    def is_equilibrium(self) -> bool:
        return not self.profitable

    def as_dict(self):
        def dev(d):
            return {"speculator": d.speculator, "action": d.action, "payoff": d.payoff, "gain": d.gain}

        return {
            "profile": list(self.profile),
            "payoffs": list(self.payoffs),
            "best_alternative": {str(k): v for k, v in self.best_alternative.items()},
            "profitable_deviations": [dev(d) for d in self.profitable],
            "zero_gain_deviations": [dev(d) for d in self.indifferent],
            "truncation_affected": list(self.truncated),
            "is_equilibrium": self.is_equilibrium,
        }


def ne_check_open_loop(
    rule: PricingRule,
    beta,
    policy: ControlPolicy = NULL_CONTROL,
    profile: Sequence[int] = (),
    N: int | None = None,
    p0: float = P0_SYMMETRIC,
    tol: float = DEVIATION_TOL,
) -> PayoffReport:
    """Check every single-speculator deviation from an open-loop profile.

    A deviation is profitable when it beats the profile payoff by more
    than ``tol``; equal payoffs are listed separately.
    """
    profile = tuple(check_action(x) for x in profile)
    if N is None:
        N = len(profile)
    if len(profile) != N:
        raise ValueError(f"profile has {len(profile)} actions, horizon is {N}")
    if N < 1:
        raise ValueError("horizon must be >= 1")
    base, _ = profile_payoffs(rule, beta, profile, policy, p0)
    best, profitable, indifferent = {}, [], []
    for n in range(N):
        alts = {}
        for a in ACTIONS:
            if a == profile[n]:
                continue
            trial = profile[:n] + (a,) + profile[n + 1 :]
            alts[a] = profile_payoffs(rule, beta, trial, policy, p0)[0][n]
        a_best = max(alts, key=alts.get)
        best[n + 1] = (a_best, alts[a_best])
        for a, pay in alts.items():
            d = Deviation(n + 1, a, pay, pay - base[n])
            if d.gain > tol:
                profitable.append(d)
            elif abs(d.gain) <= tol:
                indifferent.append(d)
    truncated = tuple(n for n in range(max(1, N - 2), N + 1))
    return PayoffReport(profile, tuple(base), best, tuple(profitable), tuple(indifferent), truncated)


def find_open_loop_equilibria(rule, beta, policy=NULL_CONTROL, N: int = 3, p0=P0_SYMMETRIC, tol=DEVIATION_TOL):
    """Every open-loop profile of length ``N`` with no profitable one-shot deviation."""
    if N > EXHAUSTIVE_MAX_HORIZON:
        raise ValueError(f"exhaustive search limited to N <= {EXHAUSTIVE_MAX_HORIZON}, got {N}")
    found = []
    for profile in itertools.product(ACTIONS, repeat=N):
        if ne_check_open_loop(rule, beta, policy, profile, N, p0, tol).is_equilibrium:
            found.append(profile)
    return found


# Quick-response control ---------------------------------------------------------


def thirds_policy(rule: PricingRule, beta) -> QuickResponse:
    return quick_response_control(pole_place(rule, beta, THIRDS_POLES))


def thirds_closed_form(rule: PricingRule, beta, x2: int, x3: int) -> dict:
    """Path of ``Gamma(1)`` under the triple-1/3 quick-response control, in closed form."""
    lam, mu = rule.lam, rule.mu
    xi3 = beta * (lam - 2 * mu + mu * x2)
    p2 = lam - mu + mu * x2
    p3 = mu * (x3 - 1 / 3) + (lam - mu) * x2
    pi2 = ((lam - 2 * mu) * x2 + mu * x3 - lam + 2 * mu / 3) * x2
    return {
        "u2": -beta * mu,
        "q2": -1 + x2,
        "p2": p2,
        "xi3": xi3,
        "u3": -1 / 3 - xi3,
        "p3": p3,
        "pi1": lam - 2 * mu + mu * x2,
        "pi2": pi2,
    }


def thirds_pi2_case(rule: PricingRule, x2: int, x3: int) -> float:
    """Speculator 2's payoff split by its own action, as a cross-check."""
    mu, lam = rule.mu, rule.lam
    if x2 == 1:
        return mu * (x3 - 4 / 3)
    if x2 == -1:
        return mu * (-x3 - 8 / 3) + 2 * lam
    return 0.0


@dataclass(frozen=True)
class QuickResponseCell:
    x2: int
    x3: int
    closed_form: dict
    simulated: dict
    max_abs_error: float


@dataclass(frozen=True)
class QuickResponseTable:
    lam: float
    mu: float
    beta: float
    cells: tuple[QuickResponseCell, ...]
    buy_excluded: bool  # pi_2 < 0 whenever speculator 2 buys
    max_pi1_admissible: float  # over x2 in {-1, 0}
    viable: bool

    def as_dict(self):
        rows = []
        for c in self.cells:
            rows.append({"x2": c.x2, "x3": c.x3, "pi1": c.closed_form["pi1"], "pi2": c.closed_form["pi2"], "source": "closed_form"})
            rows.append({"x2": c.x2, "x3": c.x3, "pi1": c.simulated["pi1"], "pi2": c.simulated["pi2"], "source": "simulation"})
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "beta": self.beta,
            "cells": rows,
            "buy_excluded": self.buy_excluded,
            "max_pi1_admissible": self.max_pi1_admissible,
            "viable": self.viable,
        }


def theorem1_payoff_cases(rule: PricingRule, beta, tol: float = DEVIATION_TOL) -> QuickResponseTable:
    if not in_maximal_set(rule.lam, rule.mu):
        raise ValueError(
            f"(lambda={rule.lam}, mu={rule.mu}) lies outside lambda <= 2 mu; "
            "use theorem1_impossibility_witness"
        )
    policy = thirds_policy(rule, beta)
    cells = []
    for x2, x3 in itertools.product(ACTIONS, ACTIONS):
        pi1, pi2, t = simulate_subgame(rule, beta, 1, x2, x3, policy, P0_CONTROLLED)
        sim = {
            "u2": t[2].u,
            "q2": t[2].q,
            "p2": t[2].p,
            "xi3": t[3].xi,
            "u3": t[3].u,
            "p3": t[3].p,
            "pi1": pi1,
            "pi2": pi2,
        }
        cf = thirds_closed_form(rule, beta, x2, x3)
        err = max(abs(cf[k] - sim[k]) for k in cf)
        cells.append(QuickResponseCell(x2, x3, cf, sim, err))
    buy_excluded = all(c.simulated["pi2"] < -tol for c in cells if c.x2 == 1)
    max_pi1 = max(c.simulated["pi1"] for c in cells if c.x2 in (-1, 0))
    viable = buy_excluded and max_pi1 <= tol
    return QuickResponseTable(rule.lam, rule.mu, beta, tuple(cells), buy_excluded, max_pi1, viable)


@dataclass(frozen=True)
class ImpossibilityWitness:
    """Range of ``delta_1`` that would keep an opening buy unprofitable.

    Stability forces ``delta_1 < 3``, while ``p_2 <= p_1`` needs
    ``delta_1 >= (lam - 2 mu) / mu - 1``; the range is empty iff
    ``mu <= lam / 6``.
    """

    lower: float
    upper: float
    empty: bool

    def as_dict(self):
        return {"lower": self.lower, "upper": self.upper, "empty": self.empty}


def theorem1_impossibility_witness(rule: PricingRule, beta) -> ImpossibilityWitness:
    lam, mu = rule.lam, rule.mu
    if not lam > 2 * mu:
        raise ValueError(f"witness needs lambda > 2 mu, got lambda={lam}, mu={mu}")
    lower = (lam - 2 * mu) / mu - 1
    return ImpossibilityWitness(lower, 3.0, lower >= 3.0)


def opening_gain_under_control(rule: PricingRule, beta, gain, p0: float = P0_CONTROLLED) -> float:
    """Speculator 1's payoff from a lone ``(1, -1)`` under quick response with ``gain``."""
    policy = QuickResponse(gain)
    pis, _ = profile_payoffs(rule, beta, [1], policy, p0)
    return pis[0]


def report_json(obj) -> str:
    return dumps(obj.as_dict() if hasattr(obj, "as_dict") else obj)
