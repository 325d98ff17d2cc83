"""Linear price-impact market with momentum traders.

Each period the market posts a quote, collects the aggregate order of
speculators, momentum traders and the controller, fills it at
``quote + mu * q`` and moves the quote by ``lam * q``.

Arithmetic is generic over the numeric type: floats by default, but
passing :class:`fractions.Fraction` parameters and orders runs the whole
simulation in exact rational arithmetic.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from ._fmt import fmt_number

CSV_HEADER = ("n", "quote", "y", "xi", "u", "q", "p")


def _require_finite(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class PricingRule:
    """Permanent (``lam``) and immediate (``mu``) impact coefficients."""

    lam: float
    mu: float

    def __post_init__(self):
        _require_finite("lam", self.lam)
        _require_finite("mu", self.mu)
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError(
                f"pricing rule needs lam > 0 and mu > 0, got lam={self.lam}, mu={self.mu}"
            )

    def impact(self, q):
        return self.mu * q

    def update(self, q):
        return self.lam * q


@dataclass(frozen=True)
class MarketParams:
    beta: float = 0.0
    p0: float = 0.0
    horizon: int = 1
    tol: float = 1e-9

    def __post_init__(self):
        for name in ("beta", "p0", "tol"):
            _require_finite(name, getattr(self, name))
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.p0 < 0:
            raise ValueError(f"p0 must be >= 0, got {self.p0}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")
        if self.tol < 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")


@dataclass(frozen=True)
class PeriodRecord:
    n: int
    quote: float
    y: float
    xi: float
    u: float
    q: float
    p: float


@dataclass(frozen=True)
class StateVector:
    """Control-system state ``(p_n, q_n, q_{n-1})``."""

    p: float
    q: float
    q_prev: float

    def as_array(self):
        return np.array([float(self.p), float(self.q), float(self.q_prev)])


@dataclass(frozen=True)
class Trajectory:
    params: MarketParams
    rule: PricingRule
    records: tuple[PeriodRecord, ...]
    negative_price: bool = field(default=False)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, n: int) -> PeriodRecord:
        """Record of period ``n`` (1-based)."""
        if not 1 <= n <= len(self.records):
            raise IndexError(f"period {n} outside 1..{len(self.records)}")
        return self.records[n - 1]

    def price(self, n: int):
        """``p_n`` with ``p_0 = params.p0``."""
        return self.params.p0 if n == 0 else self[n].p

    def order(self, n: int):
        """``q_n`` with ``q_0 = 0``."""
        return 0 if n == 0 else self[n].q

    def state(self, n: int) -> StateVector:
        return StateVector(self.price(n), self.order(n), self.order(n - 1) if n >= 1 else 0)

    def column(self, name: str) -> np.ndarray:
        return np.array([float(getattr(r, name)) for r in self.records])

    @property
    def prices(self) -> np.ndarray:
        return self.column("p")

    @property
    def orders(self) -> np.ndarray:
        return self.column("q")

    def states(self, shift_to_p0: bool = True) -> np.ndarray:
        """Stacked states ``z_1..z_N``; optionally measured relative to ``(p0, 0, 0)``."""
        z = np.array([self.state(n).as_array() for n in range(1, len(self) + 1)])
        if shift_to_p0:
            z[:, 0] -= float(self.params.p0)
        return z

    def to_csv(self, stream=None) -> str:
        """Write ``n,quote,y,xi,u,q,p`` rows; returns the text when no stream is given."""
        buf = io.StringIO() if stream is None else stream
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.records:
            writer.writerow([r.n] + [fmt_number(getattr(r, k)) for k in CSV_HEADER[1:]])
        return buf.getvalue() if stream is None else ""


class ControlPolicy(Protocol):
    def order(self, n: int, history: Sequence[PeriodRecord], p0) -> float:
        """Controller order ``u_n`` given records of periods ``1..n-1``."""
        ...


class NullControl:
    """The controller never trades."""

    def order(self, n, history, p0):
        return 0

    def __repr__(self):
        return "NullControl()"


NULL_CONTROL = NullControl()


def impact_price(quote, q, rule: PricingRule):
    return quote + rule.impact(q)


def update_quote(quote, q, rule: PricingRule):
    return quote + rule.update(q)


def momentum_order(p_prev, p_prev2, beta):
    """Momentum order ``beta * (p_{n-1} - p_{n-2})``; valid from period 2 on."""
    return beta * (p_prev - p_prev2)


def simulate(
    params: MarketParams,
    rule: PricingRule,
    spec_orders: Iterable[float] = (),
    control: ControlPolicy = NULL_CONTROL,
) -> Trajectory:
    """Run the market for ``params.horizon`` periods.

    ``spec_orders`` holds the aggregate speculator orders ``y_1, y_2, ...``;
    entries beyond its length are zero. Momentum is zero in period 1 and
    ``beta * (p_1 - p0)`` in period 2.
    """
    ys = list(spec_orders)
    for i, y in enumerate(ys):
        _require_finite(f"spec_orders[{i}]", y)
    ys += [0] * max(0, params.horizon - len(ys))

    quote = params.p0
    p_lag1, p_lag2 = params.p0, None
    records: list[PeriodRecord] = []
    negative = False
    for n in range(1, params.horizon + 1):
        y = ys[n - 1]
        xi = 0 if n == 1 else momentum_order(p_lag1, p_lag2, params.beta)
        u = control.order(n, records, params.p0)
        _require_finite(f"u_{n}", u)
        q = y + xi + u
        p = impact_price(quote, q, rule)
        if not math.isfinite(p):
            raise FloatingPointError(f"price overflow in period {n}")
        negative = negative or p < 0
        records.append(PeriodRecord(n, quote, y, xi, u, q, p))
        quote = update_quote(quote, q, rule)
        p_lag1, p_lag2 = p, p_lag1
    return Trajectory(params, rule, tuple(records), negative)


def speculator_payoff(traj: Trajectory, n: int, x1) -> float:
    """Payoff ``(p_{n+1} - p_n) * x1`` of a speculator entering in period ``n``."""
    if n < 1 or n + 1 > len(traj):
        raise IndexError(f"payoff of speculator {n} needs periods {n} and {n + 1}")
    return (traj.price(n + 1) - traj.price(n)) * x1


def invariant_residual(traj: Trajectory) -> float:
    """Largest relative violation of the price recursion and quote-update identities."""
    lam, mu = traj.rule.lam, traj.rule.mu
    worst = 0.0
    for n in range(1, len(traj) + 1):
        r = traj[n]
        scale = max(1.0, abs(float(r.p)), abs(float(r.quote)))
        checks = [r.q - (r.y + r.xi + r.u), r.p - (r.quote + mu * r.q)]
        if n < len(traj):
            nxt = traj[n + 1]
            checks.append(nxt.quote - (r.quote + lam * r.q))
            checks.append(nxt.p - (r.p + (lam - mu) * r.q + mu * nxt.q))
        worst = max(worst, max(abs(float(c)) for c in checks) / scale)
    return worst
