"""Second-order recurrence ``q_{n+2} = K q_{n+1} + J q_n`` started at ``(0, 1)``.

The order flow generated when every speculator buys and then sells
follows this recurrence with ``K = beta * mu`` and
``J = beta * (lam - mu)``. Closed forms cover the three root regimes.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from fractions import Fraction

from .dynamics import MarketParams, PricingRule, simulate

# Below this |D| the closed form divides by a vanishing sqrt(D).
NEAR_REPEATED_BAND = 1e-6


@dataclass(frozen=True)
class RecurrenceParams:
    K: float
    J: float

    def __post_init__(self):
        if not (math.isfinite(self.K) and math.isfinite(self.J)):
            raise ValueError(f"K and J must be finite, got K={self.K}, J={self.J}")

    @classmethod
    def from_market(cls, rule: PricingRule, beta) -> "RecurrenceParams":
        return cls(beta * rule.mu, beta * (rule.lam - rule.mu))

    @property
    def discriminant(self):
        return self.K * self.K + 4 * self.J


class RootKind(enum.Enum):
    REAL_DISTINCT = "real_distinct"
    REPEATED = "repeated"
    COMPLEX = "complex"


@dataclass(frozen=True)
class RootSpec:
    kind: RootKind
    discriminant: float
    roots: tuple[float, float] | None = None
    modulus: float | None = None
    theta: float | None = None

    def complex_roots(self) -> tuple[complex, complex]:
        if self.kind is RootKind.COMPLEX:
            r1 = cmath.rect(self.modulus, self.theta)
            return r1, r1.conjugate()
        return complex(self.roots[0]), complex(self.roots[1])


def characteristic_roots(p: RecurrenceParams, tol: float = 1e-12) -> RootSpec:
    """Roots of ``r^2 - K r - J = 0``.

    ``|D| <= tol * max(1, K^2)`` counts as a repeated root. Complex roots are
    reported in polar form with ``theta = atan2(sqrt(-D), K)``.
    """
    K, J = p.K, p.J
    D = K * K + 4 * J
    if abs(D) <= tol * max(1.0, K * K):
        return RootSpec(RootKind.REPEATED, D, roots=(K / 2, K / 2))
    if D > 0:
        s = math.sqrt(D)
        return RootSpec(RootKind.REAL_DISTINCT, D, roots=((K + s) / 2, (K - s) / 2))
    return RootSpec(
        RootKind.COMPLEX, D, modulus=math.sqrt(-J), theta=math.atan2(math.sqrt(-D), K)
    )


def q_real_distinct(K, D, n):
    s = math.sqrt(D)
    r1, r2 = (K + s) / 2, (K - s) / 2
    return (r1**n - r2**n) / s


def q_repeated(K, n):
    if n == 0:
        return 0.0
    return n * (K / 2) ** (n - 1)


def q_complex(K, J, n):
    Dp = -(K * K + 4 * J)
    theta = math.atan2(math.sqrt(Dp), K)
    return 2 / math.sqrt(Dp) * math.sqrt(-J) ** n * math.sin(n * theta)


def recurrence_sequence(p: RecurrenceParams, n_max: int) -> list:
    """``q_0..q_{n_max}`` by direct iteration."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    q = [0, 1]
    for _ in range(n_max - 1):
        q.append(p.K * q[-1] + p.J * q[-2])
    return q[: n_max + 1]


def recurrence_q(p: RecurrenceParams, n: int):
    return recurrence_sequence(p, n)[n]


def evaluate_q(p: RecurrenceParams, n: int, tol: float = 1e-12) -> tuple[float, str]:
    """``(q_n, path)`` where ``path`` names the formula actually used."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n <= 1:
        return float(n), "initial"
    spec = characteristic_roots(p, tol)
    if abs(spec.discriminant) < NEAR_REPEATED_BAND:
        return float(recurrence_q(p, n)), "recurrence"
    if spec.kind is RootKind.REAL_DISTINCT:
        return q_real_distinct(p.K, spec.discriminant, n), "real_distinct"
    if spec.kind is RootKind.COMPLEX:
        return q_complex(p.K, p.J, n), "complex"
    return q_repeated(p.K, n), "repeated"


def closed_form_q(p: RecurrenceParams, n: int) -> float:
    return evaluate_q(p, n)[0]


def sign_change_bound(theta: float) -> int:
    """Periods within which an oscillating sequence must turn negative."""
    return math.ceil(2 * math.pi / theta) + 2


@dataclass(frozen=True)
class MonotoneVerdict:
    """Outcome of checking the all-buy-then-sell price path.

    ``applicable`` is True when ``D >= 0`` and ``beta > 0``; then ``holds``
    says whether every ``q_n`` was positive and prices rose strictly, with
    ``counterexample`` the first failing period. For ``D < 0``,
    ``first_negative`` is the first period with ``q_n < 0`` and
    ``within_bound`` whether it came before ``sign_change_bound``.
    """

    discriminant: float
    applicable: bool
    degenerate: bool = False
    holds: bool | None = None
    counterexample: int | None = None
    bound: int | None = None
    first_negative: int | None = None
    within_bound: bool | None = None


def _all_buy_sell_path(rule, beta, horizon, exact):
    if exact:
        rule = PricingRule(Fraction(rule.lam), Fraction(rule.mu))
        beta = Fraction(beta)
    params = MarketParams(beta=beta, p0=Fraction(0) if exact else 0.0, horizon=horizon)
    # every speculator buys then sells: only speculator 1's purchase is unmatched
    return simulate(params, rule, [1])


def monotone_price_check(rule: PricingRule, beta, N: int, exact: bool = True) -> MonotoneVerdict:
    """Check positive orders and rising prices when ``D >= 0``.

    With ``exact`` the monotone branch runs in rational arithmetic on the
    exact values of the inputs; price increments shrink like the dominant
    root to the n-th power and drop below double resolution when that root
    is small. The oscillating branch always runs in floating point.
    """
    if beta == 0:
        return MonotoneVerdict(discriminant=0.0, applicable=False, degenerate=True)
    if exact:
        lam, mu, b = Fraction(rule.lam), Fraction(rule.mu), Fraction(beta)
    else:
        lam, mu, b = rule.lam, rule.mu, beta
    D = (b * mu) ** 2 + 4 * b * (lam - mu)
    if D >= 0:
        traj = _all_buy_sell_path(rule, beta, N, exact)
        bad = None
        for n in range(1, N + 1):
            if not (traj.order(n) > 0 and traj.price(n) > traj.price(n - 1)):
                bad = n
                break
        return MonotoneVerdict(float(D), True, holds=bad is None, counterexample=bad)

    theta = math.atan2(math.sqrt(-float(D)), float(b * mu))
    bound = sign_change_bound(theta)
    traj = _all_buy_sell_path(rule, beta, bound, exact=False)
    first = next((n for n in range(1, bound + 1) if traj.order(n) < 0), None)
    return MonotoneVerdict(
        float(D), False, bound=bound, first_negative=first, within_bound=first is not None
    )
