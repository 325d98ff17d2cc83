"""State-space form of the market and stabilizing feedback.

With ``z_n = (p_n, q_n, q_{n-1})`` and the controller order ``u_{n+1}`` as
input, the market is ``z_{n+1} = A z_n + B u_{n+1}``. The controller places
the closed-loop poles of ``A - B S`` and intervenes only after the first
nonzero order (quick-response control).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._fmt import dumps
from .dynamics import MarketParams, PricingRule, Trajectory, simulate

CONJUGATE_TOL = 1e-12


class UncontrollableError(ValueError):
    """Pole placement requested for a system with ``lam <= 0``."""


@dataclass(frozen=True)
class SystemMatrices:
    A: np.ndarray
    B: np.ndarray
    lam: float
    mu: float
    beta: float

    @classmethod
    def from_params(cls, lam, mu, beta) -> "SystemMatrices":
        """Build ``(A, B)`` without the positivity checks of :class:`PricingRule`."""
        lm = lam - mu
        A = np.array(
            [
                [1.0, lm + beta * mu * mu, beta * lm * mu],
                [0.0, beta * mu, beta * lm],
                [0.0, 1.0, 0.0],
            ]
        )
        B = np.array([[mu], [1.0], [0.0]])
        return cls(A, B, float(lam), float(mu), float(beta))

    def quote_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Equivalent realization in ``(p_n - mu q_n, q_n, q_{n-1})``.

        The change of basis is unit upper triangular, so the controllability
        matrix keeps its determinant; the entries avoid the cancellations of
        the price coordinates.
        """
        lam, mu, beta = self.lam, self.mu, self.beta
        A_hat = np.array(
            [[1.0, lam, 0.0], [0.0, beta * mu, beta * (lam - mu)], [0.0, 1.0, 0.0]]
        )
        B_hat = np.array([[0.0], [1.0], [0.0]])
        return A_hat, B_hat


def system_matrices(rule: PricingRule, beta) -> SystemMatrices:
    return SystemMatrices.from_params(rule.lam, rule.mu, beta)


def _ctrb(A, B):
    AB = A @ B
    return np.hstack([B, AB, A @ AB])


def controllability_matrix(m: SystemMatrices) -> np.ndarray:
    """``W = [B, AB, A^2 B]``."""
    return _ctrb(m.A, m.B)


def controllability_det(m: SystemMatrices) -> float:
    return float(np.linalg.det(_ctrb(*m.quote_coordinates())))


def is_controllable(m: SystemMatrices, tol: float = 1e-12) -> bool:
    return abs(controllability_det(m)) > tol


def _as_complex(v) -> complex:
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ValueError(f"complex pair must be (re, im), got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _check_conjugate_closed(phi: Sequence[complex]):
    unmatched = list(phi)
    while unmatched:
        z = unmatched.pop()
        if abs(z.imag) <= CONJUGATE_TOL:
            continue
        k = min(range(len(unmatched)), key=lambda i: abs(unmatched[i] - z.conjugate()), default=None)
        if k is None or abs(unmatched[k] - z.conjugate()) > CONJUGATE_TOL * max(1.0, abs(z)):
            raise ValueError(f"eigenvalue set is not closed under conjugation: {list(phi)}")
        unmatched.pop(k)


def elementary_deltas(phi: Sequence[complex]) -> tuple[float, float, float]:
    """Monic cubic coefficients ``(delta_1, delta_2, delta_3)`` with roots ``phi``."""
    a, b, c = phi
    d = (-(a + b + c), a * b + b * c + c * a, -(a * b * c))
    for x in d:
        if abs(x.imag) > CONJUGATE_TOL * max(1.0, abs(x)):
            raise ValueError(f"coefficients are not real (imaginary residue {x.imag:g})")
    return tuple(float(x.real) for x in d)


@dataclass(frozen=True)
class FeedbackGain:
    sigma: tuple[float, float, float]
    phi: tuple[complex, complex, complex]
    delta: tuple[float, float, float]

    @property
    def spectral_radius(self) -> float:
        return max(abs(z) for z in self.phi)

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1

    def as_row(self) -> np.ndarray:
        return np.array([self.sigma])

    def feedback(self, state: Sequence[float]) -> float:
        """``-S z`` for a state already measured from its rest point."""
        s1, s2, s3 = self.sigma
        p, q, q_prev = state
        return -(s1 * p + s2 * q + s3 * q_prev)


def pole_place(rule: PricingRule, beta, phi: Iterable) -> FeedbackGain:
    """Gain ``S`` giving ``A - B S`` the eigenvalues ``phi``.

    ``phi`` holds three numbers (complex, or ``(re, im)`` pairs) closed
    under conjugation.
    """
    lam, mu = rule.lam, rule.mu
    if not lam > 0:
        raise UncontrollableError(f"system is not controllable for lambda={lam}")
    phi = tuple(_as_complex(v) for v in phi)
    if len(phi) != 3:
        raise ValueError(f"need exactly three eigenvalues, got {len(phi)}")
    _check_conjugate_closed(phi)
    d1, d2, d3 = elementary_deltas(phi)
    s = 1 + d1 + d2 + d3
    sigma = (s / lam, -mu * s / lam + d1 + beta * mu + 1, -d3 + beta * (lam - mu))
    return FeedbackGain(sigma, phi, (d1, d2, d3))


def char_poly_coeffs(m: SystemMatrices, gain: FeedbackGain) -> tuple[float, float, float]:
    """``(c2, c1, c0)`` of ``phi^3 + c2 phi^2 + c1 phi + c0``, the closed-loop polynomial."""
    lam, mu, beta = m.lam, m.mu, m.beta
    s1, s2, s3 = gain.sigma
    lm = lam - mu
    return (
        mu * s1 + s2 - beta * mu - 1,
        lm * s1 - s2 + s3 - beta * lm + beta * mu,
        -s3 + beta * lm,
    )


def closed_loop_matrix(m: SystemMatrices, gain: FeedbackGain) -> np.ndarray:
    return m.A - m.B @ gain.as_row()


def gain_from_sigma(rule: PricingRule, beta, sigma: Sequence[float]) -> FeedbackGain:
    """Wrap an explicit gain, recovering its closed-loop eigenvalues."""
    sigma = tuple(float(s) for s in sigma)
    if len(sigma) != 3:
        raise ValueError("sigma must have three entries")
    probe = FeedbackGain(sigma, (0j, 0j, 0j), (0.0, 0.0, 0.0))
    delta = char_poly_coeffs(system_matrices(rule, beta), probe)
    phi = tuple(complex(r) for r in np.roots([1.0, *delta]))
    return FeedbackGain(sigma, phi, delta)


@dataclass(frozen=True)
class QuickResponse:
    """Dormant until some past total order is nonzero, then ``u_n = -S z_{n-1}``.

    States are measured from the rest point ``(p0, 0, 0)``, which is the
    state just before the first trade.
    """

    gain: FeedbackGain
    trigger_tol: float = 1e-9

    def triggered(self, history) -> bool:
        return any(abs(r.q) > self.trigger_tol for r in history)

    def order(self, n, history, p0):
        if not history or not self.triggered(history):
            return 0.0
        last = history[-1]
        q_lag2 = history[-2].q if len(history) >= 2 else 0.0
        return self.gain.feedback((last.p - p0, last.q, q_lag2))


def quick_response_control(gain: FeedbackGain, trigger_tol: float = 1e-9) -> QuickResponse:
    if not gain.stable:
        raise ValueError(f"gain is not stabilizing (spectral radius {gain.spectral_radius:g})")
    if trigger_tol < 0:
        raise ValueError("trigger_tol must be >= 0")
    return QuickResponse(gain, trigger_tol)


def decay_rate(norms: np.ndarray, start: int = 0, floor: float = 1e-10) -> float:
    """Geometric rate from a log-linear fit of ``norms[start:]``.

    Points below ``floor * max(norms)`` are dropped; they sit in the
    rounding noise of the accumulated price.
    """
    norms = np.asarray(norms, dtype=float)
    idx = np.arange(len(norms))
    keep = (idx >= start) & (norms > floor * norms.max())
    if keep.sum() < 2:
        return 0.0
    slope = np.polyfit(idx[keep], np.log(norms[keep]), 1)[0]
    return float(math.exp(slope))


@dataclass(frozen=True)
class StabilizationResult:
    trajectory: Trajectory
    states: np.ndarray  # z_1..z_N relative to (p0, 0, 0)
    rate_estimate: float
    fitted_rate: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.rate_estimate <= self.bound


def stabilize_simulation(
    rule: PricingRule,
    beta,
    gain: FeedbackGain,
    disturbance: Sequence[float] = (1.0,),
    N: int = 60,
    p0: float = 0.0,
    late_start: int | None = None,
    floor: float = 1e-10,
) -> StabilizationResult:
    """Simulate a disturbance under quick-response control.

    ``rate_estimate`` is the largest step ratio ``|z_{n+1}| / |z_n|`` over
    periods from ``late_start`` (default ``N // 3``) while the state is
    above the noise floor; ``fitted_rate`` is the log-linear fit over the
    same periods.
    """
    if N < 10:
        raise ValueError("N must be >= 10")
    policy = quick_response_control(gain)
    traj = simulate(MarketParams(beta=beta, p0=p0, horizon=N), rule, disturbance, policy)
    z = traj.states(shift_to_p0=True)
    norms = np.linalg.norm(z, axis=1)
    start = N // 3 if late_start is None else late_start
    top = norms.max() if norms.size else 0.0
    if top == 0.0:
        return StabilizationResult(traj, z, 0.0, 0.0, gain.spectral_radius + 0.05)
    live = norms > floor * top
    ratios = [
        norms[i + 1] / norms[i] for i in range(start, len(norms) - 1) if live[i] and live[i + 1]
    ]
    rate = max(ratios) if ratios else 0.0
    fitted = decay_rate(norms, start, floor)
    return StabilizationResult(traj, z, float(rate), fitted, gain.spectral_radius + 0.05)


def control_report(rule: PricingRule, beta, gain: FeedbackGain | None = None) -> dict:
    """Matrices, gain and residuals as a JSON-ready dict."""
    m = system_matrices(rule, beta)
    W = controllability_matrix(m)
    report = {
        "A": m.A,
        "B": m.B,
        "W": W,
        "detW": controllability_det(m),
        "controllable": is_controllable(m),
    }
    if gain is not None:
        coeffs = char_poly_coeffs(m, gain)
        report.update(
            sigma=list(gain.sigma),
            phi=[complex(z) for z in gain.phi],
            delta=list(gain.delta),
            char_poly=list(coeffs),
            char_poly_residual=max(abs(c - d) for c, d in zip(coeffs, gain.delta)),
            spectral_radius=gain.spectral_radius,
            stable=gain.stable,
        )
    return report


def control_report_json(rule: PricingRule, beta, gain: FeedbackGain | None = None) -> str:
    return dumps(control_report(rule, beta, gain))
