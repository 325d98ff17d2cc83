"""Viability regions of linear pricing rules.

Three polynomials in ``(lam, mu, beta)`` decide the regions:

* ``R = beta mu^2 - 2 mu + lam``: no-trade is a Nash equilibrium iff ``R <= 0`` (set M1)
* ``D = beta mu^2 - 4 mu + 4 lam``: ``D < 0`` is necessary for NE-viability (set M2)
* ``L = beta mu^2 - 2 mu + 2 lam``: ``L < 0`` suffices for SPE-viability (set M3)

The maximal set ``M = {lam <= 2 mu}`` is the viable set without momentum
traders and without a controller.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ._fmt import fmt_number

BOUNDARY_TOL = 1e-12

GRID_HEADER = ("lambda", "mu", "R", "D", "L", "in_M", "in_M1", "in_M2", "in_M3", "on_kyle")


def _check_point(lam, mu, beta):
    for name, v in (("lambda", lam), ("mu", mu), ("beta", beta)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite")
    if lam <= 0 or mu <= 0:
        raise ValueError(f"lambda and mu must be positive, got {lam}, {mu}")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")


@dataclass(frozen=True)
class ViabilityValues:
    R: float
    D: float
    L: float
    maximal_margin: float


@dataclass(frozen=True)
class RegionLabel:
    lam: float
    mu: float
    values: ViabilityValues
    in_M: bool
    in_M1: bool
    in_M2: bool
    in_M3: bool
    on_kyle_line: bool
    # |value| <= tol: the weak/strict decision sits on its zero contour
    on_R_boundary: bool = False
    on_D_boundary: bool = False
    on_L_boundary: bool = False
    on_M_boundary: bool = False


def viability_values(lam, mu, beta) -> ViabilityValues:
    _check_point(lam, mu, beta)
    b = beta * mu * mu
    return ViabilityValues(
        R=b - 2 * mu + lam,
        D=b - 4 * mu + 4 * lam,
        L=b - 2 * mu + 2 * lam,
        maximal_margin=2 * mu - lam,
    )


def in_maximal_set(lam, mu, tol: float = BOUNDARY_TOL) -> bool:
    if lam <= 0 or mu <= 0:
        raise ValueError(f"lambda and mu must be positive, got {lam}, {mu}")
    return 2 * mu - lam >= -tol


def classify(lam, mu, beta, tol: float = BOUNDARY_TOL) -> RegionLabel:
    """Region membership; ``R <= 0`` is weak, ``D < 0`` and ``L < 0`` are strict."""
    v = viability_values(lam, mu, beta)
    return RegionLabel(
        lam=lam,
        mu=mu,
        values=v,
        in_M=in_maximal_set(lam, mu, tol),
        in_M1=v.R <= tol,
        in_M2=v.D < -tol,
        in_M3=v.L < -tol,
        on_kyle_line=abs(lam - mu) <= tol * max(1.0, abs(mu)),
        on_R_boundary=abs(v.R) <= tol,
        on_D_boundary=abs(v.D) <= tol,
        on_L_boundary=abs(v.L) <= tol,
        on_M_boundary=abs(v.maximal_margin) <= tol,
    )


def grid_axis(lo: float, hi: float, steps: int) -> np.ndarray:
    """Axis points for a region scan.

    ``lo == 0`` means the half-open range ``(0, hi]`` sampled at
    ``hi * k / steps``; ``lo == hi`` is a single point.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or hi <= 0 or hi < lo:
        raise ValueError(f"invalid range ({lo}, {hi})")
    if lo == hi:
        return np.array([float(lo)])
    if int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps}")
    if lo == 0:
        return hi * np.arange(1, steps + 1) / steps
    if steps < 2:
        raise ValueError("a closed range needs steps >= 2")
    return np.linspace(lo, hi, int(steps))


@dataclass(frozen=True)
class RegionGrid:
    beta: float
    lambdas: np.ndarray
    mus: np.ndarray
    cells: tuple[RegionLabel, ...]  # row-major: lambda outer, mu inner

    def cell(self, i: int, j: int) -> RegionLabel:
        return self.cells[i * len(self.mus) + j]

    def nearest(self, lam, mu) -> RegionLabel:
        i = int(np.argmin(np.abs(self.lambdas - lam)))
        j = int(np.argmin(np.abs(self.mus - mu)))
        return self.cell(i, j)

    def mask(self, attr: str) -> np.ndarray:
        return np.array([getattr(c, attr) for c in self.cells]).reshape(
            len(self.lambdas), len(self.mus)
        )

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO() if stream is None else stream
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(GRID_HEADER)
        for c in self.cells:
            v = c.values
            w.writerow(
                [fmt_number(x) for x in (c.lam, c.mu, v.R, v.D, v.L)]
                + [fmt_number(b) for b in (c.in_M, c.in_M1, c.in_M2, c.in_M3, c.on_kyle_line)]
            )
        return buf.getvalue() if stream is None else ""


def region_grid(beta, lambda_range, mu_range, steps: int, tol: float = BOUNDARY_TOL) -> RegionGrid:
    lambdas = grid_axis(*lambda_range, steps)
    mus = grid_axis(*mu_range, steps)
    cells = tuple(classify(float(l), float(m), beta, tol) for l in lambdas for m in mus)
    return RegionGrid(beta, lambdas, mus, cells)
