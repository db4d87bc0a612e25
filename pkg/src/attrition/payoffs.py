"""Duopoly exit payoffs and stand-alone stopping.

Two firms earn a flow x in duopoly and m*x in monopoly; exiting pays the
liquidation value l_i.  Net of the perpetuity E(x) = x/(r-b) this gives the
concede payoff R_i = l_i - E and the follower payoff G_i = V_m_i - E, where
V_m_i is the monopoly value with its own optimal exit.  All branches are
closed form under GBM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diffusion import DiffusionModel, FundamentalSolutions, HatFunction, hat_transform

__all__ = [
    "DuopolyParams",
    "PlayerPayoffs",
    "StandAloneSolution",
    "AuditCheck",
    "AuditReport",
    "build_payoffs",
    "standalone_solve",
    "assumption_audit",
]


@dataclass(frozen=True)
class DuopolyParams:
    """Model plus liquidation values l1, l2 > 0 and monopoly multiple m > 1."""

    model: DiffusionModel
    l1: float
    l2: float
    m: float

    def __post_init__(self) -> None:
        if self.l1 <= 0.0 or self.l2 <= 0.0:
            raise ValueError(f"liquidation values must be positive, got {self.l1}, {self.l2}")
        if self.m <= 1.0:
            raise ValueError(f"monopoly multiple must exceed 1, got {self.m}")

    def liquidation(self, i: int) -> float:
        if i not in (1, 2):
            raise ValueError(f"player index must be 1 or 2, got {i}")
        return self.l1 if i == 1 else self.l2


@dataclass(frozen=True)
class PlayerPayoffs:
    """Closed-form evaluators for one player's payoff data.

    exit_threshold is the stand-alone x_R; alpha = x_R / m is where the
    monopoly value hits the liquidation floor, so G = R on (0, alpha].
    """

    params: DuopolyParams
    fund: FundamentalSolutions
    index: int
    l: float = field(init=False)
    exit_threshold: float = field(init=False)
    alpha: float = field(init=False)
    sign_change: float = field(init=False)  # root of LR - rR = x - r l

    def __post_init__(self) -> None:
        p, m = self.params, self.params.model
        l = p.liquidation(self.index)
        rm = m.rho_minus
        x_R = rm / (rm - 1.0) * (m.r - m.b) * l
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "exit_threshold", x_R)
        object.__setattr__(self, "alpha", x_R / p.m)
        object.__setattr__(self, "sign_change", m.r * l)

    # -- perpetuity and concede payoff -------------------------------------
    def E(self, x):
        m = self.params.model
        return x / (m.r - m.b)

    def R(self, x):
        return self.l - self.E(x)

    def dR(self, x):
        m = self.params.model
        x = np.asarray(x, dtype=float)
        return np.full_like(x, -1.0 / (m.r - m.b))[()]

    def lr_R(self, x):
        """(L R - r R)(x) = x - r l; single sign change at r l."""
        return x - self.params.model.r * self.l

    # -- follower payoff ----------------------------------------------------
    def _phi_coeff(self) -> float:
        # l / ((1 - rho-) phi(alpha)) in G's upper branch
        m = self.params.model
        return self.l / ((1.0 - m.rho_minus) * self.fund.phi(self.alpha))

    def Vm(self, x):
        """Monopoly value: m x/(r-b) + K phi above alpha, l below."""
        m = self.params.model
        x = np.asarray(x, dtype=float)
        up = self.params.m * x / (m.r - m.b) + self._phi_coeff() * self.fund.phi(x)
        out = np.where(x > self.alpha, up, self.l)
        return out[()]

    def G(self, x):
        m = self.params.model
        x = np.asarray(x, dtype=float)
        up = (self.params.m - 1.0) * x / (m.r - m.b) + self._phi_coeff() * self.fund.phi(x)
        out = np.where(x > self.alpha, up, self.l - x / (m.r - m.b))
        return out[()]

    def dG(self, x):
        m = self.params.model
        x = np.asarray(x, dtype=float)
        up = (self.params.m - 1.0) / (m.r - m.b) + self._phi_coeff() * self.fund.dphi(x)
        out = np.where(x > self.alpha, up, -1.0 / (m.r - m.b))
        return out[()]

    def lr_G(self, x):
        """(L G - r G)(x), exact per branch: -(m-1) x above alpha, x - r l below."""
        m = self.params.model
        x = np.asarray(x, dtype=float)
        out = np.where(x > self.alpha, -(self.params.m - 1.0) * x, x - m.r * self.l)
        return out[()]

    # -- hat-space views ----------------------------------------------------
    def hat_R(self) -> HatFunction:
        return hat_transform(self.fund, self.R, self.dR, self.lr_R)

    def hat_G(self) -> HatFunction:
        return hat_transform(self.fund, self.G, self.dG, self.lr_G)


def build_payoffs(params: DuopolyParams, i: int) -> PlayerPayoffs:
    """Evaluator set for player i."""
    fund = FundamentalSolutions.for_gbm(params.model)
    return PlayerPayoffs(params=params, fund=fund, index=i)


@dataclass(frozen=True)
class StandAloneSolution:
    """Optimal stopping of R against a stubborn opponent.

    V_R = R below x_R, proportional to phi above, with smooth fit at x_R.
    ``line_coeff`` is R(x_R)/phi(x_R), the slope of V_R-hat in the hat
    coordinate.
    """

    payoffs: PlayerPayoffs
    x_R: float = field(init=False)
    alpha: float = field(init=False)
    x0: float = field(init=False)
    line_coeff: float = field(init=False)

    def __post_init__(self) -> None:
        p = self.payoffs
        object.__setattr__(self, "x_R", p.exit_threshold)
        object.__setattr__(self, "alpha", p.alpha)
        object.__setattr__(self, "x0", p.sign_change)
        object.__setattr__(
            self, "line_coeff", p.R(p.exit_threshold) / p.fund.phi(p.exit_threshold)
        )

    def V_R(self, x):
        p = self.payoffs
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.x_R, p.R(x), self.line_coeff * p.fund.phi(x))
        return out[()]

    def smooth_fit_residual(self) -> float:
        """|R'(x_R) - phi'(x_R) R(x_R)/phi(x_R)| (should vanish)."""
        p = self.payoffs
        return abs(p.dR(self.x_R) - p.fund.dphi(self.x_R) * self.line_coeff)


def standalone_solve(payoffs: PlayerPayoffs) -> StandAloneSolution:
    return StandAloneSolution(payoffs=payoffs)


@dataclass(frozen=True)
class AuditCheck:
    name: str
    passed: bool
    worst_x: float
    detail: str


@dataclass(frozen=True)
class AuditReport:
    checks: tuple[AuditCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AuditCheck]:
        return [c for c in self.checks if not c.passed]


def assumption_audit(params: DuopolyParams, grid: np.ndarray) -> AuditReport:
    """Numeric audit of the standing assumptions on the payoff pair.

    Advisory: failures are reported, not raised, so parameter regions where
    the mixed construction is infeasible can still be explored.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ValueError("grid must be strictly increasing and positive")
    checks: list[AuditCheck] = []
    for i in (1, 2):
        p = build_payoffs(params, i)
        sa = standalone_solve(p)
        tag = f"player{i}"

        lr = p.lr_R(grid)
        bad = (grid < p.sign_change) & (lr >= 0) | (grid > p.sign_change) & (lr <= 0)
        checks.append(
            AuditCheck(
                f"{tag}:sign_LR_minus_rR",
                not bad.any(),
                float(grid[bad.argmax()]) if bad.any() else math.nan,
                f"x - r l changes sign once at x0={p.sign_change:.6g}",
            )
        )

        g, vr = p.G(grid), sa.V_R(grid)
        below = grid <= sa.alpha
        eq_bad = below & (np.abs(g - vr) > 1e-12 * np.maximum(1.0, np.abs(g)))
        strict_bad = ~below & (g <= vr)
        bad = eq_bad | strict_bad
        checks.append(
            AuditCheck(
                f"{tag}:G_dominates_VR",
                not bad.any(),
                float(grid[bad.argmax()]) if bad.any() else math.nan,
                "G = V_R on (0, alpha], G > V_R above",
            )
        )

        lrg = p.lr_G(grid)
        bad = lrg > 1e-12 * np.maximum(1.0, np.abs(grid))
        checks.append(
            AuditCheck(
                f"{tag}:LG_minus_rG_nonpositive",
                not bad.any(),
                float(grid[bad.argmax()]) if bad.any() else math.nan,
                "exact branch expressions: -(m-1)x above alpha, x - r l below",
            )
        )

        # growth: R/phi decays toward 0+, G/psi decays toward +inf
        lo = np.array([grid[0] * f for f in (1.0, 0.5, 0.25)])
        hi = np.array([grid[-1] * f for f in (1.0, 2.0, 4.0)])
        r_over_phi = p.R(lo) / p.fund.phi(lo)
        g_over_psi = p.G(hi) / p.fund.psi(hi)
        ok = bool(
            np.all(np.diff(np.abs(r_over_phi)) <= 0)
            and np.all(np.diff(np.abs(g_over_psi)) <= 0)
        )
        checks.append(
            AuditCheck(
                f"{tag}:growth_limits",
                ok,
                math.nan,
                "R/phi and G/psi decay at the grid ends",
            )
        )
    return AuditReport(checks=tuple(checks))
