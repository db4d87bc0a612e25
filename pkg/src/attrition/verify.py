"""Residual verifier for candidate equilibrium profiles.

Checks the variational structure satisfied by a profile's value functions:
hat-space affinity of every ODE piece, value matching at own atoms,
payoff identities on the stopping regions, smooth fit at the sure-stop
boundary, the local-time jump conditions tying atom weights to derivative
kinks, dominance margins, and phi-decay at large states.  Always returns a
report; certification is a threshold decision on the residual classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .equilibrium import EquilibriumProfile, MarkovStrategy, PiecewiseValue
from .payoffs import DuopolyParams, build_payoffs, standalone_solve

__all__ = ["VerificationReport", "verify_variational_system", "default_grid"]

RESIDUAL_TOL = 1e-9
MARGIN_TOL = -1e-10

#: residual classes in report order
CLASSES = (
    "ode",
    "value_match",
    "stop_region",
    "smooth_fit",
    "jump",
    "margin",
    "sandwich",
    "decay",
    "density_indiff",
)


@dataclass(frozen=True)
class VerificationReport:
    residuals: dict[str, float]
    margins: dict[str, float]
    flags: dict[str, str] = field(default_factory=dict)
    tolerance: float = RESIDUAL_TOL

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def failing_classes(self) -> list[str]:
        bad = [k for k, v in self.residuals.items() if v >= self.tolerance]
        bad += [k for k, v in self.margins.items() if v < MARGIN_TOL]
        return bad

    @property
    def certified(self) -> bool:
        return not self.failing_classes and "marginal_feasibility" not in self.flags

    def summary(self) -> str:
        lines = [
            f"{k:>14}: {self.residuals[k]:.3e}"
            for k in CLASSES
            if k in self.residuals
        ]
        lines += [f"{k:>14}: margin {v:+.3e}" for k, v in self.margins.items()]
        for k, v in self.flags.items():
            lines.append(f"{k:>14}: {v}")
        verdict = "CERTIFIED" if self.certified else "NOT CERTIFIED"
        return "\n".join(lines + [verdict])


def default_grid(profile: EquilibriumProfile, n: int = 400) -> np.ndarray:
    """Log grid from half the lowest breakpoint scale to 4 x_R1."""
    sa1 = standalone_solve(build_payoffs(profile.params, 1))
    anchors = [sa1.alpha]
    for s in (profile.strategy1, profile.strategy2):
        if s.s_max is not None:
            anchors.append(s.s_max)
        anchors += [a.q for a in s.atoms]
    lo = 0.5 * min(anchors)
    return np.geomspace(lo, 4.0 * sa1.x_R, n)


def _hat_affinity_defect(value: PiecewiseValue, lo: float, hi: float) -> float:
    """Normalized second difference of w-hat inside an ODE piece.

    Exact ODE solutions are affine in the hat coordinate, so the defect is
    zero up to rounding for a correctly assembled piece.
    """
    fund = value.payoffs.fund
    y_lo, y_hi = fund.zeta(hi), fund.zeta(lo)  # zeta reverses order
    ys = np.linspace(y_lo, y_hi, 7)[1:-1]
    h = 0.45 * (ys[1] - ys[0])
    worst = 0.0
    for y in ys:
        w = [
            value.value(fund.zeta_inv(yy)) / fund.psi(fund.zeta_inv(yy))
            for yy in (y - h, y, y + h)
        ]
        scale = max(abs(w[1]), 1e-30)
        worst = max(worst, abs(w[0] - 2.0 * w[1] + w[2]) / scale)
    return worst


def _stop_intervals_points(strategy: MarkovStrategy, grid: np.ndarray) -> np.ndarray:
    mask = np.zeros_like(grid, dtype=bool)
    for lo, hi in strategy.stopping_set:
        mask |= (grid > lo) & (grid <= hi)
    return grid[mask]


def verify_variational_system(
    params: DuopolyParams,
    profile: EquilibriumProfile,
    grid: Optional[np.ndarray] = None,
    tol: float = RESIDUAL_TOL,
) -> VerificationReport:
    """Run every residual class against the profile on the grid."""
    if grid is None:
        grid = default_grid(profile)
    grid = np.asarray(grid, dtype=float)
    fund = profile.value1.payoffs.fund

    residuals = {k: 0.0 for k in CLASSES if k != "density_indiff"}
    margins: dict[str, float] = {}
    flags: dict[str, str] = {}

    payoffs = {1: profile.value1.payoffs, 2: profile.value2.payoffs}
    values = {1: profile.value1, 2: profile.value2}
    strategies = {1: profile.strategy1, 2: profile.strategy2}
    standalones = {i: standalone_solve(payoffs[i]) for i in (1, 2)}

    # (a) ODE pieces are affine in hat coordinates; payoff pieces are exempt
    for i in (1, 2):
        w = values[i]
        for piece in w.pieces:
            if piece.kind != "ode":
                continue
            hi = piece.hi if piece.hi is not None else 4.0 * piece.lo
            residuals["ode"] = max(
                residuals["ode"], _hat_affinity_defect(w, piece.lo, hi)
            )
        # continuity at breakpoints folds into the same regularity class
        for xb in w.breakpoints:
            gap = abs(
                w._eval_piece(w.piece_at(xb), xb)
                - w._eval_piece(w.pieces[w.breakpoints.index(xb) + 1], xb)
            )
            residuals["ode"] = max(residuals["ode"], gap / max(1.0, abs(w.value(xb))))

    # (b) value matching at own atoms; own atoms must be smooth points
    for i in (1, 2):
        w, p = values[i], payoffs[i]
        for atom in strategies[i].atoms:
            residuals["value_match"] = max(
                residuals["value_match"], abs(w.value(atom.q) - float(p.R(atom.q)))
            )
            if atom.q in w.breakpoints:
                residuals["ode"] = max(residuals["ode"], abs(w.deriv_jump(atom.q)))

    # (c) stopping-region payoff identities on the grid
    for i, j in ((1, 2), (2, 1)):
        w, p = values[i], payoffs[i]
        own = _stop_intervals_points(strategies[i], grid)
        if own.size:
            residuals["stop_region"] = max(
                residuals["stop_region"],
                float(np.max(np.abs(w.value(own) - p.R(own)))),
            )
        opp = _stop_intervals_points(strategies[j], grid)
        if opp.size:
            residuals["stop_region"] = max(
                residuals["stop_region"],
                float(np.max(np.abs(w.value(opp) - p.G(opp)))),
            )

    # (d) smooth fit where a player stops surely at an interior boundary
    for i in (1, 2):
        s_max = strategies[i].s_max
        if s_max is None:
            continue
        w, p = values[i], payoffs[i]
        residuals["smooth_fit"] = max(
            residuals["smooth_fit"], abs(w.deriv(s_max, +1) - float(p.dR(s_max)))
        )

    # (e) jump conditions at the opponent's atoms
    n_atoms = 0
    for i, j in ((1, 2), (2, 1)):
        w_j = values[j]
        p_j = payoffs[j]
        for atom in strategies[i].atoms:
            n_atoms += 1
            gain = float(p_j.G(atom.q)) - w_j.value(atom.q)
            res = abs(atom.weight * gain + 0.5 * w_j.deriv_jump(atom.q))
            residuals["jump"] = max(residuals["jump"], res)
            margins[f"kink_w{j}_at_{atom.q:.6g}"] = -w_j.deriv_jump(atom.q)
            margins[f"gain_w{j}_at_{atom.q:.6g}"] = gain
    if n_atoms == 0:
        flags["jump"] = "no atoms: VS jump conditions vacuously pass"

    # (f) dominance margins on the grid
    for i in (1, 2):
        w, p = values[i], payoffs[i]
        wv = w.value(grid)
        margins[f"w{i}_minus_R{i}"] = float(np.min(wv - p.R(grid)))
        margins[f"G{i}_minus_w{i}"] = float(np.min(p.G(grid) - wv))
        margins[f"w{i}_minus_VR{i}"] = float(np.min(wv - standalones[i].V_R(grid)))
        residuals["margin"] = max(
            residuals["margin"], max(0.0, -margins[f"w{i}_minus_R{i}"])
        )
        residuals["sandwich"] = max(
            residuals["sandwich"],
            max(0.0, -margins[f"G{i}_minus_w{i}"]),
            max(0.0, -margins[f"w{i}_minus_VR{i}"]),
        )

    # (g) phi-decay proxy at three log-spaced large states
    x_ref = standalones[1].x_R
    for i in (1, 2):
        w = values[i]
        w_ref = abs(w.value(x_ref))
        ratios = [
            abs(w.value(c * x_ref)) * fund.psi(x_ref) / fund.psi(c * x_ref)
            for c in (4.0, 40.0, 400.0)
        ]
        if not (ratios[0] > ratios[1] > ratios[2]):
            flags["decay"] = f"w{i} ratio sequence not decreasing: {ratios}"
            residuals["decay"] = max(residuals["decay"], 1.0)
        residuals["decay"] = max(residuals["decay"], ratios[-1] / max(1.0, w_ref))

    # density indifference, only for absolutely continuous strategies
    for i, j in ((1, 2), (2, 1)):
        dens = strategies[i].density
        if dens is None:
            continue
        residuals.setdefault("density_indiff", 0.0)
        p_j = payoffs[j]
        pts = grid[(grid > dens.lo * (1.0 + 1e-9)) & (grid <= dens.hi)]
        lam = dens.hazard(pts)
        lhs = lam * (p_j.G(pts) - p_j.R(pts))
        rhs = p_j.params.model.r * p_j.l - pts
        residuals["density_indiff"] = max(
            residuals["density_indiff"],
            float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs)))),
        )

    # feasibility margins recorded at construction ride along
    for k, v in profile.feasibility_margins.items():
        margins[f"feasibility_{k}"] = v
    for wmsg in profile.warnings:
        if wmsg.startswith("marginal_feasibility"):
            flags["marginal_feasibility"] = "feasibility margin below 1e-8"
        else:
            flags.setdefault("warnings", wmsg)

    return VerificationReport(
        residuals=residuals, margins=margins, flags=flags, tolerance=tol
    )
