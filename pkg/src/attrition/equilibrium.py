"""Markov-perfect equilibria of the duopoly exit game.

Constructs the pure, stubborn-pure, symmetric-mixed and singular-mixed
profiles, plus general type-2 alternating-atom profiles found by a
one-parameter shoot.  Strategies are (intensity measure, stopping set)
pairs; candidate value functions are piecewise Apsi+Bphi / R / G curves.
All tangency and intersection arithmetic is done in the hat coordinate,
where ODE solutions are affine and the concede payoff is strictly concave.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .diffusion import FundamentalSolutions, HatFunction
from .payoffs import (
    DuopolyParams,
    PlayerPayoffs,
    StandAloneSolution,
    build_payoffs,
    standalone_solve,
)

__all__ = [
    "Atom",
    "SymmetricDensity",
    "MarkovStrategy",
    "OdeCurve",
    "ValuePiece",
    "PiecewiseValue",
    "EquilibriumProfile",
    "EnduranceError",
    "InfeasibleEquilibriumError",
    "NoEquilibriumError",
    "pure_mpe",
    "stubborn_pure_mpe",
    "symmetric_mixed_mpe",
    "solve_exit_indifference",
    "tangent_curve",
    "singular_mpe_single_atom",
    "alternating_step",
    "alternating_sequence",
    "shoot_type2_equilibrium",
]

# absolute root-finding tolerance in the hat coordinate
HAT_TOL = 1e-12
# feasibility margins below this are reported as marginal (profile uncertified)
MARGINAL_FEASIBILITY = 1e-8


class EnduranceError(ValueError):
    """Raised when a construction requires a different endurance ordering."""


class InfeasibleEquilibriumError(ValueError):
    """A named feasibility inequality failed; carries the margins."""

    def __init__(self, message: str, margins: dict[str, float]):
        super().__init__(message)
        self.margins = margins


class NoEquilibriumError(RuntimeError):
    """The shooting objective has no admissible root; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


# --------------------------------------------------------------------------
# strategies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    q: float
    weight: float


@dataclass(frozen=True)
class SymmetricDensity:
    """Absolutely continuous part of the symmetric mixed profile.

    ``hazard`` is the Poisson intensity lambda(x) = (r l_opp - x)/(G_opp -
    R_opp)(x) on (lo, hi]; the intensity measure density w.r.t. Lebesgue is
    hazard / sigma^2(x).
    """

    lo: float
    hi: float
    opponent: PlayerPayoffs

    def hazard(self, x):
        x = np.asarray(x, dtype=float)
        p = self.opponent
        num = p.params.model.r * p.l - x
        with np.errstate(divide="ignore"):
            lam = num / (p.G(x) - p.R(x))
        out = np.where((x > self.lo) & (x <= self.hi), lam, 0.0)
        return out[()]

    def mu_density(self, x):
        return self.hazard(x) / self.opponent.params.model.sigma2_at(x)


@dataclass(frozen=True)
class MarkovStrategy:
    """(mu, S): atoms of the stopping intensity plus a sure-stop region.

    ``stopping_set`` is a tuple of disjoint (lo, hi] intervals; atoms must be
    listed with strictly decreasing locations and lie outside the stopping
    set.
    """

    atoms: tuple[Atom, ...] = ()
    density: Optional[SymmetricDensity] = None
    stopping_set: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        qs = [a.q for a in self.atoms]
        if any(a.weight <= 0.0 for a in self.atoms):
            raise ValueError("atom weights must be positive")
        if any(q <= 0.0 for q in qs):
            raise ValueError("atom locations must be positive")
        if any(qs[i] <= qs[i + 1] for i in range(len(qs) - 1)):
            raise ValueError("atom locations must be strictly decreasing")
        for lo, hi in self.stopping_set:
            if not (0.0 <= lo < hi):
                raise ValueError(f"bad stopping interval ({lo}, {hi}]")
            if any(lo < q <= hi for q in qs):
                raise ValueError("atoms must lie outside the stopping set")
        ivs = sorted(self.stopping_set)
        for (_, hi1), (lo2, _) in zip(ivs, ivs[1:]):
            if hi1 > lo2:
                raise ValueError("stopping intervals must be disjoint")

    @property
    def s_max(self) -> Optional[float]:
        """max S, or None for an empty stopping set (the boundary alpha)."""
        if not self.stopping_set:
            return None
        return max(hi for _, hi in self.stopping_set)

    @property
    def is_pure(self) -> bool:
        return not self.atoms and self.density is None

    @property
    def is_stubborn(self) -> bool:
        return self.is_pure and not self.stopping_set


# --------------------------------------------------------------------------
# piecewise values
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OdeCurve:
    """A psi + B phi, a solution of Lu - ru = 0."""

    fund: FundamentalSolutions
    A: float
    B: float

    def value(self, x):
        return self.A * self.fund.psi(x) + self.B * self.fund.phi(x)

    def deriv(self, x):
        return self.A * self.fund.dpsi(x) + self.B * self.fund.dphi(x)

    def hat_line(self) -> tuple[float, float]:
        """(intercept, slope) of the image in the hat coordinate."""
        return self.A, self.B


@dataclass(frozen=True)
class ValuePiece:
    """One branch of a candidate value function on (lo, hi]."""

    lo: float
    hi: Optional[float]  # None = +inf
    kind: str  # "ode" | "R" | "G"
    curve: Optional[OdeCurve] = None

    def __post_init__(self) -> None:
        if self.kind not in ("ode", "R", "G"):
            raise ValueError(f"unknown piece kind {self.kind!r}")
        if (self.kind == "ode") != (self.curve is not None):
            raise ValueError("ode pieces need a curve; payoff pieces must not have one")


@dataclass(frozen=True)
class PiecewiseValue:
    """Candidate value function assembled from contiguous pieces.

    Pieces must tile (0, inf): piece k lives on (b_{k-1}, b_k] with b_0 = 0
    and b_K = inf.  Value matching at the interior breakpoints is a verifier
    concern, not enforced here.
    """

    payoffs: PlayerPayoffs
    pieces: tuple[ValuePiece, ...]

    def __post_init__(self) -> None:
        if not self.pieces:
            raise ValueError("need at least one piece")
        if self.pieces[0].lo != 0.0 or self.pieces[-1].hi is not None:
            raise ValueError("pieces must cover (0, inf)")
        for a, b in zip(self.pieces, self.pieces[1:]):
            if a.hi is None or not math.isclose(a.hi, b.lo, rel_tol=0, abs_tol=0):
                raise ValueError("pieces must be contiguous")

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(p.hi for p in self.pieces[:-1])

    def piece_at(self, x: float) -> ValuePiece:
        # intervals are (lo, hi]: a breakpoint belongs to the piece below it
        idx = bisect.bisect_left(self.breakpoints, x)
        return self.pieces[idx]

    def _eval_piece(self, piece: ValuePiece, x):
        if piece.kind == "ode":
            return piece.curve.value(x)
        if piece.kind == "R":
            return self.payoffs.R(x)
        return self.payoffs.G(x)

    def _deriv_piece(self, piece: ValuePiece, x):
        if piece.kind == "ode":
            return piece.curve.deriv(x)
        if piece.kind == "R":
            return self.payoffs.dR(x)
        return self.payoffs.dG(x)

    def value(self, x):
        x_arr = np.asarray(x, dtype=float)
        if x_arr.ndim == 0:
            return float(self._eval_piece(self.piece_at(float(x_arr)), float(x_arr)))
        out = np.empty_like(x_arr)
        idx = np.searchsorted(np.asarray(self.breakpoints), x_arr, side="left")
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if mask.any():
                out[mask] = self._eval_piece(piece, x_arr[mask])
        return out

    def deriv(self, x: float, side: int = -1) -> float:
        """One-sided derivative; side=-1 from the left, +1 from the right."""
        if side not in (-1, 1):
            raise ValueError("side must be -1 or +1")
        if side == 1 and x in self.breakpoints:
            idx = self.breakpoints.index(x)
            return float(self._deriv_piece(self.pieces[idx + 1], x))
        return float(self._deriv_piece(self.piece_at(x), x))

    def deriv_jump(self, x: float) -> float:
        """w'(x+) - w'(x-)."""
        return self.deriv(x, +1) - self.deriv(x, -1)


# --------------------------------------------------------------------------
# profiles
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumProfile:
    params: DuopolyParams
    strategy1: MarkovStrategy
    strategy2: MarkovStrategy
    value1: PiecewiseValue
    value2: PiecewiseValue
    kind: str
    report: Optional["VerificationReport"] = None
    feasibility_margins: dict[str, float] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    _KINDS = ("pure", "stubborn-pure", "symmetric", "singular-n1", "alternating-type2", "external")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @property
    def certified(self) -> bool:
        return self.report is not None and self.report.certified

    def strategy(self, i: int) -> MarkovStrategy:
        return self.strategy1 if i == 1 else self.strategy2

    def value(self, i: int) -> PiecewiseValue:
        return self.value1 if i == 1 else self.value2

    def with_report(self, report: "VerificationReport") -> "EquilibriumProfile":
        return replace(self, report=report)


def _players(params: DuopolyParams):
    p1 = build_payoffs(params, 1)
    p2 = build_payoffs(params, 2)
    return p1, p2, standalone_solve(p1), standalone_solve(p2)


def _require_player1_enduring(sa1: StandAloneSolution, sa2: StandAloneSolution) -> None:
    if sa1.x_R > sa2.x_R or sa1.alpha > sa2.alpha:
        raise EnduranceError(
            "player 1 must be at least as enduring (alpha1 <= alpha2, "
            f"x_R1 <= x_R2); got x_R1={sa1.x_R:.8g} > x_R2={sa2.x_R:.8g}. "
            "Swap the players."
        )


def _standalone_value(payoffs: PlayerPayoffs, sa: StandAloneSolution) -> PiecewiseValue:
    line = OdeCurve(payoffs.fund, 0.0, sa.line_coeff)
    return PiecewiseValue(
        payoffs=payoffs,
        pieces=(
            ValuePiece(0.0, sa.x_R, "R"),
            ValuePiece(sa.x_R, None, "ode", line),
        ),
    )


def _wait_for_opponent_value(
    payoffs: PlayerPayoffs, threshold: float
) -> PiecewiseValue:
    """G below the opponent's sure-stop threshold, G(th)/phi(th) * phi above."""
    coeff = payoffs.G(threshold) / payoffs.fund.phi(threshold)
    return PiecewiseValue(
        payoffs=payoffs,
        pieces=(
            ValuePiece(0.0, threshold, "G"),
            ValuePiece(threshold, None, "ode", OdeCurve(payoffs.fund, 0.0, coeff)),
        ),
    )


def pure_mpe(params: DuopolyParams) -> EquilibriumProfile:
    """Player 1 concedes only on (0, alpha1], player 2 at its stand-alone x_R2."""
    p1, p2, sa1, sa2 = _players(params)
    _require_player1_enduring(sa1, sa2)
    s1 = MarkovStrategy(stopping_set=((0.0, sa1.alpha),))
    s2 = MarkovStrategy(stopping_set=((0.0, sa2.x_R),))
    return EquilibriumProfile(
        params=params,
        strategy1=s1,
        strategy2=s2,
        value1=_wait_for_opponent_value(p1, sa2.x_R),
        value2=_standalone_value(p2, sa2),
        kind="pure",
    )


def stubborn_pure_mpe(params: DuopolyParams) -> EquilibriumProfile:
    """Player 1 plays stand-alone, player 2 never concedes.

    Valid only when waiting dominates conceding for player 2; checked on a
    log grid of 400 states around the thresholds.
    """
    p1, p2, sa1, sa2 = _players(params)
    _require_player1_enduring(sa1, sa2)
    value2 = _wait_for_opponent_value(p2, sa1.x_R)
    grid = np.geomspace(sa1.alpha / 4.0, 8.0 * sa2.x_R, 400)
    vals = value2.value(grid) - p2.R(grid)
    if np.any(vals < -1e-12):
        x_bad = float(grid[np.argmax(vals < -1e-12)])
        raise EnduranceError(
            f"stubborn player 2 is not a best reply: waiting value drops below "
            f"R2 first at x={x_bad:.8g}"
        )
    s1 = MarkovStrategy(stopping_set=((0.0, sa1.x_R),))
    s2 = MarkovStrategy()
    return EquilibriumProfile(
        params=params,
        strategy1=s1,
        strategy2=s2,
        value1=_standalone_value(p1, sa1),
        value2=value2,
        kind="stubborn-pure",
    )


def symmetric_mixed_mpe(params: DuopolyParams) -> EquilibriumProfile:
    """Equally enduring players concede at the indifference intensity.

    Each player's hazard lambda(x) = (r l_opp - x)/(G_opp - R_opp)(x) on
    (alpha*, x*], with the sure stop on (0, alpha*]; both values equal the
    stand-alone V_R.
    """
    p1, p2, sa1, sa2 = _players(params)
    if not math.isclose(sa1.x_R, sa2.x_R, rel_tol=1e-12):
        raise EnduranceError(
            f"players must be equally enduring: x_R1={sa1.x_R:.10g} != "
            f"x_R2={sa2.x_R:.10g}"
        )
    alpha_star, x_star = sa1.alpha, sa1.x_R
    d1 = SymmetricDensity(lo=alpha_star, hi=x_star, opponent=p2)
    d2 = SymmetricDensity(lo=alpha_star, hi=x_star, opponent=p1)
    s1 = MarkovStrategy(density=d1, stopping_set=((0.0, alpha_star),))
    s2 = MarkovStrategy(density=d2, stopping_set=((0.0, alpha_star),))
    return EquilibriumProfile(
        params=params,
        strategy1=s1,
        strategy2=s2,
        value1=_standalone_value(p1, sa1),
        value2=_standalone_value(p2, sa2),
        kind="symmetric",
    )


# --------------------------------------------------------------------------
# hat-space machinery
# --------------------------------------------------------------------------


def tangent_curve(payoffs: PlayerPayoffs, q: float) -> OdeCurve:
    """The solution of Lu - ru = 0 tangent to R at q (tangent line in hat space)."""
    sa_x = payoffs.exit_threshold
    if q > sa_x * (1.0 + 1e-12):
        raise ValueError(f"tangency point {q:.8g} beyond the stand-alone threshold {sa_x:.8g}")
    A, B = payoffs.hat_R().tangent_coefficients(q)
    return OdeCurve(payoffs.fund, A, B)


def _bracketed_root(f: Callable[[float], float], lo: float, hi: float) -> float:
    """Brent on [lo, hi] with a sign check; tolerance HAT_TOL absolute."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise RuntimeError(
            f"root not bracketed on [{lo:.8g}, {hi:.8g}]: f={flo:.3g}, {fhi:.3g}"
        )
    return float(brentq(f, lo, hi, xtol=HAT_TOL, rtol=8.9e-16, maxiter=300))


def solve_exit_indifference(params: DuopolyParams) -> tuple[float, float]:
    """(x_under2, theta): the state where conceding at x_R1 is matched by
    waiting for the opponent's sure stop.

    Computed twice: the closed form theta = [(1-m^rho-)/((-rho-)(m-1))]
    ^(1/(1-rho-)) and a hat-space bisection of C1 y = G1hat(y); the two must
    agree to 1e-10 relative.
    """
    p1, p2, sa1, sa2 = _players(params)
    _require_player1_enduring(sa1, sa2)
    m, rm = params.m, params.model.rho_minus
    theta = ((1.0 - m**rm) / ((-rm) * (m - 1.0))) ** (1.0 / (1.0 - rm))
    x_closed = theta * sa1.x_R

    fund = p1.fund
    hat_G1 = p1.hat_G()
    C1 = sa1.line_coeff
    y_lo = fund.zeta(sa1.x_R)
    y_hi = fund.zeta(sa1.alpha)
    y_root = _bracketed_root(lambda y: C1 * y - hat_G1(y), y_lo, y_hi)
    x_bisect = fund.zeta_inv(y_root)

    if abs(x_bisect - x_closed) > 1e-10 * x_closed:
        raise RuntimeError(
            f"exit-indifference mismatch: closed form {x_closed!r} vs "
            f"hat bisection {x_bisect!r}"
        )
    if not (1.0 / m < theta < 1.0):
        raise RuntimeError(f"theta={theta!r} outside (1/m, 1)")
    return x_closed, theta


def alternating_step(
    hat_R: HatFunction, x_hat: float, y_hat: float, z_cap: float = 1e200
) -> Optional[float]:
    """The unique z > y where the tangents to R-hat at x and z meet at y.

    Returns None when no such z exists below z_cap (the recursion has left
    the domain).  Solved by geometric bracketing plus Brent on the
    tangent-line mismatch, which is strictly increasing in z under strict
    concavity.
    """
    if not (0.0 < x_hat < y_hat):
        raise ValueError(f"need 0 < x_hat < y_hat, got {x_hat}, {y_hat}")
    sx = hat_R.slope(x_hat)
    target = hat_R(x_hat) + sx * (y_hat - x_hat)

    def mismatch(z: float) -> float:
        return hat_R(z) + hat_R.slope(z) * (y_hat - z) - target

    lo = y_hat
    f_lo = mismatch(lo)
    if f_lo >= 0.0:
        # tangency degenerate (x == y); no growth available
        return None
    hi = 2.0 * y_hat
    while mismatch(hi) < 0.0:
        lo = hi
        hi *= 2.0
        if hi > z_cap:
            return None
    return _bracketed_root(mismatch, lo, hi)


def alternating_sequence(
    params: DuopolyParams,
    q2_first: float,
    floor: float = 1e-6,
    max_terms: int = 500,
) -> tuple[list[float], list[float]]:
    """Intertwined atom candidates (q1 list, q2 list) down to ``floor``.

    Starts from q1_1 = x_R1 and the given q2_1, alternating the tangent
    intersection step between the two players' concede payoffs.
    """
    p1, p2, sa1, sa2 = _players(params)
    if not (0.0 < q2_first < sa1.x_R):
        raise ValueError(f"q2_first must lie in (0, x_R1), got {q2_first}")
    fund = p1.fund
    hats = (p1.hat_R(), p2.hat_R())
    ys = [fund.zeta(sa1.x_R), fund.zeta(q2_first)]
    z_cap = fund.zeta(floor)
    while len(ys) < max_terms:
        # producing 1-based index len+1: odd -> player 1's family
        hat = hats[0] if len(ys) % 2 == 0 else hats[1]
        z = alternating_step(hat, ys[-2], ys[-1], z_cap=z_cap)
        if z is None or z > z_cap:
            break
        ys.append(z)
    q1s = [fund.zeta_inv(y) for y in ys[0::2]]
    q2s = [fund.zeta_inv(y) for y in ys[1::2]]
    return q1s, q2s


# --------------------------------------------------------------------------
# singular and alternating profiles
# --------------------------------------------------------------------------


def _feasibility_margins(
    p2: PlayerPayoffs, sa1: StandAloneSolution, sa2: StandAloneSolution, T2: OdeCurve
) -> dict[str, float]:
    """Margins of G2(x_R1) > T2_{x2}(x_R1) > T2_{x_R2}(x_R1) (and the outer pair)."""
    xr1 = sa1.x_R
    g2 = float(p2.G(xr1))
    t_mid = float(T2.value(xr1))
    t_sa = sa2.line_coeff * p2.fund.phi(xr1)
    return {
        "G2_minus_T2_x2": g2 - t_mid,
        "T2_x2_minus_T2_xR2": t_mid - t_sa,
        "G2_minus_T2_xR2": g2 - t_sa,
    }


def singular_mpe_single_atom(
    params: DuopolyParams, refine_trembling_hand: bool = True
) -> EquilibriumProfile:
    """Player 1 randomizes at x_R1; player 2 concedes surely below x_under2.

    The atom weight a1 balances the derivative jump of player 2's value at
    x_R1 against the gain G2 - w2 there.  With ``refine_trembling_hand`` the
    dominated region (0, alpha1] is added to player 1's stopping set.
    """
    p1, p2, sa1, sa2 = _players(params)
    _require_player1_enduring(sa1, sa2)
    x_under2, _theta = solve_exit_indifference(params)
    xr1 = sa1.x_R

    T2 = tangent_curve(p2, x_under2)
    margins = _feasibility_margins(p2, sa1, sa2, T2)
    failed = {k: v for k, v in margins.items() if v <= 0.0}
    if failed:
        names = ", ".join(f"{k} = {v:.6g}" for k, v in failed.items())
        raise InfeasibleEquilibriumError(
            f"singular profile infeasible: {names}", margins
        )
    warnings = []
    if min(margins.values()) < MARGINAL_FEASIBILITY:
        warnings.append("marginal_feasibility")

    fund = p1.fund
    w1 = PiecewiseValue(
        payoffs=p1,
        pieces=(
            ValuePiece(0.0, x_under2, "G"),
            ValuePiece(x_under2, None, "ode", OdeCurve(fund, 0.0, sa1.line_coeff)),
        ),
    )
    A_top = T2.value(xr1) / fund.phi(xr1)
    w2 = PiecewiseValue(
        payoffs=p2,
        pieces=(
            ValuePiece(0.0, x_under2, "R"),
            ValuePiece(x_under2, xr1, "ode", T2),
            ValuePiece(xr1, None, "ode", OdeCurve(fund, 0.0, A_top)),
        ),
    )
    jump = w2.deriv_jump(xr1)
    a1 = -0.5 * jump / (float(p2.G(xr1)) - w2.value(xr1))

    s1 = MarkovStrategy(
        atoms=(Atom(q=xr1, weight=a1),),
        stopping_set=((0.0, sa1.alpha),) if refine_trembling_hand else (),
    )
    s2 = MarkovStrategy(stopping_set=((0.0, x_under2),))
    return EquilibriumProfile(
        params=params,
        strategy1=s1,
        strategy2=s2,
        value1=w1,
        value2=w2,
        kind="singular-n1",
        feasibility_margins=margins,
        warnings=tuple(warnings),
    )


def _close_with_G1(p1: PlayerPayoffs, q1_last: float) -> Optional[float]:
    """State s2 < q1_last where the tangent to R1 at q1_last meets G1.

    None when q1_last is in the G1 = R1 region, where no crossing exists.
    """
    if q1_last <= p1.alpha * (1.0 + 1e-12):
        return None
    fund = p1.fund
    hat_R1, hat_G1 = p1.hat_R(), p1.hat_G()
    yq = fund.zeta(q1_last)
    s = hat_R1.slope(yq)
    c = hat_R1(yq) - yq * s

    def h(y: float) -> float:
        return c + s * y - hat_G1(y)

    y_hi = fund.zeta(p1.alpha)
    if h(yq) >= 0.0 or h(y_hi) <= 0.0:
        return None
    return fund.zeta_inv(_bracketed_root(h, yq, y_hi))


@dataclass(frozen=True)
class _Type2Candidate:
    q1s: tuple[float, ...]
    q2s: tuple[float, ...]
    s2_from_1: float
    s2_from_2: Optional[float]

    @property
    def objective(self) -> Optional[float]:
        if self.s2_from_2 is None:
            return None
        return self.s2_from_1 - self.s2_from_2


def _type2_candidate(
    params: DuopolyParams,
    p1: PlayerPayoffs,
    p2: PlayerPayoffs,
    sa1: StandAloneSolution,
    q2_first: Optional[float],
    n: int,
) -> Optional[_Type2Candidate]:
    fund = p1.fund
    hats = (p1.hat_R(), p2.hat_R())
    if n == 1:
        s2a = _close_with_G1(p1, sa1.x_R)
        if s2a is None:
            return None
        return _Type2Candidate((sa1.x_R,), (), s2a, None)
    ys = [fund.zeta(sa1.x_R), fund.zeta(q2_first)]
    z_cap = fund.zeta(p1.alpha * 1e-3)
    while len(ys) < 2 * n - 1:
        hat = hats[0] if len(ys) % 2 == 0 else hats[1]
        z = alternating_step(hat, ys[-2], ys[-1], z_cap=z_cap)
        if z is None:
            return None
        ys.append(z)
    q1s = tuple(fund.zeta_inv(y) for y in ys[0::2])
    q2s = tuple(fund.zeta_inv(y) for y in ys[1::2])
    s2a = _close_with_G1(p1, q1s[-1])
    if s2a is None:
        return None
    z = alternating_step(hats[1], fund.zeta(q2s[-1]), fund.zeta(q1s[-1]), z_cap=z_cap)
    if z is None:
        return None
    return _Type2Candidate(q1s, q2s, s2a, fund.zeta_inv(z))


def _assemble_type2(
    params: DuopolyParams,
    p1: PlayerPayoffs,
    p2: PlayerPayoffs,
    cand: _Type2Candidate,
    s2: float,
) -> EquilibriumProfile:
    """Build strategies and piecewise values for an interlaced candidate."""
    fund = p1.fund
    q1s, q2s = list(cand.q1s), list(cand.q2s)
    n = len(q1s)

    # player 1's value: tangent to R1 at q1_l between opponent atoms, G1 below s2
    w1_pieces = [ValuePiece(0.0, s2, "G")]
    inner_breaks = [s2] + q2s[::-1]  # ascending: s2 < q2_{n-1} < ... < q2_1
    for l in range(n, 0, -1):  # piece on (break, break_next]
        lo = inner_breaks[n - l]
        hi = inner_breaks[n - l + 1] if l > 1 else None
        w1_pieces.append(ValuePiece(lo, hi, "ode", tangent_curve(p1, q1s[l - 1])))
    w1 = PiecewiseValue(payoffs=p1, pieces=tuple(w1_pieces))

    # player 2's value: tangent at s2 first, then tangents at q2_l, phi-decay top
    w2_pieces = [ValuePiece(0.0, s2, "R")]
    curves2 = [tangent_curve(p2, s2)] + [tangent_curve(p2, q) for q in q2s[::-1]]
    breaks2 = [s2] + q1s[::-1]  # ascending: s2 < q1_n < ... < q1_1
    for j, curve in enumerate(curves2):
        w2_pieces.append(ValuePiece(breaks2[j], breaks2[j + 1], "ode", curve))
    top_val = curves2[-1].value(q1s[0])
    w2_pieces.append(
        ValuePiece(q1s[0], None, "ode", OdeCurve(fund, 0.0, top_val / fund.phi(q1s[0])))
    )
    w2 = PiecewiseValue(payoffs=p2, pieces=tuple(w2_pieces))

    # weights from the jump conditions
    a_list, b_list = [], []
    for q in q1s:
        jump = w2.deriv_jump(q)
        a_list.append(-0.5 * jump / (float(p2.G(q)) - w2.value(q)))
    for q in q2s:
        jump = w1.deriv_jump(q)
        b_list.append(-0.5 * jump / (float(p1.G(q)) - w1.value(q)))

    bad = [w for w in a_list + b_list if not (w > 0.0 and math.isfinite(w))]
    if bad:
        raise NoEquilibriumError(
            "candidate rejected: nonpositive atom weight",
            {
                "q1": q1s,
                "q2": q2s,
                "s2": s2,
                "weights_1": a_list,
                "weights_2": b_list,
            },
        )

    s1 = MarkovStrategy(atoms=tuple(Atom(q, w) for q, w in zip(q1s, a_list)))
    s2_strat = MarkovStrategy(
        atoms=tuple(Atom(q, w) for q, w in zip(q2s, b_list)),
        stopping_set=((0.0, s2),),
    )
    return EquilibriumProfile(
        params=params,
        strategy1=s1,
        strategy2=s2_strat,
        value1=w1,
        value2=w2,
        kind="alternating-type2",
    )


def shoot_type2_equilibrium(
    params: DuopolyParams, n: int, n_scan: int = 64
) -> EquilibriumProfile:
    """Type-2 profile with n player-1 atoms and n-1 player-2 atoms.

    Scans the single free scalar q2_1 over (alpha1, x_R1), looking for the
    state where the s2 implied by player 1's value matching with G1 agrees
    with the s2 implied by player 2's smooth fit, then bisects the bracket.
    n = 1 needs no scan: s2 is the exit-indifference root directly.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    p1, p2, sa1, sa2 = _players(params)
    _require_player1_enduring(sa1, sa2)

    if n == 1:
        cand = _type2_candidate(params, p1, p2, sa1, None, 1)
        if cand is None:
            raise NoEquilibriumError(
                "no type-2 equilibrium with 1 atom found", {"reason": "no G1 closure"}
            )
        return _assemble_type2(params, p1, p2, cand, cand.s2_from_1)

    def objective(q2_first: float) -> Optional[float]:
        cand = _type2_candidate(params, p1, p2, sa1, q2_first, n)
        return None if cand is None else cand.objective

    lo, hi = sa1.alpha * (1.0 + 1e-9), sa1.x_R * (1.0 - 1e-9)
    grid = np.geomspace(lo, hi, n_scan)
    vals = [objective(q) for q in grid]
    brackets = [
        (grid[i], grid[i + 1])
        for i in range(n_scan - 1)
        if vals[i] is not None and vals[i + 1] is not None and vals[i] * vals[i + 1] < 0.0
    ]
    if not brackets:
        raise NoEquilibriumError(
            f"no type-2 equilibrium with {n} atoms found",
            {
                "scanned": int(sum(v is not None for v in vals)),
                "range": (float(lo), float(hi)),
                "sign_changes": 0,
            },
        )
    warnings = []
    if len(brackets) > 1:
        warnings.append(f"multiple_sign_changes:{len(brackets)}")

    def objective_strict(q: float) -> float:
        v = objective(q)
        if v is None:
            raise NoEquilibriumError(
                f"no type-2 equilibrium with {n} atoms found",
                {"reason": f"candidate degenerated inside the bracket at q2_1={q!r}"},
            )
        return v

    root = _bracketed_root(objective_strict, *brackets[0])
    cand = _type2_candidate(params, p1, p2, sa1, root, n)
    if cand is None or cand.objective is None:
        raise NoEquilibriumError(
            f"no type-2 equilibrium with {n} atoms found",
            {"reason": "candidate degenerated at the root"},
        )
    s2 = 0.5 * (cand.s2_from_1 + cand.s2_from_2)
    profile = _assemble_type2(params, p1, p2, cand, s2)
    return replace(profile, warnings=profile.warnings + tuple(warnings))
