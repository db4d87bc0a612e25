"""Geometric Brownian motion primitives.

Characteristic exponents, the increasing/decreasing solutions psi/phi of the
killed ODE, the scale function, hitting-time Laplace transforms, the
Dayanik--Karatzas hat coordinate, and expected local time at first exit.
Everything is closed form for ``dX = b X dt + sigma X dW`` discounted at rate
r on the state space (0, inf) with natural boundaries.

Normalization: psi(1) = phi(1) = 1, scale anchor S(1) = 0.  Downstream code
only consumes normalization-invariant quantities (ratios, thresholds,
tangency points).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DiffusionModel",
    "FundamentalSolutions",
    "HatFunction",
    "characteristic_roots",
    "hitting_laplace",
    "scale_function",
    "scale_density",
    "wronskian_gamma",
    "hat_transform",
    "green_expected_local_time",
]

# relative threshold below which 2b/sigma^2 == 1 takes the log branch of S
_LOG_BRANCH_TOL = 1e-10


def characteristic_roots(model: "DiffusionModel") -> tuple[float, float]:
    """Roots rho+ > 1 > 0 > rho- of (sigma^2/2) rho (rho - 1) + b rho - r = 0."""
    return _roots(model.b, model.sigma, model.r)


def _roots(b: float, sigma: float, r: float) -> tuple[float, float]:
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if r <= 0.0:
        raise ValueError(f"r must be positive, got {r}")
    h = 0.5 - b / sigma**2
    disc = math.sqrt(h * h + 2.0 * r / sigma**2)
    return h + disc, h - disc


@dataclass(frozen=True)
class DiffusionModel:
    """GBM with drift b, volatility sigma, discount rate r (all per unit time).

    Requires b < r so the perpetuity x/(r-b) is finite.
    """

    b: float
    sigma: float
    r: float
    rho_plus: float = field(init=False, repr=False, compare=False)
    rho_minus: float = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        rp, rm = _roots(self.b, self.sigma, self.r)
        if self.b >= self.r:
            raise ValueError(f"require b < r, got b={self.b}, r={self.r}")
        object.__setattr__(self, "rho_plus", rp)
        object.__setattr__(self, "rho_minus", rm)

    def sigma_at(self, x: float) -> float:
        """Diffusion coefficient sigma(x) = sigma * x."""
        return self.sigma * x

    def sigma2_at(self, x: float):
        """Squared diffusion coefficient; accepts arrays."""
        return (self.sigma * x) ** 2

    def generator_residual(self, rho: float) -> float:
        """(sigma^2/2) rho (rho-1) + b rho - r, zero at rho+/-."""
        return 0.5 * self.sigma**2 * rho * (rho - 1.0) + self.b * rho - self.r


def hitting_laplace(model: DiffusionModel, x: float, y: float) -> float:
    """E_x[exp(-r tau_y)] for the hitting time of y; in (0, 1], =1 iff x == y."""
    if x <= 0.0 or y <= 0.0:
        raise ValueError("states must be positive")
    if x <= y:
        return (x / y) ** model.rho_plus
    return (x / y) ** model.rho_minus


def scale_function(model: DiffusionModel, x) -> float:
    """Scale function anchored at 1: S(x) = (x^(1-2b/s^2) - 1)/(1-2b/s^2).

    Degenerates to log x when 2b/sigma^2 == 1.
    """
    n = 1.0 - 2.0 * model.b / model.sigma**2
    if abs(n) < _LOG_BRANCH_TOL:
        return np.log(x)
    return (x**n - 1.0) / n


def scale_density(model: DiffusionModel, x) -> float:
    """S'(x) = x^(-2b/sigma^2)."""
    return x ** (-2.0 * model.b / model.sigma**2)


def wronskian_gamma(model: DiffusionModel, x: float = 1.0) -> float:
    """(psi' phi - psi phi')/S' evaluated at x; constant in x by Abel."""
    rp, rm = model.rho_plus, model.rho_minus
    num = (rp - rm) * x ** (rp + rm - 1.0)
    return num / scale_density(model, x)


def green_expected_local_time(
    model: DiffusionModel, a: float, b_up: float, x: float, y: float
) -> float:
    """E_x[L^y at the first exit time of (a, b_up)].

    Uses the Green function of the killed diffusion:
    2 (S'(y))^-1 (S(x^y) - S(a)) (S(b) - S(x v y)) / (S(b) - S(a)).
    """
    if not (a < x < b_up and a < y < b_up):
        raise ValueError(
            f"states must lie inside ({a}, {b_up}); got x={x}, y={y}"
        )
    S = lambda z: scale_function(model, z)
    lo, hi = min(x, y), max(x, y)
    phi_ab = (S(lo) - S(a)) * (S(b_up) - S(hi)) / (S(b_up) - S(a))
    return 2.0 * phi_ab / scale_density(model, y)


@dataclass(frozen=True)
class FundamentalSolutions:
    """Evaluator bundle for psi, phi, the scale function and the hat coordinate.

    The bundle is the extension seam for non-GBM diffusions: downstream code
    only calls these evaluators, never the closed forms directly.
    """

    model: DiffusionModel
    psi: Callable[[float], float]
    dpsi: Callable[[float], float]
    phi: Callable[[float], float]
    dphi: Callable[[float], float]
    S: Callable[[float], float]
    dS: Callable[[float], float]
    zeta: Callable[[float], float]
    zeta_inv: Callable[[float], float]
    dzeta: Callable[[float], float]
    gamma: float

    @classmethod
    def for_gbm(cls, model: DiffusionModel) -> "FundamentalSolutions":
        rp, rm = model.rho_plus, model.rho_minus
        k = rm - rp  # zeta exponent, < 0
        return cls(
            model=model,
            psi=lambda x: x**rp,
            dpsi=lambda x: rp * x ** (rp - 1.0),
            phi=lambda x: x**rm,
            dphi=lambda x: rm * x ** (rm - 1.0),
            S=lambda x: scale_function(model, x),
            dS=lambda x: scale_density(model, x),
            zeta=lambda x: x**k,
            zeta_inv=lambda y: y ** (1.0 / k),
            dzeta=lambda x: k * x ** (k - 1.0),
            gamma=rp - rm,
        )

    def wronskian_no_scale(self, x: float) -> float:
        """psi' phi - psi phi' at x (the Wronskian before dividing by S')."""
        return self.dpsi(x) * self.phi(x) - self.psi(x) * self.dphi(x)


@dataclass(frozen=True)
class HatFunction:
    """g mapped through the hat coordinate: ghat(y) = (g/psi)(zeta^-1(y)).

    ``slope`` is exact when dg is supplied; ``curvature`` is exact when the
    generator residual Lg - rg is supplied (it uses the change-of-variable
    identity relating ghat'' to Lg - rg).  ``second_diff`` is always
    available as a numerical fallback.
    """

    fund: FundamentalSolutions
    g: Callable[[float], float]
    dg: Optional[Callable[[float], float]] = None
    lr: Optional[Callable[[float], float]] = None  # (Lg - rg)(x)

    def __call__(self, y: float) -> float:
        if y <= 0.0:
            raise ValueError("hat coordinate must be positive")
        x = self.fund.zeta_inv(y)
        return self.g(x) / self.fund.psi(x)

    def slope(self, y: float) -> float:
        if self.dg is None:
            raise ValueError("no derivative evaluator attached")
        f = self.fund
        x = f.zeta_inv(y)
        du = (self.dg(x) * f.psi(x) - self.g(x) * f.dpsi(x)) / f.psi(x) ** 2
        return du / f.dzeta(x)

    def curvature(self, y: float) -> float:
        if self.lr is None:
            raise ValueError("no generator-residual evaluator attached")
        f = self.fund
        x = f.zeta_inv(y)
        m = f.model
        denom = (f.gamma * f.dS(x)) ** 2 * m.sigma2_at(x)
        return 2.0 * f.phi(x) ** 3 / denom * self.lr(x)

    def second_diff(self, y: float, h: float) -> float:
        """Central second difference at y with half-width h."""
        return (self(y + h) - 2.0 * self(y) + self(y - h)) / h**2

    def tangent_coefficients(self, x_state: float) -> tuple[float, float]:
        """(A, B) with A psi + B phi tangent to g at the state x_state.

        In hat coordinates A is the intercept and B the slope of the tangent
        line to ghat at zeta(x_state).
        """
        y = self.fund.zeta(x_state)
        s = self.slope(y)
        return self(y) - y * s, s


def hat_transform(
    fund: FundamentalSolutions,
    g: Callable[[float], float],
    dg: Optional[Callable[[float], float]] = None,
    lr: Optional[Callable[[float], float]] = None,
) -> HatFunction:
    """Wrap g in the hat coordinate: ghat(y) = (g/psi)(zeta^-1(y))."""
    return HatFunction(fund=fund, g=g, dg=dg, lr=lr)
