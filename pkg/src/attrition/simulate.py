"""Monte Carlo engine for randomized stopping strategies.

Exact lognormal path steps, band estimators for the local time clocks that
drive atom strategies, exponential-clock sampling of randomized stopping
times, payoff estimation with explicit horizon-truncation bias bounds,
best-reply deviation sweeps using common random numbers, and the negative
comovement probe.

Determinism contract: identical (seed, config, profile) give bit-identical
per-path results regardless of worker count; means use compensated
summation over per-path arrays.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .diffusion import DiffusionModel
from .equilibrium import EquilibriumProfile, MarkovStrategy
from .payoffs import DuopolyParams, build_payoffs

__all__ = [
    "CAUSES",
    "SimConfig",
    "LocalTimeAccumulator",
    "PayoffEstimate",
    "PathResults",
    "StopSample",
    "SweepReport",
    "ComovementStats",
    "gbm_step",
    "local_time_update",
    "sample_stop",
    "simulate_profile_paths",
    "simulate_profile",
    "estimate_payoff",
    "best_reply_sweep",
    "comovement_probe",
    "green_local_time_estimate",
]

CAUSES = ("own-atom", "own-set", "opp-atom", "opp-set", "horizon")


def _apply_thread_cap() -> None:
    cap = os.environ.get("ATTRITION_THREADS")
    if not cap or not _kernels.HAVE_NUMBA:
        return
    import numba

    n = max(1, int(cap))
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


@dataclass(frozen=True)
class SimConfig:
    """Path-simulation settings.

    The band half-width for the local-time estimator at an atom q is
    c_band * sigma(q) * sqrt(dt), matching the one-step displacement scale.
    """

    x0: float
    dt: float
    horizon: float
    n_paths: int
    seed: int
    c_band: float = 1.0
    antithetic: bool = False
    tail_bound_mode: bool = True

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon < 100.0 * self.dt:
            raise ValueError(
                f"horizon {self.horizon} must be at least 100 dt = {100 * self.dt}"
            )
        if self.n_paths < 2:
            raise ValueError(f"need n_paths >= 2, got {self.n_paths}")
        if self.x0 <= 0.0:
            raise ValueError(f"x0 must be positive, got {self.x0}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    _FIELDS = ("x0", "dt", "horizon", "n_paths", "seed", "c_band", "antithetic", "tail_bound_mode")

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        unknown = set(d) - set(cls._FIELDS)
        if unknown:
            raise ValueError(f"unknown sim config keys: {sorted(unknown)}")
        missing = {"x0", "dt", "horizon", "n_paths", "seed"} - set(d)
        if missing:
            raise ValueError(f"missing sim config keys: {sorted(missing)}")
        return cls(**d)


def gbm_step(model: DiffusionModel, x, dt: float, z):
    """Exact-in-law lognormal transition step."""
    return x * np.exp((model.b - 0.5 * model.sigma**2) * dt + model.sigma * math.sqrt(dt) * z)


class LocalTimeAccumulator:
    """Band estimators of the local time at a set of atom locations."""

    def __init__(self, model: DiffusionModel, locations: Sequence[float], eps: Sequence[float]):
        self.model = model
        self.locations = np.asarray(locations, dtype=float)
        self.eps = np.asarray(eps, dtype=float)
        if self.locations.shape != self.eps.shape:
            raise ValueError("one band width per atom location")
        if np.any(self.eps <= 0.0):
            raise ValueError("band widths must be positive")
        self.totals = np.zeros_like(self.locations)

    def update(self, x: float, dt: float) -> "LocalTimeAccumulator":
        in_band = np.abs(x - self.locations) < self.eps
        self.totals[in_band] += self.model.sigma2_at(x) * dt / (2.0 * self.eps[in_band])
        return self


@dataclass(frozen=True)
class StopSample:
    time: float
    cause: str  # "atom" | "set" | "horizon"
    state: float
    accumulated: float
    index: int


def sample_stop(
    strategy: MarkovStrategy,
    path: np.ndarray,
    dt: float,
    clock: float,
    model: DiffusionModel,
    c_band: float = 1.0,
) -> StopSample:
    """Reference single-strategy stop sampler over a precomputed path.

    ``path[0]`` is the state before the first step; the hazard accrues on
    ``path[1:]``.  The batch kernels replicate this logic.
    """
    s_max = strategy.s_max or 0.0
    qs = np.array([a.q for a in strategy.atoms])
    ws = np.array([a.weight for a in strategy.atoms])
    eps = c_band * model.sigma * qs * math.sqrt(dt)
    if path[0] <= s_max:
        return StopSample(0.0, "set", float(path[0]), 0.0, 0)
    acc = 0.0
    for k in range(1, len(path)):
        x = float(path[k])
        dA = 0.0
        q_hit = -1.0
        for q, w, e in zip(qs, ws, eps):
            if abs(x - q) < e:
                dA += w * model.sigma2_at(x) * dt / (2.0 * e)
                q_hit = q
        if strategy.density is not None:
            dA += float(strategy.density.hazard(x)) * dt
        f_clock = (clock - acc) / dA if dA > 0.0 and acc + dA >= clock else 3.0
        f_set = 1.0 if (s_max > 0.0 and x <= s_max) else 3.0
        acc += dA
        if min(f_clock, f_set) <= 1.0:
            if f_clock <= f_set:
                state = q_hit if q_hit > 0.0 else x
                return StopSample((k - 1 + f_clock) * dt, "atom", state, clock, k)
            return StopSample(float(k) * dt, "set", s_max, acc, k)
    return StopSample((len(path) - 1) * dt, "horizon", float(path[-1]), acc, len(path) - 1)


@dataclass(frozen=True)
class PayoffEstimate:
    player: int
    mean: float
    standard_error: float
    n_effective: int
    truncation_bias_bound: float
    stop_cause: dict[str, int]
    by_cause_mean: dict[str, float]

    def tolerance(self, n_se: float = 3.0) -> float:
        return n_se * self.standard_error + self.truncation_bias_bound


@dataclass(frozen=True)
class PathResults:
    """Per-path outputs of a joint profile simulation."""

    config: SimConfig
    pay1: np.ndarray
    pay2: np.ndarray
    cause1: np.ndarray
    cause2: np.ndarray
    stop_time: np.ndarray
    stop_state: np.ndarray
    x_at_horizon: np.ndarray  # nan unless truncated
    hazard1: np.ndarray
    hazard2: np.ndarray


def _strategy_arrays(strategy: MarkovStrategy, params: DuopolyParams, c_band: float, dt: float):
    model = params.model
    qs = np.array([a.q for a in strategy.atoms], dtype=float)
    ws = np.array([a.weight for a in strategy.atoms], dtype=float)
    eps = c_band * model.sigma * qs * math.sqrt(dt)
    s_max = strategy.s_max or 0.0
    dens = np.zeros(9)
    if strategy.density is not None:
        d = strategy.density
        opp = d.opponent
        K_opp = opp.l / ((1.0 - model.rho_minus) * opp.fund.phi(opp.alpha))
        dens[:] = (1.0, d.lo, d.hi, opp.l, K_opp, params.m, model.r - model.b, model.rho_minus, model.r)
    return qs, ws, eps, float(s_max), dens


def _payoff_params(params: DuopolyParams, i: int):
    p = build_payoffs(params, i)
    K = p.l / ((1.0 - params.model.rho_minus) * p.fund.phi(p.alpha))
    return p.l, K, p.alpha


def simulate_profile_paths(
    params: DuopolyParams,
    strat1: MarkovStrategy,
    strat2: MarkovStrategy,
    config: SimConfig,
) -> PathResults:
    """Run the joint game simulation; per-path outputs, deterministic in seed."""
    _apply_thread_cap()
    model = params.model
    n = config.n_paths
    q1, w1, e1, s1max, dens1 = _strategy_arrays(strat1, params, config.c_band, config.dt)
    q2, w2, e2, s2max, dens2 = _strategy_arrays(strat2, params, config.c_band, config.dt)
    l1, K1, al1 = _payoff_params(params, 1)
    l2, K2, al2 = _payoff_params(params, 2)

    pay1 = np.empty(n)
    pay2 = np.empty(n)
    cause1 = np.empty(n, dtype=np.int8)
    cause2 = np.empty(n, dtype=np.int8)
    stop_time = np.empty(n)
    stop_state = np.empty(n)
    xT = np.empty(n)
    acc1 = np.empty(n)
    acc2 = np.empty(n)

    _kernels.run_profile_paths(
        config.seed,
        n,
        config.antithetic,
        config.x0,
        config.dt,
        config.n_steps,
        model.b,
        model.sigma,
        model.r,
        q1,
        w1,
        e1,
        s1max,
        dens1,
        q2,
        w2,
        e2,
        s2max,
        dens2,
        l1,
        K1,
        al1,
        l2,
        K2,
        al2,
        params.m,
        model.r - model.b,
        model.rho_minus,
        pay1,
        pay2,
        cause1,
        cause2,
        stop_time,
        stop_state,
        xT,
        acc1,
        acc2,
    )
    return PathResults(
        config=config,
        pay1=pay1,
        pay2=pay2,
        cause1=cause1,
        cause2=cause2,
        stop_time=stop_time,
        stop_state=stop_state,
        x_at_horizon=xT,
        hazard1=acc1,
        hazard2=acc2,
    )


def _mean_se(values: np.ndarray, antithetic: bool) -> tuple[float, float, int]:
    if antithetic:
        pairs = values.reshape(-1, 2).mean(axis=1)
        vals = pairs
    else:
        vals = values
    n = len(vals)
    mean = math.fsum(vals) / n
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var / n), n


def _truncation_bound(
    params: DuopolyParams, player: int, xT: np.ndarray, horizon: float, n_paths: int
) -> float:
    """Mean over truncated paths of the remaining-value bound.

    G is r-excessive, so the continuation value after the horizon is at most
    exp(-r T) G(X_T); |R| covers the negative concede branch.
    """
    trunc = xT[np.isfinite(xT)]
    if trunc.size == 0:
        return 0.0
    p = build_payoffs(params, player)
    caps = np.exp(-params.model.r * horizon) * (p.G(trunc) + np.abs(p.R(trunc)))
    return float(np.sum(caps)) / n_paths


def _estimate_from_paths(
    params: DuopolyParams, results: PathResults, player: int
) -> PayoffEstimate:
    pays = results.pay1 if player == 1 else results.pay2
    causes = results.cause1 if player == 1 else results.cause2
    mean, se, n_eff = _mean_se(pays, results.config.antithetic)
    hist = {name: int(np.sum(causes == code)) for code, name in enumerate(CAUSES)}
    by_cause = {}
    for code, name in enumerate(CAUSES):
        mask = causes == code
        if mask.any():
            by_cause[name] = math.fsum(pays[mask]) / int(mask.sum())
    bias = 0.0
    if results.config.tail_bound_mode:
        bias = _truncation_bound(
            params, player, results.x_at_horizon, results.config.horizon, results.config.n_paths
        )
    return PayoffEstimate(
        player=player,
        mean=mean,
        standard_error=se,
        n_effective=n_eff,
        truncation_bias_bound=bias,
        stop_cause=hist,
        by_cause_mean=by_cause,
    )


def simulate_profile(
    params: DuopolyParams,
    strat1: MarkovStrategy,
    strat2: MarkovStrategy,
    config: SimConfig,
) -> tuple[PayoffEstimate, PayoffEstimate]:
    results = simulate_profile_paths(params, strat1, strat2, config)
    return (
        _estimate_from_paths(params, results, 1),
        _estimate_from_paths(params, results, 2),
    )


def estimate_payoff(
    params: DuopolyParams,
    strat1: MarkovStrategy,
    strat2: MarkovStrategy,
    config: SimConfig,
    player: int,
) -> PayoffEstimate:
    """Monte Carlo value of the profile for one player."""
    if player not in (1, 2):
        raise ValueError(f"player must be 1 or 2, got {player}")
    return simulate_profile(params, strat1, strat2, config)[player - 1]


@dataclass(frozen=True)
class SweepReport:
    player: int
    x0: float
    thresholds: np.ndarray
    means: np.ndarray
    standard_errors: np.ndarray
    bias_bounds: np.ndarray
    n_paths: int
    analytic_value: Optional[float] = None

    @property
    def argmax_threshold(self) -> float:
        return float(self.thresholds[int(np.argmax(self.means))])

    @property
    def max_mean(self) -> float:
        return float(np.max(self.means))

    def margin(self) -> Optional[float]:
        """max estimated deviation payoff minus the analytic value."""
        if self.analytic_value is None:
            return None
        return self.max_mean - self.analytic_value


def best_reply_sweep(
    params: DuopolyParams,
    player: int,
    opp_strategy: MarkovStrategy,
    config: SimConfig,
    thresholds: Sequence[float],
    analytic_value: Optional[float] = None,
) -> SweepReport:
    """Estimate J_player(x0, tau_y, opp) over a grid of stop thresholds y.

    All thresholds share each path (common random numbers), so differences
    across thresholds are low-variance.
    """
    if player not in (1, 2):
        raise ValueError(f"player must be 1 or 2, got {player}")
    thr = np.asarray(sorted(thresholds), dtype=float)
    if thr.ndim != 1 or len(thr) == 0 or np.any(np.diff(thr) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    _apply_thread_cap()
    model = params.model
    qo, wo, eo, somax, denso = _strategy_arrays(opp_strategy, params, config.c_band, config.dt)
    l_i, K_i, al_i = _payoff_params(params, player)

    n = config.n_paths
    pay = np.empty((n, len(thr)))
    resolved = np.empty((n, len(thr)), dtype=np.uint8)
    xT = np.empty(n)
    _kernels.run_sweep_paths(
        config.seed,
        n,
        config.antithetic,
        config.x0,
        config.dt,
        config.n_steps,
        model.b,
        model.sigma,
        model.r,
        qo,
        wo,
        eo,
        somax,
        denso,
        thr,
        l_i,
        K_i,
        al_i,
        params.m,
        model.r - model.b,
        model.rho_minus,
        pay,
        resolved,
        xT,
    )
    means = np.empty(len(thr))
    ses = np.empty(len(thr))
    biases = np.empty(len(thr))
    p = build_payoffs(params, player)
    trunc_mask = np.isfinite(xT)
    cap = np.zeros(n)
    if trunc_mask.any():
        xs = xT[trunc_mask]
        cap[trunc_mask] = np.exp(-model.r * config.horizon) * (p.G(xs) + np.abs(p.R(xs)))
    for j in range(len(thr)):
        means[j], ses[j], _ = _mean_se(pay[:, j], config.antithetic)
        biases[j] = math.fsum(cap[resolved[:, j] == 0]) / n if config.tail_bound_mode else 0.0
    return SweepReport(
        player=player,
        x0=config.x0,
        thresholds=thr,
        means=means,
        standard_errors=ses,
        bias_bounds=biases,
        n_paths=n,
        analytic_value=analytic_value,
    )


@dataclass(frozen=True)
class ComovementStats:
    fraction_opposite: float
    n_steps_counted: int
    n_paths_used: int
    flags: tuple[str, ...] = ()


def comovement_probe(
    params: DuopolyParams,
    profile: EquilibriumProfile,
    config: SimConfig,
    region: Optional[tuple[float, float]] = None,
    margin: float = 1e-4,
) -> ComovementStats:
    """Fraction of path steps on which F1 = w1 + E and F2 = w2 + E move in
    opposite directions, counted while the state stays inside the attrition
    region and before either player stops.
    """
    model = params.model
    if region is None:
        s2 = profile.strategy2.s_max or 0.0
        tops = [a.q for a in profile.strategy1.atoms]
        if not tops or s2 <= 0.0:
            return ComovementStats(0.0, 0, 0, flags=("out of region",))
        region = (s2, max(tops))
    lo, hi = region
    if config.x0 <= lo or config.x0 >= hi:
        return ComovementStats(0.0, 0, 0, flags=("out of region",))

    rng = np.random.default_rng(config.seed)
    p1 = profile.value1.payoffs
    opp = 0
    tot = 0
    used = 0
    flags: list[str] = []
    n_steps = config.n_steps
    for _ in range(config.n_paths):
        z = rng.standard_normal(n_steps)
        logx = math.log(config.x0) + np.cumsum(
            (model.b - 0.5 * model.sigma**2) * config.dt
            + model.sigma * math.sqrt(config.dt) * z
        )
        x = np.exp(logx)
        x = np.concatenate(([config.x0], x))
        # stop at the first exit of the open region; clocks only tick there
        out = np.flatnonzero((x <= lo) | (x >= hi))
        cut = int(out[0]) + 1 if out.size else len(x)
        xs = x[:cut]
        if len(xs) < 3:
            flags.append("path exited immediately")
            continue
        F1 = profile.value1.value(xs) + p1.E(xs)
        F2 = profile.value2.value(xs) + p1.E(xs)
        inside = (xs > lo + margin) & (xs < hi - margin)
        ok = inside[:-1] & inside[1:]
        d1 = np.diff(F1)[ok]
        d2 = np.diff(F2)[ok]
        moved = (d1 != 0.0) & (d2 != 0.0)
        opp += int(np.sum((d1[moved] > 0) != (d2[moved] > 0)))
        tot += int(np.sum(moved))
        used += 1
    if tot == 0:
        flags.append("no counted steps")
        return ComovementStats(0.0, 0, used, flags=tuple(flags))
    return ComovementStats(opp / tot, tot, used, flags=tuple(flags))


def green_local_time_estimate(
    model: DiffusionModel,
    a: float,
    b_up: float,
    x0: float,
    y: float,
    dt: float,
    n_paths: int,
    seed: int,
    horizon: float,
    refine: int = 1,
    c_band: float = 1.0,
):
    """Band local-time estimate at first exit of (a, b_up), with an optional
    refined companion run on the same Brownian increments.

    Returns ((mean, se) at step dt, (mean, se) at dt/refine, exit fraction).
    """
    _apply_thread_cap()
    n_steps_coarse = int(round(horizon / dt))
    L_c = np.empty(n_paths)
    L_f = np.empty(n_paths)
    exited = np.empty(n_paths, dtype=np.uint8)
    _kernels.run_green_paths(
        seed,
        n_paths,
        x0,
        y,
        a,
        b_up,
        dt,
        refine,
        c_band,
        model.b,
        model.sigma,
        n_steps_coarse,
        L_c,
        L_f,
        exited,
    )
    mc, sc, _ = _mean_se(L_c, False)
    mf, sf, _ = _mean_se(L_f, False)
    return (mc, sc), (mf, sf), float(np.mean(exited))


def local_time_update(acc: LocalTimeAccumulator, x: float, dt: float) -> LocalTimeAccumulator:
    """Band-estimator update for every atom whose band contains x."""
    return acc.update(x, dt)
