"""JSON wire format for equilibrium profiles.

The document carries the model and duopoly parameters, one strategy block
per player ({atoms, density, stopping_set}), one list of value pieces per
player ({lo, hi, kind, A, B} with hi=null for +inf), and the verification
report when present.  Round-trips are lossless: floats serialize at full
precision via repr.
"""

from __future__ import annotations

import json
import math
from typing import Any, Optional

from .diffusion import DiffusionModel, FundamentalSolutions
from .equilibrium import (
    Atom,
    EquilibriumProfile,
    MarkovStrategy,
    OdeCurve,
    PiecewiseValue,
    SymmetricDensity,
    ValuePiece,
)
from .payoffs import DuopolyParams, build_payoffs
from .verify import VerificationReport

__all__ = ["profile_to_dict", "profile_from_dict", "dumps", "loads", "WireError"]


class WireError(ValueError):
    """Malformed profile document."""


def _strategy_to_dict(s: MarkovStrategy) -> dict:
    return {
        "atoms": [{"q": a.q, "weight": a.weight} for a in s.atoms],
        "density": None if s.density is None else "symmetric",
        "stopping_set": [[lo, hi] for lo, hi in s.stopping_set],
    }


def _pieces_to_list(v: PiecewiseValue) -> list[dict]:
    out = []
    for p in v.pieces:
        out.append(
            {
                "lo": p.lo,
                "hi": p.hi,
                "kind": p.kind,
                "A": None if p.curve is None else p.curve.A,
                "B": None if p.curve is None else p.curve.B,
            }
        )
    return out


def profile_to_dict(profile: EquilibriumProfile) -> dict:
    m = profile.params.model
    doc: dict[str, Any] = {
        "model": {"b": m.b, "sigma": m.sigma, "r": m.r},
        "duopoly": {"l1": profile.params.l1, "l2": profile.params.l2, "m": profile.params.m},
        "kind": profile.kind,
        "strategies": [
            _strategy_to_dict(profile.strategy1),
            _strategy_to_dict(profile.strategy2),
        ],
        "values": [
            _pieces_to_list(profile.value1),
            _pieces_to_list(profile.value2),
        ],
        "feasibility_margins": dict(profile.feasibility_margins),
        "warnings": list(profile.warnings),
        "report": None
        if profile.report is None
        else {
            "residuals": dict(profile.report.residuals),
            "margins": dict(profile.report.margins),
            "flags": dict(profile.report.flags),
            "tolerance": profile.report.tolerance,
        },
    }
    return doc


def _expect_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise WireError(f"unknown keys {sorted(unknown)} in {where}")


def _number(d: dict, key: str, where: str) -> float:
    if key not in d:
        raise WireError(f"missing key {key!r} in {where}")
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise WireError(f"{where}.{key} must be a finite number, got {v!r}")
    return float(v)


def _strategy_from_dict(d: dict, where: str, params: DuopolyParams, index: int) -> MarkovStrategy:
    _expect_keys(d, {"atoms", "density", "stopping_set"}, where)
    atoms = tuple(
        Atom(q=_number(a, "q", f"{where}.atoms[{k}]"), weight=_number(a, "weight", f"{where}.atoms[{k}]"))
        for k, a in enumerate(d.get("atoms", []))
    )
    stopping = tuple(
        (float(lo), float(hi)) for lo, hi in (d.get("stopping_set") or [])
    )
    density = None
    tag = d.get("density")
    if tag is not None:
        if tag != "symmetric":
            raise WireError(f"{where}.density must be null or 'symmetric', got {tag!r}")
        opp = build_payoffs(params, 2 if index == 1 else 1)
        sa_alpha = opp.alpha
        density = SymmetricDensity(lo=sa_alpha, hi=opp.exit_threshold, opponent=opp)
    try:
        strat = MarkovStrategy(atoms=atoms, density=density, stopping_set=stopping)
    except ValueError as exc:
        raise WireError(f"invalid strategy in {where}: {exc}") from exc
    # geometry against the stand-alone threshold
    x_R = build_payoffs(params, index).exit_threshold
    tol = 1e-9 * x_R
    for a in atoms:
        if a.q > x_R + tol:
            raise WireError(
                f"{where}: atom at {a.q!r} beyond the stand-alone threshold {x_R!r}"
            )
    for lo, hi in stopping:
        if hi > x_R + tol:
            raise WireError(
                f"{where}: stopping interval reaching {hi!r} beyond threshold {x_R!r}"
            )
    return strat


def _pieces_from_list(
    lst: list, where: str, payoffs
) -> PiecewiseValue:
    pieces = []
    fund = payoffs.fund
    for k, p in enumerate(lst):
        loc = f"{where}[{k}]"
        _expect_keys(p, {"lo", "hi", "kind", "A", "B"}, loc)
        kind = p.get("kind")
        if kind not in ("ode", "R", "G"):
            raise WireError(f"{loc}.kind must be one of ode/R/G, got {kind!r}")
        hi = p.get("hi")
        if hi is not None:
            hi = float(hi)
        curve = None
        if kind == "ode":
            curve = OdeCurve(fund, _number(p, "A", loc), _number(p, "B", loc))
        pieces.append(ValuePiece(lo=float(p.get("lo", 0.0)), hi=hi, kind=kind, curve=curve))
    try:
        return PiecewiseValue(payoffs=payoffs, pieces=tuple(pieces))
    except ValueError as exc:
        raise WireError(f"invalid value pieces in {where}: {exc}") from exc


def profile_from_dict(doc: dict) -> EquilibriumProfile:
    if not isinstance(doc, dict):
        raise WireError("profile document must be a JSON object")
    _expect_keys(
        doc,
        {
            "model",
            "duopoly",
            "kind",
            "strategies",
            "values",
            "feasibility_margins",
            "warnings",
            "report",
        },
        "profile",
    )
    for key in ("model", "duopoly", "kind", "strategies", "values"):
        if key not in doc:
            raise WireError(f"missing key {key!r} in profile")
    md = doc["model"]
    _expect_keys(md, {"b", "sigma", "r"}, "model")
    dd = doc["duopoly"]
    _expect_keys(dd, {"l1", "l2", "m"}, "duopoly")
    try:
        model = DiffusionModel(
            b=_number(md, "b", "model"),
            sigma=_number(md, "sigma", "model"),
            r=_number(md, "r", "model"),
        )
        params = DuopolyParams(
            model=model,
            l1=_number(dd, "l1", "duopoly"),
            l2=_number(dd, "l2", "duopoly"),
            m=_number(dd, "m", "duopoly"),
        )
    except ValueError as exc:
        raise WireError(f"invalid parameters: {exc}") from exc

    strategies = doc["strategies"]
    values = doc["values"]
    if not (isinstance(strategies, list) and len(strategies) == 2):
        raise WireError("strategies must be a two-element list")
    if not (isinstance(values, list) and len(values) == 2):
        raise WireError("values must be a two-element list")

    s1 = _strategy_from_dict(strategies[0], "strategies[0]", params, 1)
    s2 = _strategy_from_dict(strategies[1], "strategies[1]", params, 2)
    v1 = _pieces_from_list(values[0], "values[0]", build_payoffs(params, 1))
    v2 = _pieces_from_list(values[1], "values[1]", build_payoffs(params, 2))

    report = None
    rep = doc.get("report")
    if rep is not None:
        _expect_keys(rep, {"residuals", "margins", "flags", "tolerance"}, "report")
        report = VerificationReport(
            residuals={str(k): float(v) for k, v in rep.get("residuals", {}).items()},
            margins={str(k): float(v) for k, v in rep.get("margins", {}).items()},
            flags={str(k): str(v) for k, v in rep.get("flags", {}).items()},
            tolerance=float(rep.get("tolerance", 1e-9)),
        )

    kind = doc["kind"]
    if kind not in EquilibriumProfile._KINDS:
        raise WireError(f"unknown profile kind {kind!r}")
    return EquilibriumProfile(
        params=params,
        strategy1=s1,
        strategy2=s2,
        value1=v1,
        value2=v2,
        kind=kind,
        report=report,
        feasibility_margins={
            str(k): float(v) for k, v in (doc.get("feasibility_margins") or {}).items()
        },
        warnings=tuple(str(w) for w in doc.get("warnings", [])),
    )


def dumps(profile: EquilibriumProfile) -> str:
    """Deterministic JSON text for a profile."""
    return json.dumps(profile_to_dict(profile), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> EquilibriumProfile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WireError(f"not valid JSON: {exc}") from exc
    return profile_from_dict(doc)
