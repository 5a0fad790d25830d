"""YAML run-configuration loading; one file fully determines a run.

Layout (defaults in parentheses):

    geometry:        {L1, L2, L3, a, b}
    weights:         {mu1: <time family>, mu2: <mu2 family>, M1, M2, beta}
    delay:           {tau: <time family>, tau0, tau1, d}
    initial:         {u0, u1, v0, v1: <space family>, f0: <history family> (from_u1)}
    delay_gain:      scalar (midpoint of the admissible window, i.e. 1.0)
    discretization:  {target_h, n_rho}
    solver:          {T_final, cfl (0.9), backend (augmented), dt (auto),
                      snapshot_stride (1)}
    report:          {fit_window ([0.1 T, 0.9 T]), decay_floor (1e-8),
                      mu1_floor (1e-6), certify_samples (2048)}
    output:          {out_dir (none), sample_stride (0), snapshot_csv (false)}

Function families are tagged records {family: name, params: {...}}.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .errors import MalformedSpecError, UsageError
from .families import history_function, space_function, time_function
from .model import (
    DelaySpec,
    DomainGeometry,
    InitialData,
    Mu2Constant,
    Mu2Modulated,
    Mu2Scaled,
    ProblemSpec,
    WeightSpec,
)
from .solver import SolverConfig


@dataclass
class RunSettings:
    """Everything a run needs, plus the raw config dict for echoing into
    reports (re-running from the echo reproduces the run)."""

    problem: ProblemSpec
    target_h: float
    n_rho: int
    solver: SolverConfig
    fit_window: tuple
    decay_floor: float
    mu1_floor: float
    certify_samples: int
    override_certificate: bool
    out_dir: Path | None
    snapshot_csv: bool
    raw: dict


def _section(data: dict, name: str, required: bool = True) -> dict:
    sec = data.get(name)
    if sec is None:
        if required:
            raise MalformedSpecError(f"config is missing the {name!r} section")
        return {}
    if not isinstance(sec, dict):
        raise MalformedSpecError(f"config section {name!r} must be a mapping")
    return sec


def _need(sec: dict, key: str, where: str):
    if key not in sec:
        raise MalformedSpecError(f"config is missing {where}.{key}")
    return sec[key]


def _number(sec: dict, key: str, where: str, default=None):
    if key not in sec:
        if default is None:
            raise MalformedSpecError(f"config is missing {where}.{key}")
        return default
    try:
        return float(sec[key])
    except (TypeError, ValueError):
        raise MalformedSpecError(f"{where}.{key} must be a number, got {sec[key]!r}") from None


def _mu2_from_record(record) -> Mu2Constant | Mu2Scaled | Mu2Modulated:
    if not isinstance(record, dict) or "family" not in record:
        raise MalformedSpecError(f"weights.mu2 must be a tagged record, got {record!r}")
    family = str(record["family"])
    params = record.get("params") or {}
    try:
        if family == "constant":
            return Mu2Constant(float(params["value"]))
        if family == "scaled":
            return Mu2Scaled(float(params["factor"]))
        if family == "modulated":
            return Mu2Modulated(float(params["factor"]), float(params["omega"]))
    except KeyError as exc:
        raise MalformedSpecError(f"weights.mu2 family {family!r} is missing parameter {exc}") from None
    raise MalformedSpecError(f"unknown mu2 family {family!r}")


def settings_from_dict(data: dict) -> RunSettings:
    if not isinstance(data, dict):
        raise MalformedSpecError("config root must be a mapping")

    geo = _section(data, "geometry")
    geometry = DomainGeometry(
        L1=_number(geo, "L1", "geometry"),
        L2=_number(geo, "L2", "geometry"),
        L3=_number(geo, "L3", "geometry"),
        a=_number(geo, "a", "geometry"),
        b=_number(geo, "b", "geometry"),
    )

    wsec = _section(data, "weights")
    weights = WeightSpec(
        mu1=time_function(_need(wsec, "mu1", "weights")),
        mu2=_mu2_from_record(_need(wsec, "mu2", "weights")),
        M1=_number(wsec, "M1", "weights"),
        M2=_number(wsec, "M2", "weights"),
        beta=_number(wsec, "beta", "weights"),
    )

    dsec = _section(data, "delay")
    delay = DelaySpec(
        tau=time_function(_need(dsec, "tau", "delay")),
        tau0=_number(dsec, "tau0", "delay"),
        tau1=_number(dsec, "tau1", "delay"),
        d=_number(dsec, "d", "delay"),
    )

    isec = _section(data, "initial")
    u1 = space_function(_need(isec, "u1", "initial"))
    initial = InitialData(
        u0=space_function(_need(isec, "u0", "initial")),
        u1=u1,
        v0=space_function(_need(isec, "v0", "initial")),
        v1=space_function(_need(isec, "v1", "initial")),
        f0=history_function(isec.get("f0") or {"family": "from_u1"}, u1),
    )

    # default gain = midpoint of the admissible window, which is always 1
    delay_gain = _number(data, "delay_gain", "config", default=1.0)
    problem = ProblemSpec(geometry, weights, delay, initial, delay_gain=delay_gain)

    disc = _section(data, "discretization")
    target_h = _number(disc, "target_h", "discretization")
    n_rho = int(_number(disc, "n_rho", "discretization"))

    ssec = _section(data, "solver")
    osec = _section(data, "output", required=False)
    dt_raw = ssec.get("dt")
    try:
        solver = SolverConfig(
            T_final=_number(ssec, "T_final", "solver"),
            cfl=_number(ssec, "cfl", "solver", default=0.9),
            backend=str(ssec.get("backend", "augmented")),
            dt=None if dt_raw is None else float(dt_raw),
            snapshot_stride=int(_number(ssec, "snapshot_stride", "solver", default=1)),
            sample_stride=int(_number(osec, "sample_stride", "output", default=0)),
        )
    except ValueError as exc:
        raise MalformedSpecError(f"bad solver settings: {exc}") from None

    rsec = _section(data, "report", required=False)
    window_raw = rsec.get("fit_window")
    if window_raw is None:
        fit_window = (0.1 * solver.T_final, 0.9 * solver.T_final)
    else:
        try:
            lo, hi = (float(w) for w in window_raw)
        except (TypeError, ValueError):
            raise MalformedSpecError(f"report.fit_window must be a pair, got {window_raw!r}") from None
        fit_window = (lo, hi)

    out_raw = osec.get("out_dir")
    return RunSettings(
        problem=problem,
        target_h=target_h,
        n_rho=n_rho,
        solver=solver,
        fit_window=fit_window,
        decay_floor=_number(rsec, "decay_floor", "report", default=1e-8),
        mu1_floor=_number(rsec, "mu1_floor", "report", default=1e-6),
        certify_samples=int(_number(rsec, "certify_samples", "report", default=2048)),
        override_certificate=bool(data.get("override_certificate", False)),
        out_dir=None if out_raw is None else Path(out_raw),
        snapshot_csv=bool(osec.get("snapshot_csv", False)),
        raw=data,
    )


def load_config(path) -> RunSettings:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MalformedSpecError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedSpecError(f"config {path} must contain a mapping at the top level")
    return settings_from_dict(data)


def with_overrides(settings: RunSettings, *, backend=None, out_dir=None, override=None) -> RunSettings:
    updates = {}
    if backend is not None:
        updates["solver"] = replace(settings.solver, backend=backend)
    if out_dir is not None:
        updates["out_dir"] = Path(out_dir)
    if override is not None:
        updates["override_certificate"] = bool(override)
    return replace(settings, **updates) if updates else settings
