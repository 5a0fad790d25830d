"""Explicit time stepping for the coupled wave/transport system.

Three-level central differences with pointwise-implicit (centered) friction
for the damped material, classical leapfrog for the elastic one, a
flux-weighted closure of the interface nodes, and two interchangeable
realizations of the delayed velocity trace:

* ``augmented`` - evolve the reparametrized delay field with a first-order
  upwind sweep and read the trace from its far edge;
* ``history``   - keep a ring buffer of past velocities and interpolate the
  trace at the lagged time directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import Trajectory, evaluate_functionals
from .discretization import (
    Grids,
    StateSnapshot,
    history_delay_field,
    history_interpolate,
    history_push,
    initialize_state,
    seed_history,
)
from .errors import HypothesisViolationError, InstabilityError, ResolutionError
from .model import DelaySpec, DomainGeometry, ProblemSpec, evaluate_coefficients

BACKENDS = ("augmented", "history")

_BLOWUP_FACTOR = 1e12


@dataclass(frozen=True)
class SolverConfig:
    """Time-marching parameters.

    With ``dt=None`` the step is the largest one obeying both CFL bounds and
    is then snapped down so the horizon is an exact multiple of it. An
    explicit ``dt`` bypasses the bounds (instability is detected at run time
    and reported with its step index).
    """

    T_final: float
    cfl: float = 0.9
    backend: str = "augmented"
    dt: float | None = None
    snapshot_stride: int = 1
    sample_stride: int = 0

    def __post_init__(self):
        if self.T_final <= 0.0:
            raise ValueError("T_final must be positive")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl must lie in (0, 1)")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.sample_stride < 0:
            raise ValueError("sample_stride must be >= 0")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError("dt must be positive when given")


def compute_dt(geom: DomainGeometry, grids: Grids, delay: DelaySpec, cfl: float) -> float:
    """Largest step satisfying the wave CFL, cfl * h_min / sqrt(max(a, b)),
    and the reparametrized-transport CFL, drho * tau0 / (1 + max|tau'|)."""
    dt_wave = cfl * grids.spatial.h_min / math.sqrt(max(geom.a, geom.b))
    dt_transport = grids.rho.drho * delay.tau0 / (1.0 + delay.max_abs_slope())
    return min(dt_wave, dt_transport)


def _second_difference_outer(sp, f: np.ndarray) -> np.ndarray:
    """Per-segment second difference; zero at boundary and interface nodes,
    which are closed separately."""
    nL = sp.n_left
    d2 = np.zeros_like(f)
    d2[1 : nL - 1] = (f[2:nL] - 2.0 * f[1 : nL - 1] + f[: nL - 2]) / sp.h1**2
    d2[nL + 1 : -1] = (f[nL + 2 :] - 2.0 * f[nL + 1 : -1] + f[nL:-2]) / sp.h3**2
    return d2


def _second_difference_mid(sp, f: np.ndarray) -> np.ndarray:
    d2 = np.zeros_like(f)
    d2[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / sp.h2**2
    return d2


def step_wave(u, u_prev, v, v_prev, coeffs, geom, grids, dt, delayed_trace):
    """One explicit step of both materials.

    Damped segments: u+ = [2u - (1-g) u- + dt^2 (a D2 u - mu2 * trace)] / (1+g)
    with g = mu1 dt / 2, i.e. the instantaneous friction acts on the centered
    velocity and is solved pointwise; the delayed trace enters explicitly.
    Elastic segment: plain leapfrog. The outer boundary is pinned to zero;
    interface nodes are closed afterwards by `apply_transmission`.
    """
    sp = grids.spatial
    gamma = 0.5 * float(coeffs.mu1) * dt
    force = geom.a * _second_difference_outer(sp, u) - float(coeffs.mu2) * delayed_trace
    u_next = (2.0 * u - (1.0 - gamma) * u_prev + dt * dt * force) / (1.0 + gamma)
    u_next[0] = 0.0
    u_next[-1] = 0.0
    v_next = 2.0 * v - v_prev + dt * dt * geom.b * _second_difference_mid(sp, v)
    return u_next, v_next


def apply_transmission(u, v, geom, grids):
    """Close the interface nodes in place and return the two shared values.

    Each interface enforces equal displacement and flux balance
    a u_x = b v_x with second-order one-sided derivatives from each side; the
    shared value is the flux-weighted average of the one-sided quadratic
    extrapolants (exact for fields linear on each side).
    """
    sp = grids.spatial
    if sp.x1.size < 3 or sp.x2.size < 3 or sp.x3.size < 3:
        raise ResolutionError("interface closure needs at least 3 nodes per segment")
    nL = sp.n_left
    ka1 = geom.a / sp.h1
    kb = geom.b / sp.h2
    ka3 = geom.a / sp.h3
    left = (ka1 * (4.0 * u[nL - 2] - u[nL - 3]) + kb * (4.0 * v[1] - v[2])) / (3.0 * (ka1 + kb))
    right = (kb * (4.0 * v[-2] - v[-3]) + ka3 * (4.0 * u[nL + 1] - u[nL + 2])) / (3.0 * (kb + ka3))
    u[nL - 1] = v[0] = left
    u[nL] = v[-1] = right
    return left, right


def step_z_transport(zfield, ut, t, dt, spec: ProblemSpec, grids: Grids) -> np.ndarray:
    """First-order upwind sweep of the delay field in rho.

    The transport speed (1 - tau'(t) rho) / tau(t) is positive whenever the
    delay slope stays below one, so information flows from the inflow row,
    which is set to the current velocity.
    """
    rg = grids.rho
    tau = float(spec.delay.tau(t))
    tau_t = float(spec.delay.tau.derivative(t))
    speed = (1.0 - tau_t * rg.rho) / tau
    if float(speed.min()) <= 0.0:
        raise HypothesisViolationError(
            f"delay transport speed lost positivity at t = {t} (tau' = {tau_t}); "
            "the delay spec violates the slope bound"
        )
    znew = np.empty_like(zfield)
    znew[:, 0] = ut
    courant = (dt / rg.drho) * speed[1:]
    znew[:, 1:] = zfield[:, 1:] - courant * (zfield[:, 1:] - zfield[:, :-1])
    return znew


def _bootstrap_previous(state: StateSnapshot, spec: ProblemSpec, grids: Grids, dt: float):
    """Second-order Taylor start: previous-level fields consistent with the
    equations at t = 0, interfaces closed like any other level."""
    geom = spec.geometry
    sp = grids.spatial
    co = evaluate_coefficients(spec, 0.0)
    force = (
        geom.a * _second_difference_outer(sp, state.u)
        - float(co.mu1) * state.ut
        - float(co.mu2) * state.delay_field[:, -1]
    )
    u_prev = state.u - dt * state.ut + 0.5 * dt * dt * force
    u_prev[0] = 0.0
    u_prev[-1] = 0.0
    v_prev = state.v - dt * state.vt + 0.5 * dt * dt * geom.b * _second_difference_mid(sp, state.v)
    apply_transmission(u_prev, v_prev, geom, grids)
    return u_prev, v_prev


@dataclass(frozen=True)
class FieldSample:
    """Displacement/velocity fields captured at one record time (no delay
    field; meant for cross-run comparisons and snapshot files)."""

    t: float
    u: np.ndarray
    v: np.ndarray
    ut: np.ndarray
    vt: np.ndarray


@dataclass
class RunResult:
    trajectory: Trajectory
    samples: list
    final_state: StateSnapshot
    dt: float
    steps: int


def run(spec: ProblemSpec, config: SolverConfig, grids: Grids, constants=None) -> RunResult:
    """March the coupled system to T_final and collect diagnostics records.

    Certification is the caller's gate: `run` assumes the spec was certified
    or that the caller chose to explore an uncertified regime, and only
    guards numerical sanity. Records are emitted every `snapshot_stride`
    steps plus the final time; velocities in a record are the centered
    differences at that record's time. Deterministic for fixed inputs.
    """
    geom = spec.geometry
    dt_raw = config.dt if config.dt is not None else compute_dt(geom, grids, spec.delay, config.cfl)
    nsteps = max(1, int(math.ceil(config.T_final / dt_raw - 1e-9)))
    dt = config.T_final / nsteps

    state0 = initialize_state(spec, grids)
    u = state0.u.copy()
    v = state0.v.copy()
    zfield = state0.delay_field.copy()
    augmented = config.backend == "augmented"
    buf = None if augmented else seed_history(spec, grids, dt)
    u_prev, v_prev = _bootstrap_previous(state0, spec, grids, dt)

    scale0 = max(
        1.0,
        float(np.max(np.abs(u))),
        float(np.max(np.abs(v))),
        float(np.max(np.abs(state0.ut))),
        float(np.max(np.abs(state0.vt))),
    )
    blow = _BLOWUP_FACTOR * scale0

    rows = []
    samples: list[FieldSample] = []
    final_state = None
    for n in range(nsteps + 1):
        tn = n * dt
        co = evaluate_coefficients(spec, tn)
        if augmented:
            trace = zfield[:, -1]
        else:
            trace = history_interpolate(buf, tn - float(co.tau))
        u_next, v_next = step_wave(u, u_prev, v, v_prev, co, geom, grids, dt, trace)
        apply_transmission(u_next, v_next, geom, grids)
        if (
            not (np.isfinite(u_next).all() and np.isfinite(v_next).all())
            or max(float(np.max(np.abs(u_next))), float(np.max(np.abs(v_next)))) > blow
        ):
            raise InstabilityError(f"fields blew up at step {n} (t = {tn:.6g})", step=n)
        ut_n = (u_next - u_prev) / (2.0 * dt)
        vt_n = (v_next - v_prev) / (2.0 * dt)
        if not augmented:
            history_push(buf, tn, ut_n)
        if n % config.snapshot_stride == 0 or n == nsteps:
            zrec = zfield if augmented else history_delay_field(buf, spec, grids, tn)
            snap = StateSnapshot(tn, u, ut_n, v, vt_n, zrec, grids)
            rows.append(evaluate_functionals(snap, spec, constants))
            if n == nsteps:
                final_state = snap
        if config.sample_stride and (n % config.sample_stride == 0 or n == nsteps):
            samples.append(FieldSample(tn, u.copy(), v.copy(), ut_n.copy(), vt_n.copy()))
        if n == nsteps:
            break
        if augmented:
            zfield = step_z_transport(zfield, ut_n, tn, dt, spec, grids)
        u_prev, u = u, u_next
        v_prev, v = v, v_next

    trajectory = Trajectory.from_rows(
        rows,
        dt=dt,
        meta={
            "backend": config.backend,
            "h_max": grids.spatial.h_max,
            "h_min": grids.spatial.h_min,
            "drho": grids.rho.drho,
            "steps": nsteps,
            "snapshot_stride": config.snapshot_stride,
        },
    )
    return RunResult(trajectory, samples, final_state, dt, nsteps)
