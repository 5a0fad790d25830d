"""Spatial grids on the three-segment bar, the delay reparametrization grid,
initial-state sampling, and the past-velocity ring buffer.

Outer-segment fields are stored as one concatenated array (left segment then
right segment); the interface nodes at L1 and L2 are duplicated between the
outer array and the middle array and constrained equal by the solver.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    HistoryUnderflowError,
    InconsistentInitialDataError,
    OrderingError,
    ResolutionError,
)
from .model import DomainGeometry, ProblemSpec


def _trapezoid_weights(n_nodes: int, h: float) -> np.ndarray:
    w = np.full(n_nodes, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class SpatialGrid:
    """Per-segment nodes with exact interface nodes and trapezoid weights."""

    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    h1: float
    h2: float
    h3: float
    outer_x: np.ndarray
    w_outer: np.ndarray
    w_mid: np.ndarray

    @property
    def n_left(self) -> int:
        """Nodes in the left damped segment; `outer` index of L1 is n_left - 1
        and of L2 is n_left."""
        return self.x1.size

    @property
    def h_min(self) -> float:
        return min(self.h1, self.h2, self.h3)

    @property
    def h_max(self) -> float:
        return max(self.h1, self.h2, self.h3)


@dataclass(frozen=True)
class RhoGrid:
    """Uniform nodes on [0, 1] for the delay reparametrization variable."""

    rho: np.ndarray
    drho: float
    w_rho: np.ndarray


@dataclass(frozen=True)
class Grids:
    spatial: SpatialGrid
    rho: RhoGrid


def segment_cell_counts(geom: DomainGeometry, target_h: float) -> tuple[int, int, int]:
    lengths = (geom.L1, geom.L2 - geom.L1, geom.L3 - geom.L2)
    return tuple(max(1, math.ceil(length / target_h - 1e-12)) for length in lengths)


def grids_from_counts(geom: DomainGeometry, counts, n_rho: int) -> Grids:
    """Build grids with explicit per-segment cell counts (used directly by
    refinement studies so successive levels nest exactly)."""
    n1, n2, n3 = counts
    if min(n1, n2, n3) < 2:
        raise ResolutionError(
            f"each segment needs at least 2 cells for the interface stencils, got {counts}"
        )
    if n_rho < 2:
        raise ResolutionError(f"need at least 2 reparametrization nodes, got {n_rho}")
    x1 = np.linspace(0.0, geom.L1, n1 + 1)
    x2 = np.linspace(geom.L1, geom.L2, n2 + 1)
    x3 = np.linspace(geom.L2, geom.L3, n3 + 1)
    h1 = geom.L1 / n1
    h2 = (geom.L2 - geom.L1) / n2
    h3 = (geom.L3 - geom.L2) / n3
    w_outer = np.concatenate(
        [_trapezoid_weights(x1.size, h1), _trapezoid_weights(x3.size, h3)]
    )
    spatial = SpatialGrid(
        x1=x1, x2=x2, x3=x3, h1=h1, h2=h2, h3=h3,
        outer_x=np.concatenate([x1, x3]),
        w_outer=w_outer,
        w_mid=_trapezoid_weights(x2.size, h2),
    )
    rho = np.linspace(0.0, 1.0, n_rho)
    drho = 1.0 / (n_rho - 1)
    return Grids(spatial, RhoGrid(rho=rho, drho=drho, w_rho=_trapezoid_weights(n_rho, drho)))


def build_grid(geom: DomainGeometry, target_h: float, n_rho: int) -> Grids:
    """Quasi-uniform grids: ceil(length / target_h) cells per segment, so all
    spacings lie in (target_h / 2, target_h] and one CFL bound governs.

    Deterministic in its inputs; repeated builds are bit-identical.
    """
    if target_h <= 0.0:
        raise ResolutionError(f"target spacing must be positive, got {target_h}")
    shortest = min(geom.L1, geom.L2 - geom.L1, geom.L3 - geom.L2)
    if target_h >= shortest:
        raise ResolutionError(
            f"target spacing {target_h} must be finer than the shortest segment ({shortest})"
        )
    return grids_from_counts(geom, segment_cell_counts(geom, target_h), n_rho)


def outer_gradient(sp: SpatialGrid, f: np.ndarray) -> np.ndarray:
    """Centered gradient per damped segment, second-order one-sided at the
    segment ends; never differentiates across an interface."""
    nL = sp.n_left
    return np.concatenate(
        [np.gradient(f[:nL], sp.h1, edge_order=2), np.gradient(f[nL:], sp.h3, edge_order=2)]
    )


# --------------------------------------------------------------------------
# state
# --------------------------------------------------------------------------


@dataclass
class StateSnapshot:
    """Discrete fields at one time level.

    `u`/`ut` on the damped outer segments (left | right concatenated),
    `v`/`vt` on the elastic middle segment, `delay_field` on outer nodes x
    rho nodes with `delay_field[:, 0]` equal to `ut`.
    """

    t: float
    u: np.ndarray
    ut: np.ndarray
    v: np.ndarray
    vt: np.ndarray
    delay_field: np.ndarray
    grids: Grids

    def validate(self, atol: float = 1e-9) -> None:
        sp = self.grids.spatial
        nL = sp.n_left
        if abs(self.u[0]) > atol or abs(self.u[-1]) > atol:
            raise InconsistentInitialDataError("displacement must vanish at the outer boundary")
        if abs(self.u[nL - 1] - self.v[0]) > atol or abs(self.u[nL] - self.v[-1]) > atol:
            raise InconsistentInitialDataError("displacement must agree at the interfaces")
        if np.max(np.abs(self.delay_field[:, 0] - self.ut)) > atol:
            raise InconsistentInitialDataError("delay field at rho = 0 must equal the velocity")

    def to_csv(self, path) -> None:
        """Columnar snapshot: x, segment id, displacement, velocity."""
        sp = self.grids.spatial
        nL = sp.n_left
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "segment", "displacement", "velocity"])
            for x, val, vel in zip(sp.x1, self.u[:nL], self.ut[:nL]):
                writer.writerow([repr(x), 1, repr(val), repr(vel)])
            for x, val, vel in zip(sp.x2, self.v, self.vt):
                writer.writerow([repr(x), 2, repr(val), repr(vel)])
            for x, val, vel in zip(sp.x3, self.u[nL:], self.ut[nL:]):
                writer.writerow([repr(x), 3, repr(val), repr(vel)])


def initialize_state(spec: ProblemSpec, grids: Grids) -> StateSnapshot:
    """Sample the initial data onto the grids.

    Verifies boundary, interface, and history compatibility, then snaps the
    shared values exactly so the state invariants hold nodewise.
    """
    sp = grids.spatial
    xo = sp.outer_x
    nL = sp.n_left
    ini = spec.initial
    u = np.array(ini.u0(xo), dtype=float, copy=True)
    ut = np.array(ini.u1(xo), dtype=float, copy=True)
    v = np.array(ini.v0(sp.x2), dtype=float, copy=True)
    vt = np.array(ini.v1(sp.x2), dtype=float, copy=True)
    tau_at_0 = float(spec.delay.tau(0.0))
    past = -tau_at_0 * grids.rho.rho
    zfield = np.array(ini.f0(xo[:, None], past[None, :]), dtype=float, copy=True)

    scale = max(
        1.0,
        float(np.max(np.abs(u))),
        float(np.max(np.abs(v))),
        float(np.max(np.abs(ut))),
    )
    atol = 1e-9 * scale
    if abs(u[0]) > atol or abs(u[-1]) > atol:
        raise InconsistentInitialDataError(
            f"u0 must vanish at the outer boundary, got ({u[0]}, {u[-1]})"
        )
    if abs(u[nL - 1] - v[0]) > atol or abs(u[nL] - v[-1]) > atol:
        raise InconsistentInitialDataError("u0 and v0 must agree at the interfaces")
    if float(np.max(np.abs(zfield[:, 0] - ut))) > atol:
        raise InconsistentInitialDataError("past velocity at s = 0 must equal u1")

    u[0] = 0.0
    u[-1] = 0.0
    v[0] = u[nL - 1]
    v[-1] = u[nL]
    zfield[:, 0] = ut
    return StateSnapshot(0.0, u, ut, v, vt, zfield, grids)


# --------------------------------------------------------------------------
# velocity history
# --------------------------------------------------------------------------


class HistoryBuffer:
    """Uniformly spaced past-velocity fields spanning at least
    [t - tau1 - 2 dt, t]; one solver run owns its buffer exclusively."""

    def __init__(self, dt: float, tau1: float):
        self.dt = float(dt)
        self.tau1 = float(tau1)
        self._times: deque = deque()
        self._fields: deque = deque()

    def __len__(self) -> int:
        return len(self._times)

    @property
    def times(self) -> tuple:
        return tuple(self._times)

    @property
    def span(self):
        if not self._times:
            return None
        return (self._times[0], self._times[-1])


def history_push(buf: HistoryBuffer, t: float, field) -> HistoryBuffer:
    """Append a field at time t (last time + dt exactly, up to roundoff) and
    evict entries older than t - tau1 - 2 dt."""
    eps = 1e-9 * buf.dt
    if buf._times:
        gap = t - buf._times[-1]
        if abs(gap - buf.dt) > eps:
            raise OrderingError(f"pushes must advance by dt = {buf.dt}, got gap {gap}")
    buf._times.append(float(t))
    buf._fields.append(np.array(field, dtype=float, copy=True))
    cutoff = t - buf.tau1 - 2.0 * buf.dt - eps
    while buf._times[0] < cutoff:
        buf._times.popleft()
        buf._fields.popleft()
    return buf


def history_interpolate(buf: HistoryBuffer, query_t: float) -> np.ndarray:
    """Nodewise linear interpolation between the two bracketing entries;
    exact at stored timestamps."""
    if not buf._times:
        raise HistoryUnderflowError("history buffer is empty")
    first, last = buf._times[0], buf._times[-1]
    eps = 1e-9 * buf.dt
    if query_t < first - eps or query_t > last + eps:
        raise HistoryUnderflowError(
            f"query t = {query_t} outside stored span [{first}, {last}]; the delay "
            "exceeds the retained history (configuration bug)"
        )
    pos = (query_t - first) / buf.dt
    i = int(math.floor(pos + 1e-12))
    i = min(max(i, 0), len(buf._times) - 1)
    theta = pos - i
    if i >= len(buf._times) - 1 or theta <= 1e-12:
        return buf._fields[i].copy()
    return (1.0 - theta) * buf._fields[i] + theta * buf._fields[i + 1]


def seed_history(spec: ProblemSpec, grids: Grids, dt: float) -> HistoryBuffer:
    """Buffer prefilled from the declared past velocity on [-(tau1 + 2 dt), -dt];
    the t = 0 entry is pushed by the solver loop itself.

    For a growing delay the earliest queries can precede -tau(0); the
    closed-form history family is simply evaluated there as well.
    """
    buf = HistoryBuffer(dt, spec.delay.tau1)
    xo = grids.spatial.outer_x
    k = int(math.ceil((spec.delay.tau1 + 2.0 * dt) / dt - 1e-9))
    for j in range(k, 0, -1):
        s = -j * dt
        history_push(buf, s, np.asarray(spec.initial.f0(xo, s), dtype=float))
    return buf


def history_delay_field(buf: HistoryBuffer, spec: ProblemSpec, grids: Grids, t: float) -> np.ndarray:
    """Rebuild the reparametrized delayed-velocity field at time t from the
    buffer: column j holds the velocity at t - tau(t) * rho_j."""
    tau_t = float(spec.delay.tau(t))
    cols = [history_interpolate(buf, t - tau_t * float(r)) for r in grids.rho.rho]
    return np.column_stack(cols)
