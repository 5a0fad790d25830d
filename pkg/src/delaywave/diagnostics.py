"""Energies, Lyapunov-side functionals, inequality residual checks, the
discrete Poincare verification, and log-linear decay fitting.

Everything here is a pure function of snapshots or record streams; trapezoid
quadrature and centered gradients match the solver's interior accuracy, and
interface gradients are one-sided from within each segment.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .discretization import StateSnapshot, outer_gradient
from .errors import InsufficientDecayDataError, StreamError
from .model import DomainGeometry, ProblemSpec, evaluate_coefficients

_CALIBRATION_PATH = Path(__file__).with_name("tol_calibration.json")


def control_multiplier(geom: DomainGeometry, x) -> np.ndarray:
    """Piecewise-linear spatial weight used by the flux functionals.

    Unit slope and sign change at the midpoint on each damped segment, linear
    bridge across the elastic segment; continuous, with sup bounded by
    max(L1, L3 - L2) / 2.
    """
    x = np.asarray(x, dtype=float)
    bridge_slope = (geom.L2 - geom.L3 - geom.L1) / (2.0 * (geom.L2 - geom.L1))
    return np.where(
        x <= geom.L1,
        x - geom.L1 / 2.0,
        np.where(
            x <= geom.L2,
            bridge_slope * (x - geom.L1) + geom.L1 / 2.0,
            x - (geom.L2 + geom.L3) / 2.0,
        ),
    )


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    e_outer: float
    e_mid: float
    e_delay: float
    e_total: float


@dataclass(frozen=True)
class LyapunovRecord:
    t: float
    virial: float
    flux_outer: float
    flux_mid: float
    delay_weighted: float
    lyapunov: float


ROW_FIELDS = (
    "t",
    "e_outer",
    "e_mid",
    "e_delay",
    "e_total",
    "virial",
    "flux_outer",
    "flux_mid",
    "delay_weighted",
    "lyapunov",
    "vel_sq_outer",
    "edge_delay_sq",
)


def evaluate_functionals(state: StateSnapshot, spec: ProblemSpec, constants=None) -> tuple:
    """All per-state diagnostics in ROW_FIELDS order.

    The composite functional entry is NaN when no constant set is supplied;
    analysis routines can always reassemble it from the stored parts.
    """
    sp = state.grids.spatial
    rg = state.grids.rho
    geom = spec.geometry
    wo, wm, wr = sp.w_outer, sp.w_mid, rg.w_rho
    co = evaluate_coefficients(spec, state.t)
    tau = float(co.tau)

    ux = outer_gradient(sp, state.u)
    vx = np.gradient(state.v, sp.h2, edge_order=2)
    vel_sq_outer = float(wo @ (state.ut**2))
    e_outer = 0.5 * (vel_sq_outer + geom.a * float(wo @ (ux**2)))
    e_mid = 0.5 * float(wm @ (state.vt**2) + geom.b * (wm @ (vx**2)))

    z2 = state.delay_field**2
    e_delay = 0.5 * float(co.reservoir) * tau * float(wo @ (z2 @ wr))
    edge_delay_sq = float(wo @ z2[:, -1])

    q_outer = control_multiplier(geom, sp.outer_x)
    q_mid = control_multiplier(geom, sp.x2)
    virial = float(wo @ (state.u * state.ut)) + float(wm @ (state.v * state.vt))
    flux_outer = -float(wo @ (q_outer * ux * state.ut))
    flux_mid = -float(wm @ (q_mid * vx * state.vt))
    delay_weighted = spec.delay_gain * tau * float(wo @ (z2 @ (wr * np.exp(-2.0 * tau * rg.rho))))

    e_total = e_outer + e_mid + e_delay
    if constants is None:
        lyap = math.nan
    else:
        lyap = (
            constants.energy_weight * e_total
            + constants.virial_weight * virial
            + constants.flux_outer_weight * flux_outer
            + constants.flux_mid_weight * flux_mid
            + delay_weighted
        )
    return (
        float(state.t),
        e_outer,
        e_mid,
        e_delay,
        e_total,
        virial,
        flux_outer,
        flux_mid,
        delay_weighted,
        lyap,
        vel_sq_outer,
        edge_delay_sq,
    )


def compute_energy(state: StateSnapshot, spec: ProblemSpec) -> EnergyRecord:
    """Segment energies plus the weighted delay reservoir; all parts are
    nonnegative and quadratic in the fields."""
    row = evaluate_functionals(state, spec)
    return EnergyRecord(t=row[0], e_outer=row[1], e_mid=row[2], e_delay=row[3], e_total=row[4])


def compute_lyapunov(state: StateSnapshot, spec: ProblemSpec, constants) -> LyapunovRecord:
    """Corrector functionals and the assembled composite functional for the
    given constant set."""
    row = evaluate_functionals(state, spec, constants)
    return LyapunovRecord(
        t=row[0], virial=row[5], flux_outer=row[6], flux_mid=row[7],
        delay_weighted=row[8], lyapunov=row[9],
    )


# --------------------------------------------------------------------------
# record streams
# --------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Columnar per-record diagnostics; records are uniformly spaced in time
    (solver step times the snapshot stride, except possibly the final gap)."""

    t: np.ndarray
    e_outer: np.ndarray
    e_mid: np.ndarray
    e_delay: np.ndarray
    e_total: np.ndarray
    virial: np.ndarray
    flux_outer: np.ndarray
    flux_mid: np.ndarray
    delay_weighted: np.ndarray
    lyapunov: np.ndarray
    vel_sq_outer: np.ndarray
    edge_delay_sq: np.ndarray
    dt: float
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.size

    @classmethod
    def from_rows(cls, rows, dt: float, meta=None) -> "Trajectory":
        data = np.asarray(rows, dtype=float)
        cols = {name: data[:, i] for i, name in enumerate(ROW_FIELDS)}
        return cls(dt=dt, meta=dict(meta or {}), **cols)

    def slice(self, mask) -> "Trajectory":
        cols = {name: getattr(self, name)[mask] for name in ROW_FIELDS}
        return Trajectory(dt=self.dt, meta=dict(self.meta), **cols)

    def assemble_lyapunov(self, constants) -> np.ndarray:
        return (
            constants.energy_weight * self.e_total
            + constants.virial_weight * self.virial
            + constants.flux_outer_weight * self.flux_outer
            + constants.flux_mid_weight * self.flux_mid
            + self.delay_weighted
        )

    def to_csv(self, path, residual_energy=None, residual_delay=None) -> None:
        """Write the record stream; residual columns are aligned to the left
        record of each consecutive pair (last row empty)."""

        def pad(r):
            if r is None:
                return np.full(len(self), np.nan)
            return np.append(np.asarray(r, dtype=float), np.nan)

        re_col, rd_col = pad(residual_energy), pad(residual_delay)
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(ROW_FIELDS) + ["residual_energy", "residual_delay"])
            for i in range(len(self)):
                row = [repr(float(getattr(self, name)[i])) for name in ROW_FIELDS]
                row += ["" if np.isnan(c[i]) else repr(float(c[i])) for c in (re_col, rd_col)]
                writer.writerow(row)


@dataclass(frozen=True)
class ResidualCheck:
    """Residual stream of a rate inequality; `passed` is None when the
    certificate did not hold and the assertion is suppressed."""

    residuals: np.ndarray
    max_residual: float
    tol: float | None
    passed: bool | None


def _pair_spacing(traj: Trajectory) -> np.ndarray:
    if len(traj) < 2:
        raise StreamError("need at least two consecutive records")
    spacing = np.diff(traj.t)
    if np.any(spacing <= 0.0):
        raise StreamError("records must advance strictly in time")
    return spacing


def check_dissipation(traj: Trajectory, spec: ProblemSpec, tol: float | None = None) -> ResidualCheck:
    """Forward-difference energy rate minus its certified upper bound.

    The bound is -mu1 (1 - g/2 - beta / (2 sqrt(1-d))) * ∫u_t^2
    - mu1 (g (1 - tau') / 2 - beta sqrt(1-d) / 2) * ∫z_edge^2 with g the
    delay gain; nonpositive residual (up to the scheme tolerance) is the
    discrete form of the energy-decay estimate.
    """
    spacing = _pair_spacing(traj)
    t_left = traj.t[:-1]
    co = evaluate_coefficients(spec, t_left)
    beta, d, gain = spec.weights.beta, spec.delay.d, spec.delay_gain
    root = math.sqrt(1.0 - d)
    coef_vel = co.mu1 * (1.0 - gain / 2.0 - beta / (2.0 * root))
    coef_edge = co.mu1 * (gain * (1.0 - co.tau_t) / 2.0 - beta * root / 2.0)
    bound = -coef_vel * traj.vel_sq_outer[:-1] - coef_edge * traj.edge_delay_sq[:-1]
    residuals = np.diff(traj.e_total) / spacing - bound
    mx = float(np.max(residuals))
    return ResidualCheck(residuals, mx, tol, (mx <= tol) if tol is not None else None)


def check_delay_inequality(traj: Trajectory, spec: ProblemSpec, tol: float | None = None) -> ResidualCheck:
    """Forward-difference rate of the weighted delay functional against its
    bound -2 * functional + gain * ∫u_t^2."""
    spacing = _pair_spacing(traj)
    gain = spec.delay_gain
    bound = -2.0 * traj.delay_weighted[:-1] + gain * traj.vel_sq_outer[:-1]
    residuals = np.diff(traj.delay_weighted) / spacing - bound
    mx = float(np.max(residuals))
    return ResidualCheck(residuals, mx, tol, (mx <= tol) if tol is not None else None)


class PoincareCheck(NamedTuple):
    ok: bool
    ratio: float
    bound: float


def check_poincare(state: StateSnapshot, geom: DomainGeometry) -> PoincareCheck:
    """Discrete ∫u^2 <= c1^2 ∫u_x^2 on the damped segments, where
    c1 = max(L1, L3 - L2); requires zero outer-boundary displacement."""
    sp = state.grids.spatial
    ux = outer_gradient(sp, state.u)
    num = float(sp.w_outer @ (state.u**2))
    den = float(sp.w_outer @ (ux**2))
    if num == 0.0:
        ratio = 0.0
    elif den == 0.0:
        ratio = math.inf
    else:
        ratio = num / den
    bound = geom.poincare_constant**2
    return PoincareCheck(ratio <= bound, ratio, bound)


# --------------------------------------------------------------------------
# decay fitting and tolerances
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential fit E ≈ prefactor * E(0) * exp(-alpha t)."""

    alpha: float
    prefactor: float
    r_squared: float
    window: tuple
    n_points: int


def fit_decay(t, energy, window, floor: float = 1e-8) -> DecayFit:
    """Line through (t, ln E) on `window`, restricted to records with
    E > floor * E(0); below that, floating-point noise dominates ln E."""
    t = np.asarray(t, dtype=float)
    energy = np.asarray(energy, dtype=float)
    if t.size == 0:
        raise InsufficientDecayDataError("empty energy stream")
    e0 = float(energy[0])
    mask = (t >= window[0]) & (t <= window[1]) & (energy > floor * e0) & (energy > 0.0)
    if int(mask.sum()) < 2:
        raise InsufficientDecayDataError(
            f"window {tuple(window)} keeps {int(mask.sum())} records above the floor"
        )
    ts = t[mask]
    logs = np.log(energy[mask])
    slope, intercept = np.polyfit(ts, logs, 1)
    fitted = slope * ts + intercept
    ss_res = float(np.sum((logs - fitted) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    prefactor = float(np.exp(intercept) / e0) if e0 > 0.0 else math.nan
    return DecayFit(
        alpha=float(-slope),
        prefactor=prefactor,
        r_squared=r2,
        window=(float(ts[0]), float(ts[-1])),
        n_points=int(mask.sum()),
    )


def calibrated_safety() -> float:
    return float(json.loads(_CALIBRATION_PATH.read_text())["K"])


def scheme_tolerance(e0: float, dt: float, h: float, drho: float, safety: float | None = None) -> float:
    """Residual budget K * (dt + h + drho) * E(0).

    The continuous inequalities hold exactly; the budget covers their
    discretization error. K comes from a one-time refinement calibration on
    the reference scenario, stored alongside the package.
    """
    if safety is None:
        safety = calibrated_safety()
    return float(safety) * (dt + h + drho) * float(e0)
