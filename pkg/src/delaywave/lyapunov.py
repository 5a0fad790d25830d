"""Feasible constant selection for the composite (Lyapunov-side) functional
plus empirical equivalence and decay-rate estimates along trajectories.

The composite functional is

    energy_weight * E + virial_weight * virial
      + flux_outer_weight * flux_outer + flux_mid_weight * flux_mid
      + delay_weighted,

and the constants must satisfy a short list of strict inequalities for its
rate to dominate the energy. The existence of such constants is equivalent
to the geometric smallness condition; the construction here is a fixed
midpoint rule so that feasibility is a deterministic function of the inputs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .diagnostics import Trajectory
from .errors import EquivalenceViolationError, InsufficientDataError
from .model import DomainGeometry, admissible_gain_interval, validate_geometry


@dataclass(frozen=True)
class ConstantSet:
    """Weights of the composite functional plus the Young-splitting
    parameters fixed while choosing them."""

    energy_weight: float
    virial_weight: float
    flux_outer_weight: float
    flux_mid_weight: float
    eps_virial: float
    eps_flux: float
    delay_gain: float

    def to_dict(self) -> dict:
        return asdict(self)


def rate_margin(mu1_at_0: float, beta: float, d: float, gain: float) -> float:
    """Lower bound on both friction coefficients of the energy-rate estimate
    (worst admissible delay slope); positive exactly when the gain sits
    strictly inside its admissible window."""
    root = math.sqrt(1.0 - d)
    return mu1_at_0 * min(
        1.0 - gain / 2.0 - beta / (2.0 * root),
        gain * (1.0 - d) / 2.0 - beta * root / 2.0,
    )


def find_constants(
    geom: DomainGeometry,
    mu1_at_0: float,
    beta: float,
    d: float,
    c1: float | None = None,
    M: float | None = None,
    delay_gain: float | None = None,
) -> ConstantSet | None:
    """Deterministic midpoint construction of a feasible constant set.

    Returns None when no set exists, which happens exactly when the geometric
    smallness condition fails (infeasible is a result, not an error). The
    layout: fix the mid-flux weight to 1; put the outer-flux weight at the
    midpoint of its admissible window, the virial weight at the midpoint of
    its induced window; split the Young budget for the two epsilons evenly
    and take half of each saturating value; finally scale the energy weight
    to twice the smallest value making both rate coefficients negative.
    """
    window = admissible_gain_interval(beta, d)
    if window.is_empty:
        return None
    gain = window.midpoint if delay_gain is None else delay_gain
    if not window.contains(gain):
        return None
    if not validate_geometry(geom).ok:
        return None
    G = max(1.0, geom.a / geom.b)
    half_reach = (geom.L1 + geom.L3 - geom.L2) / (4.0 * (geom.L2 - geom.L1))
    flux_mid = 1.0
    flux_outer = 0.5 * (G + 2.0 * half_reach) * flux_mid
    lo, hi = 0.5 * flux_outer, half_reach * flux_mid
    if not lo < hi:  # float-degenerate margin next to the geometric boundary
        return None
    virial = 0.5 * (lo + hi)

    c1 = geom.poincare_constant if c1 is None else c1
    M = geom.multiplier_bound if M is None else M
    budget = geom.a * (virial - 0.5 * flux_outer)
    eps_virial = 0.25 * budget / (mu1_at_0**2 * c1**2 * virial)
    eps_flux = 0.25 * budget / (mu1_at_0**2 * M**2 * flux_outer)

    margin = rate_margin(mu1_at_0, beta, d, gain)
    if margin <= 0.0:
        return None
    need_velocity = (1.0 + 0.5 / eps_virial) * virial + (0.5 + 0.5 / eps_flux) * flux_outer + gain
    need_edge = beta**2 * (0.5 / eps_virial * virial + 0.5 / eps_flux * flux_outer)
    energy_weight = 2.0 * max(need_velocity, need_edge) / margin
    return ConstantSet(
        energy_weight=energy_weight,
        virial_weight=virial,
        flux_outer_weight=flux_outer,
        flux_mid_weight=flux_mid,
        eps_virial=eps_virial,
        eps_flux=eps_flux,
        delay_gain=gain,
    )


def constant_set_report(cs: ConstantSet, geom: DomainGeometry, mu1_at_0: float, beta: float, d: float) -> dict:
    """Literal re-evaluation of every strict inequality the constants must
    satisfy; each entry carries (lhs, rhs, ok) with the convention lhs < rhs."""
    G = max(1.0, geom.a / geom.b)
    bridge = (geom.L2 - geom.L3 - geom.L1) / (4.0 * (geom.L2 - geom.L1))
    c1 = geom.poincare_constant
    M = geom.multiplier_bound
    margin = rate_margin(mu1_at_0, beta, d, cs.delay_gain)

    def entry(lhs, rhs):
        return {"lhs": float(lhs), "rhs": float(rhs), "ok": bool(lhs < rhs)}

    return {
        "virial_vs_mid_flux": entry(cs.virial_weight + bridge * cs.flux_mid_weight, 0.0),
        "outer_flux_vs_mid_flux": entry(G * cs.flux_mid_weight, cs.flux_outer_weight),
        "virial_vs_outer_flux": entry(0.5 * cs.flux_outer_weight, cs.virial_weight),
        "young_budget": entry(
            mu1_at_0**2 * c1**2 * cs.eps_virial * cs.virial_weight
            + M**2 * mu1_at_0**2 * cs.eps_flux * cs.flux_outer_weight,
            geom.a * (cs.virial_weight - 0.5 * cs.flux_outer_weight),
        ),
        "velocity_coefficient": entry(
            (1.0 + 0.5 / cs.eps_virial) * cs.virial_weight
            + (0.5 + 0.5 / cs.eps_flux) * cs.flux_outer_weight
            + cs.delay_gain,
            margin * cs.energy_weight,
        ),
        "edge_coefficient": entry(
            beta**2 * (0.5 / cs.eps_virial * cs.virial_weight + 0.5 / cs.eps_flux * cs.flux_outer_weight),
            margin * cs.energy_weight,
        ),
    }


def empirical_equivalence(traj: Trajectory, constants: ConstantSet, floor: float = 0.0):
    """Extreme ratios (gamma1, gamma2) of the composite functional to the
    energy over the trajectory; both must be positive for the two-sided
    comparability to hold empirically.

    Records with energy at or below `floor` (absolute) are ignored; a record
    with zero energy but nonzero functional is a violation.
    """
    lyap = traj.assemble_lyapunov(constants)
    energy = traj.e_total
    bad = (energy == 0.0) & (lyap != 0.0)
    if np.any(bad):
        raise EquivalenceViolationError("composite functional nonzero at zero energy")
    mask = energy > max(floor, 0.0)
    if not np.any(mask):
        raise InsufficientDataError("no records above the energy floor")
    ratios = lyap[mask] / energy[mask]
    gamma1 = float(ratios.min())
    gamma2 = float(ratios.max())
    if not 0.0 < gamma1 <= gamma2:
        raise EquivalenceViolationError(
            f"equivalence failed along the trajectory: gamma1={gamma1}, gamma2={gamma2}"
        )
    return gamma1, gamma2


def predict_alpha(traj: Trajectory, constants: ConstantSet, floor: float = 0.0) -> float:
    """Conservative decay prediction from the composite-functional route.

    eta2 is the worst observed functional decay rate per unit energy (clipped
    at zero) over the leading block of records above the energy floor;
    the prediction eta2 / gamma2 underestimates the fitted rate because the
    equivalence constants are not tight.
    """
    energy = traj.e_total
    above = energy > max(floor, 0.0)
    idx = np.nonzero(above)[0]
    if idx.size < 10:
        raise InsufficientDataError("need at least 10 records above the energy floor")
    start = idx[0]
    tail = above[start:]
    n_lead = int(np.argmin(tail)) if not tail.all() else tail.size
    if n_lead < 10:
        raise InsufficientDataError("need at least 10 consecutive records above the floor")
    block = slice(start, start + n_lead)
    sub = traj.slice(block)
    gamma1, gamma2 = empirical_equivalence(sub, constants)
    lyap = sub.assemble_lyapunov(constants)
    spacing = np.diff(sub.t)
    ratios = (-np.diff(lyap) / spacing) / sub.e_total[:-1]
    eta2 = max(float(ratios.min()), 0.0)
    return eta2 / gamma2
