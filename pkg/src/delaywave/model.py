"""Continuous problem definition and certification of the standing hypotheses.

A problem is a three-segment bar whose outer segments carry instantaneous
plus delayed frictional damping with time-dependent weights, coupled to an
undamped middle segment through continuity of displacement and flux. This
layer is pure arithmetic on the closed-form families: it owns the geometry
condition, the admissible delay-gain window, coefficient evaluation, and the
machine-checkable certificate that a parameter set satisfies every
hypothesis the decay analysis needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidDelayBoundError, InvalidGeometryError, MalformedSpecError
from .families import ConstantFn, ExponentialFn, SinusoidFn


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainGeometry:
    """Damped outer segments [0, L1] and [L2, L3] with stiffness `a`,
    elastic middle segment [L1, L2] with stiffness `b`."""

    L1: float
    L2: float
    L3: float
    a: float
    b: float

    def __post_init__(self):
        if not (0.0 < self.L1 < self.L2 < self.L3):
            raise InvalidGeometryError(
                "segment breakpoints must satisfy 0 < L1 < L2 < L3, got "
                f"({self.L1}, {self.L2}, {self.L3})"
            )
        if self.a <= 0.0 or self.b <= 0.0:
            raise InvalidGeometryError("stiffness coefficients must be positive")

    @property
    def poincare_constant(self) -> float:
        """Largest damped-segment length; bounds displacement by slope energy
        on the outer segments (each is pinned at one outer end)."""
        return max(self.L1, self.L3 - self.L2)

    @property
    def multiplier_bound(self) -> float:
        """Sup of the |control multiplier| over the bar."""
        return max(self.L1, self.L3 - self.L2) / 2.0

    @property
    def outer_length(self) -> float:
        return self.L1 + (self.L3 - self.L2)


class GeometryCheck(NamedTuple):
    ok: bool
    lhs: float
    rhs: float


def validate_geometry(geom: DomainGeometry) -> GeometryCheck:
    """Strict smallness condition tying the wave-speed ratio to the damped
    share of the bar: max(1, a/b) < (L1 + L3 - L2) / (2 (L2 - L1)).

    Scale-free in the lengths; the decay construction is feasible exactly
    when it holds.
    """
    lhs = max(1.0, geom.a / geom.b)
    rhs = (geom.L1 + geom.L3 - geom.L2) / (2.0 * (geom.L2 - geom.L1))
    return GeometryCheck(lhs < rhs, lhs, rhs)


# --------------------------------------------------------------------------
# admissible delay gain
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GainInterval:
    """Open interval of admissible delay-gain values; empty when lo >= hi."""

    lo: float
    hi: float

    @property
    def is_empty(self) -> bool:
        return not (self.lo < self.hi)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, value: float) -> bool:
        return self.lo < value < self.hi

    def as_tuple(self):
        return None if self.is_empty else (self.lo, self.hi)


def admissible_gain_interval(beta: float, d: float) -> GainInterval:
    """Window (beta/sqrt(1-d), 2 - beta/sqrt(1-d)) for the reservoir gain.

    Inside it both friction coefficients of the energy-rate bound stay
    nonnegative; the window is nonempty iff beta < sqrt(1-d) and is always
    symmetric about 1.
    """
    if beta < 0.0:
        raise InvalidDelayBoundError(f"beta must be nonnegative, got {beta}")
    if not 0.0 <= d < 1.0:
        raise InvalidDelayBoundError(f"delay slope bound must satisfy 0 <= d < 1, got {d}")
    edge = beta / math.sqrt(1.0 - d)
    return GainInterval(edge, 2.0 - edge)


# --------------------------------------------------------------------------
# weights and delay law
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Mu2Constant:
    value: float


@dataclass(frozen=True)
class Mu2Scaled:
    """mu2(t) = factor * mu1(t)."""

    factor: float


@dataclass(frozen=True)
class Mu2Modulated:
    """mu2(t) = factor * mu1(t) * sin(omega * t)."""

    factor: float
    omega: float


@dataclass(frozen=True)
class WeightSpec:
    """Damping weights with their declared hypothesis constants.

    mu1 must be positive, non-increasing and C1 with |mu1'/mu1| <= M1; mu2
    may change sign but must satisfy |mu2| <= beta * mu1 and
    |mu2'| <= M2 * mu1. The constants are user declarations verified by
    `certify`, never inferred.
    """

    mu1: ConstantFn | ExponentialFn | SinusoidFn
    mu2: Mu2Constant | Mu2Scaled | Mu2Modulated
    M1: float
    M2: float
    beta: float

    def mu2_value(self, t):
        m = self.mu2
        if isinstance(m, Mu2Constant):
            return m.value + 0.0 * np.asarray(t, dtype=float)
        if isinstance(m, Mu2Scaled):
            return m.factor * self.mu1(t)
        return m.factor * self.mu1(t) * np.sin(m.omega * np.asarray(t, dtype=float))

    def mu2_derivative(self, t):
        m = self.mu2
        if isinstance(m, Mu2Constant):
            return 0.0 * np.asarray(t, dtype=float)
        if isinstance(m, Mu2Scaled):
            return m.factor * self.mu1.derivative(t)
        t = np.asarray(t, dtype=float)
        return m.factor * (
            self.mu1.derivative(t) * np.sin(m.omega * t)
            + m.omega * self.mu1(t) * np.cos(m.omega * t)
        )


@dataclass(frozen=True)
class DelaySpec:
    """Time-varying response lag with declared bounds
    0 < tau0 <= tau(t) <= tau1 and slope tau'(t) <= d < 1."""

    tau: ConstantFn | SinusoidFn | ExponentialFn
    tau0: float
    tau1: float
    d: float

    def __post_init__(self):
        if not (0.0 < self.tau0 <= self.tau1):
            raise InvalidDelayBoundError(
                f"delay bounds must satisfy 0 < tau0 <= tau1, got ({self.tau0}, {self.tau1})"
            )
        if not (0.0 <= self.d < 1.0):
            raise InvalidDelayBoundError(f"delay slope bound must satisfy 0 <= d < 1, got {self.d}")

    def max_abs_slope(self) -> float:
        """Global bound on |tau'|, exact for the supported families."""
        tau = self.tau
        if isinstance(tau, ConstantFn):
            return 0.0
        if isinstance(tau, SinusoidFn):
            return abs(tau.amplitude * tau.omega)
        if isinstance(tau, ExponentialFn):
            return abs(tau.rate * tau.amplitude)
        raise MalformedSpecError(f"unsupported delay family {type(tau).__name__}")


@dataclass(frozen=True)
class InitialData:
    """Initial displacement/velocity profiles plus the past velocity.

    u0/u1 live on the damped outer segments, v0/v1 on the middle one, and
    f0(x, s) supplies the velocity history for s <= 0 with f0(x, 0) = u1(x).
    """

    u0: object
    u1: object
    v0: object
    v1: object
    f0: object


@dataclass(frozen=True)
class ProblemSpec:
    """Full model definition; `delay_gain` scales the delay-reservoir weight
    (the reservoir weight is delay_gain * mu1(t))."""

    geometry: DomainGeometry
    weights: WeightSpec
    delay: DelaySpec
    initial: InitialData
    delay_gain: float = 1.0


class Coefficients(NamedTuple):
    mu1: object
    mu1_t: object
    mu2: object
    mu2_t: object
    tau: object
    tau_t: object
    reservoir: object


def evaluate_coefficients(spec: ProblemSpec, t) -> Coefficients:
    """Consistent closed-form values of every coefficient function and its
    derivative at time t (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise ValueError("coefficient functions are defined for t >= 0")
    w, dl = spec.weights, spec.delay
    mu1 = w.mu1(t)
    return Coefficients(
        mu1,
        w.mu1.derivative(t),
        w.mu2_value(t),
        w.mu2_derivative(t),
        dl.tau(t),
        dl.tau.derivative(t),
        spec.delay_gain * mu1,
    )


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------


class Violation(NamedTuple):
    hypothesis: str
    t: float
    residual: float


@dataclass
class Certificate:
    """Machine-checkable record that a parameter set satisfies every standing
    hypothesis; violations carry the offending time and the residual amount."""

    geometry_ok: bool
    h1_ok: bool
    h2_ok: bool
    delay_ok: bool
    gain_ok: bool
    geometric_lhs: float
    geometric_rhs: float
    gain_interval: GainInterval
    delay_gain: float
    sampled_violations: list
    mu1_infimum: float
    mu1_floor: float

    @property
    def mu1_floor_breached(self) -> bool:
        return self.mu1_infimum < self.mu1_floor

    @property
    def passed(self) -> bool:
        return (
            self.geometry_ok
            and self.h1_ok
            and self.h2_ok
            and self.delay_ok
            and self.gain_ok
            and not self.gain_interval.is_empty
        )

    def _summary(self, prefix):
        hits = [v for v in self.sampled_violations if v.hypothesis.startswith(prefix)]
        if not hits:
            return {"violations": 0}
        worst = max(hits, key=lambda v: v.residual)
        return {
            "violations": len(hits),
            "worst": {"hypothesis": worst.hypothesis, "t": worst.t, "residual": worst.residual},
            "first": {"hypothesis": hits[0].hypothesis, "t": hits[0].t, "residual": hits[0].residual},
        }

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "geometry": {"ok": self.geometry_ok, "lhs": self.geometric_lhs, "rhs": self.geometric_rhs},
            "h1": {"ok": self.h1_ok, **self._summary("h1")},
            "h2": {"ok": self.h2_ok, **self._summary("h2")},
            "delay": {"ok": self.delay_ok, **self._summary("delay")},
            "gain": {
                "ok": self.gain_ok,
                "interval": self.gain_interval.as_tuple(),
                "value": self.delay_gain,
            },
            "mu1": {
                "infimum": self.mu1_infimum,
                "floor": self.mu1_floor,
                "breached": self.mu1_floor_breached,
            },
        }


def _family_critical_times(fn, t0, t1):
    try:
        return fn.critical_times(t0, t1)
    except AttributeError:
        return []


def certify(spec: ProblemSpec, t_grid, mu1_floor: float = 0.0) -> Certificate:
    """Check every hypothesis pointwise on `t_grid`.

    The user grid is augmented with the exact extremum times of the supported
    families (sinusoid peaks and slope peaks), so family-level extrema such as
    a sinusoidal delay's maximal slope are caught even when the sampling would
    miss them. Tightening the sampling can only add violations, never remove
    them. Never mutates `spec`.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid < 0.0):
        raise MalformedSpecError("certification grid must be nonempty and nonnegative")
    t0, t1 = float(t_grid.min()), float(t_grid.max())

    extra = [t0, t1]
    extra += _family_critical_times(spec.weights.mu1, t0, t1)
    extra += _family_critical_times(spec.delay.tau, t0, t1)
    m2 = spec.weights.mu2
    if isinstance(m2, Mu2Modulated):
        extra += SinusoidFn(0.0, 1.0, m2.omega).critical_times(t0, t1)
    t = np.unique(np.concatenate([t_grid, np.asarray(extra, dtype=float)]))

    w, dl = spec.weights, spec.delay
    try:
        mu1 = np.asarray(w.mu1(t), dtype=float)
        mu1_t = np.asarray(w.mu1.derivative(t), dtype=float)
        mu2 = np.asarray(w.mu2_value(t), dtype=float)
        mu2_t = np.asarray(w.mu2_derivative(t), dtype=float)
        tau = np.asarray(dl.tau(t), dtype=float)
        tau_t = np.asarray(dl.tau.derivative(t), dtype=float)
    except MalformedSpecError:
        raise
    except Exception as exc:  # noqa: BLE001 - family evaluation failed
        raise MalformedSpecError(f"coefficient family evaluation failed: {exc}") from exc

    violations: list[Violation] = []

    def check(name, residual, scale):
        tol = 1e-12 * max(1.0, scale)
        idx = np.nonzero(residual > tol)[0]
        for i in idx:
            violations.append(Violation(name, float(t[i]), float(residual[i])))
        return idx.size == 0

    scale_mu = max(1.0, float(np.max(np.abs(mu1))), float(np.max(np.abs(mu2))))
    # (H1): positive, non-increasing, log-derivative bounded by M1
    pos_idx = np.nonzero(mu1 <= 0.0)[0]
    for i in pos_idx:
        violations.append(Violation("h1.positive", float(t[i]), float(-mu1[i])))
    h1_ok = pos_idx.size == 0
    h1_ok = check("h1.non_increasing", mu1_t, scale_mu) and h1_ok
    h1_ok = check("h1.log_derivative", np.abs(mu1_t) - w.M1 * mu1, scale_mu) and h1_ok

    # (H2): |mu2| <= beta mu1 and |mu2'| <= M2 mu1
    h2_ok = check("h2.magnitude", np.abs(mu2) - w.beta * mu1, scale_mu)
    h2_ok = check("h2.derivative", np.abs(mu2_t) - w.M2 * mu1, scale_mu) and h2_ok

    # delay bounds and slope
    scale_tau = max(1.0, dl.tau1)
    delay_ok = check("delay.lower", dl.tau0 - tau, scale_tau)
    delay_ok = check("delay.upper", tau - dl.tau1, scale_tau) and delay_ok
    delay_ok = check("delay.slope", tau_t - dl.d, scale_tau) and delay_ok

    geo = validate_geometry(spec.geometry)
    window = admissible_gain_interval(w.beta, dl.d)
    gain_ok = (not window.is_empty) and window.contains(spec.delay_gain)
    if not gain_ok:
        gap = 0.0 if window.is_empty else max(window.lo - spec.delay_gain, spec.delay_gain - window.hi)
        violations.append(Violation("gain.window", 0.0, float(max(gap, 0.0))))

    return Certificate(
        geometry_ok=geo.ok,
        h1_ok=h1_ok,
        h2_ok=h2_ok,
        delay_ok=delay_ok,
        gain_ok=gain_ok,
        geometric_lhs=geo.lhs,
        geometric_rhs=geo.rhs,
        gain_interval=window,
        delay_gain=spec.delay_gain,
        sampled_violations=violations,
        mu1_infimum=float(np.min(mu1)),
        mu1_floor=mu1_floor,
    )
