"""Closed-form parametric function families.

Coefficient functions (damping weights, delay law) and initial-data profiles
are restricted to closed-form families so that the derivatives and extrema
used by hypothesis certification are analytic, not finite-difference
artifacts. All families broadcast over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MalformedSpecError

__all__ = [
    "ConstantFn",
    "ExponentialFn",
    "SinusoidFn",
    "ZeroField",
    "ConstantField",
    "BumpField",
    "SineField",
    "ExpressionField",
    "VelocityHistory",
    "ExpressionHistory",
    "time_function",
    "space_function",
    "history_function",
]


def _arr(t):
    return np.asarray(t, dtype=float)


# --------------------------------------------------------------------------
# time-dependent coefficients
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantFn:
    value: float

    def __call__(self, t):
        return self.value + 0.0 * _arr(t)

    def derivative(self, t):
        return 0.0 * _arr(t)

    def bounds(self, t0, t1):
        return self.value, self.value

    def derivative_bounds(self, t0, t1):
        return 0.0, 0.0

    def critical_times(self, t0, t1):
        return []


@dataclass(frozen=True)
class ExponentialFn:
    """amplitude * exp(-rate * t); non-increasing for rate >= 0."""

    amplitude: float
    rate: float

    def __call__(self, t):
        return self.amplitude * np.exp(-self.rate * _arr(t))

    def derivative(self, t):
        return -self.rate * self(t)

    def bounds(self, t0, t1):
        # monotone, so the endpoints are the extrema
        lo, hi = sorted((float(self(t0)), float(self(t1))))
        return lo, hi

    def derivative_bounds(self, t0, t1):
        lo, hi = sorted((float(self.derivative(t0)), float(self.derivative(t1))))
        return lo, hi

    def critical_times(self, t0, t1):
        return []


def _phase_times(omega, offset, t0, t1):
    """Times in [t0, t1] where omega * t == offset (mod pi)."""
    if omega == 0.0:
        return []
    k0 = math.ceil((omega * t0 - offset) / math.pi - 1e-12)
    k1 = math.floor((omega * t1 - offset) / math.pi + 1e-12)
    return [(offset + k * math.pi) / omega for k in range(k0, k1 + 1)]


@dataclass(frozen=True)
class SinusoidFn:
    """offset + amplitude * sin(omega * t)."""

    offset: float
    amplitude: float
    omega: float

    def __call__(self, t):
        return self.offset + self.amplitude * np.sin(self.omega * _arr(t))

    def derivative(self, t):
        return self.amplitude * self.omega * np.cos(self.omega * _arr(t))

    def bounds(self, t0, t1):
        cand = [t0, t1] + _phase_times(self.omega, math.pi / 2.0, t0, t1)
        vals = [float(self(t)) for t in cand]
        return min(vals), max(vals)

    def derivative_bounds(self, t0, t1):
        cand = [t0, t1] + _phase_times(self.omega, 0.0, t0, t1)
        vals = [float(self.derivative(t)) for t in cand]
        return min(vals), max(vals)

    def critical_times(self, t0, t1):
        # extrema of both the value and the slope
        return _phase_times(self.omega, math.pi / 2.0, t0, t1) + _phase_times(
            self.omega, 0.0, t0, t1
        )


# --------------------------------------------------------------------------
# spatial profiles for initial data
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroField:
    def __call__(self, x):
        return 0.0 * _arr(x)


@dataclass(frozen=True)
class ConstantField:
    value: float

    def __call__(self, x):
        return self.value + 0.0 * _arr(x)


@dataclass(frozen=True)
class BumpField:
    """Smooth compactly supported bump.

    Peaks at `amplitude` in the center and vanishes with all derivatives at
    |x - center| = halfwidth, so boundary and interface compatibility hold
    automatically whenever the support stays inside one open segment.
    """

    center: float
    halfwidth: float
    amplitude: float

    def __call__(self, x):
        s = (_arr(x) - self.center) / self.halfwidth
        gap = np.clip(1.0 - s * s, 1e-300, None)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            core = np.exp(1.0 - 1.0 / gap)
        return np.where(np.abs(s) < 1.0, self.amplitude * core, 0.0)


@dataclass(frozen=True)
class SineField:
    """amplitude * sin(mode * pi * x / length); vanishes at x = 0 and x = length."""

    amplitude: float
    mode: int
    length: float

    def __call__(self, x):
        return self.amplitude * np.sin(self.mode * math.pi * _arr(x) / self.length)


_EXPR_NAMES = {
    "np": np,
    "pi": math.pi,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "where": np.where,
    "minimum": np.minimum,
    "maximum": np.maximum,
}


def _safe_eval(formula, **variables):
    try:
        code = compile(formula, "<family expression>", "eval")
        return eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, **variables})
    except Exception as exc:  # noqa: BLE001 - surfaced as a spec error
        raise MalformedSpecError(f"cannot evaluate expression {formula!r}: {exc}") from exc


@dataclass(frozen=True)
class ExpressionField:
    """Numpy expression in x, evaluated in a restricted namespace."""

    formula: str

    def __call__(self, x):
        x = _arr(x)
        return _safe_eval(self.formula, x=x) + 0.0 * x


# --------------------------------------------------------------------------
# past-velocity histories
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VelocityHistory:
    """History equal to a fixed spatial profile at every past time.

    The default choice ties the history to the initial velocity, which makes
    the s = 0 consistency requirement hold by construction.
    """

    profile: object

    def __call__(self, x, s):
        x_b, s_b = np.broadcast_arrays(_arr(x), _arr(s))
        return np.asarray(self.profile(x_b), dtype=float) + 0.0 * s_b


@dataclass(frozen=True)
class ExpressionHistory:
    """Numpy expression in x and the (nonpositive) past time s."""

    formula: str

    def __call__(self, x, s):
        x_b, s_b = np.broadcast_arrays(_arr(x), _arr(s))
        return _safe_eval(self.formula, x=x_b, s=s_b) + 0.0 * x_b + 0.0 * s_b


# --------------------------------------------------------------------------
# tagged-record parsing
# --------------------------------------------------------------------------


def _unpack(record, kind):
    if not isinstance(record, dict) or "family" not in record:
        raise MalformedSpecError(f"{kind}: expected a tagged record {{family, params}}, got {record!r}")
    params = record.get("params") or {}
    if not isinstance(params, dict):
        raise MalformedSpecError(f"{kind}: params must be a mapping, got {params!r}")
    return str(record["family"]), params


def _param(params, name, family):
    try:
        return float(params[name])
    except KeyError:
        raise MalformedSpecError(f"family {family!r} needs parameter {name!r}") from None
    except (TypeError, ValueError):
        raise MalformedSpecError(f"family {family!r}: parameter {name!r} must be a number") from None


def time_function(record):
    family, params = _unpack(record, "time function")
    if family == "constant":
        return ConstantFn(_param(params, "value", family))
    if family == "exponential":
        return ExponentialFn(_param(params, "amplitude", family), _param(params, "rate", family))
    if family == "sinusoid":
        return SinusoidFn(
            _param(params, "offset", family),
            _param(params, "amplitude", family),
            _param(params, "omega", family),
        )
    raise MalformedSpecError(f"unknown time-function family {family!r}")


def space_function(record):
    family, params = _unpack(record, "space function")
    if family == "zero":
        return ZeroField()
    if family == "constant":
        return ConstantField(_param(params, "value", family))
    if family == "bump":
        return BumpField(
            _param(params, "center", family),
            _param(params, "halfwidth", family),
            _param(params, "amplitude", family),
        )
    if family == "sine":
        return SineField(
            _param(params, "amplitude", family),
            int(_param(params, "mode", family)),
            _param(params, "length", family),
        )
    if family == "expression":
        if "formula" not in params:
            raise MalformedSpecError("family 'expression' needs parameter 'formula'")
        return ExpressionField(str(params["formula"]))
    raise MalformedSpecError(f"unknown space-function family {family!r}")


def history_function(record, u1):
    family, params = _unpack(record, "history function")
    if family == "from_u1":
        return VelocityHistory(u1)
    if family == "zero":
        return VelocityHistory(ZeroField())
    if family == "expression":
        if "formula" not in params:
            raise MalformedSpecError("family 'expression' needs parameter 'formula'")
        return ExpressionHistory(str(params["formula"]))
    raise MalformedSpecError(f"unknown history-function family {family!r}")
