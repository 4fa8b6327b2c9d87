"""Rational transfer functions of single-input single-output LTI systems.

Polynomials hold real coefficients in ascending powers of s. Every transfer function
carries the time unit its Laplace variable is expressed in; combining functions of
different units raises :class:`UnitMismatch` instead of converting silently.
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import signal

from ncsbound.errors import ImproperTransferFunction, PoleOnAxis, UnitMismatch
from ncsbound.units import TimeUnit

logger = logging.getLogger(__name__)

ROUTH_EPSILON = 1e-12
POLE_TOLERANCE = 1e-300
ROBUST_WEIGHT_HF_GAIN = 3.465


def _trim(coeffs: Iterable[float]) -> tuple[float, ...]:
    arr = np.asarray(list(coeffs), dtype=float)
    if arr.size == 0:
        return (0.0,)
    nonzero = np.flatnonzero(arr)
    if nonzero.size == 0:
        return (0.0,)
    return tuple(float(c) for c in arr[: nonzero[-1] + 1])


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial, coefficients in ascending powers; trailing zeros are dropped."""

    coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", _trim(self.coeffs))

    @classmethod
    def from_roots(cls, roots: Sequence[complex], gain: float = 1.0) -> "Polynomial":
        coeffs = npoly.polyfromroots(roots) * gain if len(roots) else np.array([gain])
        return cls(tuple(np.real(coeffs)))

    @classmethod
    def from_descending(cls, coeffs: Sequence[float]) -> "Polynomial":
        return cls(tuple(coeffs)[::-1])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    def descending(self) -> np.ndarray:
        return np.asarray(self.coeffs[::-1], dtype=float)

    def normalized(self) -> "Polynomial":
        """Monic copy."""
        if self.is_zero:
            raise ValueError("cannot normalize the zero polynomial")
        return Polynomial(tuple(c / self.leading for c in self.coeffs))

    def roots(self) -> np.ndarray:
        return npoly.polyroots(self.coeffs) if self.degree > 0 else np.array([], dtype=complex)

    def __call__(self, s: complex | np.ndarray) -> complex | np.ndarray:
        return npoly.polyval(s, self.coeffs)

    def __add__(self, other: "Polynomial | float") -> "Polynomial":
        other = other if isinstance(other, Polynomial) else Polynomial((float(other),))
        return Polynomial(tuple(npoly.polyadd(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "Polynomial | float") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial | float") -> "Polynomial":
        if isinstance(other, Polynomial):
            return Polynomial(tuple(npoly.polymul(self.coeffs, other.coeffs)))
        return Polynomial(tuple(c * float(other) for c in self.coeffs))

    __rmul__ = __mul__

    def __str__(self) -> str:
        terms = [f"{c:g}*s^{k}" if k else f"{c:g}" for k, c in enumerate(self.coeffs) if c]
        return " + ".join(reversed(terms)) or "0"


def _poly(value: "Polynomial | Sequence[float] | float") -> Polynomial:
    if isinstance(value, Polynomial):
        return value
    if isinstance(value, (int, float)):
        return Polynomial((float(value),))
    return Polynomial(tuple(value))


@dataclass(frozen=True)
class RationalTransferFunction:
    """num(s) / den(s) with a time-unit annotation.

    Common factors are kept unless :func:`reduce` is called explicitly.
    """

    num: Polynomial
    den: Polynomial = field(default_factory=lambda: Polynomial((1.0,)))
    time_unit: TimeUnit = TimeUnit.SECONDS

    def __post_init__(self) -> None:
        object.__setattr__(self, "num", _poly(self.num))
        object.__setattr__(self, "den", _poly(self.den))
        object.__setattr__(self, "time_unit", TimeUnit(self.time_unit))
        if self.den.is_zero:
            raise ValueError("denominator must not be identically zero")

    @classmethod
    def constant(cls, gain: float, time_unit: TimeUnit = TimeUnit.SECONDS) -> "RationalTransferFunction":
        return cls(Polynomial((float(gain),)), Polynomial((1.0,)), time_unit)

    @property
    def is_proper(self) -> bool:
        return self.num.is_zero or self.num.degree <= self.den.degree

    @property
    def is_strictly_proper(self) -> bool:
        return self.num.is_zero or self.num.degree < self.den.degree

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def zeros(self) -> np.ndarray:
        return self.num.roots()

    def __call__(self, s: complex) -> complex:
        d = complex(self.den(s))
        if abs(d) < POLE_TOLERANCE:
            raise PoleOnAxis(f"s={s} is a pole")
        return complex(self.num(s)) / d

    def __mul__(self, other: "RationalTransferFunction") -> "RationalTransferFunction":
        return series(self, other)

    def __add__(self, other: "RationalTransferFunction") -> "RationalTransferFunction":
        return parallel(self, other)

    def __neg__(self) -> "RationalTransferFunction":
        return RationalTransferFunction(-self.num, self.den, self.time_unit)


TransferFunction = RationalTransferFunction


def _same_unit(*tfs: RationalTransferFunction) -> TimeUnit:
    units = {tf.time_unit for tf in tfs}
    if len(units) > 1:
        raise UnitMismatch(
            "transfer functions use different time units: "
            + ", ".join(sorted(u.value for u in units))
        )
    return tfs[0].time_unit


def evaluate(tf: RationalTransferFunction, omega: float) -> complex:
    """Frequency response at s = j*omega (rad per time unit).

    Raises:
        PoleOnAxis: omega is a pole of tf
    """
    if omega < 0:
        raise ValueError("omega must be >= 0")
    return tf(1j * omega)


def frequency_response(tf: RationalTransferFunction, omegas: Sequence[float] | np.ndarray) -> np.ndarray:
    """Vectorized frequency response over a grid of omegas."""
    s = 1j * np.asarray(omegas, dtype=float)
    den = tf.den(s)
    if np.any(np.abs(den) < POLE_TOLERANCE):
        raise PoleOnAxis("grid contains a pole on the imaginary axis")
    return tf.num(s) / den


def series(a: RationalTransferFunction, b: RationalTransferFunction) -> RationalTransferFunction:
    """Cascade a then b."""
    unit = _same_unit(a, b)
    return RationalTransferFunction(a.num * b.num, a.den * b.den, unit)


def parallel(a: RationalTransferFunction, b: RationalTransferFunction) -> RationalTransferFunction:
    unit = _same_unit(a, b)
    return RationalTransferFunction(a.num * b.den + b.num * a.den, a.den * b.den, unit)


def feedback(
    forward: RationalTransferFunction, back: RationalTransferFunction | None = None
) -> RationalTransferFunction:
    """Negative feedback loop forward / (1 + forward * back); unity feedback by default."""
    if back is None:
        back = RationalTransferFunction.constant(1.0, forward.time_unit)
    unit = _same_unit(forward, back)
    return RationalTransferFunction(
        forward.num * back.den,
        forward.den * back.den + forward.num * back.num,
        unit,
    )


def complementary_sensitivity(
    plant: RationalTransferFunction, controller: RationalTransferFunction
) -> RationalTransferFunction:
    """T = PC / (1 + PC), formed without pole-zero cancellation."""
    return feedback(series(plant, controller))


def is_hurwitz(p: Polynomial) -> bool:
    """Whether every root of p lies strictly in the open left half-plane.

    Routh-Hurwitz tabular test. A zero pivot is replaced by a small positive
    epsilon; a whole zero row (roots symmetric about the origin) is not Hurwitz.

    Raises:
        ValueError: p is the zero polynomial
    """
    p = _poly(p)
    if p.is_zero:
        raise ValueError("zero polynomial has no defined roots")
    c = p.descending()
    if c[0] < 0:
        c = -c
    if p.degree == 0:
        return True
    # a Hurwitz polynomial has all coefficients of one sign
    if np.any(c <= 0):
        return False

    n = len(c)
    width = (n + 1) // 2
    scale = float(np.max(np.abs(c)))
    tol = ROUTH_EPSILON * scale

    def row(values: np.ndarray) -> np.ndarray:
        out = np.zeros(width)
        out[: len(values)] = values
        return out

    rows = [row(c[0::2]), row(c[1::2])]
    while len(rows) < n:
        upper, lower = rows[-2], rows[-1].copy()
        if not np.any(np.abs(lower) > tol):
            return False
        if abs(lower[0]) <= tol:
            lower[0] = tol
            rows[-1] = lower
        nxt = np.zeros(width)
        nxt[:-1] = (lower[0] * upper[1:] - upper[0] * lower[1:]) / lower[0]
        rows.append(nxt)
    first = np.array([r[0] for r in rows])
    return bool(np.all(first > 0))


def delay_rational_approx(
    tau: float, time_unit: TimeUnit = TimeUnit.SECONDS
) -> RationalTransferFunction:
    """First-order all-pass approximation of exp(-tau*s): (1 - tau/2 s) / (1 + tau/2 s)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return RationalTransferFunction.constant(1.0, time_unit)
    return RationalTransferFunction(
        Polynomial((1.0, -tau / 2)), Polynomial((1.0, tau / 2)), time_unit
    )


def delay_uncertainty_weight(
    tau: float, time_unit: TimeUnit = TimeUnit.SECONDS
) -> RationalTransferFunction:
    """Weight w(s) = -tau*s / (1 + tau/2 s), so that exp(-tau*s) is about 1 + w(s)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return RationalTransferFunction(
        Polynomial((0.0, -tau)), Polynomial((1.0, tau / 2)), time_unit
    )


def robust_weight(ubd: float, time_unit: TimeUnit = TimeUnit.SECONDS) -> RationalTransferFunction:
    """Delay-error weight w_h(s) = ubd*s / (1 + ubd*s/3.465).

    Zero at DC, monotone magnitude, high-frequency gain 3.465.
    """
    if not ubd > 0:
        raise ValueError(f"ubd must be > 0, got {ubd}")
    return RationalTransferFunction(
        Polynomial((0.0, ubd)), Polynomial((1.0, ubd / ROBUST_WEIGHT_HF_GAIN)), time_unit
    )


def reduce(tf: RationalTransferFunction, tol: float = 1e-9) -> RationalTransferFunction:
    """Cancel numerator roots that coincide with denominator roots within ``tol``.

    Never called implicitly.
    """
    zeros = list(tf.zeros())
    poles = list(tf.poles())
    kept_zeros = []
    cancelled = 0
    for z in zeros:
        match = next(
            (k for k, p in enumerate(poles) if abs(z - p) <= tol * max(1.0, abs(p))), None
        )
        if match is None:
            kept_zeros.append(z)
        else:
            poles.pop(match)
            cancelled += 1
    if not cancelled:
        return tf
    logger.debug(f"Cancelled {cancelled} pole-zero pair(s)")
    return RationalTransferFunction(
        Polynomial.from_roots(kept_zeros, tf.num.leading),
        Polynomial.from_roots(poles, tf.den.leading),
        tf.time_unit,
    )


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Continuous realization dx/dt = A x + B u, y = C x + D u."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    time_unit: TimeUnit = TimeUnit.SECONDS

    @property
    def order(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True, eq=False)
class DiscreteStateSpace:
    """Sampled realization x[k+1] = A x[k] + B u[k], y[k] = C x[k] + D u[k]."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    step: float
    time_unit: TimeUnit = TimeUnit.SECONDS

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.a) if self.order else np.array([], dtype=complex)


def to_state_space(tf: RationalTransferFunction) -> StateSpace:
    """Controllable canonical realization.

    Raises:
        ImproperTransferFunction: numerator degree above denominator degree
    """
    if not tf.is_proper:
        raise ImproperTransferFunction(
            f"numerator degree {tf.num.degree} exceeds denominator degree {tf.den.degree}"
        )
    n = tf.den.degree
    if n == 0 or tf.num.is_zero:
        gain = tf.num.coeffs[0] / tf.den.coeffs[0] if n == 0 else 0.0
        return StateSpace(
            np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.array([[gain]]), tf.time_unit
        )
    a, b, c, d = signal.tf2ss(tf.num.descending(), tf.den.descending())
    return StateSpace(
        np.asarray(a, dtype=float).reshape(n, n),
        np.asarray(b, dtype=float).reshape(n, 1),
        np.asarray(c, dtype=float).reshape(1, n),
        np.asarray(d, dtype=float).reshape(1, 1),
        tf.time_unit,
    )


def discretize(ss: StateSpace, step: float) -> DiscreteStateSpace:
    """Zero-order-hold discretization through ``scipy.signal.cont2discrete``.

    Args:
        ss: Continuous realization
        step: Sampling period in ``ss.time_unit``

    Returns:
        DiscreteStateSpace
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    if ss.b.shape[0] == 0:
        return DiscreteStateSpace(ss.a, ss.b, ss.c, ss.d, step, ss.time_unit)
    a, b, c, d, _ = signal.cont2discrete((ss.a, ss.b, ss.c, ss.d), step, method="zoh")
    return DiscreteStateSpace(a, b, c, d, step, ss.time_unit)
