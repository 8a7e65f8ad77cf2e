"""Exponent functions f2, the exponential-activation control law and its conjugate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_U_MAX = 1e6


class ActivationError(ValueError):
    pass


class DegenerateBaseError(ActivationError):
    """C = 1 leaves 1/ln C undefined."""


class BaseDomainError(ActivationError):
    """C must be positive for real exponentiation."""


class SingularityError(ActivationError, ArithmeticError):
    """Evaluation at a pole or cusp of the function."""


def sign(x: float) -> float:
    """sign with sign(0) = 0."""
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


@dataclass(frozen=True)
class ControlParams:
    """Base ``C`` of the activation and the derived constant ``C1 = 1/ln C``."""

    C: float
    C1: float = field(init=False)

    def __post_init__(self):
        C = float(self.C)
        if not math.isfinite(C):
            raise BaseDomainError(f"C must be finite, got {C}")
        if C == 1.0:
            raise DegenerateBaseError("C = 1 makes ln C = 0 and C1 undefined")
        if C <= 0.0:
            raise BaseDomainError(f"C must be positive for real exponentiation, got {C}")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "C1", 1.0 / math.log(C))

    @property
    def log_c(self) -> float:
        return math.log(self.C)


def validate(C: float) -> ControlParams:
    return ControlParams(C)


@dataclass(frozen=True)
class PowerLawParams:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ActivationError(f"power-law exponent must lie in [0, 1], got {self.alpha}")


class ExponentSpec:
    """An even exponent function f2, parametrized by s = |S| >= 0.

    Subclasses implement ``value(s)`` and ``slope(s)`` (d f2 / ds for s > 0).
    """

    name = "abstract"

    def value(self, s: float) -> float:
        raise NotImplementedError

    def slope(self, s: float) -> float:
        raise NotImplementedError

    def unbounded_at_origin(self) -> bool:
        """Whether f2(s) -> +inf as s -> 0+."""
        return False

    def describe(self) -> dict:
        return {"case": self.name}


@dataclass(frozen=True)
class Identity(ExponentSpec):
    name = "identity"

    def value(self, s):
        return s

    def slope(self, s):
        return 1.0


@dataclass(frozen=True)
class Sqrt(ExponentSpec):
    name = "sqrt"

    def value(self, s):
        return math.sqrt(s)

    def slope(self, s):
        return 0.5 / math.sqrt(s)


@dataclass(frozen=True)
class Reciprocal(ExponentSpec):
    name = "reciprocal"

    def value(self, s):
        if s == 0:
            raise SingularityError("f2 = 1/|S| is singular at S = 0")
        return 1.0 / s

    def slope(self, s):
        return -1.0 / (s * s)

    def unbounded_at_origin(self):
        return True


@dataclass(frozen=True)
class Power(ExponentSpec):
    alpha: float
    name = "power"

    def __post_init__(self):
        if self.alpha == 0 or not math.isfinite(self.alpha):
            raise ActivationError(f"power exponent must be finite and nonzero, got {self.alpha}")

    def value(self, s):
        if s == 0 and self.alpha < 0:
            raise SingularityError(f"|S|^{self.alpha} is singular at S = 0")
        return s**self.alpha

    def slope(self, s):
        return self.alpha * s ** (self.alpha - 1.0)

    def unbounded_at_origin(self):
        return self.alpha < 0

    def describe(self):
        return {"case": self.name, "alpha": self.alpha}


@dataclass(frozen=True)
class Additive(ExponentSpec):
    """Weighted sum f2 = sum_i w_i f_i(|S|) of non-additive terms."""

    terms: tuple[tuple[float, ExponentSpec], ...]
    name = "additive"

    def __post_init__(self):
        terms = tuple((float(w), inner) for w, inner in self.terms)
        if not terms:
            raise ActivationError("additive exponent needs at least one term")
        for _, inner in terms:
            if isinstance(inner, Additive):
                raise ActivationError("additive terms must not themselves be additive")
            if not isinstance(inner, ExponentSpec):
                raise ActivationError(f"not an exponent spec: {inner!r}")
        object.__setattr__(self, "terms", terms)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(w for w, _ in self.terms)

    def value(self, s):
        return sum(w * inner.value(s) for w, inner in self.terms)

    def slope(self, s):
        return sum(w * inner.slope(s) for w, inner in self.terms)

    def unbounded_at_origin(self):
        return any(w > 0 and inner.unbounded_at_origin() for w, inner in self.terms)

    def describe(self):
        return {
            "case": self.name,
            "weights": list(self.weights),
            "terms": [inner.describe() for _, inner in self.terms],
        }


@dataclass(frozen=True)
class Scheduled(ExponentSpec):
    """Exponent |S|^alpha(|S|) with alpha piecewise linear in |S|.

    Models a law that behaves like a relay far from the surface and
    becomes progressively linear close to it. ``alpha`` is held constant
    outside the outermost knots.
    """

    knots: tuple[float, ...] = (0.0, 0.2, 1.0)
    alphas: tuple[float, ...] = (0.9, 0.5, 0.1)
    name = "scheduled"

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        alphas = tuple(float(a) for a in self.alphas)
        if len(knots) != len(alphas) or not knots:
            raise ActivationError("knots and alphas must be non-empty and of equal length")
        if any(b <= a for a, b in zip(knots, knots[1:])) or knots[0] < 0:
            raise ActivationError("knots must be non-negative and strictly increasing")
        if any(not 0.0 < a <= 1.0 for a in alphas):
            raise ActivationError("scheduled exponents must lie in (0, 1]")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "alphas", alphas)

    def alpha_of(self, s: float) -> float:
        return float(np.interp(s, self.knots, self.alphas))

    def _alpha_slope(self, s: float) -> float:
        k = self.knots
        if s <= k[0] or s >= k[-1]:
            return 0.0
        i = int(np.searchsorted(k, s, side="right")) - 1
        return (self.alphas[i + 1] - self.alphas[i]) / (k[i + 1] - k[i])

    def value(self, s):
        return s ** self.alpha_of(s)

    def slope(self, s):
        a = self.alpha_of(s)
        return s**a * (self._alpha_slope(s) * math.log(s) + a / s)

    def power_law(self, S: float) -> float:
        """U = -|S|^alpha(|S|) sign(S), the variable-exponent form of the power law."""
        return -sign(S) * abs(S) ** self.alpha_of(abs(S))

    def describe(self):
        return {"case": self.name, "knots": list(self.knots), "alphas": list(self.alphas)}


def f2_eval(spec: ExponentSpec, S: float) -> float:
    return spec.value(abs(S))


def f2_derivative(spec: ExponentSpec, S: float) -> float:
    """d f2(|S|) / dS, including the sign(S) factor from |S|."""
    if S == 0:
        raise SingularityError(f"f2 for {spec.name} has no derivative at S = 0")
    return spec.slope(abs(S)) * sign(S)


def control_u(
    params: ControlParams, spec: ExponentSpec, S: float, u_max: float = DEFAULT_U_MAX
) -> float:
    """U = -C^f2(|S|) sign(S), with U(0) = 0 and |U| clamped to ``u_max``."""
    if S == 0:
        return 0.0
    exponent = spec.value(abs(S))
    if exponent * params.log_c >= math.log(u_max):
        magnitude = u_max
    else:
        try:
            magnitude = params.C**exponent
        except OverflowError:
            magnitude = math.inf
    return -sign(S) * magnitude


def power_control(p: PowerLawParams, S: float) -> float:
    """U = -|S|^alpha sign(S): relay at alpha = 0, linear at alpha = 1."""
    if S == 0:
        return 0.0
    return -sign(S) * abs(S) ** p.alpha


def conjugate_g(params: ControlParams, U: float) -> float:
    """g(U) = log_C|U| sign(U)."""
    if U == 0:
        raise SingularityError("g(U) = log_C|U| sign(U) is singular at U = 0")
    return math.log(abs(U)) * params.C1 * sign(U)


def make_spec(case: str, alpha: float | None = None, weights: Sequence[float] | None = None) -> ExponentSpec:
    """Build an exponent spec from a case name as used on the command line.

    ``additive`` pairs the weights with sqrt and identity terms in that order,
    so ``weights=(w1, w2)`` gives f2 = w1 sqrt|S| + w2 |S|.
    """
    if case == "identity":
        return Identity()
    if case == "sqrt":
        return Sqrt()
    if case == "reciprocal":
        return Reciprocal()
    if case == "power":
        if alpha is None:
            raise ActivationError("case 'power' requires alpha")
        return Power(alpha)
    if case == "additive":
        weights = tuple(weights) if weights else (1.0, 1.0)
        inners = (Sqrt(), Identity())
        if len(weights) > len(inners):
            raise ActivationError(f"additive case takes at most {len(inners)} weights")
        return Additive(tuple(zip(weights, inners)))
    if case == "scheduled":
        return Scheduled()
    raise ActivationError(f"unknown case {case!r}")
