"""Real special functions: generalized exponential integral, principal-value Ei,
upper incomplete gamma and erf, plus an adaptive quadrature routine.

Algorithms follow the usual split: power series for small arguments,
modified-Lentz continued fractions for large ones.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable

from scipy import integrate

EULER_GAMMA = 0.57721566490153286061

_EPS = sys.float_info.epsilon
_TINY = 1e-300
_MAX_ITER = 10_000


class SpecialFunctionError(ArithmeticError):
    """Base class for special-function failures."""


class DomainError(SpecialFunctionError, ValueError):
    """Argument outside the real-line domain of the function."""


class DivergenceError(SpecialFunctionError):
    """The defining integral diverges for these arguments."""


class ConvergenceError(SpecialFunctionError):
    """Iteration or quadrature failed to reach the requested accuracy."""

    def __init__(self, message: str, estimate: float = math.nan, error: float = math.nan):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class AccuracyPolicy:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_subdivisions: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_subdivisions < 1:
            raise ValueError(f"max_subdivisions must be >= 1, got {self.max_subdivisions}")


DEFAULT_POLICY = AccuracyPolicy()


def quad_adaptive(
    integrand: Callable[[float], float],
    lower: float,
    upper: float,
    policy: AccuracyPolicy = DEFAULT_POLICY,
) -> float:
    """Adaptive Gauss-Kronrod quadrature of ``integrand`` over [lower, upper].

    ``upper`` may be ``math.inf``; QUADPACK then maps the half line onto
    (0, 1] with x = lower + (1 - t) / t before subdividing.

    Raises ConvergenceError (carrying the last estimate) when the error
    estimate exceeds ``max(abs_tol, rel_tol * |result|)``.
    """
    if not upper > lower:
        raise ValueError(f"need upper > lower, got [{lower}, {upper}]")
    result, abserr, info, *flag = integrate.quad(
        integrand,
        lower,
        upper,
        epsabs=policy.abs_tol,
        epsrel=policy.rel_tol,
        limit=policy.max_subdivisions,
        full_output=1,
    )
    bound = max(policy.abs_tol, policy.rel_tol * abs(result))
    # a trailing message means QUADPACK gave up (ier > 0), whatever abserr says
    if flag or not math.isfinite(result) or abserr > bound:
        detail = f"; {flag[0]}" if flag else ""
        raise ConvergenceError(
            f"quadrature on [{lower}, {upper}] did not converge "
            f"(estimate {result!r}, error {abserr:.3g} > {bound:.3g}, "
            f"{info['last']} subintervals{detail})",
            estimate=result,
            error=abserr,
        )
    return result


def _lentz(a_terms: Callable[[int], float], b_terms: Callable[[int], float], b0: float) -> float:
    """Evaluate b0 + a1/(b1 + a2/(b2 + ...)) by the modified Lentz method."""
    f = b0 if b0 != 0.0 else _TINY
    c, d = f, 0.0
    for n in range(1, _MAX_ITER):
        an, bn = a_terms(n), b_terms(n)
        d = bn + an * d
        d = _TINY if d == 0.0 else d
        c = bn + an / c
        c = _TINY if c == 0.0 else c
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < _EPS:
            return f
    raise ConvergenceError("continued fraction failed to converge", estimate=f)


def _en_series(a: float, z: float) -> float:
    # E_a(z) = Gamma(1-a) z^(a-1) - sum_k (-z)^k / (k! (k+1-a)); integer a uses the digamma form
    n = round(a)
    if abs(a - n) < 1e-12:
        # E_n(z) = (-z)^(n-1)/(n-1)! (psi(n) - ln z) - sum_{k != n-1} (-z)^k / (k! (k-n+1))
        psi = -EULER_GAMMA + sum(1.0 / k for k in range(1, n))
        total = 0.0
        term = 1.0  # (-z)^k / k!
        for k in range(_MAX_ITER):
            if k == n - 1:
                contrib = term * (psi - math.log(z))
            else:
                contrib = -term / (k - n + 1)
            total += contrib
            if k > n and abs(contrib) < abs(total) * _EPS:
                return total
            term *= -z / (k + 1)
        raise ConvergenceError("E_n series failed to converge", estimate=total)
    total = math.gamma(1.0 - a) * z ** (a - 1.0)
    term = 1.0
    for k in range(_MAX_ITER):
        contrib = term / (k + 1.0 - a)
        total -= contrib
        if abs(contrib) < abs(total) * _EPS:
            return total
        term *= -z / (k + 1)
    raise ConvergenceError("E_a series failed to converge", estimate=total)


def _en_cfrac(a: float, z: float) -> float:
    # E_a(z) = e^-z / (z + a - 1*a/(z + a + 2 - 2(a+1)/(z + a + 4 - ...)))
    cf = _lentz(
        lambda i: -i * (a + i - 1.0),
        lambda i: z + a + 2.0 * i,
        z + a,
    )
    return math.exp(-z) / cf


def en_general(a: float, z: float) -> float:
    """Generalized exponential integral E_a(z) = int_1^inf exp(-k z) k^-a dk.

    Defined here for real order ``a >= 0`` and ``z > 0``.
    """
    if not z > 0:
        raise DomainError(f"en_general requires z > 0, got z={z}")
    if a < 0:
        raise DomainError(f"en_general requires order a >= 0, got a={a}")
    if a == 0:
        return math.exp(-z) / z
    if z < 1.0:
        return _en_series(a, z)
    return _en_cfrac(a, z)


def ei_principal(x: float) -> float:
    """Cauchy principal value Ei(x) = p.v. int_{-inf}^x e^t / t dt for x > 0."""
    if not x > 0:
        raise DomainError(f"ei_principal requires x > 0, got x={x}")
    if x > 40.0:
        # asymptotic e^x/x * sum k!/x^k, truncated at the smallest term
        total, term = 1.0, 1.0
        for k in range(1, int(x)):
            prev = term
            term *= k / x
            if term < _EPS * total:
                break
            if term > prev:
                term = prev
                break
            total += term
        return math.exp(x) / x * total
    total = EULER_GAMMA + math.log(x)
    term = 1.0  # x^k / k!
    for k in range(1, _MAX_ITER):
        term *= x / k
        contrib = term / k
        total += contrib
        if contrib < _EPS * abs(total):
            return total
    raise ConvergenceError("Ei series failed to converge", estimate=total)


def _gamma_upper_direct(s: float, x: float) -> float:
    log_prefactor = s * math.log(x) - x
    if 0 < s and x < s + 1.0:
        # lower gamma via series, then subtract from the complete gamma
        ap, term = s, 1.0 / s
        total = term
        for _ in range(_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                return math.gamma(s) - total * math.exp(log_prefactor)
        raise ConvergenceError("incomplete gamma series failed to converge")
    # Gamma(s,x) = e^-x x^s / (x+1-s - 1(1-s)/(x+3-s - 2(2-s)/(x+5-s - ...)))
    cf = _lentz(
        lambda i: -i * (i - s),
        lambda i: x + 2.0 * i + 1.0 - s,
        x + 1.0 - s,
    )
    return math.exp(log_prefactor) / cf


def gamma_upper(s: float, x: float) -> float:
    """Upper incomplete gamma function Gamma(s, x) = int_x^inf t^(s-1) e^-t dt.

    Negative orders with x < 1 are reached by the downward recurrence
    Gamma(s, x) = (Gamma(s+1, x) - x^s e^-x) / s; the recurrence loses
    digits for large x, where the continued fraction is used instead.
    """
    if x < 0:
        raise DomainError(f"gamma_upper requires x >= 0, got x={x}")
    if x == 0:
        if s <= 0:
            raise DivergenceError(f"Gamma(s, 0) diverges for s={s} <= 0")
        return math.gamma(s)
    if s > 0 or x >= 1.0:
        # the continued fraction converges for any real order once x >= 1
        return _gamma_upper_direct(s, x)
    if s == 0:
        return en_general(1.0, x)
    steps = math.ceil(-s)
    base = s + steps
    value = en_general(1.0, x) if base == 0 else _gamma_upper_direct(base, x)
    order = base
    for _ in range(steps):
        order -= 1.0
        value = (value - math.exp(order * math.log(x) - x)) / order
    return value


def erf(x: float) -> float:
    """Error function, odd by construction."""
    return math.copysign(math.erf(abs(x)), x)
