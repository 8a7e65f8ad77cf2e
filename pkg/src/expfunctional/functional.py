"""Quality functional I = int [F(S) + G(U)] dt for exponential-activation laws.

G(U) is the energy term obtained by integrating the conjugate g(U).
F(S) is the state term whose derivative is the activation
C^f2(|S|) sign(S); it has elementary closed forms for the identity and
square-root exponents, special-function forms for the reciprocal and
power exponents, and falls back to quadrature otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .activation import (
    Additive,
    ControlParams,
    ExponentSpec,
    Identity,
    Power,
    Reciprocal,
    Scheduled,
    SingularityError,
    Sqrt,
)
from .specfun import AccuracyPolicy, en_general, ei_principal, gamma_upper, quad_adaptive

NUMERIC_POLICY = AccuracyPolicy(rel_tol=1e-12, abs_tol=1e-13)


class FMode(str, Enum):
    CLOSED = "closed_form"
    QUADRATURE = "quadrature"


class NotClosedFormError(ValueError):
    """No valid closed form for this (exponent, C) pair; use f_state_numeric."""


@dataclass(frozen=True)
class FunctionalForm:
    params: ControlParams
    spec: ExponentSpec
    f_mode: FMode
    closed_form_valid: bool
    reason: str

    @property
    def numeric_anchor(self) -> float:
        """|S| at which the quadrature-defined F is zero.

        The origin, unless C^f2 blows up there (C > 1 with f2 -> inf).
        """
        if self.params.C > 1 and self.spec.unbounded_at_origin():
            return 1.0
        return 0.0


def _validity(params: ControlParams, spec: ExponentSpec) -> tuple[bool, str]:
    C = params.C
    if isinstance(spec, (Identity, Sqrt)):
        return True, "elementary closed form"
    if isinstance(spec, Reciprocal):
        if C < 1:
            return True, "exponential integral E1 with positive argument"
        return True, "principal-value Ei continuation for C > 1"
    if isinstance(spec, Power):
        if C < 1:
            return True, "upper incomplete gamma with positive argument"
        return False, "negative gamma argument; quadrature fallback"
    if isinstance(spec, Additive):
        return False, "erf-based closed form not implemented; quadrature fallback"
    if isinstance(spec, Scheduled):
        return False, "variable exponent has no closed form; quadrature fallback"
    return False, f"no closed form known for {spec.name}; quadrature fallback"


def build_form(params: ControlParams, spec: ExponentSpec) -> FunctionalForm:
    valid, reason = _validity(params, spec)
    mode = FMode.CLOSED if valid else FMode.QUADRATURE
    return FunctionalForm(params, spec, mode, valid, reason)


def g_cost(params: ControlParams, U: float) -> float:
    """Energy term G(U) = C1 |U| ln|U| - C1 |U|, with G(0) = 0."""
    a = abs(U)
    if a == 0:
        return 0.0
    return params.C1 * (a * math.log(a) - a)


def f_state_closed(form: FunctionalForm, S: float) -> float:
    if not form.closed_form_valid:
        raise NotClosedFormError(f"{form.spec.name} with C={form.params.C}: {form.reason}")
    C, C1, ln_c = form.params.C, form.params.C1, form.params.log_c
    s = abs(S)
    spec = form.spec
    if isinstance(spec, Identity):
        return C1 * C**s
    if isinstance(spec, Sqrt):
        r = math.sqrt(s)
        return 2.0 * C1 * C**r * (r - C1)
    if s == 0:
        raise SingularityError(f"closed-form F for {spec.name} is singular at S = 0")
    if isinstance(spec, Reciprocal):
        head = s * C ** (1.0 / s)
        if C < 1:
            return head + ln_c * en_general(1.0, -ln_c / s)
        return head - ln_c * ei_principal(ln_c / s)
    if isinstance(spec, Power):
        a = spec.alpha
        k = -ln_c
        return s * C ** (s**a) - k ** (-1.0 / a) * gamma_upper((a + 1.0) / a, k * s**a)
    raise NotClosedFormError(f"no closed form for {spec.name}")


def _activation_magnitude(form: FunctionalForm):
    C, spec = form.params.C, form.spec

    def h(sigma: float) -> float:
        return C ** spec.value(sigma)

    return h


def _integrate_magnitude(form: FunctionalForm, a: float, b: float) -> float:
    """int_a^b C^f2(sigma) dsigma for 0 <= a, b."""
    if a == b:
        return 0.0
    lo, hi = min(a, b), max(a, b)
    if lo == 0 and form.numeric_anchor > 0:
        raise SingularityError(f"C^f2 is not integrable at S = 0 for {form.spec.name}, C={form.params.C}")
    value = quad_adaptive(_activation_magnitude(form), lo, hi, NUMERIC_POLICY)
    return value if b > a else -value


def f_state_numeric(form: FunctionalForm, S: float, S_ref: float) -> float:
    """F(S) - F(S_ref) as int_{S_ref}^{S} C^f2(|sigma|) sign(sigma) dsigma."""
    if S == S_ref:
        return 0.0
    # sign(sigma) C^f2(|sigma|) is odd, so each signed leg reduces to a magnitude integral
    if S * S_ref >= 0:
        return _integrate_magnitude(form, abs(S_ref), abs(S))
    return _integrate_magnitude(form, abs(S_ref), 0.0) + _integrate_magnitude(form, 0.0, abs(S))


def f_state(form: FunctionalForm, S: float) -> float:
    """F(S) by the closed form when valid, else by quadrature from the numeric anchor."""
    if form.closed_form_valid:
        return f_state_closed(form, S)
    return _integrate_magnitude(form, form.numeric_anchor, abs(S))


def f_state_many(form: FunctionalForm, S_values) -> np.ndarray:
    """Vectorised F(S); quadrature forms integrate once between sorted samples."""
    S_values = np.asarray(S_values, dtype=float)
    if form.closed_form_valid:
        return np.array([f_state_closed(form, float(x)) for x in S_values])
    mags = np.abs(S_values)
    anchor = form.numeric_anchor
    points = np.unique(np.append(mags, anchor))
    i0 = int(np.searchsorted(points, anchor))
    F = np.zeros_like(points)
    for i in range(i0 + 1, len(points)):
        F[i] = F[i - 1] + _integrate_magnitude(form, points[i - 1], points[i])
    for i in range(i0 - 1, -1, -1):
        F[i] = F[i + 1] - _integrate_magnitude(form, points[i], points[i + 1])
    return F[np.searchsorted(points, mags)]


def equilibrium_baseline(form: FunctionalForm) -> float:
    """F at the equilibrium S = 0, or its limit from S > 0."""
    if form.spec.unbounded_at_origin():
        if form.params.C < 1:
            return 0.0
        raise SingularityError(f"F diverges at S = 0 for {form.spec.name} with C > 1")
    return f_state(form, 0.0)


def integrand(form: FunctionalForm, S: float, U: float, baseline: Optional[float] = None) -> float:
    value = f_state(form, S) + g_cost(form.params, U)
    if baseline is not None:
        value -= baseline
    return value


@dataclass(frozen=True)
class JBreakdown:
    j_total: float
    j_state: float
    j_energy: float
    horizon: float

    def as_dict(self) -> dict:
        return {
            "j_total": self.j_total,
            "j_state": self.j_state,
            "j_energy": self.j_energy,
            "horizon": self.horizon,
        }


@dataclass(frozen=True)
class CumulativeJ:
    F: np.ndarray
    G: np.ndarray
    j_state: np.ndarray
    j_energy: np.ndarray

    @property
    def j_total(self) -> np.ndarray:
        return self.j_state + self.j_energy


def accumulate(form: FunctionalForm, traj, baseline: Optional[float] = None) -> CumulativeJ:
    """Running trapezoidal integrals of F(S(t)) and G(U(t)) along a trajectory."""
    t = np.asarray(traj.times, dtype=float)
    F = f_state_many(form, traj.s_values)
    if baseline is not None:
        F = F - baseline
    G = np.array([g_cost(form.params, float(u)) for u in traj.u_values])
    if len(t) < 2:
        zeros = np.zeros(len(t))
        return CumulativeJ(F, G, zeros, zeros.copy())
    js = cumulative_trapezoid(F, t, initial=0.0)
    je = cumulative_trapezoid(G, t, initial=0.0)
    event = getattr(traj, "event", None)
    if event is not None:
        _split_at_event(form, t, F, G, js, je, event, baseline)
    return CumulativeJ(F, G, js, je)


def _split_at_event(form, t, F, G, js, je, event, baseline) -> None:
    """Re-integrate the interval holding the surface-reach time as two trapezoids.

    The control jumps at the reach instant, so a single trapezoid over that
    interval would carry an O(dt) error.
    """
    t_r, S_lo, U_lo, S_hi, U_hi = event
    k = int(np.searchsorted(t, t_r, side="right")) - 1
    if k < 0 or k + 1 >= len(t) or t_r <= t[k]:
        return
    a, b = t_r - t[k], t[k + 1] - t_r
    F_lo, F_hi = f_state_many(form, [S_lo, S_hi])
    if baseline is not None:
        F_lo, F_hi = F_lo - baseline, F_hi - baseline
    G_lo, G_hi = g_cost(form.params, U_lo), g_cost(form.params, U_hi)
    h = t[k + 1] - t[k]
    dF = a * (F[k] + F_lo) / 2 + b * (F_hi + F[k + 1]) / 2 - h * (F[k] + F[k + 1]) / 2
    dG = a * (G[k] + G_lo) / 2 + b * (G_hi + G[k + 1]) / 2 - h * (G[k] + G[k + 1]) / 2
    js[k + 1 :] += dF
    je[k + 1 :] += dG


def j_along_trajectory(form: FunctionalForm, traj, baseline: Optional[float] = None) -> JBreakdown:
    t = np.asarray(traj.times, dtype=float)
    if len(t) < 2:
        return JBreakdown(0.0, 0.0, 0.0, 0.0)
    cum = accumulate(form, traj, baseline)
    j_state = float(cum.j_state[-1])
    j_energy = float(cum.j_energy[-1])
    return JBreakdown(j_state + j_energy, j_state, j_energy, float(t[-1] - t[0]))


F_TEXT = {
    "identity": "C1*C^|S|",
    "sqrt": "2*C1*C^sqrt|S|*(sqrt|S| - C1)",
    "reciprocal": "|S|*C^(1/|S|) + ln(C)*E1(-ln(C)/|S|)",
    "reciprocal_pv": "|S|*C^(1/|S|) - ln(C)*Ei(ln(C)/|S|)",
    "power": "|S|*C^(|S|^alpha) - (-ln C)^(-1/alpha)*Gamma((alpha+1)/alpha, -ln(C)*|S|^alpha)",
    "quadrature": "int_anchor^|S| C^f2(sigma) dsigma",
}
G_TEXT = "C1*|U|*ln|U| - C1*|U|"


def describe_form(form: FunctionalForm) -> dict:
    """JSON-ready description of the constructed functional."""
    spec = form.spec
    name = spec.name
    if not form.closed_form_valid:
        f_text = F_TEXT["quadrature"]
    elif isinstance(spec, Reciprocal) and form.params.C > 1:
        f_text = F_TEXT["reciprocal_pv"]
    else:
        f_text = F_TEXT[name]
    special = []
    if isinstance(spec, Reciprocal):
        special.append("E1" if form.params.C < 1 else "Ei (principal value)")
    if isinstance(spec, Power):
        special.append("upper incomplete gamma" if form.closed_form_valid else "upper incomplete gamma (negative argument, not used)")
    if isinstance(spec, Additive):
        special.append("erf (not implemented in closed form)")
    report = {
        "case": name,
        "C": form.params.C,
        "C1": form.params.C1,
    }
    if isinstance(spec, Power):
        report["alpha"] = spec.alpha
    if isinstance(spec, Additive):
        report["weights"] = list(spec.weights)
    report.update(
        {
            "f_closed_form": f_text,
            "g_closed_form": G_TEXT,
            "closed_form_valid": form.closed_form_valid,
            "f_mode": form.f_mode.value,
            "validity_reason": form.reason,
            "special_functions_used": special,
            "power_form_rederived": isinstance(spec, Power),
        }
    )
    return report
