"""Closed-loop simulation of sliding-variable plants under the activation laws.

Integration is fixed-step RK4. Laws such as the relay or the exponential
activation reach S = 0 in finite time; a sign change of S inside a step is
located by bisection on the sub-step length, after which the motion is held
on the surface.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .activation import (
    ControlParams,
    ExponentSpec,
    Identity,
    PowerLawParams,
    Scheduled,
    control_u,
    power_control,
    sign,
)
from .functional import FunctionalForm, build_form, j_along_trajectory

Law = Callable[[float], float]


class SimulationDivergence(ArithmeticError):
    """Non-finite state; ``partial`` holds the samples computed before ``time``."""

    def __init__(self, message: str, time: float, partial: Optional["Trajectory"] = None):
        super().__init__(message)
        self.time = time
        self.partial = partial


@dataclass(frozen=True)
class ScalarIntegrator:
    """dS/dt = U + d(t)."""

    disturbance: Optional[Callable[[float], float]] = None
    name = "integrator"

    def initial_state(self, value) -> tuple:
        return (float(value),)

    def surface(self, x) -> float:
        return x[0]

    def rhs(self, t, x, u):
        d = self.disturbance(t) if self.disturbance is not None else 0.0
        return (u + d,)


@dataclass(frozen=True)
class DoubleIntegrator:
    """dx1/dt = x2, dx2/dt = U, with surface S = c x1 + x2."""

    c: float = 1.0
    name = "double"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"surface slope c must be positive, got {self.c}")

    def initial_state(self, value) -> tuple:
        if np.ndim(value) == 0:
            # start at rest with the requested surface value
            return (float(value) / self.c, 0.0)
        x1, x2 = value
        return (float(x1), float(x2))

    def surface(self, x) -> float:
        return self.c * x[0] + x[1]

    def rhs(self, t, x, u):
        return (x[1], u)


PlantModel = Union[ScalarIntegrator, DoubleIntegrator]


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 1.0
    initial_state: Union[float, tuple] = 1.0
    dt: float = 1e-4
    dead_zone: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not self.dead_zone >= 0:
            raise ValueError(f"dead_zone must be non-negative, got {self.dead_zone}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    s_values: np.ndarray
    u_values: np.ndarray
    reached_origin_at: Optional[float] = None
    states: Optional[np.ndarray] = field(default=None, repr=False)
    # (t_reach, S_before, U_before, S_after, U_after) for a reach between samples
    event: Optional[tuple] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.s_values = np.asarray(self.s_values, dtype=float)
        self.u_values = np.asarray(self.u_values, dtype=float)
        if not len(self.times) == len(self.s_values) == len(self.u_values):
            raise ValueError("trajectory columns must have equal lengths")

    def __len__(self):
        return len(self.times)


def _rk4(plant, law: Law, t: float, x: tuple, h: float) -> tuple[tuple, tuple]:
    """One RK4 step; returns the new state and the three intermediate stage states."""

    def f(tt, xx):
        return plant.rhs(tt, xx, law(plant.surface(xx)))

    k1 = f(t, x)
    x2 = tuple(xi + h / 2 * ki for xi, ki in zip(x, k1))
    k2 = f(t + h / 2, x2)
    x3 = tuple(xi + h / 2 * ki for xi, ki in zip(x, k2))
    k3 = f(t + h / 2, x3)
    x4 = tuple(xi + h * ki for xi, ki in zip(x, k3))
    k4 = f(t + h, x4)
    x_new = tuple(
        xi + h / 6 * (a + 2 * b + 2 * c + d) for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
    )
    return x_new, (x2, x3, x4)


def _clean(plant, x_new, stages, s_sign, eps) -> bool:
    # a step is clean when neither the stages nor the end point leave the side of S we started on
    if any(sign(plant.surface(xs)) != s_sign for xs in stages):
        return False
    S_new = plant.surface(x_new)
    return sign(S_new) == s_sign and abs(S_new) > eps


def _longest_clean_step(plant, law, t, x, h_max, s_sign, eps) -> tuple[float, tuple]:
    lo, hi = 0.0, h_max
    x_lo = x
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        x_mid, stages = _rk4(plant, law, t, x, mid)
        if _clean(plant, x_mid, stages, s_sign, eps):
            lo, x_lo = mid, x_mid
        else:
            hi = mid
    return lo, x_lo


def _approach(plant, law, t, x, dt, eps, max_iter=400):
    """Resolve a step in which S reaches the surface or the dead zone.

    Repeatedly advances by the longest clean sub-step. Returns
    ``(reach_time, state)`` if the surface is reached inside the step, else
    ``(None, state_at_t_plus_dt)``.
    """
    t_cur, x_cur, remaining = t, x, dt
    for _ in range(max_iter):
        S_cur = plant.surface(x_cur)
        if abs(S_cur) <= eps:
            return t_cur, x_cur
        s_sign = sign(S_cur)
        x_try, stages = _rk4(plant, law, t_cur, x_cur, remaining)
        if _clean(plant, x_try, stages, s_sign, eps):
            return None, x_try
        h, x_next = _longest_clean_step(plant, law, t_cur, x_cur, remaining, s_sign, eps)
        if h == 0.0:
            return t_cur, x_cur
        t_cur, x_cur, remaining = t_cur + h, x_next, remaining - h
    return t_cur, x_cur


def _slide(plant, x_reach: tuple, tau: float) -> tuple:
    """State on the surface a time ``tau`` after reaching it (ideal sliding)."""
    if isinstance(plant, DoubleIntegrator):
        x1 = x_reach[0] * math.exp(-plant.c * tau)
        return (x1, -plant.c * x1)
    return (0.0,) * len(x_reach)


def _held_control(plant, x) -> float:
    # equivalent control keeping S = 0; zero for the scalar integrator
    if isinstance(plant, DoubleIntegrator):
        return -plant.c * x[1]
    return 0.0


def simulate_closed_loop(plant: PlantModel, law: Law, cfg: SimConfig) -> Trajectory:
    """Integrate the closed loop on the uniform grid t_k = k dt, k = 0..N.

    A step whose RK4 stages would carry S across zero is split into
    sub-steps that approach the surface from one side; once |S| is within
    the dead zone the motion is held on the surface (S = 0) for the rest of
    the horizon.
    """
    n = cfg.n_steps
    dt, eps = cfg.dt, cfg.dead_zone
    times = np.arange(n + 1) * dt
    x = plant.initial_state(cfg.initial_state)
    states = np.zeros((n + 1, len(x)))
    s_vals = np.zeros(n + 1)
    u_vals = np.zeros(n + 1)

    S = plant.surface(x)
    reached = None
    x_reach = None
    if abs(S) <= eps:
        reached, x_reach = 0.0, x
    else:
        states[0], s_vals[0], u_vals[0] = x, S, law(S)

    k = 0
    while reached is None and k < n:
        t = k * dt
        x_new, stages = _rk4(plant, law, t, x, dt)
        if all(math.isfinite(v) for v in x_new) and not _clean(plant, x_new, stages, sign(S), eps):
            reached, x_new = _approach(plant, law, t, x, dt, eps)
        if not all(math.isfinite(v) for v in x_new):
            m = k + 1
            partial = Trajectory(times[:m], s_vals[:m], u_vals[:m], None, states[:m])
            raise SimulationDivergence(f"non-finite state at t={t + dt:.6g}", t + dt, partial)
        if reached is not None:
            x_reach = x_new
            break
        k += 1
        x, S = x_new, plant.surface(x_new)
        states[k], s_vals[k], u_vals[k] = x, S, law(S)

    event = None
    if reached is not None:
        first = k + 1 if reached > 0 else 0
        for j in range(first, n + 1):
            xs = _slide(plant, x_reach, times[j] - reached)
            states[j] = xs
            u_vals[j] = _held_control(plant, xs)
        if reached > 0:
            S_r = plant.surface(x_reach)
            event = (reached, S_r, law(S_r), 0.0, _held_control(plant, x_reach))
    return Trajectory(times, s_vals, u_vals, reached, states, event)


def exponential_law(params: ControlParams, spec: ExponentSpec, u_max: float = 1e6) -> Law:
    def law(S: float) -> float:
        return control_u(params, spec, S, u_max)

    return law


def power_law(alpha: float) -> Law:
    p = PowerLawParams(alpha)

    def law(S: float) -> float:
        return power_control(p, S)

    return law


def analytic_reach_time(law_kind: str, params, S0: float, dead_zone: float = 0.0) -> Optional[float]:
    """Time for dS/dt = U(S) to bring S0 > 0 down to |S| = ``dead_zone``.

    ``law_kind`` is one of ``relay``, ``power`` (``params`` a PowerLawParams
    or a bare alpha), ``identity`` or ``sqrt`` (``params`` a ControlParams).
    Returns ``math.inf`` for asymptotic convergence and ``None`` when no
    reference formula is available.
    """
    if not S0 > 0:
        raise ValueError(f"S0 must be positive, got {S0}")
    eps = dead_zone
    if eps >= S0:
        return 0.0
    if law_kind == "relay":
        return S0 - eps
    if law_kind == "power":
        alpha = params.alpha if isinstance(params, PowerLawParams) else float(params)
        if alpha == 1:
            return math.log(S0 / eps) if eps > 0 else math.inf
        if alpha > 1:
            return math.inf
        return (S0 ** (1 - alpha) - eps ** (1 - alpha)) / (1 - alpha)
    if law_kind in ("identity", "identity-exp"):
        # int_eps^S0 C^-s ds
        return (params.C ** (-eps) - params.C ** (-S0)) / params.log_c
    if law_kind == "sqrt":
        # int C^-sqrt(s) ds = -2 e^(-k r) (r/k + 1/k^2) with r = sqrt(s)
        k = params.log_c

        def antiderivative(s):
            r = math.sqrt(s)
            return -2 * math.exp(-k * r) * (r / k + 1 / k**2)

        return antiderivative(S0) - antiderivative(eps)
    return None


@dataclass(frozen=True)
class VariationRecord:
    mode: int
    eps: float
    delta_j: float
    delta_j_double: float
    ratio: float
    rejected: bool = False
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "eps": self.eps,
            "delta_j": self.delta_j,
            "delta_j_double": self.delta_j_double,
            "ratio": self.ratio,
            "rejected": self.rejected,
            "note": self.note,
        }


@dataclass(frozen=True)
class VariationalReport:
    case: str
    C: float
    j_star: float
    records: tuple
    asserted: bool
    passed: Optional[bool]
    ratio_band: tuple = (3.5, 4.5)


def _variation_shape(times: np.ndarray, T: float, mode: int, phase: Optional[float]):
    w = mode * math.pi / T
    if phase is None:
        return np.sin(w * times), w * np.cos(w * times)
    w2 = (mode + 1) * math.pi / T
    a, b = math.cos(phase), math.sin(phase)
    eta = a * np.sin(w * times) + b * np.sin(w2 * times)
    deta = a * w * np.cos(w * times) + b * w2 * np.cos(w2 * times)
    return eta, deta


def variational_test(
    form: FunctionalForm,
    S0: float,
    T: float,
    bump_modes: Sequence[int],
    eps_list: Sequence[float],
    cfg: Optional[SimConfig] = None,
    exploratory: bool = False,
) -> VariationalReport:
    """Probe minimality of the functional along the closed-loop path.

    The optimal path S*(t) is perturbed by endpoint-pinned bumps
    eps*eta(t) with U = dS/dt kept consistent, and dJ = J(S_eps) - J(S*)
    is reported for each (mode, eps). For each eps the 2*eps variation is
    also evaluated so that second-order scaling dJ(2eps)/dJ(eps) ~ 4 can be
    checked.

    Only the identity exponent with C > 1 carries an asserted contract
    (dJ > 0 and ratio within ``ratio_band``); the other cases are reported.
    """
    cfg = cfg or SimConfig()
    cfg = SimConfig(horizon=T, initial_state=S0, dt=cfg.dt, dead_zone=cfg.dead_zone, seed=cfg.seed)
    law = exponential_law(form.params, form.spec)
    star = simulate_closed_loop(ScalarIntegrator(), law, cfg)
    if star.reached_origin_at is not None:
        raise ValueError(
            f"horizon T={T} must end before the reach time {star.reached_origin_at:.6g}"
        )
    j_star = j_along_trajectory(form, star).j_total
    rng = random.Random(cfg.seed)
    # F is singular at S = 0 only for exponents unbounded at the origin
    reject_crossing = form.spec.unbounded_at_origin()

    def delta(eta, deta, e):
        S = star.s_values + e * eta
        if reject_crossing and np.any(np.sign(S) != np.sign(star.s_values)):
            return None
        varied = Trajectory(star.times, S, star.u_values + e * deta)
        return j_along_trajectory(form, varied).j_total - j_star

    records = []
    for mode in bump_modes:
        phase = rng.uniform(0, 2 * math.pi) if exploratory else None
        eta, deta = _variation_shape(star.times, T, mode, phase)
        for e in eps_list:
            if e == 0:
                records.append(VariationRecord(mode, e, 0.0, 0.0, math.nan))
                continue
            single = delta(eta, deta, e)
            double = delta(eta, deta, 2 * e)
            if single is None or double is None:
                records.append(
                    VariationRecord(mode, e, math.nan, math.nan, math.nan, True, "variation crosses S = 0")
                )
                continue
            ratio = double / single if single != 0 else math.nan
            records.append(VariationRecord(mode, e, single, double, ratio))

    asserted = isinstance(form.spec, Identity) and form.params.C > 1 and not exploratory
    passed = None
    if asserted:
        lo, hi = VariationalReport.ratio_band
        passed = all(
            not r.rejected and (r.eps == 0 or (r.delta_j > 0 and lo <= r.ratio <= hi))
            for r in records
        )
    return VariationalReport(form.spec.name, form.params.C, j_star, tuple(records), asserted, passed)


@dataclass(frozen=True)
class SweepRow:
    param: float
    reach_time: Optional[float]
    j_total: float
    j_energy: float


def _sweep_row(param, law, form, S0, cfg) -> SweepRow:
    run_cfg = SimConfig(cfg.horizon, S0, cfg.dt, cfg.dead_zone, cfg.seed)
    traj = simulate_closed_loop(ScalarIntegrator(), law, run_cfg)
    j = j_along_trajectory(form, traj)
    return SweepRow(param, traj.reached_origin_at, j.j_total, j.j_energy)


def default_sweep_form() -> FunctionalForm:
    return build_form(ControlParams(2.0), Identity())


def alpha_sweep(
    alphas: Sequence[float],
    S0: float,
    cfg: SimConfig,
    form: Optional[FunctionalForm] = None,
    schedule: Optional[Scheduled] = None,
    sort: bool = True,
) -> list[SweepRow]:
    """Reach time and functional cost of the power law U = -|S|^alpha sign(S).

    ``form`` scores each run (identity exponent with C = 2 by default).
    With ``schedule`` an extra row (param = nan) is appended for the
    variable-exponent law.
    """
    form = form or default_sweep_form()
    values = sorted(alphas) if sort else list(alphas)
    rows = [_sweep_row(a, power_law(a), form, S0, cfg) for a in values]
    if schedule is not None:
        rows.append(_sweep_row(math.nan, schedule.power_law, form, S0, cfg))
    return rows


def c_sweep(
    C_values: Sequence[float], spec: ExponentSpec, S0: float, cfg: SimConfig
) -> list[SweepRow]:
    """Exponential-activation runs for each base C, in input order."""
    rows = []
    for C in C_values:
        params = ControlParams(C)
        form = build_form(params, spec)
        rows.append(_sweep_row(C, exponential_law(params, spec), form, S0, cfg))
    return rows
