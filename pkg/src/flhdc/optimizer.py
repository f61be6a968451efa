"""Joint choice of HV dimension, CPU frequency and transmit power.

For a fixed dimension the deadline is met with equality, which ties each
user's power to its frequency; the remaining one-variable energy is convex
in the frequency and is minimised by a bounded Brent search.  The outer loop
enumerates the candidate dimensions and keeps the cheapest feasible one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from scipy.optimize import minimize_scalar

from .energy import EnergyParams, UserProfile, load_profile, payload_bits, total_energy, user_breakdown

__all__ = [
    "Scenario",
    "UserSolution",
    "AllocationResult",
    "InfeasibleError",
    "power_from_frequency",
    "min_frequency",
    "user_energy",
    "optimize_user",
    "optimize_dimension",
    "baseline_fixed_frequency",
    "baseline_fixed_power",
    "sweep_time",
    "MAX_EVALS",
]

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
# 2**x is evaluated as exp(x ln 2); beyond this exponent the point is infeasible
EXPONENT_CAP = 700.0 / LN2
FEASIBILITY_MARGIN = 1e-12
XTOL_REL = 1e-10
MAX_EVALS = 200


class InfeasibleError(ValueError):
    """No admissible frequency/power exists for the requested operating point."""


@dataclass
class Scenario:
    profiles: list[UserProfile]
    params: EnergyParams
    T: float
    dims: list[int]
    convergence: dict[int, int | None]

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("deadline T must be positive")
        if not self.dims:
            raise ValueError("need at least one candidate dimension")
        missing = [d for d in self.dims if d not in self.convergence]
        if missing:
            raise ValueError(f"no round count for dimensions {missing}")

    def with_T(self, T: float) -> "Scenario":
        return Scenario(self.profiles, self.params, T, list(self.dims), dict(self.convergence))

    def with_dims(self, dims) -> "Scenario":
        return Scenario(self.profiles, self.params, self.T, list(dims), dict(self.convergence))


@dataclass
class UserSolution:
    f: float
    p: float
    energy: float
    E_comp: float
    E_tx: float
    completion_time: float
    evaluations: int = 0


@dataclass
class AllocationResult:
    scheme: str
    feasible: bool
    d_star: int | None = None
    J_d: int | None = None
    f_star: list[float] = field(default_factory=list)
    p_star: list[float] = field(default_factory=list)
    E_total: float = math.inf
    per_user: list[UserSolution] = field(default_factory=list)
    energy_by_dim: dict[int, float] = field(default_factory=dict)
    infeasible_reasons: dict[int, str] = field(default_factory=dict)
    evaluations: int = 0
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "feasible": self.feasible,
            "d_star": self.d_star,
            "J_d": self.J_d,
            "E_total": self.E_total if self.feasible else None,
            "f_star": self.f_star,
            "p_star": self.p_star,
            "per_user": [
                {"E_comp": u.E_comp, "E_tx": u.E_tx, "completion_time": u.completion_time}
                for u in self.per_user
            ],
            "energy_by_dim": {str(d): e for d, e in self.energy_by_dim.items()},
            "infeasible_reasons": {str(d): r for d, r in self.infeasible_reasons.items()},
            "evaluations": self.evaluations,
            "notes": self.notes,
        }


def _exp2m1(x: float) -> float:
    if x > EXPONENT_CAP:
        raise InfeasibleError("transmit-power exponent overflows")
    return math.expm1(x * LN2)


def _tx_window(f: float, A: float, T: float) -> float:
    window = T - A / f
    if not window >= FEASIBILITY_MARGIN * T:
        raise InfeasibleError(f"compute time {A / f:.6g}s leaves no time to transmit within T={T}")
    return window


def power_from_frequency(f: float, d: int, J_d: int, profile: UserProfile,
                         params: EnergyParams, T: float) -> float:
    """Transmit power that makes the user finish exactly at the deadline."""
    A = load_profile(d, J_d, profile, params).A
    window = _tx_window(f, A, T)
    x = J_d * payload_bits(d, params) / (profile.b * window)
    return params.N0 * profile.b / profile.g * _exp2m1(x)


def frequency_from_power(p: float, d: int, J_d: int, profile: UserProfile,
                         params: EnergyParams, T: float) -> float:
    """Smallest CPU frequency that meets the deadline when transmitting at ``p``."""
    if not p > 0:
        raise InfeasibleError("zero transmit power never delivers the payload")
    A = load_profile(d, J_d, profile, params).A
    rate = profile.b * math.log2(1.0 + profile.g * p / (params.N0 * profile.b))
    window = T - J_d * payload_bits(d, params) / rate
    if not window > 0:
        raise InfeasibleError(f"uploads alone need more than T={T}s at p={p:g} W")
    return A / window


def min_frequency(d: int, J_d: int, profile: UserProfile, params: EnergyParams,
                  T: float) -> float:
    """Lowest frequency for which the deadline is reachable with ``p <= P_max``."""
    return frequency_from_power(profile.P_max, d, J_d, profile, params, T)


def user_energy(f: float, d: int, J_d: int, profile: UserProfile, params: EnergyParams,
                T: float) -> float:
    """Energy of one user as a function of its frequency alone (deadline tight)."""
    A = load_profile(d, J_d, profile, params).A
    window = _tx_window(f, A, T)
    x = J_d * payload_bits(d, params) / (profile.b * window)
    return params.gamma * A * f ** 2 + window * params.N0 * profile.b / profile.g * _exp2m1(x)


def _solution(f: float, p: float, d: int, J_d: int, profile: UserProfile,
              params: EnergyParams, evaluations: int = 0) -> UserSolution:
    e_comp, e_tx, t = user_breakdown(d, J_d, f, p, profile, params)
    return UserSolution(f, p, e_comp + e_tx, e_comp, e_tx, t, evaluations)


def optimize_user(d: int, J_d: int, profile: UserProfile, params: EnergyParams,
                  T: float) -> UserSolution:
    """Minimise :func:`user_energy` over ``[f_L, f_max]``.

    The search runs on ``f / f_max`` with a bounded Brent method; the two
    interval ends are evaluated as well so that boundary optima are returned
    exactly.  Raises :class:`InfeasibleError` when the interval is empty.
    """
    f_lo = min_frequency(d, J_d, profile, params, T)
    f_hi = profile.f_max
    if f_lo > f_hi:
        raise InfeasibleError(f"f_L={f_lo:.6g} Hz exceeds f_max={f_hi:.6g} Hz")

    scale = f_hi
    evals = 0

    def objective(u: float) -> float:
        nonlocal evals
        evals += 1
        try:
            return user_energy(u * scale, d, J_d, profile, params, T)
        except InfeasibleError:
            return math.inf

    candidates = [(objective(f_lo / scale), f_lo / scale), (objective(1.0), 1.0)]
    if f_hi > f_lo * (1.0 + XTOL_REL):
        res = minimize_scalar(objective, bounds=(f_lo / scale, 1.0), method="bounded",
                              options={"xatol": XTOL_REL, "maxiter": MAX_EVALS - 3})
        candidates.append((float(res.fun), float(res.x)))
    # lowest energy wins; ties go to the lower frequency
    _, u_best = min(candidates)
    if u_best == f_lo / scale:
        # at the lower end the deadline is met exactly with P_max
        f_star, p_star = f_lo, profile.P_max
    else:
        f_star = f_hi if u_best == 1.0 else u_best * scale
        p_star = min(power_from_frequency(f_star, d, J_d, profile, params, T), profile.P_max)
    return _solution(f_star, p_star, d, J_d, profile, params, evals)


def _result_for_dims(scheme: str, scenario: Scenario, solve_user) -> AllocationResult:
    """Enumerate dimensions with a per-user solver and keep the cheapest."""
    result = AllocationResult(scheme=scheme, feasible=False)
    best = None
    for d in sorted(set(scenario.dims)):
        J_d = scenario.convergence[d]
        if J_d is None:
            result.infeasible_reasons[d] = "target accuracy not reached"
            continue
        users = []
        try:
            for i, prof in enumerate(scenario.profiles):
                users.append(solve_user(d, J_d, prof))
        except InfeasibleError as exc:
            reason = f"user {i}: {exc}"
            result.infeasible_reasons[d] = reason
            log.info("%s: d=%d infeasible (%s)", scheme, d, reason)
            continue
        energy = sum(u.energy for u in users)
        result.energy_by_dim[d] = energy
        result.evaluations += sum(u.evaluations for u in users)
        if best is None or energy < best[0]:
            best = (energy, d, J_d, users)
    if best is not None:
        energy, d, J_d, users = best
        result.feasible = True
        result.d_star = d
        result.J_d = J_d
        result.f_star = [u.f for u in users]
        result.p_star = [u.p for u in users]
        result.per_user = users
        result.E_total = total_energy(d, J_d, result.f_star, result.p_star,
                                      scenario.profiles, scenario.params)
    return result


def optimize_dimension(scenario: Scenario) -> AllocationResult:
    """Best dimension with per-user optimal frequency and power."""
    return _result_for_dims(
        "optimized", scenario,
        lambda d, J_d, prof: optimize_user(d, J_d, prof, scenario.params, scenario.T))


def baseline_fixed_frequency(scenario: Scenario, f_fixed: float | None = None) -> AllocationResult:
    """Every user runs at ``f_fixed`` (default: its own ``f_max``); power from the deadline."""

    def solve(d, J_d, prof):
        f = prof.f_max if f_fixed is None else f_fixed
        if f > prof.f_max * (1.0 + 1e-12):
            raise InfeasibleError(f"fixed frequency {f:g} Hz exceeds f_max")
        p = power_from_frequency(f, d, J_d, prof, scenario.params, scenario.T)
        if p > prof.P_max * (1.0 + 1e-12):
            raise InfeasibleError(f"needs {p:.6g} W > P_max at fixed frequency")
        return _solution(f, min(p, prof.P_max), d, J_d, prof, scenario.params)

    label = "f_max" if f_fixed is None else f"{f_fixed:g} Hz"
    res = _result_for_dims("fixed-frequency", scenario, solve)
    res.notes = f"CPU frequency pinned at {label}; power set by the deadline"
    return res


def baseline_fixed_power(scenario: Scenario, p_fixed: float | None = None) -> AllocationResult:
    """Every user transmits at ``p_fixed`` (default ``P_max / 2``) with the
    smallest frequency that still meets the deadline."""

    def solve(d, J_d, prof):
        p = prof.P_max / 2.0 if p_fixed is None else p_fixed
        if p > prof.P_max * (1.0 + 1e-12):
            raise InfeasibleError(f"fixed power {p:g} W exceeds P_max")
        f = frequency_from_power(p, d, J_d, prof, scenario.params, scenario.T)
        if f > prof.f_max:
            raise InfeasibleError(f"needs {f:.6g} Hz > f_max at fixed power")
        return _solution(f, p, d, J_d, prof, scenario.params)

    label = "P_max/2" if p_fixed is None else f"{p_fixed:g} W"
    res = _result_for_dims("fixed-power", scenario, solve)
    res.notes = f"transmit power pinned at {label}; minimum frequency meeting the deadline"
    return res


def sweep_time(scenario: Scenario, T_list, fixed_dims=(3000, 5000)) -> list[dict]:
    """Total energy of every scheme for each deadline in ``T_list``.

    Each row holds ``T``, ``d_star`` and one energy column per scheme; an
    infeasible scheme reports ``nan``.
    """
    T_list = list(T_list)
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must be strictly increasing")
    rows = []
    for T in T_list:
        sc = scenario.with_T(T)
        opt = optimize_dimension(sc)
        row = {"T": T, "d_star": opt.d_star, "optimized": _energy(opt),
               "fixed_frequency": _energy(baseline_fixed_frequency(sc)),
               "fixed_power": _energy(baseline_fixed_power(sc))}
        for d in fixed_dims:
            row[f"fixed_d_{d}"] = _energy(optimize_dimension(sc.with_dims([d])))
        rows.append(row)
    return rows


def _energy(res: AllocationResult) -> float:
    return res.E_total if res.feasible else math.nan
