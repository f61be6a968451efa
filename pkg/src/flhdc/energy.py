"""Uplink rate, transmission time and per-user compute/transmit energy.

All quantities are SI: watts, hertz, seconds, joules, bits.  Compute loads
are in CPU cycles; the ``C_*`` constants are cycles per HV dimension per
sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "UserProfile",
    "EnergyParams",
    "LoadProfile",
    "load_profile",
    "uplink_rate",
    "tx_time",
    "payload_bits",
    "round1_energy_time",
    "retrain_energy_time",
    "user_breakdown",
    "total_energy",
    "completion_time",
    "dbm_to_watts",
]


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class UserProfile:
    D: int                   # local samples
    g: float                 # channel power gain (linear)
    b: float                 # bandwidth, Hz
    f_max: float = 2.3e9     # Hz
    P_max: float = 0.5       # W
    e: float = 0.4           # inference error ratio

    def __post_init__(self):
        if self.D <= 0 or self.g <= 0 or self.b <= 0 or self.f_max <= 0 or self.P_max <= 0:
            raise ValueError(f"user parameters must be positive: {self}")
        if not 0 <= self.e <= 1:
            raise ValueError("error ratio must lie in [0, 1]")


@dataclass(frozen=True)
class EnergyParams:
    gamma: float = 1e-28
    C_enc: float = 28 * 28 * 2
    C_agg: float = 28 * 28 * 2
    C_sim: float = 10 * 10
    C_up: float = 8.0
    N0: float = dbm_to_watts(-174.0)   # W/Hz
    kappa: float = 10.0                # uplink bits per HV dimension
    B: float = 1e6                     # Hz

    def __post_init__(self):
        for name in ("C_enc", "C_agg", "C_sim", "C_up", "N0", "kappa", "B"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class LoadProfile:
    C_init: float
    C_ret: float
    C_total: float
    A: float


def load_profile(d: int, J_d: int, profile: UserProfile, params: EnergyParams) -> LoadProfile:
    """Per-dimension cycle counts and the total cycle load ``A = D d C``."""
    c_init = params.C_enc + params.C_agg
    c_ret = params.C_sim + profile.e * params.C_up
    c_total = c_init + (J_d - 1) * c_ret
    return LoadProfile(c_init, c_ret, c_total, profile.D * d * c_total)


def payload_bits(d: int, params: EnergyParams) -> float:
    return params.kappa * d


def uplink_rate(p: float, profile: UserProfile, N0: float) -> float:
    """FDMA Shannon rate ``b log2(1 + p g / (N0 b))`` in bit/s."""
    if p < 0:
        raise ValueError("transmit power must be non-negative")
    return profile.b * math.log2(1.0 + p * profile.g / (N0 * profile.b))


def tx_time(Q: float, r: float) -> float:
    if Q == 0:
        return 0.0
    if r <= 0:
        return math.inf
    return Q / r


def round1_energy_time(d: int, f: float, profile: UserProfile, params: EnergyParams):
    """(energy J, latency s) of encoding plus first-round aggregation."""
    if not f > 0:
        raise ValueError("CPU frequency must be positive")
    cycles = profile.D * d * (params.C_enc + params.C_agg)
    return params.gamma * cycles * f ** 2, cycles / f


def retrain_energy_time(d: int, f: float, profile: UserProfile, params: EnergyParams):
    """(energy J, latency s) of one retraining round."""
    if not f > 0:
        raise ValueError("CPU frequency must be positive")
    cycles = profile.D * d * (params.C_sim + profile.e * params.C_up)
    return params.gamma * cycles * f ** 2, cycles / f


def user_breakdown(d: int, J_d: int, f: float, p: float, profile: UserProfile,
                   params: EnergyParams):
    """Return ``(E_comp, E_tx, completion_time)`` for one user over J_d rounds.

    A user with ``p == 0`` transmits nothing: its transmission energy is zero
    and its completion time infinite.
    """
    if not f > 0:
        raise ValueError("CPU frequency must be positive")
    if p < 0:
        raise ValueError("transmit power must be non-negative")
    load = load_profile(d, J_d, profile, params)
    e_comp = params.gamma * load.A * f ** 2
    Q = payload_bits(d, params)
    if p == 0:
        t = 0.0 if Q == 0 else math.inf
        return e_comp, 0.0, load.A / f + J_d * t
    t = tx_time(Q, uplink_rate(p, profile, params.N0))
    return e_comp, J_d * t * p, load.A / f + J_d * t


def total_energy(d: int, J_d: int, f, p, profiles, params: EnergyParams) -> float:
    """Total energy of all users: compute over all rounds plus J_d uploads each."""
    f = np.broadcast_to(np.asarray(f, dtype=np.float64), (len(profiles),))
    p = np.broadcast_to(np.asarray(p, dtype=np.float64), (len(profiles),))
    total = 0.0
    for prof, fi, pi in zip(profiles, f, p):
        e_comp, e_tx, _ = user_breakdown(d, J_d, float(fi), float(pi), prof, params)
        total += e_comp + e_tx
    return total


def completion_time(d: int, J_d: int, f: float, p: float, profile: UserProfile,
                    params: EnergyParams) -> float:
    """Local compute time over all rounds plus J_d upload times."""
    r = uplink_rate(p, profile, params.N0)
    if r <= 0:
        raise ValueError("zero uplink rate: completion time is unbounded")
    return user_breakdown(d, J_d, f, p, profile, params)[2]
