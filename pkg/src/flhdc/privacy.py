"""Gaussian noising of associative memories and zCDP accounting.

Accounting uses plain additive zCDP composition: a Gaussian release with
L2 sensitivity ``delta_j`` and noise ``sigma`` costs ``delta_j**2 / (2 sigma**2)``
and the total is converted to (epsilon, delta)-DP with
``rho + 2 sqrt(rho ln(1/delta))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .hdc import AssociativeMemory

__all__ = [
    "PrivacyParams",
    "add_noise",
    "derive_seed",
    "rho_per_round",
    "rho_to_epsilon",
    "calibrate_sigma",
    "sensitivities",
]


@dataclass(frozen=True)
class PrivacyParams:
    """Noise level, clip bound and target budget for one training run.

    ``sigma`` and ``clip_c`` may be left as ``None`` and resolved per
    dimension with :meth:`resolve` (``clip_c = clip_scale * sqrt(d)``,
    ``sigma`` calibrated to ``epsilon_target`` over ``rounds``).
    """

    sigma: float | None = None
    clip_c: float | None = None
    epsilon_target: float = 25.0
    delta: float = 1e-5
    rounds: int | None = None
    clip_scale: float = 1.0

    def __post_init__(self):
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.clip_c is not None and not self.clip_c > 0:
            raise ValueError("clip_c must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.epsilon_target > 0:
            raise ValueError("epsilon_target must be positive")
        if self.rounds is not None and self.rounds < 1:
            raise ValueError("rounds must be at least 1")

    @classmethod
    def disabled(cls) -> "PrivacyParams":
        """No clipping and no noise."""
        return cls(sigma=0.0, clip_c=math.inf, epsilon_target=math.inf)

    @property
    def is_disabled(self) -> bool:
        return self.sigma == 0 and self.clip_c == math.inf

    def resolve(self, d: int, eta: float = 1.0, rounds: int | None = None) -> "PrivacyParams":
        """Fill in ``clip_c`` and ``sigma`` for dimension ``d``.

        ``rounds`` is the number of noisy releases to budget for when
        ``self.rounds`` is unset.
        """
        rounds = self.rounds or rounds or 1
        clip_c = self.clip_c if self.clip_c is not None else self.clip_scale * math.sqrt(d)
        sigma = self.sigma
        if sigma is None:
            d1, dr = sensitivities(clip_c, eta)
            sigma = calibrate_sigma(replace(self, clip_c=clip_c, rounds=rounds), d1, dr)
        return replace(self, sigma=sigma, clip_c=clip_c, rounds=rounds)


def sensitivities(clip_c: float, eta: float = 1.0) -> tuple[float, float]:
    """L2 sensitivities of the first-round AM and of one retraining round.

    One clipped sample moves one class HV by at most ``clip_c`` when the AM is
    built; during retraining it can move two class HVs by ``eta * clip_c`` each,
    bounded here by ``2 * eta * clip_c``.
    """
    return clip_c, 2.0 * eta * clip_c


def derive_seed(master: int, *keys: int) -> np.random.SeedSequence:
    """Independent random stream for ``(master, *keys)``, e.g. (seed, round, user)."""
    return np.random.SeedSequence([int(master), *map(int, keys)])


def add_noise(am: AssociativeMemory, sigma: float, rng_seed) -> AssociativeMemory:
    """Add i.i.d. N(0, sigma^2) noise to every entry of every class HV.

    ``rng_seed`` is an int or a :class:`numpy.random.SeedSequence`.  With
    ``sigma == 0`` the input values are returned unchanged.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return am.copy()
    rng = np.random.default_rng(rng_seed)
    return AssociativeMemory(am.class_hvs + rng.normal(0.0, sigma, size=am.class_hvs.shape))


def rho_per_round(sensitivity: float, sigma: float) -> float:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return sensitivity ** 2 / (2.0 * sigma ** 2)


def rho_to_epsilon(rho_total: float, delta: float) -> float:
    if not rho_total > 0:
        raise ValueError("rho must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return rho_total + 2.0 * math.sqrt(rho_total * math.log(1.0 / delta))


def calibrate_sigma(params: PrivacyParams, sensitivity_round1: float,
                    sensitivity_retrain: float) -> float:
    """Smallest sigma meeting ``epsilon_target`` after ``params.rounds`` releases.

    The conversion ``eps = rho + 2 sqrt(rho L)`` with ``L = ln(1/delta)`` is
    inverted in closed form, ``rho* = (sqrt(L + eps) - sqrt(L))**2``, and
    ``sigma = sqrt(sum_j Delta_j**2 / (2 rho*))``.
    """
    if not sensitivity_round1 > 0 or sensitivity_retrain < 0:
        raise ValueError("sensitivities must be positive")
    if math.isinf(params.epsilon_target):
        return 0.0
    log_term = math.log(1.0 / params.delta)
    # sqrt(L + eps) - sqrt(L), written without cancellation
    root = params.epsilon_target / (math.sqrt(log_term + params.epsilon_target) + math.sqrt(log_term))
    rho_star = root ** 2
    rounds = params.rounds or 1
    total_sq = sensitivity_round1 ** 2 + (rounds - 1) * sensitivity_retrain ** 2
    return math.sqrt(total_sq / (2.0 * rho_star))
