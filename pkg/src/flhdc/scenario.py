"""User placement, channel gains, scenario files and training datasets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import mnist
from .energy import EnergyParams, UserProfile, dbm_to_watts
from .optimizer import Scenario

SCENARIO_SCHEMA = "flhdc.scenario/1"

# rounds to 88% accuracy at epsilon = 25, per dimension
DEFAULT_ROUNDS = {3000: 39, 4000: 20, 5000: 18, 6000: 17, 7000: 16, 8000: 16, 9000: 14, 10000: 14}
DEFAULT_DIMS = list(range(3000, 10001, 1000))


@dataclass(frozen=True)
class Placement:
    positions: np.ndarray   # (U, 2), metres, BS at the origin
    radius: float
    seed: int

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])


def place_users(U: int, R: float, seed: int) -> Placement:
    """Uniform placement over a disk of radius ``R`` centred on the BS."""
    if U < 1 or not R > 0:
        raise ValueError("need U >= 1 and R > 0")
    rng = np.random.default_rng(seed)
    u, v = rng.random(U), rng.random(U)
    r = R * np.sqrt(u)
    theta = 2.0 * np.pi * v
    return Placement(np.column_stack([r * np.cos(theta), r * np.sin(theta)]), float(R), seed)


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance path loss ``a + b log10(dist / 1 km)`` in dB."""

    intercept_db: float = 128.1
    slope_db: float = 37.6
    min_distance: float = 1.0
    rayleigh: bool = False


def channel_gain(distance, model: PathLossModel = PathLossModel(), rng=None):
    """Linear power gain; with ``model.rayleigh`` an Exp(1) fading factor multiplies it."""
    dist = np.maximum(np.asarray(distance, dtype=np.float64), model.min_distance)
    pl_db = model.intercept_db + model.slope_db * np.log10(dist / 1000.0)
    g = 10.0 ** (-pl_db / 10.0)
    if model.rayleigh:
        if rng is None:
            raise ValueError("Rayleigh fading needs a random generator")
        g = g * rng.exponential(1.0, size=np.shape(g))
    return float(g) if np.ndim(g) == 0 else g


@dataclass
class ScenarioConfig:
    users: int = 50
    radius: float = 500.0
    seed: int = 0
    T: float = 30.0
    dims: list[int] = field(default_factory=lambda: list(DEFAULT_DIMS))
    samples_per_user: int = 1200
    f_max: float = 2.3e9
    P_max: float = 0.5
    error_ratio: float = 0.4
    bandwidth: float = 1e6
    n0_dbm_hz: float = -174.0
    gamma: float = 1e-28
    kappa: float = 10.0
    rayleigh: bool = False


def generate_scenario(cfg: ScenarioConfig = ScenarioConfig(),
                      convergence: dict[int, int | None] | None = None):
    """Build a :class:`Scenario` and its :class:`Placement` from a config.

    Bandwidth is split equally across users.  Returns ``(scenario, placement)``.
    """
    placement = place_users(cfg.users, cfg.radius, cfg.seed)
    fading_rng = np.random.default_rng([cfg.seed, 1]) if cfg.rayleigh else None
    gains = np.atleast_1d(channel_gain(placement.distances,
                                       PathLossModel(rayleigh=cfg.rayleigh), fading_rng))
    params = EnergyParams(gamma=cfg.gamma, N0=dbm_to_watts(cfg.n0_dbm_hz),
                          kappa=cfg.kappa, B=cfg.bandwidth)
    b = cfg.bandwidth / cfg.users
    profiles = [UserProfile(D=cfg.samples_per_user, g=float(g), b=b, f_max=cfg.f_max,
                            P_max=cfg.P_max, e=cfg.error_ratio) for g in gains]
    conv = dict(DEFAULT_ROUNDS if convergence is None else convergence)
    return Scenario(profiles, params, cfg.T, list(cfg.dims), conv), placement


_USER_FIELDS = {f.name for f in fields(UserProfile)}
_PARAM_FIELDS = {f.name for f in fields(EnergyParams)}
_TOP_FIELDS = {"schema", "units", "T", "dims", "convergence", "params", "users", "placement",
               "manifest"}

UNITS = {
    "T": "s", "b": "Hz", "B": "Hz", "f_max": "Hz", "P_max": "W", "N0": "W/Hz",
    "g": "linear power gain", "gamma": "J/(cycle Hz^2)", "kappa": "bits per dimension",
    "C_enc": "cycles per dimension per sample", "C_agg": "cycles per dimension per sample",
    "C_sim": "cycles per dimension per sample", "C_up": "cycles per dimension per sample",
    "D": "samples", "e": "ratio", "positions": "m", "radius": "m",
}


def scenario_to_dict(scenario: Scenario, placement: Placement | None = None) -> dict:
    out = {
        "schema": SCENARIO_SCHEMA,
        "units": UNITS,
        "T": scenario.T,
        "dims": list(scenario.dims),
        "convergence": {str(d): j for d, j in sorted(scenario.convergence.items())},
        "params": asdict(scenario.params),
        "users": [asdict(p) for p in scenario.profiles],
    }
    if placement is not None:
        out["placement"] = {"positions": placement.positions.tolist(),
                            "radius": placement.radius, "seed": placement.seed}
    return out


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ValueError(f"unknown field(s) in {where}: {sorted(extra)}")


def scenario_from_dict(obj: dict):
    """Inverse of :func:`scenario_to_dict`; returns ``(scenario, placement or None)``."""
    _reject_unknown(obj, _TOP_FIELDS, "scenario")
    if obj.get("schema") != SCENARIO_SCHEMA:
        raise ValueError(f"unsupported scenario schema {obj.get('schema')!r}")
    _reject_unknown(obj["params"], _PARAM_FIELDS, "params")
    params = EnergyParams(**obj["params"])
    profiles = []
    for i, u in enumerate(obj["users"]):
        _reject_unknown(u, _USER_FIELDS, f"users[{i}]")
        profiles.append(UserProfile(**u))
    convergence = {int(d): (None if j is None else int(j))
                   for d, j in obj["convergence"].items()}
    scenario = Scenario(profiles, params, float(obj["T"]), [int(d) for d in obj["dims"]],
                        convergence)
    placement = None
    if "placement" in obj:
        pl = obj["placement"]
        _reject_unknown(pl, {"positions", "radius", "seed"}, "placement")
        placement = Placement(np.asarray(pl["positions"], dtype=np.float64).reshape(-1, 2),
                              float(pl["radius"]), int(pl["seed"]))
    return scenario, placement


@dataclass
class Dataset:
    """Train/test features (n, m) with 0-based integer labels."""

    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    n_classes: int
    low: float = 0.0
    high: float = 255.0

    def __post_init__(self):
        if self.X_train.shape[1] != self.X_test.shape[1]:
            raise ValueError("train and test feature counts differ")
        for y in (self.y_train, self.y_test):
            if y.size and (y.min() < 0 or y.max() >= self.n_classes):
                raise ValueError("label out of range")

    @property
    def m(self) -> int:
        return self.X_train.shape[1]


def load_mnist(directory) -> Dataset:
    (Xtr, ytr), (Xte, yte) = mnist.load_mnist(directory)
    return Dataset(Xtr, ytr, Xte, yte, n_classes=10)


def synth_dataset(m: int, n_classes: int, per_class: int, separation: float, seed: int,
                  test_per_class: int | None = None) -> Dataset:
    """Gaussian blobs mapped onto the 0..255 feature range.

    Class prototypes are ``separation * N(0, I)`` and samples add unit
    Gaussian noise, so ``separation`` is measured in noise standard
    deviations per feature.  Labels are exactly balanced.
    """
    if m < 1 or n_classes < 1 or per_class < 1 or separation < 0:
        raise ValueError("invalid synthetic dataset parameters")
    test_per_class = per_class if test_per_class is None else test_per_class
    rng = np.random.default_rng(seed)
    protos = separation * rng.standard_normal((n_classes, m))
    span = 3.0 * separation + 4.0

    def draw(k):
        y = np.repeat(np.arange(n_classes), k)
        z = protos[y] + rng.standard_normal((y.size, m))
        x = np.clip(np.round((z + span) / (2 * span) * 255.0), 0, 255).astype(np.uint8)
        order = rng.permutation(y.size)
        return x[order], y[order]

    Xtr, ytr = draw(per_class)
    Xte, yte = draw(test_per_class)
    return Dataset(Xtr, ytr, Xte, yte, n_classes)


def partition(n_train: int, U: int, shard_size: int, seed: int) -> list[np.ndarray]:
    """Disjoint IID shards of training indices drawn from one seeded shuffle."""
    if U < 1 or shard_size < 1:
        raise ValueError("need U >= 1 and shard_size >= 1")
    if U * shard_size > n_train:
        raise ValueError(f"{U} shards of {shard_size} need {U * shard_size} samples, "
                         f"only {n_train} available")
    order = np.random.default_rng(seed).permutation(n_train)
    return [order[i * shard_size:(i + 1) * shard_size] for i in range(U)]


__all__ = [
    "DEFAULT_ROUNDS", "DEFAULT_DIMS", "Placement", "place_users", "PathLossModel", "channel_gain",
    "ScenarioConfig", "generate_scenario", "scenario_to_dict", "scenario_from_dict",
    "Dataset", "load_mnist", "synth_dataset", "partition",
]
