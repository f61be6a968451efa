"""Federated HDC training with per-round Gaussian noise, and rounds-to-accuracy.

Round 0: every user encodes and clips its shard and builds a local AM.
Round j >= 1: every user starts from the global AM and runs one retraining
pass over its cached HVs.  In both cases the local AM is noised and the
server takes the element-wise mean.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .hdc import AssociativeMemory, EncodedSet, ItemMemory, classify_batch, encode_batch, retrain_pass, train_am
from .privacy import PrivacyParams, add_noise, derive_seed
from .scenario import Dataset, partition

__all__ = [
    "FedConfig",
    "FedState",
    "ConvergenceTable",
    "aggregate",
    "init_state",
    "run_round",
    "evaluate_accuracy",
    "first_round_reaching",
    "measure_convergence",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FedConfig:
    U: int = 50
    N: int = 10
    d: int = 10000
    J_max: int = 100
    eta: float = 1.0
    target_accuracy: float = 0.88
    privacy: PrivacyParams = field(default_factory=PrivacyParams.disabled)
    seed: int = 0
    shard_size: int = 1200
    levels: int = 16
    test_limit: int | None = None

    def __post_init__(self):
        if self.U < 1 or self.J_max < 1 or self.d < 1:
            raise ValueError("U, J_max and d must be positive")
        if not 0 <= self.target_accuracy < 1:
            raise ValueError("target_accuracy must lie in [0, 1)")
        if not self.eta > 0:
            raise ValueError("eta must be positive")


@dataclass
class FedState:
    users: list[EncodedSet]
    privacy: PrivacyParams
    eta: float
    seed: int
    n_classes: int
    global_am: AssociativeMemory | None = None
    local_ams: list[AssociativeMemory] = field(default_factory=list)
    errors: list[int] = field(default_factory=list)
    rounds_done: int = 0


def aggregate(ams) -> AssociativeMemory:
    """Element-wise mean of the users' AMs.

    Values are sorted along the user axis before summation so the result is
    bit-identical under any reordering of the users.
    """
    stack = np.stack([am.class_hvs for am in ams])
    return AssociativeMemory(np.sort(stack, axis=0).sum(axis=0) / stack.shape[0])


def init_state(shards, n_classes: int, privacy: PrivacyParams, eta: float = 1.0,
               seed: int = 0) -> FedState:
    """Clip each user's encoded shard; ``privacy`` must already be resolved."""
    if privacy.sigma is None or privacy.clip_c is None:
        raise ValueError("privacy parameters must be resolved to a dimension first")
    users = [s.clipped(privacy.clip_c) for s in shards]
    return FedState(users, privacy, eta, seed, n_classes)


def run_round(state: FedState, j: int) -> FedState:
    """Execute global round ``j`` (0-based) and return the updated state."""
    local = []
    errors = []
    for i, data in enumerate(state.users):
        if j == 0:
            am = train_am(data, state.n_classes)
            err = 0
        else:
            am, err = retrain_pass(state.global_am, data, state.eta)
        am = add_noise(am, state.privacy.sigma, derive_seed(state.seed, j, i))
        local.append(am)
        errors.append(err)
    return replace(state, global_am=aggregate(local), local_ams=local, errors=errors,
                   rounds_done=j + 1)


def evaluate_accuracy(am: AssociativeMemory, test: EncodedSet) -> float:
    """Fraction of encoded test samples whose predicted class is the true one."""
    if len(test) == 0:
        raise ValueError("empty test set")
    return float(np.mean(classify_batch(test.hvs, am) == test.labels))


def _subseed(master: int, *keys: int) -> int:
    return int(derive_seed(master, *keys).generate_state(1)[0])


def _encode(X, y, im: ItemMemory) -> EncodedSet:
    hvs = encode_batch(X, im)
    if np.abs(hvs).max(initial=0) <= np.iinfo(np.int16).max:
        hvs = hvs.astype(np.int16)
    return EncodedSet(hvs, y)


def first_round_reaching(data: Dataset, cfg: FedConfig, seed: int) -> tuple[int | None, list[float]]:
    """Train one federation and return the first round count reaching the target.

    The returned round count is 1-based (1 = after the first aggregation);
    ``None`` means the target was not met within ``cfg.J_max`` rounds.  The
    accuracy after every executed round is returned as well.
    """
    im = ItemMemory.generate(data.m, cfg.d, cfg.levels, seed=_subseed(seed, 0),
                             low=data.low, high=data.high)
    shards = partition(len(data.y_train), cfg.U, cfg.shard_size, _subseed(seed, 1))
    X_test, y_test = data.X_test, data.y_test
    if cfg.test_limit is not None:
        X_test, y_test = X_test[:cfg.test_limit], y_test[:cfg.test_limit]
    test = _encode(X_test, y_test, im)
    encoded = [_encode(data.X_train[idx], data.y_train[idx], im) for idx in shards]
    privacy = cfg.privacy.resolve(cfg.d, cfg.eta, rounds=cfg.J_max)
    state = init_state(encoded, cfg.N, privacy, cfg.eta, seed)
    history = []
    for j in range(cfg.J_max):
        state = run_round(state, j)
        acc = evaluate_accuracy(state.global_am, test)
        history.append(acc)
        log.debug("d=%d seed=%d round %d accuracy %.4f", cfg.d, seed, j + 1, acc)
        if acc >= cfg.target_accuracy:
            return j + 1, history
    return None, history


@dataclass
class ConvergenceTable:
    """Rounds needed to reach ``target_accuracy`` for each dimension (None = not reached)."""

    entries: dict[int, int | None]
    target_accuracy: float
    epsilon: float | None
    replications: int
    J_max: int | None = None

    def __post_init__(self):
        if self.J_max is not None:
            for d, j in self.entries.items():
                if j is not None and j > self.J_max:
                    raise ValueError(f"J_d={j} at d={d} exceeds J_max={self.J_max}")


def measure_convergence(cfg: FedConfig, dims, data: Dataset, replications: int = 5) -> ConvergenceTable:
    """Median (upper) first round reaching the target over seeded replications.

    A replication that never reaches the target counts as beyond ``J_max``;
    if the median lands there the entry is ``None``.
    """
    dims = list(dims)
    if not dims:
        raise ValueError("need at least one dimension")
    if replications < 1:
        raise ValueError("replications must be positive")
    entries = {}
    for d in dims:
        cfg_d = replace(cfg, d=d)
        runs = []
        for r in range(replications):
            seed = _subseed(cfg.seed, d, r)
            rounds, _ = first_round_reaching(data, cfg_d, seed)
            runs.append(cfg.J_max + 1 if rounds is None else rounds)
            log.info("d=%d replication %d: %s", d, r, rounds)
        med = statistics.median_high(runs)
        entries[d] = None if med > cfg.J_max else med
    eps = None if cfg.privacy.is_disabled else cfg.privacy.epsilon_target
    return ConvergenceTable(entries, cfg.target_accuracy, eps, replications, cfg.J_max)
