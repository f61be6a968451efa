"""Hypervector algebra, record-based encoding and associative-memory learning.

Hypervectors are plain 1-D numpy arrays; batches are 2-D arrays with one
hypervector per row.  Class labels are 0-based indices into the associative
memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

__all__ = [
    "ItemMemory",
    "AssociativeMemory",
    "EncodedSet",
    "bind",
    "bundle",
    "quantize",
    "encode_levels",
    "encode_sample",
    "encode_batch",
    "train_am",
    "cosine_similarity",
    "classify",
    "classify_batch",
    "retrain_pass",
    "clip_hv",
    "clip_scales",
]

_ENCODE_CHUNK = 512


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} != {b.shape[-1]}")


def bind(a, b) -> np.ndarray:
    """Element-wise product of two hypervectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} != {b.shape}")
    return a * b


def bundle(hvs) -> np.ndarray:
    """Element-wise sum of a non-empty sequence of hypervectors (no thresholding)."""
    hvs = [np.asarray(h) for h in hvs]
    if not hvs:
        raise ValueError("cannot bundle an empty list of hypervectors")
    d = hvs[0].shape
    for h in hvs[1:]:
        if h.shape != d:
            raise ValueError(f"dimension mismatch: {h.shape} != {d}")
    return np.sum(np.stack(hvs), axis=0)


@dataclass(frozen=True)
class ItemMemory:
    """Seeded position and value hypervectors shared by every user.

    ``position_hvs`` has shape (m, d) and ``value_hvs`` (L, d); both are
    bipolar int8.  Feature values in ``[low, high]`` are mapped onto the L
    levels by :func:`quantize`.
    """

    position_hvs: np.ndarray
    value_hvs: np.ndarray
    low: float = 0.0
    high: float = 255.0
    seed: int | None = None

    def __post_init__(self):
        pos = np.array(self.position_hvs, dtype=np.int8)
        val = np.array(self.value_hvs, dtype=np.int8)
        if pos.ndim != 2 or val.ndim != 2:
            raise ValueError("item memories must be 2-D arrays")
        _check_same_dim(pos, val)
        for arr in (pos, val):
            if not np.all(np.abs(arr) == 1):
                raise ValueError("item-memory hypervectors must be bipolar")
            arr.flags.writeable = False
        if not self.high > self.low:
            raise ValueError("high must exceed low")
        object.__setattr__(self, "position_hvs", pos)
        object.__setattr__(self, "value_hvs", val)

    @property
    def m(self) -> int:
        return self.position_hvs.shape[0]

    @property
    def d(self) -> int:
        return self.position_hvs.shape[1]

    @property
    def levels(self) -> int:
        return self.value_hvs.shape[0]

    @classmethod
    def generate(cls, m: int, d: int, levels: int = 16, seed: int = 0,
                 low: float = 0.0, high: float = 255.0) -> "ItemMemory":
        """Draw random position HVs and linearly-correlated level HVs.

        Level 0 is a random bipolar vector.  Each following level negates a
        fresh block of ``d // 2 // (levels - 1)`` positions taken from one
        random permutation, so neighbouring levels differ in exactly that
        many positions and the two extreme levels are close to orthogonal.
        """
        if m < 1 or d < 1:
            raise ValueError("m and d must be positive")
        if levels < 2:
            raise ValueError("need at least two quantization levels")
        rng = np.random.default_rng(seed)
        position = rng.choice(np.array([-1, 1], dtype=np.int8), size=(m, d))
        base = rng.choice(np.array([-1, 1], dtype=np.int8), size=d)
        order = rng.permutation(d)
        step = d // 2 // (levels - 1)
        value = np.empty((levels, d), dtype=np.int8)
        value[0] = base
        for v in range(1, levels):
            value[v] = value[v - 1]
            block = order[(v - 1) * step: v * step]
            value[v, block] *= -1
        return cls(position, value, low=low, high=high, seed=seed)


def quantize(x, levels: int, low: float = 0.0, high: float = 255.0) -> np.ndarray:
    """Map feature values onto level indices ``0 .. levels-1`` with equal-width bins."""
    x = np.asarray(x, dtype=np.float64)
    idx = np.floor((x - low) / (high - low) * levels)
    return np.clip(idx, 0, levels - 1).astype(np.intp)


def encode_levels(levels_idx, im: ItemMemory) -> np.ndarray:
    """Encode samples given as level indices; returns int32 hypervectors.

    Accepts a single sample of shape (m,) or a batch (n, m).  Features at
    level 0 contribute ``sum_k P_k * V_0`` to every sample, so only the
    other levels are gathered, through one sparse product per level.
    """
    lv = np.asarray(levels_idx)
    single = lv.ndim == 1
    lv = np.atleast_2d(lv)
    if lv.shape[1] != im.m:
        raise ValueError(f"expected {im.m} features, got {lv.shape[1]}")
    if lv.size and (lv.min() < 0 or lv.max() >= im.levels):
        raise ValueError("level index out of range")

    pos = im.position_hvs.astype(np.float32)
    val = im.value_hvs.astype(np.int32)
    base = pos.sum(axis=0).astype(np.int32) * val[0]
    deltas = val - val[0]

    out = np.empty((lv.shape[0], im.d), dtype=np.int32)
    for start in range(0, lv.shape[0], _ENCODE_CHUNK):
        chunk = lv[start:start + _ENCODE_CHUNK]
        acc = np.broadcast_to(base, (chunk.shape[0], im.d)).copy()
        for v in range(1, im.levels):
            mask = chunk == v
            if not mask.any():
                continue
            counts = sparse.csr_matrix(mask, dtype=np.float32) @ pos
            acc += counts.astype(np.int32) * deltas[v]
        out[start:start + chunk.shape[0]] = acc
    return out[0] if single else out


def encode_sample(x, im: ItemMemory) -> np.ndarray:
    """Record-based encoding of one feature vector: sum_k P_k * V_{q(x_k)}."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("encode_sample takes a single feature vector")
    if x.shape[0] != im.m:
        raise ValueError(f"expected {im.m} features, got {x.shape[0]}")
    return encode_levels(quantize(x, im.levels, im.low, im.high), im)


def encode_batch(X, im: ItemMemory) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError("encode_batch takes an (n, m) array")
    if X.shape[1] != im.m:
        raise ValueError(f"expected {im.m} features, got {X.shape[1]}")
    return encode_levels(quantize(X, im.levels, im.low, im.high), im)


def clip_hv(h, c: float) -> np.ndarray:
    """Scale ``h`` down onto the L2 ball of radius ``c`` if it lies outside."""
    if not c > 0:
        raise ValueError("clip bound must be positive")
    h = np.asarray(h)
    norm = np.linalg.norm(h)
    if norm <= c:
        return h
    return h * (c / norm)


def clip_scales(hvs: np.ndarray, c: float) -> np.ndarray:
    """Per-row factors that :func:`clip_hv` would apply to each row of ``hvs``."""
    if not c > 0:
        raise ValueError("clip bound must be positive")
    hvs = np.asarray(hvs)
    norms = np.concatenate([
        np.linalg.norm(hvs[s:s + _ENCODE_CHUNK].astype(np.float64), axis=1)
        for s in range(0, hvs.shape[0], _ENCODE_CHUNK)
    ]) if hvs.shape[0] else np.zeros(0)
    scale = np.ones_like(norms)
    over = norms > c
    scale[over] = c / norms[over]
    return scale


@dataclass
class EncodedSet:
    """Cached encoded samples: integer HVs, a per-row clip factor and labels.

    The effective (clipped) hypervector of row i is ``scale[i] * hvs[i]``;
    keeping the integer part avoids storing a float copy of every sample.
    """

    hvs: np.ndarray
    labels: np.ndarray
    scale: np.ndarray | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.hvs.shape[0] != self.labels.shape[0]:
            raise ValueError("hvs and labels disagree on sample count")
        if self.scale is None:
            self.scale = np.ones(self.hvs.shape[0])

    def __len__(self) -> int:
        return self.hvs.shape[0]

    @property
    def d(self) -> int:
        return self.hvs.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.hvs[i].astype(np.float64) * self.scale[i]

    def clipped(self, c: float) -> "EncodedSet":
        """Same samples with the L2 clip bound ``c`` applied (``inf`` is a no-op)."""
        if np.isinf(c):
            return EncodedSet(self.hvs, self.labels, self.scale.copy())
        return EncodedSet(self.hvs, self.labels, self.scale * clip_scales(self.hvs, c))

    def subset(self, idx) -> "EncodedSet":
        return EncodedSet(self.hvs[idx], self.labels[idx], self.scale[idx])


@dataclass
class AssociativeMemory:
    """N class hypervectors stored as the rows of ``class_hvs`` (float64)."""

    class_hvs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.class_hvs = np.array(self.class_hvs, dtype=np.float64)
        if self.class_hvs.ndim != 2:
            raise ValueError("class_hvs must be an (N, d) array")

    @property
    def n_classes(self) -> int:
        return self.class_hvs.shape[0]

    @property
    def d(self) -> int:
        return self.class_hvs.shape[1]

    def copy(self) -> "AssociativeMemory":
        return AssociativeMemory(self.class_hvs.copy())

    @classmethod
    def zeros(cls, n_classes: int, d: int) -> "AssociativeMemory":
        return cls(np.zeros((n_classes, d)))


def train_am(samples, n_classes: int) -> AssociativeMemory:
    """Single-pass training: each class HV is the sum of its samples' HVs.

    ``samples`` is either an :class:`EncodedSet` or an iterable of
    ``(hypervector, label)`` pairs.  Classes without samples stay at zero.
    """
    if not isinstance(samples, EncodedSet):
        pairs = list(samples)
        if not pairs:
            raise ValueError("no samples to train on")
        hvs = np.stack([np.asarray(h) for h, _ in pairs])
        samples = EncodedSet(hvs, [y for _, y in pairs])
    labels = samples.labels
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"label out of range for {n_classes} classes")
    am = np.zeros((n_classes, samples.d))
    weights = samples.scale
    for n in range(n_classes):
        idx = np.flatnonzero(labels == n)
        for start in range(0, idx.size, _ENCODE_CHUNK):
            rows = idx[start:start + _ENCODE_CHUNK]
            am[n] += weights[rows] @ samples.hvs[rows].astype(np.float64)
    return AssociativeMemory(am)


def cosine_similarity(q, a) -> float:
    """Cosine of the angle between ``q`` and ``a``; ``-inf`` if either norm is zero."""
    q = np.asarray(q, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if q.shape != a.shape:
        raise ValueError(f"dimension mismatch: {q.shape} != {a.shape}")
    nq = np.linalg.norm(q)
    na = np.linalg.norm(a)
    if nq == 0 or na == 0:
        return -np.inf
    return float(np.dot(q, a) / (nq * na))


def _similarities(Q: np.ndarray, A: np.ndarray) -> np.ndarray:
    # Q: (n, d), A: (N, d).  Degenerate (zero-norm) pairs score -inf.
    nq = np.linalg.norm(Q, axis=1)
    na = np.linalg.norm(A, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = (Q @ A.T) / np.outer(nq, na)
    sims[(nq == 0)[:, None] | (na == 0)[None, :]] = -np.inf
    return sims


def classify(q, am: AssociativeMemory) -> int:
    """Index of the most similar class HV; ties go to the lowest index."""
    q = np.asarray(q, dtype=np.float64)
    _check_same_dim(q, am.class_hvs)
    return int(np.argmax(_similarities(q[None, :], am.class_hvs)[0]))


def classify_batch(hvs: np.ndarray, am: AssociativeMemory) -> np.ndarray:
    _check_same_dim(hvs, am.class_hvs)
    out = np.empty(hvs.shape[0], dtype=np.intp)
    for start in range(0, hvs.shape[0], _ENCODE_CHUNK):
        Q = hvs[start:start + _ENCODE_CHUNK].astype(np.float64)
        out[start:start + Q.shape[0]] = np.argmax(_similarities(Q, am.class_hvs), axis=1)
    return out


def retrain_pass(am: AssociativeMemory, samples, eta: float = 1.0):
    """One online error-driven pass over ``samples`` in their given order.

    Every misclassified query is subtracted (times ``eta``) from the class it
    was assigned to and added to its true class before the next sample is
    looked at.  Returns ``(new_am, error_count)``; the input AM is untouched.
    """
    if not eta > 0:
        raise ValueError("learning rate must be positive")
    if not isinstance(samples, EncodedSet):
        pairs = list(samples)
        if not pairs:
            return am.copy(), 0
        samples = EncodedSet(np.stack([np.asarray(h) for h, _ in pairs]),
                             [y for _, y in pairs])
    _check_same_dim(samples.hvs, am.class_hvs)
    A = am.class_hvs.copy()
    norms = np.linalg.norm(A, axis=1)
    errors = 0
    for i in range(len(samples)):
        h = samples.row(i)
        nh = np.linalg.norm(h)
        if nh == 0:
            pred = 0
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                sims = (A @ h) / (norms * nh)
            sims[norms == 0] = -np.inf
            pred = int(np.argmax(sims))
        true = int(samples.labels[i])
        if pred == true:
            continue
        errors += 1
        A[pred] -= eta * h
        A[true] += eta * h
        norms[pred] = np.linalg.norm(A[pred])
        norms[true] = np.linalg.norm(A[true])
    return AssociativeMemory(A), errors
