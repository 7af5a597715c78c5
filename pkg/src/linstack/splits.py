"""Seed derivation and stratified fold assignment."""

from __future__ import annotations

import hashlib

import numpy as np


class StratificationError(ValueError):
    pass


def derive_seed(master: int, tag: str, index: int = 0) -> int:
    """Deterministic 63-bit sub-seed from ``(master, tag, index)``."""
    key = f"{int(master)}:{tag}:{int(index)}".encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "little") & (2**63 - 1)


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Fold id in ``[0, k)`` for every instance, balanced within each class.

    Instances of each class are shuffled and dealt round-robin; the dealing
    position carries over between classes so fold sizes differ by at most one.
    """
    y = np.asarray(labels)
    n = y.shape[0]
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > n:
        raise StratificationError(f"{k} folds requested for {n} instances")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.int64)
    pos = 0
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = (pos + np.arange(idx.size)) % k
        pos = (pos + idx.size) % k
    return folds


def require_per_class(labels, minimum: int, what: str) -> None:
    values, counts = np.unique(np.asarray(labels), return_counts=True)
    short = values[counts < minimum]
    if short.size:
        raise StratificationError(
            f"{what} needs >= {minimum} instances per class; "
            f"class(es) {short.tolist()} have fewer"
        )
