"""Deterministic seed derivation.

All randomness in the package flows from one top-level seed through keyed
blake2b hashing, so any stage (a training run, a sampling pair, a synthetic
annotator) can be re-derived independently of execution order.
"""
from __future__ import annotations

import hashlib


def derive_seed(seed: int, *parts) -> int:
    """Derive a 64-bit child seed from a parent seed and a label path.

    The same (seed, parts) always yields the same value; distinct label
    paths decorrelate even when the parent seed is small or sequential.
    """
    key = "|".join([str(int(seed))] + [str(p) for p in parts])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
