"""Derive independent, reproducible random streams from one master seed."""

import hashlib

import numpy as np


def derive_seed(seed, *labels):
    """Hash ``seed`` together with ``labels`` into a 63-bit integer seed."""
    h = hashlib.sha256(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x00")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "big") >> 1


def rng_for(seed, *labels):
    return np.random.default_rng(derive_seed(seed, *labels))
