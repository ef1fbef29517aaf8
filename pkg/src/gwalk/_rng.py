"""Deterministic 64-bit RNG primitives shared by every sampling component.

All environment and walk randomness flows through splitmix64. The compiled
kernel reimplements exactly these integer operations in C, which is what makes
the pure-Python and compiled kernels produce bit-identical output for the same
seeds.

Substream discipline
--------------------
A node of the environment draws its offspring from a stream seeded by its own
64-bit key. The root key is ``mix64(env_seed ^ ROOT_SALT)`` and the key of the
j-th child (0-based) of a node with key ``k`` is ``mix64(k ^ (j+2)*GOLDEN)``.
Keys therefore depend only on (environment seed, path from the root), so two
consumers exploring the same environment in different orders see the same
quenched tree.

Experiment seeds use :func:`derive_seed`, chaining the same mixer over
(master seed, experiment label, trial index, role).
"""

from __future__ import annotations

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
ROOT_SALT = 0xD1B54A32D192ED03

_INV_2_53 = 1.0 / (1 << 53)


def mix64(x: int) -> int:
    """splitmix64 finalizer: a bijective mixing of a 64-bit value."""
    x &= MASK
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK
    x ^= x >> 31
    return x


def sm64_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 stream: returns (new_state, output)."""
    state = (state + GOLDEN) & MASK
    return state, mix64(state)


def sm64_double(state: int) -> tuple[int, float]:
    """Uniform double in [0, 1) with 53 random bits."""
    state, z = sm64_next(state)
    return state, (z >> 11) * _INV_2_53


def child_key(parent_key: int, j: int) -> int:
    """Key of the j-th (0-based) child of a node with key ``parent_key``."""
    return mix64(parent_key ^ (((j + 2) * GOLDEN) & MASK))


def root_key(env_seed: int) -> int:
    return mix64((env_seed & MASK) ^ ROOT_SALT)


def _label_hash(label: str) -> int:
    # FNV-1a over the UTF-8 bytes, then mixed
    h = 0xCBF29CE484222325
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK
    return mix64(h)


def derive_seed(master: int, experiment: str, trial: int, role: str) -> int:
    """Documented substream hash: master -> (experiment, trial, role) seed.

    role is conventionally one of {"env", "walk", "bootstrap"} but any label
    works; the chain is collision-resistant enough for Monte Carlo purposes.
    """
    x = mix64(master & MASK)
    x = mix64(x ^ _label_hash(experiment))
    x = mix64(x ^ ((trial & MASK) * GOLDEN) & MASK)
    x = mix64(x ^ _label_hash(role))
    return x
