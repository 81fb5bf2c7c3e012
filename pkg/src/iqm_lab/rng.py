"""Counter-based random streams.

Every succession ``i`` of a run owns its own stream, addressed by a Philox key
derived from ``(seed, *path)`` and the counter ``i``.  A succession draws
``GEN_DRAWS`` uniforms for the generation step followed by ``MES_DRAWS`` for
the measurement step, which is exactly two Philox counter blocks.  Because of
that fixed budget, a contiguous range of successions can be drawn as a single
``(n, DRAWS_PER_SUCCESSION)`` matrix whose row ``k`` is bit-identical to what
succession ``start + k`` would draw on its own.  Splitting a run into chunks,
threads or separate invocations therefore never changes the result.
"""

from __future__ import annotations

import hashlib

import numpy as np

GEN_DRAWS = 4
MES_DRAWS = 4
DRAWS_PER_SUCCESSION = GEN_DRAWS + MES_DRAWS
# Philox4x64 emits four doubles per counter increment.
_BLOCKS_PER_SUCCESSION = DRAWS_PER_SUCCESSION // 4

_MASK64 = (1 << 64) - 1


def normalize_seed(seed: int) -> int:
    """Map any Python int onto the unsigned 64-bit range."""
    return int(seed) & _MASK64


def _path_words(path: tuple) -> tuple[int, ...]:
    words = []
    for part in path:
        if isinstance(part, (int, np.integer)):
            words.append(int(part) & _MASK64)
        else:
            # stable across processes, unlike hash()
            digest = hashlib.sha256(str(part).encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:8], "little"))
    return tuple(words)


def derive_key(seed: int, *path) -> tuple[int, int]:
    """Philox key for the stream addressed by ``(seed, *path)``."""
    ss = np.random.SeedSequence(normalize_seed(seed), spawn_key=_path_words(path))
    state = ss.generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def key_hex(key: tuple[int, int]) -> str:
    return f"{key[0]:016x}{key[1]:016x}"


def _philox(key: tuple[int, int], block: int) -> np.random.Generator:
    bg = np.random.Philox(key=np.array(key, dtype=np.uint64), counter=[block & _MASK64, block >> 64, 0, 0])
    return np.random.Generator(bg)


def succession_rng(key: tuple[int, int], index: int) -> np.random.Generator:
    """The private stream of succession ``index``."""
    return _philox(key, index * _BLOCKS_PER_SUCCESSION)


def succession_uniforms(key: tuple[int, int], start: int, n: int) -> np.ndarray:
    """Uniform draws of successions ``start .. start+n-1``, one row each."""
    if n == 0:
        return np.empty((0, DRAWS_PER_SUCCESSION))
    return _philox(key, start * _BLOCKS_PER_SUCCESSION).random((n, DRAWS_PER_SUCCESSION))
