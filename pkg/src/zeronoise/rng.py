"""Counter-based Gaussian increments keyed on (seed, path, step).

Each path owns a Philox-4x64 stream keyed on ``(master_seed, path_index)``;
the ``k``-th 64-bit word of that stream is turned into a uniform on (0, 1)
and then into a standard normal by the inverse CDF.  One word per step means
the draw for any (seed, path, step) is addressable directly, so results do
not depend on execution order or on how paths are split across workers.
"""
from __future__ import annotations

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
# refinement level l uses path key path_index + l * _LEVEL_STRIDE
_LEVEL_STRIDE = 1 << 48
_WORDS_PER_BLOCK = 4


def _key(master_seed: int, path_index: int, level: int = 0) -> list[int]:
    if path_index < 0 or path_index >= _LEVEL_STRIDE:
        raise ValueError("path_index out of range")
    return [int(master_seed) & _MASK64, int(path_index) + level * _LEVEL_STRIDE]


def words_to_normals(words: np.ndarray) -> np.ndarray:
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def standard_normals(master_seed: int, path_index: int, n: int, start: int = 0,
                     level: int = 0) -> np.ndarray:
    """Standard normals for steps ``start, ..., start + n - 1`` of one path."""
    block, offset = divmod(int(start), _WORDS_PER_BLOCK)
    bg = Philox(key=_key(master_seed, path_index, level), counter=block)
    words = bg.random_raw(n + offset)[offset:]
    return words_to_normals(words)


def brownian_increment(master_seed: int, path_index: int, step_index: int, dt: float) -> float:
    """``sqrt(dt) * Z`` with ``Z`` the standard normal addressed by the triple."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    z = standard_normals(master_seed, path_index, 1, start=step_index)[0]
    return float(np.sqrt(dt) * z)


def refine_increments(dw: np.ndarray, dts: np.ndarray, master_seed: int, path_index: int,
                      level: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Halve every step by sampling the Brownian bridge midpoint.

    Returns fine increments and step sizes whose pairwise sums reproduce the
    coarse path.  The bridge noise comes from an independent stream
    (refinement ``level``), so coarse and fine paths share one Brownian motion.
    """
    xi = standard_normals(master_seed, path_index, dw.size, level=level)
    half = 0.5 * dw
    bridge = 0.5 * np.sqrt(dts) * xi
    fine = np.empty(2 * dw.size)
    fine[0::2] = half + bridge
    fine[1::2] = half - bridge
    fine_dts = np.repeat(0.5 * dts, 2)
    return fine, fine_dts
