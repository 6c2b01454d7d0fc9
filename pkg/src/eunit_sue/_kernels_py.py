"""Pure-numpy fallback for the compiled sampling kernel.

Consumes the same random stream as ``_kernels.count_chunk``: ``Generator.random``
fills sample-major, one double per (sample, alternative).
"""

from __future__ import annotations

import numpy as np


def count_chunk(bit_generator, inv_weights: np.ndarray, counts: np.ndarray, n: int) -> None:
    if counts.shape[0] != inv_weights.shape[0]:
        raise ValueError("counts and inv_weights must have the same length")
    u = np.random.Generator(bit_generator).random((n, inv_weights.shape[0]))
    np.power(u, inv_weights[None, :], out=u)
    counts += np.bincount(u.argmax(axis=1), minlength=counts.shape[0])
