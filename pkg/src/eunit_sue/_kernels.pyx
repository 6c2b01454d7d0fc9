# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel for random-utility choice sampling.

Consumes doubles straight from a numpy bit generator, so the random stream is
identical to the pure-Python fallback in ``_kernels_py``.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport pow

from numpy.random cimport bitgen_t


def count_chunk(bit_generator, const double[::1] inv_weights, long long[::1] counts, Py_ssize_t n):
    """Tally argmax(u_r ** inv_weights[r]) over n draws of k uniforms each.

    Draws k doubles per sample from ``bit_generator`` in sample-major order,
    matching ``Generator.random((n, k))``.
    """
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        bit_generator.capsule, "BitGenerator")
    cdef Py_ssize_t i, r, best
    cdef Py_ssize_t k = inv_weights.shape[0]
    cdef double u, best_u
    if counts.shape[0] != k:
        raise ValueError("counts and inv_weights must have the same length")
    with bit_generator.lock, nogil:
        for i in range(n):
            best = 0
            best_u = -1.0
            for r in range(k):
                u = pow(rng.next_double(rng.state), inv_weights[r])
                if u > best_u:
                    best_u = u
                    best = r
            counts[best] += 1
