# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector kernel.

Same contract as ``py_backend``: big-endian qubit order, new output array.
Registers are capped at 8 qubits upstream, so fixed-size scratch buffers
(256 complex entries) cover every call.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "cython"

DEF MAX_QUBITS = 8
DEF MAX_DIM = 256


def apply_matrix(
    const double complex[::1] amps,
    const double complex[:, ::1] mat,
    targets,
    Py_ssize_t n_qubits,
):
    cdef Py_ssize_t k = len(targets)
    if n_qubits > MAX_QUBITS or k > n_qubits:
        raise ValueError("register too large for compiled kernel")

    cdef Py_ssize_t dim = 1 << n_qubits
    cdef Py_ssize_t sub = 1 << k
    cdef Py_ssize_t n_outer = 1 << (n_qubits - k)

    # Bit position (from the LSB) of each operator index bit; targets[0] is
    # the most significant bit of the operator's index space.
    cdef Py_ssize_t[MAX_QUBITS] pos
    cdef Py_ssize_t[MAX_QUBITS] pos_asc
    cdef Py_ssize_t[MAX_DIM] offs
    cdef double complex[MAX_DIM] x
    cdef Py_ssize_t i, j, o, base, off, low, p, tmp

    for j in range(k):
        pos[j] = n_qubits - 1 - <Py_ssize_t> targets[j]
        pos_asc[j] = pos[j]
    # insertion sort: ascending bit positions, needed for zero-bit insertion
    for i in range(1, k):
        tmp = pos_asc[i]
        j = i - 1
        while j >= 0 and pos_asc[j] > tmp:
            pos_asc[j + 1] = pos_asc[j]
            j -= 1
        pos_asc[j + 1] = tmp

    for i in range(sub):
        off = 0
        for j in range(k):
            if (i >> (k - 1 - j)) & 1:
                off |= 1 << pos[j]
        offs[i] = off

    out = np.empty(dim, dtype=np.complex128)
    cdef double complex[::1] outv = out
    cdef double complex acc

    for o in range(n_outer):
        base = o
        for j in range(k):
            p = pos_asc[j]
            low = base & ((1 << p) - 1)
            base = ((base >> p) << (p + 1)) | low
        for i in range(sub):
            x[i] = amps[base + offs[i]]
        for i in range(sub):
            acc = 0
            for j in range(sub):
                acc = acc + mat[i, j] * x[j]
            outv[base + offs[i]] = acc
    return out
