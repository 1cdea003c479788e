# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector kernels: single-qubit gates and diagonal ZZ phases.

Qubit q addresses bit q of the amplitude index (little-endian). Both kernels
mutate the amplitude array in place; norm is preserved up to rounding.
"""
from libc.math cimport cos, sin


def apply_single_qubit(double complex[::1] amps, Py_ssize_t q, const double complex[:, :] u):
    cdef Py_ssize_t n = amps.shape[0]
    cdef Py_ssize_t stride = 1 << q
    cdef Py_ssize_t step = stride << 1
    cdef Py_ssize_t block, i, j
    cdef double complex a, b
    cdef double complex u00 = u[0, 0], u01 = u[0, 1], u10 = u[1, 0], u11 = u[1, 1]
    for block in range(0, n, step):
        for i in range(block, block + stride):
            j = i + stride
            a = amps[i]
            b = amps[j]
            amps[i] = u00 * a + u01 * b
            amps[j] = u10 * a + u11 * b


def apply_zz_phase(double complex[::1] amps, Py_ssize_t a, Py_ssize_t b, double theta):
    """Multiply amplitude k by exp(-i*theta*s_a(k)*s_b(k)) with s = +/-1 from bits."""
    cdef Py_ssize_t n = amps.shape[0]
    cdef Py_ssize_t k
    cdef double c = cos(theta), s = sin(theta)
    cdef double complex equal = c - 1j * s
    cdef double complex differ = c + 1j * s
    for k in range(n):
        if ((k >> a) ^ (k >> b)) & 1:
            amps[k] = amps[k] * differ
        else:
            amps[k] = amps[k] * equal


def apply_z_phase(double complex[::1] amps, Py_ssize_t q, double theta):
    """Multiply amplitude k by exp(-i*theta*s_q(k))."""
    cdef Py_ssize_t n = amps.shape[0]
    cdef Py_ssize_t k
    cdef double c = cos(theta), s = sin(theta)
    cdef double complex zero = c - 1j * s
    cdef double complex one = c + 1j * s
    for k in range(n):
        if (k >> q) & 1:
            amps[k] = amps[k] * one
        else:
            amps[k] = amps[k] * zero
