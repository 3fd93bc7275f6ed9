# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping kernels (RK4 statevector and master equation)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


cdef void _apply_h(const double* psi, double* out, const double* diag, double A,
                   const double* k0, const double* k1, const double* hz, bint has_hz,
                   int n, Py_ssize_t dim) noexcept nogil:
    # out = -i H psi on interleaved (re, im) storage.  Site 0 is the most
    # significant bit; bit 0 <-> spin +1.  k0/k1 hold the off-diagonal
    # element (re, im) for pairs seen from the bit-0 / bit-1 side.
    cdef Py_ssize_t z, z0, z1, m, hi, lo
    cdef int i
    cdef double d, xr, xi, yr, yi, ar, ai, br, bi
    for z in range(dim):
        d = A * diag[z]
        if has_hz:
            for i in range(n):
                if (z >> (n - 1 - i)) & 1:
                    d = d - hz[i]
                else:
                    d = d + hz[i]
        # -i * d * psi
        out[2 * z] = d * psi[2 * z + 1]
        out[2 * z + 1] = -d * psi[2 * z]
    for i in range(n):
        m = (<Py_ssize_t>1) << (n - 1 - i)
        # fold the -i into the coefficients: -i (a + ib) = b - ia
        ar = k0[2 * i + 1]
        ai = -k0[2 * i]
        br = k1[2 * i + 1]
        bi = -k1[2 * i]
        hi = 0
        while hi < dim:
            for lo in range(m):
                z0 = hi + lo
                z1 = z0 + m
                xr = psi[2 * z0]
                xi = psi[2 * z0 + 1]
                yr = psi[2 * z1]
                yi = psi[2 * z1 + 1]
                out[2 * z0] += ar * yr - ai * yi
                out[2 * z0 + 1] += ar * yi + ai * yr
                out[2 * z1] += br * xr - bi * xi
                out[2 * z1 + 1] += br * xi + bi * xr
            hi += 2 * m


cdef void _site_coeffs(const double[:, ::1] bx, const double[:, ::1] cy, Py_ssize_t row,
                       double* k0, double* k1, int n) noexcept nogil:
    # <0|(-bx sx - cy sy)|1> = -bx + i cy ; <1|...|0> = -bx - i cy
    cdef int i
    for i in range(n):
        k0[2 * i] = -bx[row, i]
        k0[2 * i + 1] = cy[row, i]
        k1[2 * i] = -bx[row, i]
        k1[2 * i + 1] = -cy[row, i]


def rk4_statevector(psi_obj, const double[::1] diag, spins,
                    const double[::1] A, const double[:, ::1] bx, const double[:, ::1] cy,
                    hz_obj, double dt, Py_ssize_t k_start, Py_ssize_t k_end):
    """Advance ``psi`` (complex128, contiguous) in place from step ``k_start`` to ``k_end``."""
    cdef double[::1] psi = psi_obj.view(np.float64)
    cdef int n = bx.shape[1]
    cdef Py_ssize_t dim = diag.shape[0]
    cdef Py_ssize_t size = 2 * dim
    cdef bint has_hz = hz_obj is not None
    cdef const double[:, ::1] hz
    if has_hz:
        hz = hz_obj
    else:
        hz = np.zeros((bx.shape[0], n))
    cdef double[::1] k1 = np.empty(size)
    cdef double[::1] k2 = np.empty(size)
    cdef double[::1] k3 = np.empty(size)
    cdef double[::1] k4 = np.empty(size)
    cdef double[::1] tmp = np.empty(size)
    cdef double[::1] c0 = np.empty(2 * n)
    cdef double[::1] c1 = np.empty(2 * n)
    cdef Py_ssize_t k, z, r0, r1, r2
    cdef double h = 0.5 * dt
    cdef double s6 = dt / 6.0
    with nogil:
        for k in range(k_start, k_end):
            r0 = 2 * k
            r1 = r0 + 1
            r2 = r0 + 2
            _site_coeffs(bx, cy, r0, &c0[0], &c1[0], n)
            _apply_h(&psi[0], &k1[0], &diag[0], A[r0], &c0[0], &c1[0], &hz[r0, 0], has_hz, n, dim)
            _site_coeffs(bx, cy, r1, &c0[0], &c1[0], n)
            for z in range(size):
                tmp[z] = psi[z] + h * k1[z]
            _apply_h(&tmp[0], &k2[0], &diag[0], A[r1], &c0[0], &c1[0], &hz[r1, 0], has_hz, n, dim)
            for z in range(size):
                tmp[z] = psi[z] + h * k2[z]
            _apply_h(&tmp[0], &k3[0], &diag[0], A[r1], &c0[0], &c1[0], &hz[r1, 0], has_hz, n, dim)
            _site_coeffs(bx, cy, r2, &c0[0], &c1[0], n)
            for z in range(size):
                tmp[z] = psi[z] + dt * k3[z]
            _apply_h(&tmp[0], &k4[0], &diag[0], A[r2], &c0[0], &c1[0], &hz[r2, 0], has_hz, n, dim)
            for z in range(size):
                psi[z] = psi[z] + s6 * (k1[z] + 2.0 * k2[z] + 2.0 * k3[z] + k4[z])
    return psi_obj


cdef void _rates(const double[:, ::1] dE, double beta, double[:, ::1] w) noexcept nogil:
    # Metropolis acceptance min(1, exp(-beta dE)) for every (state, flip)
    cdef Py_ssize_t z
    cdef int i
    cdef double x
    for z in range(dE.shape[0]):
        for i in range(dE.shape[1]):
            x = beta * dE[z, i]
            w[z, i] = exp(-x) if x > 0.0 else 1.0


cdef void _master_rhs(const double[::1] p, double[::1] out, const double[:, ::1] w,
                      const cnp.int64_t[:, ::1] flip) noexcept nogil:
    # dp_z/dt = sum_i [w(z^i -> z) p_{z^i} - w(z -> z^i) p_z]; the reverse
    # move of flip i from z is flip i from z^i
    cdef Py_ssize_t z, y
    cdef int i
    cdef double acc
    for z in range(p.shape[0]):
        acc = 0.0
        for i in range(w.shape[1]):
            y = flip[z, i]
            acc = acc + w[y, i] * p[y] - w[z, i] * p[z]
        out[z] = acc


def rk4_master(double[::1] p, const double[:, ::1] dE, const cnp.int64_t[:, ::1] flip_index,
               const double[::1] beta, double dt, Py_ssize_t k_start, Py_ssize_t k_end):
    cdef Py_ssize_t dim = p.shape[0]
    cdef int n = dE.shape[1]
    cdef double[::1] k1 = np.empty(dim)
    cdef double[::1] k2 = np.empty(dim)
    cdef double[::1] k3 = np.empty(dim)
    cdef double[::1] k4 = np.empty(dim)
    cdef double[::1] tmp = np.empty(dim)
    cdef double[:, ::1] w0 = np.empty((dim, n))
    cdef double[:, ::1] wh = np.empty((dim, n))
    cdef double[:, ::1] w1 = np.empty((dim, n))
    cdef double[:, ::1] swap
    cdef Py_ssize_t k, z
    cdef double h = 0.5 * dt
    cdef double s6 = dt / 6.0
    with nogil:
        if k_start < k_end:
            _rates(dE, beta[2 * k_start], w0)
        for k in range(k_start, k_end):
            # stage 4 of step k and stage 1 of step k+1 share beta[2k+2]
            _rates(dE, beta[2 * k + 1], wh)
            _rates(dE, beta[2 * k + 2], w1)
            _master_rhs(p, k1, w0, flip_index)
            for z in range(dim):
                tmp[z] = p[z] + h * k1[z]
            _master_rhs(tmp, k2, wh, flip_index)
            for z in range(dim):
                tmp[z] = p[z] + h * k2[z]
            _master_rhs(tmp, k3, wh, flip_index)
            for z in range(dim):
                tmp[z] = p[z] + dt * k3[z]
            _master_rhs(tmp, k4, w1, flip_index)
            for z in range(dim):
                p[z] = p[z] + s6 * (k1[z] + 2.0 * k2[z] + 2.0 * k3[z] + k4[z])
            swap = w0
            w0 = w1
            w1 = swap
    return np.asarray(p)
