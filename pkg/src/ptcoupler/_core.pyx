# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled one-period integrator for the two-mode amplitude system.

Dormand-Prince 5(4) with adaptive steps and first-same-as-last reuse,
specialised to the fundamental-matrix equation of

    c1' = -gamma(z) c1 - i kappa c2,
    c2' = -i kappa c1.

This is the inner loop of the phase-diagram sweep; a pure-Python fallback with
the same contract lives in ``_kernels_py``.
"""

import numpy as np

from libc.math cimport cos, exp, fabs, fmax, fmin, pow, sqrt

ctypedef double complex cplx

DEF NEQ = 4


cdef inline double _gamma(int kind, double p0, double p1, double p2, double z) noexcept nogil:
    cdef double e
    if kind == 0:
        return p0
    e = p0 * p0 * exp(-p1 * (1.0 - cos(p2 * z)))
    return 2.0 * e / sqrt(1.0 - e)


cdef inline void _rhs(double z, cplx* y, cplx* dy, double kappa,
                      int kind, double p0, double p1, double p2) noexcept nogil:
    cdef double g = _gamma(kind, p0, p1, p2, z)
    cdef cplx ik = 1j * kappa
    dy[0] = -g * y[0] - ik * y[2]
    dy[1] = -g * y[1] - ik * y[3]
    dy[2] = -ik * y[0]
    dy[3] = -ik * y[1]


cdef inline double _cabs(cplx x) noexcept nogil:
    return sqrt(x.real * x.real + x.imag * x.imag)


def monodromy_2x2(double kappa, double period, int kind,
                  double p0, double p1, double p2,
                  double rtol=1e-10, double atol=1e-12):
    """Fundamental matrix over one period, starting from the identity.

    kind 0: constant loss p0.  kind 1: modulated loss with amplitude B=p0,
    sharpness beta=p1, frequency omega=p2.
    """
    cdef cplx y[NEQ]
    cdef cplx ytmp[NEQ]
    cdef cplx y5[NEQ]
    cdef cplx k1[NEQ]
    cdef cplx k2[NEQ]
    cdef cplx k3[NEQ]
    cdef cplx k4[NEQ]
    cdef cplx k5[NEQ]
    cdef cplx k6[NEQ]
    cdef cplx k7[NEQ]
    cdef cplx ei
    cdef double z = 0.0, h, err, sc, fac
    cdef long nsteps = 0
    cdef int i
    cdef bint last

    if period < 0.0:
        raise ValueError("period must be non-negative")

    y[0] = 1.0
    y[1] = 0.0
    y[2] = 0.0
    y[3] = 1.0
    if period == 0.0:
        return np.array([[y[0], y[1]], [y[2], y[3]]])

    h = 1e-3 * period
    _rhs(z, y, k1, kappa, kind, p0, p1, p2)

    with nogil:
        while z < period:
            last = False
            if z + h >= period:
                h = period - z
                last = True

            for i in range(NEQ):
                ytmp[i] = y[i] + h * (0.2 * k1[i])
            _rhs(z + 0.2 * h, ytmp, k2, kappa, kind, p0, p1, p2)

            for i in range(NEQ):
                ytmp[i] = y[i] + h * (3.0 / 40.0 * k1[i] + 9.0 / 40.0 * k2[i])
            _rhs(z + 0.3 * h, ytmp, k3, kappa, kind, p0, p1, p2)

            for i in range(NEQ):
                ytmp[i] = y[i] + h * (44.0 / 45.0 * k1[i] - 56.0 / 15.0 * k2[i]
                                      + 32.0 / 9.0 * k3[i])
            _rhs(z + 0.8 * h, ytmp, k4, kappa, kind, p0, p1, p2)

            for i in range(NEQ):
                ytmp[i] = y[i] + h * (19372.0 / 6561.0 * k1[i] - 25360.0 / 2187.0 * k2[i]
                                      + 64448.0 / 6561.0 * k3[i] - 212.0 / 729.0 * k4[i])
            _rhs(z + 8.0 / 9.0 * h, ytmp, k5, kappa, kind, p0, p1, p2)

            for i in range(NEQ):
                ytmp[i] = y[i] + h * (9017.0 / 3168.0 * k1[i] - 355.0 / 33.0 * k2[i]
                                      + 46732.0 / 5247.0 * k3[i] + 49.0 / 176.0 * k4[i]
                                      - 5103.0 / 18656.0 * k5[i])
            _rhs(z + h, ytmp, k6, kappa, kind, p0, p1, p2)

            for i in range(NEQ):
                y5[i] = y[i] + h * (35.0 / 384.0 * k1[i] + 500.0 / 1113.0 * k3[i]
                                    + 125.0 / 192.0 * k4[i] - 2187.0 / 6784.0 * k5[i]
                                    + 11.0 / 84.0 * k6[i])
            _rhs(z + h, y5, k7, kappa, kind, p0, p1, p2)

            err = 0.0
            for i in range(NEQ):
                ei = h * (71.0 / 57600.0 * k1[i] - 71.0 / 16695.0 * k3[i]
                          + 71.0 / 1920.0 * k4[i] - 17253.0 / 339200.0 * k5[i]
                          + 22.0 / 525.0 * k6[i] - 1.0 / 40.0 * k7[i])
                sc = atol + rtol * fmax(_cabs(y[i]), _cabs(y5[i]))
                err += (_cabs(ei) / sc) ** 2
            err = sqrt(err / NEQ)

            if err <= 1.0:
                z = period if last else z + h
                for i in range(NEQ):
                    y[i] = y5[i]
                    k1[i] = k7[i]

            if err == 0.0:
                fac = 10.0
            else:
                fac = fmin(10.0, fmax(0.2, 0.9 * pow(err, -0.2)))
            h *= fac

            if h < 1e-15 * fmax(1.0, period):
                with gil:
                    raise RuntimeError(f"step size underflow at z={z}")
            nsteps += 1
            if nsteps > 50_000_000:
                with gil:
                    raise RuntimeError("step budget exhausted")

    return np.array([[y[0], y[1]], [y[2], y[3]]])
