# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled catching-up kernels.

Mirrors ``_pykernels`` operation for operation so that both backends agree
to rounding.
"""

from libc.math cimport sqrt


cdef int _project(double* x, int n, double R, double tol, int max_iter,
                  double* viol) noexcept nogil:
    # 0: converged, 1: coincident centers in a violated pair, 2: iteration limit
    cdef int it = 0, i, j
    cdef double dx, dy, dist, k, worst, two_r = 2.0 * R
    while True:
        worst = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                dx = x[2 * j] - x[2 * i]
                dy = x[2 * j + 1] - x[2 * i + 1]
                dist = sqrt(dx * dx + dy * dy) - two_r
                if dist < worst:
                    worst = dist
        viol[0] = -worst
        if worst >= -tol:
            return 0
        if it >= max_iter:
            return 2
        it += 1
        for i in range(n):
            for j in range(i + 1, n):
                dx = x[2 * j] - x[2 * i]
                dy = x[2 * j + 1] - x[2 * i + 1]
                dist = sqrt(dx * dx + dy * dy)
                if dist < two_r:
                    if dist == 0.0:
                        return 1
                    k = 0.5 * (two_r - dist) / dist
                    x[2 * i] -= k * dx
                    x[2 * i + 1] -= k * dy
                    x[2 * j] += k * dx
                    x[2 * j + 1] += k * dy


def terminal_states(const double[::1] x0, const double[::1] speeds,
                    const double[:, ::1] units0, const double[:, ::1] controls,
                    double h, long steps, double R, bint frozen, double tol,
                    int max_iter, double[:, ::1] out, int[::1] status,
                    double[::1] violation):
    """Run the catching-up scheme for every control row; write terminal states into ``out``."""
    cdef Py_ssize_t m = controls.shape[0], r
    cdef int n = speeds.shape[0], i, code
    cdef long k
    cdef double sa, norm, ux, uy, viol = 0.0
    cdef double* x
    with nogil:
        for r in range(m):
            x = &out[r, 0]
            for i in range(2 * n):
                x[i] = x0[i]
            status[r] = 0
            violation[r] = 0.0
            for k in range(steps):
                for i in range(n):
                    sa = speeds[i] * controls[r, i]
                    if frozen:
                        ux = units0[i, 0]
                        uy = units0[i, 1]
                    else:
                        norm = sqrt(x[2 * i] * x[2 * i] + x[2 * i + 1] * x[2 * i + 1])
                        if norm == 0.0:
                            ux = 0.0
                            uy = 0.0
                        else:
                            ux = x[2 * i] / norm
                            uy = x[2 * i + 1] / norm
                    x[2 * i] = x[2 * i] - h * (sa * ux)
                    x[2 * i + 1] = x[2 * i + 1] - h * (sa * uy)
                code = _project(x, n, R, tol, max_iter, &viol)
                if code != 0:
                    status[r] = code
                    violation[r] = viol
                    break
