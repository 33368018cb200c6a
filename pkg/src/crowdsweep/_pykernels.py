"""Pure-numpy fallback for the compiled catching-up kernels.

Vectorized over control rows; the per-pair arithmetic matches
``_ckernels.pyx`` exactly.
"""

import numpy as np


def _project_batch(x, n, R, tol, max_iter, status, violation, live):
    two_r = 2.0 * R
    it = 0
    while True:
        worst = np.zeros(x.shape[0])
        for i in range(n):
            for j in range(i + 1, n):
                dx = x[:, 2 * j] - x[:, 2 * i]
                dy = x[:, 2 * j + 1] - x[:, 2 * i + 1]
                np.minimum(worst, np.sqrt(dx * dx + dy * dy) - two_r, out=worst)
        todo = live & (worst < -tol)
        if not todo.any():
            return
        if it >= max_iter:
            status[todo] = 2
            violation[todo] = -worst[todo]
            live &= ~todo
            return
        it += 1
        for i in range(n):
            for j in range(i + 1, n):
                dx = x[:, 2 * j] - x[:, 2 * i]
                dy = x[:, 2 * j + 1] - x[:, 2 * i + 1]
                dist = np.sqrt(dx * dx + dy * dy)
                hit = todo & (dist < two_r)
                if not hit.any():
                    continue
                bad = hit & (dist == 0.0)
                if bad.any():
                    status[bad] = 1
                    live &= ~bad
                    todo &= ~bad
                    hit &= ~bad
                idx = np.nonzero(hit)[0]
                k = 0.5 * (two_r - dist[idx]) / dist[idx]
                x[idx, 2 * i] -= k * dx[idx]
                x[idx, 2 * i + 1] -= k * dy[idx]
                x[idx, 2 * j] += k * dx[idx]
                x[idx, 2 * j + 1] += k * dy[idx]


def terminal_states(x0, speeds, units0, controls, h, steps, R, frozen, tol,
                    max_iter, out, status, violation):
    """Same contract as the compiled ``terminal_states``.

    Rows whose projection fails keep their status and violation; their
    output state is unspecified.
    """
    n = speeds.shape[0]
    m = controls.shape[0]
    out[:] = x0[None, :]
    status[:] = 0
    violation[:] = 0.0
    live = np.ones(m, dtype=bool)
    sa = speeds[None, :] * controls
    for _ in range(steps):
        for i in range(n):
            xi = out[:, 2 * i]
            yi = out[:, 2 * i + 1]
            if frozen:
                ux = units0[i, 0]
                uy = units0[i, 1]
            else:
                norm = np.sqrt(xi * xi + yi * yi)
                safe = np.where(norm == 0.0, 1.0, norm)
                ux = np.where(norm == 0.0, 0.0, xi / safe)
                uy = np.where(norm == 0.0, 0.0, yi / safe)
            step_x = h * (sa[:, i] * ux)
            step_y = h * (sa[:, i] * uy)
            out[:, 2 * i] = xi - step_x
            out[:, 2 * i + 1] = yi - step_y
        _project_batch(out, n, R, tol, max_iter, status, violation, live)
        if not live.any():
            break
