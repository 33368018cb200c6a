"""Backend selection for the batched catching-up kernel.

The compiled extension ``_ckernels`` is used when it was built; otherwise
the numpy implementation in ``_pykernels`` takes over.  ``BACKEND`` names
the active one.
"""

import numpy as np

from . import _pykernels
from .errors import DegenerateGeometryError, ProjectionError

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

BACKEND = "cython" if _ckernels is not None else "python"


def batch_terminal_states(x0, speeds, units0, controls, h, steps, R, *,
                          frozen=True, tol=1e-10, max_iter=100, backend=None):
    """Terminal configurations of the catching-up scheme for many control rows.

    Parameters
    ----------
    x0 : array_like, shape (2n,)
        Initial configuration.
    speeds : array_like, shape (n,)
    units0 : array_like, shape (n, 2)
        Initial unit directions; used for every step when ``frozen``.
    controls : array_like, shape (m, n)
        One constant control vector per row.
    h : float
        Step size.
    steps : int
        Number of steps.
    R : float
        Disk radius.

    Returns
    -------
    numpy.ndarray, shape (m, 2n)
    """
    impl = BACKENDS[backend or BACKEND]
    x0 = np.ascontiguousarray(x0, dtype=float)
    speeds = np.ascontiguousarray(speeds, dtype=float)
    units0 = np.ascontiguousarray(units0, dtype=float).reshape(-1, 2)
    controls = np.ascontiguousarray(np.atleast_2d(controls), dtype=float)
    m = controls.shape[0]
    out = np.empty((m, x0.size))
    status = np.zeros(m, dtype=np.intc)
    violation = np.zeros(m)
    impl.terminal_states(x0, speeds, units0, controls, float(h), int(steps), float(R),
                         bool(frozen), float(tol), int(max_iter), out, status, violation)
    if np.any(status == 1):
        row = int(np.nonzero(status == 1)[0][0])
        raise DegenerateGeometryError(f"coincident centers in a violated pair (control row {row})")
    if np.any(status == 2):
        row = int(np.nonzero(status == 2)[0][0])
        raise ProjectionError(f"projection did not converge (control row {row})", float(violation[row]))
    return out
