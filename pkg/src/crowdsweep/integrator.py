"""Catching-up time stepping for the crowd sweeping process.

One step drifts the configuration with the free-motion velocity ``-f`` and
projects the result back onto the feasible set.  The contact multipliers
``eta_ij`` are recovered afterwards from the realized displacement by a
nonnegative least-squares fit on the pairs that are in contact at the end
of the step.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import DegenerateGeometryError, ProjectionError
from .model import (
    Scenario,
    direction_angle,
    normal_generators,
    pairs,
    perturbation,
)

PROJECTION_TOL = 1e-10
PROJECTION_MAX_ITER = 100
CONTACT_TOL = 1e-6


@dataclass(frozen=True)
class ContactEvent:
    """First grid time at which the pair ``(i, j)`` touches.

    ``theta_contact`` is the direction angle of ``x_i - x_j`` at that time;
    ``prev_change`` / ``next_change`` are the neighbouring contact times of
    any pair (``0`` and ``T`` when there is none).
    """

    pair: tuple[int, int]
    t_contact: float
    theta_contact: float
    next_change: float
    prev_change: float

    def direction_indicator(self, t: float) -> np.ndarray:
        """Unit vector ``d_ij(t)`` while the contact persists, zero otherwise."""
        if self.t_contact <= t < self.next_change:
            return np.array([math.cos(self.theta_contact), math.sin(self.theta_contact)])
        return np.zeros(2)


@dataclass(frozen=True)
class MultiplierFit:
    eta: dict
    residual: float
    ill_conditioned: bool = False


@dataclass
class Trajectory:
    """Gridded solution of the sweeping process under constant controls.

    ``eta[k]`` holds the multipliers paired with ``states[k]``: for ``k >= 1``
    they come from the step ending at ``t_k``; row 0 repeats the first step's
    values for pairs already in contact at ``t = 0``.
    """

    scenario: Scenario
    controls: np.ndarray
    times: np.ndarray
    states: np.ndarray
    eta: np.ndarray
    pairs: list
    residuals: np.ndarray
    events: list
    frozen_angles: bool = False
    contact_tol: float = CONTACT_TOL
    flagged_steps: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def h(self) -> float:
        return self.scenario.T / self.steps

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def multipliers(self, k: int) -> dict:
        return {p: float(v) for p, v in zip(self.pairs, self.eta[k])}

    def signed_distances(self) -> np.ndarray:
        """Array of shape ``(N + 1, P)`` with ``D_ij`` at every grid point."""
        return _pair_distances(self.states, self.pairs, self.scenario.R)

    def to_csv(self, fh=None) -> str | None:
        """Write ``t,x1_1,x1_2,...,eta_1_2,...`` rows; return the text when ``fh`` is None."""
        sink = io.StringIO() if fh is None else fh
        writer = csv.writer(sink, lineterminator="\n")
        n = self.scenario.n
        header = ["t"]
        for i in range(n):
            header += [f"x{i + 1}_1", f"x{i + 1}_2"]
        header += [f"eta_{i + 1}_{j + 1}" for i, j in self.pairs]
        writer.writerow(header)
        for t, x, e in zip(self.times, self.states, self.eta):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in e])
        return sink.getvalue() if fh is None else None


def read_trajectory_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, list]:
    """Parse trajectory CSV text into ``(times, states, eta, pair labels)``."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body])
    nx = sum(1 for h in header if h.startswith("x"))
    labels = [h for h in header if h.startswith("eta_")]
    return data[:, 0], data[:, 1 : 1 + nx], data[:, 1 + nx :], labels


def _pair_distances(states, plist, R):
    states = np.atleast_2d(states)
    out = np.empty((states.shape[0], len(plist)))
    for c, (i, j) in enumerate(plist):
        dx = states[:, 2 * j] - states[:, 2 * i]
        dy = states[:, 2 * j + 1] - states[:, 2 * i + 1]
        out[:, c] = np.hypot(dx, dy) - 2.0 * R
    return out


def project_feasible(point, R: float, tol: float = PROJECTION_TOL,
                     max_iter: int = PROJECTION_MAX_ITER) -> np.ndarray:
    """Push overlapping disks apart until every ``D_ij >= -tol``.

    Each pass visits the pairs in lexicographic order and moves both centers
    of an overlapping pair symmetrically along their center line until they
    touch.  A single overlapping pair is thereby projected exactly.

    Raises
    ------
    DegenerateGeometryError
        An overlapping pair has coincident centers.
    ProjectionError
        ``max_iter`` passes did not reach the tolerance.
    """
    if tol <= 0:
        raise ValueError("projection tolerance must be positive")
    x = np.array(point, dtype=float)
    n = x.size // 2
    two_r = 2.0 * R
    plist = pairs(n)
    it = 0
    while True:
        worst = 0.0
        for i, j in plist:
            dx = x[2 * j] - x[2 * i]
            dy = x[2 * j + 1] - x[2 * i + 1]
            worst = min(worst, math.sqrt(dx * dx + dy * dy) - two_r)
        if worst >= -tol:
            return x
        if it >= max_iter:
            raise ProjectionError(f"cyclic projection stalled after {max_iter} passes", -worst)
        it += 1
        for i, j in plist:
            dx = x[2 * j] - x[2 * i]
            dy = x[2 * j + 1] - x[2 * i + 1]
            dist = math.sqrt(dx * dx + dy * dy)
            if dist < two_r:
                if dist == 0.0:
                    raise DegenerateGeometryError(f"participants {i} and {j} overlap with coincident centers")
                k = 0.5 * (two_r - dist) / dist
                x[2 * i] -= k * dx
                x[2 * i + 1] -= k * dy
                x[2 * j] += k * dx
                x[2 * j + 1] += k * dy


def drift(x, a, scenario: Scenario, frozen_angles: bool = False) -> np.ndarray:
    """Perturbation ``f(x, a)`` with angles frozen at ``t = 0`` or re-aimed at the exit.

    A participant standing exactly on the exit contributes no drift.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    if frozen_angles:
        return perturbation(x, a, scenario.speeds, scenario.initial_angles)
    angles = np.zeros(scenario.n)
    eff = a.copy()
    for i in range(scenario.n):
        try:
            angles[i] = direction_angle(x[2 * i : 2 * i + 2])
        except DegenerateGeometryError:
            eff[i] = 0.0
    return perturbation(x, eff, scenario.speeds, angles)


def catching_up_step(x, a, h: float, scenario: Scenario, *, frozen_angles: bool = False,
                     tol: float = PROJECTION_TOL, max_iter: int = PROJECTION_MAX_ITER) -> np.ndarray:
    """``x_next = proj_Q(x - h f(x, a))``."""
    if h <= 0:
        raise ValueError("step size must be positive")
    x = np.asarray(x, dtype=float)
    y = x - h * drift(x, a, scenario, frozen_angles)
    return project_feasible(y, scenario.R, tol, max_iter)


def fit_multipliers(x_prev, x_next, f_prev, h: float, R: float,
                    contact_tol: float = CONTACT_TOL) -> MultiplierFit:
    """Nonnegative ``eta`` with ``(x_next - x_prev)/h + f_prev ~ sum eta_ij grad D_ij(x_next)``.

    Only pairs with ``D_ij(x_next) <= contact_tol`` enter the fit.  When their
    gradients are (nearly) linearly dependent the fit is flagged and the
    minimal-norm least-squares solution is used if it is nonnegative.
    """
    b = (np.asarray(x_next) - np.asarray(x_prev)) / h + np.asarray(f_prev)
    act, G = normal_generators(x_next, R, contact_tol)
    if not act:
        return MultiplierFit({}, float(np.linalg.norm(b)))
    eta, rnorm = nnls(G, b)
    flagged = False
    if len(act) > 1:
        sv = np.linalg.svd(G, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            flagged = True
            mn = np.linalg.lstsq(G, b, rcond=None)[0]
            if np.all(mn >= -1e-12):
                mn = np.clip(mn, 0.0, None)
                r_mn = float(np.linalg.norm(G @ mn - b))
                if r_mn <= rnorm + 1e-12:
                    eta, rnorm = mn, r_mn
    return MultiplierFit({p: float(v) for p, v in zip(act, eta)}, float(rnorm), flagged)


def recover_eta(traj: Trajectory, k: int) -> MultiplierFit:
    """Multipliers of the step from ``t_k`` to ``t_{k+1}`` (``0 <= k < N``)."""
    if not 0 <= k < traj.steps:
        raise IndexError(f"step index {k} outside [0, {traj.steps})")
    x_prev, x_next = traj.states[k], traj.states[k + 1]
    f_prev = drift(x_prev, traj.controls, traj.scenario, traj.frozen_angles)
    return fit_multipliers(x_prev, x_next, f_prev, traj.h, traj.scenario.R, traj.contact_tol)


def _contact_events(times, dist, plist, states, contact_tol, T):
    first = {}
    for c, p in enumerate(plist):
        hit = np.nonzero(dist[:, c] <= contact_tol)[0]
        if hit.size:
            first[p] = int(hit[0])
    all_t = sorted({float(times[k]) for k in first.values()})
    events = []
    for p, k in sorted(first.items(), key=lambda item: (item[1], item[0])):
        t = float(times[k])
        later = [s for s in all_t if s > t]
        earlier = [s for s in all_t if s < t]
        nxt = later[0] if later else (T if t < T else math.inf)
        prv = earlier[-1] if earlier else 0.0
        i, j = p
        rel = states[k, 2 * i : 2 * i + 2] - states[k, 2 * j : 2 * j + 2]
        events.append(ContactEvent(p, t, direction_angle(rel), nxt, prv))
    return events


def simulate(scenario: Scenario, a, steps: int, *, frozen_angles: bool = False,
             contact_tol: float = CONTACT_TOL, tol: float = PROJECTION_TOL,
             max_iter: int = PROJECTION_MAX_ITER) -> Trajectory:
    """Run the catching-up scheme with ``steps`` uniform steps on ``[0, T]``.

    Parameters
    ----------
    scenario : Scenario
    a : array_like, shape (n,)
        Constant controls, checked against the scenario bounds.
    steps : int
        Number of steps ``N``; the step size is ``T / N``.
    frozen_angles : bool
        Keep every participant's heading at its initial angle instead of
        re-aiming at the exit after each step.

    Returns
    -------
    Trajectory
    """
    if steps < 1:
        raise ValueError("need at least one step")
    a = scenario.check_controls(a)
    h = scenario.T / steps
    n = scenario.n
    plist = pairs(n)
    states = np.empty((steps + 1, 2 * n))
    states[0] = scenario.x0
    eta = np.zeros((steps + 1, len(plist)))
    residuals = np.zeros(steps)
    flagged = []
    col = {p: c for c, p in enumerate(plist)}
    x = states[0]
    for k in range(steps):
        f = drift(x, a, scenario, frozen_angles)
        x_next = project_feasible(x - h * f, scenario.R, tol, max_iter)
        fit = fit_multipliers(x, x_next, f, h, scenario.R, contact_tol)
        for p, v in fit.eta.items():
            eta[k + 1, col[p]] = v
        residuals[k] = fit.residual
        if fit.ill_conditioned:
            flagged.append(k)
        states[k + 1] = x_next
        x = x_next
    times = np.arange(steps + 1) * h
    dist = _pair_distances(states, plist, scenario.R)
    eta[0] = np.where(dist[0] <= contact_tol, eta[1], 0.0)
    events = _contact_events(times, dist, plist, states, contact_tol, scenario.T)
    return Trajectory(
        scenario=scenario,
        controls=a,
        times=times,
        states=states,
        eta=eta,
        pairs=plist,
        residuals=residuals,
        events=events,
        frozen_angles=frozen_angles,
        contact_tol=contact_tol,
        flagged_steps=flagged,
    )
