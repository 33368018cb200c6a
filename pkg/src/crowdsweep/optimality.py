"""Dual certificates for the crowd control problem and their verification.

A candidate (closed-form two-participant solution or a simulated
trajectory under constant controls) is reduced to a list of samples, one per
constant-velocity piece or time step.  Samples with the same set of touching
pairs form a phase on which the adjoint ``q^x`` is constant; it is obtained
from

    lam * a_i = s_i <u_i, q^x_i>                       for every participant,
    <q^x_j - q^x_i, e_ij> = 0                          for pairs with eta_ij > 0,

as the minimal-norm least-squares solution.  The remaining arcs follow by
definition: ``p^x`` is constant and fixed by the terminal condition,
``gamma([t, T]) = q^x(t) - p^x`` and ``p^a = q^a = 0``.

Residuals of the conditions that involve dual quantities are divided by the
size of the certificate, so scaling ``(lam, p, q, gamma, eta)`` by ``c > 0``
never changes a pass/fail outcome.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCertificateError
from .integrator import Trajectory, drift
from .model import Scenario, pairs, perturbation
from .two_body import TwoBodySolution

ETA_EPS = 1e-12
CONTACT_TOL = 1e-6
STATIONARITY_TOL = 1e-8
N_CONDITIONS = 10


@dataclass(frozen=True)
class _Samples:
    scenario: Scenario
    a: np.ndarray
    t0: np.ndarray        # (K,)
    t1: np.ndarray        # (K,)
    x: np.ndarray         # (K, 2n) configuration where constraints are evaluated
    xdot: np.ndarray      # (K, 2n)
    f: np.ndarray         # (K, 2n)
    units: np.ndarray     # (K, n, 2) headings entering f
    eta: np.ndarray       # (K, P)
    dist: np.ndarray      # (K, P)
    grads: np.ndarray     # (K, P, 2n)
    terminal: np.ndarray  # (2n,)
    eta_T: np.ndarray     # (P,)
    plist: list
    contact_tol: float

    @property
    def t_mid(self) -> np.ndarray:
        return 0.5 * (self.t0 + self.t1)

    def active(self, k: int) -> tuple:
        return tuple(c for c in range(len(self.plist)) if self.dist[k, c] <= self.contact_tol)


def _pair_geometry(x, plist, R):
    """Signed distances ``(K, P)`` and gradients ``(K, P, 2n)``; zero gradient for coincident centers."""
    x = np.atleast_2d(x)
    K, dim = x.shape
    dist = np.empty((K, len(plist)))
    grads = np.zeros((K, len(plist), dim))
    for c, (i, j) in enumerate(plist):
        d = x[:, 2 * j : 2 * j + 2] - x[:, 2 * i : 2 * i + 2]
        norm = np.hypot(d[:, 0], d[:, 1])
        dist[:, c] = norm - 2.0 * R
        e = np.divide(d, norm[:, None], out=np.zeros_like(d), where=norm[:, None] > 0)
        grads[:, c, 2 * i : 2 * i + 2] = -e
        grads[:, c, 2 * j : 2 * j + 2] = e
    return dist, grads


def _samples_from_solution(sol: TwoBodySolution) -> _Samples:
    sc = sol.scenario
    if sc is None:
        raise ValueError("solution carries no scenario; pass one to TwoBodySolution.from_dict")
    plist = pairs(2)
    th = sc.initial_angles
    units = np.column_stack((np.cos(th), np.sin(th)))
    segs = [s for s in sol.segments if s.t_end > s.t_start]
    t0 = np.array([s.t_start for s in segs])
    t1 = np.array([s.t_end for s in segs])
    x = np.array([s.state_at(0.5 * (s.t_start + s.t_end)) for s in segs])
    xdot = np.array([s.velocities.reshape(-1) for s in segs])
    f = np.array([perturbation(xi, sol.a, sc.speeds, th) for xi in x])
    eta = np.array([[s.eta12] for s in segs])
    dist, grads = _pair_geometry(x, plist, sc.R)
    terminal = sol.terminal
    return _Samples(sc, sol.a, t0, t1, x, xdot, f, np.repeat(units[None], len(segs), axis=0),
                    eta, dist, grads, terminal, np.array([segs[-1].eta12]), plist, CONTACT_TOL)


def _samples_from_trajectory(traj: Trajectory) -> _Samples:
    sc = traj.scenario
    h = traj.h
    prev, nxt = traj.states[:-1], traj.states[1:]
    f = np.array([drift(xk, traj.controls, sc, traj.frozen_angles) for xk in prev])
    speeds_a = sc.speeds * traj.controls
    units = np.zeros((len(prev), sc.n, 2))
    blocks = f.reshape(len(prev), sc.n, 2)
    nz = speeds_a != 0
    units[:, nz, :] = blocks[:, nz, :] / speeds_a[nz][None, :, None]
    if not traj.frozen_angles:
        # zero controls leave f silent about the heading; recover it from the position
        pos = prev.reshape(len(prev), sc.n, 2)
        norm = np.linalg.norm(pos, axis=2, keepdims=True)
        aimed = np.divide(pos, norm, out=np.zeros_like(pos), where=norm > 0)
        units[:, ~nz, :] = aimed[:, ~nz, :]
    else:
        th = sc.initial_angles
        units[:, ~nz, :] = np.column_stack((np.cos(th), np.sin(th)))[~nz][None]
    dist, grads = _pair_geometry(nxt, traj.pairs, sc.R)
    return _Samples(sc, traj.controls, traj.times[:-1], traj.times[1:], nxt, (nxt - prev) / h, f,
                    units, traj.eta[1:], dist, grads, traj.terminal, traj.eta[-1], traj.pairs,
                    traj.contact_tol)


def _samples(solution) -> _Samples:
    if isinstance(solution, TwoBodySolution):
        return _samples_from_solution(solution)
    if isinstance(solution, Trajectory):
        return _samples_from_trajectory(solution)
    raise TypeError(f"cannot certify a {type(solution).__name__}")


def _phases(smp: _Samples) -> list[tuple[int, int, tuple]]:
    """Maximal runs ``[k0, k1)`` of samples with the same touching pairs."""
    out = []
    k0 = 0
    key = smp.active(0)
    for k in range(1, len(smp.t0)):
        nk = smp.active(k)
        if nk != key:
            out.append((k0, k, key))
            k0, key = k, nk
    out.append((k0, len(smp.t0), key))
    return out


def _stationarity_system(smp: _Samples, k0: int, k1: int, lam: float):
    n = smp.scenario.n
    s = smp.scenario.speeds
    rows, rhs = [], []
    for k in range(k0, k1):
        for i in range(n):
            r = np.zeros(2 * n)
            r[2 * i : 2 * i + 2] = s[i] * smp.units[k, i]
            rows.append(r)
            rhs.append(lam * smp.a[i])
        for c in range(len(smp.plist)):
            if smp.eta[k, c] > ETA_EPS:
                rows.append(smp.grads[k, c])
                rhs.append(0.0)
    A = np.unique(np.column_stack((np.array(rows), np.array(rhs))), axis=0)
    return A[:, :-1], A[:, -1]


@dataclass
class DualCertificate:
    """Multiplier ``lam``, adjoint arcs and the tail of the measure ``gamma``.

    ``q_x`` and ``gamma_tail`` are piecewise constant: row ``r`` holds their
    value on ``[phase_start[r], phase_start[r + 1])`` (the last row up to
    ``T`` inclusive).
    """

    lam: float
    phase_start: np.ndarray
    q_x: np.ndarray
    p_x: np.ndarray
    gamma_tail: np.ndarray
    eta_T: dict
    w: tuple
    v: tuple
    p_a: np.ndarray
    q_a: np.ndarray
    stationarity_residual: float = 0.0
    phase_active: list = field(default_factory=list)

    def _row(self, t: float) -> int:
        return max(int(np.searchsorted(self.phase_start, t, side="right")) - 1, 0)

    def q_at(self, t: float) -> np.ndarray:
        return self.q_x[self._row(t)]

    def gamma_at(self, t: float) -> np.ndarray:
        return self.gamma_tail[self._row(t)]

    def q_differences(self, t: float = None) -> np.ndarray:
        """``q_i2 - q_i1`` per participant, at ``t`` (default: the last phase)."""
        q = self.q_x[-1] if t is None else self.q_at(t)
        blocks = q.reshape(-1, 2)
        return blocks[:, 1] - blocks[:, 0]

    @property
    def scale(self) -> float:
        sizes = [self.lam, np.abs(self.p_x).max(initial=0.0), np.abs(self.q_x).max(initial=0.0),
                 np.abs(self.gamma_tail).max(initial=0.0), max(self.eta_T.values(), default=0.0)]
        s = max(sizes)
        return s if s > 0 else 1.0

    def scaled(self, c: float) -> "DualCertificate":
        if not c > 0:
            raise ValueError("scale factor must be positive")
        return DualCertificate(
            self.lam * c, self.phase_start.copy(), self.q_x * c, self.p_x * c,
            self.gamma_tail * c, {p: v * c for p, v in self.eta_T.items()},
            self.w, self.v, self.p_a * c, self.q_a * c,
            self.stationarity_residual * c, list(self.phase_active),
        )

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "phase_start": self.phase_start.tolist(),
            "q_x": self.q_x.tolist(),
            "p_x": self.p_x.tolist(),
            "gamma_tail": self.gamma_tail.tolist(),
            "eta_T": [{"pair": [i + 1, j + 1], "eta": v} for (i, j), v in self.eta_T.items()],
            "p_a": self.p_a.tolist(),
            "q_a": self.q_a.tolist(),
            "stationarity_residual": self.stationarity_residual,
        }


def transversality_residual(p_x, lam: float, terminal, eta_T: dict) -> float:
    """Max-norm of ``p^x(T) + lam x(T) - sum eta_ij(T) grad D_ij(x(T))``."""
    terminal = np.asarray(terminal, dtype=float)
    n = terminal.size // 2
    plist = pairs(n)
    _, grads = _pair_geometry(terminal, plist, 0.0)
    rhs = sum((eta_T.get(p, 0.0) * grads[0, c] for c, p in enumerate(plist)), np.zeros(2 * n))
    return float(np.abs(np.asarray(p_x, dtype=float) + lam * terminal - rhs).max())


def reconstruct_duals(solution, lam: float = 1.0, *, strict: bool = True) -> DualCertificate:
    """Build a certificate for ``solution`` with normalization ``lam``.

    Parameters
    ----------
    solution : TwoBodySolution or Trajectory
    lam : float
        Cost multiplier; ``1`` for the normal form, ``0`` to probe the
        abnormal case.
    strict : bool
        Raise when the stationarity system of some phase has no solution.
        With ``strict=False`` the least-squares ``q^x`` is kept and the
        defect is left for :func:`verify` to report.

    Raises
    ------
    NoCertificateError
        ``strict`` and a phase's system is inconsistent beyond tolerance.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    smp = _samples(solution)
    n = smp.scenario.n
    phases = _phases(smp)
    q_rows, worst = [], 0.0
    for k0, k1, _ in phases:
        A, b = _stationarity_system(smp, k0, k1, lam)
        q = np.linalg.lstsq(A, b, rcond=None)[0]
        res = float(np.abs(A @ q - b).max()) / max(1.0, float(np.abs(b).max()))
        worst = max(worst, res)
        q_rows.append(q)
    if strict and worst > STATIONARITY_TOL:
        raise NoCertificateError("controls violate adjoint stationarity", worst)
    q_x = np.array(q_rows)
    eta_T = {p: float(smp.eta_T[c]) for c, p in enumerate(smp.plist)}
    _, gT = _pair_geometry(smp.terminal, smp.plist, smp.scenario.R)
    p_x = -lam * smp.terminal + sum((eta_T[p] * gT[0, c] for c, p in enumerate(smp.plist)),
                                    np.zeros(2 * n))
    return DualCertificate(
        lam=float(lam),
        phase_start=np.array([smp.t0[k0] for k0, _, _ in phases]),
        q_x=q_x,
        p_x=p_x,
        gamma_tail=q_x - p_x[None, :],
        eta_T=eta_T,
        w=(np.zeros(2 * n), smp.a.copy()),
        v=(np.zeros(2 * n), np.zeros(n)),
        p_a=np.zeros(n),
        q_a=np.zeros(n),
        stationarity_residual=worst,
        phase_active=[tuple(smp.plist[c] for c in key) for _, _, key in phases],
    )


@dataclass(frozen=True)
class ConditionResult:
    id: int
    residual: float
    passed: bool

    def to_dict(self) -> dict:
        return {"id": self.id, "residual": self.residual, "pass": self.passed}


@dataclass(frozen=True)
class VerificationReport:
    conditions: list
    tol: float

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.conditions)

    def condition(self, cid: int) -> ConditionResult:
        return self.conditions[cid - 1]

    @property
    def failed(self) -> list[int]:
        return [c.id for c in self.conditions if not c.passed]

    def to_dict(self) -> dict:
        return {"conditions": [c.to_dict() for c in self.conditions],
                "overall": self.overall, "tol": self.tol}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _residuals(smp: _Samples, cert: DualCertificate) -> list[float]:
    n = smp.scenario.n
    s = smp.scenario.speeds
    K = len(smp.t0)
    sigma = cert.scale
    lam = cert.lam
    q = np.array([cert.q_at(t) for t in smp.t_mid])
    gamma = np.array([cert.gamma_at(t) for t in smp.t_mid])
    res = [0.0] * (N_CONDITIONS + 1)

    wx, wa = cert.w
    vx, va = cert.v
    res[1] = float(max(np.abs(wx).max(), np.abs(np.asarray(wa) - smp.a).max(),
                       np.abs(vx).max(), np.abs(va).max()))

    normal = np.einsum("kp,kpd->kd", smp.eta, smp.grads)
    res[2] = float(np.abs(smp.xdot + smp.f - normal).max())

    inactive = smp.dist > smp.contact_tol
    res[3] = float(np.where(inactive, np.abs(smp.eta), 0.0).max(initial=0.0))

    ortho = np.einsum("kpd,kd->kp", smp.grads, q)
    res[4] = float(np.where(smp.eta > ETA_EPS, np.abs(ortho), 0.0).max(initial=0.0)) / sigma

    proj = np.einsum("kid,kid->ki", smp.units, q.reshape(K, n, 2)) * s[None, :]
    res[5] = float(np.abs(lam * smp.a[None, :] - proj).max()) / sigma

    r6 = float(np.abs(q - cert.p_x[None, :] - gamma).max())
    # gamma puts no mass where every pair is apart
    free = np.all(inactive, axis=1)
    k = 0
    while k < K:
        if free[k]:
            k1 = k
            while k1 + 1 < K and free[k1 + 1]:
                k1 += 1
            r6 = max(r6, float(np.abs(gamma[k : k1 + 1] - gamma[k]).max()))
            k = k1 + 1
        else:
            k += 1
    res[6] = r6 / sigma

    res[7] = float(max(np.abs(cert.q_a).max(initial=0.0), np.abs(cert.p_a).max(initial=0.0))) / sigma
    res[8] = transversality_residual(cert.p_x, lam, smp.terminal, cert.eta_T) / sigma
    res[9] = float(np.abs(cert.p_a).max(initial=0.0)) / sigma
    res[10] = 0.0 if lam + float(np.linalg.norm(cert.p_x)) > 0 else 1.0
    return res[1:]


def verify(solution, cert: DualCertificate, tol: float = 1e-6) -> VerificationReport:
    """Check the ten necessary conditions for ``solution`` against ``cert``.

    Conditions 1-3 are absolute residuals of the primal data; 4-9 are
    relative to the certificate size; 10 is ``0`` when ``lam + |p^x| > 0`` and
    ``1`` otherwise.  Failures are reported, never raised.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    res = _residuals(_samples(solution), cert)
    conds = [ConditionResult(i + 1, r, bool(r <= tol) and math.isfinite(r)) for i, r in enumerate(res)]
    return VerificationReport(conds, float(tol))
