"""Closed-form optimal control of the crowd model with two participants.

Headings are frozen at their initial angles.  Before contact each
participant moves with its free velocity ``-s_i a_i u_i``; once the disks
touch (head-on, along their initial center line) both move with the common
velocity and the contact multiplier ``eta12`` stays constant until ``T``.

:func:`optimize` enumerates three branches (no contact, contact with a
positive multiplier, initial contact with a vanishing multiplier), minimizes
the cost on each, and returns the cheapest feasible one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InconsistentSolutionError, NoFeasibleBranchError, NoRatioError, ScenarioError
from .model import Scenario, cost, direction_angle

NO_CONTACT = "no-contact"
CONTACT = "contact-positive-eta"
INITIAL_CONTACT = "initial-contact-zero-eta"
BRANCHES = (NO_CONTACT, CONTACT, INITIAL_CONTACT)

GEOM_TOL = 1e-9


@dataclass(frozen=True)
class Segment:
    """Constant-velocity piece ``x_i(t) = positions[i] + (t - t_start) velocities[i]``."""

    t_start: float
    t_end: float
    positions: np.ndarray
    velocities: np.ndarray
    eta12: float = 0.0

    def state_at(self, t: float) -> np.ndarray:
        return (self.positions + (t - self.t_start) * self.velocities).reshape(-1)

    def to_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "positions": self.positions.tolist(),
            "velocities": self.velocities.tolist(),
            "eta12": self.eta12,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        return cls(
            float(d["t_start"]),
            float(d["t_end"]),
            np.array(d["positions"], dtype=float).reshape(2, 2),
            np.array(d["velocities"], dtype=float).reshape(2, 2),
            float(d.get("eta12", 0.0)),
        )


@dataclass(frozen=True)
class BranchCandidate:
    branch: str
    a: tuple[float, float] | None
    J: float | None
    feasible: bool
    reason: str = ""

    def __post_init__(self):
        if self.a is not None:
            object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if self.J is not None:
            object.__setattr__(self, "J", float(self.J))

    def to_dict(self) -> dict:
        return {"branch": self.branch, "a": list(self.a) if self.a else None,
                "J": self.J, "feasible": self.feasible, "reason": self.reason}


@dataclass
class TwoBodySolution:
    a1: float
    a2: float
    t12: float
    eta12: float
    theta21: float
    branch: str
    J: float
    segments: list
    candidates: list = field(default_factory=list)
    scenario: Scenario | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("a1", "a2", "t12", "eta12", "theta21", "J"):
            setattr(self, name, float(getattr(self, name)))

    @property
    def a(self) -> np.ndarray:
        return np.array([self.a1, self.a2])

    @property
    def in_contact(self) -> bool:
        return math.isfinite(self.t12)

    def state_at(self, t: float) -> np.ndarray:
        for seg in self.segments:
            if seg.t_start <= t < seg.t_end:
                return seg.state_at(t)
        return self.segments[-1].state_at(t)

    @property
    def terminal(self) -> np.ndarray:
        last = self.segments[-1]
        return last.state_at(last.t_end)

    def candidate(self, branch: str) -> BranchCandidate | None:
        return next((c for c in self.candidates if c.branch == branch), None)

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "a": [self.a1, self.a2],
            "t12": self.t12 if math.isfinite(self.t12) else None,
            "eta12": self.eta12,
            "theta21": self.theta21,
            "J": self.J,
            "segments": [s.to_dict() for s in self.segments],
            "candidates": [c.to_dict() for c in self.candidates],
        }

    @classmethod
    def from_dict(cls, d: dict, scenario: Scenario | None = None) -> "TwoBodySolution":
        try:
            a1, a2 = (float(v) for v in d["a"])
            t12 = math.inf if d["t12"] is None else float(d["t12"])
            return cls(
                a1=a1,
                a2=a2,
                t12=t12,
                eta12=float(d["eta12"]),
                theta21=float(d["theta21"]),
                branch=str(d["branch"]),
                J=float(d["J"]),
                segments=[Segment.from_dict(s) for s in d["segments"]],
                candidates=[BranchCandidate(c["branch"], tuple(c["a"]) if c["a"] else None,
                                            c["J"], c["feasible"], c.get("reason", ""))
                            for c in d.get("candidates", [])],
                scenario=scenario,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"malformed solution: {exc}") from None


def _unit(v):
    v = np.asarray(v, dtype=float)
    norm = math.hypot(v[0], v[1])
    if norm == 0.0:
        raise ValueError("zero vector has no direction")
    return v / norm


def contact_direction(x1_0, x2_0) -> tuple[float, float]:
    """``(cos theta21, sin theta21)``: unit vector from participant 1 toward participant 2."""
    d = np.asarray(x2_0, dtype=float) - np.asarray(x1_0, dtype=float)
    norm = math.hypot(d[0], d[1])
    if norm == 0.0:
        raise InconsistentSolutionError("coincident initial centers have no contact direction")
    return float(d[0] / norm), float(d[1] / norm)


def eta_from_controls(s1, a1, s2, a2, th1, th2) -> float:
    """Half the norm of the difference of the two free velocities."""
    rad = s1 * s1 * a1 * a1 + s2 * s2 * a2 * a2 - 2.0 * s1 * s2 * a1 * a2 * math.cos(th1 - th2)
    if rad < -1e-12 * max(1.0, (s1 * a1) ** 2 + (s2 * a2) ** 2):
        raise ArithmeticError(f"negative radicand {rad} in contact multiplier")
    return 0.5 * math.sqrt(max(rad, 0.0))


def control_ratio(s1, s2, th1, th2, th21, tol: float = GEOM_TOL) -> float:
    """Ratio ``a2 / a1`` for which the free relative velocity is parallel to the contact line.

    From ``s2 a2 sin(th21 - th2) = s1 a1 sin(th21 - th1)``.  When both
    headings lie on the contact line and agree, that relation is void and
    stationarity gives ``s2 a1 = s1 a2`` instead.
    """
    den = s2 * math.sin(th21 - th2)
    num = s1 * math.sin(th21 - th1)
    if abs(den) > tol:
        return num / den
    if abs(num) <= tol and math.cos(th1 - th2) > 0 and s1 > 0:
        return s2 / s1
    raise NoRatioError(
        f"contact geometry leaves a2/a1 undetermined (s1={s1}, s2={s2}, "
        f"th1={th1:.6g}, th2={th2:.6g}, th21={th21:.6g})"
    )


def contact_time(x1_0, x2_0, R: float, eta12: float) -> float:
    """First contact time from ``t12 * eta12 = (|x2(0) - x1(0)| - 2R) / 2``; ``inf`` if never."""
    gap = math.dist(tuple(x1_0), tuple(x2_0)) - 2.0 * R
    if gap < -GEOM_TOL:
        raise InconsistentSolutionError("initial configuration overlaps")
    if gap <= GEOM_TOL:
        return 0.0
    if eta12 <= 0.0:
        return math.inf
    return gap / (2.0 * eta12)


def _geometry(scenario: Scenario):
    if scenario.n != 2:
        raise ScenarioError(f"the closed-form solver handles n = 2, scenario has n = {scenario.n}")
    x0 = scenario.x0
    x1, x2 = x0[:2], x0[2:]
    s1, s2 = scenario.speeds
    th1, th2 = scenario.initial_angles
    u1 = np.array([math.cos(th1), math.sin(th1)])
    u2 = np.array([math.cos(th2), math.sin(th2)])
    return x1, x2, s1, s2, th1, th2, u1, u2


def analytic_trajectory(scenario: Scenario, a1, a2, t12, eta12, theta21) -> list:
    """Piecewise-linear motion for given controls, contact time, multiplier and contact angle.

    Raises
    ------
    InconsistentSolutionError
        The post-contact velocities of the two participants differ.
    """
    x1, x2, s1, s2, _, _, u1, u2 = _geometry(scenario)
    T = scenario.T
    v1 = -s1 * a1 * u1
    v2 = -s2 * a2 * u2
    pos0 = np.vstack((x1, x2))
    vel0 = np.vstack((v1, v2))
    if not math.isfinite(t12) or t12 >= T:
        return [Segment(0.0, T, pos0, vel0)]
    if t12 < 0:
        raise InconsistentSolutionError("negative contact time")
    d = np.array([math.cos(theta21), math.sin(theta21)])
    w1 = v1 - eta12 * d
    w2 = v2 + eta12 * d
    scale = max(1.0, float(np.abs(vel0).max()))
    if np.abs(w1 - w2).max() > 1e-9 * scale:
        raise InconsistentSolutionError(
            f"post-contact velocities differ by {np.abs(w1 - w2).max():.3e}"
        )
    common = 0.5 * (w1 + w2)
    segments = []
    if t12 > 0:
        segments.append(Segment(0.0, t12, pos0, vel0))
    start = pos0 + t12 * vel0
    segments.append(Segment(t12, T, start, np.vstack((common, common)), eta12))
    return segments


def _min_separation(r0, w, T):
    """Minimum of ``|r0 + t w|`` over ``t in [0, T]``."""
    ww = float(w @ w)
    t = 0.0 if ww == 0.0 else min(max(-float(r0 @ w) / ww, 0.0), T)
    return float(np.linalg.norm(r0 + t * w))


def _clamped_quadratic_min(A, B, lo, hi):
    """argmin of ``A x^2 + B x`` on ``[lo, hi]`` with ``A > 0``."""
    return min(max(-B / (2.0 * A), lo), hi)


def _branch_no_contact(scenario, geom):
    x1, x2, s1, s2, _, _, u1, u2 = geom
    T, R = scenario.T, scenario.R
    lo, hi = scenario.control_bounds
    a = []
    for x, s in ((x1, s1), (x2, s2)):
        dist = float(np.linalg.norm(x))
        # 0.5 (dist - s a T)^2 + (T/2) a^2
        a.append(_clamped_quadratic_min(0.5 * (s * T) ** 2 + 0.5 * T, -dist * s * T, lo, hi))
    a1, a2 = a
    v1 = -s1 * a1 * u1
    v2 = -s2 * a2 * u2
    sep = _min_separation(x2 - x1, v2 - v1, T)
    if sep < 2 * R - GEOM_TOL:
        return BranchCandidate(NO_CONTACT, (a1, a2), None, False,
                               f"free motion brings centers to {sep:.4g} < 2R"), None
    segs = analytic_trajectory(scenario, a1, a2, math.inf, 0.0, 0.0)
    terminal = segs[-1].state_at(T)
    return BranchCandidate(NO_CONTACT, (a1, a2), cost(terminal, (a1, a2), T), True), (a1, a2, math.inf, 0.0)


def _branch_contact(scenario, geom):
    x1, x2, s1, s2, th1, th2, u1, u2 = geom
    T, R = scenario.T, scenario.R
    lo, hi = scenario.control_bounds
    cos21, sin21 = contact_direction(x1, x2)
    th21 = math.atan2(sin21, cos21)
    d = np.array([cos21, sin21])
    try:
        rho = control_ratio(s1, s2, th1, th2, th21)
    except NoRatioError as exc:
        return BranchCandidate(CONTACT, None, None, False, str(exc)), None
    # eta = k a1 along d, rate of approach 2 k a1
    k = 0.5 * float((-s1 * u1 + rho * s2 * u2) @ d)
    if k <= GEOM_TOL or rho < 0:
        return BranchCandidate(CONTACT, None, None, False,
                               "controls on the contact line separate the participants"), None
    gap = max(float(np.linalg.norm(x2 - x1)) - 2 * R, 0.0)
    if gap <= GEOM_TOL:
        gap = 0.0
    lower = max(lo, lo / rho if rho > 0 else lo)
    upper = min(hi, hi / rho)
    strict = gap / (2 * k * T)
    lower = max(lower, strict)
    if lower > upper:
        return BranchCandidate(CONTACT, None, None, False, "no admissible a1 reaches contact before T"), None
    # J(a1) = |c0 + a1 T m|^2 + R^2 + (T/2)(1 + rho^2) a1^2
    m = 0.5 * (-s1 * u1 - rho * s2 * u2)
    c0 = 0.5 * (x1 + x2)
    A = T * T * float(m @ m) + 0.5 * T * (1 + rho * rho)
    B = 2 * T * float(c0 @ m)
    a1 = _clamped_quadratic_min(A, B, lower, upper)
    if a1 <= 0.0 or (gap > 0 and a1 <= strict):
        return BranchCandidate(CONTACT, (a1, rho * a1), None, False,
                               "cost minimizer sits on the boundary where contact happens at T"), None
    a2 = rho * a1
    eta = eta_from_controls(s1, a1, s2, a2, th1, th2)
    t12 = contact_time(x1, x2, R, eta)
    if not (0.0 <= t12 < T and eta > 0):
        return BranchCandidate(CONTACT, (a1, a2), None, False, f"t12={t12:.4g}, eta12={eta:.4g}"), None
    segs = analytic_trajectory(scenario, a1, a2, t12, eta, th21)
    J = cost(segs[-1].state_at(T), (a1, a2), T)
    return BranchCandidate(CONTACT, (a1, a2), J, True), (a1, a2, t12, eta)


def _branch_initial_contact(scenario, geom):
    x1, x2, s1, s2, th1, th2, u1, u2 = geom
    T, R = scenario.T, scenario.R
    lo, hi = scenario.control_bounds
    if abs(float(np.linalg.norm(x2 - x1)) - 2 * R) > GEOM_TOL:
        return BranchCandidate(INITIAL_CONTACT, None, None, False, "participants start apart"), None
    if math.cos(th1 - th2) >= 1 - 1e-12 and s2 > 0:
        # common free velocity: s1 a1 = s2 a2
        ratio = s1 / s2
        c = x1 + x2
        # 0.5 (|x1 - t u|^2 + |x2 - t u|^2) with t = s1 a1 T, plus (T/2)(1 + ratio^2) a1^2
        A = (s1 * T) ** 2 + 0.5 * T * (1 + ratio**2)
        B = -s1 * T * float(c @ u1)
        upper = hi if ratio == 0 else min(hi, hi / ratio)
        lower = lo if ratio == 0 else max(lo, lo / ratio)
        if lower > upper:
            return BranchCandidate(INITIAL_CONTACT, None, None, False, "bounds exclude s1 a1 = s2 a2"), None
        a1 = _clamped_quadratic_min(A, B, lower, upper)
        a2 = ratio * a1
    elif lo == 0.0:
        a1 = a2 = 0.0
    else:
        return BranchCandidate(INITIAL_CONTACT, None, None, False,
                               "headings differ so only a = 0 keeps eta12 = 0"), None
    segs = analytic_trajectory(scenario, a1, a2, 0.0, 0.0, math.atan2(*(x2 - x1)[::-1]))
    J = cost(segs[-1].state_at(T), (a1, a2), T)
    return BranchCandidate(INITIAL_CONTACT, (a1, a2), J, True), (a1, a2, 0.0, 0.0)


def optimize(scenario: Scenario) -> TwoBodySolution:
    """Cheapest feasible branch of the closed-form two-participant problem."""
    geom = _geometry(scenario)
    x1, x2 = geom[0], geom[1]
    cos21, sin21 = contact_direction(x1, x2)
    th21 = math.atan2(sin21, cos21)
    candidates, data = [], {}
    for fn in (_branch_no_contact, _branch_contact, _branch_initial_contact):
        cand, payload = fn(scenario, geom)
        candidates.append(cand)
        if cand.feasible:
            data[cand.branch] = payload
    feasible = [c for c in candidates if c.feasible]
    if not feasible:
        raise NoFeasibleBranchError(
            "no feasible branch: " + "; ".join(f"{c.branch}: {c.reason}" for c in candidates)
        )
    best = min(feasible, key=lambda c: c.J)
    a1, a2, t12, eta = data[best.branch]
    segs = analytic_trajectory(scenario, a1, a2, t12, eta, th21)
    return TwoBodySolution(a1, a2, t12, eta, th21, best.branch, best.J, segs, candidates, scenario)


def solution_for_controls(scenario: Scenario, a1: float, a2: float) -> TwoBodySolution:
    """Closed-form motion (not necessarily optimal) for the given constant controls.

    Only head-on contacts are representable; controls whose free relative
    velocity is oblique to the center line raise
    :class:`~crowdsweep.errors.InconsistentSolutionError` once contact occurs.
    """
    x1, x2, s1, s2, th1, th2, u1, u2 = _geometry(scenario)
    T, R = scenario.T, scenario.R
    cos21, sin21 = contact_direction(x1, x2)
    th21 = math.atan2(sin21, cos21)
    d = np.array([cos21, sin21])
    v1, v2 = -s1 * a1 * u1, -s2 * a2 * u2
    r0 = x2 - x1
    touching = abs(float(np.linalg.norm(r0)) - 2 * R) <= GEOM_TOL
    if touching:
        free = float((v1 - v2) @ d) < -GEOM_TOL
    else:
        free = _min_separation(r0, v2 - v1, T) >= 2 * R - GEOM_TOL
    if free:
        segs = analytic_trajectory(scenario, a1, a2, math.inf, 0.0, th21)
        return TwoBodySolution(a1, a2, math.inf, 0.0, th21, NO_CONTACT,
                               cost(segs[-1].state_at(T), (a1, a2), T), segs, scenario=scenario)
    eta = eta_from_controls(s1, a1, s2, a2, th1, th2)
    t12 = contact_time(x1, x2, R, eta)
    segs = analytic_trajectory(scenario, a1, a2, t12, eta, th21)
    branch = CONTACT if eta > 0 else INITIAL_CONTACT
    return TwoBodySolution(a1, a2, t12, eta, th21, branch,
                           cost(segs[-1].state_at(T), (a1, a2), T), segs, scenario=scenario)
