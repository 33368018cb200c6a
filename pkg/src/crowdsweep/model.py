"""Problem data and constraint geometry of the planar crowd-motion model.

Participants are rigid disks of a common radius ``R`` whose centers are
stacked into a configuration vector ``x`` of length ``2n``: participant
``i`` (0-based) occupies ``x[2*i:2*i + 2]``.  The exit sits at the origin.

The non-overlapping constraint is expressed with the signed distances
``D_ij(x) = |x_i - x_j| - 2R``; the spontaneous motion is the controlled
drift ``-f(x, a)`` pointing every participant toward the exit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import DegenerateGeometryError, InfeasibleScenarioError, ScenarioError

TWO_PI = 2.0 * math.pi

#: Default control bounds used when building scenarios programmatically.
DEFAULT_CONTROL_BOUNDS = (0.0, 10.0)


@dataclass(frozen=True)
class ParticipantSpec:
    """Initial position (meters) and spontaneous speed (m/s) of one disk."""

    x0: tuple[float, float]
    speed: float

    def __post_init__(self):
        x0 = tuple(float(c) for c in self.x0)
        if len(x0) != 2 or not all(math.isfinite(c) for c in x0):
            raise ScenarioError(f"participant position must be two finite reals, got {self.x0!r}")
        object.__setattr__(self, "x0", x0)
        speed = float(self.speed)
        if not math.isfinite(speed) or speed < 0:
            raise ScenarioError(f"participant speed must be a finite real >= 0, got {self.speed!r}")
        object.__setattr__(self, "speed", speed)
        if math.hypot(*x0) == 0.0:
            raise ScenarioError("participant starts at the exit; its direction is undefined")


@dataclass(frozen=True)
class Scenario:
    """One instance of the controlled crowd-motion problem.

    Parameters
    ----------
    T : float
        Horizon in seconds.
    R : float
        Common disk radius in meters.
    participants : sequence of ParticipantSpec
        At least two participants; their initial configuration must be
        feasible.
    control_bounds : (float, float)
        Box ``[a_min, a_max]`` for every throttle, ``0 <= a_min < a_max``.
    shift_magnitude : float
        Norm ``r`` of the constant shift control.  It does not influence the
        motion because equal per-participant shifts cancel in every ``D_ij``.
    """

    T: float
    R: float
    participants: tuple[ParticipantSpec, ...]
    control_bounds: tuple[float, float] = DEFAULT_CONTROL_BOUNDS
    shift_magnitude: float = 1.0
    feasibility_tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "participants", tuple(self.participants))
        object.__setattr__(self, "control_bounds", tuple(float(b) for b in self.control_bounds))
        object.__setattr__(self, "shift_magnitude", float(self.shift_magnitude))
        if not (math.isfinite(self.T) and self.T > 0):
            raise ScenarioError(f"horizon T must be > 0, got {self.T}")
        if not (math.isfinite(self.R) and self.R > 0):
            raise ScenarioError(f"disk radius R must be > 0, got {self.R}")
        if len(self.participants) < 2:
            raise ScenarioError("a scenario needs at least two participants")
        if len(self.control_bounds) != 2:
            raise ScenarioError("control_bounds must be [a_min, a_max]")
        lo, hi = self.control_bounds
        if not (0.0 <= lo < hi and math.isfinite(hi)):
            raise ScenarioError(f"control bounds must satisfy 0 <= a_min < a_max, got {self.control_bounds}")
        if not (math.isfinite(self.shift_magnitude) and self.shift_magnitude > 0):
            raise ScenarioError("shift_magnitude must be > 0")
        x0 = self.x0
        for i, j in pairs(self.n):
            if signed_distance(x0, self.R, i, j) < -self.feasibility_tol:
                raise InfeasibleScenarioError(
                    f"initial configuration is infeasible: participants {i + 1} and {j + 1} overlap"
                )

    @property
    def n(self) -> int:
        return len(self.participants)

    @property
    def x0(self) -> np.ndarray:
        return np.array([c for p in self.participants for c in p.x0], dtype=float)

    @property
    def speeds(self) -> np.ndarray:
        return np.array([p.speed for p in self.participants], dtype=float)

    @property
    def initial_angles(self) -> np.ndarray:
        return direction_angles(self.x0)

    def check_controls(self, a) -> np.ndarray:
        """Return ``a`` as a float array after checking length and bounds."""
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape != (self.n,):
            raise ScenarioError(f"expected {self.n} controls, got {a.size}")
        lo, hi = self.control_bounds
        if np.any(a < lo - 1e-12) or np.any(a > hi + 1e-12):
            raise ScenarioError(f"controls {a.tolist()} outside bounds [{lo}, {hi}]")
        return a

    def rotated(self, phi: float) -> "Scenario":
        """Same scenario with every initial position rotated by ``phi`` about the exit."""
        c, s = math.cos(phi), math.sin(phi)
        parts = [
            ParticipantSpec((c * p.x0[0] - s * p.x0[1], s * p.x0[0] + c * p.x0[1]), p.speed)
            for p in self.participants
        ]
        return Scenario(self.T, self.R, parts, self.control_bounds, self.shift_magnitude)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a JSON object")
        try:
            parts = [ParticipantSpec(tuple(p["x0"]), p["speed"]) for p in data["participants"]]
            return cls(
                T=data["T"],
                R=data["R"],
                participants=parts,
                control_bounds=tuple(data["control_bounds"]),
                shift_magnitude=data.get("shift_magnitude", 1.0),
            )
        except ScenarioError:
            raise
        except KeyError as exc:
            raise ScenarioError(f"scenario is missing field {exc.args[0]!r}") from None
        except (TypeError, AttributeError, ValueError) as exc:
            raise ScenarioError(f"scenario has a field of the wrong type: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "R": self.R,
            "participants": [{"x0": list(p.x0), "speed": p.speed} for p in self.participants],
            "control_bounds": list(self.control_bounds),
            "shift_magnitude": self.shift_magnitude,
        }


def load_scenario(path) -> Scenario:
    """Read a scenario JSON file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed JSON in scenario file {path}: {exc}") from None
    return Scenario.from_dict(data)


def bundled_scenario(name: str) -> Scenario:
    """Load one of the shipped scenarios: ``"ex1"``, ``"ex2"`` or ``"ex3"``."""
    return load_scenario(Path(__file__).parent / "scenarios" / f"{name}.json")


@dataclass(frozen=True)
class ProxConstants:
    """Gradient/Hessian bounds and the inverse-triangle constant of the crowd set.

    ``beta`` is ``None`` when its closed form degenerates (``n = 2``);
    ``eta_prox`` is always ``None`` because the constant it depends on is not
    available for this model.
    """

    n: int
    M1: float
    M2: float
    M3: float
    beta: float | None
    eta_prox: float | None = None

    @property
    def beta_defined(self) -> bool:
        return self.beta is not None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "M1": self.M1,
            "M2": self.M2,
            "M3": self.M3,
            "beta": self.beta,
            "beta_defined": self.beta_defined,
            "eta_prox": self.eta_prox,
        }


def pairs(n: int) -> list[tuple[int, int]]:
    """All index pairs ``(i, j)`` with ``i < j``, in lexicographic order."""
    return list(combinations(range(n), 2))


def _block(cfg, i):
    cfg = np.asarray(cfg, dtype=float)
    n = cfg.size // 2
    if not 0 <= i < n:
        raise IndexError(f"participant index {i} out of range for n={n}")
    return cfg[2 * i : 2 * i + 2]


def signed_distance(cfg, R: float, i: int, j: int) -> float:
    """``|x_i - x_j| - 2R``; negative when disks ``i`` and ``j`` overlap."""
    if i == j:
        raise ValueError("signed distance needs two distinct participants")
    xi, xj = _block(cfg, i), _block(cfg, j)
    return math.hypot(xi[0] - xj[0], xi[1] - xj[1]) - 2.0 * R


def distance_gradient(cfg, i: int, j: int) -> np.ndarray:
    """Gradient of ``D_ij``: ``-e_ij`` in slot ``i``, ``+e_ij`` in slot ``j``.

    ``e_ij`` is the unit vector from center ``i`` to center ``j``.
    """
    if i == j:
        raise ValueError("distance gradient needs two distinct participants")
    cfg = np.asarray(cfg, dtype=float)
    xi, xj = _block(cfg, i), _block(cfg, j)
    d = xj - xi
    norm = math.hypot(d[0], d[1])
    if norm == 0.0:
        raise DegenerateGeometryError(f"participants {i} and {j} have coincident centers")
    e = d / norm
    g = np.zeros_like(cfg)
    g[2 * i : 2 * i + 2] = -e
    g[2 * j : 2 * j + 2] = e
    return g


def min_signed_distance(cfg, R: float) -> float:
    n = np.asarray(cfg).size // 2
    return min(signed_distance(cfg, R, i, j) for i, j in pairs(n))


def is_feasible(cfg, R: float, tol: float = 0.0) -> bool:
    """True iff every pairwise signed distance is at least ``-tol``."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    return min_signed_distance(cfg, R) >= -tol


def active_pairs(cfg, R: float, tol: float = 1e-6) -> list[tuple[int, int]]:
    """Pairs whose signed distance is at most ``tol`` (in or near contact)."""
    n = np.asarray(cfg).size // 2
    return [(i, j) for i, j in pairs(n) if signed_distance(cfg, R, i, j) <= tol]


def normal_generators(cfg, R: float, tol: float = 1e-6) -> tuple[list[tuple[int, int]], np.ndarray]:
    """Active pairs and the matrix whose columns are their distance gradients.

    The normal cone of the feasible set at ``cfg`` is ``{-G @ eta : eta >= 0}``
    and the feasible-velocity cone is ``{v : G.T @ v >= 0}``.
    """
    act = active_pairs(cfg, R, tol)
    cfg = np.asarray(cfg, dtype=float)
    G = np.zeros((cfg.size, len(act)))
    for col, (i, j) in enumerate(act):
        G[:, col] = distance_gradient(cfg, i, j)
    return act, G


def is_feasible_velocity(cfg, v, R: float, tol: float = 1e-6) -> bool:
    """Membership of ``v`` in the cone of velocities that keep contacts closed or opening."""
    _, G = normal_generators(cfg, R, tol)
    return bool(np.all(G.T @ np.asarray(v, dtype=float) >= -1e-12))


def direction_angle(position) -> float:
    """Angle in ``[0, 2pi)`` of a planar position vector measured from the +x axis."""
    x, y = float(position[0]), float(position[1])
    if x == 0.0 and y == 0.0:
        raise DegenerateGeometryError("direction of the zero vector is undefined")
    theta = math.atan2(y, x) % TWO_PI
    return 0.0 if theta >= TWO_PI else theta


def direction_angles(cfg) -> np.ndarray:
    cfg = np.asarray(cfg, dtype=float)
    return np.array([direction_angle(cfg[2 * i : 2 * i + 2]) for i in range(cfg.size // 2)])


def perturbation(cfg, a, speeds, angles) -> np.ndarray:
    """Controlled perturbation ``f(x, a)``; the free-motion velocity is ``-f``.

    Block ``i`` equals ``s_i a_i (cos theta_i, sin theta_i)``.  ``cfg`` only
    fixes the output dimension: the angles carry the position dependence.
    """
    a = np.asarray(a, dtype=float)
    speeds = np.asarray(speeds, dtype=float)
    angles = np.asarray(angles, dtype=float)
    n = np.asarray(cfg).size // 2
    if not (a.size == speeds.size == angles.size == n):
        raise ValueError("controls, speeds and angles must have one entry per participant")
    units = np.column_stack((np.cos(angles), np.sin(angles)))
    return ((speeds * a)[:, None] * units).reshape(-1)


def cost(terminal, a, T: float) -> float:
    """``0.5 * (|x(T)|^2 + T * |a|^2)`` for constant controls ``a``."""
    if T <= 0:
        raise ValueError("horizon must be positive")
    terminal = np.asarray(terminal, dtype=float)
    a = np.asarray(a, dtype=float)
    return 0.5 * (float(terminal @ terminal) + T * float(a @ a))


def shift_vector(n: int, r: float) -> np.ndarray:
    """Constant shift control with all ``n`` blocks equal to ``(r, r) / sqrt(2n)``.

    Its norm is ``r``; subtracting it from a configuration leaves every
    signed distance unchanged.
    """
    return np.full(2 * n, r / math.sqrt(2 * n))


def prox_constants(n: int, R: float) -> ProxConstants:
    """Regularity constants of the feasible-configuration set for ``n`` disks.

    ``M1 = M2 = sqrt(2)`` bound the distance gradients, ``M3 = 2 / R`` bounds
    their Hessians and ``beta = 3 sqrt(2) n (3 / sin(2 pi / n))**n``.  The
    latter is reported as undefined for ``n = 2`` where ``sin(pi)`` vanishes.
    """
    if n < 2:
        raise ValueError("need at least two participants")
    if R <= 0:
        raise ValueError("disk radius must be positive")
    s = math.sin(TWO_PI / n)
    beta = None
    if abs(s) > 1e-12:
        beta = 3.0 * math.sqrt(2.0) * n * (3.0 / s) ** n
    return ProxConstants(n=n, M1=math.sqrt(2.0), M2=math.sqrt(2.0), M3=2.0 / R, beta=beta)
