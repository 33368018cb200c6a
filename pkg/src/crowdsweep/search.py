"""Brute-force search over constant control vectors.

Every candidate is scored by running the catching-up scheme to ``T`` and
evaluating the cost on the simulated terminal state; nothing here uses the
closed-form two-participant solution.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError
from .integrator import PROJECTION_MAX_ITER, PROJECTION_TOL
from .kernels import batch_terminal_states
from .model import Scenario

DEFAULT_BUDGET = 10**7
CHUNK_ROWS = 4096
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MAX_SWEEPS = 50


@dataclass(frozen=True)
class GridSpec:
    """Uniform control grid ``lo, lo + step, ...`` up to ``hi`` in every coordinate."""

    lo: float
    hi: float
    step: float
    steps_per_sim: int = 6000
    refine: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got {self.lo} and {self.hi}")
        if not 0 < self.step <= self.hi - self.lo:
            raise ValueError(f"grid step must lie in (0, hi - lo], got {self.step}")
        if self.steps_per_sim < 1:
            raise ValueError("need at least one simulation step")

    @classmethod
    def parse(cls, text: str, steps_per_sim: int = 6000, refine: bool = False) -> "GridSpec":
        """``"LO:HI:STEP"``."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must look like LO:HI:STEP, got {text!r}")
        lo, hi, step = (float(p) for p in parts)
        return cls(lo, hi, step, steps_per_sim, refine)

    @property
    def values(self) -> np.ndarray:
        # tolerate hi not landing exactly on the lattice
        count = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return self.lo + self.step * np.arange(count)

    def size(self, n: int) -> int:
        return self.values.size ** n


@dataclass(frozen=True)
class SearchResult:
    a: np.ndarray
    J: float
    table: np.ndarray  # (m, n + 1): controls then J, lexicographic order
    refined: bool = False

    def to_csv(self, fh=None) -> str | None:
        sink = io.StringIO() if fh is None else fh
        writer = csv.writer(sink, lineterminator="\n")
        n = self.table.shape[1] - 1
        writer.writerow([f"a{i + 1}" for i in range(n)] + ["J"])
        for row in self.table:
            writer.writerow([repr(float(v)) for v in row])
        return sink.getvalue() if fh is None else None

    def __iter__(self):
        # unpack as (a, J, table)
        return iter((self.a, self.J, self.table))


def _units(scenario):
    th = scenario.initial_angles
    return np.column_stack((np.cos(th), np.sin(th)))


def evaluate_costs(scenario: Scenario, controls, steps: int, *, frozen_angles: bool = True,
                   backend=None) -> np.ndarray:
    """Cost of the simulated motion for every row of ``controls``."""
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    h = scenario.T / steps
    out = np.empty(controls.shape[0])
    for start in range(0, controls.shape[0], CHUNK_ROWS):
        block = controls[start : start + CHUNK_ROWS]
        term = batch_terminal_states(scenario.x0, scenario.speeds, _units(scenario), block, h, steps,
                                     scenario.R, frozen=frozen_angles, tol=PROJECTION_TOL,
                                     max_iter=PROJECTION_MAX_ITER, backend=backend)
        out[start : start + block.shape[0]] = 0.5 * (np.einsum("ij,ij->i", term, term)
                                                     + scenario.T * np.einsum("ij,ij->i", block, block))
    return out


def grid_search(scenario: Scenario, grid: GridSpec, *, frozen_angles: bool = True,
                budget: int = DEFAULT_BUDGET, backend=None) -> SearchResult:
    """Minimize the simulated cost over the tensor grid of constant controls.

    Ties go to the lexicographically smallest control vector.  With
    ``grid.refine`` the winner is polished by :func:`refine_local` within one
    grid cell.

    Raises
    ------
    BudgetExceededError
        The grid has more than ``budget`` points.
    """
    n = scenario.n
    required = grid.size(n)
    if required > budget:
        raise BudgetExceededError(required, budget)
    vals = grid.values
    lo, hi = scenario.control_bounds
    if vals[0] < lo - 1e-12 or vals[-1] > hi + 1e-12:
        raise ValueError(f"grid [{vals[0]}, {vals[-1]}] leaves the control bounds [{lo}, {hi}]")
    mesh = np.meshgrid(*([vals] * n), indexing="ij")
    controls = np.column_stack([m.reshape(-1) for m in mesh])
    J = evaluate_costs(scenario, controls, grid.steps_per_sim, frozen_angles=frozen_angles,
                       backend=backend)
    best = int(np.argmin(J))  # first minimum in 'ij' order is lexicographically smallest
    a, Jbest = controls[best].copy(), float(J[best])
    table = np.column_stack((controls, J))
    if grid.refine:
        a, Jbest = refine_local(scenario, a, grid.step, 1e-6, steps=grid.steps_per_sim,
                                frozen_angles=frozen_angles, backend=backend)
    return SearchResult(a, Jbest, table, grid.refine)


def refine_local(scenario: Scenario, a0, radius: float, tol: float, *, steps: int = 6000,
                 frozen_angles: bool = True, backend=None) -> tuple[np.ndarray, float]:
    """Coordinate-wise golden-section descent inside ``a0 +- radius``.

    Each sweep minimizes along one coordinate at a time until the bracket is
    narrower than ``tol``; a move is kept only if it lowers the cost.
    Sweeps stop when no coordinate moves by more than ``tol`` or after
    ``MAX_SWEEPS``.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    a0 = np.asarray(a0, dtype=float)
    lo_b, hi_b = scenario.control_bounds
    box_lo = np.maximum(a0 - radius, lo_b)
    box_hi = np.minimum(a0 + radius, hi_b)

    def J(a):
        return float(evaluate_costs(scenario, a[None, :], steps, frozen_angles=frozen_angles,
                                    backend=backend)[0])

    a = a0.copy()
    Ja = J(a)
    for _ in range(MAX_SWEEPS):
        moved = 0.0
        for i in range(a.size):
            lo, hi = box_lo[i], box_hi[i]
            if hi - lo <= tol:
                continue

            def Ji(t, i=i):
                trial = a.copy()
                trial[i] = t
                return J(trial)

            c = hi - GOLDEN * (hi - lo)
            d = lo + GOLDEN * (hi - lo)
            Jc, Jd = Ji(c), Ji(d)
            while hi - lo > tol:
                if Jc <= Jd:
                    hi, d, Jd = d, c, Jc
                    c = hi - GOLDEN * (hi - lo)
                    Jc = Ji(c)
                else:
                    lo, c, Jc = c, d, Jd
                    d = lo + GOLDEN * (hi - lo)
                    Jd = Ji(d)
            t, Jt = (c, Jc) if Jc <= Jd else (d, Jd)
            if Jt < Ja:
                moved = max(moved, abs(t - a[i]))
                a[i], Ja = t, Jt
        if moved <= tol:
            break
    return a, Ja
