"""Acceptance suite: one group of tests per criterion, at the stated tolerances.

A summary line per criterion is printed at the end of the pytest run.
"""

import math

import numpy as np
import pytest

from crowdsweep.integrator import simulate
from crowdsweep.model import ParticipantSpec, Scenario, prox_constants
from crowdsweep.optimality import reconstruct_duals, verify
from crowdsweep.search import GridSpec, grid_search
from crowdsweep.two_body import (
    CONTACT,
    INITIAL_CONTACT,
    control_ratio,
    optimize,
    solution_for_controls,
)

EXAMPLES = ("ex1", "ex2", "ex3")

c1 = pytest.mark.criterion(1, "ex1 closed-form optimum and rejected initial-contact branch")
c2 = pytest.mark.criterion(2, "ex2 closed-form optimum")
c3 = pytest.mark.criterion(3, "ex3 closed-form optimum and control ratio")
c4 = pytest.mark.criterion(4, "dual certificates, q-differences and p^x values")
c5 = pytest.mark.criterion(5, "simulation matches closed form with first-order convergence")
c6 = pytest.mark.criterion(6, "grid oracle agrees with closed form")
c7 = pytest.mark.criterion(7, "feasibility, complementarity, rotation invariance, perturbation rejection")
c8 = pytest.mark.criterion(8, "regularity constants")


# criterion 1

@c1
def test_c1_ex1_optimum(optima):
    sol = optima["ex1"]
    assert sol.branch == CONTACT
    assert sol.a1 == pytest.approx(3.12, abs=0.02)
    assert sol.a2 == pytest.approx(1.56, abs=0.02)
    assert sol.t12 == 0.0
    assert sol.eta12 == pytest.approx(7.02, abs=0.05)
    assert sol.J == pytest.approx(45.9, abs=0.2)


@c1
def test_c1_ex1_initial_contact_branch(optima):
    cand = optima["ex1"].candidate(INITIAL_CONTACT)
    assert cand is not None and cand.feasible
    assert cand.J == pytest.approx(66.49, abs=0.2)
    assert cand.a[0] == pytest.approx(1.95, abs=0.02)
    assert cand.J > optima["ex1"].J


# criterion 2

@c2
def test_c2_ex2_optimum(optima):
    sol = optima["ex2"]
    assert sol.branch == CONTACT
    assert sol.a2 == pytest.approx(1.68, abs=0.02)
    assert sol.a1 == pytest.approx(3.36, abs=0.04)
    assert sol.t12 == pytest.approx(0.72, abs=0.01)
    assert sol.eta12 == pytest.approx(7.58, abs=0.05)
    assert sol.eta12 == pytest.approx(4.5 * sol.a2, rel=1e-12)


# criterion 3

@c3
def test_c3_ex3_controls(optima):
    sol = optima["ex3"]
    assert sol.a1 == pytest.approx(1.65, abs=0.02), f"a = {sol.a.tolist()}"
    assert sol.a2 == pytest.approx(2.80, abs=0.03), f"a = {sol.a.tolist()}"


@c3
def test_c3_ex3_contact(optima):
    sol = optima["ex3"]
    assert sol.t12 == pytest.approx(4.74, abs=0.02), f"t12 = {sol.t12}"
    assert sol.eta12 == pytest.approx(0.78, abs=0.01), f"eta12 = {sol.eta12}"


@c3
def test_c3_ex3_control_ratio(scenarios, optima):
    sc = scenarios["ex3"]
    s1, s2 = sc.speeds
    th1, th2 = sc.initial_angles
    sol = optima["ex3"]
    rho = control_ratio(s1, s2, th1, th2, sol.theta21)
    assert abs(rho - math.sqrt(290) / 10) <= 1e-9
    assert abs(sol.a2 / sol.a1 - math.sqrt(290) / 10) <= 1e-9


# criterion 4

@c4
@pytest.mark.parametrize("name", EXAMPLES)
def test_c4_certificate_passes(optima, name):
    sol = optima[name]
    report = verify(sol, reconstruct_duals(sol, 1.0), tol=1e-6)
    assert report.overall, report.to_dict()


@c4
@pytest.mark.parametrize("name, expected", [("ex1", 0.74), ("ex2", 0.79)])
def test_c4_q_differences(optima, name, expected):
    diffs = reconstruct_duals(optima[name]).q_differences()
    assert diffs == pytest.approx([expected, expected], abs=0.01)


@c4
def test_c4_ex1_p_values(optima):
    p = reconstruct_duals(optima["ex1"]).p_x
    assert p[:2] == pytest.approx([-2.34, 2.34], abs=0.02), f"p^x = {p.tolist()}"
    assert p[2:] == pytest.approx([3.34, -3.34], abs=0.02), f"p^x = {p.tolist()}"


# criterion 5

H = 1e-3


def _terminal_error(sc, sol, steps):
    traj = simulate(sc, sol.a, steps, frozen_angles=True)
    return float(np.abs(traj.terminal - sol.terminal).max())


@c5
@pytest.mark.parametrize("name", EXAMPLES)
def test_c5_terminal_agreement(scenarios, optima, name):
    sc = scenarios[name]
    err = _terminal_error(sc, optima[name], round(sc.T / H))
    assert err <= 0.05


@c5
@pytest.mark.parametrize("name", EXAMPLES)
def test_c5_halving_reduces_error(scenarios, optima, name):
    sc = scenarios[name]
    steps = round(sc.T / H)
    e_h = _terminal_error(sc, optima[name], steps)
    e_h2 = _terminal_error(sc, optima[name], 2 * steps)
    assert e_h2 <= 0.6 * e_h, f"error at h {e_h:.3e}, at h/2 {e_h2:.3e}"


# criterion 6

@pytest.fixture(scope="module")
def oracle(scenarios):
    grid = GridSpec(0.0, 5.0, 0.02, steps_per_sim=round(6.0 / H))
    return {name: grid_search(sc, grid, frozen_angles=True) for name, sc in scenarios.items()}


@c6
@pytest.mark.parametrize("name", EXAMPLES)
def test_c6_oracle_agreement(oracle, optima, name):
    res, sol = oracle[name], optima[name]
    assert np.abs(res.a - sol.a).max() <= 0.04, f"grid argmin {res.a.tolist()} vs {sol.a.tolist()}"
    assert abs(res.J - sol.J) <= 0.5, f"grid J {res.J} vs {sol.J}"


# criterion 7

def _random_scenario(rng, n):
    R = rng.uniform(0.5, 2.0)
    pts = []
    while len(pts) < n:
        r = rng.uniform(4 * R, 12 * R)
        phi = rng.uniform(0.0, math.pi / 2)
        p = np.array([r * math.cos(phi), r * math.sin(phi)])
        if all(np.linalg.norm(p - q) >= 2 * R + 1e-3 for q in pts):
            pts.append(p)
    parts = [ParticipantSpec(tuple(p), rng.uniform(0.5, 3.0)) for p in pts]
    return Scenario(T=rng.uniform(2.0, 8.0), R=R, participants=parts, control_bounds=(0.0, 5.0))


@pytest.fixture(scope="module")
def battery():
    rng = np.random.default_rng(2024)
    out = []
    for k in range(20):
        n = (2, 3, 4)[k % 3]
        sc = _random_scenario(rng, n)
        a = rng.uniform(0.0, 5.0, n)
        out.append(simulate(sc, a, 2000, frozen_angles=bool(k % 2)))
    return out


@c7
def test_c7a_feasibility(battery):
    assert {t.scenario.n for t in battery} == {2, 3, 4}
    assert sum(bool(t.events) for t in battery) >= 10
    worst = min(float(t.signed_distances().min()) for t in battery)
    assert worst >= -1e-9


@c7
def test_c7b_complementarity(battery):
    for t in battery:
        D = t.signed_distances()
        assert np.all(t.eta[D > 1e-6] == 0.0)


@c7
@pytest.mark.parametrize("name", EXAMPLES)
@pytest.mark.parametrize("phi", [0.3, 1.7, -2.4])
def test_c7c_rotation_invariance(scenarios, optima, name, phi):
    base = optima[name]
    rot = optimize(scenarios[name].rotated(phi))
    assert abs(rot.a1 - base.a1) <= 1e-9
    assert abs(rot.a2 - base.a2) <= 1e-9
    assert abs(rot.J - base.J) <= 1e-9
    assert abs(rot.t12 - base.t12) <= 1e-9
    assert abs(rot.eta12 - base.eta12) <= 1e-9


@c7
@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_c7d_perturbed_controls_fail(scenarios, optima, name):
    sol = optima[name]
    pert = solution_for_controls(scenarios[name], sol.a1 + 0.5, sol.a2)
    report = verify(pert, reconstruct_duals(pert, strict=False), tol=1e-6)
    assert not report.overall
    assert 5 in report.failed


# criterion 8

@c8
def test_c8_beta_three():
    assert abs(prox_constants(3, 3.0).beta - 216 * math.sqrt(6)) <= 1e-9


@c8
def test_c8_beta_undefined_for_two():
    c = prox_constants(2, 3.0)
    assert c.beta is None and not c.beta_defined


@c8
@pytest.mark.parametrize("n", [2, 3, 4, 5, 8])
def test_c8_gradient_bounds(n):
    c = prox_constants(n, 1.5)
    assert c.M1 == math.sqrt(2) and c.M2 == math.sqrt(2)
