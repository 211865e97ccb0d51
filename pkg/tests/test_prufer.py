import math

import numpy as np
import pytest

from embedded_eigen.errors import StepTooLargeError
from embedded_eigen.model import BoundaryAngle, PruferState, make_energy_point
from embedded_eigen.prufer import (
    SolutionPair,
    boundary_to_prufer,
    predicted_angle_increment,
    prufer_step,
    prufer_to_solution,
    solution_to_prufer,
    transfer_step,
)


def test_trivial_pair_rejected():
    with pytest.raises(ValueError):
        SolutionPair(0.0, 0.0)


def test_transfer_step_recursion():
    p = transfer_step(SolutionPair(1.0, 2.0), V=0.5, E=1.0)
    assert (p.uPrev, p.uCur) == (2.0, (1.0 - 0.5) * 2.0 - 1.0)


@pytest.mark.parametrize("E", [1.0, -1.0, 0.0, 0.5, 1.9, -1.7])
def test_solution_prufer_round_trip(E, rng):
    ep = make_energy_point(E)
    for a, b in rng.standard_normal((50, 2)):
        st = solution_to_prufer(SolutionPair(a, b), ep)
        assert 0.0 <= st.phi < 2.0
        back = prufer_to_solution(st, ep)
        assert back.uPrev == pytest.approx(a, rel=1e-12, abs=1e-13)
        assert back.uCur == pytest.approx(b, rel=1e-12, abs=1e-13)
        # u(n) = R sin(pi theta)
        assert st.R * math.sin(math.pi * st.phi) == pytest.approx(b, rel=1e-12, abs=1e-13)


def test_boundary_state_reproduces_boundary_condition():
    ep = make_energy_point(0.5)
    for theta in np.linspace(0, math.pi, 13, endpoint=False):
        sol = prufer_to_solution(boundary_to_prufer(BoundaryAngle(theta), ep), ep)
        assert sol.uPrev == pytest.approx(math.cos(theta), abs=1e-14)
        assert sol.uCur == pytest.approx(math.sin(theta), abs=1e-14)


def test_cotangent_form_of_the_step(rng):
    # cot(pi theta' - pi k) = cot(pi theta) - V / s
    ep = make_energy_point(0.7)
    for phi, t in zip(rng.uniform(0, 2, 200), rng.uniform(-0.45, 0.45, 200)):
        V = t * ep.s
        nxt = prufer_step(PruferState(0.0, phi), V, ep)
        lhs = 1.0 / math.tan(math.pi * nxt.phi - math.pi * ep.k)
        rhs = 1.0 / math.tan(math.pi * phi) - V / ep.s
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_step_matches_transfer_matrix(rng):
    ep = make_energy_point(-0.3)
    st = PruferState(0.0, 0.4)
    pair = prufer_to_solution(st, ep)
    for V in rng.uniform(-0.3, 0.3, 500) * ep.s:
        st = prufer_step(st, V, ep)
        pair = transfer_step(pair, V, ep.E)
    rec = prufer_to_solution(st, ep)
    assert rec.uCur == pytest.approx(pair.uCur, rel=1e-10)
    assert rec.uPrev == pytest.approx(pair.uPrev, rel=1e-10)


def test_zero_potential_radius_constant():
    ep = make_energy_point(1.3)
    st = prufer_step(PruferState(0.7, 0.3), 0.0, ep)
    assert st.logR == 0.7
    assert st.phi == 0.3 + ep.k


def test_zero_energy_two_free_steps_advance_by_one():
    ep = make_energy_point(0.0)
    st = PruferState(0.0, 0.375)
    st = prufer_step(prufer_step(st, 0.0, ep), 0.0, ep)
    assert st.phi == 1.375 and st.frac == 1.375


def test_step_too_large():
    ep = make_energy_point(1.0)
    with pytest.raises(StepTooLargeError):
        prufer_step(PruferState(0.0, 0.3), 0.5 * ep.s, ep)
    prufer_step(PruferState(0.0, 0.3), 0.4999 * ep.s, ep)


def test_predicted_increment_requires_small_step():
    ep = make_energy_point(1.0)
    with pytest.raises(StepTooLargeError):
        predicted_angle_increment(PruferState(0.0, 0.3), 0.1 * ep.s, ep)
    assert predicted_angle_increment(PruferState(0.0, 0.5), 0.0, ep) == ep.k
