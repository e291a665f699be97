import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyapsos.polycore import Polynomial, motzkin
from lyapsos.sdp import (
    Constraint,
    SdpProblem,
    SdpStatus,
    constraint_residual,
    smat,
    solve_sdp,
    svec,
    verify_farkas_ray,
)
from lyapsos.sos import GramBasis, compile_sos, monomial_basis

x, y = Polynomial.variables(2)


def test_trace_one_is_feasible():
    prob = SdpProblem([2], [Constraint({0: {(0, 0): 1.0, (1, 1): 1.0}}, 1.0)])
    sol = solve_sdp(prob)
    assert sol.status is SdpStatus.FEASIBLE
    X = sol.primal[0]
    assert np.trace(X) == pytest.approx(1.0, abs=1e-8)
    assert np.linalg.eigvalsh(X).min() > 0  # analytic centre I/2
    assert X == pytest.approx(np.eye(2) / 2, abs=1e-6)


def test_negative_trace_is_infeasible_with_ray():
    prob = SdpProblem([3], [Constraint({0: {(0, 0): 1.0, (1, 1): 1.0, (2, 2): 1.0}}, -1.0)])
    sol = solve_sdp(prob)
    assert sol.status is SdpStatus.INFEASIBLE
    assert verify_farkas_ray(prob, sol.ray)
    assert not verify_farkas_ray(prob, -sol.ray)


def test_motzkin_full_basis_is_infeasible():
    basis = monomial_basis(motzkin(), "full")
    prob = compile_sos(motzkin(), basis)
    assert prob.block_dims == [10]  # monomials of degree <= 3 in two variables
    sol = solve_sdp(prob)
    assert sol.status is SdpStatus.INFEASIBLE
    assert verify_farkas_ray(prob, sol.ray)


def test_square_has_rank_one_gram():
    prob = compile_sos((x - y) ** 2, GramBasis(2, ((1, 0), (0, 1))))
    assert prob.m == 3
    sol = solve_sdp(prob)
    assert sol.status is SdpStatus.FEASIBLE
    assert sol.primal[0] == pytest.approx(np.array([[1, -1], [-1, 1]]), abs=1e-6)


def test_quartic_gram_forced():
    t = Polynomial.variable(1, 0)
    sol = solve_sdp(compile_sos(t ** 4, GramBasis(1, ((1,), (2,)))))
    assert sol.primal[0] == pytest.approx(np.diag([0.0, 1.0]), abs=1e-6)


def test_two_block_problem():
    # X1 (2x2), X2 (1x1): tr X1 + X2 = 2, X1[0,1] = 0.3
    prob = SdpProblem([2, 1], [
        Constraint({0: {(0, 0): 1.0, (1, 1): 1.0}, 1: {(0, 0): 1.0}}, 2.0),
        Constraint({0: {(0, 1): 1.0}}, 0.3),
    ])
    sol = solve_sdp(prob)
    assert sol.status is SdpStatus.FEASIBLE
    assert constraint_residual(prob, sol.primal) < 1e-7
    assert min(np.linalg.eigvalsh(X).min() for X in sol.primal) >= -1e-9


def test_json_round_trip():
    prob = compile_sos(motzkin(), monomial_basis(motzkin()))
    again = SdpProblem.from_json(prob.to_json())
    assert again.to_dict() == prob.to_dict()


@given(st.integers(1, 6).flatmap(lambda n: st.lists(st.floats(-5, 5), min_size=n * n, max_size=n * n)))
def test_svec_round_trip(vals):
    n = int(round(len(vals) ** 0.5))
    A = np.array(vals).reshape(n, n)
    S = A + A.T
    assert smat(svec(S), n) == pytest.approx(S)
    # svec preserves the trace inner product
    assert svec(S) @ svec(S) == pytest.approx(np.sum(S * S))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_random_psd_targets_are_feasible(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    B = rng.normal(size=(n, n))
    X0 = B @ B.T + 0.1 * np.eye(n)
    cons = []
    for _ in range(int(rng.integers(1, n + 1))):
        C = rng.normal(size=(n, n))
        C = C + C.T
        ent = {(i, j): float(C[i, j]) for i in range(n) for j in range(i, n)}
        cons.append(Constraint({0: ent}, float(np.sum(C * X0))))
    prob = SdpProblem([n], cons)
    sol = solve_sdp(prob)
    assert sol.status is SdpStatus.FEASIBLE
    assert constraint_residual(prob, sol.primal) < 1e-6
