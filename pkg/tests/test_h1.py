import numpy as np
import pytest

from pwgf.h1 import (FdError, FdProblem, constant_init, fd_energy, h1_solve, h1_step,
                     laplace_ground_mode, random_init, to_grid)
from pwgf.potentials import make_potential
from pwgf.reconstruct import GridFunction


def free_problem(d, n, L=2.0):
    return FdProblem(d, n, L, np.zeros((n,) * d), 0.0)


@pytest.mark.parametrize("d,n", [(1, 30), (2, 17), (3, 9)])
def test_laplace_eigenvector_energy(d, n):
    prob = free_problem(d, n)
    u = laplace_ground_mode(prob)
    E, lam = fd_energy(u, prob)
    exact = d * (4 / prob.h ** 2) * np.sin(np.pi * prob.h / (4 * prob.L)) ** 2
    assert E == pytest.approx(0.5 * exact, abs=1e-10)
    assert lam == pytest.approx(exact, abs=1e-10)


def test_laplacian_against_dense_matrix():
    prob = free_problem(2, 6)
    n = 6
    T = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / prob.h ** 2
    A = np.kron(T, np.eye(n)) + np.kron(np.eye(n), T)
    u = np.random.default_rng(0).standard_normal((n, n))
    assert np.allclose(prob.laplacian(u).ravel(), A @ u.ravel(), atol=1e-10)
    y = prob.solve_shifted(u)
    assert np.allclose((A + np.eye(n * n)) @ y.ravel(), u.ravel(), atol=1e-10)
    assert np.allclose(prob.solve_shifted(u, "cg"), y, atol=1e-9)


def test_constant_one_energy_2d():
    prob = FdProblem.from_potential(make_potential("lattice2d"), 200)
    E, _ = fd_energy(constant_init(prob), prob)
    assert E == pytest.approx(0.6495, rel=2e-2)


def test_constant_one_energy_3d():
    prob = FdProblem.from_potential(make_potential("traplattice3d"), 99)
    E, _ = fd_energy(constant_init(prob), prob)
    assert E == pytest.approx(108.40, rel=2e-2)


def test_unnormalised_input_rejected():
    prob = free_problem(1, 10)
    with pytest.raises(FdError, match="normalised"):
        fd_energy(np.ones(10), prob)
    with pytest.raises(FdError, match="shape"):
        fd_energy(np.ones(11), prob)


def _small_2d():
    return FdProblem.from_potential(make_potential("lattice2d"), 40)


def test_flow_properties():
    prob = _small_2d()
    norms = []
    res = h1_solve(random_init(prob), prob, tol=1e-13,
                   callback=lambda row: norms.append(row[1]))
    assert res.converged
    E = [h[1] for h in res.history]
    assert np.all(np.diff(E) <= 0)
    assert np.all(res.u > 0)
    # the fixed point is an eigenfunction of the discrete GP operator
    assert res.history[-1][3] < 1e-5
    assert prob.norm(res.u) == pytest.approx(1.0, abs=1e-12)
    same = h1_solve(constant_init(prob), prob, tol=1e-13)
    assert same.E == pytest.approx(res.E, abs=1e-10)


def test_step_at_ground_state_is_stationary():
    prob = _small_2d()
    res = h1_solve(constant_init(prob), prob, tol=0.0, max_steps=3000)
    u = res.u
    nxt = h1_step(u, prob, 0.1)
    assert prob.norm(nxt - u) <= 1e-8
    assert prob.norm(nxt) == pytest.approx(1.0, abs=1e-12)


def test_cg_and_dst_steps_agree():
    prob = _small_2d()
    u = random_init(prob, 3)
    assert np.allclose(h1_step(u, prob, 0.9, "cg"), h1_step(u, prob, 0.9, "dst"), atol=1e-8)
    with pytest.raises(ValueError):
        h1_step(u, prob, 0.9, "multigrid")


def test_grid_function_interface(tmp_path):
    prob = _small_2d()
    u = constant_init(prob)
    g = to_grid(u, prob)
    assert g.h == pytest.approx(prob.h) and g.norm() == pytest.approx(1.0)
    g.save(tmp_path / "u")
    assert fd_energy(GridFunction.load(tmp_path / "u"), prob) == fd_energy(u, prob)
    with pytest.raises(FdError, match="nodes per axis"):
        fd_energy(GridFunction(np.zeros((5, 5)), prob.L), prob)


def test_history_csv(tmp_path):
    prob = _small_2d()
    res = h1_solve(constant_init(prob), prob, max_steps=3)
    res.to_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "step,E,lambda,residual,tau" and len(lines) == 5


def test_negative_potential_rejected():
    from pwgf.potentials import Potential
    pot = Potential.custom(lambda x: (-np.ones(len(x)), np.zeros_like(x)), 1.0, 1.0, 1)
    with pytest.raises(FdError, match="non-negative"):
        FdProblem.from_potential(pot, 10)


@pytest.mark.slow
def test_reference_energy_3d_n99():
    prob = FdProblem.from_potential(make_potential("traplattice3d"), 99)
    res = h1_solve(constant_init(prob), prob, tol=1e-10)
    assert res.converged
    assert res.E == pytest.approx(33.80, abs=0.1)
