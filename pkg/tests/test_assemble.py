import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import goafem as gf
from conftest import energy_error_to_exact
from goafem.problem import ProblemData


def test_laplace_b_equals_asym(square_mesh, laplace):
    space = gf.build_space(gf.uniform_refine(square_mesh, 3), 1)
    system = gf.assemble(space, laplace)
    assert abs(system.B - system.A_sym).max() == 0.0
    assert abs(system.A_sym - system.A_sym.T).max() <= 1e-12 * abs(system.A_sym).max()


def test_empty_system(square_mesh, laplace):
    space = gf.build_space(square_mesh, 1)
    system = gf.assemble(space, laplace)
    assert system.n == 0
    u = gf.solve_direct(system, "primal")
    assert u.values.shape == (0,)
    assert gf.goal_value(system, u, u) == 0.0
    assert gf.energy_norm(system, u) == 0.0


def test_coarse_galerkin_value(square_mesh, laplace):
    # single interior hat on the 8-triangle mesh: stiffness 4, load 1/3
    mesh = gf.uniform_refine(square_mesh, 2)
    space = gf.build_space(mesh, 1)
    system = gf.assemble(space, laplace)
    u = gf.solve_direct(system, "primal")
    assert u.values[0] == pytest.approx(1.0 / 12.0, rel=1e-12)


def test_hat_energy(square_mesh, laplace):
    mesh = gf.uniform_refine(square_mesh, 2)
    space = gf.build_space(mesh, 1)
    system = gf.assemble(space, laplace)
    phi = gf.DiscreteFunction(space, np.ones(1))
    assert gf.energy_norm(system, phi) ** 2 == pytest.approx(4.0, rel=1e-12)


def test_benchmark1_nonsymmetric(bench1):
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 3)
    space = gf.build_space(mesh, 1)
    system = gf.assemble(space, bench1.problem)
    assert abs(system.B - system.B.T).max() > 1e-3


def test_energy_norm_zero_and_scaling(bench1):
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 3)
    space = gf.build_space(mesh, 1)
    system = gf.assemble(space, bench1.problem)
    assert gf.energy_norm(system, gf.zero_function(space)) == 0.0
    rng = np.random.default_rng(5)
    v = rng.standard_normal(space.dim)
    assert gf.energy_norm(system, 2.0 * v) == pytest.approx(
        2.0 * gf.energy_norm(system, v), rel=1e-12)


def test_energy_norm_dimension_mismatch(square_mesh, laplace):
    mesh = gf.uniform_refine(square_mesh, 2)
    system = gf.assemble(gf.build_space(mesh, 1), laplace)
    with pytest.raises(ValueError):
        gf.energy_norm(system, np.zeros(17))


def test_goal_identity_for_exact_primal(bench1):
    # G_H(u_H*, z) = G(u_H*) for any z
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 4)
    space = gf.build_space(mesh, 1)
    system = gf.assemble(space, bench1.problem)
    u = gf.solve_direct(system, "primal")
    exact = float(system.G_vec @ u.values)
    rng = np.random.default_rng(11)
    for _ in range(5):
        z = gf.DiscreteFunction(space, rng.standard_normal(space.dim))
        assert gf.goal_value(system, u, z) == pytest.approx(exact, rel=1e-10, abs=1e-14)


def test_goal_zero(bench1):
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 2)
    space = gf.build_space(mesh, 1)
    system = gf.assemble(space, bench1.problem)
    z = gf.zero_function(space)
    assert gf.goal_value(system, z, z) == 0.0


def test_galerkin_orthogonality(bench1):
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 4)
    space = gf.build_space(mesh, 1)
    system = gf.assemble(space, bench1.problem)
    u = gf.solve_direct(system, "primal")
    res = system.B @ u.values - system.F_vec
    assert np.abs(res).max() <= 1e-10 * np.linalg.norm(system.F_vec)
    z = gf.solve_direct(system, "dual")
    res_d = system.B.T @ z.values - system.G_vec
    assert np.abs(res_d).max() <= 1e-10 * np.linalg.norm(system.G_vec)


def test_solve_direct_error_decreases(bench1):
    # known exact solution of benchmark 1
    errors = []
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 2)
    for _ in range(3):
        space = gf.build_space(mesh, 1)
        system = gf.assemble(space, bench1.problem)
        u = gf.solve_direct(system, "primal")
        errors.append(energy_error_to_exact(space, bench1.problem,
                                            bench1.exact_grad_u, u))
        mesh = gf.uniform_refine(mesh)
    assert errors[1] < errors[0]
    assert errors[2] < errors[1]


def test_cea_type_monotonicity(bench1):
    # energy error monotone under refinement up to 5% slack
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 2)
    prev = None
    for _ in range(4):
        space = gf.build_space(mesh, 1)
        system = gf.assemble(space, bench1.problem)
        u = gf.solve_direct(system, "primal")
        err = energy_error_to_exact(space, bench1.problem, bench1.exact_grad_u, u)
        if prev is not None:
            assert err <= 1.05 * prev
        prev = err
        mesh = gf.uniform_refine(mesh)


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_goal_value_definition(seed):
    # goal_value == G(u) + F(z) - b(u, z) recomputed from the matrices
    spec = gf.get_benchmark("goal-singularity")
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 2)
    space = gf.build_space(mesh, 1)
    system = gf.assemble(space, spec.problem)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(space.dim)
    z = rng.standard_normal(space.dim)
    expected = (system.G_vec @ u + system.F_vec @ z - z @ (system.B @ u))
    assert gf.goal_value(system, u, z) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_spd_spot_check(bench1):
    pts = np.random.default_rng(0).random((30, 2))
    assert bench1.problem.spd_spot_check(pts)
    bad = ProblemData(A=np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not bad.spd_spot_check(pts)


def test_matrix_market_export(tmp_path, bench1):
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 2)
    system = gf.assemble(gf.build_space(mesh, 1), bench1.problem)
    from goafem.assemble import export_matrix_market

    export_matrix_market(system, str(tmp_path / "dbg"))
    assert (tmp_path / "dbg_B.mtx").exists()
    assert (tmp_path / "dbg_Asym.mtx").exists()


def test_asym_positive_definite(bench1):
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 3)
    system = gf.assemble(gf.build_space(mesh, 2), bench1.problem)
    eigmin = np.linalg.eigvalsh(system.A_sym.toarray()).min()
    assert eigmin > 0.0


def test_assemble_rejects_indefinite_a():
    problem = ProblemData(domain="unit-square", A=np.array([[1.0, 3.0], [3.0, 1.0]]), f=1.0)
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 1)
    with pytest.raises(ValueError):
        gf.assemble(gf.build_space(mesh, 1), problem)


def test_direct_residual_contract(bench1):
    # residual below 1e-12 relative for both sides
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 5)
    system = gf.assemble(gf.build_space(mesh, 1), bench1.problem)
    u = gf.solve_direct(system, "primal")
    z = gf.solve_direct(system, "dual")
    assert np.linalg.norm(system.B @ u.values - system.F_vec) <= 1e-12 * np.linalg.norm(system.F_vec)
    assert np.linalg.norm(system.B.T @ z.values - system.G_vec) <= 1e-12 * np.linalg.norm(system.G_vec)
