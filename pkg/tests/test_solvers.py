"""Solvers: free transport, closed-subalgebra flows, two-level enumeration,
the restricted two-qubit instance and general forward shooting."""

import logging
import math

import numpy as np
import pytest

import helpers
from qbrach.dynamics import ControlProblem, MultiplierVector, SingularGaugeError
from qbrach.solvers import (
    TWO_QUBIT_FORBIDDEN,
    ExtremalSolution,
    NoSolutionError,
    NotClosedError,
    SolutionKind,
    build_two_qubit_f0,
    m1_boundary,
    m1_final_state,
    m1_trajectory,
    shoot,
    solve_closed_subalgebra,
    solve_free,
    solve_m1_two_level,
    solve_two_qubit_example,
    sweep_m1,
)
from qbrach.states import PureState
from qbrach.verify import endpoint_constraint

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

# endpoint pair produced by the lambda_1 = 3 branch at omega = 10 (duration
# sqrt(a^2 - b^2)/omega with a = pi/4 + 2*pi/2, b = 3 T)
DESIGNED_OB = 0.6732909377195485
DESIGNED_PHI = -2.953791334823616
DESIGNED_T = 0.37613750263324641


def m1_oracle_fields(lams, Ts, omega):
    """Final states and endpoint values of the forbidden-sigma_z flow on a
    (lambda_1, T) grid, built from the closed-form 2x2 propagator
    U = diag(e^{i lam T}, e^{-i lam T}) exp(-i (omega sy + lam sz) T)."""
    lam = np.asarray(lams, float)[:, None]
    T = np.asarray(Ts, float)[None, :]
    big = np.sqrt(lam**2 + omega**2)
    a = big * T
    ca, sa = np.cos(a), np.sin(a)
    E = np.empty((lam.shape[0], T.shape[1], 2, 2), dtype=complex)
    E[..., 0, 0] = ca - 1j * sa * lam / big
    E[..., 0, 1] = -sa * omega / big
    E[..., 1, 0] = sa * omega / big
    E[..., 1, 1] = ca + 1j * sa * lam / big
    ph = np.exp(1j * lam * T)
    U = np.empty_like(E)
    U[..., 0, :] = ph[..., None] * E[..., 0, :]
    U[..., 1, :] = ph.conj()[..., None] * E[..., 1, :]
    psiT = np.einsum("nmab,b->nma", U, helpers.PLUS_X.amplitudes)
    th = 2.0 * lam * T
    H = np.zeros_like(E)
    H[..., 0, 1] = -1j * omega * np.exp(1j * th)
    H[..., 1, 0] = 1j * omega * np.exp(-1j * th)
    F = np.zeros_like(E)
    F[..., 0, 0] = lam + 0.0 * T
    F[..., 1, 1] = -(lam + 0.0 * T)
    F[..., 0, 1] = H[..., 0, 1]
    F[..., 1, 0] = H[..., 1, 0]
    val = np.einsum("nma,nmab,nmbc,nmc->nm", psiT.conj(), H, F, psiT)
    return psiT, val


def m1_oracle_mismatch(omega_b, phi, lams, Ts, omega):
    """max(1 - fidelity, |Im<psi|HF|psi>|/omega^2) over the grid; any true
    extremal reaching (omega_b, phi) zeroes both entries simultaneously."""
    psiT, val = m1_oracle_fields(lams, Ts, omega)
    tgt = m1_final_state(omega_b, phi).amplitudes
    fid = np.abs(np.einsum("a,nma->nm", tgt.conj(), psiT))
    return np.maximum(1.0 - fid, np.abs(val.imag) / omega**2)


# -------------------------------------------------------------- solve_free


def test_solve_free_bit_flip():
    sol = solve_free(helpers.KET0, helpers.KET1, omega=1.0)
    assert sol.kind is SolutionKind.FREE
    assert sol.T == pytest.approx(np.pi / 2, abs=1e-14)
    assert sol.multipliers0.lambda0 == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(sol.H0, SY, atol=1e-14)
    traj = sol.trajectory
    assert traj.renormalized
    re, im = endpoint_constraint(traj.psi[-1], traj.H[-1], traj.F[-1])
    assert re == pytest.approx(1.0, abs=1e-12)
    assert abs(im) <= 1e-12
    assert sol.report.passed
    fid = abs(np.vdot(helpers.KET1.amplitudes, traj.psi[-1]))
    assert fid == pytest.approx(1.0, abs=1e-12)


def test_solve_free_degenerate_pair_is_trivial():
    sol = solve_free(helpers.PLUS_X, helpers.PLUS_X, omega=3.0)
    assert sol.T == 0.0
    assert sol.trajectory is None
    assert sol.report is None
    np.testing.assert_array_equal(sol.H0, np.zeros((2, 2)))


def test_solve_free_random_five_level():
    rng = np.random.default_rng(3)
    psi_i = helpers.random_state(rng, 5)
    psi_f = helpers.random_state(rng, 5)
    omega = 2.0
    sol = solve_free(psi_i, psi_f, omega)
    ob = math.acos(min(1.0, abs(psi_i.overlap(psi_f))))
    assert sol.T == pytest.approx(ob / omega, rel=1e-14)
    assert sol.report.passed
    fid = abs(np.vdot(psi_f.amplitudes, sol.trajectory.psi[-1]))
    assert fid == pytest.approx(1.0, abs=1e-9)


def test_solve_free_rejects_bad_omega():
    with pytest.raises(ValueError):
        solve_free(helpers.KET0, helpers.KET1, omega=0.0)


# ------------------------------------------------------ two-qubit instance


def test_two_qubit_full_rotation_reaches_bell_partner():
    sol = solve_two_qubit_example(np.pi / 2, omega=1.0)
    assert sol.kind is SolutionKind.TWO_QUBIT_EXAMPLE
    assert sol.T == pytest.approx(np.pi / np.sqrt(2.0), rel=1e-14)
    _, ket11, ket00 = helpers.two_qubit_kets()
    final = sol.trajectory.psi[-1]
    # |11> rotates fully onto i|00>
    assert np.vdot(ket00, final) == pytest.approx(1j, abs=1e-9)
    assert sol.report.passed


def test_two_qubit_slowdown_is_sqrt_two():
    omega, omega_b = 10.0, 0.7
    basis, ket11, ket00 = helpers.two_qubit_kets()
    sol = solve_two_qubit_example(omega_b, omega)
    target = PureState(np.cos(omega_b) * ket11 + 1j * np.sin(omega_b) * ket00)
    free = solve_free(PureState(ket11), target, omega)
    assert sol.T == pytest.approx(np.sqrt(2.0) * free.T, rel=1e-12)
    # constant H0 = (omega/sqrt2) s2s2 and energy spread omega/sqrt2 throughout
    np.testing.assert_allclose(
        sol.H0, omega / np.sqrt(2.0) * np.kron(SY, SY), atol=1e-12
    )
    traj = sol.trajectory
    hp = np.einsum("kab,kb->ka", traj.H, traj.psi)
    mean = np.real(np.einsum("ka,ka->k", traj.psi.conj(), hp))
    de = np.sqrt(np.real(np.einsum("ka,ka->k", hp.conj(), hp)) - mean**2)
    np.testing.assert_allclose(de, omega / np.sqrt(2.0), atol=1e-9 * omega)
    assert sol.report.passed


def test_two_qubit_small_angle_continuity():
    omega = 1.0
    sol = solve_two_qubit_example(1e-3, omega)
    assert sol.T == pytest.approx(np.sqrt(2.0) * 1e-3, rel=1e-12)
    assert sol.report.passed


def test_two_qubit_rejects_bad_angles():
    with pytest.raises(ValueError):
        solve_two_qubit_example(0.0, 1.0)
    with pytest.raises(ValueError):
        solve_two_qubit_example(2.0, 1.0)
    with pytest.raises(ValueError):
        solve_two_qubit_example(0.5, -1.0)


def test_build_two_qubit_f0_structure_and_relations():
    mu22, mu23, mu32 = 1.1, -0.7, 0.3
    omega = math.sqrt(2.0 * (mu22**2 + mu23**2 + mu32**2))
    free = {"10": 0.25, "01": -0.15, "12": 0.4}
    h0, f0 = build_two_qubit_f0(mu22, mu23, mu32, free_lambdas=free, omega=omega)
    basis, ket11, _ = helpers.two_qubit_kets()
    # H(0) carries exactly the three mu terms
    expected_h0 = (
        mu22 * np.kron(SY, SY) + mu23 * np.kron(SY, SZ) + mu32 * np.kron(SZ, SY)
    )
    np.testing.assert_allclose(h0, expected_h0, atol=1e-13)
    # multiplier coefficients obey the linear relations that kill every
    # matrix element of F(0) outside the first row/column of the psi_i frame
    coef = basis.coefficients(f0)
    table = {
        "σ1¹": free["10"],
        "σ1²": -mu23,
        "σ1³": 0.0,
        "σ2¹": free["01"],
        "σ2²": -mu32,
        "σ2³": 0.0,
        "σ1¹σ2¹": -mu22,
        "σ1¹σ2²": free["12"],
        "σ1²σ2¹": free["12"],
        "σ1¹σ2³": -free["10"],
        "σ1³σ2¹": -free["01"],
    }
    for label, value in table.items():
        assert coef[basis.index_of(label)] == pytest.approx(value, abs=1e-12)
    # structure check: F(0) psi_i spans everything F(0) does
    fpsi = f0 @ ket11
    overlap = complex(ket11.conj() @ fpsi)
    col = fpsi - overlap * ket11
    proj = np.outer(col, ket11.conj())
    proj = proj + proj.conj().T
    assert float(np.linalg.norm(f0 - proj)) <= 1e-12
    assert abs(overlap) <= 1e-12


def test_build_two_qubit_f0_validation():
    with pytest.raises(ValueError):
        build_two_qubit_f0(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        build_two_qubit_f0(1.0, 0.0, 0.0, omega=3.0)
    with pytest.raises(ValueError):
        build_two_qubit_f0(1.0, 0.0, 0.0, free_lambdas={"22": 1.0})
    # omitted omega falls back to the value implied by the norm constraint
    h0, _ = build_two_qubit_f0(1.0, 0.0, 0.0)
    assert np.real(np.trace(h0 @ h0)) == pytest.approx(2.0 * 2.0, rel=1e-12)


# ------------------------------------------------- two-level enumeration


def test_m1_designed_pair_recovers_branch():
    omega = 10.0
    sols = solve_m1_two_level(DESIGNED_OB, DESIGNED_PHI, omega)
    assert len(sols) == 1
    sol = sols[0]
    assert sol.kind is SolutionKind.M1_TWO_LEVEL
    assert sol.branch == (2, 0)
    assert sol.T == pytest.approx(DESIGNED_T, abs=1e-12)
    lam1 = sol.multipliers0.lambdas[0] * omega**2
    assert lam1 == pytest.approx(3.0, abs=1e-9)
    assert sol.report.passed
    fid = abs(
        np.vdot(
            m1_final_state(DESIGNED_OB, DESIGNED_PHI).amplitudes,
            sol.trajectory.psi[-1],
        )
    )
    assert fid == pytest.approx(1.0, abs=1e-9)


def test_m1_branch_satisfies_matching_identities():
    omega = 10.0
    sol = solve_m1_two_level(DESIGNED_OB, DESIGNED_PHI, omega)[0]
    k, _ = sol.branch
    lam1 = sol.multipliers0.lambdas[0] * omega**2
    a = math.hypot(omega, lam1) * sol.T
    b = lam1 * sol.T
    sin_t, cos_t = b / a, omega * sol.T / a
    sgn = -1.0 if k % 2 else 1.0
    sin2ob, cos2ob = math.sin(2 * DESIGNED_OB), math.cos(2 * DESIGNED_OB)
    r1 = sgn * cos_t + math.cos(DESIGNED_PHI) * sin2ob
    r2 = sgn * sin_t * math.sin(2.0 * b) - cos2ob
    r3 = sgn * sin_t * math.cos(2.0 * b) - math.sin(DESIGNED_PHI) * sin2ob
    assert max(abs(r1), abs(r2), abs(r3)) <= 1e-8
    # hypotenuse identity and the endpoint selection rule
    assert a * a - b * b == pytest.approx((omega * sol.T) ** 2, abs=1e-10)
    assert abs(lam1 * math.cos(2.0 * a)) <= 1e-8


def test_m1_enumeration_agrees_with_grid_oracle():
    omega = 10.0
    sols = solve_m1_two_level(DESIGNED_OB, DESIGNED_PHI, omega)
    T_enum = sols[0].T
    lam1 = sols[0].multipliers0.lambdas[0] * omega**2
    # the enumerated point zeroes both endpoint conditions in the oracle
    psiT, val = m1_oracle_fields([lam1], [T_enum], omega)
    tgt = m1_final_state(DESIGNED_OB, DESIGNED_PHI).amplitudes
    assert abs(np.vdot(tgt, psiT[0, 0])) == pytest.approx(1.0, abs=1e-12)
    assert abs(val[0, 0].imag) / omega**2 <= 1e-12
    assert val[0, 0].real == pytest.approx(omega**2, rel=1e-12)
    # and no earlier stopping time admits a competing solution anywhere on
    # a dense multiplier range: the joint residual stays bounded away from 0
    lams = np.linspace(-6.0, 6.0, 481)
    ts = np.linspace(0.005, 0.95 * T_enum, 600)
    mm = m1_oracle_mismatch(DESIGNED_OB, DESIGNED_PHI, lams, ts, omega)
    assert float(mm.min()) > 1e-3


def test_m1_unreachable_pair_raises():
    with pytest.raises(NoSolutionError):
        solve_m1_two_level(np.pi / 3, np.pi / 2, omega=1.0)


def test_m1_unreachable_pair_confirmed_by_grid_oracle():
    # independent confirmation: over a dense (lambda_1, T) grid the joint
    # endpoint residual never comes close to zero for this endpoint pair
    omega = 10.0
    lams = np.linspace(-6.0, 6.0, 481)
    ts = np.linspace(0.005, 0.8, 1061)
    mm = m1_oracle_mismatch(np.pi / 3, np.pi / 2, lams, ts, omega)
    assert float(mm.min()) > 0.01


def test_m1_rejects_non_binding_or_out_of_range_input():
    with pytest.raises(ValueError):
        solve_m1_two_level(0.5, 0.0, 1.0)  # sin(phi) = 0: constraint is free
    with pytest.raises(ValueError):
        solve_m1_two_level(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        solve_m1_two_level(np.pi / 2, 1.0, 1.0)
    with pytest.raises(ValueError):
        solve_m1_two_level(0.5, 1.0, -1.0)


def test_m1_trajectory_renormalization_gauge():
    omega = 10.0
    traj = m1_trajectory(3.0, 0.35, omega, renormalize=True)
    assert traj.renormalized
    np.testing.assert_allclose(traj.lambda0, 1.0 / omega**2, rtol=1e-13)
    np.testing.assert_allclose(traj.lambdas[:, 0], 3.0 / omega**2, rtol=1e-13)
    raw = m1_trajectory(3.0, 0.35, omega, n_samples=traj.n_samples - 1)
    # renormalization changes neither H nor the motion
    np.testing.assert_allclose(raw.H, traj.H, atol=1e-12)
    np.testing.assert_allclose(raw.psi, traj.psi, atol=1e-13)
    with pytest.raises(ValueError):
        m1_trajectory(1.0, 0.0, omega)
    with pytest.raises(ValueError):
        m1_trajectory(1.0, 0.5, -1.0)


def test_m1_boundary_round_trip():
    rng = np.random.default_rng(17)
    for _ in range(25):
        ob = rng.uniform(0.05, np.pi / 2 - 0.05)
        phi = rng.uniform(-np.pi + 1e-6, np.pi)
        psi = m1_final_state(ob, phi)
        ob2, phi2 = m1_boundary(psi)
        assert ob2 == pytest.approx(ob, abs=1e-12)
        assert np.exp(1j * phi2) == pytest.approx(np.exp(1j * phi), abs=1e-10)
        # global phases do not change the answer
        shifted = PureState(np.exp(1.3j) * psi.amplitudes)
        ob3, phi3 = m1_boundary(shifted)
        assert ob3 == pytest.approx(ob2, abs=1e-12)
        assert np.exp(1j * phi3) == pytest.approx(np.exp(1j * phi2), abs=1e-10)


def test_m1_boundary_degenerate_directions():
    ob, phi = m1_boundary(helpers.PLUS_X)
    assert ob == pytest.approx(0.0, abs=1e-12)
    assert phi == 0.0
    ob, phi = m1_boundary(helpers.MINUS_X)
    assert ob == pytest.approx(np.pi / 2, abs=1e-12)
    assert phi == 0.0


# ------------------------------------------------------------------ sweep


def test_sweep_m1_fields():
    omega = 10.0
    lt = np.array([0.0, 0.03])
    ts = np.linspace(0.05, 0.5, 40)
    out = sweep_m1(lt, ts, omega)
    assert out["amplitude"].shape == (2, 40)
    # lambda_1 = 0 is free evolution from |+x>: overlap amplitude |cos wT|
    np.testing.assert_allclose(out["amplitude"][0], np.abs(np.cos(omega * ts)), atol=1e-12)
    np.testing.assert_allclose(out["im_field"][0], 0.0, atol=1e-12)
    # the raw-gauge real part sits at omega^2 over the whole grid
    np.testing.assert_allclose(out["re_field"], omega**2, rtol=1e-9)


def test_sweep_m1_vanishes_on_designed_branch():
    omega = 10.0
    out = sweep_m1([3.0 / omega**2], [DESIGNED_T], omega)
    assert abs(out["im_field"][0, 0]) <= 1e-9


def test_sweep_m1_matches_matrix_product_oracle():
    omega = 10.0
    rng = np.random.default_rng(23)
    lt = rng.uniform(-0.05, 0.05, size=6)
    ts = rng.uniform(0.05, 0.6, size=7)
    out = sweep_m1(lt, ts, omega)
    for i, ltv in enumerate(lt):
        for j, t in enumerate(ts):
            lam1 = ltv * omega**2
            u = helpers.m1_reference_u(lam1, omega, np.array([t]))[0]
            psi = u @ helpers.PLUS_X.amplitudes
            amp = abs(np.vdot(psi, helpers.PLUS_X.amplitudes))
            assert out["amplitude"][i, j] == pytest.approx(amp, abs=1e-11)
            v = np.diag([np.exp(1j * lam1 * t), np.exp(-1j * lam1 * t)])
            h = omega * v @ SY @ v.conj().T
            f = h + lam1 * SZ
            val = psi.conj() @ h @ f @ psi
            assert out["im_field"][i, j] == pytest.approx(
                val.imag / omega**2, abs=1e-10
            )
            assert out["re_field"][i, j] == pytest.approx(val.real, rel=1e-10)


def test_sweep_m1_rejects_nonpositive_times():
    with pytest.raises(ValueError):
        sweep_m1([0.0], [0.0])


# --------------------------------------------------- closed-subalgebra flow


def test_closed_solver_single_forbidden_direction():
    omega = 10.0
    problem = helpers.m1_problem(omega)
    sol = solve_closed_subalgebra(
        problem, omega * SY, MultiplierVector(1.0, [2.5]), t_max=0.5
    )
    assert sol.kind is SolutionKind.CLOSED_SUBALGEBRA
    assert sol.T == pytest.approx(0.07619481378479523, abs=1e-12)
    assert sol.report.passed
    # renormalized multipliers divide the raw seed by Re<psi|HF|psi> = w^2
    assert sol.multipliers0.lambda0 == pytest.approx(1.0 / omega**2, rel=1e-9)
    assert sol.multipliers0.lambdas[0] == pytest.approx(2.5 / omega**2, rel=1e-9)


def test_closed_solution_confirmed_by_branch_enumeration():
    omega = 10.0
    problem = helpers.m1_problem(omega)
    sol = solve_closed_subalgebra(
        problem, omega * SY, MultiplierVector(1.0, [2.5]), t_max=0.5
    )
    ob, phi = m1_boundary(PureState(sol.trajectory.psi[-1]))
    assert ob == pytest.approx(0.7402464323959657, abs=1e-9)
    assert phi == pytest.approx(2.913553727284504, abs=1e-9)
    branches = solve_m1_two_level(ob, phi, omega)
    assert branches[0].branch == (0, 0)
    assert branches[0].T == pytest.approx(sol.T, abs=1e-10)
    lam1 = branches[0].multipliers0.lambdas[0] * omega**2
    assert lam1 == pytest.approx(2.5, abs=1e-8)
    # the free problem for the same endpoints is strictly faster
    free = solve_free(problem.psi_i, PureState(sol.trajectory.psi[-1]), omega)
    assert free.T < sol.T


def test_closed_solver_empty_forbidden_matches_free_time():
    problem = ControlProblem(
        basis=helpers.build_gellmann_basis(2),
        psi_i=helpers.KET0,
        omega=1.0,
        forbidden=(),
        psi_f=helpers.KET1,
    )
    sol = solve_closed_subalgebra(
        problem, SY, MultiplierVector(1.0, []), t_max=2.0
    )
    assert sol.T == pytest.approx(np.pi / 2, abs=1e-6)
    assert sol.report.passed


def test_closed_solver_two_qubit_open_set_accepted_with_warning(caplog):
    omega, omega_b = 10.0, 0.7
    basis, ket11, ket00 = helpers.two_qubit_kets()
    target = PureState(np.cos(omega_b) * ket11 + 1j * np.sin(omega_b) * ket00)
    problem = ControlProblem(
        basis=basis,
        psi_i=PureState(ket11),
        omega=omega,
        forbidden=TWO_QUBIT_FORBIDDEN,
        psi_f=target,
    )
    mu = omega / math.sqrt(2.0)
    h0 = mu * np.kron(SY, SY)
    lams = np.zeros(len(TWO_QUBIT_FORBIDDEN))
    lams[problem.forbidden.index(basis.index_of("σ1¹σ2¹"))] = -mu
    with caplog.at_level(logging.WARNING, logger="qbrach"):
        sol = solve_closed_subalgebra(
            problem, h0, MultiplierVector(1.0, lams), t_max=0.5
        )
    assert "not closed" in caplog.text
    assert sol.T == pytest.approx(math.sqrt(2.0) * omega_b / omega, abs=1e-7)
    # the flow is constant here: H(t) never leaves the seed
    np.testing.assert_allclose(
        sol.trajectory.H, np.broadcast_to(h0, sol.trajectory.H.shape), atol=1e-9
    )
    assert sol.report.passed


def test_closed_solver_rejects_drifting_open_set():
    basis = helpers.m1_problem(1.0).basis
    problem = ControlProblem(
        basis=basis, psi_i=helpers.KET0, omega=1.0, forbidden=(0, 1)
    )
    with pytest.raises(NotClosedError):
        solve_closed_subalgebra(
            problem, SZ, MultiplierVector(1.0, [0.5, 0.5]), t_max=1.0
        )


def test_closed_solver_window_too_short():
    problem = helpers.m1_problem(10.0)
    with pytest.raises(NoSolutionError):
        solve_closed_subalgebra(
            problem, 10.0 * SY, MultiplierVector(1.0, [2.5]), t_max=0.01
        )


def test_closed_solver_degenerate_needs_target():
    problem = ControlProblem(
        basis=helpers.m1_problem(1.0).basis, psi_i=helpers.KET0, omega=1.0
    )
    with pytest.raises(NoSolutionError):
        solve_closed_subalgebra(problem, SY, MultiplierVector(1.0, []), t_max=2.0)


def test_closed_solver_rejects_singular_gauge():
    problem = helpers.m1_problem(1.0)
    with pytest.raises(SingularGaugeError):
        solve_closed_subalgebra(problem, SY, MultiplierVector(0.0, [1.0]), t_max=1.0)


# ------------------------------------------------------------------- shoot


def test_shoot_agrees_with_closed_solver():
    omega = 10.0
    problem = helpers.m1_problem(omega)
    closed = solve_closed_subalgebra(
        problem, omega * SY, MultiplierVector(1.0, [2.5]), t_max=0.5
    )
    shot = shoot(problem, omega * SY, MultiplierVector(1.0, [2.5]), t_max=0.5)
    assert shot.kind is SolutionKind.SHOT
    assert shot.T == pytest.approx(closed.T, abs=1e-9)
    assert shot.report.passed


def test_shoot_free_seed_stops_at_target_angle():
    omega = 10.0
    problem = ControlProblem(
        basis=helpers.m1_problem(1.0).basis, psi_i=helpers.KET0, omega=omega
    )
    sol = shoot(
        problem,
        omega * SY,
        MultiplierVector(1.0, []),
        t_max=0.2,
        target_bures_angle=0.9,
    )
    assert sol.T == pytest.approx(0.09, abs=1e-10)
    assert sol.report.passed
    with pytest.raises(NoSolutionError):
        shoot(problem, omega * SY, MultiplierVector(1.0, []), t_max=0.2)


def test_shoot_is_deterministic():
    problem, h0, m0 = helpers.su4_shoot_seed(9)
    a = shoot(problem, h0, m0, t_max=3.0)
    b = shoot(problem, h0, m0, t_max=3.0)
    assert a.T == b.T
    assert np.array_equal(a.trajectory.U, b.trajectory.U)
    assert np.array_equal(a.trajectory.lambdas, b.trajectory.lambdas)


def test_shoot_four_level_random_seed():
    problem, h0, m0 = helpers.su4_shoot_seed(7)
    assert problem.forbidden == (8, 10, 12)
    sol = shoot(problem, h0, m0, t_max=3.0)
    assert sol.T == pytest.approx(0.90530825891501188, abs=1e-9)
    assert sol.report.passed
    # multipliers genuinely move along a generic non-closed instance
    lam = sol.trajectory.lambdas
    assert float(np.abs(lam - lam[0]).max()) > 1e-4 * float(np.abs(lam).max())


def test_shoot_projects_structure_violating_seed(caplog):
    basis = helpers.m1_problem(1.0).basis
    problem = ControlProblem(
        basis=basis, psi_i=helpers.KET0, omega=1.0, forbidden=(0,)
    )
    h0 = (SY + SZ) / math.sqrt(2.0)
    with caplog.at_level(logging.WARNING, logger="qbrach"):
        sol = shoot(problem, h0, MultiplierVector(1.0, [0.3]), t_max=2.0)
    assert "first-row/column" in caplog.text
    assert sol.T == pytest.approx(0.7230176141676502, abs=1e-9)
    assert sol.report.passed
    assert sol.multipliers0.lambdas[0] == pytest.approx(0.424264068712, abs=1e-8)


def test_shoot_validation():
    problem = helpers.m1_problem(1.0)
    with pytest.raises(SingularGaugeError):
        shoot(problem, SY, MultiplierVector(0.0, [1.0]), t_max=1.0)
    with pytest.raises(ValueError):
        shoot(problem, SY, MultiplierVector(1.0, [1.0, 2.0]), t_max=1.0)
    with pytest.raises(ValueError):
        shoot(problem, np.array([[0.0, 1.0], [0.0, 0.0]]), MultiplierVector(1.0, [1.0]), t_max=1.0)
    free = ControlProblem(basis=problem.basis, psi_i=helpers.KET0, omega=1.0)
    # a seed parallel to the initial state projects to nothing
    with pytest.raises(ValueError):
        shoot(free, SZ, MultiplierVector(1.0, []), t_max=1.0)


# --------------------------------------------------------- solution object


def test_extremal_solution_serialization():
    sol = solve_free(helpers.KET0, helpers.KET1, omega=1.0)
    data = sol.to_dict()
    assert data["kind"] == "free"
    assert data["branch"] is None
    assert data["T"] == sol.T
    assert data["report"]["verdict"]["endpoint_im"] is True
    assert data["trajectory"]["dimension"] == 2
    assert data["multipliers0"]["lambda0"] == pytest.approx(1.0)
