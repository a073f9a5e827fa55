"""Shared builders for the test suite: random states, reference propagators
and seeded shooting problems."""

import numpy as np

from qbrach.algebra import build_gellmann_basis, build_pauli_string_basis
from qbrach.dynamics import ControlProblem, MultiplierVector
from qbrach.states import PureState

SQ2 = 1.0 / np.sqrt(2.0)
PLUS_X = PureState([SQ2, SQ2])
MINUS_X = PureState([SQ2, -SQ2])
KET0 = PureState([1.0, 0.0])
KET1 = PureState([0.0, 1.0])


def expm_herm(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) for Hermitian h, via eigendecomposition."""
    w, q = np.linalg.eigh(h)
    return (q * np.exp(-1j * w * t)) @ q.conj().T


def random_state(rng: np.random.Generator, n: int) -> PureState:
    amp = rng.normal(size=n) + 1j * rng.normal(size=n)
    return PureState(amp / np.linalg.norm(amp))


def ket(n: int, k: int) -> PureState:
    amp = np.zeros(n, dtype=complex)
    amp[k] = 1.0
    return PureState(amp)


def m1_reference_u(lambda1: float, omega: float, times: np.ndarray) -> np.ndarray:
    """exp[i lambda1 sz t] exp[-i (omega sy + lambda1 sz) t] per sample."""
    basis = build_gellmann_basis(2)
    f0 = omega * basis.generators[1] + lambda1 * basis.generators[2]
    w, q = np.linalg.eigh(f0)
    out = np.empty((times.size, 2, 2), dtype=complex)
    for k, t in enumerate(times):
        v = np.diag([np.exp(1j * lambda1 * t), np.exp(-1j * lambda1 * t)])
        out[k] = v @ (q * np.exp(-1j * w * t)) @ q.conj().T
    return out


def m1_problem(omega: float, psi_f: PureState = None) -> ControlProblem:
    """Two-level problem with sigma_z forbidden, started from |+x>."""
    return ControlProblem(
        basis=build_gellmann_basis(2),
        psi_i=PLUS_X,
        omega=omega,
        forbidden=(2,),
        psi_f=psi_f,
    )


def su4_shoot_seed(seed: int, omega: float = 1.0):
    """A reproducible 4-level shooting instance: 3 random forbidden
    directions, a random allowed-span seed Hamiltonian at the right norm and
    moderate random seed multipliers."""
    rng = np.random.default_rng(seed)
    basis = build_gellmann_basis(4)
    forbidden = tuple(sorted(rng.choice(15, size=3, replace=False).tolist()))
    psi_i = random_state(rng, 4)
    problem = ControlProblem(
        basis=basis, psi_i=psi_i, omega=omega, forbidden=forbidden, psi_f=None
    )
    allowed = [m for m in range(15) if m not in forbidden]
    coef = rng.normal(size=len(allowed))
    h0 = np.einsum("m,mij->ij", coef, basis.generators[allowed])
    h0 *= np.sqrt(2.0) * omega / np.sqrt(np.real(np.einsum("ab,ba->", h0, h0)))
    m0 = MultiplierVector(1.0, rng.normal(size=3) * 0.5)
    return problem, h0, m0


def two_qubit_kets():
    """(basis, |11>, |00>) in the two-qubit Pauli-string convention."""
    basis = build_pauli_string_basis(2)
    ket11 = np.zeros(4, dtype=complex)
    ket11[3] = 1.0
    ket00 = np.zeros(4, dtype=complex)
    ket00[0] = 1.0
    return basis, ket11, ket00
