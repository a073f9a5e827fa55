"""Coupled dynamics of time-extremal quantum evolution.

The unknowns are the frame V(t) obeying dV/dt = iG(t)V(t), the Lagrange
multipliers lambda_0 (energy normalization) and lambda_j (one per forbidden
direction), and the accumulated gauge time tau with dtau/dt = 1/lambda_0.
The optimal Hamiltonian is never integrated; it is reassembled
algebraically at every instant,

    H(t) = V(t) F(0) V(t)^dag / lambda_0(t) - G(t),
    G(t) = sum_j (lambda_j(t)/lambda_0(t)) X_j,

and the conserved operator is obtained by conjugation, F(t) = U F(0) U^dag
= V F(0) V^dag, which keeps its spectrum exactly fixed.  The propagator is
U(t) = V(t) exp(-i F(0) tau(t)); a direct integration of i dU/dt = H U is
carried along purely as a cross-check channel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .algebra import (
    GeneratorBasis,
    build_gellmann_basis,
    build_pauli_string_basis,
    hermitian_commutator,
)
from .states import PureState

__all__ = [
    "ControlProblem",
    "MultiplierVector",
    "Trajectory",
    "SingularGaugeError",
    "g_operator",
    "eta_matrix",
    "multiplier_rhs",
    "assemble_hamiltonian",
    "integrate",
]


class SingularGaugeError(ArithmeticError):
    """lambda_0 reached zero: H = V F(0) V^dag / lambda_0 - G is singular."""


@dataclass(frozen=True)
class ControlProblem:
    """Problem statement: basis, boundary states, energy scale, forbidden set.

    `forbidden` entries may be given as basis indices or labels; they are
    resolved and stored as an ordered index tuple.  `allowed` is the
    complement, in basis order.  psi_f is absent in shooting mode.
    """

    basis: GeneratorBasis
    psi_i: PureState
    omega: float
    forbidden: Tuple[int, ...] = ()
    psi_f: Optional[PureState] = None
    allowed: Tuple[int, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"energy scale omega must be positive, got {self.omega}")
        if self.psi_i.dim != self.basis.dim:
            raise ValueError(
                f"psi_i dimension {self.psi_i.dim} != basis dimension {self.basis.dim}"
            )
        if self.psi_f is not None and self.psi_f.dim != self.basis.dim:
            raise ValueError(
                f"psi_f dimension {self.psi_f.dim} != basis dimension {self.basis.dim}"
            )
        idx = tuple(self.basis.index_of(j) for j in self.forbidden)
        if len(set(idx)) != len(idx):
            raise ValueError("forbidden set contains duplicate generators")
        object.__setattr__(self, "forbidden", idx)
        allowed = tuple(i for i in range(self.basis.size) if i not in set(idx))
        if self.allowed is not None and tuple(self.allowed) != allowed:
            raise ValueError("allowed set must be the complement of the forbidden set")
        object.__setattr__(self, "allowed", allowed)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def n_forbidden(self) -> int:
        return len(self.forbidden)

    def forbidden_generators(self) -> np.ndarray:
        return self.basis.generators[list(self.forbidden)]


@dataclass(frozen=True)
class MultiplierVector:
    """Lagrange multipliers (lambda_0, lambda_j) with j indexed like `forbidden`."""

    lambda0: float
    lambdas: np.ndarray

    def __post_init__(self):
        lams = np.array(self.lambdas, dtype=float).ravel()
        lams.setflags(write=False)
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "lambda0", float(self.lambda0))

    @property
    def size(self) -> int:
        return self.lambdas.size


def _as_pairs(a: np.ndarray) -> list:
    """Complex array -> nested lists of [re, im] pairs (row-major)."""
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _from_pairs(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1.0j * arr[..., 1]


@dataclass(frozen=True)
class Trajectory:
    """Sampled extremal evolution on a uniform-in-construction time grid.

    All matrix stacks are sample-major: V[k] is the frame at times[k], etc.
    `lambdas` has one column per forbidden index (possibly zero columns).
    `renormalized` records whether the multipliers (and with them F) have
    been rescaled so the endpoint constraint evaluates to 1 rather than to
    a generic nonzero real value.  `u_mismatch` is the recorded maximum
    Frobenius gap between U from the frame factorization and U from the
    direct cross-check propagation of i dU/dt = H U.
    """

    times: np.ndarray
    V: np.ndarray
    U: np.ndarray
    H: np.ndarray
    F: np.ndarray
    psi: np.ndarray
    lambda0: np.ndarray
    lambdas: np.ndarray
    tau_acc: np.ndarray
    omega: float
    basis: GeneratorBasis
    forbidden: Tuple[int, ...]
    renormalized: bool = False
    u_mismatch: float = 0.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        K = times.size
        N = self.basis.dim
        M = len(self.forbidden)
        stacks = {}
        for name, shape in (
            ("V", (K, N, N)),
            ("U", (K, N, N)),
            ("H", (K, N, N)),
            ("F", (K, N, N)),
            ("psi", (K, N)),
        ):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            stacks[name] = arr
        lam0 = np.asarray(self.lambda0, dtype=float).ravel()
        lams = np.asarray(self.lambdas, dtype=float).reshape(K, M)
        tau = np.asarray(self.tau_acc, dtype=float).ravel()
        if lam0.size != K or tau.size != K:
            raise ValueError("multiplier/tau arrays must match the time grid length")
        if K > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("time grid must be strictly increasing")
        U = stacks["U"]
        uni = np.einsum("kji,kjl->kil", U.conj(), U) - np.eye(N)
        uni_err = float(np.sqrt(np.abs(np.einsum("kij,kij->k", uni, uni.conj()))).max())
        if uni_err > 1e-8:
            raise ValueError(f"U is not unitary on the grid: max drift {uni_err:.3e}")
        prop = stacks["psi"] - np.einsum("kab,b->ka", U, stacks["psi"][0])
        prop_err = float(np.linalg.norm(prop, axis=1).max())
        if prop_err > 1e-8:
            raise ValueError(
                f"psi(t) != U(t) psi(0) on the grid: max gap {prop_err:.3e}"
            )
        eigs = np.linalg.eigvalsh(stacks["F"])
        spec_tol = 1e-7 * max(1.0, float(np.abs(eigs[0]).max()))
        spec_err = float(np.abs(eigs - eigs[0]).max())
        if spec_err > spec_tol:
            raise ValueError(
                f"F(t) is not isospectral to F(0): max eigenvalue drift {spec_err:.3e}"
            )
        for arr in (times, lam0, lams, tau, *stacks.values()):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "lambda0", lam0)
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "tau_acc", tau)
        for name, arr in stacks.items():
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "forbidden", tuple(int(j) for j in self.forbidden))

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def dim(self) -> int:
        return self.basis.dim

    def multipliers(self, k: int) -> MultiplierVector:
        return MultiplierVector(lambda0=self.lambda0[k], lambdas=self.lambdas[k])

    def forbidden_generators(self) -> np.ndarray:
        return self.basis.generators[list(self.forbidden)]

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "dimension": self.dim,
            "omega": self.omega,
            "basis": self.basis.kind,
            "forbidden": [self.basis.labels[j] for j in self.forbidden],
            "renormalized": self.renormalized,
            "u_mismatch": self.u_mismatch,
            "times": self.times.tolist(),
            "lambda0": self.lambda0.tolist(),
            "lambdas": self.lambdas.tolist(),
            "tau_acc": self.tau_acc.tolist(),
            "psi": _as_pairs(self.psi),
            "V": _as_pairs(self.V),
            "U": _as_pairs(self.U),
            "H": _as_pairs(self.H),
            "F": _as_pairs(self.F),
        }

    @staticmethod
    def from_dict(data: dict) -> "Trajectory":
        N = int(data["dimension"])
        kind = data["basis"]
        if kind == "gellmann":
            basis = build_gellmann_basis(N)
        elif kind == "pauli_strings":
            n = round(math.log2(N))
            if 2**n != N:
                raise ValueError(f"pauli_strings basis needs a power-of-two dimension, got {N}")
            basis = build_pauli_string_basis(n)
        else:
            raise ValueError(f"unknown basis kind {kind!r}")
        forbidden = tuple(basis.index_of(j) for j in data["forbidden"])
        return Trajectory(
            times=np.asarray(data["times"], dtype=float),
            V=_from_pairs(data["V"]),
            U=_from_pairs(data["U"]),
            H=_from_pairs(data["H"]),
            F=_from_pairs(data["F"]),
            psi=_from_pairs(data["psi"]),
            lambda0=np.asarray(data["lambda0"], dtype=float),
            lambdas=np.asarray(data["lambdas"], dtype=float).reshape(
                len(data["times"]), len(forbidden)
            ),
            tau_acc=np.asarray(data["tau_acc"], dtype=float),
            omega=float(data["omega"]),
            basis=basis,
            forbidden=forbidden,
            renormalized=bool(data.get("renormalized", False)),
            u_mismatch=float(data.get("u_mismatch", 0.0)),
        )

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @staticmethod
    def from_json(path: str) -> "Trajectory":
        with open(path, "r", encoding="utf-8") as fh:
            return Trajectory.from_dict(json.load(fh))

    def to_csv(self, path: str) -> None:
        """Plot-ready table: t, multipliers, energy spread, constraint residuals."""
        w = self.omega
        h_psi = np.einsum("kab,kb->ka", self.H, self.psi)
        mean = np.real(np.einsum("ka,ka->k", self.psi.conj(), h_psi))
        mean_sq = np.real(np.einsum("ka,ka->k", h_psi.conj(), h_psi))
        de = np.sqrt(np.maximum(mean_sq - mean**2, 0.0))
        traceless = np.abs(np.einsum("kaa->k", self.H).real) / w
        norm_resid = np.abs(
            np.real(np.einsum("kab,kba->k", self.H, self.H)) - 2 * w**2
        ) / (2 * w**2)
        if self.forbidden:
            xf = self.forbidden_generators()
            term = np.abs(np.real(np.einsum("kab,jba->kj", self.H, xf))).max(axis=1) / w
        else:
            term = np.zeros(self.n_samples)
        cols = [self.times, self.lambda0]
        names = ["t", "lambda0"]
        for c, j in enumerate(self.forbidden):
            cols.append(self.lambdas[:, c])
            names.append(f"lambda_{self.basis.labels[j]}")
        cols += [de, traceless, norm_resid, term]
        names += ["delta_e", "resid_traceless", "resid_norm", "resid_term_max"]
        table = np.column_stack(cols)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(names) + "\n")
            for row in table:
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


# -- pointwise assembly ----------------------------------------------------


def g_operator(m: MultiplierVector, basis: GeneratorBasis, forbidden: Sequence[int]) -> np.ndarray:
    """G = sum_j (lambda_j/lambda_0) X_j over the forbidden directions."""
    if abs(m.lambda0) < 1e-12:
        raise SingularGaugeError(
            "lambda_0 vanished; G = sum_j (lambda_j/lambda_0) X_j is undefined"
        )
    idx = [basis.index_of(j) for j in forbidden]
    if len(idx) != m.size:
        raise ValueError(
            f"multiplier vector has {m.size} entries for {len(idx)} forbidden directions"
        )
    if not idx:
        return np.zeros((basis.dim, basis.dim), dtype=complex)
    return np.tensordot(m.lambdas / m.lambda0, basis.generators[idx], axes=1)


def commutator_tensor(basis: GeneratorBasis, forbidden: Sequence[int]) -> np.ndarray:
    """Stack K[j, l] = i[X_j, X_l] over the forbidden pairs, exactly antisymmetric."""
    idx = [basis.index_of(j) for j in forbidden]
    M, N = len(idx), basis.dim
    K = np.zeros((M, M, N, N), dtype=complex)
    for p in range(M):
        for q in range(p + 1, M):
            c = hermitian_commutator(basis.generators[idx[p]], basis.generators[idx[q]])
            K[p, q] = c
            K[q, p] = -c
    return K


def eta_matrix(H: np.ndarray, basis: GeneratorBasis, forbidden: Sequence[int]) -> np.ndarray:
    """eta_jl = Tr[H i[X_j, X_l]] over forbidden pairs; antisymmetric by construction.

    Only the upper triangle is computed; the lower is its exact negation.
    """
    idx = [basis.index_of(j) for j in forbidden]
    M = len(idx)
    eta = np.zeros((M, M))
    for p in range(M):
        for q in range(p + 1, M):
            c = hermitian_commutator(basis.generators[idx[p]], basis.generators[idx[q]])
            eta[p, q] = np.real(np.einsum("ab,ba->", H, c))
            eta[q, p] = -eta[p, q]
    return eta


def multiplier_rhs(
    m: MultiplierVector, H: np.ndarray, eta: np.ndarray, omega: float
) -> Tuple[float, np.ndarray]:
    """Time derivatives of the multipliers.

    d(lambda_j)/dt = (1/N) sum_l lambda_l eta_jl and
    d(lambda_0)/dt = -(1/(2 omega^2 lambda_0)) sum_{j,l} lambda_j lambda_l eta_jl.

    The double contraction pairs a symmetric tensor with the antisymmetric
    eta, so it vanishes identically; the formula is evaluated as written
    and its vanishing is enforced, which catches any asymmetry bug in eta.
    """
    if abs(m.lambda0) < 1e-12:
        raise SingularGaugeError("lambda_0 vanished in the multiplier equations")
    N = H.shape[0]
    etalam = eta @ m.lambdas if m.size else np.zeros(0)
    dlams = etalam / N
    quad = float(m.lambdas @ etalam) if m.size else 0.0
    dlam0 = -quad / (2.0 * omega**2 * m.lambda0)
    guard = 1e-9 * omega * (1.0 + float(m.lambdas @ m.lambdas) / omega**2)
    if abs(dlam0) > guard:
        raise ArithmeticError(
            "the contraction sum_jl lambda_j lambda_l eta_jl must vanish by "
            f"antisymmetry of eta, but d(lambda_0)/dt = {dlam0:.3e}"
        )
    return dlam0, dlams


def assemble_hamiltonian(
    m: MultiplierVector,
    V: np.ndarray,
    F0: np.ndarray,
    basis: GeneratorBasis,
    forbidden: Sequence[int],
) -> np.ndarray:
    """H = V F(0) V^dag / lambda_0 - G; traceless whenever Tr F(0) = 0."""
    if abs(m.lambda0) < 1e-12:
        raise SingularGaugeError(
            "lambda_0 vanished; H = V F(0) V^dag / lambda_0 - G is undefined"
        )
    G = g_operator(m, basis, forbidden)
    return (V @ F0 @ V.conj().T) / m.lambda0 - G


# -- trajectory synthesis --------------------------------------------------


def finalize_trajectory(
    *,
    basis: GeneratorBasis,
    forbidden: Tuple[int, ...],
    omega: float,
    psi_i: PureState,
    times: np.ndarray,
    V: np.ndarray,
    lambda0: np.ndarray,
    lambdas: np.ndarray,
    tau_acc: np.ndarray,
    F0: np.ndarray,
    U_direct: Optional[np.ndarray] = None,
    renormalized: bool = False,
) -> Trajectory:
    """Derive the full sampled trajectory from the integrated frame data.

    U(t) = V(t) exp(-i F(0) tau(t)) via one eigendecomposition of F(0);
    F(t) = V F(0) V^dag (identical to U F(0) U^dag since F(0) commutes with
    its own exponential); H(t) = F(t)/lambda_0(t) - G(t); psi = U psi_i.
    """
    times = np.asarray(times, dtype=float)
    V = np.asarray(V, dtype=complex)
    K = times.size
    w_eig, Q = np.linalg.eigh(F0)
    phases = np.exp(-1.0j * np.outer(tau_acc, w_eig))
    expF = np.einsum("ab,kb,cb->kac", Q, phases, Q.conj())
    U = V @ expF
    F = V @ F0 @ np.conj(np.transpose(V, (0, 2, 1)))
    if len(forbidden):
        Xf = basis.generators[list(forbidden)]
        G = np.tensordot(lambdas / lambda0[:, None], Xf, axes=1)
    else:
        G = np.zeros((K, basis.dim, basis.dim), dtype=complex)
    H = F / lambda0[:, None, None] - G
    psi = np.einsum("kab,b->ka", U, psi_i.amplitudes)
    mismatch = 0.0
    if U_direct is not None:
        mismatch = float(np.linalg.norm((U - U_direct).reshape(K, -1), axis=1).max())
    return Trajectory(
        times=times,
        V=V,
        U=U,
        H=H,
        F=F,
        psi=psi,
        lambda0=lambda0,
        lambdas=lambdas,
        tau_acc=tau_acc,
        omega=omega,
        basis=basis,
        forbidden=forbidden,
        renormalized=renormalized,
        u_mismatch=mismatch,
    )


def _validate_h0(problem: ControlProblem, H0: np.ndarray, tol: float = 1e-8) -> None:
    w = problem.omega
    if H0.shape != (problem.dim, problem.dim):
        raise ValueError(f"H0 has shape {H0.shape}, expected square of dim {problem.dim}")
    herm = float(np.linalg.norm(H0 - H0.conj().T)) / max(1.0, float(np.linalg.norm(H0)))
    if herm > 1e-10:
        raise ValueError(f"H0 is not Hermitian (relative deviation {herm:.3e})")
    tr = abs(complex(np.trace(H0))) / w
    if tr > tol:
        raise ValueError(f"H0 violates Tr[H] = 0: |Tr H0|/omega = {tr:.3e}")
    nrm = abs(float(np.real(np.einsum("ab,ba->", H0, H0))) - 2 * w**2) / (2 * w**2)
    if nrm > tol:
        raise ValueError(
            f"H0 violates the energy normalization Tr[H^2] = 2 omega^2 "
            f"(relative residual {nrm:.3e})"
        )
    for j in problem.forbidden:
        x = problem.basis.generators[j]
        t = abs(float(np.real(np.einsum("ab,ba->", H0, x)))) / w
        if t > tol:
            raise ValueError(
                f"H0 violates the forbidden-direction constraint "
                f"Tr[H X] = 0 for X = {problem.basis.labels[j]}: |Tr|/omega = {t:.3e}"
            )


def integrate(
    problem: ControlProblem,
    m0: MultiplierVector,
    H0: np.ndarray,
    t_max: float,
    dt: Optional[float] = None,
) -> Trajectory:
    """Fixed-step RK4 integration of the coupled frame/multiplier system.

    The integrated vector concatenates V, the direct-propagation cross-check
    U_d (i dU_d/dt = H U_d), lambda_0, the lambda_j and tau.  V is
    re-unitarized every 100 steps by polar projection; if its unitarity has
    drifted beyond 1e-6 at such a checkpoint the whole integration restarts
    at half the step (at most 20 halvings), preserving a uniform grid.
    F(0) is fixed once from the seed, F(0) = lambda_0(0) (H0 + G(0)), and
    only conjugated afterwards.
    """
    H0 = np.asarray(H0, dtype=complex)
    _validate_h0(problem, H0)
    if m0.size != problem.n_forbidden:
        raise ValueError(
            f"multiplier vector length {m0.size} != forbidden set size {problem.n_forbidden}"
        )
    if abs(m0.lambda0) < 1e-12:
        raise SingularGaugeError("lambda_0(0) = 0 is a singular gauge")
    if not t_max > 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    w = problem.omega
    if dt is None:
        dt = 1e-3 / w
    if not 0 < dt <= t_max:
        raise ValueError(f"dt must lie in (0, t_max], got {dt}")

    N = problem.dim
    M = problem.n_forbidden
    Xf = problem.forbidden_generators()
    G0 = np.tensordot(m0.lambdas / m0.lambda0, Xf, axes=1) if M else np.zeros((N, N), complex)
    F0 = m0.lambda0 * (H0 + G0)
    Kten = commutator_tensor(problem.basis, problem.forbidden) if M > 1 else None

    n2 = N * N
    i_lam0 = 2 * n2
    sl_lams = slice(2 * n2 + 1, 2 * n2 + 1 + M)
    i_tau = 2 * n2 + 1 + M
    size = 2 * n2 + M + 2
    inv2w2 = 1.0 / (2.0 * w**2)
    sign0 = 1.0 if m0.lambda0 > 0 else -1.0

    def rhs(y: np.ndarray) -> np.ndarray:
        V = y[0:n2].reshape(N, N)
        Ud = y[n2 : 2 * n2].reshape(N, N)
        lam0 = y[i_lam0].real
        if abs(lam0) < 1e-10:
            raise SingularGaugeError(
                "lambda_0 crossed zero during integration; the gauge is singular"
            )
        lams = y[sl_lams].real
        inv_lam0 = 1.0 / lam0
        G = np.tensordot(lams * inv_lam0, Xf, axes=1) if M else 0.0
        H = (V @ F0 @ V.conj().T) * inv_lam0 - G
        k = np.empty(size, dtype=complex)
        if M > 1:
            eta = np.einsum("jlab,ba->jl", Kten, H).real
            etalam = eta @ lams
            dlam0 = -float(lams @ etalam) * inv2w2 * inv_lam0
            guard = 1e-9 * w * (1.0 + float(lams @ lams) / w**2)
            if abs(dlam0) > guard:
                raise ArithmeticError(
                    "the contraction sum_jl lambda_j lambda_l eta_jl must vanish "
                    f"by antisymmetry of eta, but d(lambda_0)/dt = {dlam0:.3e}"
                )
            k[sl_lams] = etalam / N
            k[i_lam0] = dlam0
        else:
            # a single (or empty) forbidden set has identically zero eta
            k[sl_lams] = 0.0
            k[i_lam0] = 0.0
        k[0:n2] = (1.0j * (G @ V)).ravel() if M else 0.0
        k[n2 : 2 * n2] = (-1.0j * (H @ Ud)).ravel()
        k[i_tau] = inv_lam0
        return k

    last_err: Optional[Exception] = None
    for halving in range(21):
        step = dt / (2**halving)
        n_steps = max(1, math.ceil(t_max / step - 1e-12))
        step = t_max / n_steps
        y = np.zeros(size, dtype=complex)
        y[0:n2] = np.eye(N, dtype=complex).ravel()
        y[n2 : 2 * n2] = np.eye(N, dtype=complex).ravel()
        y[i_lam0] = m0.lambda0
        y[sl_lams] = m0.lambdas
        Vs = np.empty((n_steps + 1, N, N), dtype=complex)
        Uds = np.empty((n_steps + 1, N, N), dtype=complex)
        lam0s = np.empty(n_steps + 1)
        lamss = np.empty((n_steps + 1, M))
        taus = np.empty(n_steps + 1)
        Vs[0] = np.eye(N)
        Uds[0] = np.eye(N)
        lam0s[0] = m0.lambda0
        lamss[0] = m0.lambdas
        taus[0] = 0.0
        drifted = False
        half = 0.5 * step
        sixth = step / 6.0
        try:
            for i in range(n_steps):
                k1 = rhs(y)
                k2 = rhs(y + half * k1)
                k3 = rhs(y + half * k2)
                k4 = rhs(y + step * k3)
                y = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)
                lam0_now = y[i_lam0].real
                if lam0_now * sign0 <= 1e-10:
                    raise SingularGaugeError(
                        "lambda_0 crossed zero during integration; the gauge is singular"
                    )
                if (i + 1) % 100 == 0:
                    V = y[0:n2].reshape(N, N)
                    drift = float(np.linalg.norm(V.conj().T @ V - np.eye(N)))
                    if drift > 1e-6:
                        drifted = True
                        break
                    uu, _, vt = np.linalg.svd(V)
                    y[0:n2] = (uu @ vt).ravel()
                Vs[i + 1] = y[0:n2].reshape(N, N)
                Uds[i + 1] = y[n2 : 2 * n2].reshape(N, N)
                lam0s[i + 1] = lam0_now
                lamss[i + 1] = y[sl_lams].real
                taus[i + 1] = y[i_tau].real
        except (SingularGaugeError, ArithmeticError) as exc:
            raise exc
        if drifted:
            last_err = ArithmeticError(
                f"frame unitarity drifted beyond 1e-6 at step size {step:.3e}"
            )
            continue
        times = np.arange(n_steps + 1) * step
        times[-1] = t_max
        return finalize_trajectory(
            basis=problem.basis,
            forbidden=problem.forbidden,
            omega=w,
            psi_i=problem.psi_i,
            times=times,
            V=Vs,
            lambda0=lam0s,
            lambdas=lamss,
            tau_acc=taus,
            F0=F0,
            U_direct=Uds,
        )
    raise ArithmeticError(
        "frame unitarity could not be maintained after 20 step halvings"
    ) from last_err
