"""Residual checks certifying a trajectory as time-extremal.

Every check evaluates one defining property of the extremal system:
the three Hamiltonian constraints (tracelessness, energy normalization,
forbidden directions), the conservation-law residual dF/dt + i[H, F] = 0
and its initial structure {F(0), P(0)} = F(0), the endpoint condition
<psi(T)|H(T)F(T)|psi(T)> = 1 (gate variant: Tr[H(T)F(T)] = 1), the speed
bound DeltaE <= omega with its multiplier decomposition, conservation of
Tr[F^2], and the metric identity sqrt(g_tt) = DeltaE.  Residuals are
dimensionless: traces are normalized by powers of omega and operator
norms by ||F(0)||.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

__all__ = [
    "Tolerances",
    "VerificationReport",
    "check_constraints",
    "chko_residual",
    "initial_condition_residual",
    "endpoint_constraint",
    "endpoint_constraint_gate",
    "speed_profile",
    "speed_decomposition_mismatch",
    "equivalence_check",
    "equivalence_residuals",
    "certify",
]

_TINY = 1e-300


@dataclass(frozen=True)
class Tolerances:
    """Pass thresholds for the report verdicts.

    Scale conventions: `speed_excess` and `aa` multiply omega;
    `endpoint_im` and `endpoint_re_floor` multiply omega^2; `eig_drift`
    multiplies max(1, spectral radius of F(0)); everything else applies to
    an already-dimensionless residual.
    """

    traceless: float = 1e-8
    norm: float = 1e-8
    term: float = 1e-8
    chko: float = 1e-8
    initial_cond: float = 1e-8
    endpoint_re: float = 1e-8
    endpoint_im: float = 1e-8
    endpoint_re_floor: float = 1e-6
    gate: float = 1e-8
    speed_excess: float = 1e-9
    trf2: float = 1e-8
    lambda0: float = 1e-9
    eig_drift: float = 1e-7
    aa: float = 1e-6
    equivalence: float = 1e-8
    endpoint_equiv: float = 1e-8
    speed_decomp: float = 1e-8
    u_mismatch: float = 1e-8

    @classmethod
    def analytic(cls) -> "Tolerances":
        """For trajectories built from closed-form expressions."""
        return cls()

    @classmethod
    def integrated(cls) -> "Tolerances":
        """For trajectories from the fixed-step integrator (dt^2-limited)."""
        return cls(
            traceless=1e-6,
            norm=1e-6,
            term=1e-6,
            chko=1e-6,
            endpoint_re=1e-6,
            endpoint_im=1e-6,
            gate=1e-6,
            equivalence=1e-6,
            u_mismatch=1e-6,
        )


@dataclass(frozen=True)
class VerificationReport:
    """All residuals for one trajectory, plus per-field verdicts.

    `endpoint_re` is judged against 1 when the multipliers were
    renormalized, otherwise only against a nonzero floor (a nonzero real
    part is what makes the renormalization possible).  `gate_endpoint` is
    present only when the gate-target variant was requested.
    """

    traceless_max: float
    norm_max: float
    term_max: float
    chko_residual: float
    initial_cond_residual: float
    endpoint_re: float
    endpoint_im: float
    speed_max_excess: float
    trf2_drift: float
    aa_identity_max: float
    eig_drift_max: float
    lambda0_drift: float
    endpoint_equiv_gap: float
    speed_decomp_gap: float
    equivalence_max: float
    u_mismatch: float
    omega: float
    renormalized: bool
    gate_endpoint: Optional[float] = None
    verdict: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict.get("overall", False)

    def as_dict(self) -> dict:
        out = {
            "traceless_max": self.traceless_max,
            "norm_max": self.norm_max,
            "term_max": self.term_max,
            "chko_residual": self.chko_residual,
            "initial_cond_residual": self.initial_cond_residual,
            "endpoint_re": self.endpoint_re,
            "endpoint_im": self.endpoint_im,
            "speed_max_excess": self.speed_max_excess,
            "trf2_drift": self.trf2_drift,
            "aa_identity_max": self.aa_identity_max,
            "eig_drift_max": self.eig_drift_max,
            "lambda0_drift": self.lambda0_drift,
            "endpoint_equiv_gap": self.endpoint_equiv_gap,
            "speed_decomp_gap": self.speed_decomp_gap,
            "equivalence_max": self.equivalence_max,
            "u_mismatch": self.u_mismatch,
            "omega": self.omega,
            "renormalized": self.renormalized,
            "verdict": dict(self.verdict),
        }
        if self.gate_endpoint is not None:
            out["gate_endpoint"] = self.gate_endpoint
        return out

    def render_table(self) -> str:
        mapping = {
            "traceless": self.traceless_max,
            "norm": self.norm_max,
            "term": self.term_max,
            "chko": self.chko_residual,
            "initial_cond": self.initial_cond_residual,
            "endpoint_re": self.endpoint_re,
            "endpoint_im": self.endpoint_im,
            "gate_endpoint": self.gate_endpoint,
            "speed_excess": self.speed_max_excess,
            "trf2": self.trf2_drift,
            "lambda0": self.lambda0_drift,
            "eig_drift": self.eig_drift_max,
            "aa": self.aa_identity_max,
            "equivalence": self.equivalence_max,
            "endpoint_equiv": self.endpoint_equiv_gap,
            "speed_decomp": self.speed_decomp_gap,
            "u_mismatch": self.u_mismatch,
        }
        rows = []
        for name in sorted(self.verdict):
            if name == "overall":
                continue
            value = mapping.get(name)
            flag = "PASS" if self.verdict[name] else "FAIL"
            shown = "n/a" if value is None else f"{value:.6e}"
            rows.append(f"{name:<16} {shown:>14}  {flag}")
        status = "PASS" if self.passed else "FAIL"
        rows.append(f"{'overall':<16} {'':>14}  {status}")
        return "\n".join(rows)


# -- individual checks -------------------------------------------------------


def check_constraints(traj, omega: float) -> Tuple[float, float, float]:
    """Max residuals of the three Hamiltonian constraints over the grid.

    traceless: |Tr H|/omega; norm: |Tr H^2 - 2 omega^2|/(2 omega^2);
    term: |Tr[H X_j]|/omega over all forbidden j.
    """
    H = traj.H
    if H.shape[0] == 0:
        raise ValueError("trajectory has no samples")
    traceless = float(np.abs(np.einsum("kaa->k", H).real).max()) / omega
    norm = float(
        np.abs(np.real(np.einsum("kab,kba->k", H, H)) - 2 * omega**2).max()
    ) / (2 * omega**2)
    if traj.forbidden:
        xf = traj.forbidden_generators()
        term = float(np.abs(np.real(np.einsum("kab,jba->kj", H, xf))).max()) / omega
    else:
        term = 0.0
    return traceless, norm, term


def chko_residual(traj) -> float:
    """Max normalized Frobenius norm of dF/dt + i[H, F] on the grid.

    dF/dt uses second-order central differences (second-order one-sided at
    the boundary samples), so for an exact trajectory the residual is the
    O(dt^2) differencing truncation.  Normalization: omega ||F(0)||_F.
    """
    if traj.times.size < 3:
        raise ValueError("need at least 3 samples to difference dF/dt")
    fdot = np.gradient(traj.F, traj.times, axis=0, edge_order=2)
    resid = fdot + 1.0j * (traj.H @ traj.F - traj.F @ traj.H)
    per_sample = np.linalg.norm(resid.reshape(resid.shape[0], -1), axis=1)
    scale = traj.omega * max(float(np.linalg.norm(traj.F[0])), _TINY)
    return float(per_sample.max()) / scale


def initial_condition_residual(F0: np.ndarray, psi_i) -> float:
    """||F(0)P(0) + P(0)F(0) - F(0)||_F with P(0) = |psi_i><psi_i|.

    Zero exactly when F(0) is supported on the first row and column (with
    vanishing corner) of any basis whose first vector is psi_i.
    """
    amp = psi_i.amplitudes if hasattr(psi_i, "amplitudes") else np.asarray(psi_i, complex)
    F0 = np.asarray(F0, dtype=complex)
    fpsi = F0 @ amp
    fp = np.outer(fpsi, amp.conj())
    return float(np.linalg.norm(fp + fp.conj().T - F0))


def endpoint_constraint(psi_T, H_T: np.ndarray, F_T: np.ndarray) -> Tuple[float, float]:
    """(Re, Im) of <psi_T|H(T)F(T)|psi_T>.

    Extremality requires the imaginary part to vanish; a nonzero real part
    is then rescaled to 1 by renormalizing all multipliers by 1/Re.
    """
    amp = psi_T.amplitudes if hasattr(psi_T, "amplitudes") else np.asarray(psi_T, complex)
    val = complex(amp.conj() @ (H_T @ (F_T @ amp)))
    return val.real, val.imag


def endpoint_constraint_gate(H_T: np.ndarray, F_T: np.ndarray) -> float:
    """Tr[H(T)F(T)] - 1 for gate targets; also asserts Tr[F] = 0."""
    H_T = np.asarray(H_T, dtype=complex)
    F_T = np.asarray(F_T, dtype=complex)
    trf = complex(np.trace(F_T))
    if abs(trf) > 1e-9 * max(1.0, float(np.linalg.norm(F_T))):
        raise ValueError(
            f"companion condition Tr[F] = 0 violated: Tr[F] = {trf:.3e}"
        )
    val = complex(np.einsum("ab,ba->", H_T, F_T))
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise ValueError(
            f"Tr[HF] must be real for Hermitian H, F; got imaginary part {val.imag:.3e}"
        )
    return val.real - 1.0


def speed_profile(traj, omega: float) -> Tuple[np.ndarray, float]:
    """Energy spread DeltaE(t) on the grid and its maximum excess over omega."""
    hpsi = np.einsum("kab,kb->ka", traj.H, traj.psi)
    mean = np.real(np.einsum("ka,ka->k", traj.psi.conj(), hpsi))
    mean_sq = np.real(np.einsum("ka,ka->k", hpsi.conj(), hpsi))
    de = np.sqrt(np.maximum(mean_sq - mean**2, 0.0))
    return de, float((de - omega).max())


def _g_stack(traj) -> np.ndarray:
    K, N = traj.psi.shape
    if not traj.forbidden:
        return np.zeros((K, N, N), dtype=complex)
    xf = traj.forbidden_generators()
    return np.tensordot(traj.lambdas / traj.lambda0[:, None], xf, axes=1)


def speed_decomposition_mismatch(traj, omega: float) -> float:
    """Max gap between DeltaE^2 and its multiplier form omega^2 - (Tr[G^2]/2 - Var G).

    Normalized by omega^2; both sides are evaluated independently from the
    stored samples.
    """
    de, _ = speed_profile(traj, omega)
    G = _g_stack(traj)
    trg2 = np.real(np.einsum("kab,kba->k", G, G))
    gpsi = np.einsum("kab,kb->ka", G, traj.psi)
    g_mean = np.real(np.einsum("ka,ka->k", traj.psi.conj(), gpsi))
    g_sq = np.real(np.einsum("ka,ka->k", gpsi.conj(), gpsi))
    var_g = g_sq - g_mean**2
    rhs = omega**2 - (trg2 / 2.0 - var_g)
    return float(np.abs(de**2 - rhs).max()) / omega**2


def equivalence_residuals(traj) -> Tuple[float, float]:
    """The two equivalent reformulations of the conservation law.

    state form: max ||(dF/dt + i[H,F]) psi|| / (omega ||F(0)||);
    anticommutator form: max ||F P + P F - F||_F / ||F(0)||, P = |psi><psi|.
    """
    if traj.times.size < 3:
        raise ValueError("need at least 3 samples to difference dF/dt")
    fdot = np.gradient(traj.F, traj.times, axis=0, edge_order=2)
    resid = fdot + 1.0j * (traj.H @ traj.F - traj.F @ traj.H)
    state_res = np.linalg.norm(np.einsum("kab,kb->ka", resid, traj.psi), axis=1)
    fnorm = max(float(np.linalg.norm(traj.F[0])), _TINY)
    state_max = float(state_res.max()) / (traj.omega * fnorm)
    fpsi = np.einsum("kab,kb->ka", traj.F, traj.psi)
    fp = np.einsum("ka,kb->kab", fpsi, traj.psi.conj())
    anti = fp + np.conj(np.transpose(fp, (0, 2, 1))) - traj.F
    anti_max = float(
        np.linalg.norm(anti.reshape(anti.shape[0], -1), axis=1).max()
    ) / fnorm
    return state_max, anti_max


def equivalence_check(traj) -> float:
    """Worse of the two reformulation residuals (see equivalence_residuals)."""
    return max(equivalence_residuals(traj))


# -- full certification ------------------------------------------------------


def certify(
    traj,
    tolerances: Optional[Tolerances] = None,
    renormalized: Optional[bool] = None,
    gate: bool = False,
) -> VerificationReport:
    """Evaluate every residual on a trajectory and attach verdicts.

    `renormalized` defaults to the trajectory's own flag; it decides
    whether the endpoint real part is compared against 1 or merely against
    a nonzero floor.  The gate-endpoint residual Tr[HF] - 1 is evaluated
    only on request: for state targets the renormalization fixes
    <psi|HF|psi>, not the full trace, and the two normalizations differ.
    """
    tol = tolerances if tolerances is not None else Tolerances.integrated()
    if renormalized is None:
        renormalized = bool(getattr(traj, "renormalized", False))
    w = traj.omega
    N = traj.dim
    traceless, norm, term = check_constraints(traj, w)
    chko = chko_residual(traj)
    icr = initial_condition_residual(traj.F[0], traj.psi[0])
    f0_norm = max(float(np.linalg.norm(traj.F[0])), _TINY)
    re, im = endpoint_constraint(traj.psi[-1], traj.H[-1], traj.F[-1])
    gate_val = endpoint_constraint_gate(traj.H[-1], traj.F[-1]) if gate else None
    de, excess = speed_profile(traj, w)
    decomp = speed_decomposition_mismatch(traj, w)

    vals = 2 * w**2 * traj.lambda0**2 + N * np.einsum("km,km->k", traj.lambdas, traj.lambdas)
    trf2_drift = float(vals.max() - vals.min()) / max(abs(float(vals[0])), _TINY)
    lam0_drift = float(np.abs(traj.lambda0 - traj.lambda0[0]).max())

    eigs = np.linalg.eigvalsh(traj.F)
    eig_scale = max(1.0, float(np.abs(eigs[0]).max()))
    eig_drift = float(np.abs(eigs - eigs[0]).max())

    psi_dot = np.gradient(traj.psi, traj.times, axis=0, edge_order=2)
    g_tt = np.real(np.einsum("ka,ka->k", psi_dot.conj(), psi_dot)) - np.abs(
        np.einsum("ka,ka->k", traj.psi.conj(), psi_dot)
    ) ** 2
    aa = float(np.abs(np.sqrt(np.maximum(g_tt, 0.0)) - de).max())

    G_T = _g_stack(traj)[-1]
    comm = 1.0j * (traj.H[-1] @ G_T - G_T @ traj.H[-1])
    c2 = float(np.real(traj.psi[-1].conj() @ (comm @ traj.psi[-1])))
    equiv_gap = abs(im + traj.lambda0[-1] * c2 / 2.0) / w**2

    eq_max = equivalence_check(traj)
    mism = float(getattr(traj, "u_mismatch", 0.0))

    verdict = {
        "traceless": bool(traceless <= tol.traceless),
        "norm": bool(norm <= tol.norm),
        "term": bool(term <= tol.term),
        "chko": bool(chko <= tol.chko),
        "initial_cond": bool(icr / f0_norm <= tol.initial_cond),
        "endpoint_re": bool(
            abs(re - 1.0) <= tol.endpoint_re
            if renormalized
            else abs(re) >= tol.endpoint_re_floor * w**2
        ),
        "endpoint_im": bool(abs(im) <= tol.endpoint_im * w**2),
        "speed_excess": bool(excess <= tol.speed_excess * w),
        "trf2": bool(trf2_drift <= tol.trf2),
        "lambda0": bool(lam0_drift <= tol.lambda0),
        "eig_drift": bool(eig_drift <= tol.eig_drift * eig_scale),
        "aa": bool(aa <= tol.aa * w),
        "equivalence": bool(eq_max <= tol.equivalence),
        "endpoint_equiv": bool(equiv_gap <= tol.endpoint_equiv),
        "speed_decomp": bool(decomp <= tol.speed_decomp),
        "u_mismatch": bool(mism <= tol.u_mismatch),
    }
    if gate_val is not None:
        verdict["gate_endpoint"] = bool(abs(gate_val) <= tol.gate)
    verdict["overall"] = all(verdict.values())
    return VerificationReport(
        traceless_max=traceless,
        norm_max=norm,
        term_max=term,
        chko_residual=chko,
        initial_cond_residual=icr,
        endpoint_re=re,
        endpoint_im=im,
        speed_max_excess=excess,
        trf2_drift=trf2_drift,
        aa_identity_max=aa,
        eig_drift_max=eig_drift,
        lambda0_drift=lam0_drift,
        endpoint_equiv_gap=equiv_gap,
        speed_decomp_gap=decomp,
        equivalence_max=eq_max,
        u_mismatch=mism,
        omega=w,
        renormalized=renormalized,
        gate_endpoint=gate_val,
        verdict=verdict,
    )
