"""Toolkit for time-optimal quantum evolution under operator constraints.

Given an initial state, an energy budget omega (fixing Tr[H^2] = 2*omega^2)
and a set of forbidden Hamiltonian directions, the package produces
time-extremal Hamiltonians H(t), propagators U(t) and minimum times T, and
certifies them against every constraint of the underlying variational
problem -- including the movable-endpoint condition
<psi_f|H(T)F(T)|psi_f> = 1 whose imaginary part separates true extremals
from mere solutions of the evolution equations.
"""

from .algebra import (
    GeneratorBasis,
    StructureTensor,
    build_gellmann_basis,
    build_pauli_string_basis,
    hermitian_commutator,
    is_closed_subalgebra,
    structure_tensor,
)
from .states import (
    BoundaryData,
    DegenerateProblemError,
    PureState,
    boundary_data,
    free_hamiltonian,
    is_trivially_restricted,
)
from .dynamics import (
    ControlProblem,
    MultiplierVector,
    SingularGaugeError,
    Trajectory,
    assemble_hamiltonian,
    eta_matrix,
    g_operator,
    integrate,
    multiplier_rhs,
)
from .solvers import (
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
from .verify import (
    Tolerances,
    VerificationReport,
    certify,
    check_constraints,
    chko_residual,
    endpoint_constraint,
    endpoint_constraint_gate,
    equivalence_check,
    initial_condition_residual,
    speed_profile,
)

__version__ = "0.1.0"

__all__ = [
    "GeneratorBasis",
    "StructureTensor",
    "build_gellmann_basis",
    "build_pauli_string_basis",
    "hermitian_commutator",
    "is_closed_subalgebra",
    "structure_tensor",
    "BoundaryData",
    "DegenerateProblemError",
    "PureState",
    "boundary_data",
    "free_hamiltonian",
    "is_trivially_restricted",
    "ControlProblem",
    "MultiplierVector",
    "SingularGaugeError",
    "Trajectory",
    "assemble_hamiltonian",
    "eta_matrix",
    "g_operator",
    "integrate",
    "multiplier_rhs",
    "ExtremalSolution",
    "NoSolutionError",
    "NotClosedError",
    "SolutionKind",
    "build_two_qubit_f0",
    "m1_boundary",
    "m1_final_state",
    "m1_trajectory",
    "shoot",
    "solve_closed_subalgebra",
    "solve_free",
    "solve_m1_two_level",
    "solve_two_qubit_example",
    "sweep_m1",
    "Tolerances",
    "VerificationReport",
    "certify",
    "check_constraints",
    "chko_residual",
    "endpoint_constraint",
    "endpoint_constraint_gate",
    "equivalence_check",
    "initial_condition_residual",
    "speed_profile",
    "__version__",
]
