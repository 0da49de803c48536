"""Arbitrary-precision eigensolver for perturbed Coulomb problems.

Expands the regularized logarithmic derivative of the wavefunction in a
power series, imposes the rational-approximation condition through
vanishing Hankel determinants of the series coefficients, and follows
the determinant roots over increasing dimension until the wanted digits
stabilize.  Handles real bound states and complex resonance eigenvalues
with the same machinery.
"""

from .errors import (
    BoundaryError,
    ConfigError,
    DeflationCollisionError,
    NonConvergenceError,
    PrecisionExhaustedError,
    RicpadeError,
    StructureError,
    UnsupportedSingularityError,
)
from .hankel import Deflation, DetValue, HankelProblem, assemble, determinant, newton_step
from .models import (
    ModelResult,
    ResonanceProblem,
    ShiftProblem,
    StationaryPointReport,
    barrier_potential,
    confining_potential,
    detect_multiplicity,
    exact_model_null,
    exact_solution_energy,
    multiplicity_slope,
    shift_potential,
    solvable_potential,
    solve_resonance,
    solve_shift,
    spurious_energy,
    stationary_points,
)
from .series import (
    PotentialSpec,
    QGrid,
    RiccatiCoefficients,
    build_qgrid,
    derivative_check,
    recurrence_residual,
    riccati_coefficients,
)
from .solver import (
    AdaptContext,
    ConvergenceReport,
    FindRootResult,
    RootSequence,
    SeedCandidate,
    SequenceEntry,
    SolveOptions,
    adapt_precision,
    estimate_converged,
    find_root,
    run_sequence,
    seed_scan,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
