"""Hankel matrices of Riccati coefficients and their determinants.

The eigenvalue condition is the vanishing of ``H_D^d(E)``, the
determinant of the D x D matrix with entries ``f_{i+j+d-1}``.  The
determinant is evaluated by LU factorization with partial pivoting on
magnitude, accumulating the pivot product both directly and as a
(phase, log-magnitude) pair; Newton steps for ``H(E) = 0`` come from
the determinant derivative identity ``H'/H = trace(M^-1 M')`` with an
optional pole subtraction that deflates a known root.
"""

from dataclasses import dataclass

import mpmath
from mpmath import mp

from .errors import DeflationCollisionError
from .series import RiccatiCoefficients


@dataclass(frozen=True)
class Deflation:
    """Known root to remove before Newton: location and multiplicity."""

    location: object
    multiplicity: int

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ValueError("deflation multiplicity must be >= 1")


@dataclass(frozen=True)
class HankelProblem:
    """Determinant dimension D, displacement d, optional deflation."""

    dimension: int
    displacement: int = 0
    deflation: Deflation | None = None

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if self.displacement < 0:
            raise ValueError("displacement must be >= 0")

    @property
    def coefficients_needed(self):
        """Highest coefficient index entering the matrix: 2D + d - 1."""
        return 2 * self.dimension + self.displacement - 1


@dataclass
class DetValue:
    """Determinant in simultaneous direct and log-scaled form.

    ``value = sign_phase * exp(log_magnitude)`` up to rounding whenever
    ``sign_phase != 0``; an exactly singular matrix is encoded by
    ``sign_phase == 0`` and ``log_magnitude == -inf``.
    """

    sign_phase: object
    log_magnitude: object
    value: object

    @property
    def is_zero(self):
        return self.sign_phase == 0

    @property
    def log10_magnitude(self):
        if self.is_zero:
            return mpmath.mpf("-inf")
        return self.log_magnitude / mpmath.log(10)


def assemble(coeffs, problem):
    """D x D symmetric matrix with entries f_{i+j+d-1} (i, j 1-based)."""
    f = coeffs.f if isinstance(coeffs, RiccatiCoefficients) else coeffs
    need = problem.coefficients_needed
    if len(f) <= need:
        raise ValueError(
            f"need coefficients through index {need}, got {len(f) - 1}"
        )
    dim, d = problem.dimension, problem.displacement
    return [
        [f[i + j + d - 1] for j in range(1, dim + 1)]
        for i in range(1, dim + 1)
    ]


def _lu_factor(matrix):
    """Partial-pivot LU, in place on a copy.

    Returns (lu, perm, swaps, zero_col) where lu stores L below and U on
    and above the diagonal, perm maps factored rows to original rows,
    and zero_col is the first column whose remaining entries are all
    exactly zero (None for a nonsingular factorization).
    """
    n = len(matrix)
    lu = [row[:] for row in matrix]
    perm = list(range(n))
    swaps = 0
    for k in range(n):
        pivot_row, pivot_mag = k, abs(lu[k][k])
        for i in range(k + 1, n):
            mag = abs(lu[i][k])
            if mag > pivot_mag:
                pivot_row, pivot_mag = i, mag
        if pivot_mag == 0:
            return lu, perm, swaps, k
        if pivot_row != k:
            lu[k], lu[pivot_row] = lu[pivot_row], lu[k]
            perm[k], perm[pivot_row] = perm[pivot_row], perm[k]
            swaps += 1
        pivot = lu[k][k]
        for i in range(k + 1, n):
            factor = lu[i][k] / pivot
            lu[i][k] = factor
            row_i, row_k = lu[i], lu[k]
            for j in range(k + 1, n):
                row_i[j] = row_i[j] - factor * row_k[j]
    return lu, perm, swaps, None


def _det_from_lu(lu, swaps, zero_col, out_prec):
    if zero_col is not None:
        zero = +mp.zero
        return DetValue(sign_phase=zero, log_magnitude=mpmath.mpf("-inf"), value=zero)
    n = len(lu)
    value = mp.one
    phase = mp.one
    logs = []
    for k in range(n):
        pivot = lu[k][k]
        mag = abs(pivot)
        value = value * pivot
        phase = phase * (pivot / mag)
        logs.append(mpmath.log(mag))
    if swaps % 2:
        value = -value
        phase = -phase
    log_mag = mpmath.fsum(logs)
    with mp.workprec(out_prec):
        value = +value
        phase = +phase
        log_mag = +log_mag
    return DetValue(sign_phase=phase, log_magnitude=log_mag, value=value)


def _guard_prec(n):
    return mp.prec + max(32, 2 * n)


def determinant(matrix):
    """Evaluate det(M) as a DetValue at the ambient precision.

    The factorization itself runs with a few guard bits so the returned
    value is correctly rounded relative to the matrix entries; a zero
    pivot column short-circuits to the exact-zero encoding.
    """
    out_prec = mp.prec
    with mp.workprec(_guard_prec(len(matrix))):
        lu, _, swaps, zero_col = _lu_factor(matrix)
        return _det_from_lu(lu, swaps, zero_col, out_prec)


def _lu_solve(lu, perm, rhs_matrix):
    """Columns X of lu*X = P*rhs, returning only the diagonal sum."""
    n = len(lu)
    total = mp.zero
    for col in range(n):
        y = [rhs_matrix[perm[i]][col] for i in range(n)]
        for i in range(1, n):
            y[i] = y[i] - mpmath.fdot(lu[i][:i], y[:i])
        x_col = y
        for i in range(n - 1, -1, -1):
            x_col[i] = (x_col[i] - mpmath.fdot(lu[i][i + 1:], x_col[i + 1:])) / lu[i][i]
        total = total + x_col[col]
    return total


@dataclass
class NewtonStep:
    """One damped-free Newton update for H(E) = 0."""

    step: object
    det: DetValue
    on_root: bool


def newton_step(coeffs, problem, energy):
    """Newton step -1/(trace(M^-1 M') - m/(E - E0)) at the given energy.

    ``coeffs`` must carry the derivative sequence.  The deflation term
    appears only when the problem configures one; it makes the update a
    Newton step for H(E)/(E - E0)^m, whose target root is simple.  An
    exactly singular matrix signals on-root convergence with step 0.
    """
    if coeffs.g is None:
        raise ValueError("newton_step requires the derivative sequence")
    matrix = assemble(coeffs.f, problem)
    deriv = assemble(coeffs.g, problem)
    out_prec = mp.prec
    with mp.workprec(_guard_prec(problem.dimension)):
        lu, perm, swaps, zero_col = _lu_factor(matrix)
        det = _det_from_lu(lu, swaps, zero_col, out_prec)
        if zero_col is not None:
            return NewtonStep(step=mp.zero, det=det, on_root=True)
        trace = _lu_solve(lu, perm, deriv)
        if problem.deflation is not None:
            loc = problem.deflation.location
            if energy == loc:
                raise DeflationCollisionError(
                    "iterate equals the deflation location; choose a different seed"
                )
            trace = trace - problem.deflation.multiplicity / (energy - loc)
        step = -1 / trace
        with mp.workprec(out_prec):
            step = +step if not isinstance(step, mpmath.mpc) else mpmath.mpc(+step.real, +step.imag)
    return NewtonStep(step=step, det=det, on_root=False)
