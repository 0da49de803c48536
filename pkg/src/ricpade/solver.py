"""Root-finding drivers: Newton iteration, D-sequences, convergence
estimation, seed scanning, and precision adaptation."""

from dataclasses import dataclass, field, replace

import mpmath
from mpmath import mp

from .errors import NonConvergenceError, PrecisionExhaustedError
from .hankel import HankelProblem, determinant, assemble, newton_step
from .numbers import decimal_digits, default_newton_tol, to_mpf, workprec
from .series import riccati_coefficients

_STALL_WINDOW = 10
_STALL_SHRINK = 0.8


@dataclass
class SolveOptions:
    """Knobs for a sequence run; defaults mirror the production setup."""

    dim_min: int = 2
    dim_max: int = 20
    displacements: tuple = (0, 1)
    precision_bits: int = 512
    precision_max: int = 8192
    newton_tol: object = None  # None: 10^-(0.9 * decimal digits)
    max_iter: int = 60

    def __post_init__(self):
        if self.dim_min < 2:
            raise ValueError("dim_min must be >= 2")
        if self.dim_max < self.dim_min:
            raise ValueError("dim_max must be >= dim_min")
        if self.precision_bits > self.precision_max:
            raise ValueError("precision_bits must not exceed precision_max")
        if self.precision_bits < 64:
            raise ValueError("precision_bits must be >= 64")

    def tolerance(self, bits):
        if self.newton_tol is not None:
            return mpmath.mpf(self.newton_tol)
        return default_newton_tol(bits)


@dataclass
class FindRootResult:
    root: object
    residual_log10: object
    iterations: int
    precision_bits: int
    seed_residual_log10: object = None
    step_sizes: list = field(default_factory=list)


class _Stagnation(Exception):
    """Internal: Newton stopped making progress above tolerance."""

    def __init__(self, last_iterate, spread=None):
        super().__init__("stagnation")
        self.last_iterate = last_iterate
        self.spread = spread


@dataclass
class AdaptContext:
    """Inputs to the precision-escalation rule."""

    precision_bits: int
    precision_max: int
    stagnating: bool = False
    spread_digits: float | None = None

    @property
    def spread_threshold(self):
        return 0.5 * decimal_digits(self.precision_bits)


def adapt_precision(ctx):
    """Double the working precision, or fail at the cap.

    Escalation is justified either by Newton stagnating above tolerance
    or by the coefficient log-magnitude spread exceeding half of the
    available decimal digits.
    """
    needs_more = ctx.stagnating or (
        ctx.spread_digits is not None and ctx.spread_digits > ctx.spread_threshold
    )
    if not needs_more:
        return ctx.precision_bits
    doubled = 2 * ctx.precision_bits
    if doubled > ctx.precision_max:
        raise PrecisionExhaustedError(
            f"precision {doubled} would exceed cap {ctx.precision_max}"
        )
    return doubled


def coefficient_spread(coeffs, problem):
    """Decimal-digit spread of |f_j| over the indices the matrix uses."""
    mags = [
        abs(x)
        for x in coeffs.f[1 : problem.coefficients_needed + 1]
        if abs(x) != 0
    ]
    if len(mags) < 2:
        return 0.0
    top, bottom = max(mags), min(mags)
    return float(mpmath.log10(top) - mpmath.log10(bottom))


def _final_residual(grid, problem, energy, bits):
    coeffs = riccati_coefficients(grid, energy, problem.coefficients_needed,
                                  precision_bits=bits)
    with workprec(bits):
        return determinant(assemble(coeffs, problem)).log10_magnitude


def _newton_once(grid, problem, seed, opts, bits):
    """Newton iteration at fixed precision.

    Raises _Stagnation when ten iterations shrink the step by less than
    a factor of 0.8 while still above tolerance, and NonConvergenceError
    at the iteration cap.
    """
    with workprec(bits):
        if isinstance(seed, mpmath.mpc):
            energy = mpmath.mpc(+seed.real, +seed.imag)
        else:
            energy = to_mpf(seed)
        tol = opts.tolerance(bits)
        need = problem.coefficients_needed
        steps = []
        seed_log = None
        for iteration in range(1, opts.max_iter + 1):
            coeffs = riccati_coefficients(grid, energy, need, with_derivative=True,
                                          precision_bits=bits)
            if iteration == 1:
                spread = coefficient_spread(coeffs, problem)
                if spread > 0.5 * decimal_digits(bits):
                    raise _Stagnation(energy, spread=spread)
            update = newton_step(coeffs, problem, energy)
            if iteration == 1:
                seed_log = update.det.log10_magnitude
            if update.on_root:
                return FindRootResult(
                    root=energy,
                    residual_log10=mpmath.mpf("-inf"),
                    iterations=iteration,
                    precision_bits=bits,
                    seed_residual_log10=seed_log,
                    step_sizes=steps,
                )
            energy = energy + update.step
            size = abs(update.step)
            steps.append(size)
            if size < tol * max(1, abs(energy)):
                return FindRootResult(
                    root=energy,
                    residual_log10=_final_residual(grid, problem, energy, bits),
                    iterations=iteration,
                    precision_bits=bits,
                    seed_residual_log10=seed_log,
                    step_sizes=steps,
                )
            if (
                len(steps) > _STALL_WINDOW
                and steps[-1] >= _STALL_SHRINK * steps[-1 - _STALL_WINDOW]
            ):
                raise _Stagnation(energy)
        raise NonConvergenceError(
            f"no convergence in {opts.max_iter} iterations "
            f"(D={problem.dimension}, d={problem.displacement})",
            last_iterate=energy,
        )


def find_root(grid, problem, seed, opts, precision_bits=None):
    """Newton-solve H(E) = 0 from a seed, escalating precision on stall.

    Fresh Riccati coefficients are generated at every iterate; the
    iteration stops when the relative step drops below the tolerance.
    Stagnation or excessive coefficient spread doubles the precision and
    restarts from the seed, failing once the cap would be exceeded.
    """
    bits = precision_bits if precision_bits is not None else opts.precision_bits
    while True:
        try:
            return _newton_once(grid, problem, seed, opts, bits)
        except _Stagnation as stall:
            ctx = AdaptContext(
                precision_bits=bits,
                precision_max=opts.precision_max,
                stagnating=stall.spread is None,
                spread_digits=stall.spread,
            )
            try:
                bits = adapt_precision(ctx)
            except PrecisionExhaustedError as exc:
                exc.last_iterate = stall.last_iterate
                raise


@dataclass
class SequenceEntry:
    dimension: int
    root: object
    residual_log10: object
    iterations: int
    precision_bits: int
    seed_residual_log10: object = None


@dataclass
class RootSequence:
    """Roots for increasing D at one displacement, each seeded from the
    previous entry."""

    displacement: int
    entries: list

    @property
    def final_root(self):
        return self.entries[-1].root

    def stability_digits(self, cap):
        """floor(-log10 |r_D - r_{D-1}| / max(|r_D|, 1e-30)), capped."""
        if len(self.entries) < 2:
            return 0
        last, prev = self.entries[-1].root, self.entries[-2].root
        return _agreement_digits(last, prev, cap)


def _agreement_digits(a, b, cap):
    diff = abs(a - b)
    if diff == 0:
        return cap
    rel = diff / max(abs(a), mpmath.mpf("1e-30"))
    if rel >= 1:
        return 0
    return min(cap, int(mpmath.floor(-mpmath.log10(rel))))


def run_sequence(grid, displacement, opts, seed, deflation_rule=None,
                 solve_fn=None, skip_failures=False):
    """Chain find_root over D = dim_min..dim_max.

    The root at each dimension seeds the next.  A single-D failure is
    retried once at doubled precision; when that also fails the default
    is to abort with the partial sequence attached, while model drivers
    pass ``skip_failures`` to drop the offending dimension and continue
    from the last good root (the branch a model tracks need not exist
    at every dimension).  ``deflation_rule`` maps a dimension to a
    Deflation (or None); ``solve_fn`` substitutes a custom per-D solver.
    """
    solver = solve_fn if solve_fn is not None else find_root
    entries = []
    bits = opts.precision_bits
    current = seed
    for dim in range(opts.dim_min, opts.dim_max + 1):
        problem = HankelProblem(
            dimension=dim,
            displacement=displacement,
            deflation=deflation_rule(dim) if deflation_rule else None,
        )
        try:
            result = solver(grid, problem, current, opts, bits)
        except (NonConvergenceError, PrecisionExhaustedError) as exc:
            failure = exc
            doubled = 2 * bits
            if isinstance(exc, NonConvergenceError) and doubled <= opts.precision_max:
                try:
                    result = solver(grid, problem, current, opts, doubled)
                    bits = doubled
                    failure = None
                except (NonConvergenceError, PrecisionExhaustedError) as exc2:
                    failure = exc2
            if failure is not None:
                if skip_failures:
                    continue
                raise NonConvergenceError(
                    f"sequence aborted at D={dim} (d={displacement}): {failure}",
                    last_iterate=getattr(failure, "last_iterate", None),
                    partial=RootSequence(displacement=displacement, entries=entries),
                ) from failure
        bits = result.precision_bits
        entries.append(SequenceEntry(
            dimension=dim,
            root=result.root,
            residual_log10=result.residual_log10,
            iterations=result.iterations,
            precision_bits=bits,
            seed_residual_log10=result.seed_residual_log10,
        ))
        current = result.root
    if not entries:
        raise NonConvergenceError(
            f"no dimension in {opts.dim_min}..{opts.dim_max} produced an "
            f"acceptable root (d={displacement})",
            partial=RootSequence(displacement=displacement, entries=[]),
        )
    return RootSequence(displacement=displacement, entries=entries)


@dataclass
class ConvergenceReport:
    """Certified output of a pair of d-sequences.

    ``stable_digits`` measures the last step of the value-bearing
    sequence, ``d_agreement_digits`` the match between the two final
    roots; the certified count is the minimum of the two.
    """

    value: object
    stable_digits: int
    d_agreement_digits: int
    precision_used: int

    @property
    def certified_digits(self):
        return min(self.stable_digits, self.d_agreement_digits)

    def certified_floor(self):
        """Absolute size below which digits are not certified."""
        return mpmath.mpf(10) ** (-self.certified_digits) * max(
            abs(self.value), mpmath.mpf("1e-30")
        )


def estimate_converged(seq0, seq1):
    """Compare two displacement sequences and certify digits.

    The reported value is the final root of ``seq0`` (callers pass the
    internally more stable sequence first); equal roots cap the digit
    counts at the working-precision digit budget.
    """
    if not seq0.entries or not seq1.entries:
        raise ValueError("both sequences must be non-empty")
    bits = max(e.precision_bits for e in seq0.entries + seq1.entries)
    cap = decimal_digits(bits)
    stable = seq0.stability_digits(cap)
    agreement = _agreement_digits(seq0.final_root, seq1.final_root, cap)
    return ConvergenceReport(
        value=seq0.final_root,
        stable_digits=stable,
        d_agreement_digits=agreement,
        precision_used=bits,
    )


@dataclass
class SeedCandidate:
    value: object
    residual_log10: object


def _scan_value(grid, problem, point, bits):
    coeffs = riccati_coefficients(grid, point, problem.coefficients_needed,
                                  precision_bits=bits)
    det = determinant(assemble(coeffs, problem))
    value = det.value
    if problem.deflation is not None and not det.is_zero:
        value = value / (point - problem.deflation.location) ** problem.deflation.multiplicity
    return value


def seed_scan(grid, problem, region, grid_points=64, log_spacing=False,
              precision_bits=None):
    """Locate root candidates in a real interval or complex rectangle.

    Real mode evaluates the (deflated) determinant on a grid and turns
    sign changes into candidates at the bracket midpoint; complex mode
    takes local minima of log|H| on a rectangular grid.  Candidates come
    back sorted by |H| ascending; an empty list means the region showed
    no structure.
    """
    if grid_points < 8:
        raise ValueError("grid_points must be >= 8")
    bits = precision_bits if precision_bits is not None else mp.prec
    with workprec(bits):
        lo, hi = region[0], region[1]
        if not isinstance(lo, (tuple, list)):
            return _scan_real(grid, problem, to_mpf(lo), to_mpf(hi),
                              grid_points, log_spacing, bits)
        (re_lo, re_hi), (im_lo, im_hi) = region
        return _scan_rectangle(grid, problem, to_mpf(re_lo), to_mpf(re_hi),
                               to_mpf(im_lo), to_mpf(im_hi), grid_points, bits)


def _scan_real(grid, problem, lo, hi, n, log_spacing, bits):
    if log_spacing and not (0 < lo < hi):
        raise ValueError("log spacing needs 0 < lo < hi")
    points = []
    for i in range(n + 1):
        t = mpmath.mpf(i) / n
        if log_spacing:
            points.append(lo * (hi / lo) ** t)
        else:
            points.append(lo + (hi - lo) * t)
    values = [_scan_value(grid, problem, x, bits) for x in points]
    candidates = []
    for (x1, v1), (x2, v2) in zip(zip(points, values), zip(points[1:], values[1:])):
        if v1 == 0:
            candidates.append(SeedCandidate(x1, mpmath.mpf("-inf")))
            continue
        if v1 * v2 < 0:
            mid = mpmath.sqrt(x1 * x2) if log_spacing else (x1 + x2) / 2
            small = min(abs(v1), abs(v2))
            candidates.append(SeedCandidate(mid, mpmath.log10(small)))
    candidates.sort(key=lambda c: c.residual_log10)
    return candidates


def _scan_rectangle(grid, problem, re_lo, re_hi, im_lo, im_hi, n, bits):
    n_im = max(4, n // 8)
    logabs = {}
    points = {}
    for i in range(n + 1):
        for j in range(n_im + 1):
            z = mpmath.mpc(
                re_lo + (re_hi - re_lo) * mpmath.mpf(i) / n,
                im_lo + (im_hi - im_lo) * mpmath.mpf(j) / n_im,
            )
            v = _scan_value(grid, problem, z, bits)
            points[(i, j)] = z
            logabs[(i, j)] = mpmath.log10(abs(v)) if v != 0 else mpmath.mpf("-inf")
    candidates = []
    for (i, j), lg in logabs.items():
        neighbors = [
            logabs[(i + di, j + dj)]
            for di in (-1, 0, 1)
            for dj in (-1, 0, 1)
            if (di, dj) != (0, 0) and (i + di, j + dj) in logabs
        ]
        if all(lg <= other for other in neighbors):
            candidates.append(SeedCandidate(points[(i, j)], lg))
    candidates.sort(key=lambda c: c.residual_log10)
    return candidates
