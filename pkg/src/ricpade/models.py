"""Perturbed Coulomb model drivers.

Two production models share the Coulomb well ``-1/r`` with quadratic
tails of opposite character:

* the confining model ``-1/r - 2*lam*r + 2*lam^2*r^2`` supports bound
  states; its ground-state energy is computed as a shift ``Delta`` above
  the reference level ``e(lam) = -1/2 - 3*lam``, which is an exact root
  of every Hankel determinant (the logarithmic derivative of the
  associated non-normalizable solution is the rational ``1 - 2*lam*r``)
  and therefore has to be deflated away;
* the barrier model ``-1/r + 2*lam*r - 2*lam^2*r^2`` is unbounded from
  below and supports only resonances, i.e. complex eigenvalues whose
  imaginary part is half the tunneling width.

A third, exactly solvable family ``-1/r + 2*lam*r + 2*lam^2*r^2`` with
energy ``-1/2 + 3*lam`` (eigenfunction ``r*exp(-r - lam*r^2)``) makes
every Hankel determinant vanish identically and serves as a validator.

Near-axis root pairs are a fact of life here: at scattered dimensions
the physical root of the deflated shift determinant leaves the real
axis as a conjugate pair with a tiny imaginary part, and the resonance
roots sit just off a cluster of parasitic near-roots.  Because the real
axis is invariant under the Newton map of a real-coefficient problem,
the drivers chain seeds directly and only nudge the imaginary part
through an escalation ladder when an attempt stalls or jumps away.
"""

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
from mpmath import mp

from .errors import (
    BoundaryError,
    ConfigError,
    NonConvergenceError,
    StructureError,
)
from .hankel import Deflation, HankelProblem, assemble, determinant
from .numbers import (
    decimal_digits,
    exact_fraction,
    frac_from_mpf,
    imag_part,
    real_part,
    to_mpf,
    workprec,
)
from .series import PotentialSpec, build_qgrid, riccati_coefficients
from .solver import (
    RootSequence,
    SolveOptions,
    _newton_once,
    _Stagnation,
    estimate_converged,
    run_sequence,
    seed_scan,
)

MU = Fraction(2)
STATIONARY_THRESHOLD = Fraction(2, 27)


def spurious_energy(lam):
    """Reference level -1/2 - 3*lam, an exact multiple determinant root."""
    return Fraction(-1, 2) - 3 * exact_fraction(lam, "lambda")


def exact_solution_energy(lam):
    """Closed-form energy -1/2 + 3*lam of the solvable family."""
    return Fraction(-1, 2) + 3 * exact_fraction(lam, "lambda")


def confining_potential(lam):
    """Bound-state model: -1/r - 2*lam*r + 2*lam^2*r^2."""
    lam = exact_fraction(lam, "lambda")
    return PotentialSpec(beta=1, mu=MU, v=(0, -1, 0, -2 * lam, 2 * lam**2))


def shift_potential(lam):
    """Confining model in the shift coordinate Delta = E - e(lam).

    Subtracting the reference level moves a constant into the lattice
    slot the energy occupies, so the solver runs natively in Delta and
    the spurious root sits exactly at Delta = 0.
    """
    lam = exact_fraction(lam, "lambda")
    return PotentialSpec(
        beta=1, mu=MU,
        v=(0, -1, -spurious_energy(lam), -2 * lam, 2 * lam**2),
    )


def barrier_potential(lam):
    """Resonance model: -1/r + 2*lam*r - 2*lam^2*r^2."""
    lam = exact_fraction(lam, "lambda")
    return PotentialSpec(beta=1, mu=MU, v=(0, -1, 0, 2 * lam, -2 * lam**2))


def solvable_potential(lam):
    """Exactly solvable family -1/r + 2*lam*r + 2*lam^2*r^2."""
    lam = exact_fraction(lam, "lambda")
    return PotentialSpec(beta=1, mu=MU, v=(0, -1, 0, 2 * lam, 2 * lam**2))


def _default_shift_options():
    return SolveOptions(max_iter=120)


def _default_resonance_options():
    return SolveOptions(max_iter=250)


@dataclass
class ShiftProblem:
    """Ground-state energy shift job for the confining model."""

    lam: Fraction
    options: SolveOptions = field(default_factory=_default_shift_options)

    def __post_init__(self):
        self.lam = exact_fraction(self.lam, "lambda")


@dataclass
class ResonanceProblem:
    """Complex-eigenvalue job for the barrier model."""

    lam: Fraction
    options: SolveOptions = field(default_factory=_default_resonance_options)
    seed: object = None

    def __post_init__(self):
        self.lam = exact_fraction(self.lam, "lambda")


@dataclass
class ModelResult:
    """Report plus the raw sequences and bookkeeping behind it."""

    report: object
    sequences: dict
    lam: Fraction
    mode: str
    seed: object
    multiplicities: dict = field(default_factory=dict)
    im_below_floor: bool | None = None


def _real_view(seq):
    """Copy of a sequence with roots replaced by their real parts."""
    entries = [dataclasses.replace(e, root=real_part(e.root)) for e in seq.entries]
    return RootSequence(displacement=seq.displacement, entries=entries)


def _ladder_solver(rung_seeds, accept=None):
    """Per-dimension solver that walks an imaginary-part ladder.

    Each rung reseeds with a progressively larger imaginary part; a rung
    fails on stall, on iteration exhaustion, or when the converged root
    falls outside the branch window (Newton escaped the local basin).
    """

    def solve(grid, problem, seed, opts, bits):
        failure = None
        for attempt in rung_seeds(seed, bits):
            try:
                result = _newton_once(grid, problem, attempt, opts, bits)
            except _Stagnation as stall:
                failure = NonConvergenceError(
                    f"stalled at D={problem.dimension}, d={problem.displacement}",
                    last_iterate=stall.last_iterate,
                )
                continue
            except NonConvergenceError as exc:
                failure = exc
                continue
            if accept is not None and not accept(result.root):
                failure = NonConvergenceError(
                    f"root off branch at D={problem.dimension}, "
                    f"d={problem.displacement}",
                    last_iterate=result.root,
                )
                continue
            return result
        raise failure

    return solve


def _shift_rungs(seed, bits):
    with workprec(bits):
        re = real_part(seed)
        scale = abs(re)
        yield re
        yield mpmath.mpc(re, mpmath.mpf("1e-4") * scale)
        yield mpmath.mpc(re, mpmath.mpf("1e-2") * scale)


def _resonance_rungs(seed, bits):
    with workprec(bits):
        re = real_part(seed)
        im = abs(imag_part(seed))
        scale = abs(re)
        yield seed
        yield mpmath.mpc(re, max(im, mpmath.mpf("1e-12") * scale))
        yield mpmath.mpc(re, max(100 * im, mpmath.mpf("1e-6") * scale))
        yield mpmath.mpc(re, mpmath.mpf("1e-2") * scale)


_IM_FLUSH = mpmath.mpf("1e-40")


def _normalize_resonance_root(solve):
    """Wrap a solver: flush sub-noise widths to the real axis and report
    the nonnegative member of each conjugate pair."""

    def wrapped(grid, problem, seed, opts, bits):
        result = solve(grid, problem, seed, opts, bits)
        root = result.root
        if isinstance(root, mpmath.mpc):
            # conj under the working precision: mpmath operations round
            # to the ambient context, which may be far coarser here
            with workprec(result.precision_bits):
                if abs(root.imag) < _IM_FLUSH * abs(root.real):
                    root = root.real
                elif root.imag < 0:
                    root = mpmath.conj(root)
        result.root = root
        return result

    return wrapped


def multiplicity_slope(grid, problem, location, precision_bits=None):
    """Least-squares slope of log|H| against log|offset| near a root.

    Samples offsets 10^-6..10^-10 from the root (five decades).  The
    fit runs at a precision sized to resolve |H| ~ offset^D without
    drowning in determinant cancellation.
    """
    dim = problem.dimension
    needed = int((10 * dim + 60) / 0.30103) + 64
    bits = max(precision_bits or 0, needed)
    with workprec(bits):
        loc = to_mpf(location) if not isinstance(location, mpmath.mpc) else location
        xs, ys = [], []
        for k in range(6, 11):
            offset = mpmath.mpf(10) ** (-k)
            point = loc + offset
            coeffs = riccati_coefficients(grid, point, problem.coefficients_needed,
                                          precision_bits=bits)
            det = determinant(assemble(coeffs, problem))
            if det.is_zero:
                raise StructureError("determinant vanished during multiplicity fit")
            xs.append(mpmath.log10(offset))
            ys.append(det.log10_magnitude)
        n = len(xs)
        x_mean = mpmath.fsum(xs) / n
        y_mean = mpmath.fsum(ys) / n
        return mpmath.fsum(
            (x - x_mean) * (y - y_mean) for x, y in zip(xs, ys)
        ) / mpmath.fsum((x - x_mean) ** 2 for x in xs)


def detect_multiplicity(grid, problem, location, precision_bits=None):
    """Measure the multiplicity of a known determinant root.

    Rounds the slope from :func:`multiplicity_slope` to the nearest
    integer.  A slope farther than 0.2 from an integer raises
    StructureError rather than guessing; for displacement 0 the result
    must equal D - 1, the exact factorization order of the spurious
    root.
    """
    slope = multiplicity_slope(grid, problem, location, precision_bits)
    nearest = int(mpmath.nint(slope))
    if abs(slope - nearest) > 0.2:
        raise StructureError(
            f"multiplicity slope {mpmath.nstr(slope, 8)} is not near an integer"
        )
    if problem.displacement == 0 and nearest != problem.dimension - 1:
        raise StructureError(
            f"displacement-0 multiplicity {nearest} != D-1 = {problem.dimension - 1}"
        )
    return nearest


def solve_shift(problem):
    """Ground-state shift Delta(lam) of the confining model.

    Works natively in the shift coordinate with the spurious root
    deflated at Delta = 0: multiplicity D-1 for displacement 0 (exact
    factorization) and the measured multiplicity for displacement 1.
    Sequences lock onto the physical branch by rejecting off-window
    roots at leading dimensions; the displacement-1 sequence anchors on
    the displacement-0 result.  The certified report compares real
    parts, since at scattered dimensions the on-axis root splits into a
    conjugate pair with a sub-certified imaginary part.
    """
    lam = problem.lam
    if lam <= 0:
        raise ConfigError("shift model requires lambda > 0 (lambda = 0 is degenerate)")
    opts = problem.options
    grid = build_qgrid(shift_potential(lam))
    window_hi = 12 * lam

    scan_problem = HankelProblem(dimension=3, displacement=0,
                                 deflation=Deflation(location=0, multiplicity=2))
    with workprec(opts.precision_bits):
        lo = to_mpf(window_hi) * mpmath.mpf("1e-8")
        hi = to_mpf(window_hi)
        candidates = seed_scan(grid, scan_problem, (lo, hi), grid_points=64,
                               log_spacing=True, precision_bits=opts.precision_bits)
    if not candidates:
        raise NonConvergenceError(
            f"seed scan found no bracket in (0, 12*lambda] for lambda={lam}"
        )
    seed = min(c.value for c in candidates)

    multiplicities = {}
    sequences = {}

    def branch_filter(anchor, two_sided):
        with workprec(opts.precision_bits):
            hi = mpmath.mpf("2.5") * anchor
            lo = anchor / mpmath.mpf("2.5") if two_sided else mp.zero

        def accept(x):
            re = real_part(x)
            return lo < re <= hi and abs(imag_part(x)) <= abs(re)

        return accept

    for d in opts.displacements:
        if d == 0:
            anchor = seed

            def deflation_rule(dim):
                multiplicities[(0, dim)] = dim - 1
                return Deflation(location=0, multiplicity=dim - 1)

            accept = branch_filter(anchor, two_sided=False)
        else:
            base = sequences.get(0)
            anchor = real_part(base.final_root) if base is not None else seed

            def deflation_rule(dim, _d=d):
                measured = detect_multiplicity(
                    grid, HankelProblem(dimension=dim, displacement=_d), 0,
                    precision_bits=opts.precision_bits,
                )
                multiplicities[(_d, dim)] = measured
                return Deflation(location=0, multiplicity=measured)

            accept = branch_filter(anchor, two_sided=True)
        sequences[d] = run_sequence(
            grid, d, opts, anchor,
            deflation_rule=deflation_rule,
            solve_fn=_ladder_solver(_shift_rungs, accept=accept),
            skip_failures=True,
        )

    report = _build_report(sequences, real_only=True)
    return ModelResult(
        report=report,
        sequences=sequences,
        lam=lam,
        mode="shift",
        seed=seed,
        multiplicities=multiplicities,
    )


def solve_resonance(problem):
    """Complex eigenvalue of the barrier model for one coupling.

    Runs both displacement sequences from a shared seed (scanned over a
    rectangle just above the real axis when none is given), chaining
    each dimension from the previous root and walking the imaginary
    ladder only on stalls.  The reported eigenvalue carries the
    nonnegative imaginary representative; widths below the certified
    floor are flushed to the axis and flagged.
    """
    lam = problem.lam
    if lam <= 0:
        raise ConfigError("resonance model requires lambda > 0")
    opts = problem.options
    grid = build_qgrid(barrier_potential(lam))

    seed = problem.seed
    if seed is None:
        scan_problem = HankelProblem(dimension=10, displacement=0)
        candidates = seed_scan(
            grid, scan_problem,
            (("-0.5", "-0.2"), (0, "1e-6")),
            grid_points=32,
            precision_bits=opts.precision_bits,
        )
        if not candidates:
            raise NonConvergenceError(
                f"rectangle scan found no minimum for lambda={lam}"
            )
        seed = candidates[0].value
    with workprec(opts.precision_bits):
        seed = mpmath.mpc(seed)
        if seed.imag == 0:
            seed = mpmath.mpc(seed.real, mpmath.mpf("1e-6") * abs(seed.real))

    anchor_re = seed.real
    with workprec(opts.precision_bits):
        re_slack = mpmath.mpf("0.3") * abs(anchor_re)
        im_slack = mpmath.mpf("0.1") * abs(anchor_re)

    def accept(x):
        return (
            abs(real_part(x) - anchor_re) <= re_slack
            and abs(imag_part(x)) <= im_slack
        )

    solver = _normalize_resonance_root(
        _ladder_solver(_resonance_rungs, accept=accept)
    )
    sequences = {}
    for d in opts.displacements:
        sequences[d] = run_sequence(
            grid, d, opts, seed,
            solve_fn=solver,
            skip_failures=True,
        )

    report = _build_report(sequences, real_only=False)
    value = report.value
    with workprec(report.precision_used):
        if imag_part(value) < 0:
            value = mpmath.conj(value)
            report.value = value
        below = abs(imag_part(value)) < report.certified_floor()
    return ModelResult(
        report=report,
        sequences=sequences,
        lam=lam,
        mode="resonance",
        seed=seed,
        im_below_floor=bool(below),
    )


def _build_report(sequences, real_only):
    views = []
    cap = 0
    for seq in sequences.values():
        view = _real_view(seq) if real_only else seq
        cap = max(cap, decimal_digits(max(e.precision_bits for e in seq.entries)))
        views.append(view)
    views.sort(key=lambda v: v.stability_digits(cap), reverse=True)
    if len(views) == 1:
        return estimate_converged(views[0], views[0])
    return estimate_converged(views[0], views[1])


def exact_model_null(lam, dim_max=12, displacements=(0, 1), precision_bits=512):
    """Max |H_D^d| at the closed-form energy of the solvable family.

    The coupling snaps to half the working precision so every recurrence
    step (products up to lam^2 included) is exact in binary; f_j then
    vanishes identically for j >= 2 and every Hankel matrix is exactly
    singular.  Returns the largest |det| over D <= dim_max and the given
    displacements, which must be exactly zero.
    """
    lam = exact_fraction(lam, "lambda")
    half = precision_bits // 2 - 8
    with workprec(half):
        snapped = frac_from_mpf(to_mpf(lam))
    potential = solvable_potential(snapped)
    grid = build_qgrid(potential)
    energy = exact_solution_energy(snapped)
    worst = mp.zero
    with workprec(precision_bits):
        for d in displacements:
            for dim in range(2, dim_max + 1):
                problem = HankelProblem(dimension=dim, displacement=d)
                coeffs = riccati_coefficients(
                    grid, energy, problem.coefficients_needed,
                    precision_bits=precision_bits,
                )
                det = determinant(assemble(coeffs, problem))
                worst = max(worst, abs(det.value))
    return worst


@dataclass
class StationaryPoint:
    location: object
    kind: str


@dataclass
class StationaryPointReport:
    points: list
    regime: str


def stationary_points(lam, precision_bits=512):
    """Stationary points of the confining potential.

    V'(r) = 1/r^2 - 2*lam + 4*lam^2*r = 0 is the cubic
    4*lam^2 r^3 - 2*lam r^2 + 1 = 0, whose discriminant
    16*lam^3 (2 - 27*lam) decides the regime exactly: three real
    stationary points below lam = 2/27 (minimum, maximum, shallow
    minimum with r2 >= 4 < r3), a single negative-r minimum above.
    """
    lam = exact_fraction(lam, "lambda")
    if lam <= 0:
        raise ConfigError("stationary-point analysis requires lambda > 0")
    if lam == STATIONARY_THRESHOLD:
        raise BoundaryError("lambda = 2/27 is the double-root boundary")
    three_real = lam < STATIONARY_THRESHOLD
    with workprec(precision_bits):
        lam_v = to_mpf(lam)
        coeffs = [4 * lam_v**2, -2 * lam_v, mp.zero, mp.one]
        roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=80)
        if three_real:
            real_roots = sorted(r.real for r in roots)
        else:
            real_roots = [min(roots, key=lambda r: abs(r.imag)).real]
        points = []
        for r in real_roots:
            curvature = -2 / r**3 + 4 * lam_v**2
            kind = "minimum" if curvature > 0 else "maximum"
            points.append(StationaryPoint(location=r, kind=kind))
    kinds = [p.kind for p in points]
    if three_real:
        ok = (
            len(points) == 3
            and kinds == ["minimum", "maximum", "minimum"]
            and points[0].location < 0 < points[1].location <= points[2].location
        )
    else:
        ok = len(points) == 1 and kinds == ["minimum"] and points[0].location < 0
    if not ok:
        raise StructureError(f"unexpected stationary structure at lambda={lam}")
    return StationaryPointReport(
        points=points,
        regime="below_threshold" if three_real else "above_threshold",
    )
