from fractions import Fraction

import mpmath
import pytest
from mpmath import mp

from ricpade import (
    AdaptContext,
    HankelProblem,
    NonConvergenceError,
    PotentialSpec,
    PrecisionExhaustedError,
    RootSequence,
    SequenceEntry,
    SolveOptions,
    adapt_precision,
    barrier_potential,
    build_qgrid,
    estimate_converged,
    find_root,
    run_sequence,
    seed_scan,
)
from ricpade.numbers import to_mpf, workprec
from ricpade.solver import coefficient_spread
from ricpade.series import riccati_coefficients

HYDROGEN = build_qgrid(PotentialSpec(beta=1, mu=2, v=(0, -1)))


def hydrogen_opts(**kw):
    base = dict(precision_bits=192, max_iter=4000, newton_tol="1e-40")
    base.update(kw)
    return SolveOptions(**base)


class TestFindRoot:
    def test_hydrogen_ground_state(self):
        # E = -1/2 is a multiplicity-D root: linear convergence, many iterations
        res = find_root(HYDROGEN, HankelProblem(5, 0), "-0.4", hydrogen_opts())
        with workprec(192):
            assert abs(res.root + mpmath.mpf("0.5")) < mpmath.mpf("1e-38")

    def test_hydrogen_first_excited(self):
        res = find_root(HYDROGEN, HankelProblem(8, 0), "-0.13", hydrogen_opts())
        with workprec(192):
            assert abs(res.root + mpmath.mpf("0.125")) < mpmath.mpf("1e-38")

    def test_on_root_short_circuit(self):
        res = find_root(HYDROGEN, HankelProblem(6, 0), Fraction(-1, 2), hydrogen_opts())
        assert res.root == to_mpf_at(Fraction(-1, 2), 192)
        assert res.residual_log10 == mpmath.mpf("-inf")
        assert res.iterations == 1

    def test_determinism(self):
        a = find_root(HYDROGEN, HankelProblem(5, 0), "-0.4", hydrogen_opts())
        b = find_root(HYDROGEN, HankelProblem(5, 0), "-0.4", hydrogen_opts())
        assert a.root == b.root
        assert a.iterations == b.iterations

    def test_conjugate_closure(self):
        grid = build_qgrid(barrier_potential(Fraction(1, 10)))
        opts = SolveOptions(precision_bits=256, max_iter=200)
        with workprec(256):
            seed = mpmath.mpc("-0.27", "0.002")
            seed_conj = mpmath.mpc(seed.real, -seed.imag)
        up = find_root(grid, HankelProblem(4, 0), seed, opts)
        down = find_root(grid, HankelProblem(4, 0), seed_conj, opts)
        with workprec(256):
            assert up.root == mpmath.conj(down.root)
        assert up.iterations == down.iterations

    def test_quadratic_shrink_near_simple_root(self):
        # the resonance-model determinant has a simple root near -0.275
        grid = build_qgrid(barrier_potential(Fraction(1, 10)))
        opts = SolveOptions(precision_bits=256, max_iter=200)
        res = find_root(grid, HankelProblem(5, 0), "-0.272", opts)
        tail = [s for s in res.step_sizes if 0 < s < mpmath.mpf("1e-6")]
        with workprec(256):
            quadratic = [
                float(mpmath.log10(b) / mpmath.log10(a))
                for a, b in zip(tail, tail[1:])
                if b > 0 and a < mpmath.mpf("1e-10")
            ]
        assert quadratic and all(ratio > 1.6 for ratio in quadratic)

    def test_max_iter_error_carries_iterate(self):
        with pytest.raises(NonConvergenceError) as info:
            find_root(HYDROGEN, HankelProblem(5, 0), "-0.4",
                      hydrogen_opts(max_iter=5))
        assert info.value.last_iterate is not None

    def test_residual_drops_from_seed(self):
        grid = build_qgrid(barrier_potential(Fraction(1, 10)))
        opts = SolveOptions(precision_bits=256, max_iter=200)
        res = find_root(grid, HankelProblem(5, 0), "-0.272", opts)
        assert res.residual_log10 < res.seed_residual_log10 - 10


def to_mpf_at(fr, bits):
    with workprec(bits):
        return to_mpf(fr)


class TestAdaptPrecision:
    def test_no_trigger_without_cause(self):
        ctx = AdaptContext(precision_bits=512, precision_max=8192)
        assert adapt_precision(ctx) == 512

    def test_stagnation_doubles(self):
        ctx = AdaptContext(precision_bits=512, precision_max=8192, stagnating=True)
        assert adapt_precision(ctx) == 1024

    def test_spread_triggers(self):
        ctx = AdaptContext(precision_bits=128, precision_max=8192,
                           spread_digits=25.0)
        assert adapt_precision(ctx) == 256
        calm = AdaptContext(precision_bits=512, precision_max=8192,
                            spread_digits=25.0)
        assert adapt_precision(calm) == 512

    def test_cap_exhaustion(self):
        ctx = AdaptContext(precision_bits=512, precision_max=512, stagnating=True)
        with pytest.raises(PrecisionExhaustedError):
            adapt_precision(ctx)

    def test_resonance_spread_at_low_precision(self):
        grid = build_qgrid(barrier_potential(Fraction(2, 25)))
        problem = HankelProblem(dimension=20, displacement=0)
        with workprec(128):
            coeffs = riccati_coefficients(
                grid, mpmath.mpc("-0.311", "1e-6"),
                problem.coefficients_needed, precision_bits=128,
            )
            spread = coefficient_spread(coeffs, problem)
        assert spread > 0.5 * int(128 * 0.30103)

    def test_starved_resonance_escalates_and_converges(self):
        # lambda = 0.08 at 128 bits: the coefficient spread alone exceeds
        # half the digit budget, so find_root escalates before iterating.
        # The 256-bit solve then converges to the starved determinant's
        # own root, good to roughly the precision the data supports; the
        # honest digit count is enforced by sequence cross-checks, not
        # by the per-root tolerance.
        grid = build_qgrid(barrier_potential(Fraction(2, 25)))
        opts = SolveOptions(precision_bits=128, precision_max=8192, max_iter=250)
        with workprec(128):
            seed = mpmath.mpc("-0.3110", "1e-6")
        res = find_root(grid, HankelProblem(20, 0), seed, opts)
        assert res.precision_bits >= 256
        with workprec(res.precision_bits):
            assert abs(res.root.real - mpmath.mpf("-0.31105186469292522577")) \
                < mpmath.mpf("1e-6")

    def test_hydrogen_at_512_never_escalates(self):
        opts = SolveOptions(precision_bits=512, max_iter=4000)
        res = find_root(HYDROGEN, HankelProblem(4, 0), "-0.45", opts)
        assert res.precision_bits == 512

    def test_forced_precision_error(self):
        grid = build_qgrid(barrier_potential(Fraction(2, 25)))
        opts = SolveOptions(precision_bits=64, precision_max=64, max_iter=250)
        with workprec(64):
            seed = mpmath.mpc("-0.3110", "1e-6")
        with pytest.raises(PrecisionExhaustedError):
            find_root(grid, HankelProblem(12, 0), seed, opts)


class TestRunSequence:
    def test_hydrogen_constant_sequence(self):
        opts = hydrogen_opts(dim_min=2, dim_max=6)
        seq = run_sequence(HYDROGEN, 0, opts, "-0.45")
        assert [e.dimension for e in seq.entries] == [2, 3, 4, 5, 6]
        with workprec(192):
            for entry in seq.entries:
                assert abs(entry.root + mpmath.mpf("0.5")) < mpmath.mpf("1e-38")

    def test_abort_attaches_partial(self):
        opts = hydrogen_opts(dim_min=2, dim_max=6, max_iter=3,
                             precision_bits=192, precision_max=192)
        with pytest.raises(NonConvergenceError) as info:
            run_sequence(HYDROGEN, 0, opts, "-0.4")
        assert isinstance(info.value.partial, RootSequence)


class TestEstimateConverged:
    def _seq(self, roots, bits=128, d=0):
        entries = [
            SequenceEntry(dimension=2 + i, root=to_mpf_at(r, bits),
                          residual_log10=mpmath.mpf(-50), iterations=5,
                          precision_bits=bits)
            for i, r in enumerate(roots)
        ]
        return RootSequence(displacement=d, entries=entries)

    def test_identical_sequences_cap_at_precision(self):
        seq = self._seq([Fraction(-1, 2)] * 4)
        report = estimate_converged(seq, self._seq([Fraction(-1, 2)] * 4, d=1))
        cap = int(128 * 0.30103)
        assert report.stable_digits == cap
        assert report.d_agreement_digits == cap
        assert report.certified_digits == cap

    def test_first_digit_disagreement_gives_zero(self):
        a = self._seq([Fraction(1, 2), Fraction(1, 2)])
        b = self._seq([Fraction(1, 2), Fraction(3, 2)], d=1)
        report = estimate_converged(a, b)
        assert report.d_agreement_digits == 0
        assert report.certified_digits == 0

    def test_value_comes_from_first_sequence(self):
        a = self._seq([Fraction(1, 4), Fraction(1, 4)])
        b = self._seq([Fraction(1, 4), Fraction(1, 3)], d=1)
        report = estimate_converged(a, b)
        assert report.value == to_mpf_at(Fraction(1, 4), 128)

    def test_monotone_certification(self):
        a = self._seq(["0.5", "0.5001"])
        b = self._seq(["0.5", "0.50000001"], d=1)
        report = estimate_converged(a, b)
        assert report.stable_digits <= 4
        assert report.certified_digits <= report.stable_digits


class TestSeedScan:
    def test_hydrogen_brackets_depend_on_parity(self):
        # exact levels appear with dimension-dependent multiplicity, so a
        # given D only sign-changes on levels of odd multiplicity there:
        # D=5 brackets -1/2 (mult 5); D=4 brackets -1/8 (mult 3)
        opts_bits = 192
        cands5 = seed_scan(HYDROGEN, HankelProblem(5, 0), ("-0.6", "-0.05"),
                           grid_points=64, precision_bits=opts_bits)
        cands4 = seed_scan(HYDROGEN, HankelProblem(4, 0), ("-0.6", "-0.05"),
                           grid_points=64, precision_bits=opts_bits)
        with workprec(opts_bits):
            assert any(abs(c.value + mpmath.mpf("0.5")) < mpmath.mpf("0.01")
                       for c in cands5)
            assert any(abs(c.value + mpmath.mpf("0.125")) < mpmath.mpf("0.01")
                       for c in cands4)

    def test_rectangle_minimum_near_resonance(self):
        grid = build_qgrid(barrier_potential(Fraction(1, 10)))
        cands = seed_scan(
            grid, HankelProblem(10, 0),
            (("-0.35", "-0.2"), (0, "1e-6")),
            grid_points=16, precision_bits=256,
        )
        assert cands
        with workprec(256):
            assert abs(cands[0].value.real + mpmath.mpf("0.275")) < mpmath.mpf("0.02")

    def test_empty_region_far_from_spectrum(self):
        cands = seed_scan(HYDROGEN, HankelProblem(5, 0), ("-9", "-5"),
                          grid_points=16, precision_bits=128)
        assert cands == []

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            seed_scan(HYDROGEN, HankelProblem(5, 0), ("-1", "0"), grid_points=4)


class TestSolveOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolveOptions(dim_min=1)
        with pytest.raises(ValueError):
            SolveOptions(dim_min=5, dim_max=4)
        with pytest.raises(ValueError):
            SolveOptions(precision_bits=1024, precision_max=512)

    def test_default_tolerance_tracks_precision(self):
        opts = SolveOptions()
        with workprec(512):
            assert opts.tolerance(512) == mpmath.mpf(10) ** (-int(0.9 * int(512 * 0.30103)))
            assert opts.tolerance(256) > opts.tolerance(512)
