from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp

from ricpade import (
    ConfigError,
    PotentialSpec,
    UnsupportedSingularityError,
    build_qgrid,
    confining_potential,
    barrier_potential,
    derivative_check,
    exact_solution_energy,
    recurrence_residual,
    riccati_coefficients,
    solvable_potential,
)
from ricpade.numbers import to_mpf, workprec


def coulomb_grid():
    return build_qgrid(PotentialSpec(beta=1, mu=2, v=(0, -1)))


class TestPotentialSpec:
    def test_rejects_bad_beta(self):
        with pytest.raises(ConfigError):
            PotentialSpec(beta=3, mu=2, v=(0, -1))

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(ConfigError):
            PotentialSpec(beta=1, mu=0, v=(0, -1))

    def test_rejects_trivial_tail(self):
        with pytest.raises(ConfigError):
            PotentialSpec(beta=1, mu=2, v=(1,))
        with pytest.raises(ConfigError):
            PotentialSpec(beta=1, mu=2, v=(1, 0, 0))

    def test_rejects_complex_singularity(self):
        # 1 + 4*mu*v0 < 0 has no real regularizing exponent
        with pytest.raises(UnsupportedSingularityError):
            PotentialSpec(beta=1, mu=2, v=(-1, -1))

    def test_exact_decimal_coefficients(self):
        p = PotentialSpec(beta=1, mu=2, v=("0", "-1", "0", "-0.2", "0.02"))
        assert p.v[3] == Fraction(-1, 5)
        assert p.v[4] == Fraction(1, 50)


class TestBuildQGrid:
    def test_confining_model_grid(self):
        lam = Fraction(1, 10)
        grid = build_qgrid(confining_potential(lam))
        assert grid.e_slot == 2
        assert grid.s_exact == 1
        assert grid.q_const == (0, 2, 0, 4 * lam, -4 * lam**2)

    def test_barrier_model_tail(self):
        lam = Fraction(1, 10)
        grid = build_qgrid(barrier_potential(lam))
        assert grid.q_const[3:] == (-4 * lam, 4 * lam**2)

    def test_angular_momentum_exponent(self):
        # v0 = l(l+1)/2 with mu=2 gives s = l+1 exactly
        for ell in (0, 1, 2, 5):
            v0 = Fraction(ell * (ell + 1), 2)
            grid = build_qgrid(PotentialSpec(beta=1, mu=2, v=(v0, -1)))
            assert grid.s_exact == ell + 1

    def test_irrational_exponent_is_numeric(self):
        grid = build_qgrid(PotentialSpec(beta=1, mu=2, v=(Fraction(1, 3), -1)))
        assert grid.s_exact is None
        with workprec(128):
            s = grid.s_value()
            assert abs(s * (s - 1) - to_mpf(Fraction(2, 3))) < mpmath.mpf("1e-35")


class TestRecurrence:
    def test_coulomb_base_case(self):
        # f_0 = Q_{-1} / (beta - 1 + 2s) = 2/2 = 1
        c = riccati_coefficients(coulomb_grid(), "-0.37", 1, precision_bits=128)
        assert c.f[0] == 1

    def test_hydrogen_ground_state_terminates(self):
        c = riccati_coefficients(coulomb_grid(), Fraction(-1, 2), 30,
                                 precision_bits=256)
        assert c.f[0] == 1
        assert all(x == 0 for x in c.f[1:])

    def test_solvable_model_terminates(self):
        # dyadic coupling: every recurrence step is exact at 256 bits
        lam = Fraction(5, 16)
        grid = build_qgrid(solvable_potential(lam))
        c = riccati_coefficients(grid, exact_solution_energy(lam), 30,
                                 precision_bits=256)
        assert c.f[0] == 1
        assert c.f[1] == to_mpf_at(2 * lam, 256)
        assert all(x == 0 for x in c.f[2:])

    def test_solvable_model_tail_small_for_decimal_coupling(self):
        # non-dyadic coupling rounds once, leaving a sub-ulp tail
        lam = Fraction(3, 10)
        grid = build_qgrid(solvable_potential(lam))
        c = riccati_coefficients(grid, exact_solution_energy(lam), 30,
                                 precision_bits=256)
        assert all(abs(x) < mpmath.mpf("1e-70") for x in c.f[2:])

    def test_even_lattice_oscillator_terminates(self):
        # psi'' + (E - x^2) psi = 0, first odd level E = 3: f(x) = x
        grid = build_qgrid(PotentialSpec(beta=2, mu=1, v=(0, 0, 1)))
        c = riccati_coefficients(grid, 3, 20, precision_bits=192)
        assert c.f[0] == 1
        assert all(x == 0 for x in c.f[1:])

    def test_residual_exactly_zero(self):
        lam = Fraction(1, 10)
        grid = build_qgrid(confining_potential(lam))
        c = riccati_coefficients(grid, "-0.81", 60, precision_bits=320)
        assert recurrence_residual(grid, c) == 0

    def test_realness_of_complex_zero_imag(self):
        grid = coulomb_grid()
        with workprec(192):
            energy = mpmath.mpc("-0.4", "0")
        c = riccati_coefficients(grid, energy, 25, precision_bits=192)
        assert all(x.imag == 0 for x in c.f)

    def test_conjugation_symmetry_exact(self):
        grid = build_qgrid(barrier_potential(Fraction(1, 10)))
        with workprec(192):
            e = mpmath.mpc("-0.27", "1e-3")
            e_conj = mpmath.mpc(e.real, -e.imag)
        a = riccati_coefficients(grid, e, 30, precision_bits=192)
        b = riccati_coefficients(grid, e_conj, 30, precision_bits=192)
        with workprec(192):
            assert all(x == mpmath.conj(y) for x, y in zip(a.f, b.f))

    def test_rejects_small_inputs(self):
        with pytest.raises(ValueError):
            riccati_coefficients(coulomb_grid(), 1, 0, precision_bits=128)
        with pytest.raises(ValueError):
            riccati_coefficients(coulomb_grid(), 1, 5, precision_bits=32)


def to_mpf_at(fr, bits):
    with workprec(bits):
        return to_mpf(fr)


class TestDerivative:
    def test_slot_derivative_even_lattice(self):
        # beta=2 puts the energy at slot 1, so g_0 = mu / (beta - 1 + 2s)
        grid = build_qgrid(PotentialSpec(beta=2, mu=1, v=(0, 0, 1)))
        c = riccati_coefficients(grid, 3, 5, with_derivative=True, precision_bits=128)
        with workprec(128):
            assert c.g[0] == mpmath.mpf(1) / 3

    @pytest.mark.parametrize("potential", [confining_potential, barrier_potential])
    def test_matches_finite_differences(self, potential):
        grid = build_qgrid(potential(Fraction(1, 10)))
        err, tol = derivative_check(grid, "-0.3", 20, precision_bits=256)
        assert err <= tol


dyadic = st.integers(min_value=-64, max_value=64).map(lambda n: Fraction(n, 16))


@st.composite
def small_potentials(draw):
    beta = draw(st.sampled_from([1, 2]))
    mu = draw(st.sampled_from([1, 2, Fraction(1, 2)]))
    v0 = draw(st.sampled_from([0, Fraction(1, 2), 1, 3]))
    mid = draw(st.lists(dyadic, min_size=1, max_size=3))
    tail = draw(st.sampled_from([1, -1, Fraction(3, 16)]))
    return PotentialSpec(beta=beta, mu=mu, v=tuple([v0] + mid + [tail]))


class TestPropertyInvariants:
    @settings(max_examples=25, deadline=None, derandomize=True)
    @given(potential=small_potentials(), energy=dyadic)
    def test_residual_zero_for_random_inputs(self, potential, energy):
        grid = build_qgrid(potential)
        c = riccati_coefficients(grid, energy, 15, with_derivative=True,
                                 precision_bits=128)
        assert recurrence_residual(grid, c) == 0

    @settings(max_examples=25, deadline=None, derandomize=True)
    @given(potential=small_potentials(), re=dyadic, im=dyadic)
    def test_conjugation_for_random_inputs(self, potential, re, im):
        grid = build_qgrid(potential)
        with workprec(128):
            e = mpmath.mpc(to_mpf(re), to_mpf(im))
            e_conj = mpmath.mpc(e.real, -e.imag)
        a = riccati_coefficients(grid, e, 12, precision_bits=128)
        b = riccati_coefficients(grid, e_conj, 12, precision_bits=128)
        with workprec(128):
            assert all(x == mpmath.conj(y) for x, y in zip(a.f, b.f))
