"""Riccati coefficient series for Laurent-polynomial potentials.

The Schrödinger equation ``psi'' + Q(x) psi = 0`` with ``Q = mu*(E - V)``
and ``V(x) = sum_j v_j x^(beta*j - 2)`` turns, via the regularized
logarithmic derivative ``f(x) = s/x - psi'(x)/psi(x)``, into the Riccati
equation

    f' + (2s/x) f - f^2 - Q - s(s-1)/x^2 = 0.

Choosing ``s(s-1) = mu*v_0`` (larger root) cancels the double pole, and
``f(x) = x^(beta-1) * sum_j f_j x^(beta*j)`` solves the equation with
coefficients given by the recurrence

    f_m * (beta*m + beta - 1 + 2s)
        = sum_{k=0}^{m-1} f_k f_{m-1-k} + Q[m+1],   m >= 0,

where ``Q[j]`` denotes the lattice coefficient of ``x^(beta*j-2)``:
``-mu*v_j`` plus ``mu*E`` when ``j`` equals the energy slot ``2/beta``.
Differentiating in E gives the companion recurrence for ``g_m = df_m/dE``:

    g_m * (beta*m + beta - 1 + 2s)
        = 2 * sum_{k=0}^{m-1} f_k g_{m-1-k} + mu * [m+1 == 2/beta].

Coefficients are plain ``mpf`` when the energy and potential are real and
``mpc`` otherwise; the recurrence preserves exact-zero imaginary parts.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt

import mpmath
from mpmath import mp

from .errors import ConfigError, UnsupportedSingularityError
from .numbers import exact_fraction, to_mpf, workprec

_ALLOWED_BETA = (1, 2)


@dataclass(frozen=True)
class PotentialSpec:
    """Laurent-polynomial potential on the x^(beta*j-2) exponent lattice.

    Parameters
    ----------
    beta : int
        Lattice stride; restricted to 1 or 2 so the energy slot 2/beta
        is an integer.
    mu : exact scalar
        Energy coupling in Q = mu*(E - V); 2 for radial atomic problems.
    v : sequence of exact scalars
        Coefficients v_0..v_J of V; v_0 multiplies the centrifugal x^-2
        term.  Entries are held as Fractions and never pass through a
        53-bit float.
    """

    beta: int
    mu: Fraction
    v: tuple

    def __init__(self, beta, mu, v):
        if beta not in _ALLOWED_BETA:
            raise ConfigError(f"beta must be 1 or 2, got {beta!r}")
        mu = exact_fraction(mu, "mu")
        if mu <= 0:
            raise ConfigError("mu must be positive")
        coeffs = tuple(exact_fraction(x, f"v[{i}]") for i, x in enumerate(v))
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        if len(coeffs) < 2 or coeffs[-1] == 0:
            raise ConfigError("potential needs a nontrivial tail: J >= 1 and v_J != 0")
        if 1 + 4 * mu * coeffs[0] < 0:
            raise UnsupportedSingularityError(
                "1 + 4*mu*v_0 < 0: no real regularizing exponent"
            )
        object.__setattr__(self, "beta", int(beta))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "v", coeffs)


def _rational_sqrt(fr):
    """Exact square root of a nonnegative Fraction, or None."""
    if fr < 0:
        return None
    rn, rd = isqrt(fr.numerator), isqrt(fr.denominator)
    if rn * rn == fr.numerator and rd * rd == fr.denominator:
        return Fraction(rn, rd)
    return None


@dataclass(frozen=True)
class QGrid:
    """Exact lattice data for Q(x) at a trial energy slot.

    ``q_const[j]`` is the energy-independent part ``-mu*v_j`` of the
    coefficient of ``x^(beta*j-2)``; the trial energy enters additively
    as ``mu*E`` at index ``e_slot = 2/beta``.  The regularizing exponent
    satisfies ``s(s-1) = mu*v_0`` with the larger root selected, i.e.
    ``s = (1 + sqrt(1 + 4*mu*v_0))/2 >= 1/2``.
    """

    beta: int
    mu: Fraction
    q_const: tuple
    e_slot: int
    s_disc: Fraction
    s_exact: Fraction | None = field(default=None)

    def s_value(self):
        """Regularizing exponent at the current working precision."""
        if self.s_exact is not None:
            return to_mpf(self.s_exact)
        return (1 + mpmath.sqrt(to_mpf(self.s_disc))) / 2

    def materialize(self):
        """(q_const as mpf list, s, mu) at the current working precision."""
        return [to_mpf(q) for q in self.q_const], self.s_value(), to_mpf(self.mu)


def build_qgrid(potential):
    """Assemble the Q lattice and regularizing exponent for a potential."""
    if 2 % potential.beta != 0:
        raise ConfigError("energy slot 2/beta must be an integer")
    disc = 1 + 4 * potential.mu * potential.v[0]
    if disc < 0:
        raise UnsupportedSingularityError("1 + 4*mu*v_0 < 0")
    root = _rational_sqrt(disc)
    s_exact = (1 + root) / 2 if root is not None else None
    return QGrid(
        beta=potential.beta,
        mu=potential.mu,
        q_const=tuple(-potential.mu * vj for vj in potential.v),
        e_slot=2 // potential.beta,
        s_disc=disc,
        s_exact=s_exact,
    )


@dataclass
class RiccatiCoefficients:
    """Computed series data at one trial energy.

    ``f[j]`` holds f_j for j = 0..n; ``g`` holds the energy derivatives
    when requested.  ``precision_bits`` records the binary precision the
    recurrence ran at.
    """

    energy: object
    f: list
    g: list | None
    precision_bits: int

    def __len__(self):
        return len(self.f)


def riccati_coefficients(grid, energy, n_terms, with_derivative=False, precision_bits=None):
    """Generate f_0..f_n (and optionally df/dE) by the recurrence.

    Each convolution is accumulated with a single rounding (``fdot``), so
    rerunning the recurrence against stored coefficients reproduces them
    bit-for-bit; see :func:`recurrence_residual`.

    Parameters
    ----------
    grid : QGrid
    energy : mpf, mpc, Fraction, int, or decimal string
        Trial energy; converted at the working precision.
    n_terms : int
        Highest index n >= 1.
    with_derivative : bool
        Also build g_j = df_j/dE from the differentiated recurrence.
    precision_bits : int, optional
        Working precision; defaults to the ambient mpmath precision.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    bits = precision_bits if precision_bits is not None else mp.prec
    if bits < 64:
        raise ValueError("precision_bits must be >= 64")
    with workprec(bits):
        q_const, s, mu = grid.materialize()
        if isinstance(energy, mpmath.mpc):
            e_val = mpmath.mpc(+energy.real, +energy.imag)
        else:
            e_val = to_mpf(energy)
        beta, e_slot = grid.beta, grid.e_slot
        n_q = len(q_const)

        def q_lattice(j):
            base = q_const[j] if j < n_q else mp.zero
            return base + mu * e_val if j == e_slot else base

        f = []
        g = [] if with_derivative else None
        for m in range(n_terms + 1):
            den = beta * m + beta - 1 + 2 * s
            assert den > 0, "recurrence divisor must stay positive for s >= 1/2"
            if m == 0:
                total = q_lattice(1)
            else:
                total = mpmath.fdot(f, reversed(f)) + q_lattice(m + 1)
            if with_derivative:
                if m == 0:
                    dtotal = mu if e_slot == 1 else mp.zero
                else:
                    dtotal = 2 * mpmath.fdot(f, reversed(g))
                    if m + 1 == e_slot:
                        dtotal = dtotal + mu
                g.append(dtotal / den)
            f.append(total / den)
        return RiccatiCoefficients(energy=e_val, f=f, g=g, precision_bits=bits)


def recurrence_residual(grid, coeffs):
    """Max |f_m - rhs_m/den_m| over m, recomputed identically.

    The rerun uses the same accumulation order as the generator, so the
    result is exactly zero for any honestly produced coefficient set;
    the check is asserted exact, not within a tolerance.
    """
    with workprec(coeffs.precision_bits):
        q_const, s, mu = grid.materialize()
        beta, e_slot = grid.beta, grid.e_slot
        n_q = len(q_const)
        e_val = coeffs.energy
        worst = mp.zero
        for m in range(len(coeffs.f)):
            den = beta * m + beta - 1 + 2 * s
            if m == 0:
                total = q_const[1] if 1 < n_q else mp.zero
                if e_slot == 1:
                    total = total + mu * e_val
            else:
                prefix = coeffs.f[:m]
                total = mpmath.fdot(prefix, reversed(prefix))
                base = q_const[m + 1] if m + 1 < n_q else mp.zero
                if m + 1 == e_slot:
                    base = base + mu * e_val
                total = total + base
            worst = max(worst, abs(coeffs.f[m] - total / den))
        return worst


def derivative_check(grid, energy, n_terms, precision_bits):
    """Max relative deviation of g_j from a central finite difference.

    Uses h = 10^(-p/3) at p decimal digits of working precision; the
    recurrence derivative should agree to better than 10^(-p/2).
    Returns (max_relative_error, tolerance).
    """
    from .numbers import decimal_digits

    p = decimal_digits(precision_bits)
    with workprec(precision_bits):
        h = mpmath.mpf(10) ** (-(p // 3))
        tol = mpmath.mpf(10) ** (-(p // 2))
        base = riccati_coefficients(grid, energy, n_terms, with_derivative=True,
                                    precision_bits=precision_bits)
        up = riccati_coefficients(grid, base.energy + h, n_terms,
                                  precision_bits=precision_bits)
        dn = riccati_coefficients(grid, base.energy - h, n_terms,
                                  precision_bits=precision_bits)
        worst = mp.zero
        for j in range(n_terms + 1):
            fd = (up.f[j] - dn.f[j]) / (2 * h)
            err = abs(base.g[j] - fd) / max(1, abs(base.g[j]))
            worst = max(worst, err)
        return worst, tol
