"""Exact number handling on top of mpmath.

Scalar inputs (potential coefficients, couplings, seeds) are carried as
``fractions.Fraction`` and only materialized to ``mpf``/``mpc`` at a known
binary precision, with a single correctly-rounded conversion.  Plain
``mpmath.mpmathify`` must not be used for rationals: it routes through a
53-bit float and silently double-rounds.
"""

from fractions import Fraction

import mpmath
from mpmath import mp
from mpmath import libmp

from .errors import ConfigError

LOG10_2 = 0.30102999566398119521

workprec = mp.workprec


def decimal_digits(bits):
    """Number of decimal digits resolvable at a binary precision."""
    return int(bits * LOG10_2)


def default_newton_tol(bits):
    """Spec default relative step tolerance: 10^(-0.9 * decimal digits)."""
    return mpmath.mpf(10) ** (-int(0.9 * decimal_digits(bits)))


def exact_fraction(x, where="value"):
    """Coerce an exact-representable input to Fraction.

    Accepts int, Fraction, decimal strings, and (binary-exact) floats.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{where}: malformed number {x!r}") from exc
    if isinstance(x, float):
        return Fraction(x)
    raise ConfigError(f"{where}: cannot interpret {type(x).__name__} exactly")


def to_mpf(x):
    """Convert an exact value to mpf at the current working precision.

    Fractions convert with one rounding via libmp; mpf passes through a
    re-round so the result always carries the current precision.
    """
    if isinstance(x, mpmath.mpf) or (isinstance(x, (int, float)) and not isinstance(x, bool)):
        return +mpmath.mpf(x)
    if isinstance(x, Fraction):
        return mpmath.mpf(
            libmp.from_rational(x.numerator, x.denominator, mp.prec, libmp.round_nearest)
        )
    if isinstance(x, str):
        return mpmath.mpf(x)
    raise TypeError(f"cannot convert {type(x).__name__} to mpf")


def to_mpc(re, im=0):
    return mpmath.mpc(to_mpf(re), to_mpf(im))


def frac_from_mpf(x):
    """Exact Fraction equal to a finite mpf."""
    sign, man, exp, _ = x._mpf_
    if man == 0:
        if x != 0:
            raise ValueError("non-finite value has no rational form")
        return Fraction(0)
    v = Fraction(int(man)) * Fraction(2) ** exp
    return -v if sign else v


def real_part(x):
    return x.real if isinstance(x, mpmath.mpc) else x


def imag_part(x):
    return x.imag if isinstance(x, mpmath.mpc) else mp.zero


def frac_to_decimal(fr):
    """Exact decimal string for a Fraction with 2^a*5^b denominator."""
    num, den = fr.numerator, fr.denominator
    if den == 1:
        return str(num)
    two = five = 0
    d = den
    while d % 2 == 0:
        d //= 2
        two += 1
    while d % 5 == 0:
        d //= 5
        five += 1
    if d != 1:
        raise ConfigError(f"{fr} has no finite decimal representation")
    shift = max(two, five)
    scaled = abs(num) * 10**shift // den
    text = str(scaled).rjust(shift + 1, "0")
    whole, frac = text[:-shift], text[-shift:]
    frac = frac.rstrip("0")
    out = whole + ("." + frac if frac else "")
    return "-" + out if num < 0 else out


def format_mpf(x, digits=30):
    """Deterministic decimal rendering of an mpf."""
    if mpmath.isnan(x):
        return "nan"
    if x == mpmath.inf:
        return "inf"
    if x == mpmath.ninf:
        return "-inf"
    return mpmath.nstr(x, digits)
