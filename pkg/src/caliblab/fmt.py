"""Parsing and formatting of exact rationals for CLI and file output."""

from __future__ import annotations

import numbers
from fractions import Fraction


def parse_number(text: str) -> Fraction:
    """Parse "num/den", a decimal string, or an integer string into a Fraction."""
    text = text.strip()
    if not text:
        raise ValueError("empty number")
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num.strip()), int(den.strip()))
    return Fraction(text)


def is_rational(x) -> bool:
    """True for exact rationals (Fraction, int, gmpy2.mpq), false for floats."""
    return isinstance(x, numbers.Rational)


def format_fraction(x) -> str:
    num, den = x.numerator, x.denominator
    return f"{num}/{den}" if den != 1 else str(num)


def fmt12(x) -> str:
    """Decimal with 12 significant digits."""
    return f"{float(x):.12g}"


def format_value(x) -> str:
    """Human display: exact rational (when available) plus a 12-digit decimal."""
    if is_rational(x):
        return f"{format_fraction(x)} ({fmt12(x)})"
    return fmt12(x)


def number_json(x) -> dict:
    """JSON form carrying both the exact rational (when available) and a decimal."""
    if is_rational(x):
        return {"rational": format_fraction(x), "decimal": float(x)}
    return {"rational": None, "decimal": float(x)}
