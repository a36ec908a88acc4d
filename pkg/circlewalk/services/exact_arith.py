"""Aritmética racional exacta y geometría de puntos del círculo ℝ/ℤ.

Los racionales son ``fractions.Fraction`` (enteros de precisión arbitraria,
siempre reducidos). Un punto del círculo es un ``Fraction`` normalizado a
``[0, 1)`` en el momento de construirlo con :func:`to_circle`.
"""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational as _RationalABC

from .errors import ArithmeticDomainError

Rational = Fraction
CirclePoint = Fraction

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(text) -> Fraction:
    """Lee un racional en formato ``"num/den"`` (o un entero) sin pasar por float."""

    if isinstance(text, _RationalABC):
        return Fraction(text)
    if not isinstance(text, str):
        raise ArithmeticDomainError(f"Racional no reconocido: {text!r}")
    match = _RATIONAL_RE.match(text)
    if match is None:
        raise ArithmeticDomainError(f"Racional mal formado: {text!r}")
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) is not None else 1
    if denominator == 0:
        raise ArithmeticDomainError(f"Denominador nulo en {text!r}")
    return Fraction(numerator, denominator)


def format_rational(value: Fraction) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def rational_div(a: Fraction, b: Fraction) -> Fraction:
    """División exacta; la división por cero es un error de dominio."""

    if b == 0:
        raise ArithmeticDomainError("División por cero.")
    return Fraction(a) / Fraction(b)


def compare(a: Fraction, b: Fraction) -> int:
    """Orden total: -1, 0 o 1."""

    return (a > b) - (a < b)


def to_circle(value) -> Fraction:
    """Normaliza a ``[0, 1)``."""

    return Fraction(value) % 1


def circle_dist(x: Fraction, y: Fraction) -> Fraction:
    gap = abs(Fraction(x) - Fraction(y)) % 1
    return min(gap, 1 - gap)


def _is_power_of_two_int(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def is_dyadic(x: Fraction) -> bool:
    return _is_power_of_two_int(Fraction(x).denominator)


def exact_log2(q: Fraction) -> int | None:
    """Exponente entero e con ``q == 2**e``; ``None`` si q no es potencia de dos."""

    q = Fraction(q)
    if q <= 0:
        return None
    if not (_is_power_of_two_int(q.numerator) and _is_power_of_two_int(q.denominator)):
        return None
    return (q.numerator.bit_length() - 1) - (q.denominator.bit_length() - 1)


def is_power_of_two(q: Fraction) -> bool:
    return exact_log2(q) is not None


def in_arc(point: Fraction, left: Fraction, length: Fraction) -> bool:
    """Pertenencia al arco cerrado que parte de ``left`` con longitud ``length``."""

    return (Fraction(point) - left) % 1 <= length
