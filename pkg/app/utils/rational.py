from fractions import Fraction
from typing import Optional, Union

INFINITE = "inf"

RationalLike = Union[Fraction, int, str]


def parse_rational(text: RationalLike) -> Fraction:
    """Parse "p/q", an integer or a finite decimal string into an exact Fraction.
    Floats are rejected."""
    if isinstance(text, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"expected a rational string, got {type(text).__name__}")
    raw = text.strip()
    if not raw or raw.lower() in ("inf", "infinity", "nan"):
        raise ValueError(f"not a finite rational: {text!r}")
    if "e" in raw.lower():
        raise ValueError(f"exponent notation is not accepted: {text!r}")
    try:
        return Fraction(raw)
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"not a rational: {text!r}") from e


def format_rational(value: Fraction) -> str:
    """Exact text form: "p" for integers, "p/q" otherwise"""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def to_decimal(value: Fraction, places: int = 6) -> str:
    """Display-only decimal rendering, rounded half-even at `places` digits"""
    value = Fraction(value)
    scaled = round(value * 10 ** places)
    sign = "-" if scaled < 0 else ""
    scaled = abs(scaled)
    whole, frac = divmod(scaled, 10 ** places)
    if places == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac:0{places}d}"


def parse_optional_rational(text: Optional[RationalLike]) -> Optional[Fraction]:
    """Like parse_rational, but "inf" (or None) maps to None"""
    if text is None:
        return None
    if isinstance(text, str) and text.strip().lower() in ("inf", "infinity"):
        return None
    return parse_rational(text)


def format_optional_rational(value: Optional[Fraction]) -> str:
    return INFINITE if value is None else format_rational(value)
