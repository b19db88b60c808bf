"""Small formatting helpers shared by the file writers and the CLI.

Artifacts are byte-stable: floats are rendered at 12 significant digits,
and angles can be given either as plain radians or as exact multiples of
pi such as "pi/4", "-3pi/4", "2*pi/3".
"""
from __future__ import annotations

import math
import re

from .errors import ConfigError

_PI_RE = re.compile(
    r"""^\s*([+-]?)\s*            # sign
         (\d+(?:\.\d+)?)?\s*      # optional numerator
         \*?\s*pi\s*              # the word pi, optional *
         (?:/\s*(\d+(?:\.\d+)?))? # optional denominator
         \s*$""",
    re.VERBOSE | re.IGNORECASE,
)


def fmt(x: float) -> str:
    """Render a float at 12 significant digits."""
    return f"{float(x):.12g}"


def json_round(x: float) -> float:
    """Round-trip a float through the 12-digit rendering for JSON output."""
    return float(fmt(x))


def parse_angle(text: str) -> float:
    """Parse an angle in radians; "pi/4"-style fractions are exact."""
    s = str(text).strip()
    m = _PI_RE.match(s)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        num = float(m.group(2)) if m.group(2) else 1.0
        den = float(m.group(3)) if m.group(3) else 1.0
        if den == 0:
            raise ConfigError(f"zero denominator in angle {text!r}")
        return sign * num * math.pi / den
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse angle {text!r}") from None
