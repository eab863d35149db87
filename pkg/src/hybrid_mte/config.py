"""Numeric policy knobs shared across the package.

Values follow one rule: coefficient zero tests use ZERO_EPS, geometric
feasibility uses FEAS_TOL, and growth caps raise CapacityExceeded rather than
silently truncating.
"""

from __future__ import annotations

import os

# Exponent coefficients with |b| below this are treated as exactly zero, which
# switches integration to the polynomial branch.
ZERO_EPS = 1e-12

# A region is kept only if it admits an interior point with this much slack.
FEAS_TOL = 1e-9

# Highest total monomial degree allowed to appear during substitution.
MAX_DEGREE = 8

# Most variables a single piecewise function may carry.
MAX_VARS = 4

_DEFAULT_MAX_PIECES = 10_000


def max_pieces() -> int:
    """Piece-count cap, overridable via HYBRID_MTE_MAX_PIECES."""
    raw = os.environ.get("HYBRID_MTE_MAX_PIECES")
    if raw is None:
        return _DEFAULT_MAX_PIECES
    try:
        value = int(raw)
    except ValueError:
        return _DEFAULT_MAX_PIECES
    return value if value > 0 else _DEFAULT_MAX_PIECES
