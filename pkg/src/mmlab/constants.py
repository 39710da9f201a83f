"""Named constants of the round-elimination argument.

Each constant is kept as a float and as a Fraction obtained from an
80-digit decimal evaluation, so exact audits can compare rationals against
irrational thresholds without float rounding.
"""

from decimal import Decimal, localcontext
from fractions import Fraction

with localcontext() as _ctx:
    _ctx.prec = 80
    _E = Decimal(1).exp()
    _C5 = Decimal(-3).exp() / 1000
    _E4 = _E**4
    _C10 = 1 / (1200 * _E4)
    _C11 = 168 * 10**4 * _E4
    _C1 = Decimal(10) ** 80

C0 = 1e-10
C1 = float(_C1)
C4 = 0.99
C5 = float(_C5)
C10 = float(_C10)
C11 = float(_C11)
E4 = float(_E4)

EXACT = {
    "C1": Fraction(_C1),
    "C4": Fraction(99, 100),
    "C5": Fraction(_C5),
    "C10": Fraction(_C10),
    "C11": Fraction(_C11),
    "E4": Fraction(_E4),
}


def F1(delta):
    return 6 * E4 * delta


def F1_exact(delta):
    return 6 * EXACT["E4"] * Fraction(delta)


def default_grid():
    """Geometric grid 2^-20 ... 1 plus the named constants and 1/2, with 0 in front."""
    pts = {0.0, 1.0, 0.5, C5, C10}
    pts.update(2.0**-k for k in range(21))
    return sorted(pts)
