"""Independent reference implementations used only by the tests.

Two oracles, deliberately built on different machinery than the package:

* naive_vertex_min: literal enumeration of every box vertex with math.exp,
  for small K.
* decimal_min_enclosure: a 60-digit decimal evaluation of the threshold
  sweep with directed rounding on every add/multiply/divide and padded
  exponentials, giving a rigorous enclosure of the true minimum that does
  not depend on the package's shift or rounding choices.
"""

from __future__ import annotations

import itertools
import math
from decimal import ROUND_CEILING, ROUND_FLOOR, Context, Decimal

PREC = 60
CTX_DN = Context(prec=PREC, rounding=ROUND_FLOOR)
CTX_UP = Context(prec=PREC, rounding=ROUND_CEILING)
_CTX_EXP = Context(prec=PREC + 10)
# Decimal exp is correctly rounded at its context precision; this pad is
# orders of magnitude beyond that error.
_EXP_PAD = Decimal("1e-55")


def naive_vertex_min(c, lower, upper) -> float:
    choices = [(l,) if l == u else (l, u) for l, u in zip(lower, upper)]
    best = math.inf
    for vertex in itertools.product(*choices):
        a = max(vertex)
        e = [math.exp(s - a) for s in vertex]
        v = sum(ci * ei for ci, ei in zip(c, e)) / sum(e)
        best = min(best, v)
    return best


def _exp_enclosure(t: Decimal) -> tuple[Decimal, Decimal]:
    r = _CTX_EXP.exp(t)
    pad = CTX_UP.multiply(abs(r), _EXP_PAD)
    lo = CTX_DN.subtract(r, pad)
    hi = CTX_UP.add(r, pad)
    if lo < 0:
        lo = Decimal(0)
    return lo, hi


def decimal_min_enclosure(c, lower, upper) -> tuple[Decimal, Decimal]:
    """Rigorous [lo, hi] containing the true minimum of c . softmax(s) over
    the box, via the threshold characterization (no shift needed: decimal's
    exponent range dwarfs the instances)."""
    k = len(c)
    order = sorted(range(k), key=lambda j: (c[j], j))
    cd = [Decimal(float(c[j])) for j in order]
    exp_l = [_exp_enclosure(Decimal(float(lower[j]))) for j in order]
    exp_u = [_exp_enclosure(Decimal(float(upper[j]))) for j in order]

    def term(cj: Decimal, x: tuple[Decimal, Decimal]) -> tuple[Decimal, Decimal]:
        if cj >= 0:
            return CTX_DN.multiply(cj, x[0]), CTX_UP.multiply(cj, x[1])
        return CTX_DN.multiply(cj, x[1]), CTX_UP.multiply(cj, x[0])

    best_lo = None
    best_hi = None
    for m in range(k + 1):
        num_dn = num_up = den_dn = den_up = Decimal(0)
        for pos in range(k):
            x = exp_u[pos] if pos < m else exp_l[pos]
            t_dn, t_up = term(cd[pos], x)
            num_dn = CTX_DN.add(num_dn, t_dn)
            num_up = CTX_UP.add(num_up, t_up)
            den_dn = CTX_DN.add(den_dn, x[0])
            den_up = CTX_UP.add(den_up, x[1])
        assert den_dn > 0, "decimal denominators stay positive at test scales"
        tau_lo = min(CTX_DN.divide(num_dn, den_dn), CTX_DN.divide(num_dn, den_up))
        tau_hi = max(CTX_UP.divide(num_up, den_dn), CTX_UP.divide(num_up, den_up))
        best_lo = tau_lo if best_lo is None else min(best_lo, tau_lo)
        best_hi = tau_hi if best_hi is None else min(best_hi, tau_hi)
    return best_lo, best_hi


# 60-digit reference constants for the interval tests.
E_HI_PREC = Decimal("2.71828182845904523536028747135266249775724709369995957496697")
E_INV_HI_PREC = Decimal("0.367879441171442321595523770161460867445811131031767834507837")
