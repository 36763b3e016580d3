"""Certified (machine-checkable) lower bound for the directional minimum.

Runs the same threshold sweep as the fast path but carries every quantity in
outward-rounded intervals, so the returned lower endpoint is a true bound on
the real-arithmetic optimum regardless of roundoff in exp, the prefix sums,
or the quotients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .intervals import Interval, iv_add, iv_div, iv_exp, iv_mul
from .solver import ScoreBox, _as_direction, directional_min


@dataclass(frozen=True)
class CertifiedBound:
    """lower: sound lower bound on the true minimum.
    float_value: the fast path's answer for the same instance, for gap reporting.
    saturated: an interval endpoint overflowed; the bound is not certifiable."""

    lower: float
    float_value: float
    saturated: bool


def certified_directional_min(c, box: ScoreBox) -> CertifiedBound:
    c = _as_direction(c, box.size)
    order = np.argsort(c, kind="stable")
    cs = c[order]
    ls = box.lower[order]
    us = box.upper[order]
    size = box.size

    # Shift by the exact float max of the uppers.  The subtraction is done in
    # interval arithmetic: the rounded difference is not the real one, and a
    # point shift would bound a different instance.
    neg_a = Interval.point(-float(us.max()))
    upper_exp = [iv_exp(iv_add(Interval.point(float(us[j])), neg_a)) for j in range(size)]
    lower_exp = [iv_exp(iv_add(Interval.point(float(ls[j])), neg_a)) for j in range(size)]
    upper_cexp = [iv_mul(Interval.point(float(cs[j])), upper_exp[j]) for j in range(size)]
    lower_cexp = [iv_mul(Interval.point(float(cs[j])), lower_exp[j]) for j in range(size)]

    pre_u = _prefix(upper_exp)
    pre_cu = _prefix(upper_cexp)
    suf_l = _suffix(lower_exp)
    suf_cl = _suffix(lower_cexp)

    c_floor = float(cs[0])
    lower = np.inf
    saturated = False
    for m in range(size + 1):
        den = iv_add(pre_u[m], suf_l[m])
        num = iv_add(pre_cu[m], suf_cl[m])
        saturated = saturated or den.saturated or num.saturated
        if den.lo <= 0.0:
            # Every retained exponential underflowed to a zero lower endpoint.
            # The candidate ratio is still a convex combination of the
            # coefficients, so the smallest coefficient is a sound stand-in.
            tau_lo = c_floor
        else:
            tau_lo = iv_div(num, den).lo
        if tau_lo < lower:
            lower = tau_lo
    # The true minimum is a convex combination of the coefficients, so the
    # bound may be tightened to the smallest coefficient without risk.
    lower = max(lower, c_floor)

    fast = directional_min(c, box)
    return CertifiedBound(lower=float(lower), float_value=fast.value, saturated=saturated)


def _prefix(terms: list[Interval]) -> list[Interval]:
    out = [Interval.point(0.0)]
    for t in terms:
        out.append(iv_add(out[-1], t))
    return out


def _suffix(terms: list[Interval]) -> list[Interval]:
    out = [Interval.point(0.0)]
    for t in reversed(terms):
        out.append(iv_add(out[-1], t))
    out.reverse()
    return out
