"""Independent evaluation of the hand-checked values frozen into the C++ tests.

Evaluates the weighted Nelson-Aalen curve, its restricted mean, the
subgroup value and the alternative ITR value directly from the sums, with
exact rational hazards where possible. Run with `python3 hand_values.py`.
"""
from fractions import Fraction
import math


def na_curve(times, events, weights):
    jumps = sorted({t for t, e in zip(times, events) if e})
    out, H = [], 0.0
    for tk in jumps:
        num = sum(w for t, e, w in zip(times, events, weights) if e and t == tk)
        den = sum(w for t, w in zip(times, weights) if t >= tk)
        if num > 0 and den > 0:
            H += num / den
            out.append((tk, math.exp(-H)))
    return out


def km_curve(times, events):
    jumps = sorted({t for t, e in zip(times, events) if e})
    out, S = [], Fraction(1)
    for tk in jumps:
        d = sum(1 for t, e in zip(times, events) if e and t == tk)
        r = sum(1 for t in times if t >= tk)
        S *= 1 - Fraction(d, r)
        out.append((tk, S))
    return out


def rmst(curve, tstar):
    area, prev_t, prev_s = 0.0, 0.0, 1.0
    for t, s in curve:
        if t >= tstar:
            break
        area += prev_s * (t - prev_t)
        prev_t, prev_s = t, s
    return area + prev_s * (tstar - prev_t)


def cell(data, arm, w):
    sel = [(x, e, wi) for (a, x, e), wi in zip(data, w) if a == arm]
    return na_curve([s[0] for s in sel], [s[1] for s in sel], [s[2] for s in sel])


if __name__ == "__main__":
    three = na_curve([1, 2, 3], [1, 0, 1], [1, 1, 1])
    print("three-subject NA:", three, "expected", math.exp(-1 / 3), math.exp(-4 / 3))
    print("three-subject rmst t*=4:", repr(rmst(three, 4.0)))
    print("three-subject KM:", km_curve([1, 2, 3], [1, 0, 1]))

    data = [(1, 10.0, 1), (0, 4.0, 1), (1, 3.0, 1), (0, 8.0, 1)]
    p = [1.0, 1.0, 0.0, 0.0]
    q = [1 - x for x in p]
    r11 = rmst(cell(data, 1, p), 10.0)
    r01 = rmst(cell(data, 0, p), 10.0)
    r10 = rmst(cell(data, 1, q), 10.0)
    r00 = rmst(cell(data, 0, q), 10.0)
    print("cells (rmst 11, 01, 10, 00):", r11, r01, r10, r00)
    sp, sq = sum(p), sum(q)
    v = sp * (r11 - r01) - sq * (r10 - r00)
    print("value:", repr(v))
    print("itr value:", repr(sp * r11 + sq * r00))
