"""Double-double arithmetic on (hi, lo) pairs.

Suffix statistics come from differences of cumulative aggregates, which
cancels badly when a short suffix has a tiny spread. Carrying roughly 106 bits
keeps those differences accurate. Every function accepts Python floats or
numpy arrays alike. Results are exact (two_sum, two_prod) or accurate to about
2**-100 as long as no intermediate product falls into the subnormal range.
"""

_SPLIT = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def fast_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    return fast_two_sum(s, e + al + bl)


def sub(ah, al, bh, bl):
    return add(ah, al, -bh, -bl)


def mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    return fast_two_sum(p, e + ah * bl + al * bh)


def mul_d(ah, al, b):
    """(ah, al) times the float ``b``."""
    p, e = two_prod(ah, b)
    return fast_two_sum(p, e + al * b)


def div_d(ah, al, b):
    """(ah, al) divided by the float ``b``."""
    q1 = ah / b
    p, e = two_prod(q1, b)
    r = ((ah - p) - e) + al
    return fast_two_sum(q1, r / b)
