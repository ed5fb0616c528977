"""Independent reference implementations used to derive frozen test values.

Everything here is written as plain Python loops over 1-based indices,
straight from the defining sums, and shares no code with the package.
"""

import math

# Two iterates count as equal when they agree to rounding. Sums over
# different index sets differ by at least one whole squared increment, far
# above this tolerance for the test data used here.
REL = 1e-12


def same(a, b):
    return math.isclose(a, b, rel_tol=REL, abs_tol=0.0)


def same_vec(a, b):
    return all(same(u, v) for u, v in zip(a, b))


def inc(x, i):
    """x_i for 1-based i, zero outside 1..n."""
    return x[i - 1] if 1 <= i <= len(x) else 0.0


def brute_trv(x, eps):
    return sum(v * v for v in x if abs(v) <= eps)


def brute_uniform(x, T, r, c0, steps=None):
    """Iterate C_j = sum x^2 1{|x| <= sqrt(r C_{j-1} / T)} and read off j_n.

    Returns (values C_0..C_m, j_n, C_{j_n}), where j_n is the first index
    after which every computed value is equal.
    """
    steps = steps or len(x) + 3
    cs = [c0]
    for _ in range(steps):
        b = math.sqrt(r * cs[-1] / T)
        cs.append(sum(v * v for v in x if abs(v) <= b))
    j = len(cs) - 1
    while j > 0 and same(cs[j - 1], cs[-1]):
        j -= 1
    return cs, j, cs[j]


def window(i, k):
    return range(i - k // 2 + 1, i + k // 2 + 1)


def brute_spot(x, h, k, i, b=math.inf, renormalize=False):
    n = len(x)
    total = sum(inc(x, l) ** 2 for l in window(i, k) if abs(inc(x, l)) <= b)
    terms = sum(1 for l in window(i, k) if 1 <= l <= n) if renormalize else k
    return total / (h * terms)


def brute_spot_bv(x, h, k, i, renormalize=False):
    n = len(x)
    total = sum(abs(inc(x, m - 1)) * abs(inc(x, m)) for m in window(i, k))
    terms = sum(1 for m in window(i, k) if 2 <= m <= n) if renormalize else k
    return 0.5 * math.pi * total / (h * terms)


def brute_local(x, h, k, r, c0, renormalize=False, steps=None):
    """Local iteration; returns (j_star, final thresholds, value)."""
    n = len(x)
    steps = steps or n + 3
    seq = [list(c0)]
    for _ in range(steps):
        prev = seq[-1]
        seq.append([brute_spot(x, h, k, i, math.sqrt(r * prev[i - 1]), renormalize) for i in range(1, n + 1)])
    j = len(seq) - 1
    while j > 0 and same_vec(seq[j - 1], seq[-1]):
        j -= 1
    bounds = [math.sqrt(r * c) for c in seq[j]]
    value = sum(v * v for v, b in zip(x, bounds) if abs(v) <= b)
    return j, bounds, value


def brute_blocks(clean, d):
    """1-based starts i with intervals i..i+d-1 all clean."""
    n = len(clean)
    return {i for i in range(1, n - d + 2) if all(clean[i - 1 : i - 1 + d])}


def quad_tail(amp, rate, y, eps):
    """nu((eps, inf)) for one CGMY side by adaptive quadrature."""
    from scipy import integrate

    f = lambda u: amp * math.exp(-rate * u) * u ** (-1.0 - y)
    pieces = [eps, 10 * eps, 1e-3, 1e-2, 1e-1, 1.0, 10.0]
    pieces = [p for p in pieces if p >= eps]
    total = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip(pieces, pieces[1:]))
    return total + integrate.quad(f, pieces[-1], math.inf, limit=200)[0]


def quad_moment(amp, rate, y, lo, hi, power):
    """int_lo^hi amp exp(-rate u) u^(power-1-y) du by adaptive quadrature."""
    from scipy import integrate

    alpha = power - 1.0 - y
    if math.isinf(hi):
        mid = max(lo, 1.0)
        tail = integrate.quad(lambda u: amp * math.exp(-rate * u) * u**alpha, mid, math.inf, limit=400)[0]
        return tail + (quad_moment(amp, rate, y, lo, mid, power) if lo < mid else 0.0)
    if lo == 0.0:
        # algebraic weight absorbs the singularity at zero
        return integrate.quad(lambda u: amp * math.exp(-rate * u), 0.0, hi, weight="alg", wvar=(alpha, 0.0))[0]
    pts = [p for p in (1e-4, 1e-3, 1e-2, 1e-1) if lo < p < hi]
    f = lambda u: amp * math.exp(-rate * u) * u**alpha
    return integrate.quad(f, lo, hi, limit=400, points=pts or None)[0]
