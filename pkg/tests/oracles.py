"""Reference implementations the tests check the package against.

They share no code with ``klm3d``: arithmetic is done in mpmath or exact
fractions, and distribution functions come from mpmath rather than scipy.
"""
from fractions import Fraction

import mpmath as mp

mp.mp.dps = 40


def t_cdf(t, df):
    """P(T <= t) for Student's t with ``df`` degrees of freedom."""
    t = mp.mpf(t)
    if mp.isinf(t):
        return mp.mpf(1) if t > 0 else mp.mpf(0)
    nu = mp.mpf(df)
    tail = mp.betainc(nu / 2, mp.mpf(1) / 2, 0, nu / (nu + t * t), regularized=True) / 2
    return 1 - tail if t > 0 else tail


def mean_sd(xs, ddof=1):
    xs = [mp.mpf(x) for x in xs]
    n = len(xs)
    m = mp.fsum(xs) / n
    var = mp.fsum((x - m) ** 2 for x in xs) / (n - ddof)
    return m, mp.sqrt(var)


def paired_z(actual, predicted):
    deltas = [mp.mpf(a) - mp.mpf(p) for a, p in zip(actual, predicted)]
    n = len(deltas)
    m, sd = mean_sd(deltas)
    z = m / (sd / mp.sqrt(n))
    p = mp.erfc(abs(z) / mp.sqrt(2))
    return {"z": z, "p": p, "sd": sd, "d": m / sd}


def tost(xs, bound=0.2):
    n = len(xs)
    m, sd = mean_sd(xs)
    se = sd / mp.sqrt(n)
    t_lower = (m + bound) / se
    t_upper = (m - bound) / se
    p = max(1 - t_cdf(t_lower, n - 1), t_cdf(t_upper, n - 1))
    return {"p": p, "mean": m, "sd": sd, "t_lower": t_lower, "t_upper": t_upper}


def t_quantile(q, df):
    return mp.findroot(lambda t: t_cdf(t, df) - q, mp.mpf(1.7))


def kept_mask(deltas, k=2):
    """Exact two-SD rule on float inputs: keep unless (d - mean)^2 > k^2 * population variance."""
    fr = [Fraction(d) for d in deltas]
    n = len(fr)
    mean = sum(fr) / n
    var = sum((d - mean) ** 2 for d in fr) / n
    k2 = Fraction(k) ** 2
    return [not ((d - mean) ** 2 > k2 * var) for d in fr]


def ols(xs, ys):
    """Closed-form least squares in exact fractions."""
    xs = [Fraction(x) for x in xs]
    ys = [Fraction(y) for y in ys]
    n = len(xs)
    xm, ym = sum(xs) / n, sum(ys) / n
    sxx = sum((x - xm) ** 2 for x in xs)
    b = sum((x - xm) * (y - ym) for x, y in zip(xs, ys)) / sxx
    a = ym - b * xm
    return float(a), float(b)
