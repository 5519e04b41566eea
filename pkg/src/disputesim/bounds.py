"""Numerical verification of the round-bound machinery.

Demotion distributions behave, round over round, like sequences pushed
through a two-tap binomial kernel (q = 1/G at lag 0, p = 1 - q at lag 1)
plus a small additive leak.  This module provides the discrete-sequence
algebra, the closed-form auto-convolutions of the kernel, the linear
ramp envelope they imply, the round threshold J obtained through the
lower logarithmic replacement of the Lambert W_{-1} branch, and the
binomial tail inequality used to bound the leak.  Everything is checked
numerically, not re-derived.

Distributions arrive as exact integers; bound sides are IEEE doubles
with a 1e-9 tolerance added.  Several bounds are attained with exact
equality on legitimate rounds (for example d'[0] = q d[0] + p whenever
G = 2 and d[0] is odd), while any genuine violation overshoots by at
least the integer granularity of the left side, far above the
tolerance; so the tolerance absorbs float rounding without ever hiding
a violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .adversary import Distribution
from .errors import AlphaOutOfDomain, InvalidParam, PreconditionViolated

SLACK = 1e-9


@dataclass(frozen=True)
class Sequence:
    """Finite-support real sequence; value at index offset+i is values[i]."""

    offset: int
    values: tuple[float, ...]

    def __getitem__(self, k: int) -> float:
        i = k - self.offset
        if 0 <= i < len(self.values):
            return self.values[i]
        return 0.0

    @property
    def support(self) -> range:
        return range(self.offset, self.offset + len(self.values))


def sequence(offset: int, values) -> Sequence:
    """Normalized constructor: strips leading/trailing zeros."""
    vals = [float(v) for v in values]
    lo = 0
    while lo < len(vals) and vals[lo] == 0.0:
        lo += 1
    hi = len(vals)
    while hi > lo and vals[hi - 1] == 0.0:
        hi -= 1
    if lo == hi:
        return Sequence(offset=0, values=())
    return Sequence(offset=offset + lo, values=tuple(vals[lo:hi]))


def unit_impulse(i: int) -> Sequence:
    return Sequence(offset=i, values=(1.0,))


def unit_step(i: int, length: int) -> Sequence:
    """Unit step truncated to a finite window of ``length`` ones."""
    return Sequence(offset=i, values=(1.0,) * length)


def ramp(i: int, length: int) -> Sequence:
    """Unit linear ramp (1, 2, 3, ...) starting at index i, truncated."""
    return Sequence(offset=i, values=tuple(float(j + 1) for j in range(length)))


def slope4_ramp_value(k: int) -> float:
    """r'_0[k] = r_0[k] + 3 r_1[k]: the slope-4 envelope 4k + 1 for k >= 0."""
    if k < 0:
        return 0.0
    return 4.0 * k + 1.0


def scale(a: float, x: Sequence) -> Sequence:
    return sequence(x.offset, (a * v for v in x.values))


def add(x: Sequence, y: Sequence) -> Sequence:
    if not x.values:
        return y
    if not y.values:
        return x
    lo = min(x.offset, y.offset)
    hi = max(x.offset + len(x.values), y.offset + len(y.values))
    return sequence(lo, (x[k] + y[k] for k in range(lo, hi)))


def convolve(x: Sequence, y: Sequence) -> Sequence:
    """Discrete convolution; support is the sum of supports."""
    if not x.values or not y.values:
        return Sequence(offset=0, values=())
    out = [0.0] * (len(x.values) + len(y.values) - 1)
    for i, xv in enumerate(x.values):
        if xv == 0.0:
            continue
        for j, yv in enumerate(y.values):
            out[i + j] += xv * yv
    return sequence(x.offset + y.offset, out)


def binomial_kernel(group_size: int) -> Sequence:
    """Two-tap kernel: q = 1/G at index 0, p = 1 - q at index 1."""
    if group_size < 2:
        raise InvalidParam("group size must be >= 2")
    q = 1.0 / group_size
    return Sequence(offset=0, values=(q, 1.0 - q))


def auto_convolution(group_size: int, j: int, k: int) -> float:
    """Closed form of the j-fold kernel auto-convolution at index k.

    Equals C(j, k) p^k q^(j-k) inside 0 <= k <= j and zero outside;
    evaluated in log space so large j stays finite.
    """
    if j < 0:
        raise InvalidParam("j must be >= 0")
    if k < 0 or k > j:
        return 0.0
    if j == 0:
        return 1.0
    q = 1.0 / group_size
    p = 1.0 - q
    log_term = (
        math.lgamma(j + 1)
        - math.lgamma(k + 1)
        - math.lgamma(j - k + 1)
        + k * math.log(p)
        + (j - k) * math.log(q)
    )
    return math.exp(log_term)


def ramp_bound_check(
    d_j: Distribution, n_claims: int, j: int, group_size: int
) -> bool:
    """Check d_j[k] <= N b^j[k] + (4k + 1) for every k.

    This is the iterated one-round envelope: N spread through j kernel
    applications plus the accumulated slope-4 leak.
    """
    for k, count in enumerate(d_j):
        rhs = n_claims * auto_convolution(group_size, j, k) + slope4_ramp_value(k)
        if count > rhs + SLACK:
            return False
    return True


def j_threshold(k_max: int, group_size: int, n_claims: int) -> int:
    """Rounds after which the distribution must fit under the slope-4 ramp.

    Solves for the upper crossing of the kernel mass at 1/N using the
    logarithmic lower bound on W_{-1} (W_{-1}(x) > log(-x) -
    sqrt(-2(1 + log(-x))) on -1/e < x < 0), then rounds up.
    """
    if k_max < 1 or n_claims < 2 or group_size < 2:
        raise InvalidParam("need K >= 1, N >= 2, G >= 2")
    q = 1.0 / group_size
    p = 1.0 - q
    alpha = q * math.log(q) / (math.e * p * n_claims ** (1.0 / k_max))
    if not -1.0 / math.e < alpha < 0.0:
        raise AlphaOutOfDomain(f"alpha={alpha} outside (-1/e, 0)")
    w_lower = math.log(-alpha) - math.sqrt(-2.0 * (1.0 + math.log(-alpha)))
    j_minus1 = k_max * w_lower / math.log(q)
    threshold = math.ceil(j_minus1)
    lg = math.log(n_claims) / math.log(group_size)
    assert threshold <= 4 * k_max + lg + 2 * math.sqrt(k_max * lg) + SLACK, (
        "threshold escaped its own closed-form ceiling"
    )
    return threshold


def settlement_bound(k_max: int, group_size: int, n_claims: int) -> float:
    """Proven ceiling on rounds: 13 K + log_G N + 2 sqrt(K log_G N)."""
    lg = math.log(n_claims) / math.log(group_size) if n_claims > 1 else 0.0
    return 13.0 * k_max + lg + 2.0 * math.sqrt(k_max * lg)


def binomial_cdf(n: int, p: float, k: int) -> float:
    """Exact-in-float lower tail of Binomial(n, p) via the closed-form PMF."""
    if k < 0:
        return 0.0
    q = 1.0 - p
    total = 0.0
    for i in range(0, min(k, n) + 1):
        total += math.exp(
            math.lgamma(n + 1)
            - math.lgamma(i + 1)
            - math.lgamma(n - i + 1)
            + (i * math.log(p) if i else 0.0)
            + ((n - i) * math.log(q) if n - i else 0.0)
        )
    return min(total, 1.0)


def hoeffding_tail_check(n: int, p: float, k: int) -> bool:
    """Check Pr[X <= k] <= exp(-2 n (p - k/n)^2) for X ~ Binomial(n, p)."""
    if not 0.0 < p < 1.0 or n < 1:
        raise InvalidParam("need n >= 1 and 0 < p < 1")
    if k > n * p:
        raise PreconditionViolated(f"k={k} above the mean n*p={n * p}")
    bound = math.exp(-2.0 * n * (p - k / n) ** 2)
    return binomial_cdf(n, p, k) <= bound + SLACK


def under_slope4_ramp(d: Distribution) -> bool:
    """Check d[k] <= 4k + 1 for every k (exact integer comparison)."""
    return all(count <= 4 * k + 1 for k, count in enumerate(d))


def recurrence_check(
    d_prev: Distribution, d_next: Distribution, group_size: int
) -> bool:
    """One-round envelope: d'[k] <= p d[k-1] + q d[k] + 4p, d'[0] <= q d[0] + p."""
    q = 1.0 / group_size
    p = 1.0 - q
    if d_next[0] > q * d_prev[0] + p + SLACK:
        return False
    for k in range(1, len(d_next)):
        if d_next[k] > p * d_prev[k - 1] + q * d_prev[k] + 4.0 * p + SLACK:
            return False
    return True
