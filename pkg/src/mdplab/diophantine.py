"""Exact continued fractions and the Fourier-side approximation criteria.

Two number representations: quadratic surds (P + sqrt(D))/Q run on exact
integer arithmetic forever; decimal literals carry an explicit error radius
and every derived quantity is computed by interval arithmetic, failing
loudly ("depth limited" / "insufficient precision") instead of degrading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .conditions import SeriesDiagnostic, diagnose_series

__all__ = [
    "PrecisionError",
    "IrrationalSpec",
    "Convergent",
    "golden_spec",
    "sqrt2m1_spec",
    "liouville_literal",
    "cf_expand",
    "convergents",
    "dist_to_integers",
    "dist_to_integers_array",
    "badly_approximable_audit",
    "paroux_sum",
    "bis_series_circle",
]

_SCALE_DIGITS = 40
_SCALE = 10**_SCALE_DIGITS


class PrecisionError(ValueError):
    """Requested depth/accuracy exceeds what the representation supports."""


@dataclass(frozen=True)
class IrrationalSpec:
    """kind='quadratic': value (P + sqrt(D))/Q, exact; kind='literal': decimal
    string with an explicit error radius."""

    kind: str
    P: int = 0
    D: int = 0
    Q: int = 1
    literal: str = ""
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "quadratic":
            if self.Q == 0:
                raise ValueError("Q must be nonzero")
            r = math.isqrt(self.D)
            if self.D < 0 or r * r == self.D:
                raise ValueError("D must be a positive non-square integer")
        elif self.kind == "literal":
            if not self.literal:
                raise ValueError("literal spec needs a decimal string")
            if self.radius <= 0.0:
                raise ValueError("literal spec needs an explicit positive error radius")
        else:
            raise ValueError(f"unknown irrational kind {self.kind!r}")

    def interval(self) -> tuple:
        """Enclosing rational interval (lo, hi), as Fractions."""
        if self.kind == "quadratic":
            # floor(sqrt(D) * 10^s) brackets sqrt(D) within 10^-s
            s = math.isqrt(self.D * _SCALE * _SCALE)
            lo = Fraction(self.P * _SCALE + s, self.Q * _SCALE)
            hi = Fraction(self.P * _SCALE + s + 1, self.Q * _SCALE)
            return (lo, hi) if self.Q > 0 else (hi, lo)
        v = Fraction(self.literal)
        r = Fraction(self.radius)
        return v - r, v + r

    @property
    def uncertainty(self) -> float:
        lo, hi = self.interval()
        return float(hi - lo)

    def approx(self) -> float:
        lo, hi = self.interval()
        return float((lo + hi) / 2)

    def scaled_int(self) -> int:
        """floor(midpoint * 10^40); fast-path key for distance computations.

        The caller owns the error budget: |a - scaled_int/10^40| is at most
        uncertainty/2 + 10^-40.
        """
        lo, hi = self.interval()
        mid = (lo + hi) / 2
        return (mid.numerator * _SCALE) // mid.denominator


def golden_spec() -> IrrationalSpec:
    return IrrationalSpec(kind="quadratic", P=-1, D=5, Q=2)  # (sqrt(5)-1)/2


def sqrt2m1_spec() -> IrrationalSpec:
    return IrrationalSpec(kind="quadratic", P=-1, D=2, Q=1)  # sqrt(2)-1


def liouville_literal(terms: int = 5) -> IrrationalSpec:
    """Truncated sum of 10^(-j!): a literal violating every power-law lower bound."""
    digits = max(math.factorial(j) for j in range(1, terms + 1)) + 2
    v = Fraction(0)
    for j in range(1, terms + 1):
        v += Fraction(1, 10 ** math.factorial(j))
    s = f"{v.numerator * 10**digits // v.denominator:0{digits}d}"
    return IrrationalSpec(kind="literal", literal="0." + s, radius=10.0 ** (-digits + 1))


@dataclass(frozen=True)
class Convergent:
    k: int
    p: int
    q: int

    def __post_init__(self):
        if math.gcd(self.p, self.q) not in (0, 1):
            raise ValueError("convergent must be in lowest terms")


def cf_expand(a: IrrationalSpec, K: int):
    """Partial quotients a_0 .. a_K; exact for quadratic kinds, validated
    interval arithmetic for literals (PrecisionError when depth runs out)."""
    if K < 0:
        raise ValueError("K must be >= 0")
    if a.kind == "quadratic":
        # track x = (P + sqrt(D)) / Q with Q | (D - P^2), exact forever
        P, D, Q = a.P, a.D, a.Q
        if (D - P * P) % Q != 0:
            P, Q, D = P * abs(Q), Q * abs(Q), D * Q * Q
        out = []
        sqrtD_floor = math.isqrt(D)
        for _ in range(K + 1):
            q_k = (P + sqrtD_floor) // Q if Q > 0 else (P + sqrtD_floor + 1) // Q
            out.append(int(q_k))
            P = q_k * Q - P
            Q = (D - P * P) // Q
        return out
    lo, hi = a.interval()
    out = []
    for depth in range(K + 1):
        f_lo = lo.numerator // lo.denominator
        f_hi = hi.numerator // hi.denominator
        if f_lo != f_hi:
            raise PrecisionError(
                f"literal precision exhausted at depth {depth} (achieved K={depth - 1})")
        out.append(int(f_lo))
        lo, hi = lo - f_lo, hi - f_lo
        if lo == 0 or hi == 0:
            if depth < K:
                raise PrecisionError(
                    f"expansion terminated at depth {depth}: the literal is rational "
                    "within its error radius")
            break
        lo, hi = 1 / hi, 1 / lo
    return out


def convergents(quotients: Sequence[int], spec: Optional[IrrationalSpec] = None):
    """Exact p_k/q_k by the integer recurrence; optionally verifies
    |q_k a - p_k| < 1/q_{k+1} against the spec's enclosing interval."""
    p_prev, p = 1, quotients[0]
    q_prev, q = 0, 1
    out = [Convergent(k=0, p=int(p), q=1)]
    for k, ak in enumerate(quotients[1:], start=1):
        p, p_prev = ak * p + p_prev, p
        q, q_prev = ak * q + q_prev, q
        out.append(Convergent(k=k, p=int(p), q=int(q)))
    for c0, c1 in zip(out, out[1:]):
        det = c1.p * c0.q - c0.p * c1.q
        if det not in (1, -1):
            raise AssertionError(f"determinant identity broken at k={c1.k}: {det}")
    if spec is not None:
        lo, hi = spec.interval()
        for c, c_next in zip(out, out[1:]):
            err_hi = max(abs(c.q * lo - c.p), abs(c.q * hi - c.p))
            if err_hi >= Fraction(1, c_next.q):
                raise AssertionError(
                    f"|q_k a - p_k| < 1/q_(k+1) failed at k={c.k}")
    return out


def dist_to_integers(k: int, a: IrrationalSpec):
    """(d(k a, Z), error bound). PrecisionError when the bound swamps the value."""
    if k == 0:
        raise ValueError("k must be nonzero")
    lo, hi = a.interval()
    mid = (lo + hi) / 2
    x = k * mid
    fr = x - (x.numerator // x.denominator)
    d = min(fr, 1 - fr)
    err = abs(k) * (hi - lo) / 2
    if d == 0:
        # exact integer hit (rational test input): value 0, error honest
        return 0.0, float(err)
    if err >= d:
        raise PrecisionError(f"d({k}a, Z): error bound {float(err):.2e} exceeds "
                             f"the value {float(d):.2e}")
    return float(d), float(err)


def dist_to_integers_array(a: IrrationalSpec, K: int) -> np.ndarray:
    """d(k a, Z) for k = 1..K via the scaled-integer fast path.

    Error per entry is below (k+1)/10^40, far under float resolution for
    K <= 10^7.
    """
    A = a.scaled_int()
    out = np.empty(K)
    m = 0
    for k in range(1, K + 1):
        m = (m + A) % _SCALE
        out[k - 1] = min(m, _SCALE - m)
    return out / _SCALE


def badly_approximable_audit(a: IrrationalSpec, eps: float, K: int):
    """All k <= K with d(k a, Z) < k^(-1-eps); a finite-range check, not a proof."""
    if eps <= 0.0:
        raise ValueError("eps must be positive (eps = 0 hits every convergent)")
    # the smallest threshold in play is K^(-1-eps); distances must resolve it
    if K * a.uncertainty / 2 > 0.01 * K ** (-1.0 - eps):
        raise PrecisionError("irrational spec too coarse to audit up to this K")
    d = dist_to_integers_array(a, K)
    k = np.arange(1, K + 1, dtype=float)
    hits = np.nonzero(d < k ** (-1.0 - eps))[0] + 1
    return [int(h) for h in hits]


def _fhat_values(fhat, ks: np.ndarray) -> np.ndarray:
    if isinstance(fhat, dict):
        return np.array([abs(complex(fhat.get(int(k), 0.0))) for k in ks])
    return np.array([abs(fhat(int(k))) for k in ks])


def paroux_sum(fhat, a: IrrationalSpec, K: int):
    """Partial sums of sum over 0<|k|<=K of |fhat(k)|^2 / d(ka,Z)^2,
    with dyadic-block subtotals (blocks 2^N <= k < 2^(N+1))."""
    d = dist_to_integers_array(a, K)
    ks = np.arange(1, K + 1)
    c = _fhat_values(fhat, ks)
    terms = 2.0 * c**2 / d**2  # +k and -k contribute equally
    partial = np.cumsum(terms)
    n_blocks = int(math.floor(math.log2(K))) if K >= 1 else 0
    blocks = np.array([terms[2**N - 1 : min(2 ** (N + 1) - 1, K)].sum()
                       for N in range(n_blocks + 1)])
    return partial, blocks


def bis_series_circle(fhat, a: IrrationalSpec, N_max: int,
                      K_const: float = 2.0, k_support: int = 64) -> SeriesDiagnostic:
    """Left: sum over n <= N_max of n^(-1/2) ||K^n f - mf||_inf (exact Fourier
    sup bounded by sum |fhat(k)| |cos 2 pi k a|^n). Right: the Diophantine
    majorant K_const * sum |fhat(k)| pi^(-1/2) / d(2ka, Z). The report's extra
    carries both sides per truncation and the domination flags."""
    ks = np.arange(1, k_support + 1)
    c = _fhat_values(fhat, ks)
    live = c > 0
    ks, c = ks[live], c[live]
    if ks.size == 0:
        raise ValueError("observable has no nonzero Fourier modes")
    av = a.approx()
    alphas = np.abs(np.cos(2.0 * np.pi * ks * av))
    n = np.arange(1, N_max + 1, dtype=float)
    # sup norm of K^n f - mf: modes decouple in absolute value
    sup = (2.0 * c[None, :] * alphas[None, :] ** n[:, None]).sum(axis=1)
    terms = n ** (-0.5) * sup
    diag = diagnose_series(terms)
    d2 = np.array([dist_to_integers(2 * int(k), a)[0] for k in ks])
    right = K_const * float(np.sum(2.0 * c / (math.sqrt(math.pi) * d2)))
    left_partials = np.cumsum(terms)
    diag.extra["right_bound"] = right
    diag.extra["left_partials"] = left_partials
    diag.extra["dominated"] = bool(np.all(left_partials <= right + 1e-12))
    return diag
