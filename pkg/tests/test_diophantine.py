import math
from fractions import Fraction

import numpy as np
import pytest

from mdplab.diophantine import (
    Convergent,
    IrrationalSpec,
    PrecisionError,
    badly_approximable_audit,
    bis_series_circle,
    cf_expand,
    convergents,
    dist_to_integers,
    dist_to_integers_array,
    golden_spec,
    liouville_literal,
    paroux_sum,
    sqrt2m1_spec,
)

# the full Fibonacci numbers F with F <= 2584
FIBS = [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987, 1597, 2584]


def test_golden_quotients_all_ones():
    assert cf_expand(golden_spec(), 40) == [0] + [1] * 40


def test_sqrt2_quotients():
    assert cf_expand(sqrt2m1_spec(), 20) == [0] + [2] * 20


def test_golden_convergents_are_fibonacci_ratios():
    convs = convergents(cf_expand(golden_spec(), 15), spec=golden_spec())
    fib = [1, 1]
    while len(fib) < 20:
        fib.append(fib[-1] + fib[-2])
    # p_k / q_k = F_k / F_{k+1}
    for c in convs[1:]:
        assert c.p == fib[c.k - 1]
        assert c.q == fib[c.k]


def test_convergent_must_be_reduced():
    with pytest.raises(ValueError):
        Convergent(k=1, p=2, q=4)


def test_convergents_verify_against_interval():
    # the |q_k a - p_k| < 1/q_{k+1} certificate runs without raising
    convergents(cf_expand(sqrt2m1_spec(), 25), spec=sqrt2m1_spec())


def test_literal_expansion_exhausts_precision_loudly():
    spec = IrrationalSpec(kind="literal", literal="0.6180339887", radius=1e-10)
    with pytest.raises(PrecisionError):
        cf_expand(spec, 60)


def test_literal_shallow_expansion_matches_quadratic():
    spec = IrrationalSpec(kind="literal", literal="0.61803398874989484820",
                          radius=1e-20)
    assert cf_expand(spec, 12) == cf_expand(golden_spec(), 12)


def test_dist_to_integers_scalar_oracle():
    a = golden_spec()
    g = (math.sqrt(5.0) - 1.0) / 2.0
    for k in (1, 2, 7, 12):
        d, err = dist_to_integers(k, a)
        frac = (k * g) % 1.0
        assert d == pytest.approx(min(frac, 1.0 - frac), abs=1e-12)
        assert err < d


def test_dist_array_agrees_with_scalar():
    a = sqrt2m1_spec()
    arr = dist_to_integers_array(a, 50)
    for k in (1, 10, 50):
        d, _ = dist_to_integers(k, a)
        assert arr[k - 1] == pytest.approx(d, abs=1e-12)


def test_golden_audit_hits_are_exactly_fibonacci():
    # d(k a, Z) < k^(-1.1) holds precisely at Fibonacci k while k^0.1 < sqrt(5),
    # i.e. for every Fibonacci number below 3125; this list is frozen as the
    # true finite-range answer for K = 10^4
    hits = badly_approximable_audit(golden_spec(), 0.1, 10_000)
    assert hits == FIBS


def test_audit_eps_zero_rejected():
    with pytest.raises(ValueError):
        badly_approximable_audit(golden_spec(), 0.0, 100)


def test_audit_precision_guard():
    coarse = IrrationalSpec(kind="literal", literal="0.618034", radius=1e-6)
    with pytest.raises(PrecisionError):
        badly_approximable_audit(coarse, 0.1, 10_000)


def test_liouville_audit_finds_deep_approximations():
    spec = liouville_literal()
    hits = badly_approximable_audit(spec, 0.1, 300)
    # denominators 10^(j!) resonate: k = 100, 200 are hits alongside small k
    assert 100 in hits and 200 in hits


def test_paroux_partial_sums_and_blocks():
    fhat = {1: 0.5}
    partial, blocks = paroux_sum(fhat, golden_spec(), 64)
    assert partial.shape == (64,)
    assert np.all(np.diff(partial) >= 0)
    # block subtotals re-sum to the final partial sum
    assert np.sum(blocks) == pytest.approx(partial[-1], rel=1e-12)


def test_bis_series_circle_dominated():
    diag = bis_series_circle({1: 0.5}, golden_spec(), 400)
    assert diag.verdict == "converging"
    assert diag.extra["dominated"]
    assert diag.extra["left_partials"][-1] <= diag.extra["right_bound"]


def test_quadratic_spec_validation():
    with pytest.raises(ValueError):
        IrrationalSpec(kind="quadratic", P=0, D=4, Q=1)  # perfect square
    with pytest.raises(ValueError):
        IrrationalSpec(kind="literal", literal="0.5", radius=0.0)


def test_interval_encloses_value():
    lo, hi = golden_spec().interval()
    g = Fraction(1, 2)  # golden is in (0.618..., 0.619)
    assert lo < hi
    assert float(hi - lo) < 1e-39
    assert lo > g and hi < Fraction(2, 3)
