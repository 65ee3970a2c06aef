import math

import numpy as np
import pytest
from scipy import stats

from mdplab.core import RngStream
from mdplab.inequalities import (
    azuma_bound,
    blocking_bound_first_term,
    clopper_pearson_upper,
    projection_bound,
    puw_bound,
    verify_domination,
)
from mdplab.processes import IIDSpec, make_iid

STREAM = RngStream(777)


def test_azuma_hand_value():
    # 2 exp(-t^2 / (2 n c^2)) at n=100, c=1, t=20: 2 e^-2
    assert azuma_bound(100, 1.0, 20.0) == pytest.approx(2.0 * math.exp(-2.0),
                                                        abs=1e-14)


def test_azuma_monotone_in_t():
    ts = np.linspace(0.0, 50.0, 20)
    vals = [azuma_bound(100, 1.0, t) for t in ts]
    assert np.all(np.diff(vals) <= 0)


def test_puw_reduces_to_scaled_azuma_without_memory():
    # with zero conditional norms the exponent matches azuma up to the 4 sqrt(e)
    n, t, x_inf = 64, 10.0, 1.0
    got = puw_bound(n, t, x_inf, np.zeros(n))
    expect = 4.0 * math.sqrt(math.e) * math.exp(-(t**2) / (2.0 * n * x_inf**2))
    assert got == pytest.approx(expect, rel=1e-12)


def test_puw_memory_widens_the_bound():
    n, t = 64, 10.0
    quiet = puw_bound(n, t, 1.0, np.zeros(n))
    loud = puw_bound(n, t, 1.0, 0.5 ** np.arange(1, n + 1))
    assert loud > quiet


def test_projection_bound_shapes():
    moment, tail = projection_bound(16, 2.0, np.ones(16), [1.0])
    # tail = 8 exp(-x^2 / (2 G^2 D^2)) with D = 1, G^2 = 16
    assert tail == pytest.approx(8.0 * math.exp(-4.0 / (2.0 * 16.0)), rel=1e-12)
    # moment bound at t: 4 exp(G^2 D^2 t^2 / 2)
    assert moment(0.5) == pytest.approx(4.0 * math.exp(0.5 * 16.0 * 0.25), rel=1e-12)


def test_blocking_guard():
    with pytest.raises(ValueError):
        # c*B/n far above delta/2
        blocking_bound_first_term(n=100, B=50.0, c=10, delta=0.1)
    v = blocking_bound_first_term(n=10_000, B=1.0, c=4, delta=0.5)
    assert 0.0 < v < 2.0


def test_clopper_pearson_matches_beta_quantile():
    k, n = 7, 100
    expect = stats.beta.ppf(0.95, k + 1, n - k)
    assert clopper_pearson_upper(k, n) == pytest.approx(expect, abs=1e-14)
    assert clopper_pearson_upper(0, 50) > 0.0
    assert clopper_pearson_upper(50, 50) == 1.0


def test_verify_domination_iid_azuma():
    model = make_iid(IIDSpec())
    n = 64
    # thresholds where 2000 replicas resolve the bound (the acceptance pass
    # pushes to 4 sigma sqrt(n) with 10^5 replicas)
    thresholds = [2.5 * math.sqrt(n), 3.0 * math.sqrt(n)]
    reports = verify_domination(model, {"kind": "azuma", "c": 1.0},
                                thresholds, replicas=2000, n=n,
                                stream=STREAM.named("dom"))
    assert all(r.verdict == "dominated" for r in reports)
    assert all(r.ci_upper <= r.bound for r in reports)


def test_verify_domination_deterministic():
    model = make_iid(IIDSpec())
    kw = dict(thresholds=[20.0], replicas=1000, n=64)
    a = verify_domination(model, {"kind": "azuma"}, stream=STREAM.named("det"), **kw)
    b = verify_domination(model, {"kind": "azuma"}, stream=STREAM.named("det"), **kw)
    assert a[0].p_hat == b[0].p_hat
    assert a[0].ci_upper == b[0].ci_upper


def test_verify_domination_rejects_inconsistent_spec():
    model = make_iid(IIDSpec())  # bound 1
    with pytest.raises(ValueError):
        verify_domination(model, {"kind": "azuma", "c": 0.5}, [10.0],
                          replicas=1000, n=32, stream=STREAM.named("bad"))


def test_verify_domination_replica_floor():
    model = make_iid(IIDSpec())
    with pytest.raises(ValueError):
        verify_domination(model, {"kind": "azuma"}, [10.0],
                          replicas=10, n=32, stream=STREAM.named("few"))
