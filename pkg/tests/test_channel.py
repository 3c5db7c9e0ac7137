import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crforge.channel import (Dmc, LinkModel, RandomCode, blahut_arimoto, check_rate_condition,
                             shannon_capacity, simulate_link, transmit)
from crforge.errors import NonStochasticMatrix, RateConditionViolated, ValidationError


def h2(p):
    return 0.0 if p in (0, 1) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


@pytest.mark.parametrize("p", [0.0, 0.02, 0.11, 0.3, 0.5])
def test_bsc_capacity_closed_form(p):
    assert shannon_capacity(Dmc.bsc(p)) == pytest.approx(1 - h2(p), abs=1e-9)


@pytest.mark.parametrize("e", [0.0, 0.3, 0.9])
def test_bec_capacity(e):
    assert Dmc.bec(e).capacity == pytest.approx(1 - e, abs=1e-9)


def test_noiseless_capacity():
    assert Dmc.noiseless(4).capacity == pytest.approx(2.0, abs=1e-9)


def test_z_channel_closed_form():
    # Z-channel: 1 -> 0 with prob q; C = log2(1 + (1-q) q^{q/(1-q)})
    q = 0.4
    w = Dmc(np.array([[1.0, 0.0], [q, 1 - q]]))
    assert w.capacity == pytest.approx(math.log2(1 + (1 - q) * q ** (q / (1 - q))), abs=1e-9)


def test_bracket_contains_capacity_every_iteration():
    w = Dmc.bsc(0.11)
    c = 1 - h2(0.11)
    trace = blahut_arimoto(w, 1e-12)
    for lo, hi in zip(trace.lower, trace.upper):
        assert lo <= c + 1e-12 and c <= hi + 1e-12


stoch = st.integers(2, 4).flatmap(lambda k: st.lists(
    st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3), min_size=k, max_size=k))


@settings(max_examples=30, deadline=None)
@given(stoch, st.randoms(use_true_random=False))
def test_capacity_invariant_under_relabelling(rows, rnd):
    w = np.array(rows)
    w /= w.sum(axis=1, keepdims=True)
    base = shannon_capacity(Dmc(w))
    ri = list(range(w.shape[0]))
    ci = list(range(w.shape[1]))
    rnd.shuffle(ri)
    rnd.shuffle(ci)
    assert shannon_capacity(Dmc(w[ri][:, ci])) == pytest.approx(base, abs=1e-8)
    assert 0.0 <= base <= math.log2(min(w.shape)) + 1e-9


def test_non_stochastic_rejected():
    with pytest.raises(NonStochasticMatrix):
        Dmc(np.array([[0.5, 0.4], [0.5, 0.5]]))


def test_json_round_trip():
    w = Dmc.bec(0.2)
    back = Dmc.from_json(w.to_json())
    assert np.array_equal(back.transition, w.transition) and back.outputs == w.outputs
    assert Dmc.from_json({"kind": "bsc", "p": 0.1}).capacity == pytest.approx(1 - h2(0.1))


def test_rate_condition_inclusive():
    # log2(N1+1)/n == C - delta' exactly: 1 bit/use noiseless, N1 = 2^8 - 1, n = 16
    assert check_rate_condition(255, 16, 0.5 + 0.05, 0.05)
    assert not check_rate_condition(256, 16, 0.55, 0.05)


def test_ideal_link_is_identity():
    w = Dmc.noiseless(2)
    assert transmit(7, 100, 10, LinkModel(), w) == 7


def test_transmit_rejects_rate_violation():
    with pytest.raises(RateConditionViolated):
        transmit(1, 2 ** 20, 10, LinkModel(), Dmc.bsc(0.11))


def test_transmit_index_range():
    with pytest.raises(ValidationError):
        transmit(0, 4, 10, LinkModel(), Dmc.noiseless(2))


def test_random_coded_bsc_low_rate():
    # rate 0.5 at blocklength 64, well below C(BSC(0.02)) = 0.86
    assert simulate_link(Dmc.bsc(0.02), 2 ** 32, 64, 10_000, seed=1) < 0.05


def test_random_code_explicit_small():
    err = simulate_link(Dmc.bsc(0.05), 16, 32, 2000, seed=2)
    assert err < 0.05


def test_random_code_noiseless_never_errs_when_distinct():
    code = RandomCode(Dmc.noiseless(2), 4, 16, code_seed=3)
    assert len({tuple(c) for c in code.codewords}) == 4
    for m in range(1, 5):
        assert code.send(m, seed=m) == m


def test_link_mode_validated():
    with pytest.raises(ValidationError):
        LinkModel("carrier pigeon")
