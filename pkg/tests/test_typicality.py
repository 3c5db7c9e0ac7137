import itertools
import math
from collections import Counter
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crforge.dist import AuxChannel, CountablePmf, DoublySymmetricBinary, JointPmf
from crforge.errors import NotMarkov, ValidationError
from crforge.typicality import (DenseScorer, TypicalityLadder, empirical_type,
                                exact_typical_cardinality, independent_pair_probability,
                                is_typical, typicality_score, verify_aep, verify_consistency,
                                verify_jaep, verify_markov_lemma, wilson_interval)

mpmath.mp.dps = 40


def _mpf(v):
    v = Fraction(v)
    return mpmath.mpf(v.numerator) / v.denominator


def reference_score(seqs, p: dict) -> mpmath.mpf:
    """Score from exact rational types and 40-digit logs."""
    n = len(seqs[0])
    keys = list(zip(*seqs)) if len(seqs) > 1 else list(seqs[0])
    q = {k: Fraction(c, n) for k, c in Counter(keys).items()}
    if any(p.get(k, 0) == 0 for k in q):
        return mpmath.inf

    def h(dist):
        return -sum(_mpf(v) * mpmath.log(_mpf(v), 2) for v in dist.values() if v > 0)

    def marg(dist, coords):
        out = Counter()
        for k, v in dist.items():
            out[tuple(k[c] for c in coords)] += v
        return out

    d = sum(_mpf(v) * mpmath.log(_mpf(v) / _mpf(p[k]), 2) for k, v in q.items())
    arity = len(seqs)
    if arity == 1:
        return d + abs(h(q) - h(p))
    total = d
    for r in range(1, arity + 1):
        for s in itertools.combinations(range(arity), r):
            total += abs(h(marg(q, s)) - h(marg(p, s)))
    return total


def test_score_zero_on_exact_type():
    p = CountablePmf.uniform(2)
    assert typicality_score(empirical_type([0, 1, 0, 1]), p) == pytest.approx(0.0, abs=1e-15)


def test_score_infinite_off_support():
    p = CountablePmf.uniform(2)
    assert typicality_score(empirical_type([0, 1, 2]), p) == math.inf
    assert not is_typical(empirical_type([0, 1, 2]), p, 10.0)


def test_score_against_countable_reference():
    g = CountablePmf.geometric(0.5)
    x = [1, 1, 2, 3, 1, 1, 2, 1]
    # the entropy term uses the full countable law, H = 2 bits
    q = Counter(x)
    d = sum(c / 8 * math.log2((c / 8) / g.prob(k)) for k, c in q.items())
    hq = -sum(c / 8 * math.log2(c / 8) for c in q.values())
    assert typicality_score(empirical_type(x), g) == pytest.approx(d + abs(hq - 2.0), abs=1e-9)


bits = st.lists(st.integers(0, 1), min_size=4, max_size=24)
probs4 = st.lists(st.integers(1, 20), min_size=4, max_size=4)


@settings(max_examples=60, deadline=None)
@given(st.data(), probs4)
def test_joint_score_matches_rational_reference(data, weights):
    n = data.draw(st.integers(4, 24))
    x = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    y = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    total = sum(weights)
    p = {(a, b): Fraction(weights[2 * a + b], total) for a in (0, 1) for b in (0, 1)}
    j = JointPmf.from_dict({k: float(v) for k, v in p.items()})
    ref = float(reference_score([x, y], p))
    assert typicality_score(empirical_type(x, y), j) == pytest.approx(ref, abs=1e-10)
    counts = np.bincount(2 * np.array(x) + np.array(y), minlength=4).reshape(1, 2, 2)
    assert DenseScorer(j.dense(), n).scores(counts)[0] == pytest.approx(ref, abs=1e-10)
    assert DenseScorer(j.dense()).scores(counts)[0] == pytest.approx(ref, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=6, max_size=6).map(lambda v: v * 2),
       st.lists(st.integers(1, 9), min_size=8, max_size=8))
def test_trivariate_dense_matches_dict_path(seq, weights):
    total = sum(weights)
    cells = list(itertools.product((0, 1), repeat=3))
    j = JointPmf.from_dict({c: w / total for c, w in zip(cells, weights)})
    u, x, y = seq[:4], seq[4:8], seq[8:12]
    counts = np.zeros((1, 2, 2, 2), dtype=np.int64)
    for a, b, c in zip(u, x, y):
        counts[0, a, b, c] += 1
    assert DenseScorer(j.dense(), 4).scores(counts)[0] == pytest.approx(
        typicality_score(empirical_type(u, x, y), j), abs=1e-12)


@given(st.floats(0.01, 2.0), st.floats(0.0, 1.0), bits)
def test_typical_sets_nest(nu, extra, x):
    p = CountablePmf.table([0, 1], [0.3, 0.7])
    q = empirical_type(x)
    if is_typical(q, p, nu):
        assert is_typical(q, p, nu + extra)


def test_ladder_validation():
    TypicalityLadder(0.1, 0.2, 0.3, 0.4, 0.31)
    with pytest.raises(ValidationError, match="nu1"):
        TypicalityLadder(0.1, 0.3, 0.2, 0.4, 0.5)
    with pytest.raises(ValidationError, match="1.5"):
        TypicalityLadder(0.1, 0.2, 0.3, 0.4, 0.3)


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(90, 100)
    assert lo < 0.9 < hi
    assert wilson_interval(0, 10)[0] == 0.0


# -- theorem checks -------------------------------------------------------------


@pytest.mark.parametrize("p", [CountablePmf.uniform(2), CountablePmf.geometric(0.5),
                               CountablePmf.poisson(3.0)])
def test_aep_sandwich(p):
    r = verify_aep(p, 0.3, 200, 2000, seed=4)
    assert r.deterministic_violations == 0
    assert r.successes > 0


def test_aep_requires_enough_trials():
    with pytest.raises(ValidationError):
        verify_aep(CountablePmf.uniform(2), 0.3, 10, 10)


def test_exact_cardinality_brute_force_oracle():
    p = np.array([0.2, 0.8])
    nu, n = 0.4, 9
    brute = 0
    h = -(p * np.log2(p)).sum()
    for seq in itertools.product((0, 1), repeat=n):
        k = sum(seq)
        q = np.array([n - k, k]) / n
        pos = q > 0
        d = (q[pos] * np.log2(q[pos] / p[pos])).sum()
        hq = -(q[pos] * np.log2(q[pos])).sum()
        brute += d + abs(hq - h) <= nu
    assert exact_typical_cardinality(p, nu, n) == brute


def test_jaep_dsbs():
    r = verify_jaep(DoublySymmetricBinary(0.11).joint(), 0.3, 500, 1000, seed=2)
    assert r.deterministic_violations == 0
    assert r.estimate > 0.9


def test_consistency_exhaustive_small():
    j = JointPmf.from_dense([[0.1, 0.2], [0.3, 0.4]])
    r = verify_consistency(j, 0.3, 6, mode="exhaustive")
    assert r.violations == 0
    assert r.checked == 4 ** 6


def test_lemma1_upper_bound_exact():
    r = independent_pair_probability(DoublySymmetricBinary(0.05).joint(), 0.4, 0.1, 8)
    assert r.upper_ok
    assert 0.0 <= r.probability <= 1.0


def test_lemma1_exact_matches_montecarlo():
    j = JointPmf.from_dense([[0.3, 0.2], [0.1, 0.4]])
    exact = independent_pair_probability(j, 0.4, 0.1, 6)
    mc = independent_pair_probability(j, 0.4, 0.1, 6, mode="montecarlo", trials=20000, seed=1)
    assert mc.ci_low - 0.01 <= exact.probability <= mc.ci_high + 0.01


def test_markov_lemma_rate():
    x_y = DoublySymmetricBinary(0.1).joint()
    tri = AuxChannel.binary_symmetric(0.1).compose(x_y)
    r = verify_markov_lemma(tri, 0.2, 1000, 1000, seed=3)
    assert r.estimate >= 0.8


def test_markov_lemma_rejects_non_markov():
    bad = JointPmf.from_dict({(0, 0, 0): 0.5, (1, 0, 1): 0.5})
    with pytest.raises(NotMarkov):
        verify_markov_lemma(bad, 0.2, 10, 10)


def test_lemma1_exact_matches_pair_enumeration():
    j = JointPmf.from_dense([[0.35, 0.15], [0.1, 0.4]])
    px, py = j.marginal_pmf(0), j.marginal_pmf(1)
    n, nu = 5, 0.4
    brute = 0.0
    for x in itertools.product((0, 1), repeat=n):
        for y in itertools.product((0, 1), repeat=n):
            if typicality_score(empirical_type(x, y), j) <= nu:
                brute += math.prod(px.prob(a) for a in x) * math.prod(py.prob(b) for b in y)
    assert independent_pair_probability(j, nu, 0.1, n).probability == pytest.approx(brute, rel=1e-9)
