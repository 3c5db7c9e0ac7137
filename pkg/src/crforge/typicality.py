"""Empirical types and unified typicality on countable alphabets.

A sequence (or tuple of sequences) is nu-typical for P when

    D(Q || P) + sum over nonempty coordinate subsets S of |H(Q_S) - H(P_S)| <= nu

where Q is its empirical type. For one coordinate this is one entropy term,
for pairs three, for triples seven.

The verifiers sample, score, and report; they never assert asymptotic
statements at finite n. Deterministic consequences (the probability
sandwich for typical sequences, consistency of joint typicality) are
counted as violations and must come out zero.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from .dist import CountablePmf, JointPmf, entropy, kl_divergence, mutual_information
from .errors import ArityMismatch, ExactTooLarge, LengthMismatch, NotMarkov, ValidationError
from .rng import derive_rng

WILSON_Z95 = 1.959963984540054
EXACT_SEQUENCE_CAP = 2_000_000
LEMMA1_EXACT_CAP = 10_000_000
# Slack on the deterministic probability sandwich, in bits per symbol. The
# inequality is exact in real arithmetic; this only absorbs float rounding.
SANDWICH_SLACK = 1e-9


# --------------------------------------------------------------------------
# Empirical types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalType:
    """Symbol (or symbol-tuple) counts of a length-n sequence."""

    counts: dict
    n: int
    arity: int = 1

    def __post_init__(self):
        if sum(self.counts.values()) != self.n:
            raise ValidationError("type counts must sum to the sequence length")
        if any(c < 1 for c in self.counts.values()):
            raise ValidationError("stored counts must be positive")

    def as_pmf(self, exact: bool = False) -> dict:
        if exact:
            return {k: Fraction(c, self.n) for k, c in self.counts.items()}
        return {k: c / self.n for k, c in self.counts.items()}

    def marginal(self, coords: Sequence[int]) -> "EmpiricalType":
        coords = tuple(coords)
        if self.arity == 1:
            if coords != (0,):
                raise ArityMismatch("univariate type has only coordinate 0")
            return self
        acc: Counter = Counter()
        for key, c in self.counts.items():
            sub = tuple(key[i] for i in coords)
            acc[sub[0] if len(sub) == 1 else sub] += c
        return EmpiricalType(dict(acc), self.n, len(coords))

    def entropy(self) -> float:
        c = np.array(list(self.counts.values()), dtype=float) / self.n
        return max(0.0, -math.fsum((c * np.log2(c)).tolist()))


def empirical_type(*seqs) -> EmpiricalType:
    """Type of one sequence, or the positionwise joint type of several.

    >>> empirical_type([1, 1, 2, 3]).as_pmf()
    {1: 0.5, 2: 0.25, 3: 0.25}
    """
    if not seqs:
        raise ValidationError("empirical_type needs at least one sequence")
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise LengthMismatch(f"sequences have different lengths {sorted(lengths)}")
    (n,) = lengths
    if n == 0:
        raise ValidationError("empty sequence has no type")
    if len(seqs) == 1:
        return EmpiricalType(dict(Counter(_hashable(s) for s in seqs[0])), n, 1)
    cols = [[_hashable(v) for v in s] for s in seqs]
    return EmpiricalType(dict(Counter(zip(*cols))), n, len(seqs))


def _hashable(v):
    return v.item() if isinstance(v, np.generic) else v


# --------------------------------------------------------------------------
# Scores
# --------------------------------------------------------------------------


def _subsets(k: int):
    for r in range(1, k + 1):
        yield from combinations(range(k), r)


def typicality_score(q: EmpiricalType, p) -> float:
    """Left-hand side of the unified typicality condition.

    ``p`` is a :class:`CountablePmf` (arity 1) or a :class:`JointPmf` whose
    arity matches ``q``. Returns ``inf`` when the sequence uses a symbol of
    zero probability.
    """
    if isinstance(p, CountablePmf):
        if q.arity != 1:
            raise ArityMismatch("a univariate pmf scores only univariate types")
        d = kl_divergence(q.as_pmf(), p)
        if math.isinf(d):
            return math.inf
        return d + abs(q.entropy() - entropy(p))
    if p.arity != q.arity:
        raise ArityMismatch(f"type arity {q.arity} does not match pmf arity {p.arity}")
    if q.arity == 1:
        qd = {(k,): v for k, v in q.as_pmf().items()}
    else:
        qd = q.as_pmf()
    d = kl_divergence(qd, p)
    if math.isinf(d):
        return math.inf
    hp = p.subset_entropies
    terms = [d]
    for subset in _subsets(q.arity):
        h_q = q.marginal(subset).entropy() if q.arity > 1 else q.entropy()
        terms.append(abs(h_q - hp[subset]))
    return math.fsum(terms)


def is_typical(q: EmpiricalType, p, nu: float) -> bool:
    return typicality_score(q, p) <= nu


class DenseScorer:
    """Vectorized typicality scores for count tensors over a dense alphabet.

    ``p`` is a dense probability array (one axis per coordinate). ``scores``
    takes counts of shape ``(batch, *p.shape)``. With ``n`` given, ``x log x``
    is read from a lookup table over the possible counts.
    """

    def __init__(self, p, n: int | None = None):
        p = np.asarray(p, dtype=float)
        self.shape = p.shape
        self.ndim = p.ndim
        self.zero = (p <= 0).ravel()
        with np.errstate(divide="ignore"):
            self.logp = np.where(self.zero, 0.0, np.log2(np.where(p > 0, p, 1.0)).ravel())
        self.subsets = list(_subsets(self.ndim))
        self.h_p = {}
        for s in self.subsets:
            other = tuple(a for a in range(self.ndim) if a not in s)
            m = p.sum(axis=other) if other else p
            m = m[m > 0]
            self.h_p[s] = max(0.0, -math.fsum((m * np.log2(m)).ravel().tolist()))
        self.n = n
        if n is not None:
            c = np.arange(n + 1) / n
            self._xlogx = np.zeros(n + 1)
            self._xlogx[1:] = c[1:] * np.log2(c[1:])

    def _xlx(self, counts, n):
        if self.n is not None:
            return self._xlogx[counts]
        q = counts / n
        out = np.zeros(q.shape)
        pos = q > 0
        out[pos] = q[pos] * np.log2(q[pos])
        return out

    def scores(self, counts) -> np.ndarray:
        counts = np.asarray(counts)
        batch = counts.shape[0]
        flat = counts.reshape(batch, -1)
        if self.n is not None:
            n = np.full((batch, 1), self.n, dtype=float)
            flat = flat.astype(np.int64)
        else:
            n = flat.sum(axis=1, keepdims=True).astype(float)
        if self.n is None:
            tensor = flat.astype(float)
        else:
            tensor = flat
        xlx = self._xlx(tensor, n)
        h_full = -xlx.sum(axis=1)
        cross = (flat / n) @ self.logp
        d = np.maximum(-h_full - cross, 0.0)
        full = tuple(range(self.ndim))
        total = d + np.abs(h_full - self.h_p[full])
        shaped = flat.reshape(batch, *self.shape)
        for s in self.subsets:
            if s == full:
                continue
            other = tuple(a + 1 for a in range(self.ndim) if a not in s)
            m = shaped.sum(axis=other).reshape(batch, -1)
            h = -self._xlx(m if self.n is not None else m.astype(float), n).sum(axis=1)
            total = total + np.abs(h - self.h_p[s])
        bad = (flat[:, self.zero] > 0).any(axis=1) if self.zero.any() else np.zeros(batch, bool)
        total[bad] = np.inf
        return total


def cell_codes(seqs, alphabets) -> np.ndarray:
    """Flat dense-cell index of each position, ``-1`` for off-alphabet symbols."""
    code = np.zeros(len(seqs[0]), dtype=np.int64)
    off = np.zeros(len(seqs[0]), dtype=bool)
    for seq, alpha in zip(seqs, alphabets):
        alpha_arr = np.asarray(alpha, dtype=np.int64)
        seq = np.asarray(seq, dtype=np.int64)
        pos = np.searchsorted(alpha_arr, seq)
        pos_c = np.minimum(pos, len(alpha_arr) - 1)
        off |= alpha_arr[pos_c] != seq
        code = code * len(alpha_arr) + pos_c
    code[off] = -1
    return code


def batch_counts(codes: np.ndarray, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise cell counts of a ``(batch, n)`` code matrix and an off-alphabet mask."""
    batch = codes.shape[0]
    off = (codes < 0).any(axis=1)
    safe = np.where(codes < 0, 0, codes)
    offset = safe + n_cells * np.arange(batch)[:, None]
    counts = np.bincount(offset.ravel(), minlength=batch * n_cells).reshape(batch, n_cells)
    return counts, off


# --------------------------------------------------------------------------
# Ladder of slacks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TypicalityLadder:
    """Nested slacks nu < nu1 < nu2 < nu3, binning margin delta, rate margin delta'."""

    nu: float
    nu1: float
    nu2: float
    nu3: float
    delta: float
    delta_prime: float = 0.05

    def __post_init__(self):
        if not 0 < self.nu < self.nu1 < self.nu2 < self.nu3:
            raise ValidationError(
                f"ladder must satisfy 0 < nu < nu1 < nu2 < nu3, got "
                f"nu={self.nu}, nu1={self.nu1}, nu2={self.nu2}, nu3={self.nu3}")
        if not self.delta > 1.5 * self.nu1:
            raise ValidationError(
                f"binning margin delta={self.delta} must exceed 1.5 * nu1 = {1.5 * self.nu1}")
        if not self.delta_prime > 0:
            raise ValidationError("rate margin delta_prime must be positive")

    def to_json(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class VerificationReport:
    theorem: str
    n: int
    nu: float
    trials: int
    estimate: float
    ci_low: float
    ci_high: float
    deterministic_violations: int
    successes: int = 0
    conditioned: int = 0
    entropy: float | None = None
    exact_cardinality: int | None = None
    cardinality_lower: float | None = None
    cardinality_upper: float | None = None
    cardinality_within: bool | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


AepReport = VerificationReport


# --------------------------------------------------------------------------
# Exact enumeration over types
# --------------------------------------------------------------------------


def compositions(n: int, k: int) -> np.ndarray:
    """All vectors of ``k`` nonnegative integers summing to ``n``, one per row."""
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    total = math.comb(n + k - 1, k - 1)
    if total > 20_000_000:
        raise ExactTooLarge(f"{total} types of length {n} over {k} cells")
    bars = np.array(list(combinations(range(n + k - 1), k - 1)), dtype=np.int64)
    edges = np.concatenate([np.full((len(bars), 1), -1), bars,
                            np.full((len(bars), 1), n + k - 1)], axis=1)
    return np.diff(edges, axis=1) - 1


def log2_multinomial(n: int, counts: np.ndarray) -> np.ndarray:
    from scipy.special import gammaln
    return (gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)) / math.log(2)


def _multinomial_exact(n: int, row) -> int:
    out = math.factorial(n)
    for c in row:
        out //= math.factorial(int(c))
    return out


def _positive_cells(dense: np.ndarray) -> np.ndarray:
    return np.flatnonzero(dense.ravel() > 0)


def exact_typical_cardinality(dense: np.ndarray, nu: float, n: int) -> int:
    """Number of sequences (over the dense alphabet) with score <= nu, by type enumeration."""
    cells = _positive_cells(dense)
    types = compositions(n, len(cells))
    full = np.zeros((len(types), dense.size), dtype=np.int64)
    full[:, cells] = types
    scores = DenseScorer(dense).scores(full.reshape(len(types), *dense.shape))
    return sum(_multinomial_exact(n, row) for row in types[scores <= nu])


# --------------------------------------------------------------------------
# Verifiers
# --------------------------------------------------------------------------


def _sample_univariate_scores(p: CountablePmf, n: int, trials: int, seed: int, module: str):
    """Per-trial (score, log2 P^n(x^n)) for i.i.d. draws from ``p``."""
    h_p = entropy(p)
    scores = np.empty(trials)
    logprobs = np.empty(trials)
    for t in range(trials):
        x = p.sample(n, derive_rng(seed, module, t))
        syms, counts = np.unique(x, return_counts=True)
        lp = p.logpmf(syms) / math.log(2)
        q = counts / n
        logprobs[t] = math.fsum((counts * lp).tolist())
        h_q = max(0.0, -math.fsum((q * np.log2(q)).tolist()))
        d = max(0.0, math.fsum((q * (np.log2(q) - lp)).tolist()))
        scores[t] = d + abs(h_q - h_p)
    return scores, logprobs, h_p


def _sandwich_violations(logprobs, h, n, nu) -> int:
    slack = SANDWICH_SLACK * n
    lower = -n * (h + nu) - slack
    upper = -n * (h - nu) + slack
    return int(np.count_nonzero((logprobs < lower) | (logprobs > upper)))


def verify_aep(p: CountablePmf, nu: float, n: int, trials: int, seed: int = 0,
               exact_cap: int = EXACT_SEQUENCE_CAP) -> VerificationReport:
    """Sample ``trials`` sequences and check the typical-sequence properties.

    Reports the typical fraction with a Wilson interval, the number of
    typical sequences violating the probability sandwich (always expected to
    be zero), and, when the support is finite and small, the exact size of
    the typical set against its cardinality bounds.
    """
    if trials < 1000:
        raise ValidationError("verify_aep needs at least 1000 trials")
    if not nu > 0 or n < 1:
        raise ValidationError("need nu > 0 and n >= 1")
    scores, logprobs, h = _sample_univariate_scores(p, n, trials, seed, "aep")
    typical = scores <= nu
    k = int(typical.sum())
    lo, hi = wilson_interval(k, trials)
    report = VerificationReport("aep", n, nu, trials, k / trials, lo, hi,
                                _sandwich_violations(logprobs[typical], h, n, nu),
                                successes=k, entropy=h)
    if p.is_finite and len(p.symbols) ** n <= exact_cap:
        probs = np.array([p.prob(s) for s in sorted(p.symbols)])
        _attach_cardinality(report, probs, h, nu, n)
    return report


def _attach_cardinality(report, dense, h, nu, n):
    count = exact_typical_cardinality(np.asarray(dense), nu, n)
    report.exact_cardinality = count
    report.cardinality_lower = (1 - nu) * 2.0 ** (n * (h - nu))
    report.cardinality_upper = 2.0 ** (n * (h + nu))
    report.cardinality_within = report.cardinality_lower <= count <= report.cardinality_upper


def _joint_setup(j: JointPmf):
    dense = j.dense()
    return dense, j.alphabets, DenseScorer(dense)


def verify_jaep(j: JointPmf, nu: float, n: int, trials: int, seed: int = 0,
                exact_cap: int = EXACT_SEQUENCE_CAP, sampler=None) -> VerificationReport:
    """Bivariate counterpart of :func:`verify_aep` using the joint score."""
    if trials < 1000:
        raise ValidationError("verify_jaep needs at least 1000 trials")
    if j.arity != 2:
        raise ArityMismatch("verify_jaep needs a bivariate joint")
    dense, alphabets, scorer = _joint_setup(j)
    h = j.entropy()
    k_done = 0
    typical_count = 0
    violations = 0
    with np.errstate(divide="ignore"):
        logp = np.log2(dense.ravel())
    for start in range(0, trials, 2000):
        stop = min(trials, start + 2000)
        counts, off = _sample_joint_counts_range(j, n, start, stop, seed, "jaep", sampler)
        s = scorer.scores(counts.reshape(len(counts), *dense.shape))
        s[off] = np.inf
        typ = s <= nu
        typical_count += int(typ.sum())
        lp = np.array([math.fsum((row[row > 0] * logp[row > 0]).tolist()) for row in counts[typ]])
        violations += _sandwich_violations(lp, h, n, nu) if len(lp) else 0
        k_done = stop
    lo, hi = wilson_interval(typical_count, k_done)
    report = VerificationReport("jaep", n, nu, trials, typical_count / trials, lo, hi,
                                violations, successes=typical_count, entropy=h)
    if math.prod(len(a) for a in alphabets) ** n <= exact_cap:
        _attach_cardinality(report, dense, h, nu, n)
    return report


def _sample_joint_counts_range(j, n, start, stop, seed, module, sampler=None):
    dense_size = int(np.prod([len(a) for a in j.alphabets]))
    codes = np.empty((stop - start, n), dtype=np.int64)
    for row, t in enumerate(range(start, stop)):
        rng = derive_rng(seed, module, t)
        seqs = sampler(n, rng) if sampler is not None else j.sample(n, rng)
        codes[row] = cell_codes(seqs, j.alphabets)
    return batch_counts(codes, dense_size)


@dataclass
class ConsistencyReport:
    n: int
    nu: float
    checked: int
    jointly_typical: int
    violations: int
    mode: str

    def to_json(self) -> dict:
        return {"theorem": "consistency", **asdict(self)}


def _consistency_from_counts(counts, weights, dense, nu, scorers):
    joint, sx, sy = scorers
    batch = len(counts)
    shaped = counts.reshape(batch, *dense.shape)
    s = joint.scores(shaped)
    typ = s <= nu
    sx_ = sx.scores(shaped.sum(axis=2))
    sy_ = sy.scores(shaped.sum(axis=1))
    bad = typ & ((sx_ > nu) | (sy_ > nu))
    return int((weights * typ).sum()), int((weights * bad).sum())


def verify_consistency(j: JointPmf, nu: float, n: int, trials: int = 10_000, seed: int = 0,
                       mode: str = "montecarlo", sampler=None) -> ConsistencyReport:
    """Count jointly typical pairs whose components are not marginally typical.

    ``mode="exhaustive"`` covers every pair of sequences over the stored
    alphabets through their joint types (each type weighted by its class
    size); ``"montecarlo"`` samples ``trials`` pairs. The count is expected to
    be zero in every case.
    """
    if j.arity != 2:
        raise ArityMismatch("verify_consistency needs a bivariate joint")
    dense = j.dense()
    scorers = (DenseScorer(dense), DenseScorer(dense.sum(axis=1)), DenseScorer(dense.sum(axis=0)))
    if mode == "exhaustive":
        types = compositions(n, dense.size)
        weights = np.array([_multinomial_exact(n, row) for row in types], dtype=object)
        typ, bad = _consistency_from_counts(types, weights, dense, nu, scorers)
        return ConsistencyReport(n, nu, int(dense.size) ** n, typ, bad, mode)
    if mode != "montecarlo":
        raise ValidationError(f"unknown mode {mode!r}")
    total_typ = total_bad = 0
    for start in range(0, trials, 2000):
        stop = min(trials, start + 2000)
        counts, off = _sample_joint_counts_range(j, n, start, stop, seed, "consistency", sampler)
        keep = ~off
        typ, bad = _consistency_from_counts(counts[keep], np.ones(int(keep.sum()), dtype=np.int64),
                                            dense, nu, scorers)
        total_typ += typ
        total_bad += bad
    return ConsistencyReport(n, nu, trials, total_typ, total_bad, mode)


@dataclass
class IndependentPairResult:
    n: int
    nu: float
    nu_prime: float
    mode: str
    probability: float
    mutual_information: float
    lower: float
    upper: float
    lower_ok: bool
    upper_ok: bool
    ci_low: float | None = None
    ci_high: float | None = None

    @property
    def within(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_json(self) -> dict:
        return {"theorem": "lemma1", **asdict(self), "within": self.within}


def independent_pair_probability(j: JointPmf, nu: float, nu_prime: float, n: int,
                                 mode: str = "exact", trials: int = 100_000,
                                 seed: int = 0) -> IndependentPairResult:
    """Probability that independent draws from the marginals look jointly typical.

    The result is checked against
    ``(1-nu) 2^{-n(I + 2nu' + nu)} <= Pr <= 2^{-n(I - 2nu' - nu)}``.
    """
    if j.arity != 2:
        raise ArityMismatch("independent_pair_probability needs a bivariate joint")
    if not 0 < nu_prime < nu:
        raise ValidationError("need 0 < nu_prime < nu")
    dense = j.dense()
    px = dense.sum(axis=1)
    py = dense.sum(axis=0)
    mi = mutual_information(j)
    lower = (1 - nu) * 2.0 ** (-n * (mi + 2 * nu_prime + nu))
    upper = 2.0 ** (-n * (mi - 2 * nu_prime - nu))
    ci_low = ci_high = None
    if mode == "exact":
        size = (dense.shape[0] ** n) * (dense.shape[1] ** n)
        if size > LEMMA1_EXACT_CAP:
            raise ExactTooLarge(f"{size} sequence pairs exceed the exact cap {LEMMA1_EXACT_CAP}")
        cells = _positive_cells(dense)
        types = compositions(n, len(cells))
        full = np.zeros((len(types), dense.size), dtype=np.int64)
        full[:, cells] = types
        shaped = full.reshape(len(types), *dense.shape)
        typ = DenseScorer(dense).scores(shaped) <= nu
        shaped = shaped[typ]
        with np.errstate(divide="ignore"):
            lx, ly = np.log2(px), np.log2(py)
        nx = shaped.sum(axis=2)
        ny = shaped.sum(axis=1)
        logw = (log2_multinomial(n, shaped.reshape(len(shaped), dense.size))
                + (nx * lx).sum(axis=1) + (ny * ly).sum(axis=1))
        prob = math.fsum(np.exp2(logw).tolist())
    elif mode == "montecarlo":
        scorer = DenseScorer(dense)
        hits = 0
        cx, cy = np.cumsum(px), np.cumsum(py)
        for start in range(0, trials, 5000):
            stop = min(trials, start + 5000)
            counts = np.empty((stop - start, dense.size), dtype=np.int64)
            for row, t in enumerate(range(start, stop)):
                rng = derive_rng(seed, "lemma1", t)
                xi = np.minimum(np.searchsorted(cx, rng.random(n) * cx[-1], side="right"), len(px) - 1)
                yi = np.minimum(np.searchsorted(cy, rng.random(n) * cy[-1], side="right"), len(py) - 1)
                counts[row] = np.bincount(xi * len(py) + yi, minlength=dense.size)
            hits += int((scorer.scores(counts.reshape(len(counts), *dense.shape)) <= nu).sum())
        prob = hits / trials
        ci_low, ci_high = wilson_interval(hits, trials)
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return IndependentPairResult(n, nu, nu_prime, mode, prob, mi, lower, upper,
                                 lower <= prob, prob <= upper, ci_low, ci_high)


def check_markov(tri: JointPmf, tol: float = 1e-9) -> float:
    """Largest deviation of ``P(u,x,y) P(x)`` from ``P(u,x) P(x,y)``; raises NotMarkov above tol."""
    if tri.arity != 3:
        raise ArityMismatch("Markov check needs a (U, X, Y) joint")
    d = tri.dense()
    p_x = d.sum(axis=(0, 2))
    p_ux = d.sum(axis=2)
    p_xy = d.sum(axis=0)
    gap = float(np.max(np.abs(d * p_x[None, :, None] - p_ux[:, :, None] * p_xy[None, :, :])))
    if gap > tol:
        raise NotMarkov(f"joint does not factor as P(u|x) P(x,y): deviation {gap:.3g}")
    return gap


def verify_markov_lemma(tri: JointPmf, nu: float, n: int, trials: int, seed: int = 0,
                        sampler=None) -> VerificationReport:
    """Rate of trivariate typicality when U^n is drawn through P(u|x) from a typical pair.

    ``tri`` has coordinates (U, X, Y) and must satisfy U - X - Y. Only draws
    whose (x^n, y^n) is nu-typical are kept; the estimate is the fraction of
    those for which (U^n, x^n, y^n) is nu-typical.
    """
    check_markov(tri)
    from .dist import conditional_log2_second_moment
    _, c_moment = conditional_log2_second_moment(tri.marginal((1, 0)), given=0)
    dense = tri.dense()
    nu_, nx, ny = dense.shape
    p_xy = dense.sum(axis=0)
    p_x = p_xy.sum(axis=1)
    cond = np.where(p_x[None, :] > 0, dense.sum(axis=2) / np.where(p_x > 0, p_x, 1.0)[None, :], 0.0)
    cdf = np.cumsum(cond.T, axis=1)                       # (|X|, |U|)
    pair_joint = JointPmf.from_dense(p_xy, tri.alphabets[1:])
    pair_scorer = DenseScorer(p_xy)
    tri_scorer = DenseScorer(dense)
    conditioned = hits = 0
    pair_alpha = tri.alphabets[1:]
    for start in range(0, trials, 1000):
        stop = min(trials, start + 1000)
        codes = np.empty((stop - start, n), dtype=np.int64)
        u_idx = np.empty((stop - start, n), dtype=np.int64)
        for row, t in enumerate(range(start, stop)):
            rng = derive_rng(seed, "markov", t)
            seqs = sampler(n, rng) if sampler is not None else pair_joint.sample(n, rng)
            c = cell_codes(seqs, pair_alpha)
            codes[row] = c
            xi = np.where(c >= 0, c // ny, 0)
            draws = rng.random(n)
            u_idx[row] = np.minimum((draws[:, None] >= cdf[xi]).sum(axis=1), nu_ - 1)
        counts, off = batch_counts(codes, nx * ny)
        s = pair_scorer.scores(counts.reshape(len(counts), nx, ny))
        s[off] = np.inf
        typ = s <= nu
        conditioned += int(typ.sum())
        if typ.any():
            tri_codes = u_idx[typ] * (nx * ny) + codes[typ]
            tcounts, _ = batch_counts(tri_codes, dense.size)
            ts = tri_scorer.scores(tcounts.reshape(len(tcounts), *dense.shape))
            hits += int((ts <= nu).sum())
    lo, hi = wilson_interval(hits, conditioned)
    est = hits / conditioned if conditioned else float("nan")
    return VerificationReport("markov", n, nu, trials, est, lo, hi, 0, successes=hits,
                              conditioned=conditioned, entropy=tri.entropy(),
                              extra={"conditional_log2_moment_bound": c_moment})
