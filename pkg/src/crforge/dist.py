"""Probability mass functions on finite and countably infinite alphabets.

Symbols are opaque integer ids. Parametric families use the supports

    Geometric(p):  k = 1, 2, ...    P(k) = p (1-p)^(k-1)
    Poisson(lam):  k = 0, 1, ...    P(k) = e^-lam lam^k / k!
    Zeta(s):       k = 1, 2, ...    P(k) = k^-s / zeta(s),  s > 1

Series over an infinite support (entropy, second log-moment) are summed
until a certified tail bound drops below ``tail_epsilon``. Geometric and
Poisson tails are bounded by a ratio test on the summands; the Zeta tail is
bracketed by integrals of the (eventually decreasing) summand.

All logarithms are base 2 and ``0 log 0 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import special

from .errors import ArityMismatch, TailNotConvergent, ValidationError

LN2 = math.log(2.0)
PROB_TOL = 1e-12
FAMILIES = ("geometric", "poisson", "zeta")

_BLOCK = 512
_MAX_SERIES_TERMS = 1 << 22
_ZETA_EXPLICIT_TERMS = 1 << 20
_MAX_SEARCH_STEPS = 4096


def as_rng(seed) -> np.random.Generator:
    """Return a Generator for ``seed`` (int, sequence of ints, or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def xlog2x(p):
    """Elementwise ``p log2 p`` with the convention ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def _entropy_of_probs(probs) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return max(0.0, -math.fsum((p * np.log2(p)).tolist()))


# --------------------------------------------------------------------------
# Univariate
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CountablePmf:
    """A pmf on integer symbols, either an explicit table or a closed form.

    Use the constructors :meth:`table`, :meth:`uniform`, :meth:`point`,
    :meth:`geometric`, :meth:`poisson` and :meth:`zeta` rather than the
    raw dataclass fields.
    """

    kind: str
    symbols: tuple = ()
    probs: tuple = ()
    param: float = 0.0
    tail_epsilon: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.tail_epsilon < 1.0:
            raise ValidationError("tail_epsilon must lie in (0, 1)")
        if self.kind == "table":
            if len(self.symbols) != len(self.probs) or not self.symbols:
                raise ValidationError("table needs equally many symbols and probabilities")
            if len(set(self.symbols)) != len(self.symbols):
                raise ValidationError("table symbols must be distinct")
            if any(p < 0 or not math.isfinite(p) for p in self.probs):
                raise ValidationError("table probabilities must be finite and nonnegative")
            total = math.fsum(self.probs)
            if abs(total - 1.0) > PROB_TOL:
                raise ValidationError(f"table probabilities sum to {total!r}, not 1")
        elif self.kind == "geometric":
            if not 0.0 < self.param <= 1.0:
                raise ValidationError("geometric parameter must lie in (0, 1]")
        elif self.kind == "poisson":
            if not 0.0 < self.param < 700.0:
                raise ValidationError("poisson rate must lie in (0, 700)")
        elif self.kind == "zeta":
            if not self.param > 1.0:
                raise ValidationError("zeta exponent must exceed 1")
        else:
            raise ValidationError(f"unknown pmf kind {self.kind!r}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def table(cls, symbols: Sequence[int], probs: Sequence[float], tail_epsilon=1e-12):
        return cls("table", tuple(int(s) for s in symbols), tuple(float(p) for p in probs),
                   tail_epsilon=tail_epsilon)

    @classmethod
    def from_dict(cls, mapping: Mapping[int, float], tail_epsilon=1e-12):
        keys = sorted(mapping)
        return cls.table(keys, [mapping[k] for k in keys], tail_epsilon)

    @classmethod
    def uniform(cls, k: int, start: int = 0):
        return cls.table(range(start, start + k), [1.0 / k] * k)

    @classmethod
    def point(cls, symbol: int = 0):
        return cls.table([symbol], [1.0])

    @classmethod
    def geometric(cls, p: float, tail_epsilon=1e-12):
        return cls("geometric", param=float(p), tail_epsilon=tail_epsilon)

    @classmethod
    def poisson(cls, lam: float, tail_epsilon=1e-12):
        return cls("poisson", param=float(lam), tail_epsilon=tail_epsilon)

    @classmethod
    def zeta(cls, s: float, tail_epsilon=1e-12):
        return cls("zeta", param=float(s), tail_epsilon=tail_epsilon)

    def with_tail_epsilon(self, eps: float) -> "CountablePmf":
        return CountablePmf(self.kind, self.symbols, self.probs, self.param, eps)

    # -- evaluation --------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.kind == "table"

    @property
    def first_symbol(self) -> int:
        return {"poisson": 0}.get(self.kind, 1) if not self.is_finite else min(self.symbols)

    @cached_property
    def _lookup(self) -> dict:
        return dict(zip(self.symbols, self.probs))

    @cached_property
    def _zeta_norm(self) -> float:
        return float(special.zeta(self.param, 1))

    def logpmf(self, k) -> np.ndarray:
        """Natural-log pmf, ``-inf`` outside the support."""
        k = np.asarray(k)
        if self.kind == "table":
            flat = np.array([self._lookup.get(int(v), 0.0) for v in k.ravel()], dtype=float)
            with np.errstate(divide="ignore"):
                return np.log(flat).reshape(k.shape)
        kf = k.astype(float)
        out = np.full(k.shape, -np.inf)
        if self.kind == "geometric":
            ok = k >= 1
            p = self.param
            if p == 1.0:
                out[k == 1] = 0.0
            else:
                out[ok] = math.log(p) + (kf[ok] - 1.0) * math.log1p(-p)
        elif self.kind == "poisson":
            ok = k >= 0
            lam = self.param
            out[ok] = kf[ok] * math.log(lam) - lam - special.gammaln(kf[ok] + 1.0)
        else:
            ok = k >= 1
            out[ok] = -self.param * np.log(kf[ok]) - math.log(self._zeta_norm)
        return out

    def pmf(self, k) -> np.ndarray:
        return np.exp(self.logpmf(k))

    def prob(self, k: int) -> float:
        if self.kind == "table":
            return self._lookup.get(int(k), 0.0)
        return float(self.pmf(np.array([k]))[0])

    def tail_mass(self, m: int) -> float:
        """Probability of the symbols after the first ``m`` support points."""
        if self.kind == "table":
            ordered = sorted(self.symbols)
            return math.fsum(self._lookup[s] for s in ordered[m:])
        if self.kind == "geometric":
            return (1.0 - self.param) ** m
        if self.kind == "poisson":
            return float(special.pdtrc(m - 1, self.param)) if m > 0 else 1.0
        return float(special.zeta(self.param, m + 1)) / self._zeta_norm

    @cached_property
    def truncation_index(self) -> int:
        """Smallest m whose first m support points carry mass >= 1 - tail_epsilon."""
        eps = self.tail_epsilon
        if self.kind == "table":
            ordered = sorted(self.symbols)
            acc = 0.0
            for i, s in enumerate(ordered, 1):
                acc += self._lookup[s]
                if acc >= 1.0 - eps:
                    return i
            return len(ordered)
        if self.kind == "geometric" and self.param == 1.0:
            return 1
        lo, hi = 0, 1
        steps = 0
        while self.tail_mass(hi) > eps:
            lo, hi = hi, hi * 2
            steps += 1
            if steps > _MAX_SEARCH_STEPS or (self.kind == "zeta" and hi > 1e300):
                raise TailNotConvergent(
                    f"{self.kind}({self.param}) tail mass stays above {eps} beyond {hi} symbols")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.tail_mass(mid) > eps:
                lo = mid
            else:
                hi = mid
        return hi

    def support_prefix(self, m: int | None = None) -> np.ndarray:
        """The first ``m`` support symbols (default: up to the truncation index)."""
        if self.kind == "table":
            return np.array(sorted(self.symbols), dtype=np.int64)
        m = self.truncation_index if m is None else m
        return np.arange(self.first_symbol, self.first_symbol + m, dtype=np.int64)

    def truncate(self, max_symbols: int = 1 << 16):
        """Return ``(symbols, probs, loss)`` for the support up to the truncation index."""
        m = self.truncation_index
        if m > max_symbols:
            raise TailNotConvergent(
                f"truncation needs {m} symbols, above the cap of {max_symbols}; "
                "use a coarser tail_epsilon")
        syms = self.support_prefix(m)
        probs = self.pmf(syms)
        loss = max(0.0, 1.0 - math.fsum(probs.tolist()))
        return syms, probs, loss

    # -- sampling ----------------------------------------------------------

    def sample(self, n: int, seed=None) -> np.ndarray:
        """Draw ``n`` i.i.d. symbols from the untruncated distribution."""
        if n < 1:
            raise ValidationError("sample length must be at least 1")
        rng = as_rng(seed)
        if self.kind == "table":
            syms = np.array(self.symbols, dtype=np.int64)
            cdf = np.cumsum(self.probs)
            idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
            return syms[np.minimum(idx, len(syms) - 1)]
        if self.kind == "geometric":
            return rng.geometric(self.param, size=n).astype(np.int64)
        if self.kind == "poisson":
            return rng.poisson(self.param, size=n).astype(np.int64)
        return rng.zipf(self.param, size=n).astype(np.int64)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        if self.kind == "table":
            body = {"table": {"symbols": list(self.symbols), "probs": list(self.probs)}}
        else:
            name = {"geometric": "p", "poisson": "lam", "zeta": "s"}[self.kind]
            body = {"params": {name: self.param}}
        return {"kind": self.kind, **body, "tail_epsilon": self.tail_epsilon}

    @classmethod
    def from_json(cls, doc: Mapping) -> "CountablePmf":
        kind = doc["kind"]
        eps = float(doc.get("tail_epsilon", 1e-12))
        if kind == "table":
            t = doc.get("table", doc)
            return cls("table", tuple(int(s) for s in t["symbols"]),
                       tuple(float(p) for p in t["probs"]), tail_epsilon=eps)
        # parameters may sit under "params" or flat beside "kind"
        params = doc.get("params") or {k: v for k, v in doc.items()
                                       if k not in ("kind", "tail_epsilon")}
        if kind == "uniform":
            return cls.uniform(int(params["k"]), int(params.get("start", 0)))
        if kind not in FAMILIES:
            raise ValidationError(f"unknown pmf kind {kind!r}")
        if len(params) != 1:
            raise ValidationError(f"{kind} pmf takes exactly one parameter, got {sorted(params)}")
        (value,) = params.values()
        return cls(kind, param=float(value), tail_epsilon=eps)


# --------------------------------------------------------------------------
# Series with certified tails
# --------------------------------------------------------------------------


def _series(p: CountablePmf, power: int) -> tuple[float, float]:
    """``E[(-log2 P(X))**power]`` and a bound on the summation error."""
    if p.kind == "table":
        probs = np.array([q for q in p.probs if q > 0])
        terms = probs * (-np.log2(probs)) ** power
        value = math.fsum(terms.tolist())
        return value, float(8 * np.finfo(float).eps * abs(value))
    if p.kind == "geometric" and p.param == 1.0:
        return 0.0, 0.0
    if p.kind == "zeta":
        return _zeta_series(p, power)
    return _ratio_series(p, power)


def _ratio_series(p: CountablePmf, power: int) -> tuple[float, float]:
    eps = p.tail_epsilon
    k0 = p.first_symbol
    partials = []
    while k0 - p.first_symbol < _MAX_SERIES_TERMS:
        ks = np.arange(k0, k0 + _BLOCK)
        lp = p.logpmf(ks)
        terms = np.exp(lp) * (-lp / LN2) ** power
        partials.append(math.fsum(terms.tolist()))
        k0 += _BLOCK
        last = terms[-17:]
        if last[-1] == 0.0:
            value = math.fsum(partials)
            return value, float(8 * np.finfo(float).eps * abs(value))
        if np.any(last <= 0):
            continue
        ratios = last[1:] / last[:-1]
        decreasing = np.all(np.diff(ratios) <= 1e-15)
        r = ratios[-1]
        if decreasing and r < 1.0:
            tail = last[-1] * r / (1.0 - r)
            if tail <= eps and p.tail_mass(k0 - p.first_symbol) <= eps:
                value = math.fsum(partials)
                return value, float(tail + 8 * np.finfo(float).eps * abs(value))
    raise TailNotConvergent(f"{p.kind}({p.param}) series failed the ratio test "
                            f"within {_MAX_SERIES_TERMS} terms")


def _zeta_series(p: CountablePmf, power: int) -> tuple[float, float]:
    s = p.param
    z = p._zeta_norm
    a = s / LN2                       # -log2 P(k) = a ln k + c
    c = math.log2(z)
    try:
        m = min(p.truncation_index, _ZETA_EXPLICIT_TERMS)
    except TailNotConvergent:
        m = _ZETA_EXPLICIT_TERMS
    m = max(m, 3)
    partials = []
    for k0 in range(1, m + 1, 1 << 16):
        ks = np.arange(k0, min(k0 + (1 << 16), m + 1), dtype=float)
        lp = -s * np.log(ks) - math.log(z)
        partials.append(math.fsum((np.exp(lp) * (-lp / LN2) ** power).tolist()))
    head = math.fsum(partials)

    def tail_integral(start: float) -> float:
        # int_start^inf x^-s (a ln x + c)^power dx / z, expanded in powers of ln x
        t = (s - 1.0) * math.log(start)
        acc = 0.0
        for i in range(power + 1):
            coef = math.comb(power, i) * a ** i * c ** (power - i)
            moment = special.gammaincc(i + 1, t) * math.gamma(i + 1) / (s - 1.0) ** (i + 1)
            acc += coef * moment
        return acc / z

    # sum_{k>m} f(k) lies in [int_{m+1}^inf f, int_m^inf f]; report the lower end
    # so that refining m only ever moves the value up, by at most the error
    upper = tail_integral(float(m))
    lower = tail_integral(float(m + 1))
    value = head + lower
    err = (upper - lower) + 8 * np.finfo(float).eps * m * abs(value)
    return float(value), float(err)


def entropy(p, return_error: bool = False):
    """Shannon entropy in bits.

    ``p`` may be a :class:`CountablePmf` or a :class:`JointPmf` (entropy of the
    stored support). With ``return_error`` the certified summation error is
    returned alongside the value.
    """
    if isinstance(p, JointPmf):
        value, err = p.entropy(), 0.0
    else:
        value, err = _series(p, 1)
    return (value, err) if return_error else value


def log2_second_moment(p: CountablePmf) -> float:
    """``E[log2^2 P(X)]``; finite for every supported family."""
    value, _ = _series(p, 2)
    return value


def is_admissible(p: CountablePmf) -> bool:
    """True when the second log-moment of ``p`` is certified finite."""
    try:
        return math.isfinite(log2_second_moment(p))
    except TailNotConvergent:
        return False


def kl_divergence(q, p) -> float:
    """``D(q || p)`` in bits; ``+inf`` when q puts mass where p has none.

    ``q`` must have finite support (a table or a dict ``symbol -> prob``).
    """
    if isinstance(q, CountablePmf):
        if not q.is_finite:
            raise ValidationError("kl_divergence needs a finitely supported first argument")
        items = list(zip(q.symbols, q.probs))
    else:
        items = list(q.items())
    prob = p.prob if isinstance(p, (CountablePmf, JointPmf)) else (lambda s: p.get(s, 0.0))
    terms = []
    for sym, qv in items:
        if qv <= 0:
            continue
        pv = prob(sym)
        if pv <= 0:
            return math.inf
        terms.append(qv * math.log2(qv / pv))
    return max(0.0, math.fsum(terms))


# --------------------------------------------------------------------------
# Joint distributions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JointPmf:
    """An explicit (possibly truncated) joint pmf over integer tuples.

    ``truncation_loss`` is the true mass outside the stored support; the
    stored probabilities plus the loss sum to one.
    """

    symbols: tuple
    probs: tuple
    truncation_loss: float = 0.0
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        syms = tuple(tuple(int(v) for v in s) for s in self.symbols)
        probs = tuple(float(p) for p in self.probs)
        if not syms or len(syms) != len(probs):
            raise ValidationError("joint needs equally many symbol tuples and probabilities")
        arity = len(syms[0])
        if arity < 1 or any(len(s) != arity for s in syms):
            raise ArityMismatch("all symbol tuples must have the same length")
        if len(set(syms)) != len(syms):
            raise ValidationError("joint symbol tuples must be distinct")
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise ValidationError("joint probabilities must be finite and nonnegative")
        total = math.fsum(probs) + self.truncation_loss
        if self.truncation_loss < 0 or abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"joint mass plus truncation loss is {total!r}, not 1")
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_lookup", dict(zip(syms, probs)))

    @classmethod
    def from_dict(cls, mapping: Mapping[tuple, float], truncation_loss: float = 0.0):
        keys = sorted(mapping)
        return cls(tuple(keys), tuple(mapping[k] for k in keys), truncation_loss)

    @classmethod
    def from_dense(cls, array, alphabets: Sequence[Sequence[int]] | None = None,
                   truncation_loss: float = 0.0, keep_zeros: bool = False):
        array = np.asarray(array, dtype=float)
        if alphabets is None:
            alphabets = [range(d) for d in array.shape]
        alphabets = [list(a) for a in alphabets]
        mapping = {}
        for idx in np.ndindex(array.shape):
            v = float(array[idx])
            if v > 0 or keep_zeros:
                mapping[tuple(alphabets[d][i] for d, i in enumerate(idx))] = v
        return cls.from_dict(mapping, truncation_loss)

    @classmethod
    def product(cls, *marginals: CountablePmf, max_symbols: int = 1 << 12):
        """Independent joint of the given marginals (truncated if infinite)."""
        parts = [m.truncate(max_symbols) for m in marginals]
        dense = parts[0][1]
        for _, probs, _ in parts[1:]:
            dense = np.multiply.outer(dense, probs)
        loss = max(0.0, 1.0 - float(np.sum(dense)))
        return cls.from_dense(dense, [s.tolist() for s, _, _ in parts], loss)

    @property
    def arity(self) -> int:
        return len(self.symbols[0])

    def prob(self, sym) -> float:
        if not isinstance(sym, tuple):
            sym = (sym,)
        return self._lookup.get(tuple(int(v) for v in sym), 0.0)

    @cached_property
    def alphabets(self) -> tuple:
        return tuple(tuple(sorted({s[d] for s in self.symbols})) for d in range(self.arity))

    def dense(self) -> np.ndarray:
        """Dense array indexed by positions within :attr:`alphabets`."""
        index = [{a: i for i, a in enumerate(alpha)} for alpha in self.alphabets]
        out = np.zeros([len(a) for a in self.alphabets])
        for sym, p in zip(self.symbols, self.probs):
            out[tuple(index[d][v] for d, v in enumerate(sym))] += p
        return out

    def marginal(self, coords: Iterable[int]) -> "JointPmf":
        coords = tuple(coords)
        if not coords or any(not 0 <= c < self.arity for c in coords):
            raise ArityMismatch(f"bad marginal coordinates {coords} for arity {self.arity}")
        acc: dict = {}
        for sym, p in zip(self.symbols, self.probs):
            key = tuple(sym[c] for c in coords)
            acc.setdefault(key, []).append(p)
        return JointPmf.from_dict({k: math.fsum(v) for k, v in acc.items()}, self.truncation_loss)

    def marginal_pmf(self, coord: int) -> CountablePmf:
        m = self.marginal((coord,))
        total = math.fsum(m.probs)
        return CountablePmf.table([s[0] for s in m.symbols], [p / total for p in m.probs])

    def renormalized(self) -> "JointPmf":
        """Stored support rescaled to total mass one (drops the loss)."""
        total = math.fsum(self.probs)
        return JointPmf(self.symbols, tuple(p / total for p in self.probs), 0.0)

    def permuted(self, order: Sequence[int]) -> "JointPmf":
        order = tuple(order)
        return JointPmf.from_dict(
            {tuple(s[c] for c in order): p for s, p in zip(self.symbols, self.probs)},
            self.truncation_loss)

    def entropy(self) -> float:
        return _entropy_of_probs(self.probs)

    @cached_property
    def subset_entropies(self) -> dict:
        """Entropy of every nonempty coordinate subset, keyed by sorted tuple."""
        out = {}
        for r in range(1, self.arity + 1):
            for subset in combinations(range(self.arity), r):
                out[subset] = self.marginal(subset).entropy()
        return out

    def conditional(self, given: int) -> dict:
        """``{x: {rest: P(rest | x)}}`` conditioning on coordinate ``given``."""
        marg = self.marginal((given,))
        px = {s[0]: p for s, p in zip(marg.symbols, marg.probs)}
        out: dict = {}
        for sym, p in zip(self.symbols, self.probs):
            x = sym[given]
            if px[x] <= 0:
                continue
            rest = tuple(v for d, v in enumerate(sym) if d != given)
            out.setdefault(x, {})[rest if len(rest) > 1 else rest[0]] = p / px[x]
        return out

    def sample(self, n: int, seed=None) -> tuple:
        """``n`` i.i.d. draws, returned as one integer array per coordinate."""
        if n < 1:
            raise ValidationError("sample length must be at least 1")
        rng = as_rng(seed)
        table = np.array(self.symbols, dtype=np.int64)
        cdf = np.cumsum(self.probs)
        idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
        rows = table[np.minimum(idx, len(table) - 1)]
        return tuple(rows[:, d].copy() for d in range(self.arity))

    def to_json(self) -> dict:
        return {"kind": "joint",
                "table": {"symbols": [list(s) for s in self.symbols], "probs": list(self.probs)},
                "truncation_loss": self.truncation_loss}

    @classmethod
    def from_json(cls, doc: Mapping) -> "JointPmf":
        if doc.get("kind", "joint") != "joint":
            raise ValidationError(f"expected a joint document, got kind {doc.get('kind')!r}")
        t = doc["table"]
        return cls(tuple(tuple(s) for s in t["symbols"]), tuple(t["probs"]),
                   float(doc.get("truncation_loss", 0.0)))


def mutual_information(j: JointPmf) -> float:
    """``I = H(first) + H(second) - H(joint)`` on the stored support, in bits."""
    if j.arity != 2:
        raise ArityMismatch(f"mutual information needs a bivariate joint, got arity {j.arity}")
    h = j.subset_entropies
    mi = h[(0,)] + h[(1,)] - h[(0, 1)]
    return max(0.0, mi)


def conditional_log2_second_moment(j: JointPmf, given: int = 0) -> tuple[dict, float]:
    """Per-symbol ``sum_u P(u|x) log2^2 P(u|x)`` and its maximum over x.

    The maximum is the constant bounding the conditional second log-moment.
    On an explicit joint every entry is finite.
    """
    if j.arity != 2:
        raise ArityMismatch("conditional moment needs a bivariate joint")
    per = {}
    for x, cond in j.conditional(given).items():
        probs = np.array([p for p in cond.values() if p > 0])
        per[x] = math.fsum((probs * np.log2(probs) ** 2).tolist())
    return per, max(per.values())


def sample(dist, n: int, seed=None):
    """Draw ``n`` i.i.d. samples from a :class:`CountablePmf` or :class:`JointPmf`."""
    return dist.sample(n, seed)


# --------------------------------------------------------------------------
# Auxiliary channels P(u|x)
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AuxChannel:
    """A conditional pmf ``P(u|x)``: rows indexed by ``x_symbols``."""

    x_symbols: tuple
    u_symbols: tuple
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (len(self.x_symbols), len(self.u_symbols)):
            raise ValidationError("aux channel matrix shape does not match its alphabets")
        if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
            raise ValidationError("aux channel rows must be probability vectors")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "x_symbols", tuple(int(x) for x in self.x_symbols))
        object.__setattr__(self, "u_symbols", tuple(int(u) for u in self.u_symbols))

    @classmethod
    def copy(cls, x_symbols: Sequence[int]):
        """U = X."""
        k = len(x_symbols)
        return cls(tuple(x_symbols), tuple(x_symbols), np.eye(k))

    @classmethod
    def constant(cls, x_symbols: Sequence[int], u_symbol: int = 0):
        return cls(tuple(x_symbols), (u_symbol,), np.ones((len(x_symbols), 1)))

    @classmethod
    def binary_symmetric(cls, p: float):
        return cls((0, 1), (0, 1), np.array([[1 - p, p], [p, 1 - p]]))

    def row(self, x: int) -> np.ndarray:
        return self.matrix[self.x_symbols.index(int(x))]

    def compose(self, p_xy: JointPmf) -> JointPmf:
        """Trivariate ``P(u,x,y) = P(u|x) P(x,y)`` with coordinates (U, X, Y)."""
        if p_xy.arity != 2:
            raise ArityMismatch("compose needs a bivariate source joint")
        xi = {x: i for i, x in enumerate(self.x_symbols)}
        mapping = {}
        for (x, y), p in zip(p_xy.symbols, p_xy.probs):
            if x not in xi:
                if p > 0:
                    raise ValidationError(f"aux channel has no row for source symbol {x}")
                continue
            for u, w in zip(self.u_symbols, self.matrix[xi[x]]):
                if w > 0 and p > 0:
                    mapping[(u, x, y)] = mapping.get((u, x, y), 0.0) + w * p
        return JointPmf.from_dict(mapping, p_xy.truncation_loss)

    def to_json(self) -> dict:
        return {"kind": "matrix", "x_symbols": list(self.x_symbols),
                "u_symbols": list(self.u_symbols), "rows": self.matrix.tolist()}


# --------------------------------------------------------------------------
# Correlated source families
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ResampleCoupling:
    """``Y = X`` with probability ``rho``, otherwise an independent redraw.

    Gives ``P(x,y) = P(x) (rho 1[x=y] + (1-rho) P(y))`` with both marginals
    equal to ``base``. This coupling is a construction of this library used
    to build countable-alphabet test sources.
    """

    base: CountablePmf
    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValidationError("agreement probability rho must lie in [0, 1]")

    def joint(self, max_symbols: int = 1 << 11) -> JointPmf:
        syms, probs, _ = self.base.truncate(max_symbols)
        dense = (1.0 - self.rho) * np.outer(probs, probs) + self.rho * np.diag(probs)
        loss = max(0.0, 1.0 - math.fsum(dense.ravel().tolist()))
        return JointPmf.from_dense(dense, [syms.tolist(), syms.tolist()], loss)

    def marginals(self) -> tuple:
        return self.base, self.base

    def sample(self, n: int, seed=None) -> tuple:
        rng = as_rng(seed)
        x = self.base.sample(n, rng)
        keep = rng.random(n) < self.rho
        fresh = self.base.sample(n, rng)
        return x, np.where(keep, x, fresh)

    def to_json(self) -> dict:
        return {"kind": "resample", "base": self.base.to_json(), "rho": self.rho}


@dataclass(frozen=True)
class DoublySymmetricBinary:
    """Uniform binary X and Y = X xor Bernoulli(p)."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError("crossover must lie in [0, 1]")

    def joint(self, max_symbols: int = 0) -> JointPmf:
        p = self.p
        return JointPmf.from_dense([[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]])

    def marginals(self) -> tuple:
        return CountablePmf.uniform(2), CountablePmf.uniform(2)

    def sample(self, n: int, seed=None) -> tuple:
        rng = as_rng(seed)
        x = rng.integers(0, 2, size=n, dtype=np.int64)
        flip = rng.random(n) < self.p
        return x, x ^ flip.astype(np.int64)

    def to_json(self) -> dict:
        return {"kind": "dsbs", "p": self.p}


@dataclass(frozen=True)
class ExplicitJoint:
    table: JointPmf

    def __post_init__(self):
        if self.table.arity != 2:
            raise ArityMismatch("a correlated source needs a bivariate joint")

    def joint(self, max_symbols: int = 0) -> JointPmf:
        return self.table

    def marginals(self) -> tuple:
        return self.table.marginal_pmf(0), self.table.marginal_pmf(1)

    def sample(self, n: int, seed=None) -> tuple:
        return self.table.sample(n, seed)

    def to_json(self) -> dict:
        return {"kind": "explicit", "joint": self.table.to_json()}


def source_from_json(doc: Mapping):
    kind = doc["kind"]
    if kind == "dsbs":
        return DoublySymmetricBinary(float(doc["p"]))
    if kind == "resample":
        return ResampleCoupling(CountablePmf.from_json(doc["base"]), float(doc["rho"]))
    if kind == "explicit":
        return ExplicitJoint(JointPmf.from_json(doc["joint"]))
    if kind == "perfect":
        k = int(doc.get("k", 2))
        return ResampleCoupling(CountablePmf.uniform(k), 1.0)
    raise ValidationError(f"unknown source kind {kind!r}")


def source_is_admissible(source) -> bool:
    """Both marginals have a finite second log-moment."""
    return all(is_admissible(m) for m in source.marginals())
