"""Discrete memoryless channels, their capacity, and the index link.

Capacity is computed by Blahut-Arimoto. At every iterate ``r`` the pair

    lower = I(r, W)    upper = max_t D(W(.|t) || rW)

brackets C(W); iteration stops once ``upper - lower <= tol`` and returns
``lower``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import NonStochasticMatrix, RateConditionViolated, ValidationError
from .rng import derive_rng

DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Dmc:
    """Transition matrix ``W[t, z] = W(z | t)`` with labelled alphabets."""

    transition: np.ndarray
    inputs: tuple = ()
    outputs: tuple = ()

    def __post_init__(self):
        w = np.array(self.transition, dtype=float)
        if w.ndim != 2 or w.size == 0:
            raise NonStochasticMatrix("transition must be a non-empty matrix")
        if np.any(w < 0) or np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-12):
            raise NonStochasticMatrix("every row of the transition matrix must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "transition", w)
        if not self.inputs:
            object.__setattr__(self, "inputs", tuple(range(w.shape[0])))
        if not self.outputs:
            object.__setattr__(self, "outputs", tuple(range(w.shape[1])))
        if (len(self.inputs), len(self.outputs)) != w.shape:
            raise ValidationError("alphabet sizes do not match the transition matrix")

    @classmethod
    def bsc(cls, p: float) -> "Dmc":
        return cls(np.array([[1 - p, p], [p, 1 - p]]))

    @classmethod
    def bec(cls, e: float) -> "Dmc":
        return cls(np.array([[1 - e, e, 0.0], [0.0, e, 1 - e]]), (0, 1), (0, 2, 1))

    @classmethod
    def noiseless(cls, size: int = 2) -> "Dmc":
        return cls(np.eye(size))

    @property
    def capacity(self) -> float:
        return self._capacity

    @cached_property
    def _capacity(self) -> float:
        return shannon_capacity(self, DEFAULT_TOL)

    def to_json(self) -> dict:
        return {"inputs": list(self.inputs), "outputs": list(self.outputs),
                "rows": self.transition.tolist()}

    @classmethod
    def from_json(cls, doc: Mapping) -> "Dmc":
        kind = doc.get("kind")
        if kind == "bsc":
            return cls.bsc(float(doc["p"]))
        if kind == "bec":
            return cls.bec(float(doc["e"]))
        if kind == "noiseless":
            return cls.noiseless(int(doc.get("size", 2)))
        return cls(np.array(doc["rows"], dtype=float), tuple(doc["inputs"]), tuple(doc["outputs"]))


def _divergences(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``D(W(.|t) || q)`` in bits for every input t."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log2(w / q[None, :]), 0.0)
    return terms.sum(axis=1)


@dataclass
class CapacityTrace:
    value: float
    input_distribution: np.ndarray
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.lower)


def blahut_arimoto(w: Dmc | np.ndarray, tol: float = DEFAULT_TOL,
                   max_iter: int = 100_000) -> CapacityTrace:
    """Blahut-Arimoto from the uniform input, recording the bracket per iteration."""
    if not tol > 0:
        raise ValidationError("tol must be positive")
    mat = w.transition if isinstance(w, Dmc) else Dmc(w).transition
    r = np.full(mat.shape[0], 1.0 / mat.shape[0])
    trace = CapacityTrace(0.0, r)
    for _ in range(max_iter):
        q = r @ mat
        d = _divergences(mat, q)
        lower = max(0.0, float(r @ d))
        upper = float(d.max())
        trace.lower.append(lower)
        trace.upper.append(upper)
        if upper - lower <= tol:
            break
        r = r * np.exp2(d)
        r /= r.sum()
    trace.value = trace.lower[-1]
    trace.input_distribution = r
    return trace


def shannon_capacity(w: Dmc, tol: float = DEFAULT_TOL) -> float:
    """Capacity in bits with certified bracket width ``<= tol``."""
    return blahut_arimoto(w, tol).value


def check_rate_condition(n1: int, n: int, channel: Dmc | float, delta_prime: float) -> bool:
    """True iff ``log2(N1 + 1) / n <= C(W) - delta'`` (inclusive)."""
    if n1 < 1 or n < 1:
        raise ValidationError("N1 and n must be at least 1")
    c = channel.capacity if isinstance(channel, Dmc) else float(channel)
    return math.log2(n1 + 1) / n <= c - delta_prime


# --------------------------------------------------------------------------
# Link
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LinkModel:
    """How the bin index crosses the channel.

    ``"ideal"`` delivers the index unchanged whenever the rate condition
    holds; ``"random_coded"`` draws a random code of length ``blocklength``
    from the capacity-achieving input law and decodes by maximum likelihood.
    ``residual_error`` is the error budget granted to the link.
    """

    mode: str = "ideal"
    blocklength: int | None = None
    code_seed: int = 0
    residual_error: float = 0.0
    explicit_cap: int = 1 << 22

    def __post_init__(self):
        if self.mode not in ("ideal", "random_coded"):
            raise ValidationError(f"unknown link mode {self.mode!r}")

    def to_json(self) -> dict:
        return {"mode": self.mode, "blocklength": self.blocklength, "code_seed": self.code_seed,
                "residual_error": self.residual_error}


def transmit(index: int, n_messages: int, n: int, link: LinkModel, w: Dmc,
             seed: int = 0, delta_prime: float = 0.05) -> int:
    """Send ``index`` in ``{1..n_messages}`` and return the decoded index.

    The rate ``log2(n_messages) / n`` must respect the rate condition.
    """
    if not 1 <= index <= n_messages:
        raise ValidationError(f"index {index} outside 1..{n_messages}")
    if not check_rate_condition(n_messages - 1, n, w, delta_prime):
        raise RateConditionViolated(
            f"rate log2({n_messages})/{n} = {math.log2(n_messages) / n:.4f} exceeds "
            f"C(W) - delta' = {w.capacity - delta_prime:.4f}")
    if link.mode == "ideal":
        return index
    code = RandomCode(w, n_messages, link.blocklength or n, link.code_seed, link.explicit_cap)
    return code.send(index, seed)


class RandomCode:
    """A random channel code with ML decoding.

    Small codes are drawn explicitly and decoded against every codeword.
    Above ``explicit_cap`` codeword symbols the code is simulated as an
    ensemble: given the received word, each competitor independently beats
    (or ties) the sent codeword with probability computed exactly from the
    distribution of its log-likelihood, and a tie or win counts as an error.
    """

    def __init__(self, w: Dmc, n_messages: int, blocklength: int, code_seed: int = 0,
                 explicit_cap: int = 1 << 22):
        self.w = w
        self.m = n_messages
        self.blocklength = blocklength
        ba = blahut_arimoto(w, 1e-9)
        self.input_law = ba.input_distribution
        self.code_seed = code_seed
        with np.errstate(divide="ignore"):
            self.loglik = np.log2(w.transition)         # (inputs, outputs)
        self.explicit = n_messages * blocklength <= explicit_cap
        if self.explicit:
            rng = derive_rng(code_seed, "link", 0)
            cdf = np.cumsum(self.input_law)
            draws = rng.random((n_messages, blocklength))
            self.codewords = np.minimum(np.searchsorted(cdf, draws * cdf[-1], side="right"),
                                        len(cdf) - 1)

    def _channel(self, t: np.ndarray, rng) -> np.ndarray:
        cdf = np.cumsum(self.w.transition[t], axis=1)
        u = rng.random(len(t))[:, None]
        return np.minimum((u >= cdf).sum(axis=1), self.w.transition.shape[1] - 1)

    def send(self, index: int, seed: int) -> int:
        rng = np.random.default_rng(seed)
        if self.explicit:
            z = self._channel(self.codewords[index - 1], rng)
            scores = self.loglik[self.codewords, z[None, :]].sum(axis=1)
            best = np.flatnonzero(scores == scores.max())
            return int(best[0]) + 1 if len(best) == 1 else int(rng.choice(best)) + 1
        t = np.minimum(np.searchsorted(np.cumsum(self.input_law), rng.random(self.blocklength),
                                       side="right"), len(self.input_law) - 1)
        z = self._channel(t, rng)
        sent = float(self.loglik[t, z].sum())
        beat = self._competitor_beats(z, sent)
        p_err = -math.expm1((self.m - 1) * math.log1p(-beat)) if beat < 1 else 1.0
        if self.m > 1 and rng.random() < p_err:
            other = int(rng.integers(1, self.m))
            return other if other < index else other + 1
        return index

    def _competitor_beats(self, z: np.ndarray, sent: float) -> float:
        """P(a fresh random codeword scores >= the sent one) given output ``z``."""
        counts = tuple(np.bincount(z, minlength=self.loglik.shape[1]).tolist())
        values, tail = self._metric_law(counts)
        pos = np.searchsorted(values, round(sent, 9) - 1e-9, side="left")
        return float(min(1.0, tail[pos])) if pos < len(values) else 0.0

    def _metric_law(self, counts: tuple):
        """Support and upper-tail masses of a random codeword's log-likelihood."""
        cache = self.__dict__.setdefault("_law_cache", {})
        if counts in cache:
            return cache[counts]
        dist = {0.0: 1.0}
        for out, reps in enumerate(counts):
            col = self.loglik[:, out]
            for _ in range(reps):
                nxt: dict = {}
                for v, p in dist.items():
                    for t, pt in enumerate(self.input_law):
                        if pt <= 0 or not math.isfinite(col[t]):
                            continue
                        key = round(v + col[t], 9)
                        nxt[key] = nxt.get(key, 0.0) + p * pt
                dist = nxt
        values = np.array(sorted(dist))
        masses = np.array([dist[v] for v in values])
        tail = np.cumsum(masses[::-1])[::-1]
        cache[counts] = (values, tail)
        return values, tail


def simulate_link(w: Dmc, n_messages: int, blocklength: int, trials: int,
                  seed: int = 0, code_seed: int = 0, explicit_cap: int = 1 << 22) -> float:
    """Empirical block error rate of a random code with uniformly drawn messages."""
    code = RandomCode(w, n_messages, blocklength, code_seed, explicit_cap)
    errors = 0
    for t in range(trials):
        rng = derive_rng(seed, "link", 1, t)
        msg = int(rng.integers(1, n_messages + 1))
        if code.send(msg, int(rng.integers(0, 2**63 - 1))) != msg:
            errors += 1
    return errors / trials
