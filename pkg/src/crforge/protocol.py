"""The binning protocol for common randomness.

Terminal A sees ``x^n``, terminal B sees ``y^n``. A codebook of
``N1 * N2`` words drawn i.i.d. from ``P_U`` is split into ``N1`` bins.
A finds the first word jointly typical with ``x^n`` (row-major), sends its
bin index over the channel and keeps the word as ``K``. B looks inside the
received bin for the unique word jointly typical with ``y^n`` and keeps it
as ``L``. Failures on either side fall back to the reserved word ``u0``.

Storage. A word over a finite alphabet ``U`` is stored as one bitmask per
symbol: bit ``t`` of mask ``b`` is set when the word has symbol ``b`` at
position ``t``. The joint count of ``(u, x)`` cells against a fixed
sequence is then ``popcount(mask_u & mask_x)``, which makes scanning
millions of words cheap.
"""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing as mp
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel import Dmc, LinkModel, RandomCode, check_rate_condition
from .dist import (AuxChannel, JointPmf, conditional_log2_second_moment, mutual_information,
                   source_is_admissible)
from .errors import CodebookTooLarge, RateConditionViolated, ValidationError
from .rng import derive_rng, derive_seed
from .typicality import DenseScorer, TypicalityLadder, cell_codes

CSV_VERSION = "#crforge-v1"
CSV_COLUMNS = ("n", "nu1", "nu2", "nu3", "delta", "N1", "N2", "trials",
               "e1", "e2", "e3", "e4", "agree", "hk_rate", "target_rate")
DEFAULT_MAX_SYMBOLS = 1 << 28      # N1 * N2 * n
SCAN_CHUNK = 1 << 16
_GEN_CHUNK = 1 << 19
U0_KEY = b"u0"


def codebook_sizes(i_ux: float, i_uy: float, n: int, delta: float) -> tuple[int, int]:
    """``N1 = ceil(2^{n(I(U;X)-I(U;Y)+4 delta)})`` and ``N2 = ceil(2^{n(I(U;Y)-2 delta)})``.

    The exponent is shaved by a relative 1e-12 before ``ceil`` so that an
    exact power of two computed with rounding error is not bumped up.
    """
    def up(e):
        return max(1, math.ceil(2.0 ** e * (1 - 1e-12)))
    return up(n * (i_ux - i_uy + 4 * delta)), up(n * (i_uy - 2 * delta))


def cardinality_bound_holds(n1: int, n2: int, n: int, i_ux: float, delta: float) -> bool:
    """``N1 N2 + 1 <= 2^{2n(I(U;X) + 2 delta)}``."""
    return math.log2(n1 * n2 + 1) <= 2 * n * (i_ux + 2 * delta)


def _limb_bytes(n: int) -> int:
    nbytes = -(-n // 8)
    return next(w for w in (1, 2, 4, 8) if nbytes <= w) if nbytes <= 8 else -(-nbytes // 8) * 8


def _pack(bits: np.ndarray, n: int) -> np.ndarray:
    """Pack a boolean ``(rows, n)`` array into ``(rows, limbs)`` unsigned ints."""
    packed = np.packbits(bits, axis=-1, bitorder="little")
    width = _limb_bytes(n)
    pad = width - packed.shape[-1] % width if packed.shape[-1] % width else 0
    if pad:
        packed = np.concatenate([packed, np.zeros((*packed.shape[:-1], pad), np.uint8)], axis=-1)
    word = min(width, 8)
    dtype = {1: np.uint8, 2: np.uint16, 4: np.uint32, 8: np.uint64}[word]
    return np.ascontiguousarray(packed).view(np.dtype(dtype).newbyteorder("<"))


@dataclass(eq=False)
class Codebook:
    """``N1 x N2`` words of length ``n`` plus the fallback word ``u0``.

    ``p_uxy`` is the (renormalized) trivariate law with coordinates
    ``(U, X, Y)`` that the encoder and decoder test against. ``masks`` has
    shape ``(|U|, N1*N2, limbs)`` in row-major word order.
    """

    n: int
    n1: int
    n2: int
    p_uxy: JointPmf
    delta: float
    seed: int
    masks: np.ndarray
    i_ux: float
    i_uy: float
    u0_symbol: int = field(init=False)

    def __post_init__(self):
        self.u0_symbol = min(self.u_symbols) - 1

    @classmethod
    def from_words(cls, words, p_uxy: JointPmf, delta: float, seed: int = 0) -> "Codebook":
        """Wrap an explicit ``(N1, N2, n)`` array of words (for hand-built instances)."""
        words = np.asarray(words, dtype=np.int64)
        if words.ndim != 3:
            raise ValidationError("words must have shape (N1, N2, n)")
        n1, n2, n = words.shape
        tri = p_uxy.renormalized() if p_uxy.truncation_loss > 0 else p_uxy
        alpha = tri.alphabets[0]
        flat = words.reshape(n1 * n2, n)
        if not np.isin(flat, alpha).all():
            raise ValidationError("words use symbols outside the U alphabet")
        masks = np.stack([_pack(flat == u, n) for u in alpha])
        return cls(n, n1, n2, tri, delta, seed, masks,
                   mutual_information(tri.marginal((0, 1))), mutual_information(tri.marginal((0, 2))))

    @property
    def u_symbols(self) -> tuple:
        return self.p_uxy.alphabets[0]

    @property
    def x_symbols(self) -> tuple:
        return self.p_uxy.alphabets[1]

    @property
    def y_symbols(self) -> tuple:
        return self.p_uxy.alphabets[2]

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def cardinality_ok(self) -> bool:
        return cardinality_bound_holds(self.n1, self.n2, self.n, self.i_ux, self.delta)

    @property
    def log2_k(self) -> float:
        """``log2 |K|`` with ``|K| = N1 N2 + 1``."""
        return math.log2(self.size + 1)

    @cached_property
    def _dense(self) -> np.ndarray:
        return self.p_uxy.dense()

    @cached_property
    def scorer_ux(self) -> "_PackedScorer":
        return _PackedScorer(self._dense.sum(axis=2), self.n)

    @cached_property
    def scorer_uy(self) -> "_PackedScorer":
        return _PackedScorer(self._dense.sum(axis=1), self.n)

    @cached_property
    def scorer_uxy(self) -> "_PackedScorer":
        return _PackedScorer(self._dense, self.n)

    @cached_property
    def scorer_xy(self) -> DenseScorer:
        return DenseScorer(self._dense.sum(axis=0), self.n)

    def position(self, i: int, j: int) -> int:
        if not (1 <= i <= self.n1 and 1 <= j <= self.n2):
            raise ValidationError(f"word index ({i}, {j}) outside the codebook")
        return (i - 1) * self.n2 + (j - 1)

    def key(self, pos: int | None) -> bytes:
        """Hashable identity of the word at ``pos`` (``None`` means ``u0``)."""
        return U0_KEY if pos is None else self.masks[:, pos, :].tobytes()

    def word_at(self, pos: int | None) -> np.ndarray:
        if pos is None:
            return np.full(self.n, self.u0_symbol, dtype=np.int64)
        out = np.empty(self.n, dtype=np.int64)
        for b, u in enumerate(self.u_symbols):
            bits = np.unpackbits(self.masks[b, pos].view(np.uint8), bitorder="little")[:self.n]
            out[bits.astype(bool)] = u
        return out

    def word(self, i: int, j: int) -> np.ndarray:
        return self.word_at(self.position(i, j))

    @property
    def u0(self) -> np.ndarray:
        return self.word_at(None)

    def words(self) -> np.ndarray:
        """All words as an ``(N1, N2, n)`` array. Only for small codebooks."""
        return np.stack([self.word_at(p) for p in range(self.size)]).reshape(self.n1, self.n2, self.n)

    def fixed_masks(self, seqs, coords) -> np.ndarray | None:
        """Per-cell masks of a fixed sequence tuple over the given coordinates.

        Returns ``None`` when a symbol falls outside the stored alphabet, in
        which case no word can be jointly typical with it.
        """
        alphas = [self.p_uxy.alphabets[c] for c in coords]
        codes = cell_codes([np.asarray(s) for s in seqs], alphas)
        if (codes < 0).any():
            return None
        cells = math.prod(len(a) for a in alphas)
        return _pack(codes[None, :] == np.arange(cells)[:, None], self.n)

    def to_json(self) -> dict:
        return {"n": self.n, "N1": self.n1, "N2": self.n2, "delta": self.delta, "seed": self.seed,
                "i_ux": self.i_ux, "i_uy": self.i_uy, "u0_symbol": self.u0_symbol,
                "cardinality_ok": self.cardinality_ok}


class _PackedScorer:
    """Scores of packed words against one fixed packed sequence (tuple)."""

    def __init__(self, p: np.ndarray, n: int):
        self.dense = DenseScorer(p, n)
        self.shape = p.shape
        self.zero = (p <= 0).reshape(p.shape[0], -1)

    def counts(self, masks: np.ndarray, fixed: np.ndarray) -> np.ndarray:
        """Joint counts of shape ``(words, |U|, cells)``."""
        both = masks[:, None, :, :] & fixed[None, :, None, :]
        c = np.bitwise_count(both).sum(axis=-1, dtype=np.int64)   # (U, F, words)
        return c.transpose(2, 0, 1)

    def scores(self, masks: np.ndarray, fixed: np.ndarray) -> np.ndarray:
        c = self.counts(masks, fixed)
        out = np.full(c.shape[0], np.inf)
        live = ~(c[:, self.zero] > 0).any(axis=1) if self.zero.any() else np.ones(len(c), bool)
        if live.any():
            out[live] = self.dense.scores(c[live].reshape(-1, *self.shape))
        return out


# --------------------------------------------------------------------------
# Construction
# --------------------------------------------------------------------------


def _largest_feasible_n(i_ux, i_uy, delta, n, max_symbols) -> int | None:
    for m in range(n - 1, 0, -1):
        a, b = codebook_sizes(i_ux, i_uy, m, delta)
        if a * b * m <= max_symbols:
            return m
    return None


def build_codebook(p_uxy: JointPmf, n: int, ladder: TypicalityLadder, seed: int = 0,
                   max_symbols: int = DEFAULT_MAX_SYMBOLS) -> Codebook:
    """Draw the binned codebook for the trivariate law ``(U, X, Y)``.

    The informations ``I(U;X)`` and ``I(U;Y)`` are those of ``p_uxy``
    (renormalized on its stored support).
    """
    if not isinstance(ladder, TypicalityLadder):
        raise ValidationError("ladder must be a TypicalityLadder")
    if not ladder.delta > 1.5 * ladder.nu1:
        raise ValidationError(f"delta={ladder.delta} must exceed 1.5 * nu1")
    if p_uxy.arity != 3:
        raise ValidationError("codebook needs a trivariate (U, X, Y) law")
    if n < 1:
        raise ValidationError("blocklength must be at least 1")
    tri = p_uxy.renormalized() if p_uxy.truncation_loss > 0 else p_uxy
    i_ux = mutual_information(tri.marginal((0, 1)))
    i_uy = mutual_information(tri.marginal((0, 2)))
    n1, n2 = codebook_sizes(i_ux, i_uy, n, ladder.delta)
    if not cardinality_bound_holds(n1, n2, n, i_ux, ladder.delta):
        # only possible when n(I(U;X) + 2 delta) is tiny and the ceilings dominate
        raise ValidationError(f"N1 N2 + 1 = {n1 * n2 + 1} exceeds "
                              f"2^(2n(I(U;X) + 2 delta)) at n={n}; raise n or delta")
    if n1 * n2 * n > max_symbols:
        best = _largest_feasible_n(i_ux, i_uy, ladder.delta, n, max_symbols)
        raise CodebookTooLarge(
            f"codebook of {n1} x {n2} words of length {n} exceeds the cap of {max_symbols} "
            f"symbols; largest feasible n is {best}", max_feasible_n=best)
    u_alpha = tri.alphabets[0]
    pu = tri.marginal((0,))
    probs = np.array([pu.prob(u) for u in u_alpha])
    cdf = np.cumsum(probs)
    rng = derive_rng(seed, "codebook", n)
    total = n1 * n2
    probe = _pack(np.zeros((1, n), bool), n)
    masks = np.empty((len(u_alpha), total, probe.shape[1]), dtype=probe.dtype)
    for start in range(0, total, _GEN_CHUNK):
        stop = min(total, start + _GEN_CHUNK)
        idx = np.searchsorted(cdf, rng.random((stop - start, n)) * cdf[-1], side="right")
        idx = np.minimum(idx, len(u_alpha) - 1)
        for b in range(len(u_alpha)):
            masks[b, start:stop] = _pack(idx == b, n)
    return Codebook(n, n1, n2, tri, ladder.delta, seed, masks, i_ux, i_uy)


# --------------------------------------------------------------------------
# Encoder and decoder
# --------------------------------------------------------------------------


def _encode_pos(fixed_x, cb: Codebook, nu2: float, chunk: int = SCAN_CHUNK) -> int | None:
    if fixed_x is None:
        return None
    for start in range(0, cb.size, chunk):
        s = cb.scorer_ux.scores(cb.masks[:, start:start + chunk], fixed_x)
        hit = np.flatnonzero(s <= nu2)
        if len(hit):
            return start + int(hit[0])
    return None


def _bin_scores(scorer: _PackedScorer, fixed, cb: Codebook, i: int) -> np.ndarray:
    if fixed is None:
        return np.full(cb.n2, np.inf)
    lo = (i - 1) * cb.n2
    return scorer.scores(cb.masks[:, lo:lo + cb.n2], fixed)


def _decode_pos(fixed_y, i_hat: int, cb: Codebook, nu2: float) -> int | None:
    if i_hat == cb.n1 + 1:
        return None
    hits = np.flatnonzero(_bin_scores(cb.scorer_uy, fixed_y, cb, i_hat) <= nu2)
    return (i_hat - 1) * cb.n2 + int(hits[0]) if len(hits) == 1 else None


def _check_length(seq, n):
    seq = np.asarray(seq, dtype=np.int64)
    if seq.shape != (n,):
        raise ValidationError(f"sequence must have length {n}, got shape {seq.shape}")
    return seq


def encode(x, cb: Codebook, nu2: float) -> tuple[int, np.ndarray]:
    """``(i*, K)``: the first ``nu2``-typical word in row-major order, else ``(N1+1, u0)``."""
    x = _check_length(x, cb.n)
    pos = _encode_pos(cb.fixed_masks([x], (1,)), cb, nu2)
    if pos is None:
        return cb.n1 + 1, cb.u0
    return pos // cb.n2 + 1, cb.word_at(pos)


def decode(y, i_hat: int, cb: Codebook, nu2: float) -> np.ndarray:
    """``L``: the unique ``nu2``-typical word of bin ``i_hat``, else ``u0``."""
    y = _check_length(y, cb.n)
    if not 1 <= i_hat <= cb.n1 + 1:
        raise ValidationError(f"received index {i_hat} outside 1..{cb.n1 + 1}")
    return cb.word_at(_decode_pos(cb.fixed_masks([y], (2,)), i_hat, cb, nu2))


# --------------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------------


@dataclass
class ProtocolSetup:
    source: object
    codebook: Codebook
    ladder: TypicalityLadder
    channel: Dmc
    link: LinkModel
    seed: int
    code: RandomCode | None = None


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one trial. ``k`` and ``l`` are word keys (see :meth:`Codebook.key`)."""

    k: bytes
    l: bytes
    i_star: int
    i_hat: int
    e1: bool
    e2: bool
    e3: bool
    e3_sent: bool
    e4: bool
    e4_miss: bool
    link_error: bool

    @property
    def agree(self) -> bool:
        return self.k == self.l

    @property
    def explained(self) -> bool:
        return (self.e1 or self.e2 or self.e3 or self.e3_sent or self.e4 or self.e4_miss
                or self.link_error)


def run_trial(setup: ProtocolSetup, t: int) -> TrialRecord:
    """Run trial ``t``; fully determined by ``(setup.seed, t)`` and the codebook."""
    cb, lad = setup.codebook, setup.ladder
    rng = derive_rng(setup.seed, "protocol", t)
    x, y = setup.source.sample(cb.n, rng)
    fx = cb.fixed_masks([x], (1,))
    fy = cb.fixed_masks([y], (2,))

    pos = _encode_pos(fx, cb, lad.nu2)
    i_star = cb.n1 + 1 if pos is None else pos // cb.n2 + 1
    if setup.code is None:
        i_hat = i_star
    else:
        i_hat = setup.code.send(i_star, int(rng.integers(0, 2**63 - 1)))
    l_pos = _decode_pos(fy, i_hat, cb, lad.nu2)

    codes = cell_codes([x, y], cb.p_uxy.alphabets[1:])
    if (codes < 0).any():
        e1 = True
    else:
        counts = np.bincount(codes, minlength=len(cb.x_symbols) * len(cb.y_symbols))
        e1 = bool(cb.scorer_xy.scores(counts[None, :])[0] > lad.nu1)

    e2 = pos is None
    e3 = e3_sent = e4 = e4_miss = False
    if not e1 and not e2:
        j_star = pos % cb.n2
        uy_sent = _bin_scores(cb.scorer_uy, fy, cb, i_star)
        e4_miss = bool(uy_sent[j_star] > lad.nu2)
        e3_sent = bool(np.any(np.delete(uy_sent, j_star) <= lad.nu2))
        if i_hat <= cb.n1:
            uy_recv = uy_sent if i_hat == i_star else _bin_scores(cb.scorer_uy, fy, cb, i_hat)
            wrong = uy_recv <= lad.nu2
            if i_hat == i_star:
                wrong[j_star] = False
            e3 = bool(wrong.any())
            fxy = cb.fixed_masks([x, y], (1, 2))
            e4 = not bool(np.any(_bin_scores(cb.scorer_uxy, fxy, cb, i_hat) <= lad.nu3))
        else:
            e4 = True
    return TrialRecord(cb.key(pos), cb.key(l_pos), i_star, i_hat, e1, e2, e3, e3_sent,
                       e4, e4_miss, i_hat != i_star)


@dataclass
class RunReport:
    """Event counts and estimates of a protocol run.

    ``e3`` counts a wrong typical word in the received bin, ``e3_sent`` the
    same test in the sent bin; they differ only on link errors. ``e4`` is
    the trivariate event; ``e4_miss`` counts trials where the decoder-side
    test rejects the encoder's word, which ``e4`` alone does not cover.
    The entropy of ``K`` is a plug-in estimate with a Miller-Madow
    variant; both are biased low when ``trials`` is small against ``|K|``.
    """

    n: int
    ladder: TypicalityLadder
    n1: int
    n2: int
    i_ux: float
    i_uy: float
    trials: int = 0
    e1: int = 0
    e2: int = 0
    e3: int = 0
    e3_sent: int = 0
    e4: int = 0
    e4_miss: int = 0
    link_errors: int = 0
    unexplained: int = 0
    agreements: int = 0
    k_counts: Counter = field(default_factory=Counter)
    truncation_loss: float = 0.0

    def add(self, rec: TrialRecord) -> None:
        self.trials += 1
        for name in ("e1", "e2", "e3", "e3_sent", "e4", "e4_miss"):
            setattr(self, name, getattr(self, name) + getattr(rec, name))
        self.link_errors += rec.link_error
        self.agreements += rec.agree
        self.unexplained += (not rec.agree) and not rec.explained
        self.k_counts[rec.k] += 1

    def merge(self, other: "RunReport") -> "RunReport":
        """Combine two partial reports of the same setup (associative)."""
        if (self.n, self.n1, self.n2, self.ladder) != (other.n, other.n1, other.n2, other.ladder):
            raise ValidationError("cannot merge reports of different setups")
        out = RunReport(self.n, self.ladder, self.n1, self.n2, self.i_ux, self.i_uy,
                        truncation_loss=self.truncation_loss)
        for name in ("trials", "e1", "e2", "e3", "e3_sent", "e4", "e4_miss", "link_errors",
                     "unexplained", "agreements"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        out.k_counts = self.k_counts + other.k_counts
        return out

    @property
    def agreement_rate(self) -> float:
        return self.agreements / self.trials if self.trials else 0.0

    @property
    def hk_plugin(self) -> float:
        if not self.trials:
            return 0.0
        c = np.array(sorted(self.k_counts.values()), dtype=float) / self.trials
        return max(0.0, float(-np.sum(c * np.log2(c))))

    @property
    def hk_miller_madow(self) -> float:
        if not self.trials:
            return 0.0
        return self.hk_plugin + (len(self.k_counts) - 1) / (2 * self.trials * math.log(2))

    @property
    def hk_rate(self) -> float:
        return self.hk_plugin / self.n

    @property
    def target_rate(self) -> float:
        return self.i_ux

    @property
    def cardinality_rate(self) -> float:
        return math.log2(self.n1 * self.n2 + 1) / self.n

    def to_json(self) -> dict:
        return {
            "n": self.n, "ladder": self.ladder.to_json(), "N1": self.n1, "N2": self.n2,
            "trials": self.trials, "e1": self.e1, "e2": self.e2, "e3": self.e3,
            "e3_sent": self.e3_sent, "e4": self.e4, "e4_miss": self.e4_miss,
            "link_errors": self.link_errors, "unexplained": self.unexplained,
            "agreement_rate": self.agreement_rate, "distinct_k": len(self.k_counts),
            "hk_plugin": self.hk_plugin, "hk_miller_madow": self.hk_miller_madow,
            "hk_rate": self.hk_rate, "target_rate": self.target_rate, "i_uy": self.i_uy,
            "cardinality_rate": self.cardinality_rate, "truncation_loss": self.truncation_loss,
        }

    def csv_row(self) -> list:
        lad = self.ladder
        return [self.n, lad.nu1, lad.nu2, lad.nu3, lad.delta, self.n1, self.n2, self.trials,
                self.e1, self.e2, self.e3, self.e4, f"{self.agreement_rate:.6f}",
                f"{self.hk_rate:.6f}", f"{self.target_rate:.6f}"]

    def to_csv(self) -> str:
        return reports_to_csv([self])


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    buf.write(CSV_VERSION + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def prepare(source, aux: AuxChannel, channel: Dmc, link: LinkModel, n: int,
            ladder: TypicalityLadder, seed: int = 0,
            max_symbols: int = DEFAULT_MAX_SYMBOLS) -> ProtocolSetup:
    """Check the preconditions and build the codebook and link for one run."""
    if not source_is_admissible(source):
        raise ValidationError("source marginals have an infinite second log-moment")
    p_xy = source.joint()
    tri = aux.compose(p_xy)
    _, moment = conditional_log2_second_moment(tri.marginal((0, 1)), given=1)
    if not math.isfinite(moment):
        raise ValidationError("conditional second log-moment of U given X is not finite")
    tri_n = tri.renormalized()
    i_ux = mutual_information(tri_n.marginal((0, 1)))
    i_uy = mutual_information(tri_n.marginal((0, 2)))
    n1, _ = codebook_sizes(i_ux, i_uy, n, ladder.delta)
    if not check_rate_condition(n1, n, channel, ladder.delta_prime):
        raise RateConditionViolated(
            f"log2(N1+1)/n = {math.log2(n1 + 1) / n:.4f} exceeds C(W) - delta' = "
            f"{channel.capacity - ladder.delta_prime:.4f} (N1={n1}, n={n})")
    cb = build_codebook(tri, n, ladder, derive_seed(seed, "codebook"), max_symbols)
    code = None
    if link.mode == "random_coded":
        code = RandomCode(channel, n1 + 1, link.blocklength or n, link.code_seed,
                          link.explicit_cap)
    return ProtocolSetup(source, cb, ladder, channel, link, seed, code)


def _empty_report(setup: ProtocolSetup) -> RunReport:
    cb = setup.codebook
    return RunReport(cb.n, setup.ladder, cb.n1, cb.n2, cb.i_ux, cb.i_uy,
                     truncation_loss=cb.p_uxy.truncation_loss)


def run_trials(setup: ProtocolSetup, start: int, stop: int) -> RunReport:
    report = _empty_report(setup)
    for t in range(start, stop):
        report.add(run_trial(setup, t))
    return report


_WORKER_SETUP: ProtocolSetup | None = None


def _worker_range(bounds):
    return run_trials(_WORKER_SETUP, *bounds)


def run_setup(setup: ProtocolSetup, trials: int, workers: int = 1) -> RunReport:
    """Run ``trials`` trials, splitting them over ``workers`` processes.

    Counts are integers and the entropy is computed from sorted counts, so
    the report does not depend on the split.
    """
    if trials < 0:
        raise ValidationError("trials must be nonnegative")
    if workers <= 1 or trials < 2 * workers or "fork" not in mp.get_all_start_methods():
        return run_trials(setup, 0, trials)
    global _WORKER_SETUP
    _WORKER_SETUP = setup
    edges = np.linspace(0, trials, workers + 1).astype(int)
    try:
        with ProcessPoolExecutor(workers, mp_context=mp.get_context("fork")) as pool:
            parts = list(pool.map(_worker_range, zip(edges[:-1], edges[1:])))
    finally:
        _WORKER_SETUP = None
    report = parts[0]
    for p in parts[1:]:
        report = report.merge(p)
    return report


def run_protocol(source, aux: AuxChannel, channel: Dmc, link: LinkModel, n: int,
                 ladder: TypicalityLadder, trials: int, seed: int = 0, workers: int = 1,
                 max_symbols: int = DEFAULT_MAX_SYMBOLS) -> RunReport:
    setup = prepare(source, aux, channel, link, n, ladder, seed, max_symbols)
    return run_setup(setup, trials, workers)


@dataclass(frozen=True)
class CertCheck:
    log2_k: float
    bound: float
    cardinality_ok: bool
    hk_rate: float
    target_rate: float
    gap: float
    bias_warning: bool
    degenerate: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def rate_certificate(report: RunReport, cb: Codebook) -> CertCheck:
    """Check ``log2|K| <= c n`` for ``c = 2(I(U;X) + 2 delta)`` and compare ``H(K)/n`` to the target."""
    bound = 2 * cb.n * (cb.i_ux + 2 * cb.delta)
    return CertCheck(
        log2_k=cb.log2_k, bound=bound, cardinality_ok=cb.log2_k <= bound,
        hk_rate=report.hk_rate, target_rate=report.target_rate,
        gap=report.target_rate - report.hk_rate,
        bias_warning=report.trials < (cb.size + 1) ** 2,
        degenerate=len(report.k_counts) <= 1)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
