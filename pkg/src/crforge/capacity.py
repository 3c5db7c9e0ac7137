"""Numerical CR capacity of a (truncated) source over a channel.

    maximize    I(U;X)
    subject to  I(U;X) - I(U;Y) <= c_w,   U - X - Y

over conditional laws ``P(u|x)`` with ``|U| <= u_cardinality``. The default
``u_cardinality = |X| + 1`` is the usual support-lemma size for this kind
of problem on finite alphabets; for countable sources it is a heuristic,
and a truncated source yields the capacity of the truncated instance.

Two solvers: an exhaustive grid over the row simplices (ground truth at
tiny sizes) and a penalized multiplicative ascent with restarts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Dmc
from .dist import AuxChannel, JointPmf
from .errors import NonStochasticMatrix, TooLarge, ValidationError
from .rng import derive_rng
from .typicality import compositions

GRID_MAX_RESOLUTION = 64
GRID_MAX_X = 3
GRID_MAX_U = 3
GRID_MAX_POINTS = 50_000_000
_GRID_CHUNK = 1 << 17
PENALTY_SCHEDULE = (1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6)


def _h(p: np.ndarray, axis: int = -1) -> np.ndarray:
    """Entropy in bits along ``axis``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -t.sum(axis=axis)


@dataclass(frozen=True, eq=False)
class CapacityProblem:
    p_xy: JointPmf
    c_w: float
    u_cardinality: int | None = None
    tol: float = 1e-9

    def __post_init__(self):
        if self.p_xy.arity != 2:
            raise ValidationError("capacity problem needs a bivariate source joint")
        if not self.c_w >= 0:
            raise ValidationError(f"channel capacity c_w must be nonnegative, got {self.c_w}")
        if self.u_cardinality is None:
            object.__setattr__(self, "u_cardinality", len(self.p_xy.alphabets[0]) + 1)
        if self.u_cardinality < 2:
            raise ValidationError("u_cardinality must be at least 2")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")

    @classmethod
    def for_channel(cls, p_xy: JointPmf, w: Dmc, **kw) -> "CapacityProblem":
        return cls(p_xy, w.capacity, **kw)

    @property
    def x_symbols(self) -> tuple:
        return self.p_xy.alphabets[0]

    @property
    def dense(self) -> np.ndarray:
        """``P(x, y)`` renormalized on the stored support."""
        d = self.p_xy.dense()
        return d / d.sum()

    def to_json(self) -> dict:
        return {"p_xy": self.p_xy.to_json(), "c_w": self.c_w,
                "u_cardinality": self.u_cardinality, "tol": self.tol}

    @classmethod
    def from_json(cls, doc) -> "CapacityProblem":
        return cls(JointPmf.from_json(doc["p_xy"]), float(doc["c_w"]),
                   doc.get("u_cardinality"), float(doc.get("tol", 1e-9)))


@dataclass
class CapacitySolution:
    value: float
    argmax: np.ndarray
    constraint_slack: float
    method: str
    i_ux: float
    i_uy: float
    x_symbols: tuple = ()
    restart_values: list = field(default_factory=list)
    truncation_loss: float = 0.0

    def as_aux(self) -> AuxChannel:
        return AuxChannel(self.x_symbols, tuple(range(self.argmax.shape[1])), self.argmax)

    def to_json(self) -> dict:
        return {"value": self.value, "argmax": self.argmax.tolist(),
                "constraint_slack": self.constraint_slack, "method": self.method,
                "i_ux": self.i_ux, "i_uy": self.i_uy, "x_symbols": list(self.x_symbols),
                "restart_values": self.restart_values, "truncation_loss": self.truncation_loss,
                "label": "truncated-instance capacity" if self.truncation_loss > 0 else "capacity"}

    @classmethod
    def from_json(cls, doc) -> "CapacitySolution":
        return cls(float(doc["value"]), np.array(doc["argmax"], dtype=float),
                   float(doc["constraint_slack"]), doc["method"], float(doc["i_ux"]),
                   float(doc["i_uy"]), tuple(doc.get("x_symbols", ())),
                   list(doc.get("restart_values", [])), float(doc.get("truncation_loss", 0.0)))


# --------------------------------------------------------------------------
# Objective
# --------------------------------------------------------------------------


class _Instance:
    """Cached marginals of a dense ``P(x, y)``."""

    def __init__(self, pxy: np.ndarray):
        self.pxy = pxy
        self.px = pxy.sum(axis=1)
        self.py = pxy.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.px_given_y = np.where(self.py > 0, pxy / self.py, 0.0).T   # (y, x)

    def informations(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``I(U;X)`` and ``I(U;Y)`` for a batch ``q`` of shape ``(..., |X|, |U|)``."""
        pu = np.einsum("x,...xu->...u", self.px, q)
        hu = _h(pu)
        hux = np.einsum("x,...x->...", self.px, _h(q))
        pu_y = np.einsum("yx,...xu->...yu", self.px_given_y, q)
        huy = np.einsum("y,...y->...", self.py, _h(pu_y))
        return np.maximum(hu - hux, 0.0), np.maximum(hu - huy, 0.0)

    def gradients(self, q: np.ndarray):
        """Gradients of ``I(U;X)`` and ``I(U;Y)`` with respect to ``q[x, u]`` (bits)."""
        pu = self.px @ q
        puy = self.pxy.T @ q                       # P(y, u)
        with np.errstate(divide="ignore", invalid="ignore"):
            lq = np.log2(np.where(q > 0, q, 1.0))
            lu = np.log2(np.where(pu > 0, pu, 1.0))
            lcond = np.log2(np.where(puy > 0, puy / self.py[:, None], 1.0))
        g_ux = self.px[:, None] * (lq - lu[None, :])
        g_uy = self.pxy @ lcond - self.px[:, None] * lu[None, :]
        return g_ux, g_uy


def _as_matrix(p_u_given_x, n_x: int) -> np.ndarray:
    q = p_u_given_x.matrix if isinstance(p_u_given_x, AuxChannel) else p_u_given_x
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != n_x:
        raise NonStochasticMatrix(f"P(u|x) must have {n_x} rows, got shape {q.shape}")
    if np.any(q < 0) or np.any(np.abs(q.sum(axis=1) - 1.0) > 1e-9):
        raise NonStochasticMatrix("every row of P(u|x) must be a probability vector")
    return q


def evaluate_point(p_xy: JointPmf, p_u_given_x) -> tuple[float, float]:
    """Exact ``(I(U;X), I(U;Y))`` under the chain ``U - X - Y``.

    Rows of ``p_u_given_x`` follow the sorted X alphabet of ``p_xy``. An
    :class:`AuxChannel` is realigned by its own ``x_symbols``.
    """
    xs = p_xy.alphabets[0]
    if isinstance(p_u_given_x, AuxChannel):
        missing = set(xs) - set(p_u_given_x.x_symbols)
        if missing:
            raise ValidationError(f"aux channel has no rows for {sorted(missing)}")
        q = np.stack([p_u_given_x.row(x) for x in xs])
    else:
        q = p_u_given_x
    q = _as_matrix(q, len(xs))
    d = p_xy.dense()
    i_ux, i_uy = _Instance(d / d.sum()).informations(q)
    return float(i_ux), float(i_uy)


def _solution(prob: CapacityProblem, inst: _Instance, q: np.ndarray, method: str,
              restarts=()) -> CapacitySolution:
    i_ux, i_uy = (float(v) for v in inst.informations(q))
    return CapacitySolution(i_ux, q, prob.c_w - (i_ux - i_uy), method, i_ux, i_uy,
                            prob.x_symbols, list(restarts), prob.p_xy.truncation_loss)


# --------------------------------------------------------------------------
# Grid oracle
# --------------------------------------------------------------------------


_GRID_CACHE: dict = {}
GRID_SPACINGS = ("quadratic", "uniform")


def grid_nodes(resolution: int, k: int, spacing: str = "quadratic") -> np.ndarray:
    """Nodes of one row simplex, in lexicographic order.

    ``uniform`` is the lattice with step ``1/resolution``. ``quadratic``
    squares every lattice coordinate and renormalizes: vertices and faces
    stay on the grid, and nodes crowd toward the faces, where entropy has
    unbounded slope and a uniform lattice is coarsest in information terms.
    """
    if spacing not in GRID_SPACINGS:
        raise ValidationError(f"unknown grid spacing {spacing!r}")
    nodes = compositions(resolution, k)[::-1] / resolution
    if spacing == "quadratic":
        nodes = nodes ** 2
        nodes /= nodes.sum(axis=1, keepdims=True)
    return nodes


def _grid_table(prob: CapacityProblem, resolution: int, spacing: str):
    """``I(U;X)`` and ``I(U;Y)`` over the full product grid, in lexicographic order."""
    key = (tuple(prob.dense.ravel().tolist()), prob.dense.shape, prob.u_cardinality,
           resolution, spacing)
    if key in _GRID_CACHE:
        return _GRID_CACHE[key]
    inst = _Instance(prob.dense)
    nodes = grid_nodes(resolution, prob.u_cardinality, spacing)
    h_nodes = _h(nodes)
    n_x = prob.dense.shape[0]
    s = len(nodes)
    total = s ** n_x
    i_ux = np.empty(total)
    i_uy = np.empty(total)
    for start in range(0, total, _GRID_CHUNK):
        stop = min(total, start + _GRID_CHUNK)
        rows = np.unravel_index(np.arange(start, stop), (s,) * n_x)
        picked = [nodes[r] for r in rows]
        hu = _h(sum(inst.px[x] * picked[x] for x in range(n_x)))
        hux = sum(inst.px[x] * h_nodes[rows[x]] for x in range(n_x))
        huy = sum(inst.py[y] * _h(sum(inst.px_given_y[y, x] * picked[x] for x in range(n_x)))
                  for y in range(len(inst.py)))
        i_ux[start:stop] = np.maximum(hu - hux, 0.0)
        i_uy[start:stop] = np.maximum(hu - huy, 0.0)
    _GRID_CACHE.clear()
    _GRID_CACHE[key] = (nodes, i_ux, i_uy)
    return _GRID_CACHE[key]


def solve_brute_force(prob: CapacityProblem, grid_resolution: int = 64,
                      spacing: str = "quadratic") -> CapacitySolution:
    """Best feasible point of the product grid over the rows of ``P(u|x)``.

    Each row ranges over :func:`grid_nodes` with ``grid_resolution`` steps
    per simplex axis. Ties go to the lexicographically first grid point.
    """
    n_x = len(prob.x_symbols)
    if grid_resolution < 1 or grid_resolution > GRID_MAX_RESOLUTION:
        raise TooLarge(f"grid_resolution must lie in 1..{GRID_MAX_RESOLUTION}")
    if n_x > GRID_MAX_X or prob.u_cardinality > GRID_MAX_U:
        raise TooLarge(f"grid search supports |X| <= {GRID_MAX_X} and |U| <= {GRID_MAX_U}, "
                       f"got |X|={n_x}, |U|={prob.u_cardinality}")
    s = math.comb(grid_resolution + prob.u_cardinality - 1, prob.u_cardinality - 1)
    if s ** n_x > GRID_MAX_POINTS:
        raise TooLarge(f"grid has {s ** n_x} points, above the cap {GRID_MAX_POINTS}; "
                       f"lower grid_resolution")
    nodes, i_ux, i_uy = _grid_table(prob, grid_resolution, spacing)
    feasible = i_ux - i_uy <= prob.c_w + prob.tol
    best = int(np.argmax(np.where(feasible, i_ux, -np.inf)))
    rows = np.unravel_index(best, (len(nodes),) * n_x)
    q = np.stack([nodes[r] for r in rows])
    return _solution(prob, _Instance(prob.dense), q, "GridBruteForce")


# --------------------------------------------------------------------------
# Penalized ascent
# --------------------------------------------------------------------------


def _objective(inst, q, c_w, mu):
    i_ux, i_uy = inst.informations(q)
    return float(i_ux - 0.5 * mu * max(0.0, i_ux - i_uy - c_w) ** 2)


def _ascend(inst: _Instance, q: np.ndarray, c_w: float, mu: float, iters: int) -> np.ndarray:
    """Exponentiated-gradient ascent on ``I(U;X) - mu/2 ((gap - c_w)^+)^2`` with step control."""
    eta = 1.0
    f = _objective(inst, q, c_w, mu)
    for _ in range(iters):
        g_ux, g_uy = inst.gradients(q)
        i_ux, i_uy = inst.informations(q)
        g = g_ux - mu * max(0.0, float(i_ux - i_uy - c_w)) * (g_ux - g_uy)
        g = g / np.maximum(inst.px[:, None], 1e-300)
        g = g - g.max(axis=1, keepdims=True)
        while eta > 1e-8:
            cand = q * np.exp2(eta * g)
            cand = np.maximum(cand / cand.sum(axis=1, keepdims=True), 1e-300)
            cand /= cand.sum(axis=1, keepdims=True)
            fc = _objective(inst, cand, c_w, mu)
            if fc >= f:
                break
            eta *= 0.5
        else:
            break
        gain = fc - f
        q, f = cand, fc
        eta = min(eta * 1.5, 64.0)
        if gain < 1e-13:
            break
    return q


def _repair(inst: _Instance, q: np.ndarray, c_w: float, tol: float) -> np.ndarray:
    """Mix toward a U independent of X until the constraint holds."""
    def ok(m):
        a, b = inst.informations(m)
        return a - b <= c_w + tol
    if ok(q):
        return q
    flat = np.tile(inst.px @ q, (q.shape[0], 1))
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok((1 - mid) * q + mid * flat):
            hi = mid
        else:
            lo = mid
    return (1 - hi) * q + hi * flat


def _starts(inst: _Instance, k: int, restarts: int, rng) -> list[np.ndarray]:
    n_x = len(inst.px)
    starts = []
    if k >= n_x:
        ident = np.zeros((n_x, k))
        ident[np.arange(n_x), np.arange(n_x)] = 1.0
        starts.append(ident)
        # X revealed with probability a, else an erasure symbol
        for a in (0.25, 0.5, 0.75):
            if k > n_x:
                e = ident * a
                e[:, n_x] = 1 - a
                starts.append(e)
    while len(starts) < restarts:
        starts.append(rng.dirichlet(np.ones(k), size=n_x))
    return starts[:max(restarts, 1)]


def _posterior_grid(n_x: int, budget: int) -> np.ndarray:
    m = 1
    while math.comb(m + 1 + n_x - 1, n_x - 1) <= budget:
        m += 1
    return compositions(m, n_x) / m


def _posterior_lp(inst: _Instance, c_w: float, k: int, budget: int) -> np.ndarray | None:
    """Best splitting of ``P_X`` into posteriors ``P(X|U=u)`` from a fixed grid.

    With posteriors fixed, both informations are linear in the weights
    ``P(u)``, so the problem is a linear program. A basic optimal solution
    uses at most ``|X| + 1`` posteriors.
    """
    from scipy.optimize import linprog

    n_x = len(inst.px)
    post = _posterior_grid(n_x, budget)
    w = inst.pxy / inst.px[:, None]                 # P(y|x)
    h_post = _h(post)
    h_out = _h(post @ w)
    hx, hy = float(_h(inst.px)), float(_h(inst.py))
    # gap = H(X) - H(Y) - sum_m w_m (H(pi_m) - H(pi_m W)) <= c_w
    res = linprog(h_post, A_ub=-(h_post - h_out)[None, :], b_ub=[c_w - hx + hy],
                  A_eq=post.T, b_eq=inst.px, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    weights = res.x
    keep = np.argsort(-weights)[:k]
    keep = keep[weights[keep] > 1e-12]
    q = np.zeros((n_x, k))
    q[:, :len(keep)] = (weights[keep][None, :] * post[keep].T) / inst.px[:, None]
    q = np.maximum(q, 0.0)
    return q / q.sum(axis=1, keepdims=True)


def _best(prob: CapacityProblem, inst: _Instance, candidates):
    best_q, best_v = None, -np.inf
    for q in candidates:
        q = _repair(inst, q, prob.c_w, prob.tol)
        v = float(inst.informations(q)[0])
        if v > best_v + 1e-12:
            best_q, best_v = q, v
    return best_q, best_v


def _climb(inst, q0, c_w, tol, schedule, iters):
    q = np.maximum(q0, 1e-12)
    q /= q.sum(axis=1, keepdims=True)
    for mu in schedule:
        q = _ascend(inst, q, c_w, mu, iters)
    return _repair(inst, q, c_w, tol)


def solve_ascent(prob: CapacityProblem, restarts: int = 8, seed: int = 0,
                 iters: int = 200, warm_starts=(), lp_budget: int = 20_000) -> CapacitySolution:
    """Penalized multiplicative ascent from several starting points.

    The first start is the posterior-grid linear program (skipped when
    ``lp_budget`` is 0); the others are fixed structured guesses (U = X,
    erasures) and Dirichlet draws. Each start climbs through the penalty
    schedule, is repaired to feasibility, and the best feasible value wins
    (earliest start on ties). Starts are also kept unclimbed as candidates,
    so a good start is never lost to the ascent.
    """
    if restarts < 1:
        raise ValidationError("restarts must be at least 1")
    inst = _Instance(prob.dense)
    k = prob.u_cardinality
    rng = derive_rng(seed, "capacity", k)
    seeded = [np.asarray(w, dtype=float) for w in warm_starts]
    lp = _posterior_lp(inst, prob.c_w, k, lp_budget) if lp_budget else None
    if lp is not None:
        seeded.append(lp)
    finals, values = [], []
    for q0 in seeded:
        q = _climb(inst, q0, prob.c_w, prob.tol, PENALTY_SCHEDULE[3:], iters)
        finals.append(q)
        values.append(float(inst.informations(q)[0]))
    for q0 in _starts(inst, k, restarts, rng):
        q = _climb(inst, q0, prob.c_w, prob.tol, PENALTY_SCHEDULE, iters)
        finals.append(q)
        values.append(float(inst.informations(q)[0]))
    best_q, _ = _best(prob, inst, seeded + finals)
    return _solution(prob, inst, best_q, "AlternatingAscent", values)


def solve_sweep(p_xy: JointPmf, c_values, u_cardinality: int | None = None,
                restarts: int = 8, seed: int = 0) -> list[CapacitySolution]:
    """Ascent over increasing ``c_w``, warm-starting each from the previous argmax.

    A point feasible for a smaller ``c_w`` stays feasible for a larger one,
    so the returned values are non-decreasing in ``c_w``. Results come back
    in the order of ``c_values``.
    """
    order = sorted(range(len(c_values)), key=lambda i: c_values[i])
    out: list = [None] * len(c_values)
    warm = []
    for i in order:
        sol = solve_ascent(CapacityProblem(p_xy, float(c_values[i]), u_cardinality),
                           restarts, seed, warm_starts=warm)
        out[i] = sol
        warm = [sol.argmax]
    return out
