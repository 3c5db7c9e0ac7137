"""Config-driven experiment pipelines.

One JSON config document drives every pipeline. All randomness descends
from the config ``seed`` (or ``--seed``), and outputs are written with
sorted keys and fixed float formatting so that the same config and seed
reproduce byte-identical files.

Config keys by pipeline::

    typ       pmf, joint (optional), nu, n, trials, consistency_trials
    lemma1    joint | source, nu, nu_prime, n, mode, trials
    markov    source, aux, nu, n, trials
    protocol  source, aux ("optimize" allowed), channel, link, ladder, n, trials
    capacity  source, channel | c_w, u_cardinality, method, restarts, grid_resolution
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import capacity as cap
from .channel import Dmc, LinkModel
from .dist import AuxChannel, CountablePmf, JointPmf, source_from_json
from .errors import MismatchedInstances, ValidationError
from .protocol import reports_to_csv, run_protocol
from .typicality import (TypicalityLadder, independent_pair_probability, verify_aep,
                         verify_consistency, verify_jaep, verify_markov_lemma)

GAP_CAVEAT = ("finite-n estimate of H(K)/n against the truncated-instance capacity; "
              "gaps at desk-scale n are expected and are not a test of the formula")


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


def fingerprint(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def aux_from_json(doc, x_symbols) -> AuxChannel:
    if isinstance(doc, str):
        doc = {"kind": doc}
    kind = doc.get("kind", "matrix")
    if kind == "copy":
        return AuxChannel.copy(tuple(x_symbols))
    if kind == "constant":
        return AuxChannel.constant(tuple(x_symbols))
    if kind == "bsc":
        return AuxChannel.binary_symmetric(float(doc["p"]))
    if kind == "matrix":
        return AuxChannel(tuple(doc["x_symbols"]), tuple(doc["u_symbols"]),
                          np.array(doc["rows"], dtype=float))
    raise ValidationError(f"unknown aux channel kind {kind!r}")


def _n_list(cfg) -> list[int]:
    n = cfg.get("n")
    ns = [n] if isinstance(n, int) else list(n or [])
    if not ns or any(not isinstance(v, int) or v < 1 for v in ns):
        raise ValidationError("config 'n' must be a positive integer or a non-empty list of them")
    return ns


def _require(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ValidationError(f"config is missing {', '.join(missing)}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write("#crforge-v1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    if v is None:
        return ""
    return v


@dataclass
class Artifacts:
    """Files produced by one pipeline, keyed by file name."""

    name: str
    report: dict
    files: dict

    def write(self, out: Path) -> list[Path]:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for fname, text in sorted(self.files.items()):
            p = out / fname
            p.write_text(text)
            paths.append(p)
        return paths


# --------------------------------------------------------------------------
# Pipelines
# --------------------------------------------------------------------------


_VERIFY_COLS = ("theorem", "n", "nu", "trials", "estimate", "ci_low", "ci_high",
                "deterministic_violations", "exact_cardinality", "cardinality_within")


def run_typ(cfg: Mapping, seed: int, workers: int = 1) -> Artifacts:
    _require(cfg, "nu", "trials")
    ns = _n_list(cfg)
    nu, trials = float(cfg["nu"]), int(cfg["trials"])
    pmf = CountablePmf.from_json(cfg["pmf"]) if "pmf" in cfg else None
    joint = JointPmf.from_json(cfg["joint"]) if "joint" in cfg else None
    if pmf is None and joint is None:
        raise ValidationError("typ needs a 'pmf' and/or a 'joint'")
    reports, files = [], {}
    for n in ns:
        rows = []
        if pmf is not None:
            r = verify_aep(pmf, nu, n, trials, seed)
            reports.append(r.to_json())
            rows.append(r)
        if joint is not None:
            r = verify_jaep(joint, nu, n, trials, seed)
            reports.append(r.to_json())
            rows.append(r)
            c = verify_consistency(joint, nu, n, int(cfg.get("consistency_trials", trials)), seed)
            reports.append({"theorem": "consistency", **c.to_json()})
        files[f"typ_n{n}.csv"] = _csv(_VERIFY_COLS, [[_fmt(getattr(r, k)) for k in _VERIFY_COLS]
                                                    for r in rows])
    doc = {"pipeline": "typ", "seed": seed, "reports": reports}
    files["typ.json"] = dumps(doc)
    return Artifacts("typ", doc, files)


_LEMMA1_COLS = ("n", "nu", "nu_prime", "mode", "probability", "mutual_information",
                "lower", "upper", "within")


def run_lemma1(cfg: Mapping, seed: int, workers: int = 1) -> Artifacts:
    _require(cfg, "nu", "nu_prime")
    if "joint" in cfg:
        joint = JointPmf.from_json(cfg["joint"])
    elif "source" in cfg:
        joint = source_from_json(cfg["source"]).joint()
    else:
        raise ValidationError("lemma1 needs a 'joint' or a 'source'")
    mode = cfg.get("mode", "exact")
    results, files = [], {}
    for n in _n_list(cfg):
        r = independent_pair_probability(joint, float(cfg["nu"]), float(cfg["nu_prime"]), n,
                                         mode, int(cfg.get("trials", 100_000)), seed)
        d = r.to_json()
        results.append(d)
        files[f"lemma1_n{n}.csv"] = _csv(_LEMMA1_COLS, [[_fmt(d[k]) for k in _LEMMA1_COLS]])
    doc = {"pipeline": "lemma1", "seed": seed, "reports": results}
    files["lemma1.json"] = dumps(doc)
    return Artifacts("lemma1", doc, files)


def run_markov(cfg: Mapping, seed: int, workers: int = 1) -> Artifacts:
    _require(cfg, "source", "aux", "nu", "trials")
    source = source_from_json(cfg["source"])
    p_xy = source.joint()
    aux = aux_from_json(cfg["aux"], p_xy.alphabets[0])
    tri = aux.compose(p_xy)
    reports, files = [], {}
    for n in _n_list(cfg):
        r = verify_markov_lemma(tri, float(cfg["nu"]), n, int(cfg["trials"]), seed,
                                sampler=source.sample if p_xy.truncation_loss > 0 else None)
        reports.append(r.to_json())
        files[f"markov_n{n}.csv"] = _csv(_VERIFY_COLS, [[_fmt(getattr(r, k)) for k in _VERIFY_COLS]])
    doc = {"pipeline": "markov", "seed": seed, "reports": reports}
    files["markov.json"] = dumps(doc)
    return Artifacts("markov", doc, files)


def _capacity_value(cfg, p_xy, seed) -> float:
    if "c_w" in cfg:
        return float(cfg["c_w"])
    return Dmc.from_json(cfg["channel"]).capacity


def solve_capacity(cfg: Mapping, seed: int) -> tuple[cap.CapacitySolution, dict]:
    _require(cfg, "source")
    if "channel" not in cfg and "c_w" not in cfg:
        raise ValidationError("capacity needs a 'channel' or a 'c_w'")
    source = source_from_json(cfg["source"])
    p_xy = source.joint()
    prob = cap.CapacityProblem(p_xy, _capacity_value(cfg, p_xy, seed), cfg.get("u_cardinality"))
    method = cfg.get("method", "ascent")
    extra = {}
    if method in ("brute_force", "both"):
        bf = cap.solve_brute_force(prob, int(cfg.get("grid_resolution", 64)))
        extra["brute_force"] = bf.to_json()
    if method in ("ascent", "both"):
        sol = cap.solve_ascent(prob, int(cfg.get("restarts", 8)), seed)
    elif method == "brute_force":
        sol = bf
    else:
        raise ValidationError(f"unknown capacity method {method!r}")
    return sol, {"c_w": prob.c_w, "u_cardinality": prob.u_cardinality, **extra}


def _instance(cfg) -> dict:
    chan = cfg.get("channel")
    return {"source": cfg.get("source"),
            "channel": chan if chan is not None else {"c_w": cfg.get("c_w")}}


def run_capacity(cfg: Mapping, seed: int, workers: int = 1) -> Artifacts:
    sol, info = solve_capacity(cfg, seed)
    inst = _instance(cfg)
    doc = {"pipeline": "capacity", "seed": seed, "instance": inst,
           "fingerprint": fingerprint(inst), **info, **sol.to_json(), "argmax": sol.argmax}
    files = {"capacity.json": dumps(doc),
             "capacity.csv": _csv(("c_w", "value", "constraint_slack", "method"),
                                  [[_fmt(info["c_w"]), _fmt(sol.value),
                                    _fmt(sol.constraint_slack), sol.method]])}
    return Artifacts("capacity", doc, files)


def _ladder(cfg) -> TypicalityLadder:
    if "ladder" not in cfg:
        raise ValidationError("protocol needs a 'ladder'")
    lad = cfg["ladder"]
    try:
        return TypicalityLadder(**{k: float(v) for k, v in lad.items()})
    except TypeError as exc:
        raise ValidationError(f"bad ladder keys: {exc}") from None


def run_protocol_sweep(cfg: Mapping, seed: int, workers: int = 1) -> Artifacts:
    _require(cfg, "source", "aux", "channel", "trials")
    ladder = _ladder(cfg)
    ns = _n_list(cfg)
    source = source_from_json(cfg["source"])
    channel = Dmc.from_json(cfg["channel"])
    link = LinkModel(**cfg.get("link", {}))
    p_xy = source.joint()
    if cfg["aux"] == "optimize":
        sol, _ = solve_capacity({**cfg, "c_w": channel.capacity}, seed)
        aux = sol.as_aux()
    else:
        aux = aux_from_json(cfg["aux"], p_xy.alphabets[0])
    reports = [run_protocol(source, aux, channel, link, n, ladder, int(cfg["trials"]), seed,
                            workers) for n in ns]
    inst = _instance(cfg)
    doc = {"pipeline": "protocol", "seed": seed, "instance": inst,
           "fingerprint": fingerprint(inst), "aux": aux.to_json(),
           "reports": [r.to_json() for r in reports]}
    files = {"protocol.json": dumps(doc), "protocol.csv": reports_to_csv(reports)}
    for r in reports:
        files[f"protocol_n{r.n}.csv"] = r.to_csv()
    return Artifacts("protocol", doc, files)


PIPELINES = {
    "typ": run_typ,
    "lemma1": run_lemma1,
    "markov": run_markov,
    "protocol": run_protocol_sweep,
    "capacity": run_capacity,
}


def run_experiment(command: str, cfg: Mapping, seed: int | None = None,
                   workers: int = 1) -> Artifacts:
    if command not in PIPELINES:
        raise ValidationError(f"unknown pipeline {command!r}")
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    return PIPELINES[command](cfg, seed, workers)


# --------------------------------------------------------------------------
# Achievability against the formula
# --------------------------------------------------------------------------


def compare_to_capacity(protocol_doc: Mapping, capacity_doc: Mapping) -> Artifacts:
    """Per-n ``(H(K)/n, capacity, gap)`` rows for a protocol sweep and a capacity solve."""
    for doc, want in ((protocol_doc, "protocol"), (capacity_doc, "capacity")):
        if doc.get("pipeline") != want:
            raise ValidationError(f"expected a {want} report, got {doc.get('pipeline')!r}")
    if protocol_doc["fingerprint"] != capacity_doc["fingerprint"]:
        raise MismatchedInstances(
            "protocol and capacity reports describe different source/channel instances "
            f"({protocol_doc['fingerprint']} vs {capacity_doc['fingerprint']})")
    value = float(capacity_doc["value"])
    rows = []
    for r in protocol_doc["reports"]:
        rows.append({"n": r["n"], "hk_rate": r["hk_rate"], "capacity": value,
                     "gap": value - r["hk_rate"], "degenerate": r["distinct_k"] <= 1,
                     "trials": r["trials"]})
    doc = {"pipeline": "compare", "fingerprint": protocol_doc["fingerprint"],
           "label": capacity_doc.get("label", "capacity"), "caveat": GAP_CAVEAT, "rows": rows}
    cols = ("n", "hk_rate", "capacity", "gap", "degenerate", "trials")
    files = {"gap.json": dumps(doc),
             "gap.csv": _csv(cols, [[_fmt(row[c]) for c in cols] for row in rows])}
    return Artifacts("compare", doc, files)
