"""Simulation-based equivalence oracle and waterfall runner.

check_equiv decides (or falsifies) equivalence of two designs with matching
ports: exhaustively when the joint input space is small enough, otherwise by
seeded random sampling, optionally delegating to an external checker command.
run_waterfall discharges every obligation of a waterfall — in memory or from
an emitted directory — and folds the verdicts into a single report.
"""

from __future__ import annotations

import json
import random
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frontend import Design, emit_sv, parse_sexpr
from .ir import evaluate, evaluate_many, vectorizable


class OracleError(Exception):
    pass


@dataclass
class Verdict:
    status: str                       # pass | fail | unproven
    method: str                       # exhaustive | random(n) | external | ...
    elapsed: float
    counterexample: dict | None = None
    note: str | None = None

    def to_json(self) -> dict:
        out = {"status": self.status, "method": self.method,
               "elapsed": round(self.elapsed, 6)}
        if self.counterexample is not None:
            out["counterexample"] = dict(self.counterexample)
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class OracleConfig:
    max_exhaustive_bits: int = 20
    samples: int = 100_000
    seed: int = 0
    external_cmd: str | None = None   # template with {left} {right}
    trivial_samples: int = 1024       # reduced budget for trivial-hint steps


@dataclass
class WaterfallReport:
    verdicts: list[tuple[dict, Verdict]] = field(default_factory=list)
    overall: str = "unproven"         # pass | fail | unproven
    assume_guarantee: str = "unproven"

    def to_json(self) -> dict:
        return {
            "overall": self.overall,
            "assume_guarantee": self.assume_guarantee,
            "obligations": [dict(ob, verdict=v.to_json())
                            for ob, v in self.verdicts],
        }


def _check_ports(d1: Design, d2: Design) -> None:
    if d1.inputs != d2.inputs:
        raise OracleError(
            f"input port mismatch: {d1.name} has "
            f"{[(n, str(a)) for n, a in d1.inputs]}, {d2.name} has "
            f"{[(n, str(a)) for n, a in d2.inputs]}")
    if d1.output[1] != d2.output[1]:
        raise OracleError(
            f"output annotation mismatch: {d1.output[1]} vs {d2.output[1]}")


def _exhaustive(d1: Design, d2: Design, t0: float) -> Verdict:
    names = [n for n, _ in d1.inputs]
    anns = [a for _, a in d1.inputs]
    if vectorizable(d1.body) and vectorizable(d2.body):
        axes = [np.arange(a.lo, a.hi + 1, dtype=np.int64) for a in anns]
        grids = np.meshgrid(*axes, indexing="ij") if axes else []
        env = {n: g.ravel() for n, g in zip(names, grids)}
        if not env:
            env = {}
        v1 = evaluate_many(d1.body, env)
        v2 = evaluate_many(d2.body, env)
        bad = np.nonzero(v1 != v2)[0]
        if bad.size:
            i = int(bad[0])   # meshgrid "ij" ravel order is lexicographic
            cex = {n: int(env[n][i]) for n in names}
            return Verdict("fail", "exhaustive", time.time() - t0, cex)
        return Verdict("pass", "exhaustive", time.time() - t0)
    import itertools
    for combo in itertools.product(*(range(a.lo, a.hi + 1) for a in anns)):
        env = dict(zip(names, combo))
        if evaluate(d1.body, env) != evaluate(d2.body, env):
            return Verdict("fail", "exhaustive", time.time() - t0, env)
    return Verdict("pass", "exhaustive", time.time() - t0)


def _sample(d1: Design, d2: Design, samples: int, seed: int,
            t0: float) -> Verdict:
    names = [n for n, _ in d1.inputs]
    anns = [a for _, a in d1.inputs]
    method = f"random({samples})"
    if vectorizable(d1.body) and vectorizable(d2.body):
        rng = np.random.default_rng(seed)
        done = 0
        while done < samples:
            chunk = min(samples - done, 1 << 16)
            env = {n: rng.integers(a.lo, a.hi + 1, size=chunk, dtype=np.int64)
                   for n, a in zip(names, anns)}
            v1 = evaluate_many(d1.body, env)
            v2 = evaluate_many(d2.body, env)
            bad = np.nonzero(v1 != v2)[0]
            if bad.size:
                i = int(bad[0])
                cex = {n: int(env[n][i]) for n in names}
                return Verdict("fail", method, time.time() - t0, cex)
            done += chunk
        return Verdict("unproven", method, time.time() - t0,
                       note="no counterexample found by sampling")
    rng = random.Random(seed)
    for _ in range(samples):
        env = {n: rng.randint(a.lo, a.hi) for n, a in zip(names, anns)}
        if evaluate(d1.body, env) != evaluate(d2.body, env):
            return Verdict("fail", method, time.time() - t0, env)
    return Verdict("unproven", method, time.time() - t0,
                   note="no counterexample found by sampling")


def _external(d1: Design, d2: Design, cmd_template: str,
              t0: float) -> Verdict:
    with tempfile.TemporaryDirectory(prefix="wordec-ec-") as tmp:
        left = Path(tmp) / f"{d1.name}.sv"
        right = Path(tmp) / f"{d2.name}.sv"
        left.write_text(emit_sv(d1))
        right.write_text(emit_sv(d2))
        cmd = [part.format(left=str(left), right=str(right))
               for part in shlex.split(cmd_template)]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True,
                                  timeout=600)
        except (OSError, subprocess.TimeoutExpired) as e:
            return Verdict("unproven", "external", time.time() - t0,
                           note=f"external checker failed: {e}")
        if proc.returncode == 0:
            return Verdict("pass", "external", time.time() - t0)
        if proc.returncode == 1:
            return Verdict("fail", "external", time.time() - t0,
                           note=(proc.stdout.strip() or None))
        return Verdict("unproven", "external", time.time() - t0,
                       note=f"external checker exit {proc.returncode}")


def check_equiv(d1: Design, d2: Design,
                cfg: OracleConfig | None = None, *,
                hint: str | None = None) -> Verdict:
    """Decide d1 ≅ d2.  Exhaustive when the joint input space fits in
    cfg.max_exhaustive_bits; otherwise sampled, then delegated to the
    external checker if one is configured.  Exhaustive failures report the
    lexicographically first counterexample (inputs enumerated low-to-high,
    in port order)."""
    cfg = cfg or OracleConfig()
    _check_ports(d1, d2)
    t0 = time.time()
    if d1.body == d2.body:
        return Verdict("pass", "exhaustive", time.time() - t0)
    total_bits = sum(a.width for _, a in d1.inputs)
    if total_bits <= cfg.max_exhaustive_bits:
        return _exhaustive(d1, d2, t0)
    samples = cfg.trivial_samples if hint == "trivial" else cfg.samples
    v = _sample(d1, d2, samples, cfg.seed, t0)
    if v.status == "fail":
        return v
    if cfg.external_cmd:
        return _external(d1, d2, cfg.external_cmd, t0)
    return v


def _obligation_dicts(w) -> tuple[list[dict], list[Design | None]]:
    designs = [d for _, d in w.designs()]
    stems = [stem for stem, _ in w.designs()]
    obs = []
    for ob in w.obligations():
        obs.append({"left": stems[ob.left], "right": stems[ob.right],
                    "rule": ob.rule, "checker_hint": ob.checker_hint,
                    "kind": ob.kind,
                    "_li": ob.left, "_ri": ob.right})
    return obs, designs


def _run(obs: list[dict], lookup, cfg: OracleConfig) -> WaterfallReport:
    """Check each non-final obligation, then derive the Assume-Guarantee
    verdict from its premises.  `lookup(ob)` returns (left, right) designs
    or raises OracleError for missing/broken artifacts."""
    rep = WaterfallReport()
    premises_pass = True
    any_fail = False
    for ob in obs:
        public = {k: v for k, v in ob.items() if not k.startswith("_")}
        if ob["kind"] == "assume-guarantee":
            status = "pass" if premises_pass else (
                "fail" if any_fail else "unproven")
            v = Verdict(status, "assume-guarantee", 0.0,
                        note=None if premises_pass
                        else "not all premises discharged")
            rep.verdicts.append((public, v))
            rep.assume_guarantee = status
            continue
        try:
            left, right = lookup(ob)
            v = check_equiv(left, right, cfg, hint=ob["checker_hint"])
        except OracleError as e:
            v = Verdict("unproven", "none", 0.0, note=str(e))
        rep.verdicts.append((public, v))
        if v.status != "pass":
            premises_pass = False
        if v.status == "fail":
            any_fail = True
    statuses = [v.status for _, v in rep.verdicts]
    rep.overall = ("pass" if all(s == "pass" for s in statuses)
                   else "fail" if "fail" in statuses else "unproven")
    return rep


def run_waterfall(w, cfg: OracleConfig | None = None) -> WaterfallReport:
    """Discharge every obligation of an in-memory waterfall."""
    cfg = cfg or OracleConfig()
    obs, designs = _obligation_dicts(w)
    return _run(obs, lambda ob: (designs[ob["_li"]], designs[ob["_ri"]]), cfg)


def run_waterfall_dir(outdir: str | Path,
                      cfg: OracleConfig | None = None) -> WaterfallReport:
    """Discharge an emitted waterfall directory (manifest.json + steps/)."""
    cfg = cfg or OracleConfig()
    outdir = Path(outdir)
    manifest = json.loads((outdir / "manifest.json").read_text())
    cache: dict[str, Design] = {}

    def load(stem: str) -> Design:
        if stem not in cache:
            p = outdir / "steps" / f"{stem}.ir"
            if not p.exists():
                raise OracleError(f"missing artifact: {p}")
            cache[stem] = parse_sexpr(p.read_text())
        return cache[stem]

    def lookup(ob):
        return load(ob["left"]), load(ob["right"])

    return _run(list(manifest["obligations"]), lookup, cfg)
