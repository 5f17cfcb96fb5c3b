"""Command-line driver: parse, saturate, extract, build the waterfall,
discharge obligations, report."""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import fixtures
from .egraph import EGraphError, init_pair, saturate
from .extract import (ExtractionError, export_lp, extract_greedy, extract_ilp,
                      shared)
from .frontend import Design, ParseError, emit_sexpr, parse_sexpr, parse_sv
from .oracle import OracleConfig, OracleError, check_equiv, run_waterfall, \
    run_waterfall_dir
from .proof import ProofError, build_waterfall, check_adjacency, \
    write_waterfall
from .rewrites import RuleError, baseline_rules, parse_rules, validate_rule

EXIT_PASS, EXIT_FAIL, EXIT_UNPROVEN, EXIT_ERROR = 0, 1, 2, 3

_USER_ERRORS = (ParseError, RuleError, EGraphError, ExtractionError,
                ProofError, OracleError, OSError, ValueError, KeyError)


def _load_design(path: str, fmt: str) -> Design:
    text = Path(path).read_text()
    if fmt == "auto":
        fmt = "sv" if Path(path).suffix in (".sv", ".v") else "ir"
    return parse_sv(text) if fmt == "sv" else parse_sexpr(text)


def _load_rules(spec: str) -> list:
    if spec == "builtin":
        return baseline_rules()
    if spec == "none":
        return []
    return parse_rules(Path(spec).read_text())


def _read_config(path: str | None) -> dict:
    """key=value file mirroring the CLI flags; '#' starts a comment."""
    if not path:
        return {}
    cfg: dict = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key=value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        # flag names whose click parameter is named differently
        aliases = {"out": "outdir", "spec": "spec_path", "impl": "impl_path",
                   "format": "fmt", "lp": "lp_path"}
        cfg[aliases.get(key, key)] = val
    return cfg


def _common(f):
    opts = [
        click.option("--format", "fmt", default="auto",
                     type=click.Choice(["auto", "sv", "ir"]),
                     help="Input format (auto: by file extension)."),
        click.option("--rules", default="builtin",
                     help="Rule file path, 'builtin', or 'none'."),
        click.option("--iter-limit", default=5, show_default=True),
        click.option("--node-limit", default=50_000, show_default=True),
        click.option("--time-limit", default=60.0, show_default=True),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _oracle_opts(f):
    opts = [
        click.option("--max-exhaustive-bits", default=20, show_default=True),
        click.option("--samples", default=100_000, show_default=True),
        click.option("--seed", default=0, show_default=True),
        click.option("--external-checker", default=None,
                     help='Command template, e.g. "ec-tool {left} {right}".'),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _oracle_cfg(max_exhaustive_bits, samples, seed, external_checker):
    return OracleConfig(max_exhaustive_bits=int(max_exhaustive_bits),
                        samples=int(samples), seed=int(seed),
                        external_cmd=external_checker)


def _saturated_graph(spec, impl, rules, iter_limit, node_limit, time_limit):
    g = init_pair(spec, impl)
    sh0 = shared(g)
    rep = saturate(g, rules, {"iter": int(iter_limit),
                              "nodes": int(node_limit),
                              "time": float(time_limit)})
    return g, rep, sh0


def _extract(g, method: str, timeout: float):
    if method == "greedy":
        return extract_greedy(g)
    return extract_ilp(g, timeout=float(timeout))


@click.group()
@click.option("--config", "config_path", default=None,
              type=click.Path(),
              help="key=value file providing defaults for any flag.")
@click.pass_context
def main(ctx, config_path):
    """Datapath equivalence assistant: e-graph rewriting, shared extraction,
    and a single-rewrite proof waterfall."""
    try:
        cfg = _read_config(config_path)
    except _USER_ERRORS as e:
        click.echo(f"error: {e}", err=True)
        ctx.exit(EXIT_ERROR)
    if cfg:
        ctx.default_map = {cmd: cfg for cmd in
                           ("check", "saturate", "extract", "waterfall",
                            "prove", "validate-rules", "bench")}


def _cmd_errors(fn):
    def wrapper(*args, **kw):
        try:
            return fn(*args, **kw)
        except _USER_ERRORS as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_ERROR)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _report_exit(report) -> int:
    if report.overall == "pass":
        return EXIT_PASS
    return EXIT_FAIL if report.overall == "fail" else EXIT_UNPROVEN


def _print_report(report):
    for ob, v in report.verdicts:
        line = f"  [{v.status:8s}] {ob['kind']:16s} {ob['rule']:20s} {v.method}"
        click.echo(line)
        if v.counterexample:
            click.echo(f"      counterexample: {v.counterexample}")
        if v.note:
            click.echo(f"      note: {v.note}")
    click.echo(f"overall: {report.overall}  "
               f"assume-guarantee: {report.assume_guarantee}")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path())
@click.option("--impl", "impl_path", required=True, type=click.Path())
@click.option("--out", "outdir", default="wordec-out", show_default=True)
@click.option("--extraction", default="ilp",
              type=click.Choice(["ilp", "greedy"]), show_default=True)
@click.option("--extract-timeout", default=10.0, show_default=True,
              help="Branch-and-bound budget; greedy incumbent on timeout.")
@click.option("--width-normalization/--no-width-normalization", default=True)
@click.option("--dump-graph", default=None, type=click.Path(),
              help="Write the saturated e-graph as JSON.")
@_common
@_oracle_opts
@_cmd_errors
def check(spec_path, impl_path, outdir, extraction, extract_timeout,
          width_normalization, dump_graph, fmt, rules, iter_limit,
          node_limit, time_limit,
          max_exhaustive_bits, samples, seed, external_checker):
    """Full flow: saturate, extract, build the waterfall, prove, report."""
    spec = _load_design(spec_path, fmt)
    impl = _load_design(impl_path, fmt)
    rls = _load_rules(rules)
    g, rep, _ = _saturated_graph(spec, impl, rls, iter_limit, node_limit,
                                 time_limit)
    if dump_graph:
        Path(dump_graph).write_text(
            json.dumps(g.dump(shared(g)), indent=2, sort_keys=True) + "\n")
    res = _extract(g, extraction, extract_timeout)
    w = build_waterfall(g, spec, impl, res, rls,
                        normalize_widths=width_normalization)
    check_adjacency(w)
    manifest = write_waterfall(w, outdir)
    ocfg = _oracle_cfg(max_exhaustive_bits, samples, seed, external_checker)
    t0 = time.time()
    report = run_waterfall(w, ocfg)
    report_json = report.to_json()
    report_json["saturation"] = {
        "iterations": rep.iterations, "nodes": g.num_nodes(),
        "roots_merged": rep.roots_merged, "stop_reason": rep.stop_reason,
    }
    report_json["extraction"] = {"method": res.method,
                                 "objective": res.objective}
    (Path(outdir) / "report.json").write_text(
        json.dumps(report_json, indent=2, sort_keys=True) + "\n")
    click.echo(f"saturation: {rep.iterations} iterations, {g.num_nodes()} "
               f"nodes, roots merged: {rep.roots_merged} ({rep.stop_reason})")
    click.echo(f"extraction: {res.method}, objective {res.objective}")
    click.echo(f"waterfall: {len(manifest['obligations'])} obligations "
               f"-> {outdir} (proved in {time.time() - t0:.2f}s)")
    _print_report(report)
    sys.exit(_report_exit(report))


@main.command("saturate")
@click.option("--spec", "spec_path", required=True, type=click.Path())
@click.option("--impl", "impl_path", required=True, type=click.Path())
@click.option("--dump-graph", default=None, type=click.Path())
@_common
@_cmd_errors
def saturate_cmd(spec_path, impl_path, dump_graph, fmt, rules, iter_limit,
                 node_limit, time_limit):
    """Grow the two-rooted e-graph and report saturation statistics."""
    spec = _load_design(spec_path, fmt)
    impl = _load_design(impl_path, fmt)
    g, rep, sh0 = _saturated_graph(spec, impl, _load_rules(rules),
                                   iter_limit, node_limit, time_limit)
    sh1 = shared(g)
    if dump_graph:
        Path(dump_graph).write_text(
            json.dumps(g.dump(sh1), indent=2, sort_keys=True) + "\n")
    click.echo(f"iterations: {rep.iterations} ({rep.stop_reason})")
    click.echo(f"nodes: {' -> '.join(map(str, rep.node_counts))}")
    click.echo(f"classes: {' -> '.join(map(str, rep.class_counts))}")
    click.echo(f"shared classes: {len(sh0.c_shared)} -> {len(sh1.c_shared)}")
    click.echo(f"roots merged: {rep.roots_merged}")


@main.command("extract")
@click.option("--spec", "spec_path", required=True, type=click.Path())
@click.option("--impl", "impl_path", required=True, type=click.Path())
@click.option("--extraction", default="ilp",
              type=click.Choice(["ilp", "greedy"]), show_default=True)
@click.option("--extract-timeout", default=10.0, show_default=True,
              help="Branch-and-bound budget; greedy incumbent on timeout.")
@click.option("--lp", "lp_path", default=None, type=click.Path(),
              help="Export the extraction ILP in CPLEX LP format.")
@_common
@_cmd_errors
def extract_cmd(spec_path, impl_path, extraction, extract_timeout, lp_path,
                fmt, rules, iter_limit, node_limit, time_limit):
    """Saturate, then extract the maximally-shared design pair."""
    spec = _load_design(spec_path, fmt)
    impl = _load_design(impl_path, fmt)
    g, _, _ = _saturated_graph(spec, impl, _load_rules(rules),
                               iter_limit, node_limit, time_limit)
    if lp_path:
        Path(lp_path).write_text(export_lp(g))
    res = _extract(g, extraction, extract_timeout)
    click.echo(f"method: {res.method}  objective: {res.objective}  "
               f"shared nodes: {res.shared_node_count}")
    click.echo("S*: " + emit_sexpr(Design("s_star", spec.inputs,
                                          (spec.output[0], res.s_star.out),
                                          res.s_star)).strip())
    click.echo("I*: " + emit_sexpr(Design("i_star", spec.inputs,
                                          (spec.output[0], res.i_star.out),
                                          res.i_star)).strip())


@main.command("waterfall")
@click.option("--spec", "spec_path", required=True, type=click.Path())
@click.option("--impl", "impl_path", required=True, type=click.Path())
@click.option("--out", "outdir", default="wordec-out", show_default=True)
@click.option("--extraction", default="ilp",
              type=click.Choice(["ilp", "greedy"]), show_default=True)
@click.option("--extract-timeout", default=10.0, show_default=True,
              help="Branch-and-bound budget; greedy incumbent on timeout.")
@click.option("--width-normalization/--no-width-normalization", default=True)
@_common
@_cmd_errors
def waterfall_cmd(spec_path, impl_path, outdir, extraction, extract_timeout,
                  width_normalization, fmt, rules, iter_limit, node_limit,
                  time_limit):
    """Build and emit the waterfall directory without proving it."""
    spec = _load_design(spec_path, fmt)
    impl = _load_design(impl_path, fmt)
    rls = _load_rules(rules)
    g, _, _ = _saturated_graph(spec, impl, rls, iter_limit, node_limit,
                               time_limit)
    res = _extract(g, extraction, extract_timeout)
    w = build_waterfall(g, spec, impl, res, rls,
                        normalize_widths=width_normalization)
    check_adjacency(w)
    manifest = write_waterfall(w, outdir)
    click.echo(f"{len(manifest['designs'])} designs, "
               f"{len(manifest['obligations'])} obligations -> {outdir}")


@main.command("prove")
@click.argument("outdir", type=click.Path())
@_oracle_opts
@_cmd_errors
def prove_cmd(outdir, max_exhaustive_bits, samples, seed, external_checker):
    """Discharge the obligations of an emitted waterfall directory."""
    ocfg = _oracle_cfg(max_exhaustive_bits, samples, seed, external_checker)
    report = run_waterfall_dir(outdir, ocfg)
    (Path(outdir) / "report.json").write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    _print_report(report)
    sys.exit(_report_exit(report))


@main.command("validate-rules")
@click.option("--rules", default="builtin",
              help="Rule file path or 'builtin'.")
@click.option("--maxw", default=4, show_default=True)
@_cmd_errors
def validate_rules_cmd(rules, maxw):
    """Audit every rule's condition by exhaustive small-width enumeration."""
    rls = _load_rules(rules)
    bad = 0
    for r in rls:
        t0 = time.time()
        violations = validate_rule(r, maxw=int(maxw))
        rid = getattr(r, "id", type(r).__name__)
        click.echo(f"{rid:20s} {len(violations):3d} violations "
                   f"({time.time() - t0:.1f}s)")
        for v in violations[:3]:
            click.echo(f"    {v}")
        bad += len(violations)
    sys.exit(EXIT_PASS if bad == 0 else EXIT_FAIL)


@main.command("bench")
@click.argument("names", nargs=-1)
@_oracle_opts
@click.option("--iter-limit", default=5, show_default=True)
@click.option("--node-limit", default=50_000, show_default=True)
@click.option("--time-limit", default=60.0, show_default=True)
@_cmd_errors
def bench_cmd(names, max_exhaustive_bits, samples, seed, external_checker,
              iter_limit, node_limit, time_limit):
    """Run bundled benchmark fixtures end to end and print a table."""
    names = list(names) or fixtures.names()
    rls = baseline_rules()
    ocfg = _oracle_cfg(max_exhaustive_bits, samples, seed, external_checker)
    click.echo(f"{'name':12s} {'iters':>5s} {'nodes':>6s} {'merged':>6s} "
               f"{'obls':>4s} {'overall':>8s} {'time':>7s}")
    worst = EXIT_PASS
    for name in names:
        t0 = time.time()
        spec, impl = fixtures.load_pair(name)
        g, rep, _ = _saturated_graph(spec, impl, rls, iter_limit,
                                     node_limit, time_limit)
        res = _extract(g, "ilp", 10.0)
        w = build_waterfall(g, spec, impl, res, rls)
        report = run_waterfall(w, ocfg)
        worst = max(worst, _report_exit(report))
        click.echo(f"{name:12s} {rep.iterations:5d} {g.num_nodes():6d} "
                   f"{str(rep.roots_merged):>6s} {len(report.verdicts):4d} "
                   f"{report.overall:>8s} {time.time() - t0:6.2f}s")
    sys.exit(worst)


if __name__ == "__main__":
    main()
