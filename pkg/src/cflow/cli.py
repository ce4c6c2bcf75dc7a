"""Command-line front end.

Sub-commands::

    cflow solve  INPUT  [--algo A] [--eps E] [--audit M] [--oracle|--no-oracle] [--trace] [--output P]
    cflow verify INPUT  (as solve; the certificate is required)
    cflow reduce KIND INPUT [--eps E] [--algo A] [--output P]
    cflow bench  [--count N] [--seed S] [--algo A] [--eps E] [--output P]

Exit status: 0 on success, 1 when a certificate or audit fails, 2 on bad
input (including an explicitly requested oracle that exceeds its caps).
"""

from __future__ import annotations

import argparse
import random
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import reductions
from .generators import quadratic_weights, random_linear_instance, random_network
from .network import Network, NetworkError, parse_network, serialize_network
from .solver import AUDIT_MODES, SolveResult, SolverError, solve
from .verify import certify
from .weights import Linear, Quadratic

ALGORITHMS = ("simple", "scaling", "concave")
REDUCTIONS = ("assignment", "chained", "scheduling", "mincost", "multisource")


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    algo: str | None = None
    eps: Fraction = Fraction(1, 16)
    audit: str = "every"
    oracle: bool | None = None
    trace: bool = False
    output: str | None = None
    seed: int = 0
    kind: str | None = None
    count: int = 20


class InputError(Exception):
    pass


def _num(v: float | Fraction) -> str:
    return f"{float(v):.12g}"


def _read(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _pick_algo(net: Network, algo: str | None) -> str:
    if algo:
        return algo
    return "scaling" if net.is_linear else "concave"


def _solve_lines(result: SolveResult, trace_lines: list[str]) -> list[str]:
    net = result.network
    out = [f"f {net.names[e.tail]} {net.names[e.head]} {_num(result.flow[e.index])}" for e in net.edges]
    out.append("# solve")
    out += [
        f"algorithm: {result.mode}",
        f"eps_effective: {_num(result.grid.eps)}",
        f"w_min: {_num(result.grid.w_min)}",
        f"w_max: {_num(result.grid.w_max)}",
        f"scales: {result.scales}",
        f"depth: {net.depth}",
        f"scale_iterations: {' '.join(map(str, result.scale_iterations))}",
        f"objective: {_num(result.objective)}",
        f"flow_value: {_num(result.augmented)}",
        f"loose_final_edges: {result.loose_final_edges}",
    ]
    if trace_lines:
        out.append("# trace")
        out += trace_lines
    return out


def _run_solve(cfg: RunConfig) -> tuple[int, list[str]]:
    net = parse_network(_read(cfg.input))
    algo = _pick_algo(net, cfg.algo)
    trace_lines: list[str] = []
    result = solve(net, cfg.eps, algo, audit=cfg.audit,
                   trace=trace_lines.append if cfg.trace else None)
    lines = _solve_lines(result, trace_lines)
    status = 0
    want_oracle = cfg.oracle if cfg.oracle is not None else True
    if want_oracle:
        cert = certify(result)
        if cert.status != "certified" and (cfg.oracle or cfg.command == "verify"):
            raise InputError(cert.status)
        lines.append("# certificate")
        lines += cert.lines()
        lines.append(f"duals: {' '.join(_num(y) for y in result.duals())}")
        if cert.failed:
            status = 1
    lines.append("# audit")
    lines += result.audit.lines()
    if not result.audit.ok:
        status = 1
    return status, lines


# --- reduction sub-formats ----------------------------------------------------------

def _tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        toks = line.split("#", 1)[0].split()
        if toks:
            yield lineno, toks


def _frac(tok: str, lineno: int) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"line {lineno}: bad number {tok!r}") from None


def build_reduction(kind: str, text: str, eps: Fraction) -> reductions.ReductionMap:
    """Parse a reduction sub-format (see the module docs of ``reductions``)."""
    def bad(lineno: int, toks: list[str]):
        return InputError(f"line {lineno}: cannot parse {' '.join(toks)!r} for {kind}")

    if kind == "assignment":
        left, right, pairs = {}, {}, []
        for ln, t in _tokens(text):
            if t[0] in ("left", "right") and len(t) == 3:
                (left if t[0] == "left" else right)[t[1]] = _frac(t[2], ln)
            elif t[0] == "pair" and len(t) == 4:
                pairs.append((t[1], t[2], _frac(t[3], ln)))
            else:
                raise bad(ln, t)
        return reductions.assignment_to_network(left, right, pairs, eps=eps)
    if kind == "chained":
        sets: dict[str, list[str]] = {"x": [], "y": [], "z": []}
        links: dict[str, list] = {"xy": [], "yz": []}
        for ln, t in _tokens(text):
            if t[0] in sets and len(t) == 2:
                sets[t[0]].append(t[1])
            elif t[0] in links and len(t) == 4:
                links[t[0]].append((t[1], t[2], _frac(t[3], ln)))
            else:
                raise bad(ln, t)
        return reductions.chained_matching_to_network(sets["x"], sets["y"], sets["z"],
                                                      links["xy"], links["yz"], eps=eps)
    if kind == "scheduling":
        caps: list[Fraction] = []
        jobs = []
        for ln, t in _tokens(text):
            if t[0] == "days" and len(t) >= 2:
                caps = [_frac(v, ln) for v in t[1:]]
            elif t[0] == "job" and len(t) == 5:
                try:
                    jobs.append((t[1], int(t[2]), int(t[3]), _frac(t[4], ln)))
                except ValueError:
                    raise bad(ln, t) from None
            else:
                raise bad(ln, t)
        return reductions.scheduling_to_network(jobs, caps, eps=eps)
    if kind == "mincost":
        reward = None
        body = []
        for line in text.splitlines():
            toks = line.split("#", 1)[0].split()
            if toks and toks[0] == "reward":
                if len(toks) != 2:
                    raise InputError("expected 'reward <Q>'")
                reward = Fraction(toks[1])
            else:
                body.append(line)
        if reward is None:
            raise InputError("mincost input needs a 'reward <Q>' line")
        return reductions.mincost_with_reward(parse_network("\n".join(body)), reward)
    if kind == "multisource":
        edges, sources = [], []
        for ln, t in _tokens(text):
            if t[0] == "edge" and len(t) == 4:
                edges.append((t[1], t[2], _frac(t[3], ln)))
            elif t[0] == "source" and len(t) == 4 and t[2] == "lin":
                w = _frac(t[3], ln)
                sources.append((t[1], lambda c, w=w: Linear(w, c)))
            elif t[0] == "source" and len(t) == 5 and t[2] == "quad":
                a, b = float(_frac(t[3], ln)), float(_frac(t[4], ln))
                sources.append((t[1], lambda c, a=a, b=b: Quadratic(a, b, c)))
            else:
                raise bad(ln, t)
        return reductions.multisource_concave_to_network(edges, sources, eps=eps)
    raise InputError(f"unknown reduction {kind!r}")


def _run_reduce(cfg: RunConfig) -> tuple[int, list[str]]:
    rm = build_reduction(cfg.kind, _read(cfg.input), cfg.eps)
    lines = serialize_network(rm.network).splitlines()
    lines.append("# back-map")
    lines += [f"# {line}" for line in rm.lines()]
    status = 0
    if cfg.algo:
        eps = cfg.eps / 8 if rm.kind == "mincost" else cfg.eps
        result = solve(rm.network, eps, cfg.algo, audit=cfg.audit)
        app = rm.application(result.flow)
        lines.append("# application")
        lines.append(f"# objective: {_num(app.objective)}")
        lines.append(f"# feasible: {'yes' if app.feasible else 'no'}")
        for key, val in sorted(app.solution.items(), key=lambda kv: str(kv[0])):
            if isinstance(val, dict):
                for k2, v2 in sorted(val.items(), key=lambda kv: str(kv[0])):
                    lines.append(f"# {key} {' '.join(map(str, k2))}: {_num(v2)}")
            else:
                label = " ".join(map(str, key)) if isinstance(key, tuple) else str(key)
                lines.append(f"# {label}: {_num(val)}")
        lines += [f"# note: {n}" for n in app.notes]
        if not result.audit.ok:
            status = 1
    return status, lines


def _run_bench(cfg: RunConfig) -> tuple[int, list[str]]:
    algo = cfg.algo or "scaling"
    lines = ["index,n,m,depth,scales,iterations,objective,reference,ratio,passed,audit_violations"]
    status = 0
    for k in range(cfg.count):
        seed = cfg.seed * 100_003 + k
        if algo == "concave":
            rng = random.Random(seed)
            depth = rng.randint(1, 4)
            net = random_network(rng, n=rng.randint(depth + 1, 10), m=rng.randint(depth, 16),
                                 depth=depth, weight=quadratic_weights(1.0, 8.0))
        else:
            net = random_linear_instance(seed, unit=algo == "simple",
                                         w_max=16 if algo == "simple" else 64)
        result = solve(net, cfg.eps, algo, audit=cfg.audit)
        cert = certify(result)
        ratio = cert.ratio
        lines.append(",".join([
            str(k), str(net.n), str(net.m), str(net.depth), str(result.scales),
            str(result.iterations), _num(result.objective),
            "" if cert.reference is None else _num(cert.reference),
            "" if ratio is None else _num(ratio),
            {True: "yes", False: "no", None: ""}[cert.passed],
            str(result.audit.violations),
        ]))
        if cert.failed or not result.audit.ok:
            status = 1
    return status, lines


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cflow", description="Approximate max-weight flow on shallow DAGs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--algo", choices=ALGORITHMS)
        sp.add_argument("--eps", type=Fraction, default=Fraction(1, 16),
                        help="accuracy in (0, 1); rounded down to a power of two")
        sp.add_argument("--audit", choices=AUDIT_MODES, default="every")
        sp.add_argument("--output", help="write the report here instead of stdout")

    for name in ("solve", "verify"):
        sp = sub.add_parser(name, help=f"{name} a network file")
        sp.add_argument("input")
        common(sp)
        sp.add_argument("--oracle", action=argparse.BooleanOptionalAction, default=None,
                        help="compare with the exact oracle (default: on)")
        sp.add_argument("--trace", action="store_true", help="append one line per iteration")
        sp.add_argument("--seed", type=int, default=0)
    sp = sub.add_parser("reduce", help="encode an application instance as a network")
    sp.add_argument("kind", choices=REDUCTIONS)
    sp.add_argument("input")
    common(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp = sub.add_parser("bench", help="solve seeded random instances and print CSV")
    common(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=20)
    return p


def run(cfg: RunConfig) -> tuple[int, list[str]]:
    if not 0 < cfg.eps < 1:
        raise InputError("eps must lie in (0, 1)")
    if cfg.command in ("solve", "verify"):
        if cfg.command == "verify" and cfg.oracle is None:
            cfg.oracle = True
        return _run_solve(cfg)
    if cfg.command == "reduce":
        return _run_reduce(cfg)
    return _run_bench(cfg)


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        input=getattr(args, "input", None),
        algo=args.algo,
        eps=args.eps,
        audit=args.audit,
        oracle=getattr(args, "oracle", None),
        trace=getattr(args, "trace", False),
        output=args.output,
        seed=args.seed,
        kind=getattr(args, "kind", None),
        count=getattr(args, "count", 20),
    )
    try:
        status, lines = run(cfg)
    except (InputError, NetworkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    text = "\n".join(lines) + "\n"
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
