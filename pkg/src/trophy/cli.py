"""Command-line front end: single solves and benchmark grids.

Usage::

    trophy solve --problem rosenbrock2 --bits 24,53 --out-dir out
    trophy bench grid.ini --jobs 2
    trophy problems

Manifest grammar (INI, read with :mod:`configparser`)::

    [suite]
    problems = beale, rosenbrock2      ; or
    max_dim = 100

    [run]
    out_dir = results                  ; relative to the manifest
    jobs = 1
    metric = adj_linear                ; profiled in profiles.csv
    cost_model = linear                ; summary-table column

    [solver tr-double]
    preset = tr-double

    [solver my-trophy]
    bits = 11, 24, 53
    omega = 0.8
    max_iter = 2000

Solver sections accept ``preset``, ``bits`` and any of ``tol``,
``max_iter``, ``delta0``, ``omega``, ``memory``, ``eta1``, ``eta2``,
``gamma_inc``, ``gamma_dec``.  ``bits`` overrides the preset's hierarchy.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import re
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import benchmark as bm
from .oracle import COST_MODELS, PrecisionHierarchy, UsageError, adjusted_calls, write_ledger_csv
from .problems import get_problem, list_problems, problem_names
from .solver import EVAL_FAILURE, FIRST_ORDER, SolverConfig, solve

__all__ = ["main", "RunManifest", "SolverSpec", "ManifestError", "parse_manifest", "PRESETS"]

EXIT_OK = 0
EXIT_UNSOLVED = 2
EXIT_EVAL_FAILURE = 3
EXIT_USAGE = 64
EXIT_DATAERR = 65

PRESETS: dict[str, tuple[int, ...]] = {
    "tr-double": (53,),
    "tr-single": (24,),
    "tr-half": (11,),
    "trophy-sd": (24, 53),
    "trophy-hsd": (11, 24, 53),
    "trophy-ladder": (8, 11, 17, 24, 53),
    "trophy-every5": tuple(range(8, 54, 5)),
}

# manifest key -> (SolverConfig field, parser)
_SOLVER_KEYS = {
    "tol": ("eps_tol", float),
    "max_iter": ("max_iter", int),
    "delta0": ("delta0", float),
    "omega": ("omega", float),
    "memory": ("lsr1_memory", int),
    "eta1": ("eta1", float),
    "eta2": ("eta2", float),
    "gamma_inc": ("gamma_inc", float),
    "gamma_dec": ("gamma_dec", float),
}

# reserved; every solve is deterministic
SEED_ENV = "TROPHY_SEED"


class ManifestError(ValueError):
    """Invalid manifest; ``str()`` carries ``path:line: field: message``."""


@dataclass(frozen=True)
class SolverSpec:
    name: str
    bits: tuple[int, ...]
    params: tuple[tuple[str, float | int], ...] = ()

    def config(self) -> SolverConfig:
        kwargs = {_SOLVER_KEYS[k][0]: v for k, v in self.params}
        return SolverConfig(hierarchy=PrecisionHierarchy.from_bits(self.bits), name=self.name, **kwargs)


@dataclass(frozen=True)
class RunManifest:
    problems: tuple[str, ...] = ()
    max_dim: int | None = None
    solvers: tuple[SolverSpec, ...] = ()
    out_dir: str = "results"
    jobs: int = 1
    metric: str = "adj_linear"
    cost_model: str = "linear"
    source: str | None = field(default=None, compare=False)

    def selected_problems(self):
        if self.problems:
            return [get_problem(n) for n in self.problems]
        return list_problems(self.max_dim)

    def to_text(self) -> str:
        """Canonical serialisation; parsing it returns an equal manifest."""
        lines = ["[suite]"]
        if self.problems:
            lines.append("problems = " + ", ".join(self.problems))
        if self.max_dim is not None:
            lines.append(f"max_dim = {self.max_dim}")
        lines += ["", "[run]", f"out_dir = {self.out_dir}", f"jobs = {self.jobs}",
                  f"metric = {self.metric}", f"cost_model = {self.cost_model}"]
        for s in self.solvers:
            lines += ["", f"[solver {s.name}]", "bits = " + ", ".join(map(str, s.bits))]
            lines += [f"{k} = {v!r}" for k, v in s.params]
        return "\n".join(lines) + "\n"


def _key_lines(text: str) -> dict[tuple[str, str | None], int]:
    """Line numbers of section headers and keys, for diagnostics."""
    where: dict[tuple[str, str | None], int] = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), i)
        elif section is not None and line and line[0] not in "#;":
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            where.setdefault((section, key), i)
    return where


def parse_manifest(text: str, source: str = "<manifest>") -> RunManifest:
    """Parse and validate manifest text.

    Raises
    ------
    ManifestError
        With ``source:line: section.key: reason`` diagnostics.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        raise ManifestError(f"{source}:{lineno or '?'}: syntax: {exc.message.splitlines()[0]}") from None
    lines = _key_lines(text)

    def fail(section: str, key: str | None, msg: str):
        lineno = lines.get((section, key)) or lines.get((section, None)) or "?"
        label = section if key is None else f"{section}.{key}"
        raise ManifestError(f"{source}:{lineno}: {label}: {msg}")

    def get(section: str, key: str, conv, default=None):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError):
            fail(section, key, f"cannot parse {raw!r}")

    known = {"suite", "run"}
    for sec in parser.sections():
        if sec not in known and not sec.startswith("solver "):
            fail(sec, None, "unknown section")

    # suite
    if not parser.has_section("suite"):
        fail("suite", None, "missing [suite] section")
    for key in parser.options("suite"):
        if key not in ("problems", "max_dim"):
            fail("suite", key, "unknown key")
    names = tuple(n.strip() for n in (get("suite", "problems", str, "") or "").split(",") if n.strip())
    max_dim = get("suite", "max_dim", int)
    for n in names:
        if n not in problem_names():
            fail("suite", "problems", f"unknown problem {n!r}")
    if max_dim is not None and max_dim < 1:
        fail("suite", "max_dim", "must be positive")
    if names:
        if max_dim is not None and any(get_problem(n).dim > max_dim for n in names):
            fail("suite", "max_dim", "listed problem exceeds max_dim")
        count = len(names)
    else:
        count = len(list_problems(max_dim))
    if count == 0:
        fail("suite", "problems" if parser.has_option("suite", "problems") else "max_dim",
             "suite selection is empty")

    # run
    run = {}
    if parser.has_section("run"):
        for key in parser.options("run"):
            if key not in ("out_dir", "jobs", "metric", "cost_model"):
                fail("run", key, "unknown key")
        run["out_dir"] = get("run", "out_dir", str, "results")
        run["jobs"] = get("run", "jobs", int, 1)
        run["metric"] = get("run", "metric", str, "adj_linear")
        run["cost_model"] = get("run", "cost_model", str, "linear")
        if run["jobs"] < 1:
            fail("run", "jobs", "must be at least 1")
        if run["metric"] not in bm.METRICS:
            fail("run", "metric", f"expected one of {', '.join(bm.METRICS)}")
        if run["cost_model"] not in COST_MODELS:
            fail("run", "cost_model", f"expected one of {', '.join(COST_MODELS)}")

    # solvers
    solvers = []
    for sec in parser.sections():
        if not sec.startswith("solver "):
            continue
        name = sec[len("solver "):].strip()
        if not name:
            fail(sec, None, "solver needs a name")
        bits = None
        params = {}
        for key in parser.options(sec):
            if key == "preset":
                preset = parser.get(sec, key).strip()
                if preset not in PRESETS:
                    fail(sec, key, f"unknown preset {preset!r}")
                bits = bits or PRESETS[preset]
            elif key == "bits":
                pass
            elif key in _SOLVER_KEYS:
                params[key] = get(sec, key, _SOLVER_KEYS[key][1])
            else:
                fail(sec, key, "unknown key")
        if parser.has_option(sec, "bits"):
            bits = get(sec, "bits", _parse_bits)
            if not bits or any(not 2 <= b <= 53 for b in bits):
                fail(sec, "bits", "levels must lie in 2..53")
            if any(a >= b for a, b in zip(bits, bits[1:])):
                fail(sec, "bits", "levels must be strictly increasing")
        if bits is None:
            fail(sec, None, "needs 'preset' or 'bits'")
        spec = SolverSpec(name, tuple(bits), tuple(sorted(params.items())))
        try:
            spec.config()
        except ValueError as exc:
            fail(sec, None, str(exc))
        solvers.append(spec)
    if not solvers:
        fail("suite", None, "no [solver ...] sections")
    if run.get("metric", "").startswith("adj_paper") or run.get("cost_model", "").startswith("paper"):
        for s in solvers:
            if any(b not in (11, 24, 53) for b in s.bits):
                fail(f"solver {s.name}", "bits", "table cost models only price 11/24/53-bit levels")

    return RunManifest(problems=names, max_dim=max_dim, solvers=tuple(solvers), source=source, **run)


def _parse_bits(raw: str) -> tuple[int, ...]:
    return tuple(int(b) for b in raw.replace("{", "").replace("}", "").split(",") if b.strip())


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """argparse with sysexits-style usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v: float) -> str:
    return f"{v:.6g}" if math.isfinite(v) else str(v)


def _atomic_dir_write(out_dir: Path, writers: dict) -> None:
    """Write every file into a temp dir, then move them into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".trophy-", dir=out_dir))
    try:
        for name, write in writers.items():
            write(tmp / name)
        for name in writers:
            os.replace(tmp / name, out_dir / name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def cmd_solve(args) -> int:
    try:
        problem = get_problem(args.problem)
    except KeyError:
        print(f"trophy solve: unknown problem {args.problem!r}; try 'trophy problems'", file=sys.stderr)
        return EXIT_USAGE
    try:
        bits = _parse_bits(args.bits)
        config = SolverConfig(
            hierarchy=PrecisionHierarchy.from_bits(bits),
            eps_tol=args.tol,
            max_iter=args.max_iter,
            delta0=args.delta0,
            omega=args.omega,
            lsr1_memory=args.memory,
            name="cli",
        )
        COST_MODELS[args.cost_model].weights(bits)
    except ValueError as exc:
        print(f"trophy solve: {exc}", file=sys.stderr)
        return EXIT_USAGE

    res = solve(problem, config)
    solver_name = "trophy" + str(config.hierarchy)
    out = Path(args.out_dir)
    _atomic_dir_write(out, {
        "history.csv": res.write_history_csv,
        "ledger.csv": lambda p: write_ledger_csv(p, [(problem.name, solver_name, res.ledger)]),
    })
    adj = adjusted_calls(res.ledger, args.cost_model)
    print(f"problem      {problem.name} (n={problem.dim})")
    print(f"hierarchy    {config.hierarchy}")
    print(f"status       {res.status}")
    print(f"iterations   {res.iterations}")
    print(f"final level  {res.hierarchy.bits[res.final_level]} bits")
    print(f"f            {res.f_final:.17g}")
    print(f"||g||        {res.gnorm_final:.17g}")
    print(f"adjusted     {adj:.17g} ({args.cost_model}, f-calls)")
    for b, f, g in res.ledger.rows():
        print(f"  {b:>2}-bit     f={f} g={g}")
    if res.status == FIRST_ORDER:
        return EXIT_OK
    if res.status == EVAL_FAILURE:
        return EXIT_EVAL_FAILURE
    return EXIT_UNSOLVED


def cmd_bench(args) -> int:
    path = Path(args.manifest)
    try:
        text = path.read_text()
    except OSError as exc:
        print(f"trophy bench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        manifest = parse_manifest(text, str(path))
    except ManifestError as exc:
        print(f"trophy bench: {exc}", file=sys.stderr)
        return EXIT_DATAERR

    out = Path(args.out_dir) if args.out_dir else path.parent / manifest.out_dir
    jobs = args.jobs or manifest.jobs
    configs = {s.name: s.config() for s in manifest.solvers}
    solvers = list(configs)
    records = bm.run_grid(manifest.selected_problems(), configs, jobs=jobs)
    _, _, ratios = bm.performance_ratios(records, manifest.metric, solvers)
    curves = bm.performance_profile(ratios, solvers)
    _atomic_dir_write(out, {
        "runs.csv": lambda p: bm.write_runs_csv(p, records),
        "profiles.csv": lambda p: bm.write_profiles_csv(p, curves),
        "ledger.csv": lambda p: bm.write_ledger_csv(p, records),
    })

    metric = "adj_" + manifest.cost_model.replace("-", "_")
    n_problems = len({r.problem for r in records})
    print(f"{n_problems} problems, {len(solvers)} solvers -> {out}")
    print(f"{'solver':<20} {'solved':>8} {'median ' + metric:>26}")
    for row in bm.summarize(records, solvers, metric):
        print(f"{row['solver']:<20} {row['solved']:>4}/{row['runs']:<3} {_fmt(row['median']):>26}")
    return EXIT_OK


def cmd_problems(args) -> int:
    for p in list_problems():
        print(f"{p.name:<20} n={p.dim:<4} {p.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trophy", description="Multi-precision trust-region solver and benchmark grid.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one suite problem")
    s.add_argument("--problem", required=True)
    s.add_argument("--bits", default="24,53", help="comma-separated increasing significand widths")
    s.add_argument("--tol", type=float, default=1e-5)
    s.add_argument("--max-iter", type=int, default=5000)
    s.add_argument("--delta0", type=float, default=1.0)
    s.add_argument("--omega", type=float, default=0.9)
    s.add_argument("--memory", type=int, default=10)
    s.add_argument("--cost-model", choices=sorted(COST_MODELS), default="linear")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a solver x problem grid from a manifest")
    b.add_argument("manifest")
    b.add_argument("--jobs", type=int, default=None, help="concurrent solves (default: manifest)")
    b.add_argument("--out-dir", default=None, help="override the manifest's output directory")
    b.set_defaults(func=cmd_bench)

    p = sub.add_parser("problems", help="list the test-problem suite")
    p.set_defaults(func=cmd_problems)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        print("trophy bench: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"trophy: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
