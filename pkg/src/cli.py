#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Command-line entry point of the W4 root finder.

Subcommands ``solve``, ``table``, ``basin`` and ``analyze`` (with the modes ``w-spectrum``,
``eigen-trace``, ``series`` and ``recurrence``). Payloads go to standard output, logs to
standard error. Exit codes: 0 success, 1 usage error, 2 no convergence or failed check,
3 singular decomposition.

Vector flags take comma-separated decimals. Negative values may follow the flag after a space
(``--x0 -2.5``) or be attached with ``=``.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

import artifacts
from analysis import (
    Preconditioner,
    degeneracy_series_check,
    eigen_trace,
    error_recurrence_check,
    w_spectrum_check,
)
from basin import basin_stats, compute_basin
from core import MethodKind, SolverConfig, Status, Vector, parse_vector
from exceptions import (
    InvalidConfigError,
    SingularDecompositionError,
    UnknownProblemError,
    UnsupportedMethodError,
)
from literals import (
    BASIN_CSV_FILE,
    BASIN_GRID_SIZE,
    BASIN_PGM_FILE,
    BASIN_STATS_FILE,
    DEFAULT_TOL,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_SINGULAR,
    EXIT_USAGE,
    NR_DTAU,
    RECURRENCE_STEPS,
    SERIES_XS,
    SERIES_Y,
    SOLVE_MAX_ITER,
    TABLE_METHODS,
    TABLE_X0S,
)
from problems import Problem, resolve
from solvers import run, run_batch

logger = logging.getLogger(__name__)

ROOT_DIR = Path(__file__).resolve().parent.parent
SUBCOMMANDS = ("solve", "table", "basin", "analyze")
# flags whose value may be a negative number or vector
VALUE_FLAGS = frozenset(
    ("--x0", "--x0s", "--x0-range", "--x", "--xs", "--y", "--dtau", "--tol")
    + ("--xmin", "--xmax", "--ymin", "--ymax")
)

_EXIT_CODES = {
    Status.CONVERGED: EXIT_OK,
    Status.MAX_ITER_EXCEEDED: EXIT_NOT_CONVERGED,
    Status.DIVERGED: EXIT_NOT_CONVERGED,
    Status.SINGULAR_DECOMPOSITION: EXIT_SINGULAR,
}


class UsageError(Exception):
    """Raised if the command line cannot be parsed."""

    def __init__(self, message: str):
        self.message = message

        super().__init__(self.message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")



def _is_negative_numbers(text: str) -> bool:
    if not text.startswith("-"):
        return False
    try:
        parse_vector(text)
    except InvalidConfigError:
        return False
    return True


def attach_negative_values(argv: Sequence[str]) -> List[str]:
    """Rewrite ``--x0 -2,4`` as ``--x0=-2,4``; argparse would read the value as a flag."""
    args = list(argv)
    out: List[str] = []
    k = 0
    while k < len(args):
        if args[k] in VALUE_FLAGS and k + 1 < len(args) and _is_negative_numbers(args[k + 1]):
            out.append(f"{args[k]}={args[k + 1]}")
            k += 2
        else:
            out.append(args[k])
            k += 1
    return out


@lru_cache(maxsize=None)
def load_descriptor(name: str) -> Dict[str, Any]:
    """Read one of the YAML descriptors shipped at the repository root."""
    with open(ROOT_DIR / name, "r", encoding="utf-8") as file:
        return yaml.safe_load(file)


def option_default(option: str) -> Any:
    """Default of a ``config.yaml`` option."""
    return load_descriptor("config.yaml")["options"][option]["default"]


def _help(action: str) -> str:
    return " ".join(load_descriptor("actions.yaml")[action]["description"].split())


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(parse_vector(text).tolist())


def _float_range(text: str) -> Tuple[float, ...]:
    start, stop, step = parse_vector(text, 3).tolist()
    if step <= 0.0 or stop < start:
        raise InvalidConfigError(f"Range '{text}' must read start,stop,step with step > 0")
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + k * step, 12) for k in range(count))


@dataclass(frozen=True)
class RunSpec:
    """Validated command line of one invocation.

    Attributes:
        subcommand: one of solve, table, basin, analyze.
        problem: builtin name or ``module:callable``.
        method: iteration map for solve, basin and eigen-trace.
        dtau: step for the non-NR maps, None for the documented default.
        tol: residual threshold.
        max_iter: iteration cap.
        x0: initial guess for solve and eigen-trace.
        x0s: initial guesses of a table.
        methods: table rows.
        domain: basin bounds, None for the problem's default domain.
        nx: basin cells along x.
        ny: basin cells along y.
        out: output file or directory, depending on the subcommand.
        trace: trace CSV path for solve.
        report: Markdown report path for table and basin.
        mode: analyze sub-mode.
        point: Jacobian evaluation point for w-spectrum.
        preconditioner: W-matrix variant for w-spectrum.
        y: fixed y of the series check.
        xs: x values of the series check.
        steps: length of the recurrence check.
    """

    subcommand: str
    problem: str = "simple1d"
    method: str = "w4-udl"
    dtau: Optional[float] = None
    tol: float = DEFAULT_TOL
    max_iter: int = SOLVE_MAX_ITER
    x0: Optional[Vector] = field(default=None, repr=False)
    x0s: Tuple[float, ...] = TABLE_X0S
    methods: Tuple[str, ...] = TABLE_METHODS
    domain: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None
    nx: int = BASIN_GRID_SIZE
    ny: int = BASIN_GRID_SIZE
    out: Optional[Path] = None
    trace: Optional[Path] = None
    report: Optional[Path] = None
    mode: Optional[str] = None
    point: Optional[Vector] = field(default=None, repr=False)
    preconditioner: str = Preconditioner.UDL.value
    y: float = SERIES_Y
    xs: Tuple[float, ...] = SERIES_XS
    steps: int = RECURRENCE_STEPS

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise InvalidConfigError(f"Unknown subcommand '{self.subcommand}'")
        if self.dtau is not None and not 0.0 < self.dtau <= 1.0:
            raise InvalidConfigError(f"dtau must lie in (0, 1], got {self.dtau}")
        if self.dtau == NR_DTAU and self.subcommand in ("solve", "basin"):
            if MethodKind.parse(self.method) is not MethodKind.NR:
                raise InvalidConfigError("dtau = 1 is only legal for method nr")
        directories = [p.parent for p in (self.trace, self.report) if p is not None]
        if self.out is not None:
            directories.append(self.out if self.subcommand == "basin" else self.out.parent)
        for directory in directories:
            directory.mkdir(parents=True, exist_ok=True)

    def config(self, method: Optional[str] = None) -> SolverConfig:
        """Solver settings for ``method`` (this run's method by default)."""
        kind = MethodKind.parse(method or self.method)
        dtau = self.dtau
        # table rows share one --dtau, which never applies to nr
        if kind is MethodKind.NR and (dtau is None or self.subcommand == "table"):
            dtau = NR_DTAU
        elif dtau is None:
            dtau = option_default("dtau")
        return SolverConfig.for_method(kind, dtau=dtau, tol=self.tol, max_iter=self.max_iter)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunSpec":
        """Build a run spec from parsed arguments, filling the documented defaults."""
        values = {k: v for k, v in vars(args).items() if v is not None and k != "log_level"}
        if "max_iter" not in values:
            key = "basin-max-iter" if args.subcommand == "basin" else "solve-max-iter"
            values["max_iter"] = option_default(key)
        for key in ("out", "trace", "report"):
            if key in values:
                values[key] = Path(values[key])
        if "x0" in values:
            values["x0"] = parse_vector(values["x0"])
        if "point" in values:
            values["point"] = parse_vector(values["point"])
        if "x0_range" in values:
            values["x0s"] = _float_range(values.pop("x0_range"))
        bounds = [values.pop(k, None) for k in ("xmin", "xmax", "ymin", "ymax")]
        if any(b is not None for b in bounds):
            values["domain"] = bounds
        return cls(**values)


def build_parser() -> argparse.ArgumentParser:
    """Assemble the argument parser; help texts come from the YAML descriptors."""
    metadata = load_descriptor("metadata.yaml")
    parser = _Parser(prog=metadata["name"], description=" ".join(metadata["summary"].split()))
    parser.add_argument(
        "--log-level",
        default=option_default("log-level"),
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="log level on standard error",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser, problem: str, method: Optional[str] = "w4-udl"):
        p.add_argument("--problem", default=problem, help="builtin name or module:callable")
        if method is not None:
            p.add_argument(
                "--method", default=method, help="nr, dn, w4-udl (or w4), w4-eigen, dn-eigen"
            )
        p.add_argument("--dtau", type=float, help="pseudo-time step of the non-NR maps")
        p.add_argument("--tol", type=float, default=option_default("tol"))
        p.add_argument("--max-iter", dest="max_iter", type=int)

    solve = sub.add_parser("solve", help=_help("solve"), description=_help("solve"))
    common(solve, "simple1d")
    solve.add_argument("--x0", required=True, help="initial guess, e.g. --x0 2,-4")
    solve.add_argument("--trace", help="write the trace CSV here")

    table = sub.add_parser("table", help=_help("table"), description=_help("table"))
    common(table, "simple1d", method=None)
    table.add_argument(
        "--methods", type=lambda text: tuple(m.strip() for m in text.split(",") if m.strip())
    )
    guesses = table.add_mutually_exclusive_group()
    guesses.add_argument("--x0s", type=_floats, help="comma-separated initial guesses")
    guesses.add_argument("--x0-range", dest="x0_range", help="start,stop,step")
    table.add_argument("--out", help="write the CSV here instead of standard output")
    table.add_argument("--report", help="render a Markdown report here")

    basin = sub.add_parser("basin", help=_help("basin"), description=_help("basin"))
    common(basin, "simple2d")
    for bound in ("xmin", "xmax", "ymin", "ymax"):
        basin.add_argument(f"--{bound}", type=float)
    basin.add_argument("--nx", type=int, default=option_default("nx"))
    basin.add_argument("--ny", type=int, default=option_default("ny"))
    basin.add_argument("--out", default=".", help="directory for basin.pgm, basin.csv, stats.json")
    basin.add_argument("--report", help="render a Markdown report here")

    analyze = sub.add_parser("analyze", help=_help("analyze"), description=_help("analyze"))
    modes = analyze.add_subparsers(dest="mode", required=True)

    spectrum = modes.add_parser("w-spectrum", help=_help("analyze-w-spectrum"))
    spectrum.add_argument("--problem", default="simple2d")
    spectrum.add_argument("--x", dest="point", required=True, help="Jacobian evaluation point")
    spectrum.add_argument(
        "--preconditioner", choices=[p.value for p in Preconditioner], default="udl"
    )
    spectrum.add_argument("--dtau", type=float)
    spectrum.add_argument("--out", help="also write the JSON here")

    trace = modes.add_parser("eigen-trace", help=_help("analyze-eigen-trace"))
    common(trace, "fproblem0", method="nr")
    trace.add_argument("--x0", required=True)
    trace.add_argument("--out", help="write the CSV here and print a JSON summary")

    series = modes.add_parser("series", help=_help("analyze-series"))
    series.add_argument("--y", type=float)
    series.add_argument("--xs", type=_floats)

    recurrence = modes.add_parser("recurrence", help=_help("analyze-recurrence"))
    recurrence.add_argument("--dtau", type=float)
    recurrence.add_argument("--steps", type=int)
    return parser


def _print(payload: Dict[str, Any]) -> None:
    sys.stdout.write(artifacts.dump_json(payload))


class RootFinderCli:
    """Dispatch a parsed command line to the matching handler."""

    def __init__(self, spec: RunSpec):
        self.spec = spec
        self.handlers = {
            "solve": self._on_solve,
            "table": self._on_table,
            "basin": self._on_basin,
            "analyze": self._on_analyze,
        }

    def run(self) -> int:
        """Execute the subcommand and return the process exit code."""
        return self.handlers[self.spec.subcommand]()

    def _problem(self, dim: Optional[int] = None) -> Problem:
        problem = resolve(self.spec.problem)
        if dim is not None and problem.dim != dim:
            raise InvalidConfigError(
                f"{self.spec.subcommand} needs a {dim}-D problem, {problem.name} has {problem.dim}"
            )
        return problem

    def _on_solve(self) -> int:
        spec = self.spec
        problem = self._problem()
        result = run(problem, spec.config(), spec.x0)
        if spec.trace is not None:
            artifacts.write_trace_csv(result, spec.trace)
        _print(
            {
                "status": result.status.value,
                "iterations": result.iterations,
                "final_x": result.final_state.x,
                "final_residual": result.final_residual,
            }
        )
        return _EXIT_CODES[result.status]

    def _on_table(self) -> int:
        spec = self.spec
        problem = self._problem(dim=1)
        x0s = np.asarray(spec.x0s, dtype=np.float64).reshape(-1, 1)
        table: Dict[str, List[Optional[int]]] = {}
        for method in spec.methods:
            outcome = run_batch(problem, spec.config(method), x0s)
            table[method] = [
                int(n) if ok else None for n, ok in zip(outcome.iterations, outcome.converged)
            ]
        if spec.out is not None:
            artifacts.write_table_csv(table, spec.x0s, spec.out)
        else:
            artifacts.write_table_csv(table, spec.x0s, sys.stdout)
        if spec.report is not None:
            artifacts.write_report(
                spec.report,
                title=f"Iteration counts for {problem.name}",
                problem=problem.name,
                dtau=spec.config("dn").dtau,
                tol=spec.tol,
                max_iter=spec.max_iter,
                table=table,
                x0s=[artifacts.format_float(x0) for x0 in spec.x0s],
            )
        return EXIT_OK

    def _on_basin(self) -> int:
        spec = self.spec
        problem = self._problem(dim=2)
        config = spec.config()
        domain = problem.default_domain
        if spec.domain is not None:
            defaults = [b for axis in problem.default_domain for b in axis]
            merged = [d if v is None else v for v, d in zip(spec.domain, defaults)]
            domain = ((merged[0], merged[1]), (merged[2], merged[3]))
        grid = compute_basin(problem, config, domain, spec.nx, spec.ny)
        stats = basin_stats(grid)

        out = spec.out if spec.out is not None else Path(".")
        out.mkdir(parents=True, exist_ok=True)
        artifacts.write_basin_pgm(grid, out / BASIN_PGM_FILE)
        artifacts.write_basin_csv(grid, out / BASIN_CSV_FILE)
        payload = artifacts.stats_payload(
            stats,
            problem=problem.name,
            method=config.method.value,
            dtau=config.dtau,
            max_iter=config.max_iter,
            nx=grid.nx,
            ny=grid.ny,
            domain=grid.domain,
        )
        artifacts.write_json(payload, out / BASIN_STATS_FILE)
        if spec.report is not None:
            artifacts.write_report(
                spec.report,
                title=f"Newton basin of {problem.name}",
                problem=problem.name,
                method=config.method.value,
                dtau=config.dtau,
                tol=config.tol,
                max_iter=config.max_iter,
                nx=grid.nx,
                ny=grid.ny,
                domain=grid.domain,
                stats=stats,
            )
        _print(payload)
        return EXIT_OK

    def _on_analyze(self) -> int:
        return {
            "w-spectrum": self._w_spectrum,
            "eigen-trace": self._eigen_trace,
            "series": self._series,
            "recurrence": self._recurrence,
        }[self.spec.mode]()

    def _w_spectrum(self) -> int:
        spec = self.spec
        problem = self._problem()
        point = np.asarray(spec.point, dtype=np.float64)
        if point.size != problem.dim:
            raise InvalidConfigError(f"{problem.name} has dimension {problem.dim}")
        dtau = spec.dtau if spec.dtau is not None else option_default("dtau")
        check = w_spectrum_check(problem.jacobian(point), spec.preconditioner, dtau)
        payload = {
            "problem": problem.name,
            "x": point,
            "preconditioner": spec.preconditioner,
            "dtau": dtau,
            "expected": check.expected,
            "eigenvalues": [[z.real, z.imag] for z in check.eigenvalues],
            "max_deviation": check.max_deviation,
            "nilpotency_residual": check.nilpotency_residual,
            "passed": check.passed,
        }
        if spec.out is not None:
            artifacts.write_json(payload, spec.out)
        _print(payload)
        return EXIT_OK if check.passed else EXIT_NOT_CONVERGED

    def _eigen_trace(self) -> int:
        spec = self.spec
        problem = self._problem(dim=2)
        trace = eigen_trace(problem, spec.config(), spec.x0)
        if spec.out is None:
            artifacts.write_eigen_trace_csv(trace, sys.stdout)
        else:
            artifacts.write_eigen_trace_csv(trace, spec.out)
            _print(
                {
                    "status": trace.result.status.value,
                    "iterations": trace.result.iterations,
                    "final_ratio": trace.records[-1].ratio,
                    "min_ratio": float(np.min(trace.ratios)),
                    "reconstruction_error": trace.reconstruction_error,
                    "passed": trace.reconstruction_ok,
                }
            )
        return EXIT_OK if trace.reconstruction_ok else EXIT_NOT_CONVERGED

    def _series(self) -> int:
        check = degeneracy_series_check(self.spec.y, self.spec.xs)
        lambda_plus, lambda_minus, c_plus, c_minus = check.max_deviations()
        _print(
            {
                "y": check.y,
                "xs": check.xs,
                "max_deviations": {
                    "lambda_plus": lambda_plus,
                    "lambda_minus": lambda_minus,
                    "c_plus": c_plus,
                    "c_minus": c_minus,
                },
                "passed": check.passed,
            }
        )
        return EXIT_OK if check.passed else EXIT_NOT_CONVERGED

    def _recurrence(self) -> int:
        dtau = self.spec.dtau if self.spec.dtau is not None else option_default("dtau")
        check = error_recurrence_check(dtau, self.spec.steps)
        _print(
            {
                "dtau": check.dtau,
                "steps": check.steps,
                "max_deviation": check.max_deviation,
                "passed": check.passed,
            }
        )
        return EXIT_OK if check.passed else EXIT_NOT_CONVERGED


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(attach_negative_values(sys.argv[1:] if argv is None else argv))
    except UsageError as e:
        sys.stderr.write(f"{e.message}\n")
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    logging.basicConfig(
        level=args.log_level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        spec = RunSpec.from_args(args)
        return RootFinderCli(spec).run()
    except SingularDecompositionError as e:
        logger.error(e.message)
        return EXIT_SINGULAR
    except (InvalidConfigError, UnknownProblemError, UnsupportedMethodError) as e:
        logger.error(e.message)
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"Cannot write output: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
