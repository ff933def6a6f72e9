"""Command-line front end.

Exit codes: 0 repaired / solvable, 1 not repaired / unsolvable, 2 input
error, 3 solver error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import generators
from .embedding import eval_tstar
from .errors import (
    ConeRepairError,
    EpsilonInfeasibleError,
    InvalidArgumentError,
    NumericalError,
    ParseError,
    UnsupportedProblemError,
)
from .fileformat import dumps, parse_problem
from .regularizers import Box, atoms, evaluate
from .repair import RepairResult, RepairSettings, RepairStatus, exact_repair_affine, repair
from .solver import solve

EXIT_OK = 0
EXIT_NOT_REPAIRED = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3

log = logging.getLogger("conerepair")


@dataclass
class RepairReport:
    """Everything needed to audit one repair run; floats are kept at full precision."""

    input_digest: str
    method: str
    status: str
    initial_tstar: float
    initial_r: float
    theta0: list
    theta_final: list
    final_tstar: float
    final_r: float
    wall_clock_s: float
    settings: dict
    message: str = ""
    trace: list = field(default_factory=list)

    @classmethod
    def from_result(cls, result: RepairResult, *, digest, method, theta0, wall, settings, with_trace):
        trace = []
        if with_trace:
            for e in result.trace:
                trace.append(
                    {
                        "iteration": e.iteration,
                        "lambda": e.lam,
                        "alpha": e.alpha,
                        "tstar": e.tstar,
                        "r": e.r_value,
                        "accepted": e.accepted,
                        "stationary": e.stationary,
                        "inner_residual": e.inner_residual,
                        "grad": [float(g) for g in e.grad],
                    }
                )
        return cls(
            input_digest=digest,
            method=method,
            status=result.status.value,
            initial_tstar=result.initial_tstar,
            initial_r=result.initial_r,
            theta0=[float(t) for t in theta0],
            theta_final=[float(t) for t in result.theta],
            final_tstar=result.tstar,
            final_r=result.r_value,
            wall_clock_s=wall,
            settings=settings,
            message=result.message,
            trace=trace,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _digest(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def _vec(v) -> str:
    return "[" + ", ".join(repr(float(x)) for x in v) + "]"


def _jitter(theta0, r, scale: float, seed: int) -> np.ndarray:
    """Relative Gaussian perturbation of the start, kept inside box bounds."""
    if scale == 0:
        return np.asarray(theta0, dtype=np.float64).copy()
    rng = np.random.default_rng(seed)
    theta = theta0 + scale * np.maximum(np.abs(theta0), 1.0) * rng.standard_normal(theta0.shape)
    for a in atoms(r):
        if isinstance(a, Box):
            theta = np.clip(theta, a.lower, a.upper)
    return theta


# -- commands ---------------------------------------------------------------


def cmd_diagnose(args) -> int:
    pcp, theta0, reg = parse_problem(args.problem)
    wit = eval_tstar(pcp, theta0)
    A, b, c = pcp.materialize(theta0)
    sol = solve(A, b, c, pcp.cones)
    verdict = "SOLVABLE" if wit.tstar <= args.eps_out else "UNSOLVABLE"
    print(f"tstar: {wit.tstar!r}")
    print(f"verdict: {verdict}")
    print(f"problem solver status: {sol.status.value}")
    print(f"r(theta0): {evaluate(reg, theta0)!r}")
    return EXIT_OK if verdict == "SOLVABLE" else EXIT_NOT_REPAIRED


def _exact_result(pcp, reg, theta0, eps, eps_out) -> RepairResult:
    w0 = eval_tstar(pcp, theta0)
    theta = exact_repair_affine(pcp, reg, eps)
    t = eval_tstar(pcp, theta).tstar
    status = RepairStatus.REPAIRED if t <= eps_out else RepairStatus.STALLED
    msg = "" if status is RepairStatus.REPAIRED else "convex repair point does not pass the embedding check"
    return RepairResult(
        theta, status, t, evaluate(reg, theta),
        initial_tstar=w0.tstar, initial_r=evaluate(reg, theta0), message=msg,
    )


def cmd_repair(args) -> int:
    path = Path(args.problem)
    pcp, theta0, reg = parse_problem(path)
    digest = _digest(path)
    start = _jitter(theta0, reg, args.jitter, args.seed)
    settings = RepairSettings(
        lambda0=args.lambda0,
        alpha0=args.alpha0,
        n_iter=args.max_iters,
        eps_out=args.eps_out,
        eps_in=args.eps_in,
    )
    echo = asdict(settings) | {"seed": args.seed, "jitter": args.jitter, "exact": args.exact,
                               "eps_interior": args.eps_interior}
    t0 = time.perf_counter()
    if args.exact:
        result = _exact_result(pcp, reg, start, args.eps_interior, args.eps_out)
        method = "exact"
    else:
        def progress(e):
            log.info("iter %d  lambda=%r alpha=%r tstar=%r r=%r %s", e.iteration, e.lam, e.alpha,
                     e.tstar, e.r_value, "accept" if e.accepted else "reject")

        result = repair(pcp, reg, start, settings, callback=progress)
        method = "penalty"
    wall = time.perf_counter() - t0
    report = RepairReport.from_result(
        result, digest=digest, method=method, theta0=start, wall=wall, settings=echo,
        with_trace=True,
    )
    print(f"input: {digest}")
    print(f"method: {method}")
    print(f"status: {result.status.value}")
    print(f"initial tstar: {result.initial_tstar!r}")
    print(f"initial r: {result.initial_r!r}")
    print(f"final tstar: {result.tstar!r}")
    print(f"final r: {result.r_value!r}")
    print(f"theta: {_vec(result.theta)}")
    print(f"iterations: {len(result.trace)}")
    print(f"wall clock: {wall!r} s")
    if result.message:
        print(f"message: {result.message}")
    if args.trace:
        print("iter lambda alpha tstar r accepted")
        for e in result.trace:
            print(f"{e.iteration} {e.lam!r} {e.alpha!r} {e.tstar!r} {e.r_value!r} {int(e.accepted)}")
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n")
    return EXIT_OK if result.repaired else EXIT_NOT_REPAIRED


def cmd_exact_repair(args) -> int:
    args.exact = True
    return cmd_repair(args)


def cmd_gen(args) -> int:
    if args.which == "spacecraft":
        prob = generators.spacecraft(
            T=args.T, h=args.h, g=args.g, x_init=args.x_init, v_init=args.v_init,
            gamma=args.gamma, theta0=args.theta0, gravity=args.gravity,
        )
    else:
        R0 = generators.EXAMPLE_R0 if args.payoff is None else np.loadtxt(args.payoff, delimiter=",", ndmin=2)
        prob = generators.arbitrage(R0, zero_weight=args.zero_weight)
    text = dumps(prob.pcp, prob.theta0, prob.regularizer)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conerepair", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log every iteration to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("diagnose", help="report t* at theta0 and whether the problem is solvable")
    d.add_argument("problem")
    d.add_argument("--eps-out", type=float, default=RepairSettings.eps_out)
    d.set_defaults(func=cmd_diagnose)

    def repair_flags(q, exact_flag: bool):
        q.add_argument("problem")
        q.add_argument("--lambda0", type=float, default=RepairSettings.lambda0)
        q.add_argument("--alpha0", type=float, default=RepairSettings.alpha0)
        q.add_argument("--max-iters", type=int, default=RepairSettings.n_iter)
        q.add_argument("--eps-in", type=float, default=RepairSettings.eps_in)
        q.add_argument("--eps-out", type=float, default=RepairSettings.eps_out)
        q.add_argument("--seed", type=int, default=0, help="seed for --jitter")
        q.add_argument("--jitter", type=float, default=0.0,
                       help="relative random perturbation of theta0 (default 0: none)")
        if exact_flag:
            q.add_argument("--exact", action="store_true", help="solve the convex repair problem (constant A)")
        q.add_argument("--eps-interior", type=float, default=0.0,
                       help="SOC interior margin for the convex repair problem")
        q.add_argument("--out", help="write a JSON report here")
        q.add_argument("--trace", action="store_true", help="print the iteration trace")

    r = sub.add_parser("repair", help="search for nearby solvable parameters")
    repair_flags(r, exact_flag=True)
    r.set_defaults(func=cmd_repair)

    e = sub.add_parser("exact-repair", help="convex repair for problems with constant A")
    repair_flags(e, exact_flag=False)
    e.set_defaults(func=cmd_exact_repair)

    g = sub.add_parser("gen", help="write one of the built-in example problems")
    gsub = g.add_subparsers(dest="which", required=True)
    s = gsub.add_parser("spacecraft")
    s.add_argument("--T", type=float, default=10.0)
    s.add_argument("--h", type=float, default=1.0)
    s.add_argument("--g", type=float, default=9.8)
    s.add_argument("--x-init", type=float, nargs=3, default=(10.0, 10.0, 50.0))
    s.add_argument("--v-init", type=float, nargs=3, default=(10.0, -10.0, -10.0))
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--theta0", type=float, nargs=4, default=(12.0, 200.0, 50.0, 0.5),
                   metavar=("M", "MFUEL", "FMAX", "ALPHA"))
    s.add_argument("--gravity", choices=("force", "acceleration"), default="force")
    a = gsub.add_parser("arbitrage")
    a.add_argument("--payoff", help="CSV file with the payoff matrix (default: built-in example)")
    a.add_argument("--zero-weight", type=float,
                   help="absolute metric weight for zero payoff entries (default: refuse them)")
    for q in (s, a):
        q.add_argument("-o", "--out", help="output file (default: stdout)")
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvalidArgumentError, UnsupportedProblemError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EpsilonInfeasibleError as exc:
        print(f"not repaired: {exc}", file=sys.stderr)
        return EXIT_NOT_REPAIRED
    except NumericalError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConeRepairError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
