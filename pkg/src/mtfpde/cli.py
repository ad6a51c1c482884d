"""Command line interface.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
A ``--config`` file holds ``key=value`` lines whose keys are the long flag
names (``alphas=0.4,0.37``); explicit flags override file values.
"""

from __future__ import annotations

import argparse
import io
import logging
import sys

import numpy as np

from . import __version__
from .exceptions import ConfigurationError, NumericalFailure
from .gronwall import build_p, check_ml_sum_lemma, check_weighted_sum_lemma
from .harness import StudyConfig, format_row, metadata, run_convergence
from .kernel import build_kernel_table, check_kernel_properties, truncation_experiment
from .problem import EXAMPLE_ORDERS, manufactured_problem
from .solver import run
from .specfun import FractionalOrders
from .tmesh import build_graded_mesh, check_stepsize_criterion

logger = logging.getLogger("mtfpde")


def _floats(s):
    return tuple(float(v) for v in str(s).split(",") if v.strip())


def _ints(s):
    return tuple(int(v) for v in str(s).split(",") if v.strip())


def _bool(s):
    if isinstance(s, bool):
        return s
    val = str(s).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# name -> (converter, default, help)
OPTIONS = {
    "example": (str, None, "manufactured problem: 1 | 2 (example1 | example2)"),
    "alphas": (_floats, None, "comma-separated orders, strictly decreasing"),
    "mus": (_floats, None, "comma-separated weights (default all 1)"),
    "r": (float, None, "grading exponent (default 2/alpha_1)"),
    "T": (float, 1.0, "final time"),
    "N": (_ints, None, "time steps (comma list for converge/truncation)"),
    "Ms": (_ints, None, "spatial subdivisions per direction"),
    "init": (str, "interpolate", "initializer: interpolate | ritz"),
    "norm": (str, "linf-l2", "error norm: linf-l2 | l2 | h1"),
    "norm-at-final": (_bool, False, "reduce l2/h1 errors at t_N instead of max over levels"),
    "axis": (str, "time", "study axis: time (Ms=N) | space (N=Ms)"),
    "K": (float, 1.0, "constant of the Mittag-Leffler sum check"),
    "out": (str, None, "output CSV path (default stdout)"),
    "threads": (int, 1, "parallel study rows"),
}

COMMANDS = {
    "solve": ("one run; per-step diagnostics", ["example", "alphas", "mus", "r", "T", "N", "Ms", "init", "out"]),
    "converge": (
        "convergence study with EOC",
        ["example", "alphas", "mus", "r", "T", "N", "Ms", "init", "norm", "norm-at-final", "axis", "out", "threads"],
    ),
    "kernel-check": ("dump L2-1sigma weights and property report", ["example", "alphas", "mus", "r", "T", "N", "out"]),
    "truncation": ("truncation error rate of the discrete operator", ["example", "alphas", "mus", "r", "T", "N", "out"]),
    "gronwall-check": (
        "complementary kernel identity and lemma margins",
        ["example", "alphas", "mus", "r", "T", "N", "K", "out"],
    ),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"{message}\n{self.format_usage()}")


def build_parser():
    parser = _Parser(prog="mtfpde", description="L2-1sigma / FEM solver for nonlocal multi-term subdiffusion")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (help_, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="key=value configuration file")
        for opt in opts:
            p.add_argument(f"--{opt}", dest=opt.replace("-", "_"), default=None, help=OPTIONS[opt][2])
    return parser


def read_config(path):
    values = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("_", "-")
            if key not in OPTIONS:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val
    return values


def resolve_options(command, args):
    """Defaults, then config file, then flags; every value converted."""
    allowed = COMMANDS[command][1]
    merged = {opt: OPTIONS[opt][1] for opt in allowed}
    raw = {}
    if args.config:
        filed = read_config(args.config)
        raw.update({k: v for k, v in filed.items() if k in allowed})
    for opt in allowed:
        val = getattr(args, opt.replace("-", "_"))
        if val is not None:
            raw[opt] = val
    for opt, val in raw.items():
        try:
            merged[opt] = OPTIONS[opt][0](val)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad value for --{opt}: {val!r} ({exc})") from None
    return merged


def _orders(opts, required_example=False, usage=""):
    example = opts.get("example")
    if example is None and (required_example or opts.get("alphas") is None):
        raise ConfigurationError(f"--example is required (or a config file setting it)\n{usage}")
    if opts.get("alphas") is not None:
        return FractionalOrders.from_lists(opts["alphas"], opts.get("mus"))
    key = manufactured_problem(example).name
    return FractionalOrders.from_lists(EXAMPLE_ORDERS[key], opts.get("mus"))


def _single(values, name, default):
    if values is None:
        return default
    if len(values) != 1:
        raise ConfigurationError(f"--{name} takes a single value here, got {values}")
    return values[0]


def _grading(opts, orders):
    return opts["r"] if opts["r"] is not None else 2.0 / orders.alpha1


def _writer(opts):
    if opts.get("out"):
        return open(opts["out"], "w", encoding="utf-8")
    return _Stdout()


class _Stdout(io.TextIOBase):
    def write(self, s):
        return sys.stdout.write(s)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        sys.stdout.flush()


def cmd_solve(opts, usage):
    orders = _orders(opts, required_example=True, usage=usage)
    problem = manufactured_problem(opts["example"], orders)
    N = _single(opts["N"], "N", 64)
    Ms = _single(opts["Ms"], "Ms", N)
    hist = run(problem, N, Ms, r=_grading(opts, orders), init=opts["init"], T=opts["T"])
    l2 = hist.l2_errors()
    with _writer(opts) as out:
        out.write(f"# problem={problem.name}\n")
        out.write("# alphas=" + ",".join(f"{a:g}" for a in orders.alphas) + "\n")
        out.write(f"# r={hist.tmesh.r:.10g} N={N} Ms={Ms} init={opts['init']}\n")
        out.write(f"# stepsize criterion (Lambda=1): {hist.stepsize}\n")
        out.write(f"# first-step fixed-point iterations={hist.first_step_iterations}\n")
        out.write(f"# linf-l2 error={np.max(l2[1:]):.5e}\n")
        out.write("n,t,sigma,l,a,cg_iterations,cg_residual,l2_error\n")
        for n in range(N + 1):
            if n == 0:
                out.write(f"0,{0.0:.10e},,{hist.l_values[0]:.10e},,,,{l2[0]:.5e}\n")
                continue
            rep = hist.solve_reports[n - 1]
            out.write(
                f"{n},{hist.tmesh.t[n]:.10e},{hist.table.sigma[n]:.10e},{hist.l_values[n]:.10e},"
                f"{hist.a_values[n]:.10e},{rep.iterations},{rep.residual:.3e},{l2[n]:.5e}\n"
            )
    return 0


def cmd_converge(opts, usage):
    if opts.get("example") is None:
        raise ConfigurationError(f"--example is required (or a config file setting it)\n{usage}")
    config = StudyConfig(
        example=opts["example"],
        alphas=opts["alphas"],
        mus=opts["mus"],
        r=opts["r"],
        axis=opts["axis"],
        N_list=opts["N"] or (64, 128, 256, 512),
        Ms_list=opts["Ms"],
        init=opts["init"],
        norm=opts["norm"],
        at_final=opts["norm-at-final"],
        T=opts["T"],
        out=opts["out"],
        threads=opts["threads"],
    )
    rows = run_convergence(config)
    failed = [r for r in rows if r.failure]
    if not opts["out"]:
        for line in metadata(config):
            print(f"# {line}")
        print("resolution,error,eoc")
        for row in rows:
            print(format_row(row))
    else:
        for row in rows:
            print(format_row(row))
    if failed:
        for r in failed:
            print(f"resolution {r.resolution}: {r.failure}", file=sys.stderr)
        return 2
    return 0


def cmd_kernel_check(opts, usage):
    orders = _orders(opts, usage=usage)
    N = _single(opts["N"], "N", 64)
    mesh = build_graded_mesh(opts["T"], N, _grading(opts, orders))
    table = build_kernel_table(orders, mesh)
    rep = check_kernel_properties(table)
    with _writer(opts) as out:
        out.write("# alphas=" + ",".join(f"{a:g}" for a in orders.alphas) + "\n")
        out.write(f"# T={mesh.T:g} N={N} r={mesh.r:.10g} max_step_ratio={mesh.max_step_ratio:.6g}\n")
        out.write(f"# monotone={rep.monotone} violations={rep.monotone_violations} positive={rep.positive}\n")
        out.write(f"# lower_bound=4mu/11={rep.lower_bound:.6e}\n")
        out.write(
            f"# tau_bound_all_j={rep.bound_holds} violations={rep.bound_violations} "
            f"min g*tau_j^a1={rep.min_scaled_weight:.6e}\n"
        )
        out.write(f"# tau_bound_diagonal={rep.diagonal_bound_holds} min g_nn*tau_n^a1={rep.min_scaled_diagonal:.6e}\n")
        out.write(
            f"# averaged_kernel_bound={rep.integral_bound_holds} min ratio={rep.min_integral_ratio:.6e}\n"
        )
        out.write(f"# max scaled sigma residual={rep.max_sigma_residual:.3e}\n")
        out.write("n,j,sigma_star,t_offset,g\n")
        for n in range(1, N + 1):
            for j in range(1, n + 1):
                out.write(
                    f"{n},{j},{table.sigma_star[n]:.16e},{table.t_offset[n]:.16e},{table.g[n, j]:.16e}\n"
                )
    return 0 if rep.monotone and rep.positive else 2


def cmd_truncation(opts, usage):
    orders = _orders(opts, usage=usage)
    N_list = opts["N"] or (64, 128, 256)
    r = _grading(opts, orders)
    rows = truncation_experiment(orders, opts["T"], N_list, r)
    with _writer(opts) as out:
        out.write("# alphas=" + ",".join(f"{a:g}" for a in orders.alphas) + "\n")
        out.write(f"# r={r:.10g} T={opts['T']:g} test function t^3 + t^alpha_1\n")
        out.write(f"# expected rate min(3 - alpha_1, r alpha_1)={min(3 - orders.alpha1, r * orders.alpha1):.6f}\n")
        out.write("resolution,error,eoc\n")
        for N, err, rate in rows:
            out.write(f"{N},{err:.5e},{'' if rate is None else f'{rate:.6f}'}\n")
    return 0


def cmd_gronwall_check(opts, usage):
    orders = _orders(opts, usage=usage)
    N = _single(opts["N"], "N", 64)
    mesh = build_graded_mesh(opts["T"], N, _grading(opts, orders))
    table = build_kernel_table(orders, mesh)
    levels = sorted({1, max(1, N // 2), N})
    sc = check_stepsize_criterion(mesh, orders, 1.0)
    with _writer(opts) as out:
        out.write("# alphas=" + ",".join(f"{a:g}" for a in orders.alphas) + "\n")
        out.write(f"# T={mesh.T:g} N={N} r={mesh.r:.10g} K={opts['K']:g}\n")
        out.write(f"# stepsize criterion (Lambda=1): {sc}\n")
        out.write(
            "n,max_identity_residual,min_p,max_p_gii,weighted_lhs,weighted_rhs,weighted_status,"
            "ml_sum,ml_bound,ml_statement_status,ml_scaled_status\n"
        )
        for n in levels:
            gt = build_p(table, n)
            diag = np.array([table.g[i, i] for i in range(1, n + 1)])
            ws = check_weighted_sum_lemma(table, orders, list(orders.alphas), n, gt=gt)
            ml = check_ml_sum_lemma(table, orders, opts["K"], n, gt=gt)
            out.write(
                f"{n},{gt.max_identity_residual():.3e},{gt.p.min():.6e},{np.max(gt.p * diag):.12f},"
                f"{ws.lhs:.6e},{ws.rhs:.6e},{ws.status},{ml.S:.6e},{ml.bound:.6e},"
                f"{ml.statement.status},{ml.scaled.status}\n"
            )
    return 0


HANDLERS = {
    "solve": cmd_solve,
    "converge": cmd_converge,
    "kernel-check": cmd_kernel_check,
    "truncation": cmd_truncation,
    "gronwall-check": cmd_gronwall_check,
}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigurationError(parser.format_help())
        sub_usage = parser._subparsers._group_actions[0].choices[args.command].format_usage()
        opts = resolve_options(args.command, args)
        return HANDLERS[args.command](opts, sub_usage)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
