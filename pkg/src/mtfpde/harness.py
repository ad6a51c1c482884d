"""Convergence studies against the manufactured solutions and CSV reporting."""

from __future__ import annotations

import datetime as _dt
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_increasing
from .exceptions import ConfigurationError, NumericalFailure
from .problem import EXAMPLE_ORDERS, manufactured_problem
from .solver import INIT_MODES, run
from .specfun import FractionalOrders

logger = logging.getLogger(__name__)

NORMS = ("linf-l2", "l2", "h1")


def reduce_error(history, norm="linf-l2", at_final=False):
    """Scalar error of a run.

    ``linf-l2`` is the maximum over levels ``1..N`` of the L2 error. ``l2``
    and ``h1`` use the same maximum unless ``at_final`` is set, in which case
    the value at ``t_N`` is returned.
    """
    if norm not in NORMS:
        raise ConfigurationError(f"unknown norm {norm!r}; choose from {NORMS}")
    errs = history.h1_errors() if norm == "h1" else history.l2_errors()
    if at_final and norm != "linf-l2":
        return float(errs[-1])
    return float(np.max(errs[1:]))


def compute_eoc(errors):
    """``log2(e_k / e_{k+1})`` for consecutive errors on halved meshes."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need at least two errors")
    if any(not e > 0 for e in errors):
        raise ValueError(f"errors must be positive, got {errors}")
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


@dataclass
class StudyConfig:
    example: str = "example1"
    alphas: Optional[tuple] = None
    mus: Optional[tuple] = None
    r: Optional[float] = None
    axis: str = "time"
    N_list: tuple = (64, 128, 256, 512)
    Ms_list: Optional[tuple] = None
    init: str = "interpolate"
    norm: str = "linf-l2"
    at_final: bool = False
    T: float = 1.0
    out: Optional[str] = None
    threads: int = 1

    def __post_init__(self):
        if self.axis not in ("time", "space"):
            raise ConfigurationError(f"axis must be 'time' or 'space', got {self.axis!r}")
        if self.norm not in NORMS:
            raise ConfigurationError(f"unknown norm {self.norm!r}; choose from {NORMS}")
        if self.init not in INIT_MODES:
            raise ConfigurationError(f"unknown init mode {self.init!r}")
        self.N_list = tuple(int(n) for n in check_increasing(self.N_list, "N list"))
        if self.Ms_list is not None:
            self.Ms_list = tuple(int(n) for n in check_increasing(self.Ms_list, "Ms list"))
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")

    @property
    def orders(self):
        key = manufactured_problem(self.example).name
        alphas = self.alphas if self.alphas is not None else EXAMPLE_ORDERS[key]
        return FractionalOrders.from_lists(alphas, self.mus)

    @property
    def grading(self):
        return self.r if self.r is not None else 2.0 / self.orders.alpha1

    def resolutions(self):
        """``(N, Ms)`` pairs; the study axis is coupled one-to-one with the other."""
        levels = self.Ms_list if (self.axis == "space" and self.Ms_list) else self.N_list
        return [(k, k) for k in levels]


@dataclass
class ConvergenceRow:
    resolution: int
    error: float
    eoc: Optional[float] = None
    failure: Optional[str] = field(default=None, repr=False)


def _study_row(args):
    example, alphas, mus, N, Ms, r, init, norm, at_final, T = args
    problem = manufactured_problem(example, FractionalOrders.from_lists(alphas, mus))
    history = run(problem, N, Ms, r=r, init=init, T=T)
    return reduce_error(history, norm, at_final)


def run_convergence(config):
    """Run one solve per resolution, fill in EOCs and optionally write the CSV."""
    orders = config.orders
    jobs = [
        (config.example, tuple(orders.alphas), tuple(orders.mus), N, Ms, config.grading,
         config.init, config.norm, config.at_final, config.T)
        for N, Ms in config.resolutions()
    ]
    rows = []
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            futures = [pool.submit(_study_row, job) for job in jobs]
            results = []
            for fut in futures:
                try:
                    results.append(fut.result())
                except NumericalFailure as exc:
                    results.append(exc)
    else:
        results = []
        for job in jobs:
            try:
                results.append(_study_row(job))
            except NumericalFailure as exc:
                results.append(exc)
    for (N, Ms), res in zip(config.resolutions(), results):
        level = N if config.axis == "time" else Ms
        if isinstance(res, Exception):
            logger.error("resolution %d failed: %s", level, res)
            rows.append(ConvergenceRow(level, math.nan, failure=str(res)))
        else:
            rows.append(ConvergenceRow(level, res))
    for a, b in zip(rows, rows[1:]):
        if a.error > 0 and b.error > 0:
            a.eoc = math.log(a.error / b.error) / math.log(b.resolution / a.resolution)
    if config.out:
        write_convergence_csv(config.out, rows, metadata(config))
    return rows


def metadata(config):
    from . import __version__

    orders = config.orders
    norm_desc = {
        "linf-l2": "max over t_n, n=1..N, of the L2 error",
        "l2": "L2 error at t_N" if config.at_final else "max over t_n, n=1..N, of the L2 error",
        "h1": "H1 seminorm error at t_N" if config.at_final else "max over t_n, n=1..N, of the H1 seminorm error",
    }[config.norm]
    coupling = "Ms=N" if config.axis == "time" else "N=Ms"
    return [
        f"problem={manufactured_problem(config.example).name}",
        "alphas=" + ",".join(f"{a:g}" for a in orders.alphas),
        "mus=" + ",".join(f"{m:g}" for m in orders.mus),
        f"r={config.grading:.10g}",
        f"T={config.T:g}",
        f"axis={config.axis} ({coupling})",
        f"norm={config.norm}: {norm_desc}",
        f"init={config.init}",
        f"date={_dt.date.today().isoformat()}",
        f"version={__version__}",
    ]


def format_row(row):
    err = "nan" if not math.isfinite(row.error) else f"{row.error:.5e}"
    eoc = "" if row.eoc is None else f"{row.eoc:.6f}"
    return f"{row.resolution},{err},{eoc}"


def write_convergence_csv(path, rows, meta_lines):
    with open(path, "w", encoding="utf-8") as fh:
        for line in meta_lines:
            fh.write(f"# {line}\n")
        fh.write("resolution,error,eoc\n")
        for row in rows:
            fh.write(format_row(row) + "\n")


def read_convergence_csv(path):
    """Inverse of :func:`write_convergence_csv`; returns ``(metadata lines, rows)``."""
    meta, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                meta.append(line[1:].strip())
            elif line and not line.startswith("resolution"):
                res, err, eoc = line.split(",")
                rows.append(ConvergenceRow(int(res), float(err), float(eoc) if eoc else None))
    return meta, rows
