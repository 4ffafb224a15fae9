"""The four batch commands behind the CLI. Each takes the parsed argparse namespace and returns an exit code."""

import argparse
import concurrent.futures
import itertools
import json
import logging
import os
import pathlib
import statistics
import sys

import numpy as np
import pandas as pd

from . import ProblemData, SclsProblem, SolverConfig, compile_problem
from .admm import SolveReport, solve_admm
from .chol import solve_cd_admm
from .data import (DEFAULT_GAMMA, CsvSchema, GenSpec, Scenario, generate, load_csv, load_sparse, read_descriptor,
                   write_descriptor, write_sparse)
from .exceptions import DegeneratePole, DimensionTooLarge, NumericalError, SclsError
from .export import Method, RunRecord, dump_record, record_from_oracle, record_from_report, write_table, write_trace
from .oracle import check_kkt, solve_trs
from .paths import descriptor_path_for, instance_paths, instance_stem
from .reformulate import leader_objective, recover
from .tools import Stopwatch

_log = logging.getLogger(__name__)

THREADS_ENV = "SPG_SCLS_THREADS"
KKT_TOL = 1e-6

GRID_KEYS = ("m", "n", "density", "gamma", "scenario")
RUN_COLUMNS = ("rel_err", "objective", "iterations", "converged", "certified", "factorizations",
               "triangular_solves", "solve_time")

EXIT_CONVERGED = 0
EXIT_NOT_CONVERGED = 2
EXIT_INPUT_ERROR = 3
EXIT_NUMERICAL_ERROR = 4


def config_from_args(args: argparse.Namespace, **overrides) -> SolverConfig:
    return SolverConfig(
        rho=args.rho,
        eps=args.eps,
        max_iters=args.max_iters,
        init=args.init,
        init_seed=getattr(args, "init_seed", 0),
        path=args.path,
        **overrides,
    )


def spec_from_args(args: argparse.Namespace, **overrides) -> GenSpec:
    values = dict(
        m=args.m,
        n=args.n,
        density=args.density,
        noise_sigma=args.noise,
        seed=args.seed,
        scenario=args.scenario,
        z_file=getattr(args, "z_file", None),
        gamma=DEFAULT_GAMMA if args.gamma is None else args.gamma,
        modest_scale=args.modest_scale,
        severe_scale=args.severe_scale,
    )
    values.update(overrides)

    return GenSpec(**values)


def load_instance(args: argparse.Namespace) -> tuple[ProblemData, dict]:
    """The instance named by ``--instance`` (sparse text or CSV), or one generated from the grid flags."""
    if args.instance is None:
        spec = spec_from_args(args)
        return generate(spec), spec.descriptor()

    path = pathlib.Path(args.instance)
    descriptor_path = descriptor_path_for(path)
    descriptor = read_descriptor(descriptor_path) if descriptor_path.exists() else {}

    gamma = args.gamma if args.gamma is not None else descriptor.get("gamma", DEFAULT_GAMMA)

    if path.suffix == ".csv":
        schema = CsvSchema(y_column=args.y_column, z_column=args.z_column, gamma=gamma,
                           scenario=Scenario(args.scenario), seed=args.seed if args.seed is not None else 0,
                           modest_scale=args.modest_scale, severe_scale=args.severe_scale,
                           z_file=getattr(args, "z_file", None))
        data = load_csv(path, schema)
    else:
        data = load_sparse(path, gamma)

    density = (data.X.nnz if data.is_sparse else np.count_nonzero(data.X)) / (data.m * data.n)
    descriptor = {**descriptor, "m": data.m, "n": data.n, "gamma": gamma, "source": str(path),
                  "density": descriptor.get("density", density), "seed": descriptor.get("seed")}

    return data, descriptor


def _leader(data: ProblemData, report_w: np.ndarray | None) -> float | None:
    return None if report_w is None else leader_objective(data, report_w)


def run_method(data: ProblemData, prob: SclsProblem, method: Method, cfg: SolverConfig,
               instance: dict) -> tuple[RunRecord, SolveReport | None]:
    if method is Method.ORACLE:
        with Stopwatch() as watch:
            sol = solve_trs(prob)

        try:
            point = recover(prob, sol.r_star)
            w, alpha = point.w, point.alpha
        except DegeneratePole:
            w, alpha = None, None

        record = record_from_oracle(instance, cfg, sol, watch.elapsed, alpha, w, _leader(data, w))
        try:
            check_kkt(prob, sol.r_star, KKT_TOL)
        except NumericalError as e:
            _log.warning("oracle solution failed its own certificate: %s", e)
            record.certified = False

        return record, None

    solver = solve_cd_admm if method is Method.CD_ADMM else solve_admm
    report = solver(prob, cfg)

    return record_from_report(instance, method, cfg, report, _leader(data, report.w_recovered)), report


def certify(prob: SclsProblem, record: RunRecord, report: SolveReport):
    try:
        check_kkt(prob, report.s_star, KKT_TOL)
        record.certified = True
    except NumericalError as e:
        _log.info("solution not certified: %s", e)
        record.certified = False


def cmd_gen(args: argparse.Namespace) -> int:
    spec = spec_from_args(args)
    data = generate(spec)

    descriptor = spec.descriptor()
    instance_path, descriptor_path = instance_paths(args.out, instance_stem(descriptor))
    os.makedirs(args.out, exist_ok=True)

    write_sparse(data, instance_path)
    write_descriptor(descriptor, descriptor_path)

    json.dump({**descriptor, "instance": str(instance_path), "descriptor": str(descriptor_path)}, sys.stdout,
              indent=2, sort_keys=True)
    sys.stdout.write("\n")

    return EXIT_CONVERGED


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = config_from_args(args, record_trace=args.trace is not None)
    data, instance = load_instance(args)
    prob = compile_problem(data)
    method = Method(args.method)

    record, report = run_method(data, prob, method, cfg, instance)

    if report is not None:
        if args.check:
            try:
                record.attach_oracle(solve_trs(prob).objective)
            except DimensionTooLarge as e:
                _log.warning("no oracle comparison: %s", e)
            certify(prob, record, report)

        if args.trace is not None:
            write_trace(report, args.trace)

    dump_record(record)

    return EXIT_CONVERGED if record.converged else EXIT_NOT_CONVERGED


def _grid(args: argparse.Namespace) -> list[dict]:
    values = (args.m, args.n, args.density, args.gamma, args.scenario)

    return [dict(zip(GRID_KEYS, combo)) for combo in itertools.product(*values)]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        _log.warning("ignoring non-integer %s=%r", THREADS_ENV, os.environ[THREADS_ENV])
        return 1


def _map_cells(func, cells: list, *extra) -> list:
    workers = min(_workers(), len(cells)) or 1
    if workers == 1:
        return [func(cell, *extra) for cell in cells]

    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, cells, *(itertools.repeat(item) for item in extra)))


def compare_cell(cell: dict, base: dict, cfg: SolverConfig, methods: tuple[Method, ...], trials: int) -> list[dict]:
    """All trials of one grid cell. Errors mark the affected rows instead of propagating."""
    rows = []

    for trial in range(trials):
        spec = _cell_spec(base, cell, trial)
        row_base = {**cell, "trial": trial, "seed": spec.seed}

        try:
            data = generate(spec)
            prob = compile_problem(data)
        except SclsError as e:
            rows.extend({**row_base, "method": m.value, "status": f"failed: {e}"} for m in methods)
            continue

        try:
            oracle = solve_trs(prob)
        except DimensionTooLarge as e:
            _log.info("cell %s: oracle skipped (%s)", cell, e)
            oracle = None
        except SclsError as e:
            rows.extend({**row_base, "method": m.value, "status": f"failed: oracle: {e}"} for m in methods)
            continue

        for method in methods:
            if method is Method.ORACLE and oracle is None:
                rows.append({**row_base, "method": method.value, "status": "skipped"})
                continue

            try:
                record, report = run_method(data, prob, method, cfg, spec.descriptor())
            except SclsError as e:
                rows.append({**row_base, "method": method.value, "status": f"failed: {e}"})
                continue

            if oracle is not None:
                record.attach_oracle(oracle.objective)
                if report is not None:
                    certify(prob, record, report)

            rows.append({
                **row_base,
                "method": method.value,
                "status": "ok" if oracle is not None else "skipped",
                "rel_err": record.rel_err_vs_oracle,
                "objective": record.objective,
                "iterations": record.iterations,
                "converged": record.converged,
                "certified": record.certified,
                "factorizations": record.factorizations,
                "triangular_solves": record.triangular_solves,
                "solve_time": record.solve_time,
            })

    return rows


def _cell_spec(base: dict, cell: dict, trial: int) -> GenSpec:
    return GenSpec(**{**base, **cell, "seed": base["seed"] + trial})


def summarize_compare(rows: list[dict]) -> pd.DataFrame:
    """One row per grid cell and method: AVG/MIN/MAX relative error against the oracle plus run statistics."""
    runs = pd.DataFrame(rows).reindex(columns=[*GRID_KEYS, "method", "trial", "seed", "status", *RUN_COLUMNS])
    keys = [*GRID_KEYS, "method"]
    summary = []

    for key, group in runs.groupby(keys, sort=False):
        failed = group["status"].str.startswith("failed")
        solved = group[~failed]
        rel = group.loc[group["status"] == "ok", "rel_err"].astype(float)

        if failed.any():
            status = "failed"
        elif len(rel) < len(group):
            status = "skipped"
        else:
            status = "ok"

        summary.append({
            **dict(zip(keys, key)),
            "trials": len(group),
            "status": status,
            "rel_err_avg": rel.mean(),
            "rel_err_min": rel.min(),
            "rel_err_max": rel.max(),
            "iterations_avg": solved["iterations"].astype(float).mean(),
            "factorizations_avg": solved["factorizations"].astype(float).mean(),
            "solve_time_avg": solved["solve_time"].astype(float).mean(),
            "all_converged": bool(len(solved)) and bool(solved["converged"].eq(True).all()),
            "all_certified": bool(len(solved)) and bool(solved["certified"].ne(False).all()),
        })

    return pd.DataFrame(summary)


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    methods = tuple(Method(method) for method in args.method)
    base = {"noise_sigma": args.noise, "seed": args.seed, "modest_scale": args.modest_scale,
            "severe_scale": args.severe_scale}

    rows = list(itertools.chain.from_iterable(_map_cells(compare_cell, _grid(args), base, cfg, methods,
                                                         args.trials)))
    write_table(summarize_compare(rows), args.out)

    return EXIT_CONVERGED


def bench_cell(cell: dict, base: dict, cfg: SolverConfig, repeats: int, with_oracle: bool) -> dict:
    row = dict(cell)

    try:
        prob = compile_problem(generate(_cell_spec(base, cell, 0)))
    except SclsError as e:
        return {**row, "status": f"failed: {e}"}

    timings: dict[str, list[SolveReport]] = {"admm": [], "cd_admm": []}
    try:
        for _ in range(repeats):
            timings["admm"].append(solve_admm(prob, cfg))
            timings["cd_admm"].append(solve_cd_admm(prob, cfg))
    except SclsError as e:
        return {**row, "status": f"failed: {e}"}

    for name, reports in timings.items():
        row[f"{name}_time"] = statistics.median(report.solve_time for report in reports)
        row[f"{name}_prepare_time"] = statistics.median(report.prepare_time for report in reports)
        row[f"{name}_iterate_time"] = statistics.median(report.iterate_time for report in reports)
        row[f"{name}_iterations"] = reports[-1].iterations
        row[f"{name}_factorizations"] = reports[-1].factorizations
        row[f"{name}_triangular_solves"] = reports[-1].triangular_solves

    row["ratio_admm_cd"] = row["admm_time"] / row["cd_admm_time"]

    if with_oracle:
        oracle_times = []
        try:
            for _ in range(repeats):
                with Stopwatch() as watch:
                    solve_trs(prob)
                oracle_times.append(watch.elapsed)
            row["oracle_time"] = statistics.median(oracle_times)
            row["ratio_oracle_cd"] = row["oracle_time"] / row["cd_admm_time"]
        except DimensionTooLarge:
            row["oracle_time"] = np.nan

    row["status"] = "ok"

    return row


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    base = {"noise_sigma": args.noise, "seed": args.seed, "modest_scale": args.modest_scale,
            "severe_scale": args.severe_scale}

    rows = _map_cells(bench_cell, _grid(args), base, cfg, args.repeats, args.with_oracle)
    write_table(pd.DataFrame(rows), args.out)

    return EXIT_CONVERGED
