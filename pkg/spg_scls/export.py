import dataclasses
import enum
import functools
import json
import math
import os
import pathlib
import sys

import numpy as np
import pandas as pd
from jsonschema import Draft202012Validator

from . import SolverConfig
from .admm import SolveReport
from .exceptions import SchemaError
from .oracle import OracleSolution
from .tools import rel_err

SCHEMA_PATH = pathlib.Path(__file__).parent / "schemas" / "run_record.schema.json"
TRACE_COLUMNS = ("iter", "r_pri", "r_dual", "objective")
TRACE_FLOAT_FORMAT = "%.17g"


class Method(enum.Enum):
    ADMM = "admm"
    CD_ADMM = "cd-admm"
    ORACLE = "oracle"


@dataclasses.dataclass
class RunRecord:
    instance: dict
    method: Method
    config: dict
    objective: float
    iterations: int
    converged: bool
    factorizations: int
    triangular_solves: int
    solve_time: float
    prepare_time: float = 0.0
    r_pri: float | None = None
    r_dual: float | None = None
    kkt_residual: float | None = None
    alpha_recovered: float | None = None
    w_recovered: list[float] | None = None
    leader_objective: float | None = None
    multiplier: float | None = None
    hard_case: bool | None = None
    certified: bool | None = None
    rel_err_vs_oracle: float | None = None

    def attach_oracle(self, oracle_objective: float):
        self.rel_err_vs_oracle = rel_err(self.objective, oracle_objective)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["method"] = self.method.value

        return {key: _json_safe(value) for key, value in out.items()}


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_json_safe(item) for item in value]

    return value


def config_echo(cfg: SolverConfig) -> dict:
    return {
        "rho": cfg.rho, "eps": cfg.eps, "max_iters": cfg.max_iters, "init": cfg.init.value,
        "init_seed": cfg.init_seed, "path": cfg.path.value,
    }


def record_from_report(instance: dict, method: Method, cfg: SolverConfig, report: SolveReport,
                       leader_objective: float | None = None) -> RunRecord:
    return RunRecord(
        instance=instance,
        method=method,
        config=config_echo(cfg),
        objective=report.objective,
        iterations=report.iterations,
        converged=report.converged,
        factorizations=report.factorizations,
        triangular_solves=report.triangular_solves,
        solve_time=report.solve_time,
        prepare_time=report.prepare_time,
        r_pri=report.r_pri,
        r_dual=report.r_dual,
        kkt_residual=report.kkt_residual,
        alpha_recovered=report.alpha_recovered,
        w_recovered=None if report.w_recovered is None else report.w_recovered.tolist(),
        leader_objective=leader_objective,
    )


def record_from_oracle(instance: dict, cfg: SolverConfig, sol: OracleSolution, solve_time: float,
                       alpha_recovered: float | None = None, w_recovered: np.ndarray | None = None,
                       leader_objective: float | None = None) -> RunRecord:
    return RunRecord(
        instance=instance,
        method=Method.ORACLE,
        config=config_echo(cfg),
        objective=sol.objective,
        iterations=0,
        converged=True,
        factorizations=0,
        triangular_solves=0,
        solve_time=solve_time,
        alpha_recovered=alpha_recovered,
        w_recovered=None if w_recovered is None else w_recovered.tolist(),
        leader_objective=leader_objective,
        multiplier=sol.multiplier,
        hard_case=sol.hard_case,
        certified=True,
    )


@functools.cache
def _validator() -> Draft202012Validator:
    with open(SCHEMA_PATH) as f:
        return Draft202012Validator(json.load(f))


def validate_record(record: dict):
    errors = sorted(_validator().iter_errors(record), key=lambda e: list(e.path))
    if errors:
        raise SchemaError("; ".join(f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors))


def dump_record(record: RunRecord, stream=None):
    payload = record.to_dict()
    validate_record(payload)

    stream = sys.stdout if stream is None else stream
    json.dump(payload, stream, indent=2)
    stream.write("\n")


def write_trace(report: SolveReport, path: str | os.PathLike):
    trace = pd.DataFrame(report.residual_trace or [], columns=list(TRACE_COLUMNS))
    trace.to_csv(path, index=False, float_format=TRACE_FLOAT_FORMAT)


def write_table(table: pd.DataFrame, out: str | os.PathLike | None = None, stream=None):
    """CSV when ``out`` is given, JSON records on the stream otherwise."""
    if out is not None:
        table.to_csv(out, index=False)
        return

    stream = sys.stdout if stream is None else stream
    stream.write(table.to_json(orient="records", indent=2))
    stream.write("\n")
