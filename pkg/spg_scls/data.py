"""Synthetic instances, provider-target scenarios and the instance file formats.

Sparse text format::

    m n nnz
    row col value        (nnz lines, 0-indexed)
    y_0 ... y_(m-1)      (m lines)
    z_0 ... z_(m-1)      (m lines)

Numbers are written with 17 significant digits so that a write/load round trip is exact.
"""

import dataclasses
import enum
import json
import logging
import os

import numpy as np
import pandas as pd
import scipy.sparse as sp

from . import ProblemData, validate
from .exceptions import ConfigError, IndexOutOfRange, ParseError, SchemaError

_log = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.1
NUMBER_FORMAT = ".17g"
CSV_FLOAT_FORMAT = "%.17g"
NAN_SPELLINGS = ("nan", "+nan", "-nan")


class Scenario(enum.Enum):
    MODEST = "modest"
    SEVERE = "severe"
    EXPLICIT = "explicit"


@dataclasses.dataclass(frozen=True)
class GenSpec:
    m: int
    n: int
    density: float = 1.0
    noise_sigma: float = 0.1
    seed: int = 0
    scenario: Scenario = Scenario.MODEST
    z_file: str | None = None
    gamma: float = DEFAULT_GAMMA
    modest_scale: float = 0.5
    severe_scale: float = 2.0

    def __post_init__(self):
        if not isinstance(self.scenario, Scenario):
            object.__setattr__(self, "scenario", Scenario(self.scenario))

        if self.m < 1 or self.n < 1:
            raise ConfigError(f"m and n must be at least 1, got m={self.m}, n={self.n}")
        if not 0 < self.density <= 1:
            raise ConfigError(f"density must be in (0, 1], got {self.density!r}")
        if not self.noise_sigma >= 0:
            raise ConfigError(f"noise_sigma must be nonnegative, got {self.noise_sigma!r}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma!r}")
        if self.scenario is Scenario.EXPLICIT and self.z_file is None:
            raise ConfigError("the explicit scenario needs a z file")

    def replace(self, **changes) -> "GenSpec":
        return dataclasses.replace(self, **changes)

    def descriptor(self) -> dict:
        return {
            "m": self.m, "n": self.n, "density": self.density, "gamma": self.gamma, "seed": self.seed,
            "noise_sigma": self.noise_sigma, "scenario": self.scenario.value,
        }


def synthesize_z(y: np.ndarray, u: np.ndarray, scenario: Scenario, modest_scale: float = 0.5,
                 severe_scale: float = 2.0) -> np.ndarray:
    """``z = y + c sigma_y u`` with ``c`` the scenario intensity and ``sigma_y`` the sample deviation of ``y``."""
    if scenario is Scenario.EXPLICIT:
        raise ConfigError("explicit targets are read from a z column or z file, not synthesized")

    sigma_y = float(np.std(y, ddof=1)) if len(y) > 1 else 0.0
    if sigma_y == 0:
        sigma_y = 1.0

    scale = {Scenario.MODEST: modest_scale, Scenario.SEVERE: severe_scale}[scenario]

    return y + scale * sigma_y * u


def read_vector(path: str | os.PathLike, length: int) -> np.ndarray:
    values = []
    with open(path) as f:
        for line_nr, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                values.append(float(line))
            except ValueError as e:
                raise ParseError(f"bad number {line.strip()!r} in {os.fspath(path)}", line_nr, 1) from e

    if len(values) != length:
        raise SchemaError(f"{os.fspath(path)} holds {len(values)} values, expected {length}")

    return np.array(values)


def generate_with_truth(spec: GenSpec) -> tuple[ProblemData, np.ndarray]:
    rng = np.random.default_rng(spec.seed)

    if spec.density >= 1:
        X = rng.standard_normal((spec.m, spec.n))
    else:
        X = sp.random(spec.m, spec.n, density=spec.density, format="csr", random_state=rng,
                      data_rvs=rng.standard_normal)

    w0 = rng.standard_normal(spec.n)
    noise = rng.standard_normal(spec.m)
    u = rng.standard_normal(spec.m)

    y = np.asarray(X @ w0).ravel() + spec.noise_sigma * noise

    if spec.scenario is Scenario.EXPLICIT:
        z = read_vector(spec.z_file, spec.m)
    else:
        z = synthesize_z(y, u, spec.scenario, spec.modest_scale, spec.severe_scale)

    data = ProblemData(X=X, y=y, z=z, gamma=spec.gamma)
    validate(data)

    _log.debug("generated instance %s", spec.descriptor())

    return data, w0


def generate(spec: GenSpec) -> ProblemData:
    return generate_with_truth(spec)[0]


def generate_planted(m: int, eigenvalues: np.ndarray, multiplier: float, gamma: float = DEFAULT_GAMMA,
                     seed: int = 0) -> tuple[ProblemData, np.ndarray]:
    """An instance with ``n = len(eigenvalues) - 1`` features whose compiled ``H`` has exactly ``eigenvalues``
    (in a random eigenbasis) and whose sphere minimizer is the bottom eigenvector with sphere multiplier
    ``multiplier``. Returns the data and that minimizer.

    ``Lhat = Q diag(sqrt(h)) R^T`` with ``Q`` orthonormal (m x dim) and ``R`` orthogonal, so ``H = R diag(h) R^T``;
    the labels are then chosen so that ``g = -(H + multiplier I) R e_0``.
    """
    h = np.asarray(eigenvalues, dtype=np.float64)
    dim = len(h)

    if dim < 2:
        raise ConfigError(f"need at least two eigenvalues, got {dim}")
    if not np.all(h > 0):
        raise ConfigError("planted eigenvalues must be positive")
    if np.argmin(h) != 0:
        raise ConfigError("the first planted eigenvalue must be the smallest")
    if not multiplier > -h[0]:
        raise ConfigError(f"multiplier must exceed {-h[0]!r} for a unique minimizer, got {multiplier!r}")
    if m < dim:
        raise ConfigError(f"need m >= {dim} samples, got {m}")
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma!r}")

    rng = np.random.default_rng(seed)
    Q = np.linalg.qr(rng.standard_normal((m, dim)))[0]
    R = np.linalg.qr(rng.standard_normal((dim, dim)))[0]

    Lhat = (Q * np.sqrt(h)) @ R.T
    X = 2 / np.sqrt(gamma) * Lhat[:, :-1]
    z = 2 * Lhat[:, -1]
    y = z / 2 + (h[0] + multiplier) / np.sqrt(h[0]) * Q[:, 0]

    data = ProblemData(X=X, y=y, z=z, gamma=gamma)
    validate(data)

    return data, R[:, 0].copy()


@dataclasses.dataclass(frozen=True)
class CsvSchema:
    y_column: str
    z_column: str | None = None
    feature_columns: tuple[str, ...] | None = None
    gamma: float = DEFAULT_GAMMA
    scenario: Scenario = Scenario.MODEST
    seed: int = 0
    modest_scale: float = 0.5
    severe_scale: float = 2.0
    z_file: str | None = None


def _first_bad_cell(raw: pd.DataFrame) -> tuple[int, str] | None:
    """Row label and column of the first cell that is not a number; spelled-out NaNs are left to ``validate``."""
    numeric = raw.apply(pd.to_numeric, errors="coerce")
    literal_nan = raw.apply(lambda col: col.str.lower().isin(NAN_SPELLINGS))
    bad = (numeric.isna() & ~literal_nan).to_numpy()

    if not bad.any():
        return None

    row, col = np.argwhere(bad)[0]
    return raw.index[row], raw.columns[col]


def load_csv(path: str | os.PathLike, schema: CsvSchema) -> ProblemData:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{os.fspath(path)} is empty") from None
    except pd.errors.ParserError as e:
        raise ParseError(f"{os.fspath(path)}: {e}") from e

    frame.columns = [str(name).strip() for name in frame.columns]
    header = list(frame.columns)

    if schema.y_column not in header:
        raise SchemaError(f"label column {schema.y_column!r} not in header {header}")
    if schema.z_column is not None and schema.z_column not in header:
        raise SchemaError(f"target column {schema.z_column!r} not in header {header}")

    reserved = {schema.y_column, schema.z_column}
    features = schema.feature_columns
    if features is None:
        features = tuple(name for name in header if name not in reserved)
    missing = [name for name in features if name not in header]
    if missing:
        raise SchemaError(f"feature columns {missing} not in header {header}")
    if not features:
        raise SchemaError("no feature columns")

    used = [*features, schema.y_column, *([schema.z_column] if schema.z_column is not None else [])]
    raw = frame[used].apply(lambda col: col.str.strip())
    raw = raw[~raw.eq("").all(axis=1)]

    if raw.empty:
        raise SchemaError(f"{os.fspath(path)} has no data rows")

    bad = _first_bad_cell(raw)
    if bad is not None:
        row, column = bad
        raise ParseError(f"bad number {frame.at[row, column]!r}", int(row) + 2, column)

    # float() per cell keeps the 17-digit round trip exact
    values = raw.astype(np.float64)
    y = values[schema.y_column].to_numpy()

    if schema.z_column is not None:
        z = values[schema.z_column].to_numpy()
    elif schema.scenario is Scenario.EXPLICIT and schema.z_file is not None:
        z = read_vector(schema.z_file, len(y))
    else:
        u = np.random.default_rng(schema.seed).standard_normal(len(y))
        z = synthesize_z(y, u, schema.scenario, schema.modest_scale, schema.severe_scale)

    data = ProblemData(X=values[list(features)].to_numpy(), y=y, z=z, gamma=schema.gamma)
    validate(data)

    return data


def write_csv(data: ProblemData, path: str | os.PathLike):
    frame = pd.DataFrame(data.dense_X(), columns=[f"x{j}" for j in range(data.n)])
    frame["y"] = data.y
    frame["z"] = data.z

    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def write_sparse(data: ProblemData, path: str | os.PathLike):
    X = sp.coo_matrix(data.X)
    X.sum_duplicates()

    with open(path, "w") as f:
        f.write(f"{data.m} {data.n} {X.nnz}\n")
        f.writelines(f"{i} {j} {format(v, NUMBER_FORMAT)}\n" for i, j, v in zip(X.row, X.col, X.data))
        f.writelines(f"{format(v, NUMBER_FORMAT)}\n" for v in data.y)
        f.writelines(f"{format(v, NUMBER_FORMAT)}\n" for v in data.z)


def load_sparse(path: str | os.PathLike, gamma: float = DEFAULT_GAMMA) -> ProblemData:
    with open(path) as f:
        lines = [(line_nr, line.split()) for line_nr, line in enumerate(f, start=1) if line.strip()]

    if not lines:
        raise ParseError(f"{os.fspath(path)} is empty", 1)

    header_line, header = lines[0]
    try:
        m, n, nnz = (int(token) for token in header)
    except ValueError as e:
        raise ParseError(f"header must be 'm n nnz', got {' '.join(header)!r}", header_line) from e

    if m < 1 or n < 1:
        raise ParseError(f"matrix must be at least 1x1, got {m}x{n}", header_line)
    if nnz < 0:
        raise ParseError(f"nnz must be nonnegative, got {nnz}", header_line)
    if len(lines) != 1 + nnz + 2 * m:
        raise ParseError(f"expected {1 + nnz + 2 * m} nonblank lines, got {len(lines)}", lines[-1][0])

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)

    for k, (line_nr, tokens) in enumerate(lines[1:1 + nnz]):
        if len(tokens) != 3:
            raise ParseError(f"expected 'row col value', got {' '.join(tokens)!r}", line_nr)
        try:
            rows[k], cols[k] = int(tokens[0]), int(tokens[1])
        except ValueError as e:
            raise ParseError(f"bad index in {' '.join(tokens)!r}", line_nr, 1) from e
        try:
            vals[k] = float(tokens[2])
        except ValueError as e:
            raise ParseError(f"bad value {tokens[2]!r}", line_nr, 3) from e

        if not (0 <= rows[k] < m and 0 <= cols[k] < n):
            raise IndexOutOfRange(f"entry ({rows[k]}, {cols[k]}) on line {line_nr} is outside {m}x{n}")

    def dense_block(block: list[tuple[int, list[str]]]) -> np.ndarray:
        out = np.empty(len(block))
        for k, (line_nr, tokens) in enumerate(block):
            if len(tokens) != 1:
                raise ParseError(f"expected one value, got {' '.join(tokens)!r}", line_nr)
            try:
                out[k] = float(tokens[0])
            except ValueError as e:
                raise ParseError(f"bad value {tokens[0]!r}", line_nr, 1) from e
        return out

    y = dense_block(lines[1 + nnz:1 + nnz + m])
    z = dense_block(lines[1 + nnz + m:])

    X = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    data = ProblemData(X=X, y=y, z=z, gamma=gamma)
    validate(data)

    return data


def write_descriptor(descriptor: dict, path: str | os.PathLike):
    with open(path, "w") as f:
        json.dump(descriptor, f, indent=2, sort_keys=True)
        f.write("\n")


def read_descriptor(path: str | os.PathLike) -> dict:
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"descriptor {os.fspath(path)} is not valid JSON", e.lineno, e.colno) from e
