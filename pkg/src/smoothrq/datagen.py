"""Dataset container, CSV ingestion, and seeded synthetic generators.

The design matrix convention used throughout the package: the intercept is an
explicit column of ones and it is always the *last* column.  Estimators never
add or remove columns behind the caller's back.

Synthetic data is drawn from a Philox counter-based generator so that a
dataset is fully determined by (algorithm, seed).  All randomness is consumed
as a single stream of uniform doubles in a documented order; the non-uniform
variates are produced by explicit transforms (Box-Muller, inverse CDF) rather
than by opaque library distributions, so the streams can be reproduced
outside this package.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

__all__ = [
    "DataError",
    "Dataset",
    "CsvSchema",
    "SynthConfig",
    "KIND_HETERO_NORMAL",
    "KIND_PARETO",
    "load_csv",
    "write_csv",
    "gen_hetero_normal",
    "gen_pareto",
    "load_swiss",
    "load_anscombe",
    "dataset_fingerprint",
]

KIND_HETERO_NORMAL = "hetero-normal"
KIND_PARETO = "pareto"

INTERCEPT_NAME = "intercept"

# smallest uniform draw accepted by the log/power transforms below
_U_FLOOR = 2.0 ** -53


class DataError(ValueError):
    """Raised for malformed input data: bad CSV cells, shape problems, etc."""


@dataclass
class Dataset:
    """Regression data with an explicit intercept column.

    Attributes
    ----------
    X : ndarray, shape (n, p)
        Design matrix.  The last column is all ones (the intercept); exactly
        one such column may be present.
    y : ndarray, shape (n,)
        Response vector.
    column_names : tuple of str
        One name per column of ``X``; the last is ``"intercept"``.
    response_name : str
    """

    X: np.ndarray
    y: np.ndarray
    column_names: tuple[str, ...] = ()
    response_name: str = "y"

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        n, p = self.X.shape
        if not self.column_names:
            self.column_names = tuple(f"x{j}" for j in range(p - 1)) + (INTERCEPT_NAME,)
        else:
            self.column_names = tuple(self.column_names)
        if len(self.column_names) != p:
            raise DataError(f"{len(self.column_names)} column names for {p} columns")
        if self.y.shape[0] != n:
            raise DataError(f"X has {n} rows but y has {self.y.shape[0]}")
        if not (n >= p >= 1):
            raise DataError(f"need n >= p >= 1, got n={n}, p={p}")
        if not np.isfinite(self.X).all() or not np.isfinite(self.y).all():
            raise DataError("dataset contains non-finite values")
        ones = [j for j in range(p) if np.all(self.X[:, j] == 1.0)]
        if ones != [p - 1]:
            raise DataError(
                "design matrix must contain exactly one all-ones intercept "
                f"column, in the last position (found ones columns at {ones})"
            )

    @classmethod
    def from_predictors(cls, x, y, names: Sequence[str] | None = None,
                        response_name: str = "y") -> "Dataset":
        """Build a Dataset from raw predictors, appending the intercept column."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        n = x.shape[0]
        X = np.hstack([x, np.ones((n, 1))])
        if names is None:
            names = [f"x{j}" for j in range(x.shape[1])]
        return cls(X=X, y=y, column_names=tuple(names) + (INTERCEPT_NAME,),
                   response_name=response_name)

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def n_coef(self) -> int:
        return self.X.shape[1]

    def predict(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float).ravel()
        if beta.shape[0] != self.n_coef:
            raise DataError(f"beta has {beta.shape[0]} entries, expected {self.n_coef}")
        return self.X @ beta

    def residuals(self, beta) -> np.ndarray:
        return self.y - self.predict(beta)


@dataclass(frozen=True)
class CsvSchema:
    """How to read a CSV file: which column is the response, expected header.

    ``columns=None`` accepts whatever header the file declares; otherwise the
    file header must match exactly.
    """

    response: str
    columns: tuple[str, ...] | None = None
    delimiter: str = ","


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Read a delimited text file into a Dataset.

    Blank lines are skipped.  All cells must parse as floats; a cell that
    does not is reported with its row and column.  Predictor order follows
    the file; the intercept column is appended last.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh, delimiter=schema.delimiter))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [(i, r) for i, r in enumerate(rows, start=1) if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    _, header = rows[0]
    header = [h.strip() for h in header]
    if schema.columns is not None and tuple(header) != tuple(schema.columns):
        raise DataError(f"{path}: header {header} does not match schema {list(schema.columns)}")
    if schema.response not in header:
        raise DataError(f"{path}: response column {schema.response!r} not in header {header}")
    if len(rows) == 1:
        raise DataError(f"{path}: no data rows")
    values = np.empty((len(rows) - 1, len(header)))
    for out_i, (line_no, cells) in enumerate(rows[1:]):
        if len(cells) != len(header):
            raise DataError(f"{path}: line {line_no} has {len(cells)} fields, expected {len(header)}")
        for j, cell in enumerate(cells):
            try:
                values[out_i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {cell.strip()!r} at line {line_no}, "
                    f"column {header[j]!r}"
                ) from None
    ri = header.index(schema.response)
    pred_idx = [j for j in range(len(header)) if j != ri]
    names = [header[j] for j in pred_idx]
    return Dataset.from_predictors(values[:, pred_idx], values[:, ri],
                                   names=names, response_name=schema.response)


def _serialize_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    names = list(dataset.column_names[:-1]) + [dataset.response_name]
    buf.write(",".join(names) + "\n")
    body = np.column_stack([dataset.X[:, :-1], dataset.y])
    for row in body:
        buf.write(",".join(format(v, ".17g") for v in row) + "\n")
    return buf.getvalue()


def write_csv(dataset: Dataset, path) -> None:
    """Write predictors and response with 17 significant digits.

    17 digits round-trip IEEE doubles exactly, so load_csv(write_csv(d))
    reproduces the values bit for bit.  The intercept column is not written.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_serialize_csv(dataset))


def dataset_fingerprint(dataset: Dataset) -> dict:
    """Rows, columns, and a content hash of the canonical serialization."""
    digest = hashlib.sha256(_serialize_csv(dataset).encode("utf-8")).hexdigest()
    return {"rows": dataset.n_obs, "cols": dataset.n_coef, "sha256": digest}


@dataclass(frozen=True)
class SynthConfig:
    """Parameters for the synthetic benchmark generators.

    kind selects the noise family: "hetero-normal" draws
    y = beta0 + beta1*x + (sigma0 + sigma1*x)*z with z standard normal, and
    "pareto" adds a one-sided Pareto error e = scale * U**(-1/alpha), e >= scale.
    """

    n: int
    seed: int
    kind: str = KIND_HETERO_NORMAL
    x_range: tuple[float, float] = (0.0, 10.0)
    beta0: float = 1.0
    beta1: float = 2.0
    sigma0: float = 0.5
    sigma1: float = 0.3
    pareto_alpha: float = 2.5
    pareto_scale: float = 1.0

    def __post_init__(self):
        if self.n < 3:
            raise DataError(f"need at least 3 observations, got n={self.n}")
        if self.kind not in (KIND_HETERO_NORMAL, KIND_PARETO):
            raise DataError(f"unknown kind {self.kind!r}")
        lo, hi = self.x_range
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise DataError(f"bad x_range {self.x_range}")
        if self.sigma0 < 0 or self.sigma1 < 0 or (self.sigma0 == 0 and self.sigma1 == 0):
            raise DataError("sigma0 and sigma1 must be >= 0 and not both zero")
        if not self.pareto_alpha > 1:
            raise DataError(f"pareto_alpha must exceed 1, got {self.pareto_alpha}")
        if not self.pareto_scale > 0:
            raise DataError(f"pareto_scale must be positive, got {self.pareto_scale}")


def _uniforms(seed: int, count: int) -> np.ndarray:
    # Philox4x64-10, keyed by the seed; one stream of doubles in [2^-53, 1).
    gen = np.random.Generator(np.random.Philox(key=seed))
    return np.maximum(gen.random(count), _U_FLOOR)


def gen_hetero_normal(config: SynthConfig) -> Dataset:
    """Line plus heteroscedastic normal noise, variance growing linearly in x.

    Stream layout: the first n uniforms give x (scaled into x_range); the next
    2n give normals via Box-Muller, z_i = sqrt(-2 ln u_{2i}) * cos(2 pi u_{2i+1}).
    """
    if config.kind != KIND_HETERO_NORMAL:
        raise DataError(f"config.kind is {config.kind!r}, expected {KIND_HETERO_NORMAL!r}")
    n = config.n
    u = _uniforms(config.seed, 3 * n)
    lo, hi = config.x_range
    x = lo + (hi - lo) * u[:n]
    u1 = u[n:3 * n:2]
    u2 = u[n + 1:3 * n:2]
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    sigma = config.sigma0 + config.sigma1 * x
    y = config.beta0 + config.beta1 * x + sigma * z
    return Dataset.from_predictors(x, y, names=("x",))


def gen_pareto(config: SynthConfig) -> Dataset:
    """Line plus one-sided Pareto noise: e = scale * U**(-1/alpha), so e >= scale.

    Stream layout: first n uniforms give x, the next n give the Pareto draws.
    """
    if config.kind != KIND_PARETO:
        raise DataError(f"config.kind is {config.kind!r}, expected {KIND_PARETO!r}")
    n = config.n
    u = _uniforms(config.seed, 2 * n)
    lo, hi = config.x_range
    x = lo + (hi - lo) * u[:n]
    e = config.pareto_scale * u[n:] ** (-1.0 / config.pareto_alpha)
    y = config.beta0 + config.beta1 * x + e
    return Dataset.from_predictors(x, y, names=("x",))


def _bundled(name: str) -> Dataset:
    ref = resources.files(__package__).joinpath(f"datasets/{name}.csv")
    with resources.as_file(ref) as path:
        if name == "swiss":
            return load_csv(path, CsvSchema(response="Fertility"))
        return load_csv(path, CsvSchema(response="y1"))


def load_swiss() -> Dataset:
    """The 47-province fertility dataset: Fertility on five predictors."""
    return _bundled("swiss")


def load_anscombe() -> Dataset:
    """The y1-vs-x2 pair from the classic quartet (11 points, one predictor)."""
    full = _bundled("anscombe")
    j = full.column_names.index("x2")
    return Dataset.from_predictors(full.X[:, j], full.y,
                                   names=("x2",), response_name="y1")
