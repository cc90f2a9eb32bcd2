"""Dataset loading, splitting and synthetic generators."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "CSVParseError",
    "Dataset",
    "load_csv",
    "load_labor",
    "LABOR_COLUMNS",
    "make_conjugate",
    "simulate_garch",
]


class CSVParseError(ValueError):
    def __init__(self, path, line: int | None, column: str | None, message: str):
        self.line, self.column = line, column
        where = f"{path}"
        if line is not None:
            where += f", line {line}"
        if column is not None:
            where += f", column {column!r}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Dataset:
    """Design matrix and targets (or a return series when ``x`` is None).

    Rows ``[:n_train]`` form the training split.
    """

    y: np.ndarray
    x: np.ndarray | None = None
    n_train: int | None = None
    names: tuple = ()

    def __post_init__(self):
        n = self.y.shape[0]
        if self.x is not None and self.x.shape[0] != n:
            raise ValueError("x and y lengths differ")
        nt = n if self.n_train is None else int(self.n_train)
        if not 0 < nt <= n:
            raise ValueError("training split must be non-empty")
        object.__setattr__(self, "n_train", nt)

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def train(self) -> "Dataset":
        return Dataset(self.y[: self.n_train], None if self.x is None else self.x[: self.n_train], None, self.names)

    @property
    def test(self) -> "Dataset | None":
        if self.n_train == len(self):
            return None
        return Dataset(self.y[self.n_train :], None if self.x is None else self.x[self.n_train :], None, self.names)

    def split(self, train_fraction: float, shuffle_seed: int | None = None) -> "Dataset":
        """Split at ``floor(n * train_fraction)``; rows are permuted first when a seed is given."""
        if not 0.0 < train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1]")
        y, x = self.y, self.x
        if shuffle_seed is not None:
            perm = np.random.default_rng(shuffle_seed).permutation(len(self))
            y = y[perm]
            x = None if x is None else x[perm]
        return Dataset(y, x, max(1, int(np.floor(len(self) * train_fraction + 1e-9))), self.names)


def load_csv(path, columns: Sequence[str], categories: Mapping[str, Mapping[str, float]] | None = None) -> dict:
    """Read the named ``columns`` of a headed CSV file, in file row order.

    Cells must parse as floats unless the column has an entry in
    ``categories`` mapping labels to values.  Returns a dict of float arrays.
    Errors name the file, line number and column.
    """
    path = Path(path)
    categories = dict(categories or {})
    if not path.is_file():
        raise CSVParseError(path, None, None, "file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CSVParseError(path, 1, None, "empty file") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise CSVParseError(path, 1, missing[0], "missing column")
        idx = [header.index(c) for c in columns]
        out = {c: [] for c in columns}
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CSVParseError(path, line, None, f"expected {len(header)} fields, found {len(row)}")
            for c, j in zip(columns, idx):
                cell = row[j].strip()
                if c in categories:
                    if cell not in categories[c]:
                        raise CSVParseError(path, line, c, f"unknown label {cell!r}")
                    out[c].append(float(categories[c][cell]))
                    continue
                try:
                    out[c].append(float(cell))
                except ValueError:
                    raise CSVParseError(path, line, c, f"non-numeric value {cell!r}") from None
    return {c: np.asarray(v, dtype=float) for c, v in out.items()}


# Mroz (1987) labour force participation, as distributed with R's carData
LABOR_COLUMNS = ("lfp", "k5", "k618", "age", "wc", "hc", "lwg", "inc")
LABOR_CATEGORIES = {c: {"yes": 1.0, "no": 0.0} for c in ("lfp", "wc", "hc")}
LABOR_STANDARDIZE = ("age", "lwg", "inc")


def _labor_frame_from_rdatasets() -> dict:
    try:
        import rdatasets
    except ImportError:
        raise FileNotFoundError(
            "Labor data not found: pass a CSV path or install the optional 'rdatasets' package"
        ) from None
    df = rdatasets.data("carData", "Mroz")
    out = {}
    for c in LABOR_COLUMNS:
        col = df[c]
        if c in LABOR_CATEGORIES:
            out[c] = col.map(LABOR_CATEGORIES[c]).to_numpy(dtype=float)
        else:
            out[c] = col.to_numpy(dtype=float)
    return out


def load_labor(path=None, train_fraction: float = 0.75, shuffle_seed: int | None = 0,
               standardize: Sequence[str] = LABOR_STANDARDIZE) -> Dataset:
    """Labour force participation data: 753 rows, intercept plus 7 covariates.

    ``path`` is a CSV with columns ``lfp, k5, k618, age, wc, hc, lwg, inc``
    (yes/no for the binary ones).  Without a path the copy bundled with the
    ``rdatasets`` package is used.  The listed continuous columns are
    standardized over the full sample.  Source rows are grouped by outcome,
    hence the seeded shuffle before the split.
    """
    cols = load_csv(path, LABOR_COLUMNS, LABOR_CATEGORIES) if path is not None else _labor_frame_from_rdatasets()
    feats = []
    for c in LABOR_COLUMNS[1:]:
        v = cols[c]
        if c in standardize:
            v = (v - v.mean()) / v.std()
        feats.append(v)
    x = np.column_stack([np.ones(cols["lfp"].shape[0])] + feats)
    ds = Dataset(cols["lfp"], x, None, ("intercept",) + LABOR_COLUMNS[1:])
    return ds.split(train_fraction, shuffle_seed)


def make_conjugate(n: int = 100, d: int = 5, noise_sd: float = 1.0, seed: int = 0) -> Dataset:
    """Gaussian linear regression with standard normal design and coefficients."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    b = rng.standard_normal(d)
    y = x @ b + noise_sd * rng.standard_normal(n)
    return Dataset(y, x, None, tuple(f"b{i}" for i in range(d)))


def simulate_garch(n: int, omega: float, alpha: float, beta: float, seed: int = 0, burn: int = 500,
                   gamma: float = 0.0) -> np.ndarray:
    """Simulate a Gaussian GJR-GARCH(1,1) path (``gamma=0`` gives GARCH)."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n + burn)
    r = np.empty(n + burn)
    persistence = alpha + gamma / 2.0 + beta
    s2 = omega / (1.0 - persistence) if persistence < 1 else omega
    for t in range(n + burn):
        r[t] = np.sqrt(s2) * z[t]
        s2 = omega + (alpha + gamma * (r[t] < 0)) * r[t] ** 2 + beta * s2
    return r[burn:]
