"""Panel container, cross-sectional permutations and CSV ingestion.

A :class:`Panel` stores an ``n x T`` matrix with series in rows and time in
columns.  CSV files are expected in the FRED-MD layout: a header row of
series ids, the first column holding the time index, and optionally a
second row starting with ``Transform`` that carries the transform codes.

Transform codes::

    1  level            x_t
    2  first difference x_t - x_{t-1}
    3  second diff.     (x_t - x_{t-1}) - (x_{t-1} - x_{t-2})
    4  log              log x_t
    5  log difference   log x_t - log x_{t-1}
    6  2nd log diff.
    7  diff. of growth  (x_t/x_{t-1} - 1) - (x_{t-1}/x_{t-2} - 1)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, IngestError

# observations lost at the start of the sample for each transform code
TCODE_LOSS = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}


@dataclass(frozen=True)
class Panel:
    """Immutable ``n x T`` panel of real observations."""

    data: np.ndarray
    series_ids: tuple = ()
    time_index: tuple = ()
    standardized: bool = False
    unit_variance: bool = False

    def __post_init__(self):
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim != 2:
            raise DimensionError(f"panel data must be 2-d, got shape {data.shape}")
        n, T = data.shape
        if n < 1 or T < 2:
            raise DimensionError(f"need n >= 1 and T >= 2, got n={n}, T={T}")
        if not np.all(np.isfinite(data)):
            raise IngestError("panel contains NaN or Inf entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        ids = tuple(self.series_ids) if len(self.series_ids) else tuple(f"x{i}" for i in range(n))
        times = tuple(self.time_index) if len(self.time_index) else tuple(range(T))
        if len(ids) != n:
            raise DimensionError(f"{len(ids)} series ids for {n} rows")
        if len(times) != T:
            raise DimensionError(f"{len(times)} time labels for {T} columns")
        object.__setattr__(self, "series_ids", ids)
        object.__setattr__(self, "time_index", times)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]

    def demeaned(self) -> np.ndarray:
        """Row-demeaned copy of the data (a no-op copy if already standardized)."""
        if self.standardized:
            return np.array(self.data)
        return self.data - self.data.mean(axis=1, keepdims=True)

    def rows(self, idx) -> "Panel":
        idx = np.asarray(idx)
        return Panel(
            self.data[idx],
            tuple(self.series_ids[i] for i in idx),
            self.time_index,
            self.standardized,
            self.unit_variance,
        )

    def window(self, start: int, stop: int) -> "Panel":
        """Time slice ``[start, stop)``; standardization flags are dropped."""
        return Panel(self.data[:, start:stop], self.series_ids, self.time_index[start:stop])

    def scaled(self, s: float) -> "Panel":
        return Panel(self.data * s, self.series_ids, self.time_index, self.standardized, False)


def standardize(p: Panel, unit_variance: bool = True) -> Panel:
    """Remove each row's mean and optionally scale to unit sample variance."""
    x = p.data - p.data.mean(axis=1, keepdims=True)
    if unit_variance:
        sd = np.sqrt(np.mean(x * x, axis=1, keepdims=True))
        if np.any(sd == 0):
            bad = [p.series_ids[i] for i in np.flatnonzero(sd[:, 0] == 0)]
            raise IngestError(f"zero-variance series: {bad}")
        x = x / sd
    return Panel(x, p.series_ids, p.time_index, True, unit_variance)


@dataclass(frozen=True)
class Permutation:
    """Bijection of ``{0, ..., n-1}``; ``map[i]`` is the source row of output row ``i``."""

    map: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.map, dtype=np.int64)
        if m.ndim != 1 or not np.array_equal(np.sort(m), np.arange(m.size)):
            raise DimensionError("permutation map must be a bijection of 0..n-1")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "map", m)

    def __len__(self) -> int:
        return self.map.size

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.map)
        inv[self.map] = np.arange(self.map.size)
        return Permutation(inv)


def compose(b: Permutation, a: Permutation) -> Permutation:
    """Permutation equivalent to applying ``a`` first and then ``b`` to a panel."""
    if len(a) != len(b):
        raise DimensionError("cannot compose permutations of different lengths")
    return Permutation(a.map[b.map])


def permute(p: Panel, perm: Permutation) -> Panel:
    """Reorder rows: output row ``i`` is input row ``perm.map[i]``."""
    if len(perm) != p.n:
        raise DimensionError(f"permutation of length {len(perm)} for panel with n={p.n}")
    return p.rows(perm.map)


def random_permutations(n: int, R: int, seed: int) -> list[Permutation]:
    """``R`` uniform permutations of ``n`` items from a seeded generator."""
    if n < 1 or R < 1:
        raise DimensionError("need n >= 1 and R >= 1")
    rng = np.random.default_rng(seed)
    # Generator.permutation is a Fisher-Yates shuffle
    return [Permutation(rng.permutation(n)) for _ in range(R)]


def canonical_order(data: np.ndarray) -> np.ndarray:
    """Row order depending only on row contents, never on input labels.

    Sorting rows lexicographically maps every relabeling of a panel onto the
    same representative, which makes permutation-averaged procedures exactly
    invariant once the random permutations are applied on top of it.
    """
    data = np.asarray(data)
    return np.lexsort(data.T[::-1])


def apply_tcode(x: np.ndarray, code: int) -> np.ndarray:
    """Apply one transform code to a 1-d series; leading lost values are NaN."""
    x = np.asarray(x, dtype=float)
    if code not in TCODE_LOSS:
        raise IngestError(f"unknown transform code {code}")
    if code in (4, 5, 6):
        if np.any(x <= 0):
            raise IngestError(f"log transform (code {code}) on non-positive values")
        x = np.log(x)
    out = np.full_like(x, np.nan)
    if code in (1, 4):
        out[:] = x
    elif code in (2, 5):
        out[1:] = np.diff(x)
    elif code in (3, 6):
        out[2:] = np.diff(x, n=2)
    elif code == 7:
        if np.any(x[:-1] == 0):
            raise IngestError("growth-rate transform (code 7) on zero values")
        g = x[1:] / x[:-1] - 1.0
        out[2:] = np.diff(g)
    return out


def read_tcodes(path: str | Path) -> dict[str, int]:
    """Read a sidecar CSV of ``series_id,tcode`` rows (header optional)."""
    codes = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            if len(row) < 2:
                raise IngestError(f"tcode row needs two fields: {row}")
            try:
                codes[row[0].strip()] = int(float(row[1]))
            except ValueError:
                if not codes:  # header line
                    continue
                raise IngestError(f"non-integer tcode in row {row}") from None
    return codes


def ingest_csv(
    path: str | Path,
    tcodes: Sequence[int] | dict | None = None,
    unit_variance: bool = True,
) -> Panel:
    """Read a CSV panel, apply transform codes, balance and standardize it.

    ``tcodes`` may be a sequence aligned with the columns, a mapping from
    series id to code, or ``None``.  When ``None`` and the file has a
    ``Transform`` row (FRED-MD layout), those codes are used; otherwise
    every series is taken in levels.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 3:
        raise IngestError("CSV needs a header row and at least two data rows")
    header = rows[0]
    ids = [h.strip() for h in header[1:]]
    n = len(ids)
    if n < 1:
        raise IngestError("no series columns in header")
    body = rows[1:]
    file_codes = None
    if body[0][0].strip().lower().startswith("transform"):
        file_codes = body[0][1:]
        body = body[1:]

    times, values = [], []
    for lineno, r in enumerate(body, start=2):
        if len(r) != n + 1:
            raise IngestError(f"ragged row at line {lineno}: {len(r)} fields, expected {n + 1}")
        times.append(r[0].strip())
        try:
            values.append([float(c) for c in r[1:]])
        except ValueError:
            raise IngestError(f"non-numeric cell at line {lineno}") from None
    X = np.array(values, dtype=float).T  # n x T
    if not np.all(np.isfinite(X)):
        raise IngestError("missing or non-finite cells; impute before ingestion")

    if tcodes is None and file_codes is not None:
        if len(file_codes) != n:
            raise IngestError("Transform row length does not match header")
        try:
            tcodes = [int(float(c)) for c in file_codes]
        except ValueError:
            raise IngestError("non-numeric transform code") from None
    if tcodes is None:
        codes = [1] * n
    elif isinstance(tcodes, dict):
        missing = [s for s in ids if s not in tcodes]
        if missing:
            raise IngestError(f"no tcode for series {missing[:5]}")
        codes = [int(tcodes[s]) for s in ids]
    else:
        codes = [int(c) for c in tcodes]
        if len(codes) != n:
            raise IngestError(f"{len(codes)} tcodes for {n} series")

    Y = np.vstack([apply_tcode(X[i], codes[i]) for i in range(n)])
    lost = max(TCODE_LOSS[c] for c in codes)
    Y = Y[:, lost:]
    times = times[lost:]
    if Y.shape[1] < 2:
        raise IngestError("fewer than two observations after transforms")
    if not np.all(np.isfinite(Y)):
        raise IngestError("non-finite values after transforms")
    flat = np.ptp(Y, axis=1) == 0
    if np.any(flat):
        raise IngestError(f"zero-variance series: {[ids[i] for i in np.flatnonzero(flat)]}")
    return standardize(Panel(Y, ids, times), unit_variance=unit_variance)


def write_csv(p: Panel, path: str | Path, digits: int = 12) -> None:
    """Write a panel in the same layout :func:`ingest_csv` reads (time in rows)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", *p.series_ids])
        for t, label in enumerate(p.time_index):
            w.writerow([label, *(f"{v:.{digits}g}" for v in p.data[:, t])])
