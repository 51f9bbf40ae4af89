"""Metric spaces, databases, and exact distance queries.

A database is a multiset of points in a metric space; the query of interest
is the average distance from a query point to the database. Supported
spaces: coordinate spaces [0,1]^d under the l1 or l2 norm, and finite
spaces given explicitly by a labelled distance matrix.

Distances are normalized to diameter at most 1 on load: if the declared or
computed diameter D0 exceeds 1, every distance is divided by D0 and D0 is
recorded (``output_scale``) so released answers can be rescaled back.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels

_TOL = 1e-9


class ParseError(ValueError):
    """Malformed input file; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MetricKind(enum.Enum):
    L1 = "l1"
    L2 = "l2"
    MATRIX = "matrix"


@dataclass(frozen=True)
class MetricSpec:
    """A metric space description.

    ``diameter`` is the declared upper bound on pairwise distances under the
    *current* scaling. ``coord_scale`` multiplies raw norm distances for
    coordinate kinds (1/D0 after normalization). ``output_scale`` is the
    accumulated divisor D0; multiply released answers by it to restore the
    original units.
    """

    kind: MetricKind
    dimension: int = 0
    labels: tuple[str, ...] = ()
    matrix: np.ndarray | None = field(default=None, repr=False)
    diameter: float = 1.0
    coord_scale: float = 1.0
    output_scale: float = 1.0

    def __post_init__(self):
        if self.kind in (MetricKind.L1, MetricKind.L2):
            if self.dimension < 1:
                raise ValueError("coordinate metric needs dimension >= 1")
            if self.matrix is not None or self.labels:
                raise ValueError("coordinate metric takes no matrix or labels")
        else:
            if self.matrix is None or not self.labels:
                raise ValueError("matrix metric needs labels and a matrix")
        if not (self.diameter > 0 and np.isfinite(self.diameter)):
            raise ValueError("diameter must be positive and finite")
        if not (0 < self.coord_scale <= 1 + _TOL):
            raise ValueError("coord_scale must lie in (0, 1]")

    @classmethod
    def l1(cls, dimension: int, diameter: float | None = None) -> "MetricSpec":
        # Default declared diameter: the worst case over the unit cube.
        d = float(dimension) if diameter is None else float(diameter)
        return cls(kind=MetricKind.L1, dimension=dimension, diameter=d)

    @classmethod
    def l2(cls, dimension: int, diameter: float | None = None) -> "MetricSpec":
        d = float(np.sqrt(dimension)) if diameter is None else float(diameter)
        return cls(kind=MetricKind.L2, dimension=dimension, diameter=d)

    @classmethod
    def from_matrix(cls, labels, matrix, check_triangle: bool = True) -> "MetricSpec":
        labels = tuple(str(x) for x in labels)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in matrix metric")
        m = np.array(matrix, dtype=float)
        validate_matrix(labels, m, check_triangle=check_triangle)
        m.setflags(write=False)
        return cls(kind=MetricKind.MATRIX, labels=labels, matrix=m,
                   diameter=float(m.max()) if m.size else 1.0)

    def normalize(self) -> "MetricSpec":
        """Divide all distances by the diameter when it exceeds 1."""
        if self.diameter <= 1.0 + _TOL:
            return self
        d0 = self.diameter
        if self.kind is MetricKind.MATRIX:
            m = self.matrix / d0
            m.setflags(write=False)
            return replace(self, matrix=m, diameter=1.0,
                           output_scale=self.output_scale * d0)
        return replace(self, coord_scale=self.coord_scale / d0, diameter=1.0,
                       output_scale=self.output_scale * d0)

    def label_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"unknown label {label!r}") from None

    def distance(self, x, y) -> float:
        """Distance between two points (coordinate vectors or label indices)."""
        if self.kind is MetricKind.MATRIX:
            return float(self.matrix[int(x), int(y)])
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind is MetricKind.L1:
            return self.coord_scale * float(np.abs(x - y).sum())
        return self.coord_scale * float(np.sqrt(((x - y) ** 2).sum()))


def validate_matrix(labels, m: np.ndarray, check_triangle: bool = True) -> None:
    """Check metric axioms on an explicit distance matrix.

    The triangle check is O(m^3); the flag lets callers skip it for large
    instances (the test suite always keeps it on).
    """
    k = len(labels)
    if m.ndim != 2 or m.shape != (k, k):
        raise ValueError(f"matrix must be {k}x{k}, got {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix entries must be finite")
    if (m < -_TOL).any():
        raise ValueError("matrix entries must be nonnegative")
    if np.abs(np.diag(m)).max(initial=0.0) > _TOL:
        raise ValueError("matrix diagonal must be zero")
    if np.abs(m - m.T).max(initial=0.0) > _TOL:
        raise ValueError("matrix must be symmetric")
    if check_triangle:
        for mid in range(k):
            slack = (m[:, mid, None] + m[None, mid, :] - m).min()
            if slack < -_TOL:
                raise ValueError(
                    f"triangle inequality violated through point {labels[mid]!r}")


def _validate_coords(spec: MetricSpec, arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    if arr.shape[1] != spec.dimension:
        raise ValueError(
            f"{what}: expected dimension {spec.dimension}, got {arr.shape[1]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{what}: coordinates must be finite")
    if (arr < 0).any() or (arr > 1).any():
        raise ValueError(f"{what}: coordinates must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class Database:
    """A multiset of points in a metric space (replacement neighbors).

    For coordinate kinds ``points`` is an (n, dimension) float array; for
    matrix kinds it is an (n,) array of label indices.
    """

    spec: MetricSpec
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = self.points
        if self.spec.kind is MetricKind.MATRIX:
            pts = np.asarray(pts, dtype=np.int64)
            if pts.ndim != 1 or pts.size == 0:
                raise ValueError("database must contain at least one point")
            if (pts < 0).any() or (pts >= len(self.spec.labels)).any():
                raise ValueError("database label index out of range")
        else:
            pts = _validate_coords(self.spec, pts, "database")
            if pts.shape[0] == 0:
                raise ValueError("database must contain at least one point")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_labels(cls, spec: MetricSpec, labels) -> "Database":
        idx = np.array([spec.label_index(x) for x in labels], dtype=np.int64)
        return cls(spec, idx)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def replace_point(self, i: int, new_point) -> "Database":
        pts = np.array(self.points)
        pts[i] = new_point
        return Database(self.spec, pts)


@dataclass(frozen=True)
class QuerySet:
    """An ordered collection of query points, optionally deduplicated."""

    spec: MetricSpec
    points: np.ndarray = field(repr=False)
    dedup: bool = False

    def __post_init__(self):
        pts = self.points
        if self.spec.kind is MetricKind.MATRIX:
            pts = np.asarray(pts, dtype=np.int64)
            if pts.ndim != 1 or pts.size == 0:
                raise ValueError("query set must contain at least one query")
            if (pts < 0).any() or (pts >= len(self.spec.labels)).any():
                raise ValueError("query label index out of range")
            if self.dedup:
                _, first = np.unique(pts, return_index=True)
                pts = pts[np.sort(first)]
        else:
            pts = _validate_coords(self.spec, pts, "query set")
            if pts.shape[0] == 0:
                raise ValueError("query set must contain at least one query")
            if self.dedup:
                _, first = np.unique(pts, axis=0, return_index=True)
                pts = pts[np.sort(first)]
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_labels(cls, spec: MetricSpec, labels, dedup: bool = False) -> "QuerySet":
        idx = np.array([spec.label_index(x) for x in labels], dtype=np.int64)
        return cls(spec, idx, dedup=dedup)

    @property
    def k(self) -> int:
        return self.points.shape[0]


def _as_query(db: Database, y):
    if db.spec.kind is MetricKind.MATRIX:
        if isinstance(y, str):
            return db.spec.label_index(y)
        return int(y)
    y = np.ascontiguousarray(np.asarray(y, dtype=float).reshape(-1))
    _validate_coords(db.spec, y[None, :], "query")
    return y


def avg_distance(db: Database, y) -> float:
    """Exact average distance from y to the database. Range [0, diameter]."""
    y = _as_query(db, y)
    spec = db.spec
    if spec.kind is MetricKind.MATRIX:
        return float(spec.matrix[db.points, y].mean())
    if spec.kind is MetricKind.L1:
        return kernels.avg_l1(db.points, y, spec.coord_scale)
    return kernels.avg_l2(db.points, y, spec.coord_scale)


def coord_value(db: Database, i: int, t: float) -> float:
    """Per-coordinate average-distance component at position t.

    For an l1 metric the average distance decomposes as a sum over
    coordinates; this returns the i-th summand, a convex 1-Lipschitz
    function of t with values in [0, coord_scale] and replacement
    sensitivity at most coord_scale/n.
    """
    _require_l1(db)
    _check_t(t)
    return kernels.coord_value(db.points[:, i], float(t), db.spec.coord_scale)


def coord_value_batch(db: Database, i: int, ts) -> np.ndarray:
    _require_l1(db)
    ts = np.ascontiguousarray(np.asarray(ts, dtype=float))
    out = np.empty(ts.shape[0])
    kernels.coord_value_batch(db.points[:, i], ts, db.spec.coord_scale, out)
    return out


def coord_subgradient(db: Database, i: int, t: float) -> float:
    """Subgradient of coord_value in t; sign(0) taken as 0.

    Values lie in [-coord_scale, coord_scale] and the replacement
    sensitivity is at most 2*coord_scale/n.
    """
    _require_l1(db)
    _check_t(t)
    return kernels.coord_subgrad(db.points[:, i], float(t), db.spec.coord_scale)


def coord_subgradient_batch(db: Database, i: int, ts) -> np.ndarray:
    _require_l1(db)
    ts = np.ascontiguousarray(np.asarray(ts, dtype=float))
    out = np.empty(ts.shape[0])
    kernels.coord_subgrad_batch(db.points[:, i], ts, db.spec.coord_scale, out)
    return out


def oracle_answers(db: Database, queries: QuerySet) -> np.ndarray:
    """Exact average distance for every query (non-private reference)."""
    spec = db.spec
    if spec.kind is MetricKind.MATRIX:
        return spec.matrix[np.ix_(db.points, queries.points)].mean(axis=0)
    diffs = queries.points[:, None, :] - db.points[None, :, :]
    if spec.kind is MetricKind.L1:
        d = np.abs(diffs).sum(axis=2)
    else:
        d = np.sqrt((diffs ** 2).sum(axis=2))
    return spec.coord_scale * d.mean(axis=1)


def cross_distances(spec: MetricSpec, left, right) -> np.ndarray:
    """Pairwise distance matrix between two point collections."""
    if spec.kind is MetricKind.MATRIX:
        return np.ascontiguousarray(spec.matrix[np.ix_(left, right)])
    left = np.atleast_2d(np.asarray(left, dtype=float))
    right = np.atleast_2d(np.asarray(right, dtype=float))
    diffs = left[:, None, :] - right[None, :, :]
    if spec.kind is MetricKind.L1:
        d = np.abs(diffs).sum(axis=2)
    else:
        d = np.sqrt((diffs ** 2).sum(axis=2))
    return np.ascontiguousarray(spec.coord_scale * d)


def sensitivity_probe(db: Database, other: Database, op: str = "coord_value",
                      coord: int = 0, grid=None) -> float:
    """Empirical sensitivity: max |op(db) - op(other)| over a probe grid.

    Callers supply two neighboring databases (same size, one point
    replaced). This is a measurement aid for tests, not a proof.
    """
    if db.n != other.n:
        raise ValueError("databases must have equal size")
    if op == "avg_distance":
        qs = grid if grid is not None else _default_query_grid(db.spec)
        a = oracle_answers(db, QuerySet(db.spec, qs))
        b = oracle_answers(other, QuerySet(db.spec, qs))
        return float(np.abs(a - b).max())
    ts = np.linspace(0.0, 1.0, 101) if grid is None else np.asarray(grid, float)
    if op == "coord_value":
        a = coord_value_batch(db, coord, ts)
        b = coord_value_batch(other, coord, ts)
    elif op == "coord_subgradient":
        a = coord_subgradient_batch(db, coord, ts)
        b = coord_subgradient_batch(other, coord, ts)
    else:
        raise ValueError(f"unknown op {op!r}")
    return float(np.abs(a - b).max())


def _default_query_grid(spec: MetricSpec):
    if spec.kind is MetricKind.MATRIX:
        return np.arange(len(spec.labels), dtype=np.int64)
    side = np.linspace(0.0, 1.0, 5)
    grids = np.meshgrid(*([side] * spec.dimension), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _require_l1(db: Database) -> None:
    if db.spec.kind is not MetricKind.L1:
        raise ValueError("coordinate decomposition requires an l1 metric")


def _check_t(t: float) -> None:
    t = float(t)
    if not (0.0 <= t <= 1.0) or not np.isfinite(t):
        raise ValueError("coordinate position must lie in [0, 1]")


# ---------------------------------------------------------------------------
# File formats

def load_points(path) -> tuple[np.ndarray, int]:
    """Read a points CSV: header ``dim=<d>``, then rows of d decimals in [0,1]."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty points file", 1)
    header = lines[0].strip()
    if not header.startswith("dim="):
        raise ParseError("expected header dim=<dimension>", 1)
    try:
        dim = int(header[4:])
    except ValueError:
        raise ParseError(f"bad dimension {header[4:]!r}", 1) from None
    if dim < 1:
        raise ParseError("dimension must be >= 1", 1)
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != dim:
            raise ParseError(f"expected {dim} values, got {len(parts)}", lineno)
        row = []
        for tok in parts:
            row.append(_parse_coord(tok, lineno))
        rows.append(row)
    if not rows:
        raise ParseError("points file has no rows", len(lines))
    return np.array(rows, dtype=float), dim


def _parse_coord(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"bad number {tok.strip()!r}", lineno) from None
    if not np.isfinite(v):
        raise ParseError(f"non-finite value {tok.strip()!r}", lineno)
    if not (0.0 <= v <= 1.0):
        raise ParseError(f"value {v} outside [0, 1]", lineno)
    return v


def save_points(path, points: np.ndarray) -> None:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={points.shape[1]}\n")
        for row in points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matrix(path, check_triangle: bool = True) -> MetricSpec:
    """Read a matrix metric CSV: header ``labels=<a,b,...>``, then the matrix.

    The returned spec is normalized to diameter <= 1 (the original diameter
    is recorded in ``output_scale``).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty matrix file", 1)
    header = lines[0].strip()
    if not header.startswith("labels="):
        raise ParseError("expected header labels=<comma-separated>", 1)
    labels = [s.strip() for s in header[7:].split(",") if s.strip()]
    if not labels:
        raise ParseError("no labels in header", 1)
    k = len(labels)
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != k:
            raise ParseError(f"expected {k} entries, got {len(parts)}", lineno)
        row = []
        for tok in parts:
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(f"bad number {tok.strip()!r}", lineno) from None
            if not np.isfinite(v):
                raise ParseError(f"non-finite value {tok.strip()!r}", lineno)
            row.append(v)
        rows.append(row)
    if len(rows) != k:
        raise ParseError(f"expected {k} matrix rows, got {len(rows)}", len(lines))
    try:
        spec = MetricSpec.from_matrix(labels, np.array(rows), check_triangle)
    except ValueError as exc:
        raise ParseError(str(exc), 2) from None
    return spec.normalize()


def load_labels(path) -> list[str]:
    """Read a label list file: a single header line ``labels=<a,b,...>``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty label file", 1)
    header = lines[0].strip()
    if not header.startswith("labels="):
        raise ParseError("expected header labels=<comma-separated>", 1)
    labels = [s.strip() for s in header[7:].split(",") if s.strip()]
    if not labels:
        raise ParseError("no labels in header", 1)
    return labels
