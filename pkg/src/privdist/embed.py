"""Distance-preserving maps into l1, and the generic release pipeline.

Two maps are provided. The Gaussian projection takes an l2 source into
[0,1]^l' with expansion at most 1 and contraction about 1+alpha (its rows
never see any data, so it is oblivious). The subset-distance map handles an
arbitrary metric given by a matrix: coordinates are normalized minimum
distances to random subsets of the query set; it never sees the database
either, but because it depends on the query set it only supports the
non-interactive pipeline, where the queries are fixed up front.

Either way a database maps to a proxy database in l1 with the change of a
single source point changing exactly one proxy row, so the l1 release
mechanism's privacy guarantee carries over unchanged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .engine import NoiseKind, PrivacyParams
from .metric import Database, MetricKind, MetricSpec, QuerySet, cross_distances
from .release import AnswerRecord, InteractiveMechanism, RunStats

log = logging.getLogger(__name__)

_TOL = 1e-9


def projection_image_dim(source_dim: int, alpha: float, c0: float = 4.0) -> int:
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    return math.ceil(c0 * source_dim * math.log(1.0 / alpha) / alpha ** 2)


@dataclass(frozen=True)
class ProjectionMap:
    """Random Gaussian rows mapping l2 distances into l1 coordinates.

    Each image coordinate is an independent projection <g, x>; for a
    standard Gaussian g, E|<g, u>| = sqrt(2/pi) * ||u||_2, so with
    image_dim rows scaled by sqrt(pi/2)/image_dim the average recovers the
    l2 distance. A further 1 + alpha/2 shrink buys a one-sided margin: the
    measured expansion stays below 1 while the contraction stays well
    under 1 + alpha. Images are shifted to hug the cube center.
    """

    matrix: np.ndarray = field(repr=False)
    alpha: float
    scale: float

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.matrix, dtype=float))
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def image_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def claimed_expansion(self) -> float:
        return 1.0

    @property
    def claimed_contraction(self) -> float:
        return 1.0 + self.alpha

    def apply(self, points, spec: MetricSpec, queries=None) -> np.ndarray:
        if spec.kind is not MetricKind.L2:
            raise ValueError("projection embedding expects an l2 source metric")
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.source_dim:
            raise ValueError("point dimension does not match the map")
        img = (spec.coord_scale * self.scale) * ((pts - 0.5) @ self.matrix.T) + 0.5
        clipped = np.clip(img, 0.0, 1.0)
        if (clipped != img).any():
            log.warning("projection image clamped to [0, 1] "
                        "(%d coordinates)", int((clipped != img).sum()))
        return np.ascontiguousarray(clipped)


def build_projection(source_dim: int, alpha: float, rng: np.random.Generator,
                     c0: float = 4.0) -> ProjectionMap:
    """Draw a fresh projection; sees only dimensions, never data or queries."""
    image_dim = projection_image_dim(source_dim, alpha, c0)
    matrix = rng.standard_normal((image_dim, source_dim))
    scale = math.sqrt(math.pi / 2.0) / (image_dim * (1.0 + alpha / 2.0))
    return ProjectionMap(matrix=matrix, alpha=float(alpha), scale=scale)


@dataclass(frozen=True)
class BourgainMap:
    """Minimum-distance-to-random-subsets embedding of a finite metric.

    Level i in 1..levels keeps each query independently with probability
    2^-(i-1) (level 1 keeps everything); each of the width repetitions
    yields one subset per level. A point's coordinate for subset S is
    min over s in S of d(x, s), divided by width*levels, so a single
    coordinate difference never exceeds the source distance (the map is
    coordinatewise 1-Lipschitz by the triangle inequality) and the full
    image distance never expands. An empty subset contributes the
    diameter for every point, hence nothing to any pair difference.
    """

    subset_indices: np.ndarray = field(repr=False)
    subset_offsets: np.ndarray = field(repr=False)
    levels: int
    width: int
    query_count: int

    def __post_init__(self):
        idx = np.ascontiguousarray(np.asarray(self.subset_indices, np.int64))
        off = np.ascontiguousarray(np.asarray(self.subset_offsets, np.int64))
        if off.shape[0] != self.levels * self.width + 1:
            raise ValueError("offsets must cover levels*width subsets")
        idx.setflags(write=False)
        off.setflags(write=False)
        object.__setattr__(self, "subset_indices", idx)
        object.__setattr__(self, "subset_offsets", off)

    @property
    def image_dim(self) -> int:
        return self.levels * self.width

    @property
    def normalizer(self) -> float:
        return 1.0 / (self.width * self.levels)

    @property
    def claimed_expansion(self) -> float:
        return 1.0

    @property
    def claimed_contraction(self) -> float:
        return 64.0 * self.levels

    def subset(self, level: int, rep: int) -> np.ndarray:
        """Query indices of subset (level, rep); level, rep are 0-based."""
        j = level * self.width + rep
        return self.subset_indices[self.subset_offsets[j]:self.subset_offsets[j + 1]]

    def apply(self, points, spec: MetricSpec, queries) -> np.ndarray:
        if queries is None:
            raise ValueError("subset embedding needs the query points")
        dists = cross_distances(spec, points, queries)
        if dists.shape[1] != self.query_count:
            raise ValueError("query count does not match the map")
        out = np.empty((dists.shape[0], self.image_dim))
        kernels.subset_min(dists, self.subset_indices, self.subset_offsets,
                           spec.diameter, self.normalizer, out)
        return out


def build_bourgain(query_count: int, n: int, rng: np.random.Generator) -> BourgainMap:
    """Sample the subset families; sees only counts and queries, never data."""
    if query_count < 1 or n < 1:
        raise ValueError("need at least one query and one database point")
    k = query_count
    levels = max(1, math.ceil(math.log2(k))) if k > 1 else 1
    width = max(1, math.ceil(512.0 * (math.log2(k) + math.log2(max(n, 2)))))
    chunks = []
    counts = np.empty(levels * width, dtype=np.int64)
    for i in range(levels):
        mask = rng.random((width, k)) < 2.0 ** (-i)
        rows, cols = mask.nonzero()
        order = np.argsort(rows, kind="stable")
        chunks.append(cols[order])
        counts[i * width:(i + 1) * width] = mask.sum(axis=1)
    offsets = np.zeros(levels * width + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return BourgainMap(subset_indices=np.concatenate(chunks) if chunks else
                       np.empty(0, np.int64),
                       subset_offsets=offsets, levels=levels, width=width,
                       query_count=k)


@dataclass(frozen=True)
class EmbeddingQuality:
    """Measured distance ratios over data-query pairs (zero pairs skipped)."""

    expansion: float
    contraction: float
    pairs: int
    expansion_violations: int
    contraction_violations: int

    @property
    def distortion(self) -> float:
        return self.expansion * self.contraction

    @property
    def violations(self) -> int:
        return self.expansion_violations + self.contraction_violations


def measure_quality(emb, db: Database, queries: QuerySet) -> EmbeddingQuality:
    """Exact expansion/contraction over all database-query pairs.

    ``emb`` needs ``apply(points, spec, queries)`` plus claimed bounds;
    violations count pairs exceeding the claimed bounds beyond float slack.
    """
    src = cross_distances(db.spec, db.points, queries.points)
    img_db = emb.apply(db.points, db.spec, queries.points)
    img_q = emb.apply(queries.points, db.spec, queries.points)
    img = np.abs(img_db[:, None, :] - img_q[None, :, :]).sum(axis=2)
    mask = src > _TOL
    ratios = img[mask] / src[mask]
    if ratios.size == 0:
        return EmbeddingQuality(1.0, 1.0, 0, 0, 0)
    expansion = float(ratios.max())
    nonzero = ratios[ratios > 0]
    contraction = float((1.0 / nonzero).max()) if nonzero.size else math.inf
    exp_viol = int((ratios > emb.claimed_expansion + 1e-6).sum())
    con_viol = int((ratios < 1.0 / emb.claimed_contraction - 1e-9).sum())
    return EmbeddingQuality(expansion, contraction, int(mask.sum()),
                            exp_viol, con_viol)


@dataclass
class PipelineResult:
    answers: list[AnswerRecord]
    quality: EmbeddingQuality
    stats: RunStats
    image_dim: int
    lower_bound_factor: float
    alpha: float


def release_via_embedding(db: Database, queries: QuerySet, emb,
                          params: PrivacyParams,
                          noise: NoiseKind = NoiseKind.OFF,
                          seed: Optional[int] = None,
                          alpha: Optional[float] = None) -> PipelineResult:
    """Embed into l1, run the interactive release over the embedded queries.

    The source spec must already be normalized to diameter <= 1 so the
    proxy database inherits a valid diameter. Answers approximate the
    proxy averages to the mechanism's alpha; against the source oracle
    they sit in [oracle/contraction - alpha, oracle + alpha].
    """
    if db.spec.diameter > 1.0 + _TOL:
        raise ValueError("source metric diameter exceeds 1; normalize first")
    proxy_points = emb.apply(db.points, db.spec, queries.points)
    proxy_queries = emb.apply(queries.points, db.spec, queries.points)
    proxy_spec = MetricSpec.l1(proxy_points.shape[1], diameter=1.0)
    proxy_db = Database(proxy_spec, proxy_points)
    mech = InteractiveMechanism.create(proxy_db, params, noise=noise,
                                       seed=seed, alpha=alpha)
    answers = [mech.answer(q) for q in proxy_queries]
    quality = measure_quality(emb, db, queries)
    return PipelineResult(answers=answers, quality=quality, stats=mech.stats(),
                          image_dim=proxy_points.shape[1],
                          lower_bound_factor=float(emb.claimed_contraction),
                          alpha=mech.plan.alpha)
