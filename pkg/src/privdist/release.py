"""Private release of average-l1-distance queries.

The interactive mechanism answers a query stream from a learned hypothesis,
consulting the database only through the noise engine: an above-threshold
detector watches the gap between hypothesis and truth, and on a detected
mistake the flagged coordinates receive noisy value/subgradient
measurements that update the per-coordinate tangent learners. Once the
mistake budget is spent the mechanism keeps answering from the frozen
hypothesis and flags the answers as refused.

The offline path drives each coordinate learner over a fixed grid through
the same detector and ledger, then discards the database, leaving a
summary that answers any query with no further privacy cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import (BudgetLedger, NoiseKind, NoisePlan, PrivacyParams,
                     Sampler, SvtState, calibrate, exact_plan, measure,
                     svt_step)
from .learner import DecomposableHypothesis, OracleReading
from .metric import Database, MetricKind, _validate_coords, coord_subgradient, coord_value
from . import kernels

_TOL = 1e-9


@dataclass(frozen=True)
class AnswerRecord:
    """One released answer with its transcript fields."""

    query: tuple
    value: float
    mistake: bool
    eps_spent: float
    refused: bool = False
    beyond_query_limit: bool = False


@dataclass
class RunStats:
    queries: int = 0
    mistakes: int = 0
    epsilon_spent: float = 0.0
    delta_spent: float = 0.0


class InteractiveMechanism:
    """Single-owner state machine releasing average-l1-distance answers."""

    def __init__(self, db: Database, params: PrivacyParams, plan: NoisePlan,
                 seed: Optional[int] = None, rng: Optional[np.random.Generator] = None):
        if db.spec.kind is not MetricKind.L1:
            raise ValueError("interactive release requires an l1 metric")
        if db.spec.diameter > 1.0 + _TOL:
            raise ValueError("metric diameter exceeds 1; call normalize() first")
        if plan.dim != db.spec.dimension:
            raise ValueError("plan dimension does not match the database")
        self.db = db
        self.params = params
        self.plan = plan
        self.hypothesis = DecomposableHypothesis.initial(plan.dim, plan.alpha)
        self.ledger = BudgetLedger.for_run(params, plan)
        self.sampler = Sampler(rng if rng is not None
                               else np.random.default_rng(seed), plan.noise_kind)
        self.detector = SvtState.fresh(plan, self.sampler)

    @classmethod
    def create(cls, db: Database, params: PrivacyParams,
               noise: NoiseKind = NoiseKind.LAPLACE, seed: Optional[int] = None,
               alpha: Optional[float] = None) -> "InteractiveMechanism":
        """Build with a calibrated plan, or a fixed-alpha exact plan (noise off)."""
        dim = db.spec.dimension
        if alpha is not None:
            if noise is not NoiseKind.OFF:
                raise ValueError("fixed alpha requires noise off")
            plan = exact_plan(alpha, dim)
        else:
            plan = calibrate(params, db.n, dim, noise)
        return cls(db, params, plan, seed=seed)

    @property
    def refusing(self) -> bool:
        return self.ledger.exhausted

    def _validated(self, y) -> np.ndarray:
        y = np.ascontiguousarray(np.asarray(y, dtype=float).reshape(-1))
        _validate_coords(self.db.spec, y[None, :], "query")
        return y

    def answer(self, y) -> AnswerRecord:
        """Release one answer; updates the hypothesis on a detected mistake."""
        y = self._validated(y)
        self.ledger.note_query()
        beyond = self.ledger.queries_answered > self.params.k_max
        est = self.hypothesis.evaluate(y)
        if self.refusing:
            return AnswerRecord(tuple(y), _clamp(est), False,
                                self.ledger.epsilon_spent, refused=True,
                                beyond_query_limit=beyond)
        truth = kernels.avg_l1(self.db.points, y, self.db.spec.coord_scale)
        fired = svt_step(self.detector, abs(est - truth), self.plan,
                         self.sampler, self.ledger)
        if not fired:
            return AnswerRecord(tuple(y), _clamp(est), False,
                                self.ledger.epsilon_spent,
                                beyond_query_limit=beyond)
        readings = {}
        coord_ests = self.hypothesis.evaluate_coords(y)
        for i in range(self.plan.dim):
            noisy_value = measure(coord_value(self.db, i, y[i]), self.plan,
                                  self.sampler, self.ledger)
            if abs(coord_ests[i] - noisy_value) > self.plan.coord_threshold:
                noisy_slope = measure(coord_subgradient(self.db, i, y[i]),
                                      self.plan, self.sampler, self.ledger)
                readings[i] = OracleReading(noisy_value, noisy_slope,
                                            self.plan.tolerance)
        if readings:
            # Zero flags can only happen through noise discordance near the
            # threshold; the round still consumed budget and counts.
            self.hypothesis = self.hypothesis.update(y, readings)
        return AnswerRecord(tuple(y), _clamp(self.hypothesis.evaluate(y)), True,
                            self.ledger.epsilon_spent,
                            beyond_query_limit=beyond)

    def probe_coordinate(self, i: int, t: float) -> bool:
        """Offline driver step: detect and fix one coordinate at one grid point.

        Uses the per-coordinate flagging threshold for detection so the
        grid ends up accurate coordinate by coordinate; returns whether the
        detector fired.
        """
        if self.refusing:
            raise RuntimeError("mistake budget exhausted during offline drive")
        self.ledger.note_query()
        truth = coord_value(self.db, i, t)
        est = self.hypothesis.parts[i].evaluate(t)
        fired = svt_step(self.detector, abs(est - truth), self.plan,
                         self.sampler, self.ledger,
                         threshold=self.plan.coord_threshold)
        if not fired:
            return False
        noisy_value = measure(truth, self.plan, self.sampler, self.ledger)
        if abs(est - noisy_value) > self.plan.coord_threshold:
            noisy_slope = measure(coord_subgradient(self.db, i, t), self.plan,
                                  self.sampler, self.ledger)
            anchor = np.zeros(self.plan.dim)
            anchor[i] = t
            self.hypothesis = self.hypothesis.update(
                anchor, {i: OracleReading(noisy_value, noisy_slope,
                                          self.plan.tolerance)})
        return True

    def stats(self) -> RunStats:
        return RunStats(queries=self.ledger.queries_answered,
                        mistakes=self.ledger.mistakes_used,
                        epsilon_spent=self.ledger.epsilon_spent,
                        delta_spent=self.ledger.delta_spent)


def _clamp(v: float) -> float:
    return min(1.0, max(0.0, float(v)))


@dataclass(frozen=True)
class OfflineSummary:
    """A data-free synopsis: answers any query from the learned hypothesis."""

    hypothesis: DecomposableHypothesis = field(repr=False)
    alpha: float
    provenance: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.hypothesis.dimension

    def answer(self, y) -> float:
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.dimension:
            raise ValueError(f"expected dimension {self.dimension}")
        if not np.isfinite(y).all() or (y < 0).any() or (y > 1).any():
            raise ValueError("query coordinates must lie in [0, 1]")
        return _clamp(self.hypothesis.evaluate(np.ascontiguousarray(y)))

    def to_dict(self) -> dict:
        obj = self.hypothesis.to_dict()
        return {"alpha": self.alpha, "dims": obj["dims"],
                "provenance": dict(self.provenance,
                                   driving_alpha=self.hypothesis.alpha)}

    @classmethod
    def from_dict(cls, obj: dict) -> "OfflineSummary":
        prov = dict(obj.get("provenance", {}))
        driving = prov.pop("driving_alpha", obj["alpha"] / 2.0)
        hyp = DecomposableHypothesis.from_dict(
            {"alpha": driving, "dims": obj["dims"]})
        return cls(hypothesis=hyp, alpha=float(obj["alpha"]), provenance=prov)


def offline_grid(alpha_drive: float, dim: int) -> np.ndarray:
    """Per-coordinate probe grid: spacing alpha_drive/dim, both endpoints."""
    spacing = alpha_drive / dim
    steps = math.ceil(dim / alpha_drive)
    ts = np.minimum(np.arange(steps) * spacing, 1.0)
    return np.append(ts, 1.0)


def release_offline(db: Database, params: PrivacyParams,
                    noise: NoiseKind = NoiseKind.LAPLACE,
                    seed: Optional[int] = None,
                    alpha: Optional[float] = None) -> tuple[OfflineSummary, RunStats]:
    """Learn the whole query surface on a grid, then drop the database.

    The driver runs at half the final accuracy target: a fixed ``alpha``
    (noise off) drives at alpha/2, a calibrated plan's alpha doubles into
    the summary's bound. Total probes: dim * (ceil(dim/alpha_drive) + 1).
    """
    dim = db.spec.dimension
    if alpha is not None:
        if noise is not NoiseKind.OFF:
            raise ValueError("fixed alpha requires noise off")
        plan = exact_plan(alpha / 2.0, dim)
    else:
        plan = calibrate(params, db.n, dim, noise)
    mech = InteractiveMechanism(db, params, plan, seed=seed)
    for i in range(dim):
        for t in offline_grid(plan.alpha, dim):
            mech.probe_coordinate(i, float(t))
    summary = OfflineSummary(
        hypothesis=mech.hypothesis, alpha=2.0 * plan.alpha,
        provenance={"mechanism": "offline", "noise": plan.noise_kind.value,
                    "seed": seed, "epsilon": params.epsilon,
                    "delta": params.delta,
                    "grid_per_coordinate": int(offline_grid(plan.alpha, dim).shape[0])})
    return summary, mech.stats()
