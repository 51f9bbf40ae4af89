"""Privacy budget machinery: calibration, noise, sparse-vector detection.

Budget layout for a run with mistake budget m over s_count advice slots per
mistake: half of epsilon funds the above-threshold detector (threshold
noise scale 4*m*Delta/eps, per-query noise scale 8*m*Delta/eps, threshold
resampled after every firing), the other half funds the measurements that
feed the learner. Replacement sensitivity Delta = 2/n is used uniformly;
the subgradient's bound dominates the value query's 1/n.

Calibration solves the accuracy fixed point tying the achievable error
alpha to the mistake budget it induces. The conversion constant 3000 is
kept verbatim from the underlying analysis; the concrete noise scales
above are much tighter, so advice lands within the tolerance with margin.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

_IDC_CONSTANT = 3000.0
_TOL = 1e-9


class NoiseKind(enum.Enum):
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"
    OFF = "off"


class BudgetError(RuntimeError):
    """An operation would overrun the privacy budget."""


class CalibrationError(ValueError):
    """No feasible accuracy target; carries the minimal feasible alpha."""

    def __init__(self, message: str, min_alpha: float):
        super().__init__(message)
        self.min_alpha = min_alpha


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float
    beta: float
    k_max: int

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError("delta must lie in [0, 1)")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


@dataclass(frozen=True)
class NoisePlan:
    """Concrete noise scales and budget-charge schedule for one run."""

    alpha: float
    dim: int
    m: int
    s_count: int
    sensitivity: float
    noise_kind: NoiseKind
    svt_threshold_scale: float
    svt_query_scale: float
    measurement_scale: float
    eps_per_mistake: float
    eps_per_measurement: float
    delta_per_measurement: float

    def __post_init__(self):
        if not (0 < self.alpha <= self.dim + _TOL):
            raise ValueError("alpha must lie in (0, dimension]")
        required = self.dim * math.ceil(3.0 / math.sqrt(self.alpha / (2 * self.dim)))
        if self.m < required:
            raise ValueError(f"mistake budget {self.m} below required {required}")
        if self.s_count != 2 * self.dim:
            raise ValueError("advice slot count must be 2*dimension")

    @property
    def alpha1(self) -> float:
        return self.alpha / self.dim

    @property
    def tolerance(self) -> float:
        """Advice accuracy the measurements must hit: alpha/(4*dim)."""
        return self.alpha / (4 * self.dim)

    @property
    def threshold(self) -> float:
        """Detection threshold on the total hypothesis error."""
        return self.alpha / 2.0

    @property
    def coord_threshold(self) -> float:
        """Per-coordinate flagging threshold, alpha/(2*dim)."""
        return self.alpha / (2 * self.dim)


def mistake_budget(alpha: float, dim: int) -> int:
    return dim * math.ceil(3.0 / math.sqrt(alpha / (2 * dim)))


def exact_plan(alpha: float, dim: int) -> NoisePlan:
    """Noise-free plan at a fixed accuracy target (all scales and charges 0)."""
    return NoisePlan(
        alpha=float(alpha), dim=dim, m=mistake_budget(alpha, dim),
        s_count=2 * dim, sensitivity=0.0, noise_kind=NoiseKind.OFF,
        svt_threshold_scale=0.0, svt_query_scale=0.0, measurement_scale=0.0,
        eps_per_mistake=0.0, eps_per_measurement=0.0, delta_per_measurement=0.0)


def _alpha_for_budget(q: int, dim: int, n: int, p: PrivacyParams, pure: bool) -> float:
    m = dim * q
    s = 2 * dim
    if pure:
        rhs = (_IDC_CONSTANT / (n * p.epsilon)) * s * m * math.log(p.k_max / p.beta)
    else:
        rhs = (_IDC_CONSTANT / (n * p.epsilon)) * math.sqrt(s * m) \
            * math.log(4.0 / p.delta) * math.log(p.k_max / p.beta)
    return 4 * dim * rhs  # tolerance factor c = 1/(4*dim)


def calibrate(params: PrivacyParams, n: int, dim: int,
              kind: NoiseKind = NoiseKind.LAPLACE) -> NoisePlan:
    """Solve the accuracy fixed point and build the noise plan.

    Finds the smallest per-coordinate update budget q whose induced
    accuracy alpha(q) needs at most q updates per coordinate, so the
    returned alpha satisfies its regime equation exactly and the budget
    m = dim*q covers the mistake bound at that alpha. Raises
    CalibrationError (with the minimal feasible alpha) when even the
    smallest self-consistent alpha exceeds the dimension bound.
    """
    if n < 1:
        raise ValueError("database size must be >= 1")
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if kind is NoiseKind.GAUSSIAN and params.delta <= 0:
        raise ValueError("gaussian regime requires delta > 0")
    pure = kind is NoiseKind.LAPLACE or (kind is NoiseKind.OFF and params.delta <= 0)

    def feasible(q: int) -> bool:
        a = _alpha_for_budget(q, dim, n, params, pure)
        return q >= math.ceil(3.0 / math.sqrt(a / (2 * dim)))

    hi = 1
    while not feasible(hi):
        hi *= 2
        if hi > 1 << 62:
            raise CalibrationError("calibration does not converge", math.inf)
    lo = max(1, hi // 2)
    while lo < hi:
        mid = (lo + hi) // 2
        hi = mid if feasible(mid) else hi
        lo = mid + 1 if not feasible(mid) else lo
    q = lo
    alpha = _alpha_for_budget(q, dim, n, params, pure)
    if alpha > dim:
        raise CalibrationError(
            f"insufficient data for target privacy: minimal feasible accuracy "
            f"{alpha:.6g} exceeds the dimension bound {dim}", alpha)

    m = dim * q
    s = 2 * dim
    delta_sens = 2.0 / n
    if kind is NoiseKind.OFF:
        return NoisePlan(
            alpha=alpha, dim=dim, m=m, s_count=s, sensitivity=0.0,
            noise_kind=NoiseKind.OFF, svt_threshold_scale=0.0,
            svt_query_scale=0.0, measurement_scale=0.0, eps_per_mistake=0.0,
            eps_per_measurement=0.0, delta_per_measurement=0.0)
    eps = params.epsilon
    if pure:
        meas_scale = 2.0 * m * s * delta_sens / eps
        delta_per_meas = 0.0
    else:
        meas_scale = (2.0 * delta_sens / eps) * math.sqrt(
            2.0 * m * s * math.log(2.0 / params.delta))
        delta_per_meas = params.delta / (m * s)
    return NoisePlan(
        alpha=alpha, dim=dim, m=m, s_count=s, sensitivity=delta_sens,
        noise_kind=kind,
        svt_threshold_scale=4.0 * m * delta_sens / eps,
        svt_query_scale=8.0 * m * delta_sens / eps,
        measurement_scale=meas_scale,
        eps_per_mistake=eps / (2.0 * m),
        eps_per_measurement=eps / (2.0 * m * s),
        delta_per_measurement=delta_per_meas)


def calibration_residual(plan: NoisePlan, params: PrivacyParams, n: int) -> float:
    """|lhs - rhs| of the regime equation at the plan's alpha and budget."""
    c = 1.0 / (4 * plan.dim)
    if plan.noise_kind is NoiseKind.GAUSSIAN or (
            plan.noise_kind is NoiseKind.OFF and params.delta > 0):
        rhs = (_IDC_CONSTANT / (n * params.epsilon)) \
            * math.sqrt(plan.s_count * plan.m) \
            * math.log(4.0 / params.delta) * math.log(params.k_max / params.beta)
    else:
        rhs = (_IDC_CONSTANT / (n * params.epsilon)) * plan.s_count * plan.m \
            * math.log(params.k_max / params.beta)
    return abs(c * plan.alpha - rhs)


# ---------------------------------------------------------------------------
# Sampling

def sample_laplace(rng: np.random.Generator, scale: float) -> float:
    if scale == 0.0:
        return 0.0
    return float(rng.laplace(0.0, scale))


def sample_gaussian(rng: np.random.Generator, sigma: float) -> float:
    if sigma == 0.0:
        return 0.0
    return float(rng.normal(0.0, sigma))


def tail_probability(kind: NoiseKind, scale: float, t: float) -> float:
    """Analytic P(|noise| > t) for a draw at the given scale."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if kind is NoiseKind.OFF or scale == 0.0:
        return 0.0
    if kind is NoiseKind.LAPLACE:
        return math.exp(-t / scale)
    return math.erfc(t / (scale * math.sqrt(2.0)))


@dataclass
class Sampler:
    """Seeded noise source; a zero scale or OFF kind yields exact zeros."""

    rng: np.random.Generator
    kind: NoiseKind = NoiseKind.LAPLACE

    @classmethod
    def from_seed(cls, seed, kind: NoiseKind = NoiseKind.LAPLACE) -> "Sampler":
        return cls(np.random.default_rng(seed), kind)

    def laplace(self, scale: float) -> float:
        if self.kind is NoiseKind.OFF:
            return 0.0
        return sample_laplace(self.rng, scale)

    def measurement_noise(self, plan: NoisePlan) -> float:
        if self.kind is NoiseKind.OFF or plan.noise_kind is NoiseKind.OFF:
            return 0.0
        if plan.noise_kind is NoiseKind.GAUSSIAN:
            return sample_gaussian(self.rng, plan.measurement_scale)
        return sample_laplace(self.rng, plan.measurement_scale)


# ---------------------------------------------------------------------------
# Budget ledger

@dataclass
class BudgetLedger:
    """Running account of privacy spend; raises before any overrun."""

    epsilon_budget: float
    delta_budget: float
    mistakes_allowed: int
    epsilon_spent: float = 0.0
    delta_spent: float = 0.0
    mistakes_used: int = 0
    queries_answered: int = 0
    measurements_used: int = 0

    @classmethod
    def for_run(cls, params: PrivacyParams, plan: NoisePlan) -> "BudgetLedger":
        return cls(epsilon_budget=params.epsilon, delta_budget=params.delta,
                   mistakes_allowed=plan.m)

    @property
    def exhausted(self) -> bool:
        return self.mistakes_used >= self.mistakes_allowed

    def note_query(self) -> None:
        self.queries_answered += 1

    def charge_mistake(self, plan: NoisePlan) -> None:
        if self.mistakes_used >= self.mistakes_allowed:
            raise BudgetError("mistake budget exhausted")
        self.mistakes_used += 1
        self.epsilon_spent += plan.eps_per_mistake
        self._check()

    def charge_measurement(self, plan: NoisePlan) -> None:
        if self.measurements_used >= plan.m * plan.s_count:
            raise BudgetError("measurement budget exhausted")
        self.measurements_used += 1
        self.epsilon_spent += plan.eps_per_measurement
        self.delta_spent += plan.delta_per_measurement
        self._check()

    def _check(self) -> None:
        if self.epsilon_spent > self.epsilon_budget * (1 + _TOL) + _TOL:
            raise BudgetError("epsilon budget exceeded")
        if self.delta_spent > self.delta_budget * (1 + _TOL) + _TOL:
            raise BudgetError("delta budget exceeded")


# ---------------------------------------------------------------------------
# Above-threshold detection

@dataclass
class SvtState:
    """Current threshold perturbation; resampled after every firing."""

    threshold_noise: float

    @classmethod
    def fresh(cls, plan: NoisePlan, sampler: Sampler) -> "SvtState":
        return cls(sampler.laplace(plan.svt_threshold_scale))


def svt_step(state: SvtState, gap: float, plan: NoisePlan, sampler: Sampler,
             ledger: BudgetLedger, threshold: float | None = None) -> bool:
    """One detector round: True when the noisy gap clears the noisy threshold.

    A firing consumes one mistake from the ledger and rearms the threshold
    noise. Callers must not step an exhausted ledger.
    """
    if ledger.exhausted:
        raise BudgetError("mistake budget exhausted")
    t = plan.threshold if threshold is None else threshold
    noisy_gap = gap + sampler.laplace(plan.svt_query_scale)
    if noisy_gap > t + state.threshold_noise:
        ledger.charge_mistake(plan)
        state.threshold_noise = sampler.laplace(plan.svt_threshold_scale)
        return True
    return False


def measure(value: float, plan: NoisePlan, sampler: Sampler,
            ledger: BudgetLedger) -> float:
    """One noisy advice measurement, charged against the measurement half."""
    ledger.charge_measurement(plan)
    return value + sampler.measurement_noise(plan)
