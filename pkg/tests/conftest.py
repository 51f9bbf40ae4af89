"""Shared fixtures: a convex 1-Lipschitz function suite, an adversarial
teaching loop, and a terminal section that prints one line per acceptance
criterion."""

from __future__ import annotations

import math

import numpy as np
import pytest

from privdist.learner import OracleReading, PiecewiseLinearHypothesis

# ---------------------------------------------------------------------------
# One-dimensional teaching targets. Every entry is convex, 1-Lipschitz and
# nonnegative on [0, 1]; g is a subgradient with |g| <= 1.

def _abs(c):
    return (lambda x: abs(x - c),
            lambda x: 0.0 if x == c else math.copysign(1.0, x - c))


def _avg_abs(centers):
    cs = np.asarray(centers, dtype=float)
    return (lambda x: float(np.abs(x - cs).mean()),
            lambda x: float(np.sign(x - cs).mean()))


def _max_lines(lines):
    def f(x):
        return max(a * x + b for a, b in lines)

    def g(x):
        return max(lines, key=lambda ab: ab[0] * x + ab[1])[0]

    return f, g


_smooth_c, _smooth_d = 0.4, 0.05
_rng = np.random.default_rng(20240817)

CONVEX_SUITE = [
    ("abs_0.0", *_abs(0.0)),
    ("abs_0.25", *_abs(0.25)),
    ("abs_0.5", *_abs(0.5)),
    ("abs_0.75", *_abs(0.75)),
    ("abs_1.0", *_abs(1.0)),
    ("half_square", lambda x: 0.5 * (x - 0.3) ** 2, lambda x: x - 0.3),
    ("vee", *_max_lines([(0.7, 0.0), (-1.0, 1.0)])),
    ("exp_shift", lambda x: math.exp(x - 1.0) - math.exp(-1.0),
     lambda x: math.exp(x - 1.0)),
    ("cosh", lambda x: math.cosh(x - 0.5) - 1.0, lambda x: math.sinh(x - 0.5)),
    ("hinge", lambda x: max(0.0, x - 0.6), lambda x: 0.0 if x < 0.6 else 1.0),
    ("smooth_abs",
     lambda x: math.sqrt((x - _smooth_c) ** 2 + _smooth_d ** 2) - _smooth_d,
     lambda x: (x - _smooth_c) / math.sqrt((x - _smooth_c) ** 2 + _smooth_d ** 2)),
    ("softplus", lambda x: math.log1p(math.exp(4.0 * (x - 0.5))) / 4.0,
     lambda x: 1.0 / (1.0 + math.exp(-4.0 * (x - 0.5)))),
    ("avg_abs_rand", *_avg_abs(_rng.random(37))),
    ("max3", *_max_lines([(-0.8, 0.5), (0.2, 0.1), (1.0, -0.4)])),
]

SUITE_IDS = [name for name, _, _ in CONVEX_SUITE]

# Worst-case sign policies for the noisy oracle: (value sign, slope sign)
# per round. "push" inflates the value while tilting the slope away.
NOISE_POLICIES = {
    "plus": lambda r: (1.0, 1.0),
    "minus": lambda r: (-1.0, -1.0),
    "push": lambda r: (1.0, -1.0),
    "alt": lambda r: (1.0, -1.0) if r % 2 == 0 else (-1.0, 1.0),
}


def teach(f, g, alpha1, policy=None, grid_size=1001, round_cap=400):
    """Adversarial teaching loop against one coordinate learner.

    Always queries an (approximately) maximal-error grid point; stops once
    the true error is everywhere <= alpha1. With a noise policy the oracle
    perturbs value and slope by exactly alpha1/4 with adversarial signs.
    Returns (updates, final hypothesis).
    """
    grid = np.linspace(0.0, 1.0, grid_size)
    fvals = np.array([f(x) for x in grid])
    hyp = PiecewiseLinearHypothesis.initial()
    tol = 0.0 if policy is None else alpha1 / 4.0
    updates = 0
    for rnd in range(round_cap):
        errs = fvals - hyp.evaluate_batch(grid)
        j = int(np.argmax(errs))
        if errs[j] <= alpha1 + 1e-12:
            return updates, hyp
        x = float(grid[j])
        value, slope = f(x), g(x)
        if policy is not None:
            sv, sg = policy(rnd)
            value = max(0.0, value + sv * tol)
            slope = min(1.0, max(-1.0, slope + sg * tol))
        hyp = hyp.add_tangent(x, OracleReading(value, slope, tol))
        updates += 1
    raise AssertionError(f"teaching did not converge within {round_cap} rounds")


# ---------------------------------------------------------------------------
# Acceptance reporting: tests append one line each, printed as a section at
# the end of the run so pass/fail is visible even with output capture on.

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, name: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] criterion {number:02d} {name}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
