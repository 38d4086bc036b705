"""Pacing function families g_(a,b)(t): training-set size at step t.

Six closed-form families (log, exp, step, linear, quadratic, root)
parameterized by a (fraction of training at which the full set is
reached) and b (starting fraction of the set). a=0 or b=1 degenerates
to standard training with a constant full-size pool.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("log", "exp", "step", "linear", "quadratic", "root")
_POLY_P = {"root": 0.5, "linear": 1.0, "quadratic": 2.0}

DEFAULT_A = (0.01, 0.1, 0.2, 0.4, 0.8, 1.6)
DEFAULT_B = (0.0025, 0.1, 0.2, 0.4, 0.8)
# appendix variant of the sweep grid (includes a=1.0 and b=1.0)
APPENDIX_A = (0.01, 0.1, 0.2, 0.4, 1.0, 1.6)
APPENDIX_B = (0.0025, 0.1, 0.2, 0.4, 1.0)


@dataclass(frozen=True)
class PacingSpec:
    family: str
    a: float
    b: float
    N: int
    T: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown pacing family {self.family!r}")
        if self.a < 0:
            raise ValueError("a must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if self.N < 1 or self.T < 1:
            raise ValueError("N and T must be >= 1")


def is_standard(spec):
    """True iff the schedule is constantly N (standard training)."""
    return spec.a == 0.0 or spec.b == 1.0


def _raw(spec, t):
    N, b, aT = spec.N, spec.b, spec.a * spec.T
    if spec.family == "log":
        return N * b + N * (1 - b) * (1 + 0.1 * math.log(t / aT + math.exp(-10)))
    if spec.family == "exp":
        return N * b + N * (1 - b) * (math.exp(min(10.0 * t / aT, 700.0)) - 1) / (math.e ** 10 - 1)
    if spec.family == "step":
        return N * b + N * (1 - b) * (1.0 if t >= aT else 0.0)
    p = _POLY_P[spec.family]
    return N * b + N * (1 - b) * (t ** p) / (aT ** p)


def eval_pacing(spec, t):
    """Integer pool size at step t in [1, T]; clamped to [max(1, round(Nb)), N]."""
    if not 1 <= t <= spec.T:
        raise ValueError(f"step {t} outside [1, {spec.T}]")
    if is_standard(spec):
        return spec.N
    floor = max(1, int(math.floor(spec.N * spec.b + 0.5)))
    size = int(math.floor(_raw(spec, t) + 0.5))  # round half up
    return min(spec.N, max(floor, size))


def pacing_schedule(spec):
    """Vector of pool sizes for t = 1..T (monotone nondecreasing)."""
    return np.array([eval_pacing(spec, t) for t in range(1, spec.T + 1)], dtype=np.int64)


def pacing_grid(a_values=DEFAULT_A, b_values=DEFAULT_B, families=FAMILIES, N=1, T=1):
    """Cartesian product of families x a x b (default 6*6*5 = 180 specs)."""
    a_values, b_values, families = list(a_values), list(b_values), list(families)
    if not a_values or not b_values or not families:
        raise ValueError("value lists must be nonempty")
    return [PacingSpec(f, a, b, N, T)
            for f, a, b in itertools.product(families, a_values, b_values)]


def schedule_csv_rows(specs):
    """Long-format (family, a, b, t, size) rows for plotting pacing curves."""
    for spec in specs:
        for t, size in enumerate(pacing_schedule(spec), start=1):
            yield spec.family, spec.a, spec.b, t, int(size)
