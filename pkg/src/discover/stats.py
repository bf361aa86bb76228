"""One-tailed hypothesis tests used to validate subgroup effects.

Two test families, chosen by target type:

* Mann-Whitney U for continuous targets: is the subgroup's target
  distribution stochastically larger (or smaller) than the reference's?
* Two-proportion z-test with pooled variance for binary targets.

The reference sample is always the complement of the subgroup (rows not
matching the conditions), which keeps the two samples independent.  Small
tie-free Mann-Whitney problems are solved exactly by enumerating rank
allocations; larger or tied problems use the normal approximation with
tie-corrected variance and a continuity correction.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import DataError

# Above this combined sample size (or with any ties) the Mann-Whitney p-value
# switches from exact enumeration to the normal approximation.  C(12,6)=924
# allocations keeps the exact path instant.
EXACT_CUTOFF = 12

GREATER = "greater"
LESS = "less"

_P_FLOOR = 1e-300  # p-values are reported in (0, 1]


@dataclass(frozen=True)
class TestResult:
    test: str  # "mann_whitney" | "proportions_z"
    direction: str  # "greater" | "less"
    statistic: float  # U for mann_whitney, z for proportions_z
    p_value: float
    n_subgroup: int
    n_reference: int
    method: str  # "exact" | "normal_approx"

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TestResult":
        return TestResult(**d)


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function.

    Accurate to well under 1e-12 absolute error and exactly symmetric in
    the sense cdf(x) + cdf(-x) = 1 up to the final rounding.
    """
    if not math.isfinite(x):
        raise ValueError(f"normal_cdf requires finite x, got {x}")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _tail_p(z: float, direction: str) -> float:
    # 1 - cdf(z) rather than cdf(-z) so that p(greater) + p(less) == 1
    # exactly (IEEE round-to-nearest makes (1-c)+c == 1 for c in [0,1]).
    if direction == GREATER:
        p = 1.0 - normal_cdf(z)
    elif direction == LESS:
        p = normal_cdf(z)
    else:
        raise ValueError(f"direction must be 'greater' or 'less', got {direction!r}")
    return min(1.0, max(p, _P_FLOOR))


def _midranks(values: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Ranks 1..n with ties sharing their average rank.

    Returns (ranks, tie_sum, has_ties) where tie_sum = sum(t^3 - t) over
    tie groups, the quantity needed for the tie-corrected variance.
    """
    n = len(values)
    order = np.argsort(values, kind="stable")
    sv = values[order]
    starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
    ends = np.r_[starts[1:], n]
    sizes = ends - starts
    group_ranks = (starts + ends + 1) / 2.0  # average of positions start+1 .. end
    ranks_sorted = np.repeat(group_ranks, sizes)
    ranks = np.empty(n)
    ranks[order] = ranks_sorted
    tie_sum = float(np.sum(sizes.astype(np.float64) ** 3 - sizes))
    return ranks, tie_sum, bool((sizes > 1).any())


def _exact_mw_p(u_obs: float, n1: int, n2: int, direction: str) -> float:
    """Exact Mann-Whitney tail probability by enumerating the C(n1+n2, n1)
    ways of allocating the (tie-free) ranks to the subgroup."""
    total = n1 + n2
    offset = n1 * (n1 + 1) / 2.0
    count = 0
    n_alloc = 0
    for combo in itertools.combinations(range(1, total + 1), n1):
        u = sum(combo) - offset
        n_alloc += 1
        if direction == GREATER:
            count += u >= u_obs - 1e-9
        else:
            count += u <= u_obs + 1e-9
    return max(count / n_alloc, _P_FLOOR)


def mann_whitney_u(subgroup: np.ndarray, reference: np.ndarray) -> float:
    """The U statistic for the subgroup, with midrank tie handling."""
    sub = np.asarray(subgroup, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    ranks, _, _ = _midranks(np.concatenate([sub, ref]))
    n1 = len(sub)
    return float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)


def mann_whitney_one_tailed(
    subgroup: np.ndarray, reference: np.ndarray, direction: str
) -> TestResult:
    """One-tailed Mann-Whitney U test of subgroup vs reference.

    direction 'greater' tests whether the subgroup is stochastically
    larger.  Exact enumeration when the pooled sample is tie-free and has
    at most EXACT_CUTOFF values; otherwise normal approximation with
    tie-corrected variance and continuity correction.
    """
    if direction not in (GREATER, LESS):
        raise ValueError(f"direction must be 'greater' or 'less', got {direction!r}")
    sub = np.asarray(subgroup, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    n1, n2 = len(sub), len(ref)
    if n1 == 0 or n2 == 0:
        raise DataError("mann_whitney_one_tailed requires two nonempty samples")

    pooled = np.concatenate([sub, ref])
    ranks, tie_sum, has_ties = _midranks(pooled)
    u1 = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    total = n1 + n2

    if total <= EXACT_CUTOFF and not has_ties:
        p = _exact_mw_p(u1, n1, n2, direction)
        return TestResult("mann_whitney", direction, u1, p, n1, n2, "exact")

    mean_u = n1 * n2 / 2.0
    var_u = n1 * n2 / 12.0 * ((total + 1) - tie_sum / (total * (total - 1)))
    if var_u <= 0.0:
        # all pooled values identical: no evidence either way
        return TestResult("mann_whitney", direction, u1, 1.0, n1, n2, "normal_approx")
    sd = math.sqrt(var_u)
    if direction == GREATER:
        z = (u1 - mean_u - 0.5) / sd
    else:
        z = (u1 - mean_u + 0.5) / sd
    p = _tail_p(z, direction)
    return TestResult("mann_whitney", direction, u1, p, n1, n2, "normal_approx")


def proportions_z_one_tailed(
    successes_sub: int, n_sub: int, successes_ref: int, n_ref: int, direction: str
) -> TestResult:
    """One-tailed two-proportion z-test with pooled variance.

    direction 'greater' tests whether the subgroup's success rate exceeds
    the reference's.  A pooled proportion of exactly 0 or 1 carries no
    evidence either way and yields p = 1 by convention.
    """
    if direction not in (GREATER, LESS):
        raise ValueError(f"direction must be 'greater' or 'less', got {direction!r}")
    if n_sub < 1 or n_ref < 1:
        raise DataError("both groups need at least one observation")
    for s, n in ((successes_sub, n_sub), (successes_ref, n_ref)):
        if not 0 <= s <= n:
            raise DataError(f"successes {s} outside [0, {n}]")

    p1 = successes_sub / n_sub
    p0 = successes_ref / n_ref
    pooled = (successes_sub + successes_ref) / (n_sub + n_ref)
    if pooled <= 0.0 or pooled >= 1.0:
        return TestResult("proportions_z", direction, 0.0, 1.0, n_sub, n_ref, "normal_approx")
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n_sub + 1.0 / n_ref))
    z = (p1 - p0) / se
    p = _tail_p(z, direction)
    return TestResult("proportions_z", direction, z, p, n_sub, n_ref, "normal_approx")


def benjamini_hochberg(p_values: np.ndarray) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values (step-up FDR control).

    Returns q-values capped at 1 with monotonicity enforced, so that
    rejecting q <= alpha reproduces the classic BH procedure at level
    alpha.
    """
    ps = np.asarray(p_values, dtype=np.float64)
    m = len(ps)
    if m == 0:
        return np.empty(0)
    order = np.argsort(ps, kind="stable")
    scaled = ps[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adjusted, 1.0)
    return out
