"""Fuzzy confidence/uncertainty assessment of a teacher distribution.

Two inputs (confidence, uncertainty), each partitioned into Low/Medium/High
by fixed piecewise-linear membership functions, drive a 9-rule Mamdani
system whose defuzzified output is the weight applied to the distillation
loss. A simpler weighted-sum variant maps confidence memberships straight
to a weight through per-level coefficients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

log = logging.getLogger("fuzzkd.fuzzy")

LEVELS = ("low", "medium", "high")

# Output fuzzy sets as (a, b, c) triangles on [0, 1]. Low/High degenerate
# into shoulder ramps so the three supports cover [0,0.4], [0.3,0.7] and
# [0.6,1] -- the ranges the output variable is quantized into.
OUTPUT_SETS = {
    "low": (0.0, 0.0, 0.4),
    "medium": (0.3, 0.5, 0.7),
    "high": (0.6, 1.0, 1.0),
}

CENTROID_SAMPLES = 1001  # midpoint grid; resolution error < 1e-3


class FuzzyDomainError(ValueError):
    """Raised when an input leaves the [0, 1] domain or is otherwise invalid."""


@dataclass(frozen=True)
class MembershipTriple:
    """Membership grades of one crisp value in the Low/Medium/High sets."""

    low: float
    medium: float
    high: float

    def as_dict(self) -> dict[str, float]:
        return {"low": self.low, "medium": self.medium, "high": self.high}

    def max_grade(self) -> float:
        return max(self.low, self.medium, self.high)


@dataclass(frozen=True)
class LevelWeights:
    """Per-level output coefficients for the weighted-sum variant.

    Defaults are the midpoints of the Low/Medium/High output ranges.
    """

    w_low: float = 0.2
    w_medium: float = 0.5
    w_high: float = 0.8

    def __post_init__(self) -> None:
        if not (0.0 <= self.w_low < self.w_medium < self.w_high <= 1.0):
            raise FuzzyDomainError(
                f"level weights must satisfy 0 <= low < medium < high <= 1, "
                f"got ({self.w_low}, {self.w_medium}, {self.w_high})"
            )


@dataclass(frozen=True)
class FuzzyAssessment:
    """One evaluated (confidence, uncertainty) pair and the resulting weight."""

    confidence: float
    uncertainty: float
    conf_grades: MembershipTriple
    unc_grades: MembershipTriple
    weight: float
    method: str  # "mamdani" or "weighted_sum"


# Default rule table. The paper pins five cells:
#   (low, high) -> low, (low, medium) -> low, (medium, medium) -> medium,
#   (medium, high) -> low, (high, low) -> high.
# The remaining four are completed monotone in confidence and antitone in
# uncertainty.
DEFAULT_RULES: dict[tuple[str, str], str] = {
    ("low", "low"): "low",
    ("low", "medium"): "low",
    ("low", "high"): "low",
    ("medium", "low"): "medium",
    ("medium", "medium"): "medium",
    ("medium", "high"): "low",
    ("high", "low"): "high",
    ("high", "medium"): "medium",
    ("high", "high"): "low",
}


def validate_rules(rules: dict[tuple[str, str], str]) -> dict[tuple[str, str], str]:
    """Check that a rule table covers all 9 (confidence, uncertainty) cells."""
    for c in LEVELS:
        for u in LEVELS:
            out = rules.get((c, u))
            if out not in LEVELS:
                raise FuzzyDomainError(f"rule table cell ({c}, {u}) missing or invalid: {out!r}")
    return dict(rules)


def _check_unit(name: str, x: float) -> float:
    if not (0.0 <= x <= 1.0) or math.isnan(x):
        raise FuzzyDomainError(f"{name} must lie in [0, 1], got {x}")
    return float(x)


def confidence_memberships(c: float) -> MembershipTriple:
    """Grade a confidence value against the Low/Medium/High confidence sets.

    Low is a shoulder flat at 1 up to 0.2 and falling to 0 at 0.5; Medium is
    a triangle over (0.2, 0.5, 0.8); High rises linearly from 0.5 to 1.
    """
    c = _check_unit("confidence", c)
    if c <= 0.2:
        low = 1.0
    elif c <= 0.5:
        low = (0.5 - c) / 0.3
    else:
        low = 0.0
    if c <= 0.2 or c > 0.8:
        medium = 0.0
    elif c <= 0.5:
        medium = (c - 0.2) / 0.3
    else:
        medium = (0.8 - c) / 0.3
    high = 0.0 if c < 0.5 else (c - 0.5) / 0.5
    return MembershipTriple(low, medium, high)


def uncertainty_memberships(u: float) -> MembershipTriple:
    """Grade an uncertainty value against its Low/Medium/High sets.

    Low: flat to 0.2, falling to 0 at 0.4. Medium: triangle over
    (0.3, 0.6, 0.9). High: rising from 0.7 to 1.
    """
    u = _check_unit("uncertainty", u)
    if u <= 0.2:
        low = 1.0
    elif u <= 0.4:
        low = (0.4 - u) / 0.2
    else:
        low = 0.0
    if u <= 0.3 or u > 0.9:
        medium = 0.0
    elif u <= 0.6:
        medium = (u - 0.3) / 0.3
    else:
        medium = (0.9 - u) / 0.3
    high = 0.0 if u < 0.7 else (u - 0.7) / 0.3
    return MembershipTriple(low, medium, high)


def _triangle(x: float, abc: tuple[float, float, float]) -> float:
    """Evaluate a triangular set; a == b or b == c degenerate into shoulders."""
    a, b, c = abc
    if x < a or x > c:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    if x > b:
        return (c - x) / (c - b)
    return 1.0


def assess_from_distribution(
    probs, mode: str = "entropy"
) -> tuple[float, float]:
    """Extract (confidence, uncertainty) from one probability vector.

    Confidence is the maximum component. Uncertainty is the normalized
    Shannon entropy H(p)/ln(K) in "entropy" mode or 1 - confidence in
    "complement" mode.
    """
    p = [float(v) for v in probs]
    k = len(p)
    if k < 2:
        raise FuzzyDomainError(f"need at least 2 classes, got {k}")
    total = sum(p)
    if any(v < -1e-9 for v in p) or abs(total - 1.0) > 1e-6:
        raise FuzzyDomainError("probs is not a normalized distribution")
    confidence = max(p)
    if mode == "entropy":
        h = -sum(v * math.log(v) for v in p if v > 0.0)
        uncertainty = h / math.log(k)
    elif mode == "complement":
        uncertainty = 1.0 - confidence
    else:
        raise FuzzyDomainError(f"unknown uncertainty mode {mode!r}")
    # entropy can overshoot 1 by float noise on near-uniform inputs
    return min(confidence, 1.0), min(max(uncertainty, 0.0), 1.0)


class FuzzyEngine:
    """Maps (confidence, uncertainty) pairs to a distillation-loss weight.

    Holds the rule table, the weighted-sum level coefficients and the
    uncertainty extraction mode. All methods are pure; instances are safe
    to share across threads.
    """

    def __init__(
        self,
        rules: dict[tuple[str, str], str] | None = None,
        level_weights: LevelWeights = LevelWeights(),
        uncertainty_mode: str = "entropy",
        normalize_weighted_sum: bool = True,
    ):
        self.rules = validate_rules(DEFAULT_RULES if rules is None else rules)
        self.level_weights = level_weights
        if uncertainty_mode not in ("entropy", "complement"):
            raise FuzzyDomainError(f"unknown uncertainty mode {uncertainty_mode!r}")
        self.uncertainty_mode = uncertainty_mode
        self.normalize_weighted_sum = normalize_weighted_sum

    def weight_mamdani(self, c: float, u: float) -> FuzzyAssessment:
        """Min-AND rule firing, max aggregation, centroid defuzzification."""
        conf = confidence_memberships(c)
        unc = uncertainty_memberships(u)
        cg, ug = conf.as_dict(), unc.as_dict()
        activation = {lvl: 0.0 for lvl in LEVELS}
        for (cl, ul), out in self.rules.items():
            strength = min(cg[cl], ug[ul])
            if strength > activation[out]:
                activation[out] = strength
        if all(a == 0.0 for a in activation.values()):
            log.warning(
                "no rule fired for confidence=%.4f uncertainty=%.4f; "
                "falling back to w_medium", c, u,
            )
            weight = self.level_weights.w_medium
        else:
            weight = _centroid(activation)
        return FuzzyAssessment(c, u, conf, unc, weight, "mamdani")

    def weight_weighted_sum(self, c: float) -> FuzzyAssessment:
        """Confidence-only weight: sum of membership grades times level weights."""
        conf = confidence_memberships(c)
        lw = self.level_weights
        raw = conf.low * lw.w_low + conf.medium * lw.w_medium + conf.high * lw.w_high
        if self.normalize_weighted_sum:
            denom = conf.low + conf.medium + conf.high
            assert denom > 0.0, "membership coverage guarantees a nonzero sum"
            raw /= denom
        weight = min(max(raw, 0.0), 1.0)
        u = 1.0 - c
        return FuzzyAssessment(c, u, conf, uncertainty_memberships(u), weight, "weighted_sum")

    def assess(self, c: float, u: float, method: str = "mamdani") -> FuzzyAssessment:
        if method == "mamdani":
            return self.weight_mamdani(c, u)
        if method == "weighted_sum":
            return self.weight_weighted_sum(c)
        raise FuzzyDomainError(f"unknown fuzzy method {method!r}")

    def weight_from_distribution(self, probs, method: str = "mamdani") -> FuzzyAssessment:
        """Full pipeline: distribution -> (confidence, uncertainty) -> weight."""
        c, u = assess_from_distribution(probs, self.uncertainty_mode)
        return self.assess(c, u, method)


def _centroid(activation: dict[str, float]) -> float:
    """Centroid of the clipped-and-maxed output sets, by midpoint integration."""
    num = 0.0
    den = 0.0
    for i in range(CENTROID_SAMPLES):
        x = (i + 0.5) / CENTROID_SAMPLES
        mu = max(
            min(activation[lvl], _triangle(x, OUTPUT_SETS[lvl])) for lvl in LEVELS
        )
        num += x * mu
        den += mu
    if den == 0.0:
        return 0.0
    return num / den
