"""CVSS v3.1 base-metric vector parsing and base-score computation.

Implements the base metric group only. Scores are computed with the public
v3.1 formula; the final round-up runs on an integer-scaled value so results
are bit-exact across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class AttackVector(Enum):
    NETWORK = "N"
    ADJACENT = "A"
    LOCAL = "L"
    PHYSICAL = "P"


class AttackComplexity(Enum):
    LOW = "L"
    HIGH = "H"


class PrivilegesRequired(Enum):
    NONE = "N"
    LOW = "L"
    HIGH = "H"


class UserInteraction(Enum):
    NONE = "N"
    REQUIRED = "R"


class Scope(Enum):
    UNCHANGED = "U"
    CHANGED = "C"


class Impact(Enum):
    NONE = "N"
    LOW = "L"
    HIGH = "H"


class SeverityBand(Enum):
    NONE = "None"
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    CRITICAL = "Critical"


class VectorError(ValueError):
    """Base error for malformed vector strings."""


class UnknownMetric(VectorError):
    def __init__(self, token: str):
        super().__init__(f"unknown metric in token {token!r}")
        self.token = token


class IllegalValue(VectorError):
    def __init__(self, token: str):
        super().__init__(f"illegal value in token {token!r}")
        self.token = token


class MissingMetric(VectorError):
    def __init__(self, metric: str):
        super().__init__(f"missing metric {metric!r}")
        self.metric = metric


class DuplicateMetric(VectorError):
    def __init__(self, metric: str):
        super().__init__(f"duplicate metric {metric!r}")
        self.metric = metric


_METRIC_TYPES = {
    "AV": AttackVector,
    "AC": AttackComplexity,
    "PR": PrivilegesRequired,
    "UI": UserInteraction,
    "S": Scope,
    "C": Impact,
    "I": Impact,
    "A": Impact,
}

_METRIC_ORDER = ("AV", "AC", "PR", "UI", "S", "C", "I", "A")

_AV_WEIGHT = {
    AttackVector.NETWORK: 0.85,
    AttackVector.ADJACENT: 0.62,
    AttackVector.LOCAL: 0.55,
    AttackVector.PHYSICAL: 0.2,
}
_AC_WEIGHT = {AttackComplexity.LOW: 0.77, AttackComplexity.HIGH: 0.44}
_PR_WEIGHT_UNCHANGED = {
    PrivilegesRequired.NONE: 0.85,
    PrivilegesRequired.LOW: 0.62,
    PrivilegesRequired.HIGH: 0.27,
}
_PR_WEIGHT_CHANGED = {
    PrivilegesRequired.NONE: 0.85,
    PrivilegesRequired.LOW: 0.68,
    PrivilegesRequired.HIGH: 0.5,
}
_UI_WEIGHT = {UserInteraction.NONE: 0.85, UserInteraction.REQUIRED: 0.62}
_IMPACT_WEIGHT = {Impact.NONE: 0.0, Impact.LOW: 0.22, Impact.HIGH: 0.56}


@dataclass(frozen=True)
class CvssVector:
    """Parsed v3.1 base-metric vector."""

    attack_vector: AttackVector
    attack_complexity: AttackComplexity
    privileges_required: PrivilegesRequired
    user_interaction: UserInteraction
    scope: Scope
    confidentiality: Impact
    integrity: Impact
    availability: Impact

    def to_string(self) -> str:
        """Canonical string form, fixed metric order, uppercase letters."""
        parts = (
            self.attack_vector,
            self.attack_complexity,
            self.privileges_required,
            self.user_interaction,
            self.scope,
            self.confidentiality,
            self.integrity,
            self.availability,
        )
        return "/".join(f"{m}:{p.value}" for m, p in zip(_METRIC_ORDER, parts))


@dataclass(frozen=True)
class Score:
    """One-decimal base score plus its qualitative band."""

    value: float
    severity_band: SeverityBand

    def __str__(self) -> str:
        return f"{self.value:.1f}"


def parse_vector(text: str) -> CvssVector:
    """Parse a vector string like "AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H".

    Metric letters are case-insensitive; an optional "CVSS:3.1/" prefix is
    tolerated. All 8 base metrics must appear exactly once, in any order.
    """
    body = text.strip()
    if body.upper().startswith("CVSS:"):
        body = body.split("/", 1)[1] if "/" in body else ""
    seen: dict[str, object] = {}
    for token in body.split("/"):
        if not token:
            continue
        if ":" not in token:
            raise UnknownMetric(token)
        metric, value = token.split(":", 1)
        metric = metric.strip().upper()
        if metric not in _METRIC_TYPES:
            raise UnknownMetric(token)
        if metric in seen:
            raise DuplicateMetric(metric)
        try:
            seen[metric] = _METRIC_TYPES[metric](value.strip().upper())
        except ValueError:
            raise IllegalValue(token) from None
    for metric in _METRIC_ORDER:
        if metric not in seen:
            raise MissingMetric(metric)
    return CvssVector(
        attack_vector=seen["AV"],
        attack_complexity=seen["AC"],
        privileges_required=seen["PR"],
        user_interaction=seen["UI"],
        scope=seen["S"],
        confidentiality=seen["C"],
        integrity=seen["I"],
        availability=seen["A"],
    )


def _round_up(value: float) -> float:
    # Integer arithmetic on the 1e5-scaled value; avoids float drift at the
    # one-decimal boundary.
    scaled = int(round(value * 100000))
    if scaled % 10000 == 0:
        return scaled / 100000.0
    return (scaled // 10000 + 1) / 10.0


def base_score(v: CvssVector) -> Score:
    """Compute the base score for a parsed vector."""
    iss = 1.0 - (
        (1.0 - _IMPACT_WEIGHT[v.confidentiality])
        * (1.0 - _IMPACT_WEIGHT[v.integrity])
        * (1.0 - _IMPACT_WEIGHT[v.availability])
    )
    if v.scope is Scope.UNCHANGED:
        impact = 6.42 * iss
        pr_weight = _PR_WEIGHT_UNCHANGED[v.privileges_required]
    else:
        impact = 7.52 * (iss - 0.029) - 3.25 * (iss - 0.02) ** 15
        pr_weight = _PR_WEIGHT_CHANGED[v.privileges_required]
    exploitability = (
        8.22
        * _AV_WEIGHT[v.attack_vector]
        * _AC_WEIGHT[v.attack_complexity]
        * pr_weight
        * _UI_WEIGHT[v.user_interaction]
    )
    if impact <= 0:
        value = 0.0
    elif v.scope is Scope.UNCHANGED:
        value = _round_up(min(impact + exploitability, 10.0))
    else:
        value = _round_up(min(1.08 * (impact + exploitability), 10.0))
    return Score(value=value, severity_band=severity_band(value))


def severity_band(value: float) -> SeverityBand:
    """Qualitative rating for a one-decimal base score."""
    if value == 0.0:
        return SeverityBand.NONE
    if value <= 3.9:
        return SeverityBand.LOW
    if value <= 6.9:
        return SeverityBand.MEDIUM
    if value <= 8.9:
        return SeverityBand.HIGH
    return SeverityBand.CRITICAL


def score_from_string(text: str) -> Score:
    """Convenience: parse and score in one call."""
    return base_score(parse_vector(text))
