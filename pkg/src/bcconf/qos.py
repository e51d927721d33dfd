"""Mapping of data classes to optimization directives.

Each (priority, security need) quadrant selects an operating mode: a weight
vector for the utility and, for the two restricted modes, a pin on the
verifier count. The built-in weight table is a convention and can be
overridden per mode through a scenario file's ``mode_table`` section; a
file-level ``weights`` section overrides the built-in weights for every
mode but yields to a per-mode ``mode_table`` entry.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .model import (
    MODE_NAMES,
    DataClass,
    ModeTableRule,
    QosWeights,
    ScenarioParams,
    ValidationError,
)

RESTRICTED = "restricted"
FULLY_RESTRICTED = "fully_restricted"
BALANCED = "balanced"
ECONOMY = "economy"

_PIN_MIN = "min"
_PIN_MAX = "max"

# (priority, security_need) -> (mode, default weights, verifier-count pin)
_QUADRANTS: dict[tuple[str, str], tuple[str, QosWeights, Optional[str]]] = {
    ("high", "low"): (RESTRICTED, QosWeights(0.6, 0.1, 0.3), _PIN_MIN),
    ("low", "high"): (FULLY_RESTRICTED, QosWeights(0.1, 0.6, 0.3), _PIN_MAX),
    ("high", "high"): (BALANCED, QosWeights(1 / 3, 1 / 3, 1 / 3), None),
    ("low", "low"): (ECONOMY, QosWeights(0.1, 0.2, 0.7), None),
}

assert set(mode for mode, _, _ in _QUADRANTS.values()) == set(MODE_NAMES)


@dataclass(frozen=True)
class ModeDirective:
    """What the optimizer should do for one data class."""

    mode_name: str
    weights: QosWeights
    verifier_bound_override: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.mode_name not in MODE_NAMES:
            raise ValidationError(f"unknown mode name {self.mode_name!r}")


def _find_rule(scenario: ScenarioParams, mode: str) -> Optional[ModeTableRule]:
    if scenario.mode_table is None:
        return None
    for rule in scenario.mode_table:
        if rule.mode == mode:
            return rule
    return None


def _clamp_bounds(scenario: ScenarioParams, bounds: tuple[int, int]) -> tuple[int, int]:
    v, big_m = scenario.min_verifiers, scenario.max_verifiers
    lo = min(max(bounds[0], v), big_m)
    hi = min(max(bounds[1], v), big_m)
    if lo > hi:
        raise ValidationError(
            f"verifier bound override {bounds} is empty after clamping to [{v}, {big_m}]"
        )
    return (lo, hi)


def map_class(data_class: DataClass, scenario: ScenarioParams) -> ModeDirective:
    """Deterministic lookup of the directive for a data class.

    Weight precedence: per-mode ``mode_table`` entry, then the file-level
    ``weights`` section, then the built-in quadrant defaults. Verifier-bound
    overrides are clamped into the scenario's own bounds.
    """
    mode, weights, pin = _QUADRANTS[(data_class.priority, data_class.security_need)]
    override: Optional[tuple[int, int]] = None
    if pin == _PIN_MIN:
        override = (scenario.min_verifiers, scenario.min_verifiers)
    elif pin == _PIN_MAX:
        override = (scenario.max_verifiers, scenario.max_verifiers)

    if scenario.weights is not None:
        weights = scenario.weights
    rule = _find_rule(scenario, mode)
    if rule is not None:
        if rule.weights is not None:
            weights = rule.weights
        if rule.verifier_bounds is not None:
            override = rule.verifier_bounds
    if override is not None:
        override = _clamp_bounds(scenario, override)
    return ModeDirective(mode_name=mode, weights=weights, verifier_bound_override=override)


def apply_directive(scenario: ScenarioParams, directive: ModeDirective) -> ScenarioParams:
    """Scenario with the directive's verifier bounds applied, if any."""
    if directive.verifier_bound_override is None:
        return scenario
    lo, hi = directive.verifier_bound_override
    return replace(scenario, min_verifiers=lo, max_verifiers=hi)
