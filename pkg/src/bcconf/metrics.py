"""Closed-form evaluation of latency, security, cost, and the weighted utility.

Everything here is a pure function of immutable inputs: results are
bitwise-identical regardless of evaluation order, and per-scenario
constants (verifier ranking, normalization maxima) are cached.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .model import (
    BlockchainConfig,
    ConstraintError,
    NormalizationConstants,
    QosWeights,
    ScenarioParams,
    ValidationError,
    VerifierProfile,
    require_feasible,
)

# Relative slack allowed between a recomputed latency and the sum of its terms.
TERM_DECOMPOSITION_TOL = 1e-12


@dataclass(frozen=True)
class LatencyTerms:
    """The four sequential stages of one block-verification round."""

    downlink_s: float   # block transmission to the verifiers
    verify_s: float     # slowest selected verifier's processing time
    broadcast_s: float  # result broadcast and cross-comparison
    feedback_s: float   # feedback transmission back to the manager

    @property
    def total_s(self) -> float:
        return self.downlink_s + self.verify_s + self.broadcast_s + self.feedback_s

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.downlink_s, self.verify_s, self.broadcast_s, self.feedback_s)


@dataclass(frozen=True)
class NormalizedTerms:
    latency_ratio: float   # L / max_latency, in (0, 1]
    security_ratio: float  # max_security / S, at least 1
    cost_ratio: float      # C / max_cost, in (0, 1]


@dataclass(frozen=True)
class MetricBreakdown:
    """One configuration's metrics, their normalized forms, and the utility."""

    latency_s: float
    latency_terms: LatencyTerms
    security: float
    cost: float
    utility: float
    normalized: NormalizedTerms

    def __post_init__(self):
        total = self.latency_terms.total_s
        if abs(self.latency_s - total) > TERM_DECOMPOSITION_TOL * max(abs(total), 1.0):
            raise ValidationError("latency_s must equal the sum of its four terms")
        if not self.security > 0:
            raise ValidationError("security must be positive")
        for name, value in (("latency_s", self.latency_s), ("cost", self.cost), ("utility", self.utility)):
            if value < 0:
                raise ValidationError(f"{name} must be non-negative")


@lru_cache(maxsize=None)
def _ranked_verifiers(scenario: ScenarioParams) -> tuple[VerifierProfile, ...]:
    # Ascending per-verifier verification time K/x; ties broken by ascending id.
    workload = scenario.verification_workload
    return tuple(
        sorted(scenario.verifiers, key=lambda p: (workload / p.compute_capacity, p.id))
    )


def select_verifiers(scenario: ScenarioParams, m: int) -> tuple[VerifierProfile, ...]:
    """The m verifiers that finish the verification workload fastest.

    Output is sorted ascending by K/x (largest capacity first), ties by id.
    """
    if not scenario.min_verifiers <= m <= scenario.max_verifiers:
        raise ConstraintError(
            f"m={m} outside [{scenario.min_verifiers}, {scenario.max_verifiers}]"
        )
    return _ranked_verifiers(scenario)[:m]


def verification_time(scenario: ScenarioParams, m: int) -> float:
    """Processing time of the slowest among the m selected verifiers."""
    selected = select_verifiers(scenario, m)
    return max(scenario.verification_workload / p.compute_capacity for p in selected)


def latency_terms(scenario: ScenarioParams, config: BlockchainConfig) -> LatencyTerms:
    """Per-stage latency of one verification round for a feasible configuration."""
    require_feasible(scenario, config)
    m, theta = config.num_verifiers, config.txns_per_block
    block_bits = theta * scenario.transaction_size_bits
    return LatencyTerms(
        downlink_s=block_bits / scenario.downlink_rate_bps,
        verify_s=verification_time(scenario, m),
        broadcast_s=scenario.broadcast_coeff * block_bits * m,
        feedback_s=scenario.feedback_size_bits / scenario.uplink_rate_bps,
    )


def latency(scenario: ScenarioParams, config: BlockchainConfig) -> float:
    """End-to-end round latency in seconds: dispatch + verify + broadcast + feedback."""
    return latency_terms(scenario, config).total_s


def security(scenario: ScenarioParams, m: int) -> float:
    """Security level kappa * m**q; strictly increasing in the verifier count."""
    if m < 1:
        raise ConstraintError(f"m must be at least 1, got {m}")
    return scenario.security_coeff * float(m) ** scenario.network_scale_exponent


def cost(scenario: ScenarioParams, config: BlockchainConfig) -> float:
    """Per-transaction verification cost: selected capacity payments over theta."""
    require_feasible(scenario, config)
    selected = select_verifiers(scenario, config.num_verifiers)
    total = sum(p.unit_price * p.compute_capacity for p in selected)
    return total / config.txns_per_block


@lru_cache(maxsize=None)
def _normalization(scenario: ScenarioParams) -> NormalizationConstants:
    # Closed-form corners of the feasible box: latency and security peak at
    # (M, N) by monotonicity; cost peaks at (M, t) since it scales with the
    # selected payment sum and inversely with theta.
    corner_high = BlockchainConfig(scenario.max_verifiers, scenario.max_txn_per_block)
    corner_cost = BlockchainConfig(scenario.max_verifiers, scenario.min_txn_per_block)
    max_cost = cost(scenario, corner_cost)
    if max_cost <= 0:
        raise ValidationError(
            "max_cost is zero (every selectable verifier is free); "
            "the normalized utility is undefined for this scenario"
        )
    return NormalizationConstants(
        max_latency=latency(scenario, corner_high),
        max_security=security(scenario, scenario.max_verifiers),
        max_cost=max_cost,
    )


def normalization(scenario: ScenarioParams, *, verify: bool = False) -> NormalizationConstants:
    """Exact per-metric maxima over the feasible box.

    With ``verify=True`` the closed-form corners are cross-checked against an
    exhaustive grid scan; a mismatch raises :class:`ValidationError`.
    """
    constants = _normalization(scenario)
    if verify:
        worst_l = worst_s = worst_c = 0.0
        for m in range(scenario.min_verifiers, scenario.max_verifiers + 1):
            for theta in range(scenario.min_txn_per_block, scenario.max_txn_per_block + 1):
                config = BlockchainConfig(m, theta)
                worst_l = max(worst_l, latency(scenario, config))
                worst_c = max(worst_c, cost(scenario, config))
            worst_s = max(worst_s, security(scenario, m))
        if (worst_l, worst_s, worst_c) != (
            constants.max_latency,
            constants.max_security,
            constants.max_cost,
        ):
            raise ValidationError(
                "normalization corners disagree with the exhaustive grid maxima"
            )
    return constants


def utility(
    scenario: ScenarioParams, weights: QosWeights, config: BlockchainConfig
) -> MetricBreakdown:
    """Weighted sum of normalized latency, inverted security, and cost.

    Smaller is better. Latency and cost enter as fractions of their maxima;
    security enters inverted (max_security / S) so that more verifiers help.
    """
    terms = latency_terms(scenario, config)
    total_latency = terms.total_s
    sec = security(scenario, config.num_verifiers)
    per_txn_cost = cost(scenario, config)
    constants = normalization(scenario)
    normalized = NormalizedTerms(
        latency_ratio=total_latency / constants.max_latency,
        security_ratio=constants.max_security / sec,
        cost_ratio=per_txn_cost / constants.max_cost,
    )
    value = (
        weights.latency_weight * normalized.latency_ratio
        + weights.security_weight * normalized.security_ratio
        + weights.cost_weight * normalized.cost_ratio
    )
    return MetricBreakdown(
        latency_s=total_latency,
        latency_terms=terms,
        security=sec,
        cost=per_txn_cost,
        utility=value,
        normalized=normalized,
    )
