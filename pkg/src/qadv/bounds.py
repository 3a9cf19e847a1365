"""Closed-form generalization-bound calculators.

Implements the information-theoretic base bound

    B = 2 sqrt(2^I2 * K / T) + sqrt(2 log(2/delta) / T),

its adversarial increments (2 sqrt(K/T) eps for p=1, 2 d sqrt(K/T) eps for
p=inf, and the any-budget variants), the Renyi-2 mutual information of a
classical-quantum ensemble, adversary-strength comparison, and the
mismatched-adversary interval.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .qmat import matrix_of

_CONF_LOG = {"e": math.log, "2": math.log2}


class StrengthRelation(enum.Enum):
    TRAIN_STRONGER = "TrainStronger"
    TEST_STRONGER = "TestStronger"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class BoundInputs:
    """Scalar inputs shared by the bound formulas."""

    K: int
    T: int
    delta: float
    d: int = 2
    Delta: float = 0.0
    I2: float = 0.0

    def __post_init__(self):
        if self.T < 1:
            raise ValidationError(f"T must be >= 1, got {self.T}")
        if not (0.0 < self.delta < 1.0):
            raise ValidationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.K < 2:
            raise ValidationError(f"K must be >= 2, got {self.K}")
        if self.d < 1:
            raise ValidationError(f"d must be >= 1, got {self.d}")
        if not (0.0 <= self.Delta <= 1.0 / self.d + 1e-12):
            raise ValidationError(f"Delta must lie in [0, 1/d], got {self.Delta}")
        if self.I2 < 0.0:
            raise ValidationError(f"I2 must be >= 0, got {self.I2}")


@dataclass(frozen=True)
class BoundReport:
    """A bound value split as base + adversarial increment, with validity."""

    base: float
    adversarial_increment: float
    total: float
    valid: bool
    validity_reason: str


def renyi2_mi(probs, states) -> float:
    """2 log2 Tr sqrt(sum_x P(x) rho(x)^2), in bits.

    ``probs`` must sum to 1 within 1e-9; ``states`` is a matching sequence
    (or (N, d, d) array) of density matrices of common dimension.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("probs must be a nonempty 1-D array")
    if np.any(p < -1e-12):
        raise ValidationError("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"probabilities sum to {p.sum():.12f}, not 1")
    mats = np.stack([matrix_of(s) for s in states]) if not isinstance(states, np.ndarray) else states
    if mats.shape[0] != p.size:
        raise ValidationError("probs and states lengths differ")
    m = np.einsum("x,xij,xjk->ik", p, mats, mats)
    w = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
    return 2.0 * math.log2(float(np.sqrt(np.clip(w, 0.0, None)).sum()))


def banchi_bound(inputs: BoundInputs, confidence_log_base: str = "e") -> float:
    """Base bound B; the confidence log defaults to natural (see the flag)."""
    if confidence_log_base not in _CONF_LOG:
        raise ValidationError(f"confidence_log_base must be one of {sorted(_CONF_LOG)}")
    log = _CONF_LOG[confidence_log_base]
    first = 2.0 * math.sqrt(2.0**inputs.I2 * inputs.K / inputs.T)
    second = math.sqrt(2.0 * log(2.0 / inputs.delta) / inputs.T)
    return first + second


def adv_bound_p1(inputs: BoundInputs, epsilon: float,
                 confidence_log_base: str = "e") -> BoundReport:
    """B + 2 sqrt(K/T) eps; valid while eps <= 2 Delta (reported, not enforced)."""
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    base = banchi_bound(inputs, confidence_log_base)
    increment = 2.0 * math.sqrt(inputs.K / inputs.T) * epsilon
    valid = epsilon <= 2.0 * inputs.Delta + 1e-12
    reason = (
        f"eps = {epsilon:.6g} <= 2*Delta = {2 * inputs.Delta:.6g}"
        if valid
        else f"eps = {epsilon:.6g} > 2*Delta = {2 * inputs.Delta:.6g}"
    )
    return BoundReport(base, increment, base + increment, valid, reason)


def adv_bound_pinf(inputs: BoundInputs, epsilon: float,
                   confidence_log_base: str = "e") -> BoundReport:
    """B + 2 d sqrt(K/T) eps; valid while eps <= Delta."""
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    base = banchi_bound(inputs, confidence_log_base)
    increment = 2.0 * inputs.d * math.sqrt(inputs.K / inputs.T) * epsilon
    valid = epsilon <= inputs.Delta + 1e-12
    reason = (
        f"eps = {epsilon:.6g} <= Delta = {inputs.Delta:.6g}"
        if valid
        else f"eps = {epsilon:.6g} > Delta = {inputs.Delta:.6g}"
    )
    return BoundReport(base, increment, base + increment, valid, reason)


def adv_bound_general(inputs: BoundInputs, epsilon: float, p,
                      confidence_log_base: str = "e") -> BoundReport:
    """Any-budget increments: eps sqrt(2d(1 + (K-1)/T)) for p=1,
    2 eps d sqrt(1 + (K-1)/T) for p=inf.  No eigenvalue-floor requirement,
    but the increment does not vanish as T grows."""
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    p = float(p)
    base = banchi_bound(inputs, confidence_log_base)
    grow = 1.0 + (inputs.K - 1.0) / inputs.T
    if p == 1.0:
        increment = epsilon * math.sqrt(2.0 * inputs.d * grow)
    elif math.isinf(p):
        increment = 2.0 * epsilon * inputs.d * math.sqrt(grow)
    else:
        raise ValidationError(f"general bound covers p in {{1, inf}}, got {p}")
    return BoundReport(base, increment, base + increment, True, "no floor requirement")


def _inv(p: float) -> float:
    p = float(p)
    if math.isinf(p):
        return 0.0
    if p < 1.0:
        raise ValidationError(f"norm order must be >= 1, got {p}")
    return 1.0 / p


def _stronger(p_a: float, eps_a: float, p_b: float, eps_b: float, d: int) -> bool:
    """Sufficient condition for attack A to reach a strict superset of attack B."""
    if eps_a <= 0.0:
        return False
    if p_a <= p_b:
        threshold = d ** (_inv(p_b) - _inv(p_a)) * eps_a
    else:
        threshold = 2.0 * d ** (_inv(p_b) - _inv(p_a) - 1.0) * eps_a
    return eps_b < threshold


def strength_compare(train: tuple[float, float], test: tuple[float, float],
                     d: int) -> StrengthRelation:
    """Compare attacks by ball inclusion; the conditions are sufficient only,
    so the verdict may be Undetermined."""
    p_tr, e_tr = float(train[0]), float(train[1])
    p_te, e_te = float(test[0]), float(test[1])
    if e_tr < 0 or e_te < 0:
        raise ValidationError("budgets must be >= 0")
    if _stronger(p_tr, e_tr, p_te, e_te, d):
        return StrengthRelation.TRAIN_STRONGER
    if _stronger(p_te, e_te, p_tr, e_tr, d):
        return StrengthRelation.TEST_STRONGER
    return StrengthRelation.UNDETERMINED


@dataclass(frozen=True)
class MismatchSpec:
    """Train and test attack parameters for the mismatch analysis."""

    train_p: float
    train_epsilon: float
    test_p: float
    test_epsilon: float
    d: int = 2

    def __post_init__(self):
        if self.train_epsilon < 0 or self.test_epsilon < 0:
            raise ValidationError("budgets must be >= 0")
        _inv(self.train_p)
        _inv(self.test_p)


def xi(spec: MismatchSpec) -> float:
    """d^(1-1/p') eps' + d^(1-1/p) eps."""
    return (
        spec.d ** (1.0 - _inv(spec.test_p)) * spec.test_epsilon
        + spec.d ** (1.0 - _inv(spec.train_p)) * spec.train_epsilon
    )


def mismatch_bounds(g_matched: float, spec: MismatchSpec,
                    relation: StrengthRelation) -> tuple[float, float]:
    """Interval for the mismatched generalization error around the matched one.

    A stronger training adversary gives [g - xi, g]; a stronger testing
    adversary gives [g, g + xi].  Undetermined relations cannot be bounded.
    """
    width = xi(spec)
    if relation == StrengthRelation.TRAIN_STRONGER:
        return (g_matched - width, g_matched)
    if relation == StrengthRelation.TEST_STRONGER:
        return (g_matched, g_matched + width)
    raise ValidationError("cannot bound the mismatched error: relation is Undetermined")
