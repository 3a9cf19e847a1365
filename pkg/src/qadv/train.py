"""Adversarial (min-max) training of POVMs.

The outer minimization runs projected subgradient descent on the adversarial
training risk: each step solves the inner worst-case state per sample, takes
the resulting subgradient (the maximizers held fixed), and projects back onto
the POVM set with cyclic Dykstra alternating projections.  Multiple restarts
guard against the nonsmooth landscape; the best restart is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackSpec, adversarial_loss, element_bloch, qubit_worst_blochs
from .embed import Dataset, EmbeddingSpec, bloch_vector, embed_states, from_bloch
from .errors import ConvergenceError, ValidationError
from .qmat import POVM_TOL, Povm, as_hermitian, validate_povm
from .seeding import substream

_MAX_DYKSTRA_CYCLES = 200


def project_povm(raw) -> Povm:
    """Nearest POVM via Dykstra between the PSD product cone and the affine
    completeness constraint (the affine step needs no correction term)."""
    mats = [as_hermitian(m, tol=math.inf) for m in raw]
    if not mats:
        raise ValidationError("cannot project an empty element list")
    d = mats[0].shape[0]
    if any(m.shape[0] != d for m in mats):
        raise ValidationError("POVM elements have mixed dimensions")
    k = len(mats)
    eye = np.eye(d, dtype=np.complex128)
    x = [m.copy() for m in mats]
    inc = [np.zeros((d, d), dtype=np.complex128) for _ in range(k)]
    for _ in range(_MAX_DYKSTRA_CYCLES):
        clipped = []
        for c in range(k):
            w, v = np.linalg.eigh(x[c] + inc[c])
            y = (v * np.maximum(w, 0.0)) @ v.conj().T
            inc[c] = x[c] + inc[c] - y
            clipped.append(y)
        resid = (sum(clipped) - eye) / k
        x = [y - resid for y in clipped]
        worst_neg = max(-float(np.linalg.eigvalsh(m)[0]) for m in x)
        completeness = float(np.max(np.abs(sum(x) - eye)))
        if worst_neg <= POVM_TOL and completeness <= POVM_TOL:
            return validate_povm(x)
    raise ConvergenceError(
        f"POVM projection did not reach tolerance {POVM_TOL:.1e} in "
        f"{_MAX_DYKSTRA_CYCLES} cycles"
    )


def random_projective_povm(rng: np.random.Generator, d: int, k: int) -> Povm:
    """Haar-rotated projective measurement; eigenvectors split round-robin
    over classes (classes beyond d get zero elements)."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    elements = [np.zeros((d, d), dtype=np.complex128) for _ in range(k)]
    for i in range(d):
        v = q[:, i]
        elements[i % k] += np.outer(v, v.conj())
    return validate_povm(elements)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization-loop parameters (the choice of algorithm is ours; the
    headline experiment uses the fixed computational-basis POVM)."""

    attack: AttackSpec
    max_outer_iters: int = 150
    step_size: float = 0.1
    num_restarts: int = 4
    seed: int = 0
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValidationError("step_size must be positive")
        if self.max_outer_iters < 1:
            raise ValidationError("max_outer_iters must be >= 1")
        if self.num_restarts < 1:
            raise ValidationError("num_restarts must be >= 1")


@dataclass(frozen=True)
class TrainResult:
    povm: Povm
    curve: tuple[tuple[int, float], ...]  # (outer iteration, accepted risk)
    restart_risks: tuple[float, ...]

    @property
    def final_risk(self) -> float:
        return self.curve[-1][1]


def _mean_state_start(states: np.ndarray, labels: np.ndarray, k: int) -> Povm:
    """Measurement diagonalizing the class-weighted mean states (Helstrom for
    two classes); falls back to eigenvector assignment for K > 2."""
    d = states.shape[-1]
    t = states.shape[0]
    means = [states[labels == c].sum(axis=0) / t if (labels == c).any()
             else np.zeros((d, d), dtype=np.complex128) for c in range(k)]
    eye = np.eye(d, dtype=np.complex128)
    if k == 2:
        w, v = np.linalg.eigh(means[0] - means[1])
        plus = (v * (w > 0)) @ v.conj().T
        return validate_povm([plus, eye - plus])
    _, v = np.linalg.eigh(sum(means))
    elements = [np.zeros((d, d), dtype=np.complex128) for _ in range(k)]
    for i in range(d):
        vec = v[:, i]
        scores = [float((vec.conj() @ means[c] @ vec).real) for c in range(k)]
        elements[int(np.argmax(scores))] += np.outer(vec, vec.conj())
    return validate_povm(elements)


def _adversarial_objective(povm: Povm, states: np.ndarray, blochs: np.ndarray,
                           labels: np.ndarray, attack: AttackSpec) -> tuple[float, list[np.ndarray]]:
    """Adversarial empirical risk and the per-sample worst-case states."""
    t = states.shape[0]
    losses = np.empty(t)
    lams: list[np.ndarray] = [np.empty(0)] * t
    if povm.dim == 2:
        for c in range(povm.num_classes):
            idx = np.flatnonzero(labels == c)
            if idx.size == 0:
                continue
            a_c, b_c = element_bloch(povm[c])
            gains, ustar = qubit_worst_blochs(povm[c], blochs[idx], attack.p, attack.epsilon)
            losses[idx] = 1.0 - (a_c + blochs[idx] @ b_c) + gains
            lam_batch = from_bloch(ustar)
            for j, n in enumerate(idx):
                lams[n] = lam_batch[j]
    else:
        for n in range(t):
            res = adversarial_loss(povm, states[n], int(labels[n]), attack)
            losses[n] = res.loss
            lams[n] = res.lambda_star.mat
    return float(losses.mean()), lams


def adversarial_train(dataset: Dataset, embedding: EmbeddingSpec,
                      config: TrainConfig) -> TrainResult:
    """Minimize the adversarial training risk over POVMs."""
    if dataset.size == 0:
        raise ValidationError("training needs a nonempty dataset")
    states = embed_states(embedding, dataset.xs)
    blochs = bloch_vector(states)
    labels = dataset.labels
    k = int(labels.max()) + 1 if labels.size else 2
    k = max(k, 2)
    d = states.shape[-1]
    t = dataset.size

    starts: list[Povm] = [
        _mean_state_start(states, labels, k),
        validate_povm([np.eye(d, dtype=np.complex128) / k for _ in range(k)]),
    ]
    rng = substream(config.seed)
    while len(starts) < config.num_restarts:
        starts.append(random_projective_povm(rng, d, k))

    best_povm: Povm | None = None
    best_curve: list[tuple[int, float]] = []
    restart_risks: list[float] = []
    for povm in starts:
        risk, lams = _adversarial_objective(povm, states, blochs, labels, config.attack)
        curve = [(0, risk)]
        step = config.step_size
        current = povm
        for it in range(1, config.max_outer_iters + 1):
            grads = []
            for c in range(k):
                g = np.zeros((d, d), dtype=np.complex128)
                for n in np.flatnonzero(labels == c):
                    g -= lams[n]
                grads.append(g / t)
            candidate = project_povm([current[c] - step * grads[c] for c in range(k)])
            cand_risk, cand_lams = _adversarial_objective(
                candidate, states, blochs, labels, config.attack
            )
            if cand_risk < risk - config.convergence_tol:
                current, risk, lams = candidate, cand_risk, cand_lams
                curve.append((it, risk))
            else:
                step /= 2.0
                if step < config.step_size * 1e-4:
                    break
        restart_risks.append(risk)
        if best_povm is None or risk < best_curve[-1][1]:
            best_povm, best_curve = current, curve
    assert best_povm is not None
    return TrainResult(
        povm=best_povm,
        curve=tuple(best_curve),
        restart_risks=tuple(restart_risks),
    )
