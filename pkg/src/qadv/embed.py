"""Quantum embedding, synthetic data generation, and eigenvalue-floor checks.

The embedding maps a scalar feature x to the depolarized pure state

    rho(x) = (1 - q) |x><x| + q I/d,   |x> = R_X(x) Rot_theta R_X(x) |0>,

with single-qubit rotations Rot_theta = exp(-i theta . sigma).  Classical data
is class-conditionally Gaussian with means (-1)^c and unit variance, snapped
to a uniform quantization grid so that population quantities are exact sums.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .qmat import PSD_TOL, DensityMatrix, matrix_of, random_density, validate_density
from .seeding import substream

ID2 = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def rot_gate(theta) -> np.ndarray:
    """exp(-i theta . sigma) = cos|theta| I - i sin|theta| (theta_hat . sigma)."""
    t = np.asarray(theta, dtype=float).reshape(3)
    ang = float(np.linalg.norm(t))
    if ang == 0.0:
        return ID2.copy()
    axis = t / ang
    return math.cos(ang) * ID2 - 1j * math.sin(ang) * (
        axis[0] * PAULI_X + axis[1] * PAULI_Y + axis[2] * PAULI_Z
    )


@dataclass(frozen=True)
class EmbeddingSpec:
    """Rotation angles, depolarization strength, and Hilbert dimension."""

    theta: tuple[float, float, float] = (math.pi / 4, math.pi / 4, math.pi / 4)
    q: float = 0.05
    dim: int = 2

    def __post_init__(self):
        if self.dim != 2:
            raise ValidationError("the rotation embedding is single-qubit (dim = 2)")
        if not (0.0 <= self.q < 1.0):
            raise ValidationError(f"depolarization strength must be in [0, 1), got {self.q}")
        if len(self.theta) != 3 or not all(math.isfinite(t) for t in self.theta):
            raise ValidationError("theta must be three finite angles")


@dataclass(frozen=True)
class DataSpec:
    """Class-conditional Gaussian features on a quantization grid."""

    num_classes: int = 2
    class_std: float = 1.0
    quant_lo: float = -6.0
    quant_hi: float = 6.0
    quant_step: float = 0.01

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValidationError("need at least two classes")
        if not (self.quant_lo < self.quant_hi):
            raise ValidationError("quantization grid requires quant_lo < quant_hi")
        if self.quant_step <= 0:
            raise ValidationError("quant_step must be positive")

    def class_means(self) -> np.ndarray:
        return np.array([(-1.0) ** c for c in range(self.num_classes)])

    def grid(self) -> np.ndarray:
        n = int(round((self.quant_hi - self.quant_lo) / self.quant_step)) + 1
        return self.quant_lo + self.quant_step * np.arange(n)

    def snap(self, x: np.ndarray) -> np.ndarray:
        """Nearest grid point, clamping out-of-range values to the edges."""
        n = int(round((self.quant_hi - self.quant_lo) / self.quant_step)) + 1
        idx = np.clip(np.rint((np.asarray(x, float) - self.quant_lo) / self.quant_step), 0, n - 1)
        return self.quant_lo + self.quant_step * idx


@dataclass(frozen=True)
class Dataset:
    """Quantized features with integer class labels in {0, ..., K-1}."""

    xs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xs", np.asarray(self.xs, dtype=float))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))
        if self.xs.shape != self.labels.shape or self.xs.ndim != 1:
            raise ValidationError("xs and labels must be equal-length 1-D arrays")

    @property
    def size(self) -> int:
        return self.xs.shape[0]

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "c"])
            for x, c in zip(self.xs, self.labels):
                writer.writerow([repr(float(x)), int(c)])

    @classmethod
    def load_csv(cls, path) -> "Dataset":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"dataset file not found: {path}")
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["x", "c"]:
                raise ValidationError(f"expected CSV header 'x,c' in {path}")
            xs, cs = [], []
            for row in reader:
                if not row:
                    continue
                xs.append(float(row[0]))
                cs.append(int(row[1]))
        return cls(xs=np.array(xs), labels=np.array(cs, dtype=int))


def embed_states(spec: EmbeddingSpec, xs) -> np.ndarray:
    """Batch of rho(x) as a (..., 2, 2) complex array."""
    x = np.asarray(xs, dtype=float)
    rot = rot_gate(spec.theta)
    c, s = np.cos(x), np.sin(x)
    # v = R_X(x) |0> = (cos x, -i sin x)
    v0, v1 = c, -1j * s
    w0 = rot[0, 0] * v0 + rot[0, 1] * v1
    w1 = rot[1, 0] * v0 + rot[1, 1] * v1
    psi0 = c * w0 - 1j * s * w1
    psi1 = -1j * s * w0 + c * w1
    psi = np.stack([psi0, psi1], axis=-1)
    pure = psi[..., :, None] * psi[..., None, :].conj()
    return (1.0 - spec.q) * pure + (spec.q / 2.0) * ID2


def embed(spec: EmbeddingSpec, x: float) -> DensityMatrix:
    """rho(x) for a single input."""
    return validate_density(embed_states(spec, float(x)))


def bloch_vector(rho) -> np.ndarray:
    """Bloch components (Tr(rho sigma_i)) of one or many qubit states."""
    m = np.asarray(matrix_of(rho) if not isinstance(rho, np.ndarray) else rho)
    rx = 2.0 * m[..., 0, 1].real
    ry = -2.0 * m[..., 0, 1].imag
    rz = (m[..., 0, 0] - m[..., 1, 1]).real
    return np.stack([rx, ry, rz], axis=-1)


def from_bloch(r) -> np.ndarray:
    """Qubit density matrices (I + r . sigma)/2 from Bloch vectors (..., 3)."""
    r = np.asarray(r, dtype=float)
    out = np.empty(r.shape[:-1] + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = (1.0 + r[..., 2]) / 2.0
    out[..., 1, 1] = (1.0 - r[..., 2]) / 2.0
    out[..., 0, 1] = (r[..., 0] - 1j * r[..., 1]) / 2.0
    out[..., 1, 0] = (r[..., 0] + 1j * r[..., 1]) / 2.0
    return out


def sample_dataset(data: DataSpec, T: int, seed: int, rng: np.random.Generator | None = None) -> Dataset:
    """T iid draws: uniform class, Gaussian feature, snap to the grid."""
    if T < 0:
        raise ValidationError("T must be nonnegative")
    if rng is None:
        rng = substream(seed)
    labels = rng.integers(0, data.num_classes, size=T)
    raw = rng.normal(loc=data.class_means()[labels], scale=data.class_std, size=T)
    return Dataset(xs=data.snap(raw), labels=labels)


@dataclass(frozen=True)
class QuantizedPrior:
    """Grid-renormalized class conditionals and the uniform-class marginal."""

    xs: np.ndarray
    conditional: np.ndarray  # shape (K, N), rows sum to 1
    marginal: np.ndarray  # shape (N,), sums to 1

    @property
    def num_classes(self) -> int:
        return self.conditional.shape[0]


def quantized_prior(data: DataSpec) -> QuantizedPrior:
    """P(x|c) proportional to the Gaussian density at each grid point."""
    xs = data.grid()
    means = data.class_means()
    z = (xs[None, :] - means[:, None]) / data.class_std
    w = np.exp(-0.5 * z * z)
    cond = w / w.sum(axis=1, keepdims=True)
    return QuantizedPrior(xs=xs, conditional=cond, marginal=cond.mean(axis=0))


def eigen_floor(spec: EmbeddingSpec, data: DataSpec) -> float:
    """Minimum eigenvalue of rho(x) over the grid (q/d for this embedding)."""
    states = embed_states(spec, data.grid())
    return float(np.linalg.eigvalsh(states)[..., 0].min())


def apply_channel(kraus: list[np.ndarray], rho) -> np.ndarray:
    """sum_i E_i rho E_i^dag."""
    m = matrix_of(rho)
    out = np.zeros_like(m)
    for e in kraus:
        out += e @ m @ e.conj().T
    return out


def validate_kraus(kraus, tol: float = 1e-9) -> list[np.ndarray]:
    """Check the completeness relation sum_i E_i^dag E_i = I."""
    ops = [np.asarray(e, dtype=np.complex128) for e in kraus]
    if not ops:
        raise ValidationError("empty Kraus set")
    d = ops[0].shape[0]
    total = sum(e.conj().T @ e for e in ops)
    dev = float(np.max(np.abs(total - np.eye(d))))
    if dev > tol:
        raise ValidationError(f"Kraus set incomplete: |sum E^dag E - I| = {dev:.3e}", violation=dev)
    return ops


def random_cptp_kraus(rng: np.random.Generator, d: int, num_ops: int = 2) -> list[np.ndarray]:
    """Random mixed-unitary channel: sqrt(p_i) U_i with Haar U_i from QR of
    complex Gaussians and uniform random weights.

    Mixed-unitary channels are unital, which is exactly the regime where the
    minimum eigenvalue is non-decreasing (for non-unital CPTP maps it can
    drop; amplitude damping is a counterexample, and ``channel_floor_check``
    will report it).
    """
    weights = rng.dirichlet(np.ones(num_ops))
    ops = []
    for i in range(num_ops):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        q, r = np.linalg.qr(g)
        q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
        ops.append(math.sqrt(weights[i]) * q)
    return ops


@dataclass(frozen=True)
class FloorCheckReport:
    """Outcome of the channel minimum-eigenvalue monotonicity check."""

    passed: bool
    trials: int
    violations: int
    worst_violation: float
    counterexample: tuple[np.ndarray, float, float] | None = None


def channel_floor_check(kraus, trials: int, seed: int) -> FloorCheckReport:
    """Verify min-eig(E(rho)) >= min-eig(rho) - PSD_TOL on random states."""
    ops = validate_kraus(kraus)
    d = ops[0].shape[0]
    rng = substream(seed)
    violations = 0
    worst = 0.0
    counterexample = None
    for _ in range(trials):
        rho = random_density(rng, d)
        before = rho.min_eig()
        after = float(np.linalg.eigvalsh(apply_channel(ops, rho.mat))[0])
        gap = before - after
        if gap > PSD_TOL:
            violations += 1
            if gap > worst:
                worst = gap
                counterexample = (np.array(rho.mat), before, after)
        else:
            worst = max(worst, max(gap, 0.0))
    return FloorCheckReport(
        passed=violations == 0,
        trials=trials,
        violations=violations,
        worst_violation=worst,
        counterexample=counterexample,
    )
