"""Dense complex Hermitian matrix core.

Eigendecompositions with a deterministic phase convention, Schatten norms and
distances, trace inner products, and validated density-matrix / POVM types.
Everything is dense and double precision; the intended regime is desk scale
(dimension <= 8).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
UNITARY_TOL = 1e-9
RECON_TOL = 1e-9
POVM_TOL = 1e-9

_PHASE_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


def matrix_of(m) -> np.ndarray:
    """Unwrap a DensityMatrix or coerce an array-like to complex128."""
    if isinstance(m, DensityMatrix):
        return m.mat
    return np.asarray(m, dtype=np.complex128)


def as_hermitian(m, tol: float = HERM_TOL) -> np.ndarray:
    """Check Hermiticity within ``tol`` and return the Hermitian part."""
    a = matrix_of(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    dev = float(np.max(np.abs(a - a.conj().T)))
    if dev > tol:
        raise ValidationError(
            f"matrix is not Hermitian: max |A - A^dag| = {dev:.3e} exceeds {tol:.1e}",
            violation=dev,
        )
    return (a + a.conj().T) / 2.0


@dataclass(frozen=True)
class EigResult:
    """Eigendecomposition of a Hermitian matrix.

    ``eigenvalues`` are real and ascending; the columns of ``basis`` are the
    matching eigenvectors.  Each eigenvector's phase is fixed by making its
    first component of modulus > 1e-12 real and positive, so repeated runs
    produce identical bases.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def hermitian_eig(m) -> EigResult:
    """Eigendecompose a Hermitian matrix with the deterministic phase fix."""
    a = as_hermitian(m)
    w, v = np.linalg.eigh(a)
    v = np.array(v, copy=True)
    for k in range(v.shape[1]):
        col = v[:, k]
        nz = np.flatnonzero(np.abs(col) > _PHASE_TOL)
        if nz.size:
            pivot = col[nz[0]]
            v[:, k] = col * (abs(pivot) / pivot)
    w = np.array(w.real, copy=True)
    w.setflags(write=False)
    v.setflags(write=False)
    return EigResult(eigenvalues=w, basis=v)


def schatten_norm(m, p) -> float:
    """(sum_i |alpha_i|^p)^(1/p) over the eigenvalues of a Hermitian matrix.

    ``p`` may be any real >= 1 or ``math.inf`` (largest absolute eigenvalue).
    """
    p = float(p)
    if p < 1.0:
        raise ValidationError(f"Schatten order must satisfy p >= 1, got {p}")
    a = np.abs(np.linalg.eigvalsh(as_hermitian(m)))
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 1.0:
        return float(a.sum())
    if p == 2.0:
        return float(np.sqrt(np.sum(a * a)))
    return float(np.sum(a**p) ** (1.0 / p))


def schatten_distance(a, b, p) -> float:
    """Schatten-p norm of the difference of two operators."""
    ma, mb = matrix_of(a), matrix_of(b)
    if ma.shape != mb.shape:
        raise ValidationError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    return schatten_norm(ma - mb, p)


def trace_inner(a, b) -> float:
    """Real part of Tr(a b); rejects a residual imaginary part above tolerance."""
    ma, mb = matrix_of(a), matrix_of(b)
    if ma.shape != mb.shape:
        raise ValidationError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    t = complex(np.einsum("ij,ji->", ma, mb))
    if abs(t.imag) > TRACE_TOL:
        raise ValidationError(
            f"trace inner product has imaginary part {t.imag:.3e}; "
            "inputs are not Hermitian enough",
            violation=abs(t.imag),
        )
    return t.real


@dataclass(frozen=True)
class DensityMatrix:
    """PSD, unit-trace Hermitian matrix.  Construct via ``validate_density``."""

    mat: np.ndarray

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)

    def min_eig(self) -> float:
        return float(self.eigvals()[0])


@dataclass(frozen=True)
class Povm:
    """PSD elements summing to the identity.  Construct via ``validate_povm``."""

    elements: tuple[np.ndarray, ...]

    @property
    def num_classes(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __getitem__(self, c: int) -> np.ndarray:
        return self.elements[c]


def validate_density(m) -> DensityMatrix:
    """Return a DensityMatrix iff the invariants hold.

    Eigenvalues in [-PSD_TOL, 0) are clamped to zero (and the trace
    renormalized) so that boundary iterates from numerical solvers validate.
    On failure the worst violated constraint and its magnitude are reported.
    """
    if isinstance(m, DensityMatrix):
        return m
    a = as_hermitian(m, tol=HERM_TOL)
    tr = complex(np.trace(a))
    violations: list[tuple[str, float]] = []
    if abs(tr.real - 1.0) > TRACE_TOL:
        violations.append(("trace deviates from 1", abs(tr.real - 1.0)))
    if abs(tr.imag) > TRACE_TOL:
        violations.append(("trace has imaginary part", abs(tr.imag)))
    w, v = np.linalg.eigh(a)
    if w[0] < -PSD_TOL:
        violations.append(("PSD violation", float(-w[0])))
    if violations:
        name, mag = max(violations, key=lambda t: t[1])
        raise ValidationError(f"not a density matrix: {name} of {mag:.3e}", violation=mag)
    if w[0] < 0.0:
        w = np.maximum(w, 0.0)
        a = (v * w) @ v.conj().T
        a = (a + a.conj().T) / 2.0
        a = a / np.trace(a).real
    return DensityMatrix(mat=_frozen(a))


def validate_povm(elements) -> Povm:
    """Return a Povm iff every element is PSD and the elements sum to identity."""
    if isinstance(elements, Povm):
        return elements
    mats = [as_hermitian(e) for e in elements]
    if not mats:
        raise ValidationError("a POVM needs at least one element")
    d = mats[0].shape[0]
    if any(e.shape[0] != d for e in mats):
        raise ValidationError("POVM elements have mixed dimensions")
    violations: list[tuple[str, float]] = []
    for c, e in enumerate(mats):
        wmin = float(np.linalg.eigvalsh(e)[0])
        if wmin < -PSD_TOL:
            violations.append((f"element {c} PSD violation", -wmin))
    total = sum(mats)
    completeness = float(np.max(np.abs(total - np.eye(d))))
    if completeness > POVM_TOL:
        violations.append(("elements do not sum to identity", completeness))
    if violations:
        name, mag = max(violations, key=lambda t: t[1])
        raise ValidationError(f"not a POVM: {name} of {mag:.3e}", violation=mag)
    return Povm(elements=tuple(_frozen(e) for e in mats))


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    """Random Hermitian matrix with iid complex Gaussian entries (Hermitized)."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (g + g.conj().T) / 2.0


def random_density(rng: np.random.Generator, d: int) -> DensityMatrix:
    """Full-rank random density matrix rho = G G^dag / Tr(G G^dag)."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = g @ g.conj().T
    return validate_density(m / np.trace(m).real)
