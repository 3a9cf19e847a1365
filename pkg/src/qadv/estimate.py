"""Risks, generalization errors, and Rademacher-complexity estimators.

Population quantities are exact sums over the quantization grid; empirical
quantities are means over a dataset.  The Rademacher complexity of the POVM
class is computed exactly for binary classification (the inner supremum of a
sign-weighted empirical loss over 0 <= Pi <= I is a constant plus the sum of
positive eigenvalues of an accumulated coefficient matrix), with sign vectors
enumerated exhaustively for T <= 16 and sampled otherwise.

The adversarial variant needs the supremum of sign-weighted *adversarial*
losses.  For qubits and two classes the 4-parameter POVM family
Pi = a I + b . sigma reduces exactly: for a fixed direction b-hat the
objective is linear in (a, |b|) over the triangle |b| <= min(a, 1 - a), so
the supremum sits at Pi = 0, Pi = I, or a projective measurement, leaving a
maximization over the unit sphere of directions.  That maximization is done
on a Fibonacci grid refined by a local cap search, batched over sign vectors
through BLAS.  For other dimensions or class counts a multistart projected
ascent over POVMs is used instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackSpec, adversarial_loss, lens_gamma, qubit_gains, _ball_radius
from .embed import (
    DataSpec,
    Dataset,
    EmbeddingSpec,
    bloch_vector,
    embed_states,
    quantized_prior,
    sample_dataset,
)
from .errors import ValidationError
from .qmat import Povm, matrix_of, validate_povm
from .seeding import substream
from .train import project_povm, random_projective_povm

EXHAUSTIVE_SIGMA_LIMIT = 16
DEFAULT_NUM_SIGMA = 512
DEFAULT_NUM_DATASETS = 200
_SIGMA_BLOCK = 4096


# ---------------------------------------------------------------------------
# Risks and generalization errors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiskReport:
    """Population and empirical risks with their difference."""

    empirical: float
    population: float
    gen_error: float
    adversarial: bool
    attack: AttackSpec | None = None
    test_attack: AttackSpec | None = None
    mc_stderr: float = 0.0


def _clean_traces(povm: Povm, states: np.ndarray) -> np.ndarray:
    """Tr(Pi_c rho_n) for every class and state; shape (K, N)."""
    return np.stack(
        [np.einsum("ij,nji->n", povm[c], states).real for c in range(povm.num_classes)]
    )


def _gains(povm: Povm, states: np.ndarray, labels: np.ndarray,
           attack: AttackSpec | None) -> np.ndarray:
    """Per-sample adversarial gains (zero without an attack)."""
    n = states.shape[0]
    if attack is None or attack.epsilon == 0.0:
        return np.zeros(n)
    out = np.empty(n)
    if povm.dim == 2:
        blochs = bloch_vector(states)
        for c in range(povm.num_classes):
            mask = labels == c
            if mask.any():
                out[mask] = qubit_gains(povm[c], blochs[mask], attack.p, attack.epsilon)
        return out
    for i in range(n):
        out[i] = adversarial_loss(povm, states[i], int(labels[i]), attack).gain
    return out


def empirical_risk(povm, dataset: Dataset, embedding: EmbeddingSpec,
                   attack: AttackSpec | None = None) -> float:
    """Mean per-sample (adversarial) loss over the dataset."""
    pv = validate_povm(povm)
    if dataset.size == 0:
        raise ValidationError("empirical risk needs a nonempty dataset")
    states = embed_states(embedding, dataset.xs)
    traces = _clean_traces(pv, states)
    losses = 1.0 - traces[dataset.labels, np.arange(dataset.size)]
    losses = losses + _gains(pv, states, dataset.labels, attack)
    return float(losses.mean())


def population_risk(povm, embedding: EmbeddingSpec, data: DataSpec,
                    attack: AttackSpec | None = None) -> float:
    """Exact expected (adversarial) loss under the quantized prior."""
    pv = validate_povm(povm)
    prior = quantized_prior(data)
    states = embed_states(embedding, prior.xs)
    traces = _clean_traces(pv, states)
    total = 0.0
    k = prior.num_classes
    blochs = bloch_vector(states) if pv.dim == 2 else None
    for c in range(k):
        losses = 1.0 - traces[c]
        if attack is not None and attack.epsilon > 0.0:
            if blochs is not None:
                losses = losses + qubit_gains(pv[c], blochs, attack.p, attack.epsilon)
            else:
                losses = losses + np.array(
                    [adversarial_loss(pv, states[i], c, attack).gain for i in range(len(prior.xs))]
                )
        total += float(prior.conditional[c] @ losses) / k
    return total


_MATCHED = object()


def gen_error(povm, dataset: Dataset, embedding: EmbeddingSpec, data: DataSpec,
              attack: AttackSpec | None = None, test_attack=_MATCHED) -> RiskReport:
    """Population minus empirical risk.

    With only ``attack`` given the attack is matched at train and test; pass
    ``test_attack`` for the mismatched variant L_{p',eps'} - Lhat_{p,eps}.
    """
    test = attack if test_attack is _MATCHED else test_attack
    emp = empirical_risk(povm, dataset, embedding, attack)
    pop = population_risk(povm, embedding, data, test)
    return RiskReport(
        empirical=emp,
        population=pop,
        gen_error=pop - emp,
        adversarial=attack is not None or test is not None,
        attack=attack,
        test_attack=test,
    )


# ---------------------------------------------------------------------------
# Sign-vector enumeration
# ---------------------------------------------------------------------------

def _sigma_blocks(T: int, rng: np.random.Generator, num_sigma: int):
    """Yield blocks of sign vectors, exhaustively (2^T, T <= 16) or sampled."""
    if T == 0:
        return
    if T <= EXHAUSTIVE_SIGMA_LIMIT:
        total = 1 << T
        bits = np.arange(T)
        for start in range(0, total, _SIGMA_BLOCK):
            idx = np.arange(start, min(start + _SIGMA_BLOCK, total))
            yield 1.0 - 2.0 * ((idx[:, None] >> bits[None, :]) & 1).astype(float)
    else:
        # antithetic pairs (sigma, -sigma): the exhaustive set is closed under
        # negation, and pairing cancels the leading odd term of the suprema
        remaining = num_sigma
        while remaining > 0:
            b = min(_SIGMA_BLOCK, remaining)
            half = max(b // 2, 1)
            rows = 2.0 * rng.integers(0, 2, size=(half, T)).astype(float) - 1.0
            block = np.concatenate([rows, -rows], axis=0)[:b]
            yield block
            remaining -= b


def sigma_count(T: int, num_sigma: int) -> int:
    return (1 << T) if 0 < T <= EXHAUSTIVE_SIGMA_LIMIT else num_sigma


# ---------------------------------------------------------------------------
# Exact binary inner supremum (clean loss)
# ---------------------------------------------------------------------------

def _vertex_sums(sigma: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s0 = sigma @ (labels == 0).astype(float)
    s1 = sigma @ (labels == 1).astype(float)
    return s0, s1


def _clean_sups_bloch(sigma: np.ndarray, blochs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Exact sup over binary qubit POVMs, per sign vector."""
    s0, s1 = _vertex_sums(sigma, labels)
    sgn = np.where(labels == 1, 1.0, -1.0)
    w = (sigma * sgn) @ blochs
    wn = np.linalg.norm(w, axis=1)
    return np.maximum(np.maximum(s0, s1), 0.5 * (s0 + s1 + wn))


def _clean_sups_eig(sigma: np.ndarray, states: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Exact sup for binary classification in any dimension."""
    s0, _ = _vertex_sums(sigma, labels)
    sgn = np.where(labels == 1, 1.0, -1.0)
    acc = np.einsum("bn,nij->bij", sigma * sgn, states)
    w = np.linalg.eigvalsh(acc)
    return s0 + np.clip(w, 0.0, None).sum(axis=1)


# ---------------------------------------------------------------------------
# Adversarial inner supremum, structured qubit path
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdvSupOptions:
    """Knobs for the adversarial inner-supremum search."""

    grid_size: int = 1024
    refine_radii: tuple[float, ...] = (0.08, 0.02)
    refine_dirs: int = 8
    multistart_random: int = 16
    multistart_iters: int = 40
    multistart_step: float = 0.5


def _fibonacci_sphere(m: int) -> np.ndarray:
    i = np.arange(m) + 0.5
    z = 1.0 - 2.0 * i / m
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def _tangent_frame(dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.where(
        (np.abs(dirs[:, 2]) < 0.9)[:, None],
        np.array([0.0, 0.0, 1.0]),
        np.array([1.0, 0.0, 0.0]),
    )
    t1 = np.cross(dirs, helper)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(dirs, t1)
    return t1, t2


def _adv_sups_bloch(sigma: np.ndarray, blochs: np.ndarray, labels: np.ndarray,
                    attack: AttackSpec, opts: AdvSupOptions) -> np.ndarray:
    """Sup over binary qubit POVMs of sign-weighted adversarial losses.

    Exact up to the spherical search for the best projective axis: Fibonacci
    grid plus monotone cap refinement, so the value is a certified lower
    bound within O(angular resolution^2) of the true supremum.
    """
    radius = _ball_radius(attack.p, attack.epsilon)
    s0, s1 = _vertex_sums(sigma, labels)
    sgn = np.where(labels == 1, 1.0, -1.0)
    w = (sigma * sgn) @ blochs  # (B, 3)
    rnorm = np.linalg.norm(blochs, axis=1)
    # class 0 samples are attacked through +b, class 1 through -b; fold the
    # sign into the state vectors so dot products feed lens_gamma directly
    elem_sign = np.where(labels == 0, 1.0, -1.0)
    blochs_signed = blochs * elem_sign[:, None]

    def h_values(dirs: np.ndarray) -> np.ndarray:
        """h(b-hat) per (sigma row, direction): b.w + sum_n sigma_n gamma_n."""
        gamma = lens_gamma(blochs_signed @ dirs.T, rnorm[:, None], radius)
        return w @ dirs.T + sigma @ gamma

    grid = _fibonacci_sphere(opts.grid_size)
    h = h_values(grid)
    best = h.max(axis=1)
    cur = grid[h.argmax(axis=1)]

    def try_candidates(cand: np.ndarray) -> None:
        nonlocal best, cur
        gamma = lens_gamma(cand @ blochs_signed.T, rnorm[None, :], radius)
        hv = (cand * w).sum(axis=1) + (sigma * gamma).sum(axis=1)
        improved = hv > best
        best = np.where(improved, hv, best)
        cur = np.where(improved[:, None], cand, cur)

    # the exact clean-optimal axes: keeps the paired gap to the closed-form
    # clean supremum free of grid bias
    wn = np.linalg.norm(w, axis=1, keepdims=True)
    what = np.where(wn > 1e-300, w / np.maximum(wn, 1e-300), np.array([0.0, 0.0, 1.0]))
    try_candidates(what)
    try_candidates(-what)
    for delta in opts.refine_radii:
        t1, t2 = _tangent_frame(cur)
        for k in range(opts.refine_dirs):
            phi = 2.0 * math.pi * k / opts.refine_dirs
            cand = math.cos(delta) * cur + math.sin(delta) * (
                math.cos(phi) * t1 + math.sin(phi) * t2
            )
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            try_candidates(cand)
    return np.maximum(np.maximum(s0, s1), 0.5 * (s0 + s1 + best))


# ---------------------------------------------------------------------------
# Adversarial inner supremum, multistart fallback (any d, K)
# ---------------------------------------------------------------------------

def _sigma_objective(povm: Povm, states: np.ndarray, labels: np.ndarray,
                     sigma_row: np.ndarray, attack: AttackSpec) -> tuple[float, list]:
    lams = [adversarial_loss(povm, states[n], int(labels[n]), attack) for n in range(len(labels))]
    val = float(np.dot(sigma_row, [res.loss for res in lams]))
    return val, [res.lambda_star.mat for res in lams]


def _inner_sup_multistart(states: np.ndarray, labels: np.ndarray, sigma_row: np.ndarray,
                          attack: AttackSpec, K: int, rng: np.random.Generator,
                          opts: AdvSupOptions) -> float:
    """16 random + deterministic starts of projected subgradient ascent."""
    d = states.shape[-1]
    T = len(labels)
    starts: list[list[np.ndarray]] = []
    if K == 2:
        sgn = np.where(labels == 1, 1.0, -1.0)
        acc = np.einsum("n,nij->ij", sigma_row * sgn, states)
        wacc, vacc = np.linalg.eigh((acc + acc.conj().T) / 2.0)
        plus = (vacc * (wacc > 0)) @ vacc.conj().T
        eye = np.eye(d, dtype=np.complex128)
        starts.append([plus, eye - plus])
        starts.append([eye - plus, plus])
    starts.append([np.eye(d, dtype=np.complex128) / K for _ in range(K)])
    for _ in range(opts.multistart_random):
        starts.append(list(random_projective_povm(rng, d, K).elements))
    best = -math.inf
    for start in starts:
        povm = project_povm(start)
        val, lams = _sigma_objective(povm, states, labels, sigma_row, attack)
        best = max(best, val)
        step = opts.multistart_step
        for _ in range(opts.multistart_iters):
            grads = []
            for c in range(K):
                g = np.zeros((d, d), dtype=np.complex128)
                for n in range(T):
                    if labels[n] == c:
                        g -= sigma_row[n] * lams[n]
                grads.append(g / T)
            candidate = project_povm([povm[c] - step * grads[c] for c in range(K)])
            cand_val, cand_lams = _sigma_objective(candidate, states, labels, sigma_row, attack)
            if cand_val > val:
                povm, val, lams = candidate, cand_val, cand_lams
                best = max(best, val)
            else:
                step /= 2.0
                if step < opts.multistart_step * 1e-3:
                    break
    return best


# ---------------------------------------------------------------------------
# Rademacher estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSampler:
    """Draws datasets of fixed size T from the embedding's data distribution."""

    embedding: EmbeddingSpec
    data: DataSpec
    T: int

    def draw(self, rng: np.random.Generator) -> Dataset:
        return sample_dataset(self.data, self.T, seed=0, rng=rng)


@dataclass(frozen=True)
class RademacherEstimate:
    value: float
    mode: str  # exact_binary | multistart | exhaustive_sigma
    num_sigma: int
    num_datasets: int
    stderr: float


@dataclass(frozen=True)
class AdversarialRademacher:
    """Adversarial estimate paired with the exact clean value on the same draws."""

    estimate: RademacherEstimate
    clean: RademacherEstimate
    gap: float
    gap_stderr: float


def sigma_sup_means(blochs: np.ndarray, labels: np.ndarray, rng: np.random.Generator,
                    num_sigma: int, attack: AttackSpec | None = None,
                    opts: AdvSupOptions | None = None) -> tuple[float, float]:
    """E_sigma of the clean and adversarial inner suprema for one dataset.

    Sign vectors are shared by the two values, so downstream differences are
    paired.  Qubit states and binary labels only.
    """
    opts = opts or AdvSupOptions()
    T = len(labels)
    if T == 0:
        return 0.0, 0.0
    tot_clean = 0.0
    tot_adv = 0.0
    count = 0
    for sig in _sigma_blocks(T, rng, num_sigma):
        tot_clean += float(_clean_sups_bloch(sig, blochs, labels).sum())
        if attack is not None and attack.epsilon > 0.0:
            tot_adv += float(_adv_sups_bloch(sig, blochs, labels, attack, opts).sum())
        count += sig.shape[0]
    clean = tot_clean / (count * T)
    adv = tot_adv / (count * T) if attack is not None and attack.epsilon > 0.0 else clean
    return clean, adv


def _dataset_values(sampler: DatasetSampler, num_datasets: int, seed: int,
                    num_sigma: int, attack: AttackSpec | None,
                    opts: AdvSupOptions) -> tuple[np.ndarray, np.ndarray]:
    """Per-dataset (clean, adversarial) expected suprema, on paired draws."""
    if sampler.data.num_classes != 2:
        raise ValidationError("the exact binary estimator needs K = 2")
    clean_vals = np.zeros(num_datasets)
    adv_vals = np.zeros(num_datasets)
    for i in range(num_datasets):
        rng = substream(seed, i)
        ds = sampler.draw(rng)
        if ds.size == 0:
            continue
        blochs = bloch_vector(embed_states(sampler.embedding, ds.xs))
        clean_vals[i], adv_vals[i] = sigma_sup_means(
            blochs, ds.labels, rng, num_sigma, attack, opts
        )
    return clean_vals, adv_vals


def _stderr(vals: np.ndarray) -> float:
    if vals.size < 2:
        return 0.0
    return float(vals.std(ddof=1) / math.sqrt(vals.size))


def rademacher_exact_binary(sampler: DatasetSampler, num_datasets: int, seed: int,
                            num_sigma: int = DEFAULT_NUM_SIGMA) -> RademacherEstimate:
    """Exact Rademacher complexity of the POVM class for binary labels."""
    clean_vals, _ = _dataset_values(sampler, num_datasets, seed, num_sigma, None,
                                    AdvSupOptions())
    exhaustive = 0 < sampler.T <= EXHAUSTIVE_SIGMA_LIMIT
    return RademacherEstimate(
        value=float(clean_vals.mean()),
        mode="exhaustive_sigma" if exhaustive else "exact_binary",
        num_sigma=sigma_count(sampler.T, num_sigma),
        num_datasets=num_datasets,
        stderr=_stderr(clean_vals),
    )


def rademacher_adversarial(attack: AttackSpec, sampler: DatasetSampler,
                           num_datasets: int, seed: int,
                           num_sigma: int = DEFAULT_NUM_SIGMA,
                           opts: AdvSupOptions | None = None) -> AdversarialRademacher:
    """Adversarial Rademacher complexity with its gap to the clean value.

    Datasets and sign vectors are shared between the two estimates, so the
    reported gap (an estimate of the perturbation Rademacher complexity) has
    paired-sample error bars.
    """
    opts = opts or AdvSupOptions()
    if sampler.embedding.dim == 2 and sampler.data.num_classes == 2:
        clean_vals, adv_vals = _dataset_values(
            sampler, num_datasets, seed, num_sigma, attack, opts
        )
        mode = "exhaustive_sigma" if 0 < sampler.T <= EXHAUSTIVE_SIGMA_LIMIT else "multistart"
    else:
        clean_vals = np.zeros(num_datasets)
        adv_vals = np.zeros(num_datasets)
        for i in range(num_datasets):
            rng = substream(seed, i)
            ds = sampler.draw(rng)
            states = embed_states(sampler.embedding, ds.xs)
            vals_c, vals_a = [], []
            for sig in _sigma_blocks(ds.size, rng, num_sigma):
                for row in sig:
                    vals_c.append(float(_clean_sups_eig(row[None, :], states, ds.labels)[0]))
                    vals_a.append(
                        _inner_sup_multistart(states, ds.labels, row, attack,
                                              sampler.data.num_classes, rng, opts)
                    )
            clean_vals[i] = float(np.mean(vals_c)) / ds.size if vals_c else 0.0
            adv_vals[i] = float(np.mean(vals_a)) / ds.size if vals_a else 0.0
        mode = "multistart"
    gaps = adv_vals - clean_vals
    exhaustive = 0 < sampler.T <= EXHAUSTIVE_SIGMA_LIMIT
    nsig = sigma_count(sampler.T, num_sigma)
    return AdversarialRademacher(
        estimate=RademacherEstimate(float(adv_vals.mean()), mode, nsig, num_datasets,
                                    _stderr(adv_vals)),
        clean=RademacherEstimate(float(clean_vals.mean()),
                                 "exhaustive_sigma" if exhaustive else "exact_binary",
                                 nsig, num_datasets, _stderr(clean_vals)),
        gap=float(gaps.mean()),
        gap_stderr=_stderr(gaps),
    )


def uniform_deviation_bound(r, T: int, delta: float) -> float:
    """2 R + sqrt(2 log(2/delta) / T)."""
    if not (0.0 < delta < 1.0):
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    if T < 1:
        raise ValidationError(f"T must be >= 1, got {T}")
    value = r.value if isinstance(r, RademacherEstimate) else float(r)
    return 2.0 * value + math.sqrt(2.0 * math.log(2.0 / delta) / T)
