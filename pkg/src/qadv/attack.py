"""Worst-case perturbation solvers for the adversarial loss.

Given a POVM element P, a state rho, and a Schatten-p budget eps, the inner
problem is

    max Tr(P (rho - lambda))   over  {lambda PSD, Tr lambda = 1, ||rho - lambda||_p <= eps}

for p in {1, inf}.  Four solvers cover it:

* ``closed_form_p1`` / ``closed_form_pinf``: the analytic optima (a +-eps/2
  pair on the extreme eigenvalues of P for p=1; eps times the sign pattern
  around the median eigenvalue for p=inf), valid while the PSD constraint is
  slack (eps <= 2 min-eig(rho), resp. eps <= min-eig(rho)).
* ``qubit_exact``: exact solution for d=2 at any budget.  In Bloch
  coordinates both Schatten balls are Euclidean balls (radius eps for p=1,
  2*eps for p=inf), so the problem is a linear program over the intersection
  of two balls and solves in closed form.
* ``numerical_inner_max``: projected gradient ascent with Dykstra alternating
  projections onto the density set and the Schatten ball; any dimension.
* ``bloch_brute_force``: grid-search oracle over the Bloch ball (d=2 only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .embed import bloch_vector, from_bloch
from .errors import ConvergenceError, InfeasibleBudgetError, ValidationError
from .qmat import (
    DensityMatrix,
    Povm,
    as_hermitian,
    hermitian_eig,
    matrix_of,
    schatten_distance,
    schatten_norm,
    trace_inner,
    validate_density,
    validate_povm,
)

FEAS_TOL = 1e-7
OPT_TOL = 1e-6
DEFAULT_RESOLUTION = 2e-3

_TIE_TOL = 1e-12
_PRE_SLACK = 1e-12
_SOLVERS = ("auto", "closed_form", "numerical", "brute_force", "qubit_exact")


def _norm_p(p) -> float:
    p = float(p)
    if p not in (1.0, math.inf):
        raise ValidationError(f"attack order must be 1 or inf, got {p}")
    return p


@dataclass(frozen=True)
class AttackSpec:
    """Norm order p in {1, inf}, budget eps >= 0, and solver choice."""

    p: float
    epsilon: float
    solver: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "p", _norm_p(self.p))
        if self.epsilon < 0:
            raise ValidationError(f"perturbation budget must be >= 0, got {self.epsilon}")
        if self.solver not in _SOLVERS:
            raise ValidationError(f"unknown solver {self.solver!r}; choose from {_SOLVERS}")


@dataclass(frozen=True)
class AttackResult:
    """Optimal perturbed state and the loss it achieves."""

    lambda_star: DensityMatrix
    loss: float
    gain: float
    solver_used: str
    feasibility_slack: float
    converged: bool = True


def _result(element: np.ndarray, rho: DensityMatrix, lam, solver: str, p: float,
            epsilon: float, converged: bool = True) -> AttackResult:
    lam_dm = validate_density(lam)
    loss = 1.0 - trace_inner(element, lam_dm.mat)
    clean = 1.0 - trace_inner(element, rho.mat)
    slack = epsilon - schatten_distance(rho.mat, lam_dm.mat, p)
    return AttackResult(
        lambda_star=lam_dm,
        loss=loss,
        gain=loss - clean,
        solver_used=solver,
        feasibility_slack=slack,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Closed forms (valid while the PSD constraint is slack)
# ---------------------------------------------------------------------------

def closed_form_p1(povm_element, rho, epsilon: float) -> AttackResult:
    """p=1 optimum: +eps/2 at the top eigenvalue of the element, -eps/2 at the
    bottom, in the element's eigenbasis.  Requires eps <= 2 min-eig(rho)."""
    el = as_hermitian(povm_element)
    dm = validate_density(rho)
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    amin = dm.min_eig()
    if epsilon > 2.0 * amin + _PRE_SLACK:
        raise InfeasibleBudgetError(
            f"p=1 closed form needs eps <= 2*min-eig(rho) = {2 * amin:.6g}, got "
            f"{epsilon:.6g}; use the numerical solver"
        )
    eig = hermitian_eig(el)
    alpha = eig.eigenvalues
    d = alpha.shape[0]
    tau = np.zeros(d)
    if epsilon > 0 and alpha[-1] - alpha[0] > _TIE_TOL:
        # first index of the top eigenvalue block; index 0 is the bottom block
        i_max = int(np.flatnonzero(alpha >= alpha[-1] - _TIE_TOL)[0])
        tau[i_max] += epsilon / 2.0
        tau[0] -= epsilon / 2.0
    lam = dm.mat - (eig.basis * tau) @ eig.basis.conj().T
    return _result(el, dm, lam, "closed_form", 1.0, epsilon)


def _median_eigenvalue(alpha: np.ndarray) -> float:
    d = alpha.shape[0]
    if d % 2 == 0:
        return float(alpha[d // 2 - 1] + alpha[d // 2]) / 2.0
    return float(alpha[d // 2])


def closed_form_pinf(povm_element, rho, epsilon: float) -> AttackResult:
    """p=inf optimum: eps * sign(alpha_i - median) in the element's eigenbasis.

    Entries tied with the median get signs only as needed to keep the
    perturbation traceless (the paper's sign rule leaves ties open, but a
    nonzero trace would break unit trace of lambda).  Requires
    eps <= min-eig(rho).
    """
    el = as_hermitian(povm_element)
    dm = validate_density(rho)
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    amin = dm.min_eig()
    if epsilon > amin + _PRE_SLACK:
        raise InfeasibleBudgetError(
            f"p=inf closed form needs eps <= min-eig(rho) = {amin:.6g}, got "
            f"{epsilon:.6g}; use the numerical solver"
        )
    eig = hermitian_eig(el)
    alpha = eig.eigenvalues
    amed = _median_eigenvalue(alpha)
    diff = alpha - amed
    signs = np.where(diff > _TIE_TOL, 1.0, np.where(diff < -_TIE_TOL, -1.0, 0.0))
    imbalance = int(round(signs.sum()))
    if imbalance != 0:
        fill = -1.0 if imbalance > 0 else 1.0
        for i in np.flatnonzero(np.abs(diff) <= _TIE_TOL):
            if imbalance == 0:
                break
            signs[i] = fill
            imbalance += int(fill)
    tau = epsilon * signs
    lam = dm.mat - (eig.basis * tau) @ eig.basis.conj().T
    return _result(el, dm, lam, "closed_form", math.inf, epsilon)


# ---------------------------------------------------------------------------
# Exact qubit solver (any budget)
# ---------------------------------------------------------------------------

def _ball_radius(p: float, epsilon: float) -> float:
    # ||((u - r) . sigma)/2||_1 = |u - r| and ||.||_inf = |u - r|/2
    return epsilon if p == 1.0 else 2.0 * epsilon


def element_bloch(povm_element) -> tuple[float, np.ndarray]:
    """Decompose a Hermitian 2x2 element as a*I + b . sigma."""
    el = as_hermitian(povm_element)
    if el.shape[0] != 2:
        raise ValidationError("Bloch decomposition needs dimension 2")
    return float(np.trace(el).real) / 2.0, bloch_vector(el) / 2.0


def lens_gamma(dots, rnorm, radius: float):
    """max of g.(r - u) over {|u - r| <= radius, |u| <= 1} for unit g.

    Depends on g only through dots = g.r; vectorized over ``dots``/``rnorm``.
    The unconstrained branch (attack ball inside the Bloch ball) dominates in
    practice, so the boundary branches are only evaluated where needed.
    """
    dots = np.asarray(dots, dtype=float)
    shape = dots.shape
    if radius == 0.0:
        return np.zeros(shape)
    d1 = dots.ravel()
    r1 = np.broadcast_to(np.asarray(rnorm, dtype=float), shape).ravel()
    rsq = r1 * r1
    out = np.full(d1.shape, radius)
    bound = np.flatnonzero(rsq - 2.0 * radius * d1 + radius * radius > 1.0 + _TIE_TOL)
    if bound.size:
        df = d1[bound]
        rsq_b = np.maximum(rsq[bound], 1e-300)
        beta = (1.0 + rsq_b - radius * radius) / 2.0
        arc = np.sqrt(np.clip(1.0 - beta * beta / rsq_b, 0.0, None))
        gperp = np.sqrt(np.clip(1.0 - df * df / rsq_b, 0.0, None))
        vals = df * (1.0 - beta / rsq_b) + arc * gperp
        capped = 1.0 + 2.0 * df + rsq_b <= radius * radius + _TIE_TOL
        if capped.any():
            vals = np.where(capped, 1.0 + df, vals)
        out[bound] = np.maximum(vals, 0.0)
    return out.reshape(shape)


def qubit_gains(povm_element, bloch_states, p, epsilon: float) -> np.ndarray:
    """Exact adversarial gains for a batch of qubit states (Bloch vectors)."""
    p = _norm_p(p)
    _, b = element_bloch(povm_element)
    bn = float(np.linalg.norm(b))
    r = np.asarray(bloch_states, dtype=float)
    if bn < _TIE_TOL:
        return np.zeros(r.shape[:-1])
    ghat = b / bn
    dots = r @ ghat
    rnorm = np.linalg.norm(r, axis=-1)
    return bn * lens_gamma(dots, rnorm, _ball_radius(p, epsilon))


def qubit_exact(povm_element, rho, p, epsilon: float) -> AttackResult:
    """Exact d=2 solver for any budget (PSD constraint handled in closed form)."""
    p = _norm_p(p)
    el = as_hermitian(povm_element)
    if el.shape[0] != 2:
        raise ValidationError("qubit_exact needs dimension 2")
    dm = validate_density(rho)
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    _, b = element_bloch(el)
    bn = float(np.linalg.norm(b))
    r = bloch_vector(dm.mat)
    radius = _ball_radius(p, epsilon)
    if bn < _TIE_TOL or radius == 0.0:
        return _result(el, dm, dm.mat, "qubit_exact", p, epsilon)
    ghat = b / bn
    dot = float(ghat @ r)
    rsq = float(r @ r)
    if rsq - 2.0 * radius * dot + radius * radius <= 1.0 + _TIE_TOL:
        u = r - radius * ghat
    elif 1.0 + 2.0 * dot + rsq <= radius * radius + _TIE_TOL:
        u = -ghat
    else:
        beta = (1.0 + rsq - radius * radius) / 2.0
        arc = math.sqrt(max(0.0, 1.0 - beta * beta / rsq))
        perp = ghat - (dot / rsq) * r
        pn = float(np.linalg.norm(perp))
        if pn > _TIE_TOL:
            perp /= pn
        else:
            # g parallel to r: every direction on the circle is optimal
            helper = np.array([1.0, 0.0, 0.0]) if abs(r[0]) < 0.9 * math.sqrt(rsq) else np.array([0.0, 1.0, 0.0])
            perp = np.cross(r, helper)
            perp /= np.linalg.norm(perp)
        u = (beta / rsq) * r - arc * perp
    nu = float(np.linalg.norm(u))
    if nu > 1.0:
        u = u / nu
    return _result(el, dm, from_bloch(u), "qubit_exact", p, epsilon)


def qubit_worst_blochs(povm_element, bloch_states, p, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized exact d=2 solver: per-state gains and optimal Bloch vectors."""
    p = _norm_p(p)
    _, b = element_bloch(povm_element)
    bn = float(np.linalg.norm(b))
    r = np.atleast_2d(np.asarray(bloch_states, dtype=float))
    radius = _ball_radius(p, epsilon)
    if bn < _TIE_TOL or radius == 0.0:
        return np.zeros(r.shape[0]), r.copy()
    ghat = b / bn
    dots = r @ ghat
    rsq = np.einsum("nk,nk->n", r, r)
    free = rsq - 2.0 * radius * dots + radius * radius <= 1.0 + _TIE_TOL
    capped = 1.0 + 2.0 * dots + rsq <= radius * radius + _TIE_TOL
    u = r - radius * ghat[None, :]
    u[~free] = -ghat
    circle = ~free & ~capped
    if circle.any():
        rc = r[circle]
        rsq_c = np.maximum(rsq[circle], 1e-300)
        beta = (1.0 + rsq_c - radius * radius) / 2.0
        arc = np.sqrt(np.clip(1.0 - beta * beta / rsq_c, 0.0, None))
        perp = ghat[None, :] - (dots[circle] / rsq_c)[:, None] * rc
        pn = np.linalg.norm(perp, axis=1)
        fix = pn <= _TIE_TOL
        if fix.any():
            helper = np.where(
                (np.abs(rc[fix, 0]) < 0.9 * np.sqrt(rsq_c[fix]))[:, None],
                np.array([1.0, 0.0, 0.0]),
                np.array([0.0, 1.0, 0.0]),
            )
            alt = np.cross(rc[fix], helper)
            perp[fix] = alt
            pn[fix] = np.linalg.norm(alt, axis=1)
        perp /= pn[:, None]
        u[circle] = (beta / rsq_c)[:, None] * rc - arc[:, None] * perp
    nu = np.linalg.norm(u, axis=1)
    over = nu > 1.0
    u[over] /= nu[over][:, None]
    gains = bn * (dots - u @ ghat)
    return np.maximum(gains, 0.0), u


# ---------------------------------------------------------------------------
# Numerical solver: projected gradient ascent + Dykstra projections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverOptions:
    step_size: float | None = None  # default 0.5 / ||element||_inf
    max_iters: int = 500
    dykstra_cycles: int = 300  # upper bound; cycles stop early on agreement
    opt_tol: float = OPT_TOL
    patience: int = 5
    step_growth: float = 4.0  # grow the step on stall: for a linear objective
    max_escalations: int = 4  # far projections expose the optimal face


def _project_simplex(w: np.ndarray) -> np.ndarray:
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, w.shape[0] + 1)
    k = np.flatnonzero(u - css / idx > 0)[-1]
    return np.maximum(w - css[k] / (k + 1), 0.0)


def _project_l1(w: np.ndarray, radius: float) -> np.ndarray:
    a = np.abs(w)
    if a.sum() <= radius:
        return w
    if radius <= 0.0:
        return np.zeros_like(w)
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, w.shape[0] + 1)
    k = np.flatnonzero(u - css / idx > 0)[-1]
    theta = css[k] / (k + 1)
    return np.sign(w) * np.maximum(a - theta, 0.0)


def _project_density_set(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((h + h.conj().T) / 2.0)
    return (v * _project_simplex(w)) @ v.conj().T


def _project_schatten_ball(h: np.ndarray, center: np.ndarray, p: float, eps: float) -> np.ndarray:
    tau = (h - center + (h - center).conj().T) / 2.0
    w, v = np.linalg.eigh(tau)
    w2 = _project_l1(w, eps) if p == 1.0 else np.clip(w, -eps, eps)
    return center + (v * w2) @ v.conj().T


def _project_feasible(h: np.ndarray, center: np.ndarray, p: float, eps: float,
                      cycles: int) -> np.ndarray:
    """Dykstra projection onto {density matrices} . {Schatten ball around center}.

    Ends on the density set; any residual ball violation is repaired exactly by
    shrinking toward the center (a convex combination of density matrices).
    """
    x = h
    inc_ball = np.zeros_like(h)
    inc_dens = np.zeros_like(h)
    for _ in range(cycles):
        y = _project_schatten_ball(x + inc_ball, center, p, eps)
        inc_ball = x + inc_ball - y
        x = _project_density_set(y + inc_dens)
        inc_dens = y + inc_dens - x
        # converged once the two set-projections agree (the primal iterate can
        # stall for several cycles while the increments still move)
        if np.max(np.abs(y - x)) < 1e-13:
            break
    dist = schatten_norm(x - center, p)
    if dist > eps:
        x = center + (x - center) * (eps / dist) if dist > 0 else center
    return x


def numerical_inner_max(povm_element, rho, p, epsilon: float,
                        opts: SolverOptions | None = None) -> AttackResult:
    """Projected gradient ascent on the linear objective; any dimension."""
    p = _norm_p(p)
    el = as_hermitian(povm_element)
    dm = validate_density(rho)
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    opts = opts or SolverOptions()
    clean_tr = trace_inner(el, dm.mat)
    d = el.shape[0]
    # ascent direction restricted to the trace-zero subspace: the feasible set
    # lives in the trace-1 affine plane, and a trace component in the step
    # only stalls the ball projection
    grad = el - (np.trace(el).real / d) * np.eye(d)
    scale = float(np.max(np.abs(np.linalg.eigvalsh(el))))
    step = opts.step_size if opts.step_size is not None else 0.5 / max(scale, 1e-12)
    lam = np.array(dm.mat)
    best_lam = lam
    best_gain = 0.0
    stale = 0
    escalations = 0
    converged = False
    for _ in range(opts.max_iters):
        lam = _project_feasible(lam - step * grad, dm.mat, p, epsilon, opts.dykstra_cycles)
        gain = clean_tr - trace_inner(el, lam)
        if gain > best_gain + opts.opt_tol * 0.01:
            best_gain, best_lam, stale = gain, lam, 0
        else:
            stale += 1
        if stale >= opts.patience:
            if escalations >= opts.max_escalations:
                converged = True
                break
            step *= opts.step_growth
            escalations += 1
            stale = 0
    return _result(el, dm, best_lam, "numerical", p, epsilon, converged=converged)


# ---------------------------------------------------------------------------
# Brute-force oracle (d = 2)
# ---------------------------------------------------------------------------

def bloch_brute_force(povm_element, rho, p, epsilon: float,
                      resolution: float = DEFAULT_RESOLUTION) -> AttackResult:
    """Grid-search oracle over the Bloch ball.

    The objective b.(r - u) and both constraints are invariant under
    reflection across the plane spanned by the element axis b and the state
    vector r, so the search runs on a 2-D grid in that plane; the reduction
    is exact and the returned gain is within O(resolution) of the optimum.
    """
    el = as_hermitian(povm_element)
    if el.shape[0] != 2:
        raise ValidationError("bloch_brute_force supports dimension 2 only")
    dm = validate_density(rho)
    p = _norm_p(p)
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    _, b = element_bloch(el)
    bn = float(np.linalg.norm(b))
    r = bloch_vector(dm.mat)
    radius = _ball_radius(p, epsilon)
    if bn < _TIE_TOL or radius == 0.0:
        return _result(el, dm, dm.mat, "brute_force", p, epsilon)
    e1 = b / bn
    r_g = float(e1 @ r)
    r_perp = r - r_g * e1
    r_t = float(np.linalg.norm(r_perp))
    if r_t > _TIE_TOL:
        e2 = r_perp / r_t
    else:
        helper = np.array([1.0, 0.0, 0.0]) if abs(e1[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e2 = np.cross(e1, helper)
        e2 /= np.linalg.norm(e2)
    half = min(radius, 2.0)
    n = int(math.ceil(half / resolution))
    offs = resolution * np.arange(-n, n + 1)
    s = r_g + offs  # ascending; the objective decreases in s
    t = r_t + offs
    in_ball = (offs[:, None] ** 2 + offs[None, :] ** 2) <= radius * radius + 1e-12
    in_unit = (s[:, None] ** 2 + t[None, :] ** 2) <= 1.0 + 1e-12
    feasible = in_ball & in_unit
    cols_ok = feasible.any(axis=1)
    if not cols_ok.any():
        return _result(el, dm, dm.mat, "brute_force", p, epsilon)
    i = int(np.flatnonzero(cols_ok)[0])
    js = np.flatnonzero(feasible[i])
    j = int(js[np.argmin(np.abs(t[js] - r_t))])
    u = s[i] * e1 + t[j] * e2
    return _result(el, dm, from_bloch(u), "brute_force", p, epsilon)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def closed_form_feasible(attack: AttackSpec, min_eig: float) -> bool:
    """Appendix-style validity: eps <= 2*min-eig (p=1) or eps <= min-eig (p=inf)."""
    limit = 2.0 * min_eig if attack.p == 1.0 else min_eig
    return attack.epsilon <= limit + _PRE_SLACK


def adversarial_loss(povm, rho, c: int, attack: AttackSpec) -> AttackResult:
    """Worst-case loss of POVM element ``c`` on ``rho`` under ``attack``.

    ``auto`` uses the closed form when its validity condition holds, the exact
    Bloch solver for other qubit budgets, and the numerical solver otherwise.
    """
    pv = validate_povm(povm)
    if not 0 <= c < pv.num_classes:
        raise ValidationError(f"class index {c} out of range for K={pv.num_classes}")
    dm = validate_density(rho)
    el = pv[c]
    solver = attack.solver
    if solver == "auto":
        if closed_form_feasible(attack, dm.min_eig()):
            solver = "closed_form"
        elif dm.dim == 2:
            solver = "qubit_exact"
        else:
            solver = "numerical"
    if solver == "closed_form":
        if attack.p == 1.0:
            return closed_form_p1(el, dm, attack.epsilon)
        return closed_form_pinf(el, dm, attack.epsilon)
    if solver == "qubit_exact":
        return qubit_exact(el, dm, attack.p, attack.epsilon)
    if solver == "brute_force":
        return bloch_brute_force(el, dm, attack.p, attack.epsilon)
    return numerical_inner_max(el, dm, attack.p, attack.epsilon)
