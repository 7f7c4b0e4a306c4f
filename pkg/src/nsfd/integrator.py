"""Time-reversible stepping for mass-action systems.

The update rule averages the split field between the two endpoints of a
step,

    (x' - x) / h = (phi(x', x) + phi(x, x')) / 2,

so running it with step -h from x' recovers x: the map is its own inverse
up to round-off.  For a mass-action model the rule is linear in x', which
turns each step into one linear solve:

    forward   (I - h S(x)) x' = (I + (h/2) L) x + h b
    backward  (I + h S(x)) y  = (I - (h/2) L) x - h b

with the step matrix S(x) = (P(x) + Q(x) + L) / 2.  Both solve matrices
are strictly column diagonally dominant, hence safely invertible, for
every state in the domain box whenever h stays below the bound computed
by :func:`step_bound`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .linalg import LinAlgError, fd_jacobian, lu_solve, lu_solve_batch
from .model import (
    GeneralSplitSystem,
    MassActionModel,
    SpecError,
    _check_state,
    eval_f,
    eval_phi,
    f_jacobian,
)

__all__ = [
    "DominanceError",
    "NewtonDivergenceError",
    "NewtonOptions",
    "StepBoundReport",
    "Trajectory",
    "step_matrix",
    "step_forward",
    "step_backward",
    "step_forward_batch",
    "step_backward_batch",
    "step_implicit_general",
    "step_bound",
    "integrate",
    "reversibility_residual",
    "SCHEMES",
]

SCHEMES = ("nsfd", "euler", "rk4", "trapezoidal")

# Cap applied by step_bound when nothing limits the step size (no
# bilinear terms and no linear part, or an unbounded domain box).
DEFAULT_H_MAX = 1e6


class DominanceError(LinAlgError):
    """A solve matrix lost strict column diagonal dominance.

    Raised instead of silently solving a possibly near-singular system;
    it signals a step size at or above the safe bound for this state.
    """


class NewtonDivergenceError(RuntimeError):
    """The damped Newton iteration did not meet its tolerance."""


@dataclass(frozen=True)
class NewtonOptions:
    """Controls for the implicit solve.

    tol is relative (scaled by 1 + ||y||_inf).  Damping starts at a full
    step and halves while the residual grows, down to min_damping.
    """

    tol: float = 1e-12
    max_iter: int = 50
    min_damping: float = 1.0 / 64.0

    def __post_init__(self) -> None:
        if not (self.tol > 0.0):
            raise SpecError("tol must be positive")
        if self.max_iter < 1:
            raise SpecError("max_iter must be at least 1")
        if not (0.0 < self.min_damping <= 1.0):
            raise SpecError("min_damping must lie in (0, 1]")


@dataclass(frozen=True)
class StepBoundReport:
    """Safe step bound and the per-column data that produced it.

    per_column holds (column index, U_j) where U_j bounds the absolute
    column sum of the step matrix S(x) over the whole domain box; the
    bound is h_bar = safety / max_j U_j.  capped is true when that
    quotient is unbounded and the configured cap was applied instead.
    """

    h_bar: float
    per_column: tuple[tuple[int, float], ...]
    limiting_column: int
    capped: bool

    def as_dict(self) -> dict:
        return {
            "h_bar": self.h_bar,
            "per_column": [{"column": j, "u": u} for j, u in self.per_column],
            "limiting_column": self.limiting_column,
            "capped": self.capped,
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Discrete orbit with uniform spacing h, produced by one scheme."""

    t0: float
    h: float
    states: np.ndarray
    scheme: str

    def __post_init__(self) -> None:
        states = np.array(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 1:
            raise SpecError(f"states must be a nonempty (steps+1, n) array, got shape {states.shape}")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        if self.scheme not in SCHEMES:
            raise SpecError(f"unknown scheme {self.scheme!r} (choose from {', '.join(SCHEMES)})")

    @cached_property
    def times(self) -> np.ndarray:
        out = self.t0 + self.h * np.arange(self.states.shape[0])
        out.setflags(write=False)
        return out

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def step_matrix(model: MassActionModel, x) -> np.ndarray:
    """Step matrix ``S(x) = (P(x) + Q(x) + L) / 2``; the solves use I -+ h S(x)."""
    return 0.5 * f_jacobian(model, x)


def _check_h(h: float) -> float:
    h = float(h)
    if not np.isfinite(h) or h <= 0.0:
        raise SpecError(f"step size must be positive and finite, got {h}")
    return h


def _require_dominance(m: np.ndarray, what: str) -> None:
    mag = np.abs(m)
    diag = np.diag(mag).copy()
    off = mag.copy()
    np.fill_diagonal(off, 0.0)
    if not np.all(diag > off.sum(axis=0)):
        col = int(np.argmin(diag - off.sum(axis=0)))
        raise DominanceError(
            f"{what} solve matrix lost strict column dominance in column {col}; "
            "reduce h below the safe step bound for this state"
        )


def step_forward(model: MassActionModel, x, h: float) -> np.ndarray:
    """One reversible step of size h from x.

    Solves ``(I - h S(x)) x' = (I + (h/2) L) x + h b``.  Fixed points of
    this map are exactly the zeros of the vector field.

    Raises
    ------
    DominanceError
        When the solve matrix is not strictly column diagonally dominant
        at this state, which signals h at or above the safe regime.
    """
    x = _check_state(model, x)
    h = _check_h(h)
    m = np.eye(model.n) - h * step_matrix(model, x)
    _require_dominance(m, "forward")
    rhs = x + (0.5 * h) * (model.linear @ x) + h * model.constant
    return lu_solve(m, rhs)


def step_backward(model: MassActionModel, x, h: float) -> np.ndarray:
    """Inverse of :func:`step_forward`: the step of size -h from x.

    Solves ``(I + h S(x)) y = (I - (h/2) L) x - h b``; composing it with
    the forward step returns the starting state up to round-off.
    """
    x = _check_state(model, x)
    h = _check_h(h)
    m = np.eye(model.n) + h * step_matrix(model, x)
    _require_dominance(m, "backward")
    rhs = x - (0.5 * h) * (model.linear @ x) - h * model.constant
    return lu_solve(m, rhs)


def _batch_states(model: MassActionModel, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != model.n:
        raise SpecError(f"expected a (m, {model.n}) state batch, got shape {xs.shape}")
    return xs


def _batch_h(h, m: int) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.ndim == 0:
        h = np.full(m, float(h))
    if h.shape != (m,):
        raise SpecError(f"step sizes must be scalar or shape ({m},), got {h.shape}")
    if not np.all(np.isfinite(h)) or np.any(h <= 0.0):
        raise SpecError("step sizes must be positive and finite")
    return h


def _step_matrix_batch(model: MassActionModel, xs: np.ndarray) -> np.ndarray:
    m = xs.shape[0]
    s = np.broadcast_to(0.5 * model.linear, (m, model.n, model.n)).copy()
    ti, tj, tk, tc = model._term_arrays
    for t in range(ti.size):
        half_c = 0.5 * tc[t]
        s[:, ti[t], tk[t]] += half_c * xs[:, tj[t]]
        s[:, ti[t], tj[t]] += half_c * xs[:, tk[t]]
    return s


def _require_dominance_batch(mats: np.ndarray, what: str) -> None:
    mag = np.abs(mats)
    diag = np.diagonal(mag, axis1=1, axis2=2)
    off = mag.sum(axis=1) - diag
    ok = np.all(diag > off, axis=1)
    if not np.all(ok):
        first = int(np.argmin(ok))
        raise DominanceError(
            f"{what} solve matrix lost strict column dominance for batch state {first}; "
            "reduce h below the safe step bound"
        )


def step_forward_batch(model: MassActionModel, xs, h) -> np.ndarray:
    """Vectorized :func:`step_forward` over rows of ``xs``.

    ``h`` may be a scalar or one step size per row.  Used by the audits,
    where a million scalar solves would dominate the runtime.
    """
    xs = _batch_states(model, xs)
    hv = _batch_h(h, xs.shape[0])
    s = _step_matrix_batch(model, xs)
    mats = np.eye(model.n) - hv[:, None, None] * s
    _require_dominance_batch(mats, "forward")
    rhs = xs + (0.5 * hv)[:, None] * (xs @ model.linear.T) + hv[:, None] * model.constant
    return lu_solve_batch(mats, rhs)


def step_backward_batch(model: MassActionModel, xs, h) -> np.ndarray:
    """Vectorized :func:`step_backward` over rows of ``xs``."""
    xs = _batch_states(model, xs)
    hv = _batch_h(h, xs.shape[0])
    s = _step_matrix_batch(model, xs)
    mats = np.eye(model.n) + hv[:, None, None] * s
    _require_dominance_batch(mats, "backward")
    rhs = xs - (0.5 * hv)[:, None] * (xs @ model.linear.T) - hv[:, None] * model.constant
    return lu_solve_batch(mats, rhs)


def _norm_inf(v: np.ndarray) -> float:
    return float(np.abs(v).max()) if v.size else 0.0


def step_implicit_general(
    sys: GeneralSplitSystem,
    x,
    h: float,
    opts: NewtonOptions = NewtonOptions(),
) -> np.ndarray:
    """One step of the endpoint-averaged rule for a general split system.

    Finds y with ``y = x + (h/2) (phi(y, x) + phi(x, y))`` by damped
    Newton iteration, starting from the explicit guess ``x + h phi(x, x)``.
    The Newton matrix is ``I - (h/2) (dphi_dy(y, x) + dphi_dz(x, y))``;
    missing slot Jacobians are replaced by central finite differences.

    Raises
    ------
    NewtonDivergenceError
        If the residual does not reach ``tol * (1 + ||y||_inf)`` within
        max_iter iterations, or the Newton matrix becomes singular.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise SpecError(f"state must have shape ({sys.n},), got {x.shape}")
    h = _check_h(h)
    phi = sys.phi

    def residual(y: np.ndarray) -> np.ndarray:
        return y - x - (0.5 * h) * (
            np.asarray(phi(y, x), dtype=float) + np.asarray(phi(x, y), dtype=float)
        )

    if sys.dphi_dy is not None:
        dphi_dy = sys.dphi_dy
    else:
        dphi_dy = lambda y, z: fd_jacobian(lambda v: np.asarray(phi(v, z), dtype=float), y)
    if sys.dphi_dz is not None:
        dphi_dz = sys.dphi_dz
    else:
        dphi_dz = lambda y, z: fd_jacobian(lambda v: np.asarray(phi(z, v), dtype=float), y)

    y = x + h * np.asarray(phi(x, x), dtype=float)
    r = residual(y)
    rnorm = _norm_inf(r)
    eye = np.eye(sys.n)
    for _ in range(opts.max_iter):
        if rnorm <= opts.tol * (1.0 + _norm_inf(y)):
            return y
        jac = eye - (0.5 * h) * (
            np.asarray(dphi_dy(y, x), dtype=float) + np.asarray(dphi_dz(x, y), dtype=float)
        )
        try:
            delta = lu_solve(jac, -r)
        except LinAlgError as exc:
            raise NewtonDivergenceError(f"singular Newton matrix: {exc}") from exc
        alpha = 1.0
        while True:
            y_trial = y + alpha * delta
            r_trial = residual(y_trial)
            rnorm_trial = _norm_inf(r_trial)
            if rnorm_trial < rnorm or alpha <= opts.min_damping:
                break
            alpha *= 0.5
        y, r, rnorm = y_trial, r_trial, rnorm_trial
    if rnorm <= opts.tol * (1.0 + _norm_inf(y)):
        return y
    raise NewtonDivergenceError(
        f"no convergence after {opts.max_iter} iterations (residual {rnorm:.3e})"
    )


def step_bound(
    model: MassActionModel,
    safety: float = 1.0,
    h_max: float = DEFAULT_H_MAX,
) -> StepBoundReport:
    """Safe step bound from interval bounds on the step-matrix columns.

    Every entry of S(x) is affine in x, so its range over the domain box
    [box_lower, box_upper] is an exact interval; U_j sums the entrywise
    suprema of |S(x)[i, j]| and therefore dominates the absolute column
    sum for every x in the box.  For h < h_bar = safety / max_j U_j both
    I - h S(x) and I + h S(x) are strictly column diagonally dominant:
    the diagonal of I -+ h S is at least 1 - h |S_jj| in magnitude, so
    strict dominance of both matrices is exactly h * (column sum) < 1.

    When the quotient is unbounded (zero U, or bilinear terms over an
    unbounded box) the report is capped at h_max.
    """
    if not (np.isfinite(safety) and 0.0 < safety <= 1.0):
        raise SpecError("safety must lie in (0, 1]")
    if not (np.isfinite(h_max) and h_max > 0.0):
        raise SpecError("h_max must be positive and finite")
    lo_x = model.domain.box_lower
    hi_x = model.domain.box_upper
    s_lo = 0.5 * np.array(model.linear)
    s_hi = 0.5 * np.array(model.linear)
    for t in model.bilinear:
        for col, var in ((t.k, t.j), (t.j, t.k)):
            g = 0.5 * t.c
            a = g * lo_x[var]
            b = g * hi_x[var]
            s_lo[t.i, col] += min(a, b)
            s_hi[t.i, col] += max(a, b)
    sup_abs = np.maximum(np.abs(s_lo), np.abs(s_hi))
    u = sup_abs.sum(axis=0)
    per_column = tuple((j, float(u[j])) for j in range(model.n))
    limiting = int(np.argmax(np.where(np.isnan(u), np.inf, u)))
    u_max = float(u[limiting])
    if not np.isfinite(u_max) or u_max == 0.0 or safety / u_max > h_max:
        return StepBoundReport(h_bar=h_max, per_column=per_column, limiting_column=limiting, capped=True)
    return StepBoundReport(
        h_bar=safety / u_max, per_column=per_column, limiting_column=limiting, capped=False
    )


def _rk4_step(model: MassActionModel, x: np.ndarray, h: float) -> np.ndarray:
    k1 = eval_f(model, x)
    k2 = eval_f(model, x + (0.5 * h) * k1)
    k3 = eval_f(model, x + (0.5 * h) * k2)
    k4 = eval_f(model, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _trapezoidal_system(model: MassActionModel) -> GeneralSplitSystem:
    # phi(y, z) = f(y) averages to (f(x') + f(x)) / 2, the classical
    # endpoint-averaged rule; kept as a comparison scheme.
    zero = np.zeros((model.n, model.n))
    return GeneralSplitSystem(
        n=model.n,
        phi=lambda y, z: eval_f(model, y),
        dphi_dy=lambda y, z: f_jacobian(model, y),
        dphi_dz=lambda y, z: zero,
        domain=model.domain,
    )


def integrate(
    model: MassActionModel,
    x0,
    h: float,
    steps: int,
    scheme: str = "nsfd",
    t0: float = 0.0,
) -> Trajectory:
    """Iterate one of the step maps from x0 for a fixed number of steps.

    Emits a RuntimeWarning when the reversible scheme is asked to run at
    h at or above its safe bound.  Numerical failures are re-raised with
    the step index prepended.
    """
    x = _check_state(model, x0)
    h = _check_h(h)
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 0:
        raise SpecError(f"steps must be a nonnegative integer, got {steps!r}")
    if scheme not in SCHEMES:
        raise SpecError(f"unknown scheme {scheme!r} (choose from {', '.join(SCHEMES)})")
    if scheme == "nsfd":
        bound = step_bound(model)
        if not bound.capped and h >= bound.h_bar:
            warnings.warn(
                f"step size h={h:g} is not below the safe bound h_bar={bound.h_bar:g}; "
                "dominance of the solve matrices is no longer guaranteed",
                RuntimeWarning,
                stacklevel=2,
            )
    states = np.empty((steps + 1, model.n))
    states[0] = x
    trap = _trapezoidal_system(model) if scheme == "trapezoidal" else None
    for k in range(steps):
        try:
            if scheme == "nsfd":
                x = step_forward(model, x, h)
            elif scheme == "euler":
                x = x + h * eval_f(model, x)
            elif scheme == "rk4":
                x = _rk4_step(model, x, h)
            else:
                x = step_implicit_general(trap, x, h)
        except (LinAlgError, NewtonDivergenceError) as exc:
            raise type(exc)(f"step {k}: {exc}") from exc
        states[k + 1] = x
    return Trajectory(t0=t0, h=h, states=states, scheme=scheme)


def reversibility_residual(model: MassActionModel, x, h: float) -> float:
    """``||F(-h, F(h, x)) - x||_inf``: zero for an exactly reversible map."""
    x = _check_state(model, x)
    forward = step_forward(model, x, h)
    back = step_backward(model, forward, h)
    return _norm_inf(back - x)
