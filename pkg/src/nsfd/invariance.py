"""Domain-invariance checks on convex polyhedral state domains.

Two complementary views of "trajectories stay in D":

* tangent conditions, checked pointwise on the boundary: the field must
  not point outward (``n(x) . f(x) <= 0``), and the backward step must
  not land inward (``n(x) . (F(-h, x) - x) >= 0``), each with the
  facet's outward normal n(x);
* an empirical audit that integrates a batch of trajectories from
  random interior starts and records every exit from the domain.

Facets of D are the coordinate planes ``x_i = 0`` (outward normal -e_i)
and the active planes ``u . x = bound`` of the linear constraints
(outward normal u).  Corner points are checked against every facet that
is active there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrator import step_backward_batch, step_bound, step_forward_batch
from .model import Domain, MassActionModel, SpecError, eval_f

__all__ = [
    "Facet",
    "TangentReport",
    "AuditReport",
    "facets",
    "sample_boundary",
    "sample_interior",
    "continuous_tangent",
    "discrete_tangent",
    "invariance_audit",
    "AUDIT_SCHEMES",
]

AUDIT_SCHEMES = ("nsfd", "euler", "rk4")

# Membership slack: exits by round-off alone must not count.
MEMBERSHIP_SLACK = 1e-12
# A facet counts as active at x when its equality holds to this scale.
ACTIVITY_ATOL = 1e-12
# Default tangent tolerance factor (scaled by 1 + max |x|).
TANGENT_TOL = 1e-10
# Stored exit records are capped; exit_count still counts all of them.
MAX_STORED_EXITS = 100

_SAMPLE_ATTEMPTS = 1000


@dataclass(frozen=True)
class Facet:
    """One face of the domain polyhedron with its outward normal."""

    kind: str
    index: int
    normal: np.ndarray

    def __post_init__(self) -> None:
        if self.kind not in ("coordinate", "constraint"):
            raise SpecError(f"facet kind must be 'coordinate' or 'constraint', got {self.kind!r}")
        normal = np.array(self.normal, dtype=float)
        normal.setflags(write=False)
        object.__setattr__(self, "normal", normal)


@dataclass(frozen=True)
class TangentReport:
    """Boundary check summary.

    violations holds (point, facet index, value) triples; the facet
    index refers to the order of :func:`facets`.  For the continuous
    check a violation is a facet value above the tolerance and
    worst_value is the largest value (want <= 0); for the discrete
    check a violation is a sample whose backward image lies strictly
    inside the domain, listed once per active facet, and worst_value is
    the smallest facet value.
    """

    samples: int
    worst_value: float
    worst_point: np.ndarray
    violations: tuple[tuple[np.ndarray, int, float], ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class AuditReport:
    """Outcome of a batched trajectory audit.

    exits holds (trial, step, margin) for the first exit of each exited
    trial, capped at MAX_STORED_EXITS records; exit_count counts all of
    them.  worst_margin is the smallest domain margin seen anywhere,
    including trajectories that never left.
    """

    trials: int
    steps: int
    h: float
    scheme: str
    seed: int
    exit_count: int
    exits: tuple[tuple[int, int, float], ...]
    worst_margin: float
    worst_trial: int
    worst_step: int

    @property
    def passed(self) -> bool:
        return self.exit_count == 0

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "steps": self.steps,
            "h": self.h,
            "scheme": self.scheme,
            "seed": self.seed,
            "exit_count": self.exit_count,
            "exits": [
                {"trial": t, "step": s, "margin": m} for t, s, m in self.exits
            ],
            "worst_margin": self.worst_margin,
            "worst_trial": self.worst_trial,
            "worst_step": self.worst_step,
        }


def facets(domain: Domain) -> tuple[Facet, ...]:
    """All facets of the domain: coordinate planes first, then constraints."""
    out = []
    for i, flag in enumerate(domain.nonnegative):
        if flag:
            normal = np.zeros(domain.n)
            normal[i] = -1.0
            out.append(Facet(kind="coordinate", index=i, normal=normal))
    for c, con in enumerate(domain.constraints):
        out.append(Facet(kind="constraint", index=c, normal=con.normal_array))
    return tuple(out)


def _require_compact(domain: Domain, what: str) -> None:
    if not domain.is_compact:
        raise SpecError(f"{what} needs a compact domain (bounded box in every component)")


def sample_boundary(domain: Domain, count: int, seed: int) -> list[tuple[np.ndarray, int]]:
    """Draw `count` boundary points, each tagged with its assigned facet index.

    Facets are visited round-robin.  A coordinate-facet point is uniform
    over the slice ``x_i = 0`` of the domain; a constraint-facet point is
    uniform over the simplex ``u . x = bound`` (nonnegative normals only)
    intersected with the remaining constraints.  Deterministic in seed.
    """
    if count < 1:
        raise SpecError(f"count must be at least 1, got {count}")
    _require_compact(domain, "boundary sampling")
    fs = facets(domain)
    if not fs:
        raise SpecError("domain has no facets to sample")
    rng = np.random.default_rng(seed)
    lo = domain.box_lower
    span = domain.box_upper - lo
    out: list[tuple[np.ndarray, int]] = []
    for s in range(count):
        fi = s % len(fs)
        facet = fs[fi]
        for _ in range(_SAMPLE_ATTEMPTS):
            if facet.kind == "coordinate":
                x = lo + rng.random(domain.n) * span
                x[facet.index] = 0.0
                skip = None
            else:
                con = domain.constraints[facet.index]
                u = con.normal_array
                if np.any(u < 0.0):
                    raise SpecError(
                        "boundary sampling supports constraint normals with nonnegative entries only"
                    )
                pos = np.flatnonzero(u > 0.0)
                weights = rng.exponential(1.0, size=pos.size)
                total = weights.sum()
                if total == 0.0:
                    continue
                x = np.zeros(domain.n)
                x[pos] = con.bound * (weights / total) / u[pos]
                rest = np.flatnonzero(u == 0.0)
                x[rest] = lo[rest] + rng.random(rest.size) * span[rest]
                skip = facet.index
            ok = True
            for c, con in enumerate(domain.constraints):
                if c == skip:
                    continue
                if float(con.normal_array @ x) > con.bound:
                    ok = False
                    break
            if ok:
                out.append((x, fi))
                break
        else:
            raise SpecError(
                f"no feasible point found on facet {fi} after {_SAMPLE_ATTEMPTS} tries; "
                "the domain may be empty or degenerate"
            )
    return out


def sample_interior(domain: Domain, count: int, seed: int) -> np.ndarray:
    """Uniform rejection sample of `count` interior points, shape (count, n)."""
    if count < 1:
        raise SpecError(f"count must be at least 1, got {count}")
    _require_compact(domain, "interior sampling")
    rng = np.random.default_rng(seed)
    lo = domain.box_lower
    span = domain.box_upper - lo
    rows: list[np.ndarray] = []
    have = 0
    for _ in range(_SAMPLE_ATTEMPTS):
        draw = lo + rng.random((max(count, 64), domain.n)) * span
        keep = np.ones(draw.shape[0], dtype=bool)
        for con in domain.constraints:
            keep &= draw @ con.normal_array <= con.bound
        kept = draw[keep]
        if kept.size:
            rows.append(kept)
            have += kept.shape[0]
        if have >= count:
            return np.concatenate(rows)[:count]
    raise SpecError(
        f"could not draw {count} interior points after {_SAMPLE_ATTEMPTS} batches; "
        "the domain may be empty or degenerate"
    )


def _active_facets(domain: Domain, fs: tuple[Facet, ...], x: np.ndarray) -> list[int]:
    atol = ACTIVITY_ATOL * (1.0 + float(np.abs(x).max()))
    active = []
    for fi, facet in enumerate(fs):
        if facet.kind == "coordinate":
            if abs(float(x[facet.index])) <= atol:
                active.append(fi)
        else:
            con = domain.constraints[facet.index]
            if abs(float(con.normal_array @ x) - con.bound) <= atol:
                active.append(fi)
    return active


def _facet_values(
    domain: Domain,
    points: list[tuple[np.ndarray, int]],
    deltas: np.ndarray,
) -> tuple[list[tuple[float, int, int]], float]:
    # (normal . delta, point index, facet index) for every facet active
    # at each sample, plus the common 1 + |x| scale of the sample set.
    fs = facets(domain)
    values: list[tuple[float, int, int]] = []
    scale = 1.0
    for p, (x, _) in enumerate(points):
        scale = max(scale, 1.0 + float(np.abs(x).max()))
        for fi in _active_facets(domain, fs, x):
            values.append((float(fs[fi].normal @ deltas[p]), p, fi))
    return values, scale


def _freeze_point(x: np.ndarray) -> np.ndarray:
    out = x.copy()
    out.setflags(write=False)
    return out


def continuous_tangent(
    model: MassActionModel,
    domain: Domain | None = None,
    count: int = 256,
    seed: int = 0,
    tol: float | None = None,
) -> TangentReport:
    """Check ``n(x) . f(x) <= tol`` at sampled boundary points.

    A positive value means the field pushes outward across that facet.
    worst_value is the largest value seen; the check passes when no
    evaluation exceeds the tolerance.
    """
    dom = model.domain if domain is None else domain
    _require_compact(dom, "the continuous tangent check")
    points = sample_boundary(dom, count, seed)
    deltas = np.stack([eval_f(model, x) for x, _ in points])
    values, scale = _facet_values(dom, points, deltas)
    tolerance = TANGENT_TOL * scale if tol is None else float(tol)
    worst_value, worst_p, _ = max(values)
    violations = tuple(
        (_freeze_point(points[p][0]), fi, v) for v, p, fi in values if v > tolerance
    )
    return TangentReport(
        samples=len(points),
        worst_value=worst_value,
        worst_point=_freeze_point(points[worst_p][0]),
        violations=violations,
        tolerance=tolerance,
    )


def discrete_tangent(
    model: MassActionModel,
    domain: Domain | None = None,
    h: float = 1e-2,
    count: int = 256,
    seed: int = 0,
    tol: float | None = None,
) -> TangentReport:
    """Check that no boundary point has a strictly interior backward image.

    The forward map can carry an interior point onto or across a
    boundary point x only if x's backward image F(-h, x) is itself
    strictly inside the domain, so that is the violating event: a
    sample violates when margin(F(-h, x)) > tol.  A backward image
    that leaves the domain through some other facet threatens nothing;
    the backward flow is not expected to stay in the domain.

    Facet values ``n(x) . (F(-h, x) - x)`` are still evaluated at every
    active facet: worst_value is the smallest one, each violation entry
    carries its facet's value, and as h -> 0 the values recover
    ``-h n(x) . f(x)``.  Every reported violation has a negative value
    on each of its facets (strictly interior implies inward on all of
    them); the converse fails at finite h, where inward-pointing facet
    values are routine at points whose backward image exits elsewhere.
    The step size must lie strictly inside (0, h_bar) for the model, so
    the backward solves are meaningful everywhere on the boundary.
    """
    dom = model.domain if domain is None else domain
    _require_compact(dom, "the discrete tangent check")
    h = float(h)
    h_bar = step_bound(model).h_bar
    if not 0.0 < h < h_bar:
        raise SpecError(f"step size {h} is outside the checkable range (0, {h_bar})")
    points = sample_boundary(dom, count, seed)
    xs = np.stack([x for x, _ in points])
    ys = step_backward_batch(model, xs, h)
    deltas = ys - xs
    values, scale = _facet_values(dom, points, deltas)
    tolerance = TANGENT_TOL * scale if tol is None else float(tol)
    worst_value, worst_p, _ = min(values)
    fs = facets(dom)
    violations = []
    for p, (x, _) in enumerate(points):
        if dom.margin(ys[p]) > tolerance:
            for fi in _active_facets(dom, fs, x):
                violations.append((_freeze_point(x), fi, float(fs[fi].normal @ deltas[p])))
    return TangentReport(
        samples=len(points),
        worst_value=worst_value,
        worst_point=_freeze_point(points[worst_p][0]),
        violations=tuple(violations),
        tolerance=tolerance,
    )


def _eval_f_batch(model: MassActionModel, xs: np.ndarray) -> np.ndarray:
    out = xs @ model.linear.T + model.constant
    ti, tj, tk, tc = model._term_arrays
    for t in range(ti.size):
        out[:, ti[t]] += tc[t] * xs[:, tj[t]] * xs[:, tk[t]]
    return out


def _rk4_batch(model: MassActionModel, xs: np.ndarray, h: float) -> np.ndarray:
    k1 = _eval_f_batch(model, xs)
    k2 = _eval_f_batch(model, xs + (0.5 * h) * k1)
    k3 = _eval_f_batch(model, xs + (0.5 * h) * k2)
    k4 = _eval_f_batch(model, xs + h * k3)
    return xs + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _margins(domain: Domain, xs: np.ndarray) -> np.ndarray:
    m = np.full(xs.shape[0], np.inf)
    for i, flag in enumerate(domain.nonnegative):
        if flag:
            m = np.minimum(m, xs[:, i])
    for con in domain.constraints:
        m = np.minimum(m, con.bound - xs @ con.normal_array)
    return m


def invariance_audit(
    model: MassActionModel,
    domain: Domain | None = None,
    h: float = 1e-2,
    trials: int = 100,
    steps: int = 100,
    seed: int = 0,
    scheme: str = "nsfd",
) -> AuditReport:
    """Integrate `trials` random interior starts and count domain exits.

    Each trial records at most its first exit (step index and margin at
    that step); an exited trajectory is frozen afterwards.  Membership
    uses slack MEMBERSHIP_SLACK * (1 + |x|) so round-off alone cannot
    register as an exit; non-finite states count as exits.  The report
    is deterministic in (seed, trials, steps, h, scheme).
    """
    dom = model.domain if domain is None else domain
    _require_compact(dom, "the invariance audit")
    if scheme not in AUDIT_SCHEMES:
        raise SpecError(f"audit scheme must be one of {', '.join(AUDIT_SCHEMES)}, got {scheme!r}")
    if trials < 1 or steps < 0:
        raise SpecError("audit needs trials >= 1 and steps >= 0")
    xs = sample_interior(dom, trials, seed)
    alive = np.ones(trials, dtype=bool)
    exits: list[tuple[int, int, float]] = []
    exit_count = 0
    worst_margin = np.inf
    worst_trial = -1
    worst_step = -1

    def scan(step: int) -> None:
        nonlocal exit_count, worst_margin, worst_trial, worst_step
        live = np.flatnonzero(alive)
        if live.size == 0:
            return
        rows = xs[live]
        margins = _margins(dom, rows)
        finite = np.isfinite(rows).all(axis=1) & np.isfinite(margins)
        margins = np.where(finite, margins, -np.inf)
        j = int(np.argmin(margins))
        if margins[j] < worst_margin:
            worst_margin = float(margins[j])
            worst_trial = int(live[j])
            worst_step = step
        slack = MEMBERSHIP_SLACK * (1.0 + np.abs(np.where(np.isfinite(rows), rows, 0.0)).max(axis=1))
        out = margins < -slack
        for idx in np.flatnonzero(out):
            trial = int(live[idx])
            exit_count += 1
            if len(exits) < MAX_STORED_EXITS:
                exits.append((trial, step, float(margins[idx])))
            alive[trial] = False

    scan(0)
    for step in range(1, steps + 1):
        live = np.flatnonzero(alive)
        if live.size == 0:
            break
        if scheme == "nsfd":
            xs[live] = step_forward_batch(model, xs[live], h)
        elif scheme == "euler":
            xs[live] = xs[live] + h * _eval_f_batch(model, xs[live])
        else:
            xs[live] = _rk4_batch(model, xs[live], h)
        scan(step)
    return AuditReport(
        trials=trials,
        steps=steps,
        h=float(h),
        scheme=scheme,
        seed=seed,
        exit_count=exit_count,
        exits=tuple(exits),
        worst_margin=float(worst_margin),
        worst_trial=worst_trial,
        worst_step=worst_step,
    )
