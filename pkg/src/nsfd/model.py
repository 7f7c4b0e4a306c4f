"""Mass-action systems in two-slot split form.

A model is the vector field ``f(x) = B(x, x) + L x + b`` where the
bilinear part B is stored as sparse coefficient triplets.  The split
evaluator ``phi(y, z) = B(y, z) + (L/2)(y + z) + b`` satisfies
``phi(x, x) = f(x)`` and is what the reversible integrator consumes: each
bilinear product takes one factor from the old state and one from the new
state, which is what makes the implicit update a linear solve.

The two matrix views of B,

    P(y)[i, k] = sum over terms (i, j, k, c) of c * y[j]
    Q(z)[i, j] = sum over terms (i, j, k, c) of c * z[k]

satisfy ``P(y) @ z = Q(z) @ y = B(y, z)``, and the field Jacobian is
``P(x) + Q(x) + L``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

__all__ = [
    "SpecError",
    "BilinearTerm",
    "Constraint",
    "Domain",
    "MassActionModel",
    "GeneralSplitSystem",
    "ValidationReport",
    "eval_f",
    "eval_phi",
    "assemble_P",
    "assemble_Q",
    "f_jacobian",
    "validate",
    "as_split_system",
    "model_to_dict",
    "model_from_dict",
    "dump_model",
    "load_model",
]

# Random-probe budget and pass threshold for the bilinear symmetry check
# P(y) @ z == Q(z) @ y in validate().
PQ_PROBES = 32
PQ_RTOL = 1e-13


class SpecError(ValueError):
    """Invalid model definition, parameters, or input document."""


def _finite_float(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{what} must be a real number, got {value!r}")
    out = float(value)
    if not np.isfinite(out):
        raise SpecError(f"{what} must be finite, got {out!r}")
    return out


@dataclass(frozen=True)
class BilinearTerm:
    """One coefficient of B: contributes ``c * y[j] * z[k]`` to component i."""

    i: int
    j: int
    k: int
    c: float

    def __post_init__(self) -> None:
        for name in ("i", "j", "k"):
            idx = getattr(self, name)
            if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
                raise SpecError(f"bilinear index {name}={idx!r} must be a nonnegative integer")
        c = _finite_float(self.c, "bilinear coefficient")
        if c == 0.0:
            raise SpecError("bilinear coefficient must be nonzero")
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class Constraint:
    """Half-space ``normal . x <= bound`` with outward normal ``normal``."""

    normal: tuple[float, ...]
    bound: float

    def __post_init__(self) -> None:
        normal = tuple(_finite_float(v, "constraint normal entry") for v in self.normal)
        if not normal or all(v == 0.0 for v in normal):
            raise SpecError("constraint normal must be nonzero")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "bound", _finite_float(self.bound, "constraint bound"))

    @property
    def normal_array(self) -> np.ndarray:
        out = np.array(self.normal, dtype=float)
        out.setflags(write=False)
        return out


@dataclass(frozen=True)
class Domain:
    """Convex state domain: per-component nonnegativity plus half-spaces.

    ``box_upper[i]`` is the tightest componentwise upper bound implied by
    the constraints: the minimum of ``bound / normal[i]`` over constraints
    whose normal is positive at i, nonnegative elsewhere, and whose other
    positively-weighted components are flagged nonnegative.  Infinite when
    no constraint caps the component that way.
    """

    nonnegative: tuple[bool, ...]
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self) -> None:
        flags = tuple(bool(v) for v in self.nonnegative)
        if not flags:
            raise SpecError("domain must have at least one component")
        object.__setattr__(self, "nonnegative", flags)
        cons = tuple(self.constraints)
        for con in cons:
            if len(con.normal) != len(flags):
                raise SpecError(
                    f"constraint normal length {len(con.normal)} does not match dimension {len(flags)}"
                )
        object.__setattr__(self, "constraints", cons)

    @property
    def n(self) -> int:
        return len(self.nonnegative)

    @cached_property
    def box_upper(self) -> np.ndarray:
        upper = np.full(self.n, np.inf)
        for con in self.constraints:
            u = con.normal_array
            for i in range(self.n):
                if u[i] <= 0.0:
                    continue
                others = [m for m in range(self.n) if m != i]
                if any(u[m] < 0.0 for m in others):
                    continue
                if any(u[m] > 0.0 and not self.nonnegative[m] for m in others):
                    continue
                upper[i] = min(upper[i], con.bound / u[i])
        upper.setflags(write=False)
        return upper

    @cached_property
    def box_lower(self) -> np.ndarray:
        lower = np.where(np.array(self.nonnegative), 0.0, -np.inf)
        lower.setflags(write=False)
        return lower

    @property
    def is_compact(self) -> bool:
        return all(self.nonnegative) and bool(np.all(np.isfinite(self.box_upper)))

    def margin(self, x) -> float:
        """Smallest slack of ``x`` against all facets (negative = outside)."""
        x = np.asarray(x, dtype=float)
        out = np.inf
        for i, flag in enumerate(self.nonnegative):
            if flag:
                out = min(out, float(x[i]))
        for con in self.constraints:
            out = min(out, con.bound - float(con.normal_array @ x))
        return out

    def contains(self, x, slack: float = 0.0) -> bool:
        return self.margin(x) >= -slack


def _readonly_array(values, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise SpecError(f"{what} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"{what} must have finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MassActionModel:
    """Immutable mass-action system ``f(x) = B(x, x) + L x + b``."""

    n: int
    bilinear: tuple[BilinearTerm, ...]
    linear: np.ndarray
    constant: np.ndarray
    domain: Domain
    labels: tuple[str, ...]
    name: str = "model"

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise SpecError(f"dimension must be a positive integer, got {self.n!r}")
        terms = tuple(self.bilinear)
        for t in terms:
            if not isinstance(t, BilinearTerm):
                raise SpecError("bilinear entries must be BilinearTerm instances")
            if max(t.i, t.j, t.k) >= self.n:
                raise SpecError(f"bilinear term {t} has an index outside dimension {self.n}")
        object.__setattr__(self, "bilinear", terms)
        object.__setattr__(self, "linear", _readonly_array(self.linear, (self.n, self.n), "linear part"))
        object.__setattr__(self, "constant", _readonly_array(self.constant, (self.n,), "constant part"))
        if not isinstance(self.domain, Domain):
            raise SpecError("domain must be a Domain instance")
        if self.domain.n != self.n:
            raise SpecError(f"domain dimension {self.domain.n} does not match model dimension {self.n}")
        labels = tuple(str(v) for v in self.labels)
        if len(labels) != self.n:
            raise SpecError(f"expected {self.n} labels, got {len(labels)}")
        for lab in labels:
            if not lab or ("," in lab) or ("\n" in lab):
                raise SpecError(f"label {lab!r} is empty or not CSV-safe")
        object.__setattr__(self, "labels", labels)
        if not isinstance(self.name, str) or not self.name:
            raise SpecError("model name must be a nonempty string")

    # Term index arrays for vectorized evaluation; cached because the
    # model is immutable.
    @cached_property
    def _term_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        ti = np.array([t.i for t in self.bilinear], dtype=np.intp)
        tj = np.array([t.j for t in self.bilinear], dtype=np.intp)
        tk = np.array([t.k for t in self.bilinear], dtype=np.intp)
        tc = np.array([t.c for t in self.bilinear], dtype=float)
        return ti, tj, tk, tc


def _check_state(model: MassActionModel, x, what: str = "state") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (model.n,):
        raise SpecError(f"{what} must have shape ({model.n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"{what} must have finite entries")
    return arr


def eval_phi(model: MassActionModel, y, z) -> np.ndarray:
    """Split field ``phi(y, z) = B(y, z) + (L/2)(y + z) + b``.

    ``eval_phi(m, x, x)`` follows the same floating-point path as
    :func:`eval_f` (it is the definition of it), so the two agree exactly.
    """
    y = _check_state(model, y, "first argument")
    z = _check_state(model, z, "second argument")
    ti, tj, tk, tc = model._term_arrays
    out = np.zeros(model.n)
    if ti.size:
        np.add.at(out, ti, tc * y[tj] * z[tk])
    out += 0.5 * (model.linear @ (y + z))
    out += model.constant
    return out


def eval_f(model: MassActionModel, x) -> np.ndarray:
    """Vector field ``f(x) = B(x, x) + L x + b``, evaluated as ``phi(x, x)``."""
    return eval_phi(model, x, x)


def assemble_P(model: MassActionModel, y) -> np.ndarray:
    """First-slot matrix: ``P(y)[i, k] = sum c * y[j]`` over terms (i, j, k, c)."""
    y = _check_state(model, y)
    ti, tj, tk, tc = model._term_arrays
    out = np.zeros((model.n, model.n))
    if ti.size:
        np.add.at(out, (ti, tk), tc * y[tj])
    return out


def assemble_Q(model: MassActionModel, z) -> np.ndarray:
    """Second-slot matrix: ``Q(z)[i, j] = sum c * z[k]`` over terms (i, j, k, c)."""
    z = _check_state(model, z)
    ti, tj, tk, tc = model._term_arrays
    out = np.zeros((model.n, model.n))
    if ti.size:
        np.add.at(out, (ti, tj), tc * z[tk])
    return out


def f_jacobian(model: MassActionModel, x) -> np.ndarray:
    """Analytic field Jacobian ``P(x) + Q(x) + L``."""
    return assemble_P(model, x) + assemble_Q(model, x) + model.linear


@dataclass(frozen=True)
class ValidationReport:
    """Structural health flags for a model; report-only, never raises."""

    metzler: bool
    constant_nonnegative: bool
    compact_domain: bool
    pq_identity: bool
    max_pq_deviation: float
    issues: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return self.metzler and self.constant_nonnegative and self.compact_domain and self.pq_identity


def validate(model: MassActionModel, probes: int = PQ_PROBES, seed: int = 0) -> ValidationReport:
    """Check sign structure, constant part, domain compactness, and B symmetry.

    The sign check is structural, not sampled: off-diagonal entries of L
    must be >= 0, and a bilinear term with c < 0 must touch its own target
    component (i == j or i == k) so that the negative contribution carries
    a factor x[i] and vanishes on the facet x[i] = 0.  Together with b >= 0
    this is what keeps the implicit update nonnegativity-preserving.
    """
    issues: list[str] = []

    off = np.array(model.linear)
    np.fill_diagonal(off, 0.0)
    metzler = bool(np.all(off >= 0.0))
    if not metzler:
        issues.append("linear part has a negative off-diagonal entry")
    for t in model.bilinear:
        if t.c < 0.0 and t.i != t.j and t.i != t.k:
            metzler = False
            issues.append(
                f"bilinear term (i={t.i}, j={t.j}, k={t.k}, c={t.c}) drains a component it does not touch"
            )

    constant_nonnegative = bool(np.all(model.constant >= 0.0))
    if not constant_nonnegative:
        issues.append("constant part has a negative entry")

    compact = model.domain.is_compact
    if not compact:
        issues.append("domain is not compact (missing nonnegativity or an upper bound)")

    rng = np.random.default_rng(seed)
    upper = np.where(np.isfinite(model.domain.box_upper), model.domain.box_upper, 1.0)
    max_dev = 0.0
    for _ in range(probes):
        y = rng.uniform(0.0, upper)
        z = rng.uniform(0.0, upper)
        py_z = assemble_P(model, y) @ z
        qz_y = assemble_Q(model, z) @ y
        scale = 1.0 + max(float(np.abs(py_z).max()), float(np.abs(qz_y).max()))
        max_dev = max(max_dev, float(np.abs(py_z - qz_y).max()) / scale)
    pq_identity = max_dev <= PQ_RTOL
    if not pq_identity:
        issues.append(f"P(y) z and Q(z) y disagree by relative {max_dev:.3e}")

    return ValidationReport(
        metzler=metzler,
        constant_nonnegative=constant_nonnegative,
        compact_domain=compact,
        pq_identity=pq_identity,
        max_pq_deviation=max_dev,
        issues=tuple(issues),
    )


@dataclass(frozen=True)
class GeneralSplitSystem:
    """A system given directly by its split evaluator ``phi(y, z)``.

    ``phi(x, x)`` must equal the vector field.  The slot Jacobians are
    optional; the implicit stepper falls back to finite differences when
    they are absent.
    """

    n: int
    phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dphi_dy: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    dphi_dz: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    domain: Domain | None = None


def as_split_system(model: MassActionModel) -> GeneralSplitSystem:
    """Wrap a mass-action model as a split system with analytic Jacobians."""
    half_l = 0.5 * np.array(model.linear)

    def dphi_dy(y: np.ndarray, z: np.ndarray) -> np.ndarray:
        return assemble_Q(model, z) + half_l

    def dphi_dz(y: np.ndarray, z: np.ndarray) -> np.ndarray:
        return assemble_P(model, y) + half_l

    return GeneralSplitSystem(
        n=model.n,
        phi=lambda y, z: eval_phi(model, y, z),
        dphi_dy=dphi_dy,
        dphi_dz=dphi_dz,
        domain=model.domain,
    )


# ---------------------------------------------------------------------------
# JSON document format
#
# {"name": str, "dim": int, "labels": [str], "bilinear": [{"i", "j", "k",
#  "c"}], "linear": [[...]] (row-major), "constant": [...], "domain":
#  {"nonnegative": [bool] or true, "constraints": [{"normal": [...],
#  "bound": ...}]}}.  Unknown keys are rejected at every level.
# ---------------------------------------------------------------------------

_TOP_KEYS = ("name", "dim", "labels", "bilinear", "linear", "constant", "domain")
_TERM_KEYS = ("i", "j", "k", "c")
_DOMAIN_KEYS = ("nonnegative", "constraints")
_CONSTRAINT_KEYS = ("normal", "bound")


def _require_keys(doc: dict, allowed: tuple[str, ...], required: tuple[str, ...], where: str) -> None:
    if not isinstance(doc, dict):
        raise SpecError(f"{where} must be an object, got {type(doc).__name__}")
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise SpecError(f"unknown keys in {where}: {', '.join(unknown)}")
    missing = sorted(set(required) - set(doc))
    if missing:
        raise SpecError(f"missing keys in {where}: {', '.join(missing)}")


def _int_field(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"{what} must be an integer, got {value!r}")
    return value


def model_from_dict(doc: dict) -> MassActionModel:
    """Build a model from a schema document, rejecting unknown keys."""
    _require_keys(doc, _TOP_KEYS, _TOP_KEYS, "model document")
    if not isinstance(doc["name"], str):
        raise SpecError("name must be a string")
    dim = _int_field(doc["dim"], "dim")
    if dim < 1:
        raise SpecError(f"dim must be positive, got {dim}")
    labels = doc["labels"]
    if not isinstance(labels, list) or not all(isinstance(v, str) for v in labels):
        raise SpecError("labels must be a list of strings")

    if not isinstance(doc["bilinear"], list):
        raise SpecError("bilinear must be a list")
    terms = []
    for idx, item in enumerate(doc["bilinear"]):
        _require_keys(item, _TERM_KEYS, _TERM_KEYS, f"bilinear[{idx}]")
        terms.append(
            BilinearTerm(
                i=_int_field(item["i"], f"bilinear[{idx}].i"),
                j=_int_field(item["j"], f"bilinear[{idx}].j"),
                k=_int_field(item["k"], f"bilinear[{idx}].k"),
                c=_finite_float(item["c"], f"bilinear[{idx}].c"),
            )
        )

    dom = doc["domain"]
    _require_keys(dom, _DOMAIN_KEYS, ("nonnegative",), "domain")
    nn = dom["nonnegative"]
    if nn is True:
        flags = tuple(True for _ in range(dim))
    elif isinstance(nn, list) and all(isinstance(v, bool) for v in nn):
        if len(nn) != dim:
            raise SpecError(f"nonnegative has {len(nn)} entries, expected {dim}")
        flags = tuple(nn)
    else:
        raise SpecError("nonnegative must be true or a list of booleans")
    constraints = []
    for idx, item in enumerate(dom.get("constraints", [])):
        _require_keys(item, _CONSTRAINT_KEYS, _CONSTRAINT_KEYS, f"constraints[{idx}]")
        if not isinstance(item["normal"], list):
            raise SpecError(f"constraints[{idx}].normal must be a list")
        constraints.append(
            Constraint(
                normal=tuple(_finite_float(v, f"constraints[{idx}].normal entry") for v in item["normal"]),
                bound=_finite_float(item["bound"], f"constraints[{idx}].bound"),
            )
        )

    return MassActionModel(
        n=dim,
        bilinear=tuple(terms),
        linear=doc["linear"],
        constant=doc["constant"],
        domain=Domain(nonnegative=flags, constraints=tuple(constraints)),
        labels=tuple(labels),
        name=doc["name"],
    )


def model_to_dict(model: MassActionModel) -> dict:
    """Canonical schema document for a model (floats survive a round trip)."""
    return {
        "name": model.name,
        "dim": model.n,
        "labels": list(model.labels),
        "bilinear": [{"i": t.i, "j": t.j, "k": t.k, "c": t.c} for t in model.bilinear],
        "linear": [[float(v) for v in row] for row in model.linear],
        "constant": [float(v) for v in model.constant],
        "domain": {
            "nonnegative": list(model.domain.nonnegative),
            "constraints": [
                {"normal": [float(v) for v in c.normal], "bound": c.bound}
                for c in model.domain.constraints
            ],
        },
    }


def dump_model(model: MassActionModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def load_model(path) -> MassActionModel:
    """Load a model document from a JSON file; all failures are SpecError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
