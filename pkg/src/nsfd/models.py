"""Built-in example systems.

Three compact mass-action models used throughout the tests and the CLI:

  logistic     x' = r x (1 - x/K)                       on [0, K]
  si           S' = -beta S I,  I' = beta S I           on {S, I >= 0, S + I <= N}
  host-vector  a five-compartment contact model between a host population
               (S, I, R) and a vector population (S_v, I_v):

                 S_v' = Lambda_v - p S_v I - mu_v S_v
                 I_v' = p S_v I - mu_v I_v
                 S'   = Lambda - q S I_v - mu S + gamma R
                 I'   = q S I_v - (mu + alpha) I
                 R'   = alpha I - (mu + gamma) R

               on {x >= 0, S_v + I_v <= M_v, S + I + R <= M}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BilinearTerm, Constraint, Domain, MassActionModel, SpecError

__all__ = [
    "HostVectorParameters",
    "make_logistic",
    "make_si",
    "make_host_vector",
    "host_vector_dfe",
    "make_builtin",
    "BUILTIN_NAMES",
]


def _require_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise SpecError(f"parameter {name} must be positive, got {value}")
    return value


def make_logistic(r: float = 1.0, K: float = 1.0) -> MassActionModel:
    """Logistic growth x' = r x - (r/K) x^2 on the interval [0, K]."""
    r = _require_positive(r, "r")
    K = _require_positive(K, "K")
    return MassActionModel(
        n=1,
        bilinear=(BilinearTerm(0, 0, 0, -r / K),),
        linear=[[r]],
        constant=[0.0],
        domain=Domain(nonnegative=(True,), constraints=(Constraint((1.0,), K),)),
        labels=("x",),
        name="logistic",
    )


def make_si(beta: float = 1.0, N: float = 1.0) -> MassActionModel:
    """Two-compartment contact model S' = -beta S I, I' = beta S I.

    The total S + I is a linear first integral: the two bilinear terms
    cancel componentwise, the linear and constant parts are zero.
    """
    beta = _require_positive(beta, "beta")
    N = _require_positive(N, "N")
    return MassActionModel(
        n=2,
        bilinear=(BilinearTerm(0, 0, 1, -beta), BilinearTerm(1, 0, 1, beta)),
        linear=np.zeros((2, 2)),
        constant=np.zeros(2),
        domain=Domain(nonnegative=(True, True), constraints=(Constraint((1.0, 1.0), N),)),
        labels=("S", "I"),
        name="si",
    )


@dataclass(frozen=True)
class HostVectorParameters:
    """Positive rates for the host-vector model.

    Recruitment Lambda_v, Lambda (amount/time), mortalities mu_v, mu,
    transmission p, q (1/(amount*time)), progression alpha and immunity
    loss gamma (1/time), and population caps M_v, M (amount).  The caps
    must dominate the carrying capacities: M_v >= Lambda_v/mu_v and
    M >= Lambda/mu, otherwise the stated domain is not invariant.
    """

    Lambda_v: float = 2.0
    mu_v: float = 0.2
    p: float = 0.05
    Lambda: float = 1.0
    mu: float = 0.1
    q: float = 0.03
    alpha: float = 0.2
    gamma: float = 0.05
    M_v: float = 10.0
    M: float = 10.0

    def __post_init__(self) -> None:
        for name in ("Lambda_v", "mu_v", "p", "Lambda", "mu", "q", "alpha", "gamma", "M_v", "M"):
            object.__setattr__(self, name, _require_positive(getattr(self, name), name))
        if self.M_v < self.Lambda_v / self.mu_v:
            raise SpecError(
                f"M_v={self.M_v} is below the vector carrying capacity {self.Lambda_v / self.mu_v}"
            )
        if self.M < self.Lambda / self.mu:
            raise SpecError(f"M={self.M} is below the host carrying capacity {self.Lambda / self.mu}")


def make_host_vector(params: HostVectorParameters | None = None) -> MassActionModel:
    """Five-compartment host-vector model, state order (S_v, I_v, S, I, R).

    The bilinear slots are assigned so that the first-slot matrix P
    carries the infective factors (I, I_v) and the second-slot matrix Q
    carries the susceptible factors (S_v, S).
    """
    par = params if params is not None else HostVectorParameters()
    p, q = par.p, par.q
    linear = np.zeros((5, 5))
    linear[0, 0] = -par.mu_v
    linear[1, 1] = -par.mu_v
    linear[2, 2] = -par.mu
    linear[2, 4] = par.gamma
    linear[3, 3] = -(par.mu + par.alpha)
    linear[4, 3] = par.alpha
    linear[4, 4] = -(par.mu + par.gamma)
    return MassActionModel(
        n=5,
        bilinear=(
            BilinearTerm(0, 3, 0, -p),
            BilinearTerm(1, 3, 0, p),
            BilinearTerm(2, 1, 2, -q),
            BilinearTerm(3, 1, 2, q),
        ),
        linear=linear,
        constant=[par.Lambda_v, 0.0, par.Lambda, 0.0, 0.0],
        domain=Domain(
            nonnegative=(True,) * 5,
            constraints=(
                Constraint((1.0, 1.0, 0.0, 0.0, 0.0), par.M_v),
                Constraint((0.0, 0.0, 1.0, 1.0, 1.0), par.M),
            ),
        ),
        labels=("S_v", "I_v", "S", "I", "R"),
        name="host-vector",
    )


def host_vector_dfe(params: HostVectorParameters | None = None) -> np.ndarray:
    """Disease-free equilibrium (Lambda_v/mu_v, 0, Lambda/mu, 0, 0)."""
    par = params if params is not None else HostVectorParameters()
    return np.array([par.Lambda_v / par.mu_v, 0.0, par.Lambda / par.mu, 0.0, 0.0])


BUILTIN_NAMES = ("logistic", "si", "host-vector")


def make_builtin(name: str, **params: float) -> MassActionModel:
    """Construct a built-in model by name with keyword parameter overrides."""
    try:
        if name == "logistic":
            return make_logistic(**params)
        if name == "si":
            return make_si(**params)
        if name == "host-vector":
            return make_host_vector(HostVectorParameters(**params))
    except TypeError as exc:
        raise SpecError(f"bad parameter for builtin {name!r}: {exc}") from exc
    raise SpecError(f"unknown builtin model {name!r} (choose from {', '.join(BUILTIN_NAMES)})")
