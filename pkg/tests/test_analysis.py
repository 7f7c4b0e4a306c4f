"""Equilibria, eigenvalue transfer, stability rows, convergence order."""

import cmath

import numpy as np
import pytest

from nsfd.analysis import (
    EquilibriumResult,
    OrderEstimate,
    StabilityRow,
    find_equilibria,
    mu_of_lambda,
    observed_order,
    rk4_reference,
    stability_report,
)
from nsfd.linalg import LinAlgError
from nsfd.model import SpecError
from nsfd.models import host_vector_dfe

MU_ATOL = 1e-12
MU_MEASURED_ATOL = 1e-6
ORDER_BAND_TWO = (1.9, 2.1)
ORDER_BAND_ONE = (0.9, 1.1)


def test_mu_hand_values():
    assert mu_of_lambda(-1.0, 0.1) == pytest.approx(0.9047619047619047, abs=MU_ATOL)
    assert mu_of_lambda(1.0, 0.1) == pytest.approx(1.105263157894737, abs=MU_ATOL)
    assert mu_of_lambda(0.0, 0.7) == 1.0


def test_mu_rotates_imaginary_axis_to_unit_circle():
    # (1 + i)/(1 - i) = i: purely imaginary rates land on the circle
    got = mu_of_lambda(1j, 2.0)
    assert abs(got - 1j) <= 1e-15
    for im in (0.3, -2.0, 11.0):
        assert abs(abs(mu_of_lambda(1j * im, 0.5)) - 1.0) <= 1e-13


def test_mu_pole_raises():
    with pytest.raises(LinAlgError):
        mu_of_lambda(2.0 / 0.1, 0.1)
    with pytest.raises(LinAlgError):
        mu_of_lambda(20.0 * (1.0 + 5e-15), 0.1)


def test_mu_rejects_bad_step():
    with pytest.raises(SpecError):
        mu_of_lambda(-1.0, -0.1)
    with pytest.raises(SpecError):
        mu_of_lambda(-1.0, float("nan"))


def test_mu_preserves_stability_classification(rng):
    # the rational map sends the open left half-plane exactly inside the
    # unit circle, for every admissible step size
    for _ in range(10000):
        lam = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        h = rng.uniform(1e-3, 2.0)
        if abs(lam.real) < 1e-12 or abs(lam - 2.0 / h) < 1e-6:
            continue
        mu = mu_of_lambda(lam, h)
        assert (lam.real < 0) == (abs(mu) < 1.0)


def test_find_equilibria_logistic(logistic):
    seeds = [np.array([0.2]), np.array([0.8]), np.array([0.9])]
    results = find_equilibria(logistic, seeds)
    assert all(isinstance(r, EquilibriumResult) for r in results)
    converged = [r for r in results if r.status == "converged"]
    points = sorted(float(r.point[0]) for r in converged)
    assert len(points) == 2  # the third seed lands on a duplicate
    assert points[0] == pytest.approx(0.0, abs=1e-10)
    assert points[1] == pytest.approx(1.0, abs=1e-10)
    assert {r.seed_index for r in converged} == {0, 1}
    for r in converged:
        assert r.residual <= 1e-10


def test_find_equilibria_host_vector(host_vector):
    seeds = [np.array([9.0, 0.5, 9.0, 0.5, 0.5])]
    results = find_equilibria(host_vector, seeds)
    assert results[0].status == "converged"
    assert np.allclose(results[0].point, host_vector_dfe(), rtol=0, atol=1e-8)


def test_find_equilibria_singular_jacobian(si):
    # the contact model's equilibrium set is a continuum; the Jacobian is
    # singular there and the probe must say so instead of pretending
    results = find_equilibria(si, [np.array([0.5, 0.3])])
    assert results[0].status == "singular"


def test_find_equilibria_no_convergence(logistic):
    results = find_equilibria(logistic, [np.array([50.0])], max_iter=1)
    assert results[0].status == "no-convergence"


def test_stability_logistic_interior_equilibrium(logistic):
    rows = stability_report(logistic, np.array([1.0]), 0.1)
    assert len(rows) == 1
    row = rows[0]
    assert isinstance(row, StabilityRow)
    assert row.lam == pytest.approx(-1.0, abs=1e-12)
    assert row.mu_predicted == pytest.approx(0.95 / 1.05, abs=MU_ATOL)
    assert abs(row.mu_measured - row.mu_predicted) <= MU_MEASURED_ATOL
    assert row.continuous_stable and row.discrete_stable and row.consistent
    assert not row.ambiguous
    assert not row.near_nonhyperbolic


def test_stability_logistic_origin(logistic):
    rows = stability_report(logistic, np.array([0.0]), 0.1)
    row = rows[0]
    assert row.lam == pytest.approx(1.0, abs=1e-12)
    assert row.mu_predicted == pytest.approx(1.05 / 0.95, abs=MU_ATOL)
    assert not row.continuous_stable and not row.discrete_stable
    assert row.consistent


def test_stability_host_vector_dfe(host_vector):
    rows = stability_report(host_vector, host_vector_dfe(), 0.5)
    assert len(rows) == 5
    lams = [row.lam for row in rows]
    expected = sorted(
        [-0.6405124837953327, -0.2, -0.15, -0.1, 0.1405124837953327],
        key=lambda v: v,
    )
    for got, want in zip(lams, expected):
        assert got.real == pytest.approx(want, abs=1e-9)
        assert abs(got.imag) <= 1e-9
    for row in rows:
        assert abs(row.mu_predicted - row.mu_measured) <= MU_MEASURED_ATOL * (
            1.0 + abs(row.mu_predicted)
        )
        assert row.consistent
        assert not row.ambiguous
        assert row.continuous_stable == (row.lam.real < 0)
    # exactly one unstable direction
    assert sum(not row.discrete_stable for row in rows) == 1


def test_stability_rows_are_sorted_by_real_part(host_vector):
    rows = stability_report(host_vector, host_vector_dfe(), 0.5)
    reals = [row.lam.real for row in rows]
    assert reals == sorted(reals)


def test_stability_flags_zero_eigenvalue(si):
    # (1, 0) is an equilibrium with a zero eigenvalue along the equilibrium
    # continuum; the row is marked instead of silently classified
    rows = stability_report(si, np.array([1.0, 0.0]), 0.5)
    assert len(rows) == 2
    assert rows[0].near_nonhyperbolic
    assert rows[0].mu_predicted == pytest.approx(1.0, abs=MU_ATOL)
    assert rows[1].lam == pytest.approx(1.0, abs=1e-12)
    assert rows[1].mu_predicted == pytest.approx(5.0 / 3.0, abs=MU_ATOL)
    assert not rows[1].near_nonhyperbolic


def test_stability_rejects_non_equilibrium(logistic):
    with pytest.raises(SpecError):
        stability_report(logistic, np.array([0.4]), 0.1)


def test_rk4_reference_logistic_closed_form(logistic):
    traj = rk4_reference(logistic, np.array([0.5]), 1e-3, 1.0)
    exact = 1.0 / (1.0 + np.exp(-1.0))
    assert abs(traj.final[0] - exact) <= 1e-10
    assert traj.scheme == "rk4"


def test_rk4_reference_rounds_horizon(logistic):
    traj = rk4_reference(logistic, np.array([0.5]), 0.3, 1.0)
    assert traj.states.shape == (4, 1)
    assert traj.times[-1] == pytest.approx(0.9, abs=1e-12)


def test_observed_order_nsfd_is_second_order(logistic):
    est = observed_order(logistic, np.array([0.5]), T=1.0, h=0.1)
    assert isinstance(est, OrderEstimate)
    assert est.defined
    assert est.scheme == "nsfd"
    assert ORDER_BAND_TWO[0] <= est.p_hat <= ORDER_BAND_TWO[1]
    assert est.error_h > est.error_h2 > 0.0


def test_observed_order_euler_is_first_order(logistic):
    est = observed_order(logistic, np.array([0.5]), T=1.0, h=0.1, scheme="euler")
    assert est.defined
    assert ORDER_BAND_ONE[0] <= est.p_hat <= ORDER_BAND_ONE[1]


def test_observed_order_rounds_horizon_to_whole_steps(logistic):
    est = observed_order(logistic, np.array([0.5]), T=1.0, h=0.3)
    assert est.t_effective == pytest.approx(0.9, abs=1e-12)
    assert est.h == 0.3


def test_observed_order_degenerate_at_equilibrium(logistic):
    est = observed_order(logistic, np.array([1.0]), T=1.0, h=0.1)
    assert not est.defined
    assert est.p_hat != est.p_hat  # NaN


def test_observed_order_validates_inputs(logistic):
    with pytest.raises(SpecError):
        observed_order(logistic, np.array([0.5]), T=0.0, h=0.1)
    with pytest.raises(SpecError):
        observed_order(logistic, np.array([0.5]), T=1.0, h=0.0)
    with pytest.raises(SpecError):
        observed_order(logistic, np.array([0.5]), T=1.0, h=0.1, scheme="leapfrog")
