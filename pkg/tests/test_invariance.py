"""Boundary sampling, tangent conditions, and long-run domain audits."""

import dataclasses

import numpy as np
import pytest

from nsfd.integrator import step_backward, step_bound
from nsfd.invariance import (
    AUDIT_SCHEMES,
    MAX_STORED_EXITS,
    MEMBERSHIP_SLACK,
    AuditReport,
    TangentReport,
    continuous_tangent,
    discrete_tangent,
    facets,
    invariance_audit,
    sample_boundary,
    sample_interior,
)
from nsfd.model import Constraint, Domain, SpecError
from nsfd.models import HostVectorParameters, make_host_vector

ACTIVITY_TOL = 1e-12
PLANE_ATOL = 1e-12


def _shrunk_vector_cap(bound=5.0):
    # tighten the vector-population cap below its carrying capacity so the
    # inflow pushes boundary points outward and both tangent checks must fail
    hv = make_host_vector()
    dom = hv.domain
    tight = dataclasses.replace(dom.constraints[0], bound=bound)
    return dataclasses.replace(
        hv, domain=dataclasses.replace(dom, constraints=(tight, dom.constraints[1]))
    )


def _wide_vector_cap():
    return make_host_vector(HostVectorParameters(M_v=12.0))


def test_facets_enumeration(host_vector, si):
    fs = facets(host_vector.domain)
    assert [(f.kind, f.index) for f in fs] == [
        ("coordinate", 0),
        ("coordinate", 1),
        ("coordinate", 2),
        ("coordinate", 3),
        ("coordinate", 4),
        ("constraint", 0),
        ("constraint", 1),
    ]
    # coordinate outer normals point to negative coordinates
    assert np.array_equal(fs[0].normal, [-1.0, 0.0, 0.0, 0.0, 0.0])
    assert np.array_equal(fs[5].normal, [1.0, 1.0, 0.0, 0.0, 0.0])
    assert len(facets(si.domain)) == 3


def test_facet_normals_are_read_only(host_vector):
    fs = facets(host_vector.domain)
    with pytest.raises(ValueError):
        fs[0].normal[0] = 7.0


def test_sample_boundary_hits_every_facet(host_vector):
    pts = sample_boundary(host_vector.domain, 70, seed=3)
    assert len(pts) == 70
    seen = {fi for _, fi in pts}
    assert seen == set(range(7))


def test_sample_boundary_points_are_active_and_inside(host_vector):
    dom = host_vector.domain
    fs = facets(dom)
    for x, fi in sample_boundary(dom, 49, seed=1):
        f = fs[fi]
        bound = 0.0 if f.kind == "coordinate" else dom.constraints[f.index].bound
        assert abs(f.normal @ x - (bound if f.kind == "constraint" else 0.0)) <= ACTIVITY_TOL
        assert dom.margin(x) >= -ACTIVITY_TOL


def test_sample_boundary_is_deterministic(host_vector):
    a = sample_boundary(host_vector.domain, 30, seed=9)
    b = sample_boundary(host_vector.domain, 30, seed=9)
    assert len(a) == len(b)
    for (xa, fa), (xb, fb) in zip(a, b):
        assert fa == fb
        assert np.array_equal(xa, xb)


def test_sample_boundary_needs_compact_domain():
    dom = Domain(nonnegative=(True,), constraints=())
    with pytest.raises(SpecError):
        sample_boundary(dom, 10, seed=0)


def test_sample_interior_stays_strictly_inside(host_vector):
    xs = sample_interior(host_vector.domain, 200, seed=4)
    assert xs.shape == (200, 5)
    margins = np.array([host_vector.domain.margin(x) for x in xs])
    assert np.all(margins > 0.0)


def test_continuous_tangent_passes_on_canonical_model(host_vector):
    rep = continuous_tangent(host_vector, count=256, seed=0)
    assert isinstance(rep, TangentReport)
    assert rep.samples == 256
    assert rep.violations == ()
    assert rep.passed
    # both population caps sit exactly at the carrying capacities, so the
    # worst outward flux on the boundary is zero up to round-off
    assert abs(rep.worst_value) <= 1e-12


def test_continuous_tangent_flags_tight_cap():
    tight = _shrunk_vector_cap()
    rep = continuous_tangent(tight, count=128, seed=0)
    assert not rep.passed
    assert rep.violations
    # on the vector-cap facet the outward flux is constant:
    # u . f = Lambda_v - mu_v (S_v + I_v) = 2 - 0.2 * 5 = 1
    assert rep.worst_value == pytest.approx(1.0, abs=1e-12)
    cap_violations = [v for v in rep.violations if v[1] == 5]
    assert cap_violations
    for _, _, value in cap_violations:
        assert value == pytest.approx(1.0, abs=1e-12)


def test_discrete_tangent_passes_on_canonical_model(host_vector, h_bars):
    rep = discrete_tangent(host_vector, h=0.5 * h_bars["host-vector"], count=256, seed=0)
    assert rep.passed
    assert rep.violations == ()
    assert rep.samples == 256


def test_discrete_tangent_flags_tight_cap(h_bars):
    tight = _shrunk_vector_cap()
    h = 0.5 * step_bound(tight).h_bar
    rep = discrete_tangent(tight, h=h, count=128, seed=0)
    assert not rep.passed
    assert rep.violations
    # every violating backward image crosses the tightened cap facet
    assert {fi for _, fi, _ in rep.violations} == {5}


def test_discrete_tangent_validates_step_size(host_vector, h_bars):
    with pytest.raises(SpecError):
        discrete_tangent(host_vector, h=0.0)
    with pytest.raises(SpecError):
        discrete_tangent(host_vector, h=-0.5)
    with pytest.raises(SpecError):
        discrete_tangent(host_vector, h=1.01 * h_bars["host-vector"])


def test_backward_map_flux_through_vector_cap_plane():
    # on the plane S_v + I_v = M_v the backward displacement has an exact
    # closed form along the plane normal, independent of the sample point
    model = _wide_vector_cap()
    par = HostVectorParameters(M_v=12.0)
    h = 0.5
    expected = -h * (par.Lambda_v - par.mu_v * 12.0) / (1.0 - h * par.mu_v / 2.0)
    u = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
    pts = [x for x, fi in sample_boundary(model.domain, 63, seed=2) if fi == 5]
    assert len(pts) >= 5
    for x in pts:
        y = step_backward(model, x, h)
        assert u @ (y - x) == pytest.approx(expected, abs=PLANE_ATOL)


def test_backward_displacement_shrinks_linearly_with_h():
    # as h -> 0 the boundary displacement approaches -h f(x); compare the
    # per-facet rate against the outward flux where the flux is not tiny
    from nsfd.invariance import facets as facets_of
    from nsfd.model import eval_f

    model = _wide_vector_cap()
    h = 1e-4 * step_bound(model).h_bar
    fs = facets_of(model.domain)
    checked = 0
    for x, fi in sample_boundary(model.domain, 200, seed=5):
        n = fs[fi].normal
        flux = n @ eval_f(model, x)
        if abs(flux) < 0.05:
            continue
        rate = (n @ (step_backward(model, x, h) - x)) / h
        assert abs(rate / (-flux) - 1.0) <= 0.05
        checked += 1
    assert checked >= 50


def test_audit_clean_below_bound(host_vector, h_bars):
    rep = invariance_audit(host_vector, h=0.9 * h_bars["host-vector"], trials=50, steps=50, seed=0)
    assert isinstance(rep, AuditReport)
    assert rep.exit_count == 0
    assert rep.exits == ()
    assert rep.passed
    assert rep.worst_margin >= -MEMBERSHIP_SLACK * 11.0
    assert rep.scheme == "nsfd"


def test_audit_is_deterministic(host_vector):
    a = invariance_audit(host_vector, h=0.6, trials=20, steps=20, seed=5)
    b = invariance_audit(host_vector, h=0.6, trials=20, steps=20, seed=5)
    assert a == b


def test_audit_seed_changes_draws(host_vector):
    a = invariance_audit(host_vector, h=0.6, trials=20, steps=20, seed=5)
    b = invariance_audit(host_vector, h=0.6, trials=20, steps=20, seed=6)
    assert a.worst_margin != b.worst_margin


def test_audit_counts_euler_exits_without_raising(host_vector):
    rep = invariance_audit(host_vector, h=5.0, trials=30, steps=30, seed=1, scheme="euler")
    assert rep.scheme == "euler"
    assert rep.exit_count > 0
    assert not rep.passed
    assert len(rep.exits) == min(rep.exit_count, MAX_STORED_EXITS)
    for trial, step, margin in rep.exits:
        assert 0 <= trial < 30
        assert 1 <= step <= 30
        assert margin < 0.0


def test_audit_euler_comparison_at_safe_step(host_vector, h_bars):
    # comparison runs report whatever happens; exits are data, not errors
    rep = invariance_audit(
        host_vector, h=0.9 * h_bars["host-vector"], trials=20, steps=20, seed=0, scheme="euler"
    )
    assert rep.exit_count >= 0
    assert isinstance(rep.exit_count, int)


def test_audit_reversible_map_exits_above_bound(logistic):
    # above the safe bound the solve sign flips near zero and positivity
    # is genuinely lost, so the audit must report exits rather than hide them
    rep = invariance_audit(logistic, h=2.5, trials=30, steps=30, seed=0)
    assert rep.exit_count > 0
    assert rep.worst_margin < 0.0
    assert rep.worst_trial is not None
    assert rep.worst_step is not None


def test_audit_rejects_unknown_scheme(host_vector):
    assert AUDIT_SCHEMES == ("nsfd", "euler", "rk4")
    with pytest.raises(SpecError):
        invariance_audit(host_vector, h=0.5, trials=5, steps=5, seed=0, scheme="leapfrog")


def test_audit_as_dict_is_json_ready(host_vector):
    import json

    rep = invariance_audit(host_vector, h=0.5, trials=5, steps=5, seed=0)
    text = json.dumps(rep.as_dict())
    assert json.loads(text)["exit_count"] == 0


def test_tangent_report_pass_semantics(host_vector):
    rep = continuous_tangent(host_vector, count=64, seed=0)
    assert rep.passed == (len(rep.violations) == 0)
    assert rep.tolerance > 0.0
    assert rep.worst_point.shape == (5,)
