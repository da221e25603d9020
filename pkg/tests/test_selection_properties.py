"""Property tests for the greedy threshold identities."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from capped_kaczmarz.core import Convex, Scaled
from capped_kaczmarz.selection import (
    RowGeometry,
    build_distance_set,
    build_residual_set,
    compute_delta,
    compute_epsilon,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)
positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@st.composite
def geometries(draw):
    m = draw(st.integers(min_value=1, max_value=30))
    residual = np.array(draw(st.lists(finite, min_size=m, max_size=m)))
    grad_sq = np.array(draw(st.lists(positive, min_size=m, max_size=m)))
    # at least one row must carry residual for the thresholds to exist
    if not (residual * residual).sum() > 0:
        residual[draw(st.integers(min_value=0, max_value=m - 1))] = draw(
            st.floats(min_value=0.5, max_value=10.0)
        )
    return RowGeometry.from_state(residual, grad_sq)


thetas = st.floats(min_value=0.0, max_value=1.0)
xis = st.floats(min_value=1e-6, max_value=1.0)


@settings(max_examples=250, deadline=None)
@given(geometries(), thetas)
def test_epsilon_times_frobenius_at_least_one(g, theta):
    eps = compute_epsilon(g, Convex(theta))
    assert eps * g.active_fro_sq >= 1.0 - 1e-12


@settings(max_examples=250, deadline=None)
@given(geometries(), thetas)
def test_delta_bounds(g, theta):
    delta = compute_delta(g, Convex(theta))
    assert delta >= 1.0 / g.m - 1e-15
    assert delta <= 1.0 + 1e-15


@settings(max_examples=250, deadline=None)
@given(geometries(), thetas)
def test_sets_nonempty_and_contain_argmax(g, theta):
    mode = Convex(theta)
    dist = build_distance_set(g, compute_epsilon(g, mode))
    resid = build_residual_set(g, compute_delta(g, mode))
    assert len(dist) >= 1 and len(resid) >= 1

    ratios = np.where(g.active, g.residual**2 / np.where(g.active, g.grad_sq_norms, 1.0), -1.0)
    assert int(np.argmax(ratios)) in dist.indices
    assert int(np.argmax(g.residual**2)) in resid.indices


@settings(max_examples=250, deadline=None)
@given(geometries(), xis)
def test_scaled_mode_sets_nonempty(g, xi):
    mode = Scaled(xi)
    assert len(build_distance_set(g, compute_epsilon(g, mode))) >= 1
    assert len(build_residual_set(g, compute_delta(g, mode))) >= 1


@settings(max_examples=250, deadline=None)
@given(geometries())
def test_normalized_weights_form_distribution(g):
    for sel in (
        build_distance_set(g, compute_epsilon(g, Convex(0.5))),
        build_residual_set(g, compute_delta(g, Convex(0.5))),
    ):
        assert np.all(sel.weights >= 0.0)
        total = sel.weights.sum()
        assert total > 0.0
        assert abs(sel.weights.sum() / total - 1.0) <= 1e-12


@settings(max_examples=250, deadline=None)
@given(geometries(), st.integers(min_value=-40, max_value=40))
def test_homogeneity_under_common_rescaling(g, exponent):
    # powers of two keep every float product exact, so set membership cannot
    # drift through rounding at threshold ties
    c = float(2.0**exponent)
    scaled = RowGeometry.from_state(c * g.residual, c * c * g.grad_sq_norms)
    for mode in (Convex(0.5), Scaled(1.0)):
        base_d = build_distance_set(g, compute_epsilon(g, mode))
        scaled_d = build_distance_set(scaled, compute_epsilon(scaled, mode))
        assert base_d.indices.tolist() == scaled_d.indices.tolist()
        base_r = build_residual_set(g, compute_delta(g, mode))
        scaled_r = build_residual_set(scaled, compute_delta(scaled, mode))
        assert base_r.indices.tolist() == scaled_r.indices.tolist()
        if base_d.weights.sum() > 0 and scaled_d.weights.sum() > 0:
            assert np.allclose(
                base_d.weights / base_d.weights.sum(),
                scaled_d.weights / scaled_d.weights.sum(),
                rtol=1e-12,
            )
