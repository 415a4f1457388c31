import itertools

import numpy as np
import pytest
import scipy.linalg
from helpers import brute_force_wdvv

from potnormals.errors import IntegrationError, SpecError
from potnormals.frobenius import (
    FrobeniusSpec,
    flat_connection,
    flat_curvature_residual,
    realization_form,
    realize,
    realize_verify,
    third_derivatives,
    verify_frame_theory,
    wdvv_residual,
    wdvv_tensor,
)
from potnormals.geometry import zero_curvature_blocks

ANTI3 = [[0, 0, 1], [0, 1, 0], [1, 0, 0]]
QUARTIC = "u1^2*u3/2 + u1*u2^2/2 + u2^4/24"
A3 = "u1^2*u3/2 + u1*u2^2/2 - u2^2*u3^2/16 + u3^5/960"


def cubic(c=1.0):
    return FrobeniusSpec.from_source("(u1^3+u2^3)/6", np.eye(2), c)


def quartic(c=1.0):
    return FrobeniusSpec.from_source(QUARTIC, ANTI3, c)


def broken():
    return FrobeniusSpec.from_source(QUARTIC + " + 0.1*u1^2*u2^2", ANTI3, 1.0)


# -- spec validation ------------------------------------------------------------


def test_c_zero_rejected():
    with pytest.raises(SpecError, match="c != 0"):
        FrobeniusSpec.from_source("u1^3", [[1.0]], 0.0)


@pytest.mark.parametrize("eta", [[[1, 2], [0, 1]], [[1, 1], [1, 1]], [[1, 0, 0], [0, 1, 0]]])
def test_bad_eta_rejected(eta):
    with pytest.raises(SpecError):
        FrobeniusSpec.from_source("u1^3", eta, 1.0)


# -- WDVV -------------------------------------------------------------------------


def test_cubic_wdvv_vanishes():
    spec = cubic()
    for u in np.random.default_rng(0).uniform(-2, 2, (10, 2)):
        assert wdvv_residual(spec, u) == 0.0


def test_one_dimensional_wdvv_is_vacuous():
    spec = FrobeniusSpec.from_source("exp(u1)*sin(u1) + u1^5", [[2.0]], 1.0)
    for u in (-1.0, 0.3, 2.0):
        assert wdvv_residual(spec, [u]) == 0.0


@pytest.mark.parametrize("u", [[0.3, -0.2, 0.5], [1.0, 1.0, 1.0], [-0.7, 0.4, 0.1]])
def test_quartic_wdvv_brute_force_then_jet(u):
    spec = quartic()
    # the oracle confirms the candidate first, then the jet path must agree
    oracle = brute_force_wdvv(spec.phi, spec.eta, u)
    assert oracle <= 1e-6
    jet = wdvv_residual(spec, u)
    assert jet <= 1e-10
    assert abs(jet - oracle) <= 1e-6


def test_broken_potential_oracle_agrees_with_jet():
    spec = broken()
    u = [0.3, -0.2, 0.5]
    oracle = brute_force_wdvv(spec.phi, spec.eta, u)
    jet = wdvv_residual(spec, u)
    assert jet > 1e-2
    assert abs(jet - oracle) <= 1e-4 * max(1.0, jet)


def test_a3_potential_satisfies_wdvv():
    spec = FrobeniusSpec.from_source(A3, ANTI3, -2.0)
    for u in np.random.default_rng(1).uniform(-1, 1, (5, 3)):
        assert wdvv_residual(spec, u) <= 1e-12


def test_wdvv_relabeling_invariance():
    spec = broken()
    for u in np.random.default_rng(2).uniform(-1, 1, (5, 3)):
        t = wdvv_tensor(third_derivatives(spec, u), spec.eta_inv)
        assert np.max(np.abs(t - t.transpose(1, 0, 3, 2))) <= 1e-12
        assert abs(np.max(np.abs(t)) - np.max(np.abs(t.transpose(1, 0, 3, 2)))) <= 1e-12


def test_quadratic_terms_do_not_change_wdvv():
    base = broken()
    shifted = base.with_phi(base.phi_source + " + 3*u1^2 - u2*u3 + 0.5*u1 + 7")
    for u in np.random.default_rng(3).uniform(-1, 1, (5, 3)):
        assert abs(wdvv_residual(base, u) - wdvv_residual(shifted, u)) <= 1e-12


# -- flat connection ------------------------------------------------------------


def test_cubic_flat_connection():
    A = flat_connection(cubic(), [0.4, -1.1])
    N = 2
    b1, b2 = A[0][:N, N:], A[1][:N, N:]
    assert np.array_equal(b1, np.diag([1.0, 0.0]))
    assert np.array_equal(b2, np.diag([0.0, 1.0]))
    assert np.array_equal(A[0][N:, :N], -b1)
    assert not A[:, :N, :N].any() and not A[:, N:, N:].any()


def test_negative_c_flat_connection():
    A = flat_connection(cubic(-1.0), [0.4, -1.1])
    assert np.array_equal(A[:, 2:, :2], A[:, :2, 2:])


def test_lowered_structure_tensor_is_symmetric():
    spec = FrobeniusSpec.from_source(A3, ANTI3, 3.0)
    for u in np.random.default_rng(4).uniform(-1, 1, (5, 3)):
        A = flat_connection(spec, u)
        b = np.stack([A[i][:3, 3:] for i in range(3)])  # b[i, j, k] = b^k_ij
        lowered = np.einsum("ks,ijs->kij", spec.eta, b)
        for p in itertools.permutations(range(3)):
            assert np.max(np.abs(lowered - lowered.transpose(p))) <= 1e-12


def test_curvature_iff_wdvv():
    good = FrobeniusSpec.from_source(A3, ANTI3, 1.5)
    bad = broken()
    grid = list(itertools.product([-0.8, 0.1, 0.9], repeat=3))
    for spec in (good, bad):
        for u in grid:
            w = wdvv_residual(spec, u)
            k = max(flat_curvature_residual(spec, u))
            assert (w <= 1e-8) == (k <= 1e-8), (spec.phi_source, u, w, k)
    assert all(wdvv_residual(good, u) <= 1e-8 for u in grid)
    assert any(wdvv_residual(bad, u) > 1e-8 for u in grid)


def test_curvature_detects_injected_defect():
    spec = quartic()
    u = [0.2, 0.5, -0.3]
    A = flat_connection(spec, u).copy()
    A[1, 0, 4] += 0.1
    from potnormals.frobenius import flat_connection_derivatives

    assert max(zero_curvature_blocks(A, flat_connection_derivatives(spec, u))) > 1e-3


# -- realization form -----------------------------------------------------------


def test_realization_form_identity():
    form, T = realization_form(cubic())
    assert form.signs == (1, 1, 1, 1)
    assert np.array_equal(T, np.eye(4))


def test_realization_form_negative_c():
    form, T = realization_form(FrobeniusSpec.from_source("u1^3", [[1.0]], -1.0))
    assert sorted(form.signs) == [-1, 1]


def test_realization_form_antidiagonal():
    spec = FrobeniusSpec.from_source("u1^2*u2/2", [[0, 1], [1, 0]], 1.0)
    form, T = realization_form(spec)
    assert sorted(form.signs[:2]) == [-1, 1] and sorted(form.signs[2:]) == [-1, 1]
    K = scipy.linalg.block_diag(spec.eta, spec.eta)
    assert np.max(np.abs(T.T @ form.matrix @ T - K)) <= 1e-14


# -- realize ----------------------------------------------------------------------


def expm_oracle(spec, direction):
    """(F, r, n) at u0 + direction for constant A, via one augmented exponential."""
    N = spec.N
    _, T = realization_form(spec)
    A = np.tensordot(direction, flat_connection(spec, np.zeros(N)), axes=1)
    M = np.zeros((2 * N + 2, 2 * N + 2))
    M[: 2 * N, : 2 * N] = A.T
    M[:N, 2 * N] = direction  # dr/dt = F[:, :N] @ direction
    M[N : 2 * N, 2 * N + 1] = direction
    Z0 = np.hstack([T, np.zeros((2 * N, 2))])
    Z = Z0 @ scipy.linalg.expm(M)
    return Z[:, : 2 * N], Z[:, 2 * N], Z[:, 2 * N + 1]


@pytest.mark.parametrize("direction", [[1.0, 0.0], [0.6, -0.8]])
def test_constant_coefficient_realization_matches_expm(direction):
    spec = cubic()
    state = realize(spec, [0, 0], [direction], 1e-3)
    F, r, n = expm_oracle(spec, np.array(direction))
    assert np.max(np.abs(state.F - F)) <= 1e-8
    assert np.max(np.abs(state.r - r)) <= 1e-8
    assert np.max(np.abs(state.n - n)) <= 1e-8
    assert max(realize_verify(spec, state).values()) <= 1e-9


def test_zero_potential_frame_is_constant():
    spec = FrobeniusSpec.from_source("0", np.diag([1.0, -1.0]), 2.0)
    _, T = realization_form(spec)
    state = realize(spec, [0, 0], [[0.5, -1.5]], 1e-2)
    assert np.array_equal(state.F, T)
    assert np.allclose(state.r, T[:, :2] @ [0.5, -1.5], atol=1e-14)
    assert np.allclose(state.n, T[:, 2:] @ [0.5, -1.5], atol=1e-14)
    assert max(realize_verify(spec, state).values()) <= 4 * np.finfo(float).eps


def test_path_independence_p1():
    spec = FrobeniusSpec.from_source("u1^2*u2/2 + exp(u2)", [[0, 1], [1, 0]], 1.0)
    s1 = realize(spec, [0, 0], [[1, 0], [1, 1]], 1e-3)
    s2 = realize(spec, [0, 0], [[0, 1], [1, 1]], 1e-3)
    for x, y in ((s1.F, s2.F), (s1.r, s2.r), (s1.n, s2.n)):
        assert np.max(np.abs(x - y)) <= 1e-6
    assert max(realize_verify(spec, s1).values()) <= 1e-8


def test_realized_frame_theory():
    spec = FrobeniusSpec.from_source(A3, ANTI3, -2.0)
    state = realize(spec, [0, 0, 0], [[0.5, 0.2, -0.4]], 1e-3)
    th = verify_frame_theory(spec, state)
    assert th["a_max"] <= 1e-8 and th["d_max"] <= 1e-8
    assert th["levi_civita_defect_a"] <= 1e-8 and th["levi_civita_defect_d"] <= 1e-8
    assert th["b_defect"] <= 1e-8 and th["c_defect"] <= 1e-8


def test_gram_drift_per_unit_length():
    spec = quartic(0.5)
    state = realize(spec, [0, 0, 0], [[1, 0, 0]], 1e-3)
    assert state.max_drift <= 1e-8


def test_violating_potential_fails_gate():
    with pytest.raises(IntegrationError, match="WDVV") as info:
        realize(broken(), [0, 0, 0], [[1, 1, 1]], 1e-3)
    assert info.value.value > 1e-8


def test_violating_potential_is_path_dependent_without_gate():
    spec = broken()
    s1 = realize(spec, [0, 0, 0], [[1, 0, 0], [1, 1, 0], [1, 1, 1]], 1e-2, wdvv_gate=np.inf)
    s2 = realize(spec, [0, 0, 0], [[0, 0, 1], [0, 1, 1], [1, 1, 1]], 1e-2, wdvv_gate=np.inf)
    assert np.max(np.abs(s1.F - s2.F)) > 1e-3


def test_realize_input_errors():
    with pytest.raises(ValueError):
        realize(cubic(), [0, 0], [[1, 0]], 0.0)
    with pytest.raises(ValueError):
        realize(cubic(), [0, 0, 0], [[1, 0]], 1e-3)
    with pytest.raises(IntegrationError, match="collapses"):
        realize(cubic(), [0, 0], [[1, 0]], 1e-9)
    with pytest.raises(IntegrationError, match="not defined"):
        realize(FrobeniusSpec.from_source("ln(u1 - 2)", [[1.0]], 1.0), [1.0], [[-1.0]], 1e-2)
