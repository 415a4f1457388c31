"""Flat submanifolds built from a Frobenius potential.

For constant metrics ``h = eta`` and ``g = c * eta`` the connection of the
frame system loses its diagonal blocks and is fixed by the third partials of
a potential ``phi``:

    b^k_ij = eta^{ks} phi_sij,        c^k_ij = -(1/c) b^k_ij.

The frame system is integrable exactly when ``phi`` satisfies the WDVV
associativity equations; :func:`realize` integrates it along a polyline to
reconstruct the immersion ``r`` and the normal potential ``n``.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError, JetDomainError, SpecError
from .expr import Expr, eval_jet, max_variable, parse
from .geometry import (
    AmbientForm,
    connection_matrices,
    gram_derivatives,
    levi_civita,
    solve_frame,
    zero_curvature_blocks,
)

__all__ = [
    "FrameState",
    "FrobeniusSpec",
    "flat_connection",
    "flat_connection_derivatives",
    "flat_curvature_residual",
    "realization_form",
    "realize",
    "realize_verify",
    "structure_tensor",
    "third_derivatives",
    "verify_frame_theory",
    "wdvv_residual",
    "wdvv_tensor",
]

WDVV_GATE = 1e-8
DRIFT_ABORT = 1e-4
MAX_STEPS = 10_000_000


@dataclass(frozen=True)
class FrobeniusSpec:
    N: int
    eta: np.ndarray
    c_const: float
    phi: Expr
    phi_source: str = ""
    name: str = ""

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        if self.N < 1:
            raise SpecError("must be >= 1", "N")
        if eta.shape != (self.N, self.N):
            raise SpecError(f"must be {self.N} x {self.N}, got shape {eta.shape}", "eta")
        if not np.all(np.isfinite(eta)):
            raise SpecError("entries must be finite", "eta")
        if not np.array_equal(eta, eta.T):
            raise SpecError("must be symmetric", "eta")
        if abs(np.linalg.det(eta)) <= 1e-12 * max(1.0, float(np.max(np.abs(eta)))) ** self.N:
            raise SpecError("must be invertible", "eta")
        c = float(self.c_const)
        if c == 0 or not math.isfinite(c):
            raise SpecError("the deformation parameter must satisfy c != 0", "c")
        if max_variable(self.phi) >= self.N:
            raise SpecError(f"uses u{max_variable(self.phi) + 1} but N = {self.N}", "phi")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "c_const", c)

    @classmethod
    def from_source(cls, phi: str, eta, c: float = 1.0, name: str = ""):
        eta = np.asarray(eta, dtype=float)
        if eta.ndim != 2 or eta.shape[0] != eta.shape[1]:
            raise SpecError("must be a square matrix", "eta")
        return cls(eta.shape[0], eta, c, parse(phi, eta.shape[0]), phi, name)

    @property
    def eta_inv(self) -> np.ndarray:
        return np.linalg.inv(self.eta)

    def with_phi(self, phi: str) -> FrobeniusSpec:
        return FrobeniusSpec(self.N, self.eta, self.c_const, parse(phi, self.N), phi, self.name)


def third_derivatives(spec: FrobeniusSpec, u) -> np.ndarray:
    """phi_ijk at u from one jet evaluation."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != spec.N:
        raise ValueError(f"point has dim {u.size}, expected N = {spec.N}")
    return eval_jet(spec.phi, u).third


def wdvv_tensor(third, eta_inv) -> np.ndarray:
    """LHS - RHS of the associativity equations, indexed [i, j, k, l]."""
    lhs = np.einsum("ijs,sp,pkl->ijkl", third, eta_inv, third)
    return lhs - lhs.transpose(0, 2, 1, 3)


def wdvv_residual(spec: FrobeniusSpec, u) -> float:
    return float(np.max(np.abs(wdvv_tensor(third_derivatives(spec, u), spec.eta_inv))))


def structure_tensor(third, eta_inv) -> np.ndarray:
    """b[k, i, j] = eta^{ks} phi_sij."""
    return np.einsum("ks,sij->kij", eta_inv, third)


def _connection_from_third(third, eta_inv, c_const):
    b = structure_tensor(third, eta_inv)
    zero = np.zeros_like(b)
    return connection_matrices(zero, b, -b / c_const, zero)


def flat_connection(spec: FrobeniusSpec, u) -> np.ndarray:
    """Connection matrices A_i (shape (N, 2N, 2N)) of the flat realization."""
    return _connection_from_third(third_derivatives(spec, u), spec.eta_inv, spec.c_const)


def _symmetrize4(q):
    return sum(q.transpose(p) for p in itertools.permutations(range(4))) / 24.0


def flat_connection_derivatives(spec: FrobeniusSpec, u, step: float = 1e-3) -> np.ndarray:
    """dA[l, i] = d_l A_i.

    Needs fourth partials of phi, one order past the jets: they are taken as
    central differences of the jet third partials and projected onto fully
    symmetric tensors, which the exact fourth partials are.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    N = spec.N
    fourth = np.empty((N, N, N, N))
    for l in range(N):
        e = np.zeros(N)
        e[l] = step
        fourth[..., l] = (third_derivatives(spec, u + e) - third_derivatives(spec, u - e)) / (2 * step)
    fourth = _symmetrize4(fourth)
    eta_inv = spec.eta_inv
    return np.stack(
        [_connection_from_third(fourth[..., l], eta_inv, spec.c_const) for l in range(N)]
    )


def flat_curvature_residual(spec: FrobeniusSpec, u, A=None):
    """(gauss, codazzi, ricci) residuals of the flat connection at u.

    ``A`` overrides the connection matrices (used to inject defects).
    """
    if A is None:
        A = flat_connection(spec, u)
    return zero_curvature_blocks(A, flat_connection_derivatives(spec, u))


def realization_form(spec: FrobeniusSpec, rel_tol: float = 1e-12):
    """Diagonal ambient form and congruence T with T^t diag(signs) T = blockdiag(c eta, eta).

    Each block is diagonalized on its own, so T is block diagonal.
    """
    signs = []
    blocks = []
    for M in (spec.c_const * spec.eta, spec.eta):
        w, Q = np.linalg.eigh(M)
        if np.min(np.abs(w)) <= rel_tol * np.max(np.abs(w)):
            raise SpecError("eta is numerically singular", "eta")
        signs.extend(int(s) for s in np.sign(w))
        blocks.append(np.sqrt(np.abs(w))[:, None] * Q.T)
    N = spec.N
    T = np.zeros((2 * N, 2 * N))
    T[:N, :N] = blocks[0]
    T[N:, N:] = blocks[1]
    return AmbientForm(tuple(signs)), T


@dataclass
class FrameState:
    """Frame (columns r_1..r_N, n_1..n_N), position r and potential n at u."""

    u: np.ndarray
    F: np.ndarray
    r: np.ndarray
    n: np.ndarray
    steps: int = 0
    max_wdvv: float = 0.0
    max_drift: float = 0.0
    signs: tuple = field(default=())

    def as_dict(self) -> dict:
        return {
            "u": self.u.tolist(),
            "F": self.F.tolist(),
            "r": self.r.tolist(),
            "n": self.n.tolist(),
            "steps": self.steps,
            "max_wdvv": self.max_wdvv,
            "max_drift": self.max_drift,
        }


def _gram_target(spec):
    N = spec.N
    K = np.zeros((2 * N, 2 * N))
    K[:N, :N] = spec.c_const * spec.eta
    K[N:, N:] = spec.eta
    return K


def realize(
    spec: FrobeniusSpec,
    u0: Sequence[float],
    path: Sequence[Sequence[float]],
    step: float = 1e-3,
    wdvv_gate: float = WDVV_GATE,
    drift_abort: float = DRIFT_ABORT,
) -> FrameState:
    """Integrate the flat frame system from ``u0`` through the ``path`` waypoints.

    Starts from F = T (see :func:`realization_form`) and r = n = 0 and uses
    classical RK4 on each straight segment.  Raises :class:`IntegrationError`
    when the WDVV residual at a step exceeds ``wdvv_gate`` or the Gram matrix
    of the frame drifts by more than ``drift_abort``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    N = spec.N
    form, T = realization_form(spec)
    G = np.asarray(form.signs, dtype=float)
    K = _gram_target(spec)
    eta_inv = spec.eta_inv
    c = spec.c_const

    u = np.asarray(u0, dtype=float).reshape(-1)
    if u.size != N:
        raise ValueError(f"start point has dim {u.size}, expected N = {N}")
    waypoints = [np.asarray(p, dtype=float).reshape(-1) for p in path]
    for p in waypoints:
        if p.size != N:
            raise ValueError(f"waypoint has dim {p.size}, expected N = {N}")

    F = T.copy()
    r = np.zeros(2 * N)
    n = np.zeros(2 * N)
    total_steps = 0
    max_wdvv = 0.0
    max_drift = 0.0

    def connection(x):
        try:
            third = eval_jet(spec.phi, x).third
        except JetDomainError as exc:
            raise IntegrationError(f"phi is not defined at u = {x.tolist()}: {exc}", x.tolist()) from exc
        return third, _connection_from_third(third, eta_inv, c)

    def rhs(F, A, delta):
        A_dir = np.tensordot(delta, A, axes=1)
        return F @ A_dir.T, F[:, :N] @ delta, F[:, N:] @ delta

    for target in waypoints:
        delta = target - u
        length = float(np.linalg.norm(delta))
        if length == 0.0:
            continue
        nsteps = math.ceil(length / step)
        if nsteps > MAX_STEPS:
            raise IntegrationError(f"step {step} collapses: {nsteps} steps needed", u.tolist())
        dt = 1.0 / nsteps
        start = u
        for s in range(nsteps):
            x0 = start + (s * dt) * delta
            third, A1 = connection(x0)
            resid = float(np.max(np.abs(wdvv_tensor(third, eta_inv))))
            max_wdvv = max(max_wdvv, resid)
            if resid > wdvv_gate:
                raise IntegrationError(
                    f"WDVV residual {resid:.3e} exceeds {wdvv_gate:.1e} at u = {x0.tolist()}",
                    x0.tolist(),
                    resid,
                )
            _, Am = connection(x0 + 0.5 * dt * delta)
            _, A4 = connection(x0 + dt * delta)
            k1 = rhs(F, A1, delta)
            k2 = rhs(F + 0.5 * dt * k1[0], Am, delta)
            k3 = rhs(F + 0.5 * dt * k2[0], Am, delta)
            k4 = rhs(F + dt * k3[0], A4, delta)
            F, r, n = (
                y + (dt / 6.0) * (a + 2 * b + 2 * cc + d)
                for y, a, b, cc, d in zip((F, r, n), k1, k2, k3, k4)
            )
            drift = float(np.max(np.abs(F.T @ (G[:, None] * F) - K)))
            max_drift = max(max_drift, drift)
            if drift > drift_abort:
                raise IntegrationError(
                    f"Gram drift {drift:.3e} exceeds {drift_abort:.1e}", (x0 + dt * delta).tolist(), drift
                )
        total_steps += nsteps
        u = target.copy()

    return FrameState(u, F, r, n, total_steps, max_wdvv, max_drift, form.signs)


def realize_verify(spec: FrobeniusSpec, state: FrameState) -> dict:
    """Deviation of the realized frame's Gram matrix from blockdiag(c eta, eta)."""
    N = spec.N
    signs = state.signs or realization_form(spec)[0].signs
    G = np.asarray(signs, dtype=float)
    gram = state.F.T @ (G[:, None] * state.F)
    return {
        "g_defect": float(np.max(np.abs(gram[:N, :N] - spec.c_const * spec.eta))),
        "h_defect": float(np.max(np.abs(gram[N:, N:] - spec.eta))),
        "orth_defect": float(max(np.max(np.abs(gram[:N, N:])), np.max(np.abs(gram[N:, :N])))),
    }


def verify_frame_theory(spec: FrobeniusSpec, state: FrameState) -> dict:
    """Run the Gauss/Weingarten and Levi-Civita checks on a realized frame.

    Second derivatives are read off the frame equations, d_i F = F A_i^t,
    rather than by differencing the integrated data.
    """
    N = spec.N
    F = state.F
    A = flat_connection(spec, state.u)
    dF = np.einsum("ab,icb->aci", F, A)  # dF[:, col, i] = d_i (column col)
    r2, n2 = dF[:, :N, :], dF[:, N:, :]
    dec = solve_frame(F, r2, n2)
    form = AmbientForm(state.signs or realization_form(spec)[0].signs)
    G = np.asarray(form.signs, dtype=float)
    g = F[:, :N].T @ (G[:, None] * F[:, :N])
    h = F[:, N:].T @ (G[:, None] * F[:, N:])
    gamma_g = levi_civita(g, gram_derivatives(form, F[:, :N], r2))
    gamma_h = levi_civita(h, gram_derivatives(form, F[:, N:], n2))
    b_expected = structure_tensor(third_derivatives(spec, state.u), spec.eta_inv)
    return {
        "a_max": float(np.max(np.abs(dec.a))),
        "d_max": float(np.max(np.abs(dec.d))),
        "levi_civita_defect_a": float(np.max(np.abs(dec.a - gamma_g))),
        "levi_civita_defect_d": float(np.max(np.abs(dec.d - gamma_h))),
        "b_defect": float(np.max(np.abs(dec.b - b_expected))),
        "c_defect": float(np.max(np.abs(dec.c + b_expected / spec.c_const))),
    }
