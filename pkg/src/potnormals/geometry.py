"""Local theory of N-dimensional submanifolds with a potential of normals.

A submanifold of the 2N-dimensional pseudo-Euclidean space is given by two
vector functions ``r(u)`` (the immersion) and ``n(u)`` (the potential of
normals, whose partials ``n_i`` span the normal space).  At a point the
moving frame is the 2N x 2N matrix ``F = [r_1 .. r_N | n_1 .. n_N]`` (frame
vectors as columns) and the second derivatives decompose as

    r_ij = a^k_ij r_k + b^k_ij n_k,        n_ij = c^k_ij r_k + d^k_ij n_k.

Coefficient tensors are stored upper index first: ``a[k, i, j] = a^k_ij``.

Compatibility of this system is checked in zero-curvature form.  With the
connection matrix ``A_i[B, C]`` = coefficient of frame vector C in the
derivative of frame vector B along u^i, i.e. ``A_i = [[a_i, b_i], [c_i, d_i]]``
with ``a_i[j, k] = a^k_ij``, equality of mixed partials of the frame reads

    R_ij = d_j A_i - d_i A_j + A_i A_j - A_j A_i = 0.

Its tangent-tangent block is the Gauss equation, the two mixed blocks are
the Codazzi equations and the normal-normal block is the Ricci equation.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import (
    DegeneracyError,
    DimensionMismatch,
    NonisotropyError,
    OrthogonalityError,
    PotnormalsError,
    SpecError,
)
from .expr import VectorFunction, eval_real, eval_vector_jets
from .jet import fd_partials

__all__ = [
    "AmbientForm",
    "Decomposition",
    "PointAnalysis",
    "PointJets",
    "SubmanifoldSpec",
    "ToleranceConfig",
    "analyze_point",
    "connection_derivatives",
    "connection_matrices",
    "curvature_residual",
    "decompose",
    "dualize",
    "fundamental_forms",
    "gram_derivatives",
    "inner",
    "levi_civita",
    "point_jets",
    "solve_frame",
    "zero_curvature_blocks",
]

# |det| / prod(row norms) below this counts as a degenerate Gram matrix
DEGENERACY_RATIO = 1e-12


@dataclass(frozen=True)
class AmbientForm:
    """Diagonal pseudo-Euclidean form with entries +1 / -1."""

    signs: tuple

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        if not signs or any(s not in (1, -1) for s in signs):
            raise SpecError("every sign must be +1 or -1", "signs")
        object.__setattr__(self, "signs", signs)

    @property
    def dim(self) -> int:
        return len(self.signs)

    @property
    def index(self) -> int:
        """Number of negative squares (the k of E^m_k)."""
        return sum(1 for s in self.signs if s < 0)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(np.array(self.signs, dtype=float))

    @classmethod
    def euclidean(cls, dim):
        return cls((1,) * dim)


@dataclass(frozen=True)
class ToleranceConfig:
    frame_condition_max: float = 1e8
    residual_tol: float = 1e-8
    fd_check: bool = False
    integration_step: float = 1e-3
    # bound on |a - Gamma(g)|, |d - Gamma(h)| and the swap checks
    connection_tol: float = 1e-8
    fd_tol: float = 1e-5
    # duality swap, reconstruction and lower-index symmetry checks
    swap_tol: float = 1e-10

    def __post_init__(self):
        for name in ("frame_condition_max", "residual_tol", "integration_step",
                     "connection_tol", "fd_tol", "swap_tol"):
            if not getattr(self, name) > 0:
                raise SpecError("must be positive", name)


@dataclass(frozen=True)
class SubmanifoldSpec:
    N: int
    ambient: AmbientForm
    r: VectorFunction
    n: VectorFunction
    name: str = ""

    def __post_init__(self):
        if self.N < 1:
            raise SpecError("must be >= 1", "N")
        if self.ambient.dim != 2 * self.N:
            raise SpecError(f"need {2 * self.N} signs for N = {self.N}", "signs")
        for label, v in (("r", self.r), ("n", self.n)):
            if v.ambient_dim != 2 * self.N:
                raise SpecError(f"need {2 * self.N} components, got {v.ambient_dim}", label)
            if v.param_dim != self.N:
                raise SpecError(f"parameter dimension {v.param_dim} != N = {self.N}", label)

    @classmethod
    def from_sources(cls, r: Sequence[str], n: Sequence[str], signs=None, name=""):
        N = len(r) // 2
        if N < 1 or len(r) != 2 * N:
            raise SpecError("r must have an even, positive number of components", "r")
        signs = (1,) * (2 * N) if signs is None else signs
        return cls(
            N,
            AmbientForm(tuple(signs)),
            VectorFunction.from_sources(r, N, "r"),
            VectorFunction.from_sources(n, N, "n"),
            name,
        )


def inner(form: AmbientForm, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (form.dim,) or y.shape != (form.dim,):
        raise DimensionMismatch(
            f"vectors of shape {x.shape}, {y.shape} for an ambient form of dim {form.dim}"
        )
    return float(np.dot(np.asarray(form.signs, dtype=float) * x, y))


@dataclass
class PointJets:
    """Derivatives of r and n at one point.

    ``r1[:, i]`` is r_i, ``r2[:, i, j]`` is r_ij and ``r3[:, i, j, l]`` is
    r_ijl (ambient index first); likewise for n.
    """

    u: np.ndarray
    r0: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    n0: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    n3: np.ndarray

    @property
    def frame(self) -> np.ndarray:
        return np.hstack([self.r1, self.n1])

    def swapped(self) -> PointJets:
        return PointJets(self.u, self.n0, self.n1, self.n2, self.n3,
                         self.r0, self.r1, self.r2, self.r3)


def _stack(jets):
    return (
        np.array([j.value for j in jets]),
        np.array([j.grad for j in jets]),
        np.array([j.hess for j in jets]),
        np.array([j.third for j in jets]),
    )


def point_jets(spec: SubmanifoldSpec, u) -> PointJets:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != spec.N:
        raise DimensionMismatch(f"point has dim {u.size}, expected N = {spec.N}")
    return PointJets(u, *_stack(eval_vector_jets(spec.r, u)), *_stack(eval_vector_jets(spec.n, u)))


def _gram(form, a, b):
    # a, b: (2N, N) column families
    return a.T @ (np.asarray(form.signs, dtype=float)[:, None] * b)


def _check_nondegenerate(m, which):
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0):
        raise DegeneracyError(which, 0.0)
    ratio = abs(np.linalg.det(m)) / np.prod(norms)
    if ratio < DEGENERACY_RATIO:
        raise DegeneracyError(which, ratio)


def fundamental_forms(spec_or_form, data, check: bool = True):
    """First fundamental form g and the normal metric h.

    ``spec_or_form`` is a :class:`SubmanifoldSpec` (then ``data`` is a point)
    or an :class:`AmbientForm` (then ``data`` is a :class:`PointJets`).
    """
    if isinstance(spec_or_form, SubmanifoldSpec):
        form, jets = spec_or_form.ambient, point_jets(spec_or_form, data)
    else:
        form, jets = spec_or_form, data
    g = _gram(form, jets.r1, jets.r1)
    h = _gram(form, jets.n1, jets.n1)
    if check:
        _check_nondegenerate(g, "g")
        _check_nondegenerate(h, "h")
    return g, h


def gram_derivatives(form: AmbientForm, v1, v2):
    """dG[l, i, j] = d_l (v_i, v_j) from first and second derivatives of v."""
    w = np.asarray(form.signs, dtype=float)
    # (v_il, v_j) + (v_i, v_jl)
    t = np.einsum("ail,a,aj->lij", v2, w, v1)
    return t + t.transpose(0, 2, 1)


@dataclass
class Decomposition:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    condition: float
    reconstruction: float
    lu: tuple = field(repr=False, default=None)
    x_r: np.ndarray = field(repr=False, default=None)  # (2N, N, N) solve of F x = r_ij
    x_n: np.ndarray = field(repr=False, default=None)


def solve_frame(F, r2, n2, condition_max: float = 1e8) -> Decomposition:
    """Expand second derivatives of r and n in the frame ``F``."""
    F = np.asarray(F, dtype=float)
    m = F.shape[0]
    N = m // 2
    if F.shape != (m, m) or m != 2 * N:
        raise DimensionMismatch(f"frame must be 2N x 2N, got {F.shape}")
    try:
        cond = float(np.linalg.cond(F))
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > condition_max:
        raise NonisotropyError(cond)
    lu = scipy.linalg.lu_factor(F, check_finite=True)
    rhs = np.concatenate([r2.reshape(m, N * N), n2.reshape(m, N * N)], axis=1)
    sol = scipy.linalg.lu_solve(lu, rhs)
    recon = F @ sol - rhs
    scale = 1.0 + np.linalg.norm(rhs, axis=0)
    reconstruction = float(np.max(np.linalg.norm(recon, axis=0) / scale))
    x_r = sol[:, : N * N].reshape(m, N, N)
    x_n = sol[:, N * N :].reshape(m, N, N)
    return Decomposition(
        a=x_r[:N], b=x_r[N:], c=x_n[:N], d=x_n[N:],
        condition=cond, reconstruction=reconstruction, lu=lu, x_r=x_r, x_n=x_n,
    )


def decompose(spec: SubmanifoldSpec, u, condition_max: float = 1e8):
    """Coefficients (a, b, c, d) of the Gauss and Weingarten decompositions at u."""
    jets = point_jets(spec, u)
    dec = solve_frame(jets.frame, jets.r2, jets.n2, condition_max)
    return dec.a, dec.b, dec.c, dec.d


def levi_civita(metric, metric_derivs) -> np.ndarray:
    """Christoffel symbols ``gamma[k, i, j]`` of a metric.

    ``metric_derivs[l, i, j]`` is d_l g_ij at the same point.
    """
    g = np.asarray(metric, dtype=float)
    dg = np.asarray(metric_derivs, dtype=float)
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError:
        raise DegeneracyError("metric", 0.0) from None
    # lowered[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    lowered = dg.transpose(2, 0, 1) + dg.transpose(2, 1, 0) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, lowered)


def connection_matrices(a, b, c, d) -> np.ndarray:
    """Stack of A_i = [[a_i, b_i], [c_i, d_i]] with a_i[j, k] = a[k, i, j]."""
    blocks = [np.transpose(t, (1, 2, 0)) for t in (a, b, c, d)]  # [i, j, k]
    top = np.concatenate([blocks[0], blocks[1]], axis=2)
    bottom = np.concatenate([blocks[2], blocks[3]], axis=2)
    return np.concatenate([top, bottom], axis=1)


def connection_derivatives(jets: PointJets, dec: Decomposition) -> np.ndarray:
    """dA[l, i] = d_l A_i, from the differentiated frame solve.

    Differentiating F x = s gives F (d_l x) = d_l s - (d_l F) x, solved with
    the factorization already computed for the point.
    """
    m = jets.r1.shape[0]
    N = m // 2
    # d_l F: columns r_kl and n_kl -> dF[:, :, l]
    dF = np.concatenate([jets.r2, jets.n2], axis=1)  # (m, 2N, N): [a, col, l]
    dxs = []
    for x, s3 in ((dec.x_r, jets.r3), (dec.x_n, jets.n3)):
        # rhs[a, i, j, l] = s_ijl - sum_col dF[a, col, l] x[col, i, j]
        rhs = s3 - np.einsum("acl,cij->aijl", dF, x)
        dx = scipy.linalg.lu_solve(dec.lu, rhs.reshape(m, -1)).reshape(m, N, N, N)
        dxs.append(dx)  # [col, i, j, l]
    dx_r, dx_n = dxs
    da, db = dx_r[:N], dx_r[N:]
    dc, dd = dx_n[:N], dx_n[N:]
    # derivative tensors are [k, i, j, l]; reuse connection_matrices per l
    return np.stack(
        [connection_matrices(da[..., l], db[..., l], dc[..., l], dd[..., l]) for l in range(N)]
    )


def zero_curvature_blocks(A, dA):
    """Max-norms (gauss, codazzi, ricci) of R_ij over all i < j."""
    A = np.asarray(A, dtype=float)
    dA = np.asarray(dA, dtype=float)
    N = A.shape[0]
    m = A.shape[1]
    half = m // 2
    gauss = codazzi = ricci = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            R = dA[j, i] - dA[i, j] + A[i] @ A[j] - A[j] @ A[i]
            gauss = max(gauss, float(np.max(np.abs(R[:half, :half]))))
            codazzi = max(
                codazzi,
                float(np.max(np.abs(R[:half, half:]))),
                float(np.max(np.abs(R[half:, :half]))),
            )
            ricci = max(ricci, float(np.max(np.abs(R[half:, half:]))))
    return gauss, codazzi, ricci


def curvature_residual(spec: SubmanifoldSpec, u, condition_max: float = 1e8):
    """(gauss, codazzi, ricci) residuals of the frame system at u."""
    jets = point_jets(spec, u)
    dec = solve_frame(jets.frame, jets.r2, jets.n2, condition_max)
    A = connection_matrices(dec.a, dec.b, dec.c, dec.d)
    return zero_curvature_blocks(A, connection_derivatives(jets, dec))


def dualize(spec: SubmanifoldSpec) -> SubmanifoldSpec:
    """The same submanifold data with the roles of r and n exchanged."""
    name = spec.name[:-5] if spec.name.endswith(":dual") else (spec.name + ":dual" if spec.name else "")
    return replace(
        spec,
        r=replace(spec.n, name="r"),
        n=replace(spec.r, name="n"),
        name=name,
    )


@dataclass
class PointAnalysis:
    u: np.ndarray
    g: np.ndarray
    h: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    gauss_residual: float
    codazzi_residual: float
    ricci_residual: float
    levi_civita_defect_a: float
    levi_civita_defect_d: float
    orthogonality_defect: float
    frame_condition: float
    reconstruction: float
    symmetry_defect: float
    fd_defect: float | None = None

    def scalars(self) -> dict:
        out = {
            "gauss_residual": self.gauss_residual,
            "codazzi_residual": self.codazzi_residual,
            "ricci_residual": self.ricci_residual,
            "levi_civita_defect_a": self.levi_civita_defect_a,
            "levi_civita_defect_d": self.levi_civita_defect_d,
            "orthogonality_defect": self.orthogonality_defect,
            "frame_condition": self.frame_condition,
            "reconstruction": self.reconstruction,
            "symmetry_defect": self.symmetry_defect,
        }
        if self.fd_defect is not None:
            out["fd_defect"] = self.fd_defect
        return out

    def tensors(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("g", "h", "a", "b", "c", "d")}


def orthogonality_defect(form: AmbientForm, r1, n1) -> tuple[float, bool]:
    """max |(r_i, n_j)| and whether it passes the scale-aware tolerance."""
    cross = np.abs(_gram(form, r1, n1))
    scale = 1.0 + np.outer(np.linalg.norm(r1, axis=0), np.linalg.norm(n1, axis=0))
    return float(np.max(cross)), bool(np.all(cross <= 1e-9 * scale))


def _lower_symmetry(t):
    return float(np.max(np.abs(t - t.transpose(0, 2, 1))))


def _fd_second_derivatives(v: VectorFunction, u, step):
    N = v.param_dim
    out = np.empty((v.ambient_dim, N, N))
    for a, comp in enumerate(v.components):
        f = lambda x, comp=comp: eval_real(comp, x)
        for i in range(N):
            for j in range(i, N):
                out[a, i, j] = out[a, j, i] = fd_partials(f, u, 2, (i, j), step)
    return out


def analyze_point(spec: SubmanifoldSpec, u, tol: ToleranceConfig | None = None) -> PointAnalysis:
    """Every tensor and consistency defect of the local theory at ``u``.

    Raises :class:`OrthogonalityError` when the partials of n are not normal
    to the submanifold, and the degeneracy / nonisotropy errors of the
    underlying steps.
    """
    tol = tol or ToleranceConfig()
    u = np.asarray(u, dtype=float).reshape(-1)
    try:
        jets = point_jets(spec, u)
        form = spec.ambient
        ortho, ok = orthogonality_defect(form, jets.r1, jets.n1)
        if not ok:
            raise OrthogonalityError(ortho)
        g, h = fundamental_forms(form, jets)
        dec = solve_frame(jets.frame, jets.r2, jets.n2, tol.frame_condition_max)
        A = connection_matrices(dec.a, dec.b, dec.c, dec.d)
        gauss, codazzi, ricci = zero_curvature_blocks(A, connection_derivatives(jets, dec))
        gamma_g = levi_civita(g, gram_derivatives(form, jets.r1, jets.r2))
        gamma_h = levi_civita(h, gram_derivatives(form, jets.n1, jets.n2))
        symmetry = max(
            float(np.max(np.abs(g - g.T))),
            float(np.max(np.abs(h - h.T))),
            *(_lower_symmetry(t) for t in (dec.a, dec.b, dec.c, dec.d)),
        )
        fd_defect = None
        if tol.fd_check:
            fd = solve_frame(
                jets.frame,
                _fd_second_derivatives(spec.r, u, None),
                _fd_second_derivatives(spec.n, u, None),
                tol.frame_condition_max,
            )
            fd_defect = max(
                float(np.max(np.abs(x - y)))
                for x, y in ((fd.a, dec.a), (fd.b, dec.b), (fd.c, dec.c), (fd.d, dec.d))
            )
    except PotnormalsError as exc:
        exc.u = u.tolist()
        raise
    return PointAnalysis(
        u=u, g=g, h=h, a=dec.a, b=dec.b, c=dec.c, d=dec.d,
        gauss_residual=gauss, codazzi_residual=codazzi, ricci_residual=ricci,
        levi_civita_defect_a=float(np.max(np.abs(dec.a - gamma_g))),
        levi_civita_defect_d=float(np.max(np.abs(dec.d - gamma_h))),
        orthogonality_defect=ortho,
        frame_condition=dec.condition,
        reconstruction=dec.reconstruction,
        symmetry_defect=symmetry,
        fd_defect=fd_defect,
    )
