"""Moment-based separability criteria for ensembles of spin-j particles.

Slacks follow the convention "left side minus bound": a negative slack
means the inequality is violated and the state is entangled. The
*_arrays functions accept stacked moments with arbitrary leading axes
(mean (...,3), C (...,3,3), local (...,3)) and are what the MomentData
entry points call.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import minimize

from .spin_ops import rotation_matrix

AXES = ("x", "y", "z")
SUBSETS = tuple(tuple(i for i in range(3) if mask[i]) for mask in product((0, 1), repeat=3))
_MASK = np.array([[l in I for l in range(3)] for I in SUBSETS], dtype=float)


@dataclass(frozen=True)
class SsiReport:
    slacks: np.ndarray
    violated: np.ndarray
    axes: np.ndarray
    compact: dict

    @property
    def entangled(self):
        return bool(np.any(self.violated))


@dataclass(frozen=True)
class XiGResult:
    value: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    trace_gamma: float

    @property
    def squeezed_directions(self):
        return self.eigenvectors[:, self.eigenvalues < 0].T


@dataclass(frozen=True)
class NotApplicable:
    """A parameter whose denominator is not positive; it cannot detect anything."""

    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True)
class FluctuatingEnsemble:
    """Mixture of fixed-N components given as (weight, MomentData) pairs."""

    components: tuple

    def __post_init__(self):
        w = np.array([c[0] for c in self.components], dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        js = {c[1].j for c in self.components}
        if len(js) != 1:
            raise ValueError("all components must share the particle spin")

    @property
    def mean_N(self):
        return float(sum(w * md.N for w, md in self.components))

    @property
    def spin_j(self):
        return self.components[0][1].j


def _frame(axes):
    if axes is None:
        return np.eye(3)
    O = np.asarray(axes, dtype=float)
    if np.max(np.abs(O @ O.T - np.eye(3))) > 1e-10:
        raise ValueError("axes must form an orthonormal frame")
    return O


def _diag(C):
    return np.diagonal(C, axis1=-2, axis2=-1)


# ---------------------------------------------------------------- array cores

def compact_arrays(mean, C, local, N, j):
    """Compact-set slacks for the 8 subsets I, shape (..., 8)."""
    Jt2 = _diag(C) - local
    Dt2 = Jt2 - mean ** 2
    inside = Dt2 @ _MASK.T
    outside = Jt2 @ (1 - _MASK).T
    return (N - 1) * inside - outside + N * (N - 1) * j * j


def complete_set_arrays(mean, C, local, N, j):
    """The four complete-set slacks (a)-(d), shape (..., 4); (c), (d) minimized over m."""
    c = _diag(C)
    var = c - mean ** 2
    nj = N * j
    a = nj * (nj + 1) - c.sum(-1)
    b = var.sum(-1) - nj
    cs, ds = [], []
    for m in range(3):
        k, l = [i for i in range(3) if i != m]
        cs.append((N - 1) * var[..., m] - N * local[..., m] - (c[..., k] + c[..., l] - nj * (nj + 1)))
        ds.append((N - 1) * (var[..., k] + var[..., l])
                  - (c[..., m] - N * local[..., m] + N * (N - 1) * j))
    return np.stack([a, b, np.min(cs, axis=0), np.min(ds, axis=0)], axis=-1)


def xi_G_arrays(mean, C, Q, N, j):
    """xi_G^2 for stacked moments; also returns the eigen-decomposition of Z."""
    Gamma = C - mean[..., :, None] * mean[..., None, :]
    X = (N - 1) * Gamma + C - N * N * Q
    Z = X / (N - 1)
    w, v = np.linalg.eigh((Z + np.swapaxes(Z, -1, -2)) / 2)
    tr = np.trace(Gamma, axis1=-2, axis2=-1)
    return (tr - np.where(w > 0, w, 0).sum(-1)) / (N * j), w, v


def named_arrays(mean, C, local, N, j):
    """Named parameters as arrays; denominators that are not positive
    (beyond rounding, relative to (Nj)^2) give nan."""
    c = _diag(C)
    var = c - mean ** 2
    Jt2 = c - local
    Dt2 = Jt2 - mean ** 2
    mx, my, mz = mean[..., 0], mean[..., 1], mean[..., 2]
    perp = my * my + mz * mz

    eps = 1e-12 * (N * j) ** 2

    def ratio(num, den):
        den = np.asarray(den, dtype=float)
        ok = den > eps
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(ok, num / np.where(ok, den, 1.0), np.nan)

    return {
        "xi_orig": ratio(2 * N * j * var[..., 0], perp),
        "xi_ent_j": ratio(N * (Dt2[..., 0] + N * j * j), perp),
        "xi_dicke_j": ratio((N - 1) * (Dt2[..., 0] + N * j * j), Jt2[..., 1] + Jt2[..., 2]),
        "xi_planar_j": ratio((N - 1) * (Dt2[..., 0] + Dt2[..., 1] + 2 * N * j * j),
                             Jt2[..., 2] + N * (N - 1) * j * j),
        "xi_singlet_j": var.sum(-1) / (N * j),
        "xi_P": ratio(N * j * (var[..., 0] + var[..., 1]), mx * mx + my * my),
        "xi_T": var.sum(-1) / (N * j),
    }


def two_body_arrays(mean, C, Q, N, j):
    """Slacks N sum_{l in I}(<j_l (x) j_l> - <j_l>^2) - (Sigma - j^2), shape (..., 8)."""
    c = (_diag(C) - N * _diag(Q)) / (N * (N - 1))
    m = mean / N
    sigma = c.sum(-1)
    return N * ((c - m * m) @ _MASK.T) - (sigma - j * j)[..., None]


def ppt_arrays(mean, C, Q, N):
    """Smallest eigenvalue of <j_k (x) j_l>_av2 - <j_k><j_l> (spin-component operators)."""
    c = (C - N * Q) / (N * (N - 1))
    m = mean / N
    K = c - m[..., :, None] * m[..., None, :]
    return np.linalg.eigvalsh((K + np.swapaxes(K, -1, -2)) / 2)[..., 0]


# ------------------------------------------------------------ MomentData API

def modified_moments(md):
    """Return (<J~_k^2>, (Delta~ J_k)^2) for the three axes."""
    Jt2 = np.diag(md.C) - md.local
    return Jt2, Jt2 - md.mean ** 2


def compact_slacks(md, axes=None):
    """(N-1) sum_{l in I} Delta~^2_l - sum_{l not in I} <J~_l^2> + N(N-1) j^2 for all 8 I."""
    m = md.rotated(_frame(axes))
    vals = compact_arrays(m.mean, m.C, m.local, m.N, m.j)
    return {I: float(v) for I, v in zip(SUBSETS, vals)}


def ssi_set_check(md, axes=None, tol=0.0):
    """Complete set of generalized spin squeezing inequalities in a given frame.

    Slack order: (a) sum <J_k^2> <= Nj(Nj+1); (b) sum of variances >= Nj;
    (c) <J_k^2> + <J_l^2> - Nj(Nj+1) <= (N-1)(Delta J_m)^2 - N sum_n <(j_m^(n))^2>;
    (d) (N-1)[(Delta J_k)^2 + (Delta J_l)^2] >= <J_m^2> - N sum_n <(j_m^(n))^2> + N(N-1)j.
    For (c) and (d) the smallest value over the three choices of m is kept.
    """
    O = _frame(axes)
    m = md.rotated(O)
    slacks = complete_set_arrays(m.mean, m.C, m.local, m.N, m.j)
    return SsiReport(slacks, slacks < -tol, O, compact_slacks(md, O))


def euler_frame(angles):
    a, b, c = angles
    R = rotation_matrix((0, 0, 1), a) @ rotation_matrix((0, 1, 0), b) @ rotation_matrix((0, 0, 1), c)
    return R.T


def search_frame(md, step_deg=10.0):
    """Frame minimizing the smallest complete-set slack.

    An Euler-angle grid is scanned in one batch and the best point is
    refined with Nelder-Mead. Returns (SsiReport, frame).
    """
    st = np.deg2rad(step_deg)
    A = np.arange(0, 2 * np.pi, st)
    B = np.arange(0, np.pi + 1e-9, st)
    Cg = np.arange(0, np.pi, st)
    grid = np.array(np.meshgrid(A, B, Cg, indexing="ij")).reshape(3, -1).T
    Os = np.array([euler_frame(g) for g in grid])
    mean = Os @ md.mean
    C = Os @ md.C @ np.swapaxes(Os, 1, 2)
    Q = Os @ md.Q @ np.swapaxes(Os, 1, 2)
    local = md.N * _diag(Q)
    vals = complete_set_arrays(mean, C, local, md.N, md.j).min(-1)
    k = int(np.argmin(vals))

    def f(angles):
        return float(np.min(ssi_set_check(md, euler_frame(angles)).slacks))

    res = minimize(f, grid[k], method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12})
    best = res.x if res.fun < vals[k] else grid[k]
    O = euler_frame(best)
    return ssi_set_check(md, O), O


def x_matrix(md):
    """(N-1) Gamma + C - N^2 Q."""
    N = md.N
    return (N - 1) * md.Gamma + md.C - N * N * md.Q


def xi_G(md):
    """Optimal rotationally invariant spin squeezing parameter."""
    if md.N < 2:
        raise ValueError("xi_G needs N >= 2")
    v, w, vec = xi_G_arrays(md.mean, md.C, md.Q, md.N, md.j)
    return XiGResult(float(v), w, vec, float(np.trace(md.Gamma)))


def rotation_invariance_check(md, O, tol=1e-8):
    O = np.asarray(O, dtype=float)
    if np.max(np.abs(O @ O.T - np.eye(3))) > 1e-9:
        raise ValueError("O is not orthogonal")
    return abs(xi_G(md.rotated(O)).value - xi_G(md).value) < tol


def xi_G_fluctuating(ens):
    """Rotationally invariant parameter for a mixture of particle numbers."""
    mean = np.zeros(3)
    C = np.zeros((3, 3))
    Cw = np.zeros((3, 3))
    Qw = np.zeros((3, 3))
    for w, md in ens.components:
        N = md.N
        if N < 2:
            raise ValueError("every component needs N >= 2")
        mean += w * md.mean
        C += w * md.C
        Cw += w * md.C / (N - 1)
        Qw += w * N * N * md.Q / (N - 1)
    Gamma = C - np.outer(mean, mean)
    w, _ = np.linalg.eigh(Gamma + Cw - Qw)
    return float((np.trace(Gamma) - w[w > 0].sum()) / (ens.mean_N * ens.spin_j))


def named_parameters(md, axes=None):
    """Named squeezing parameters in the frame given by axes.

    x is the squeezed axis (x and y for the planar forms). A parameter
    whose denominator is not positive comes back as NotApplicable.

    Separable states give values >= 1, except that xi_P is bounded by
    1/2, and xi_orig and xi_P certify entanglement only for j = 1/2:
    a single spin-1 can already push both below their qubit bounds.
    """
    m = md.rotated(_frame(axes))
    vals = named_arrays(m.mean, m.C, m.local, m.N, m.j)
    return {k: (NotApplicable(f"{k}: denominator is not positive") if np.isnan(v) else float(v))
            for k, v in vals.items()}


def map_half_to_j(means, Jt2, j):
    """Rescale (<J_l>, <J~_l^2>) of spin-j particles to the spin-1/2 scale."""
    if j <= 0:
        raise ValueError("j must be positive")
    return np.asarray(means, dtype=float) / (2 * j), np.asarray(Jt2, dtype=float) / (4 * j * j)


def compact_from_modified(means, Jt2, N, j):
    """Compact-set slacks from (<J_l>, <J~_l^2>) directly."""
    means = np.asarray(means, float)
    Jt2 = np.asarray(Jt2, float)
    Dt2 = Jt2 - means ** 2
    return (N - 1) * (Dt2 @ _MASK.T) - Jt2 @ (1 - _MASK).T + N * (N - 1) * j * j


def polytope_vertices(mean, N, j):
    """Vertices A_k, B_k of the separable polytope in <J~_l^2> space."""
    mean = np.asarray(mean, dtype=float)
    kappa = (N - 1) / N
    out = {}
    for k in range(3):
        others = [i for i in range(3) if i != k]
        s = sum(mean[i] ** 2 for i in others)
        A = np.empty(3)
        B = np.empty(3)
        A[k] = N * (N - 1) * j * j - kappa * s
        B[k] = mean[k] ** 2 + s / N
        for i in others:
            A[i] = B[i] = kappa * mean[i] ** 2
        out["A" + AXES[k]] = A
        out["B" + AXES[k]] = B
    return out


def ti_moments(corr, means, q):
    """Fourier-summed modified moments of a chain.

    corr[l, n, m] = <j_l^(n) j_l^(m)>, shape (3, N, N); means[l, n] = <j_l^(n)>.
    Returns (<J~_TI^2>(q), |<J_TI>(q)|^2), each of length 3.
    """
    corr = np.asarray(corr)
    if corr.ndim != 3 or corr.shape[0] != 3 or corr.shape[1] != corr.shape[2]:
        raise ValueError("corr must have shape (3, N, N)")
    if np.max(np.abs(corr - np.conj(np.transpose(corr, (0, 2, 1))))) > 1e-9:
        raise ValueError("correlation tensor is not Hermitian")
    N = corr.shape[1]
    n = np.arange(N)
    phase = np.exp(1j * q * (n[:, None] - n[None, :]))
    np.fill_diagonal(phase, 0)
    jt2 = np.real(np.einsum("nm,lnm->l", phase, corr))
    mq = np.asarray(means) @ np.exp(1j * q * n)
    return jt2, np.abs(mq) ** 2


def correlations_from_distance(cd, means, N):
    """Periodic chain with corr[l, n, m] = cd[l][(n - m) mod N] and uniform means."""
    cd = np.asarray(cd, dtype=float)
    n = np.arange(N)
    d = (n[:, None] - n[None, :]) % N
    corr = np.stack([cd[l][d] for l in range(3)])
    return corr, np.repeat(np.asarray(means, float)[:, None], N, axis=1)


def ti_ssi_check(corr, means, q, I, j):
    """Translation-invariant compact inequality for subset I at wave number q."""
    jt2, m2 = ti_moments(corr, means, q)
    N = np.asarray(corr).shape[1]
    dt2 = jt2 - m2
    return float((N - 1) * sum(dt2[l] for l in I)
                 - sum(jt2[l] for l in range(3) if l not in I) + N * (N - 1) * j * j)


def sud_ssi_check(G_means, G_second, local_g, N, d, I):
    """su(d) compact inequality for the subset I of generator indices.

    G_second[k] = <G_k^2> and local_g[k] = sum_n <(g_k^(n))^2>.
    """
    G_means = np.asarray(G_means, float)
    G_second = np.asarray(G_second, float)
    local_g = np.asarray(local_g, float)
    n = d * d - 1
    if not (G_means.shape == G_second.shape == local_g.shape == (n,)):
        raise ValueError(f"expected {n} generator moments")
    I = set(I)
    if any(k < 0 or k >= n for k in I):
        raise ValueError("generator index out of range")
    Gt2 = G_second - local_g
    Dt2 = Gt2 - G_means ** 2
    return float((N - 1) * sum(Dt2[k] for k in I)
                 - sum(Gt2[k] for k in range(n) if k not in I) + 2 * N * (N - 1) * (d - 1) / d)


def sud_best_slack(G_means, G_second, local_g, N, d):
    """Most violated su(d) inequality; I collects the generators where inclusion lowers the slack."""
    Gt2 = np.asarray(G_second, float) - np.asarray(local_g, float)
    Dt2 = Gt2 - np.asarray(G_means, float) ** 2
    I = [k for k in range(d * d - 1) if (N - 1) * Dt2[k] < -Gt2[k]]
    return sud_ssi_check(G_means, G_second, local_g, N, d, I), I


def linear_depth_check(md, k):
    """Linear k-producibility inequality for permutationally invariant states."""
    N, j = md.N, md.j
    if not 1 <= k < N:
        raise ValueError("k must satisfy 1 <= k < N")
    Jt2, _ = modified_moments(md)
    mz = md.mean[2]
    return float((N - k) / k * ((N - k) / (N - 1) * Jt2[2] - mz * mz)
                 - (N - k) / (N - 1) * (Jt2[0] + Jt2[1]) + N * (N - k) * j * j)


def av2_correlations(md):
    """<j_k (x) j_l> in the average two-particle state, and <j_k> per particle."""
    N = md.N
    if N < 2:
        raise ValueError("two-body moments need N >= 2")
    return (md.C - N * md.Q) / (N * (N - 1)), md.mean / N


def two_body_form(md):
    """Two-body slacks for all 8 subsets, plus the av2 diagonal correlations and means."""
    if md.N < 2:
        raise ValueError("two-body moments need N >= 2")
    vals = two_body_arrays(md.mean, md.C, md.Q, md.N, md.j)
    c, m = av2_correlations(md)
    return {I: float(v) for I, v in zip(SUBSETS, vals)}, np.diag(c), m


def ppt_symmetric_check(c=None, m=None, rho=None):
    """Minimum of <A (x) A> - <A (x) 1>^2 over normalized Hermitian A.

    With c (3x3 two-body spin correlations) and m (single-particle means)
    A ranges over unit combinations of spin components and the minimum
    is an eigenvalue. With a 4x4 two-qubit rho, A ranges over all
    Hermitian 2x2 matrices of unit Hilbert-Schmidt norm.
    """
    if rho is None:
        c = np.asarray(c, float)
        m = np.asarray(m, float)
        K = (c + c.T) / 2 - np.outer(m, m)
        return float(np.linalg.eigvalsh(K)[0])
    rho = np.asarray(rho, complex)
    if rho.shape != (4, 4):
        raise ValueError("rho must be 4x4")
    w = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    if w[0] < -1e-9 or abs(np.trace(rho).real - 1) > 1e-9:
        raise ValueError("rho is not a density matrix")
    basis = [np.eye(2) / np.sqrt(2),
             np.array([[0, 1], [1, 0]]) / np.sqrt(2),
             np.array([[0, -1j], [1j, 0]]) / np.sqrt(2),
             np.array([[1, 0], [0, -1]]) / np.sqrt(2)]
    r1 = rho.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)
    one = np.array([np.real(np.trace(r1 @ b)) for b in basis])
    K = np.empty((4, 4))
    for a, b in product(range(4), repeat=2):
        K[a, b] = np.real(np.trace(rho @ np.kron(basis[a], basis[b])))
    K = (K + K.T) / 2 - np.outer(one, one)
    return float(np.linalg.eigvalsh(K)[0])


def concurrence_symmetric(corr_xx, corr_yy, corr_zz, mean_z):
    """Nearest-neighbour concurrence of a translation, parity and reflection invariant chain.

    Inputs are Pauli expectations <s_x s_x>, <s_y s_y>, <s_z s_z> and <s_z>.
    """
    c1 = abs(corr_xx + corr_yy) - np.sqrt(max((1 + corr_zz) ** 2 - 4 * mean_z ** 2, 0.0))
    c2 = abs(corr_xx - corr_yy) - abs(1 - corr_zz)
    return 0.5 * max(0.0, c1, c2)
