"""Dense operator algebra for a single spin J or a d-level system.

Basis convention: |J, m> with m running from J down to -J, so jz is
diag(J, J-1, ..., -J). Commutators follow [j_a, j_b] = i eps_abc j_c.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal


def _check_half_integer(J):
    twoJ = 2 * J
    if J < 0 or abs(twoJ - round(twoJ)) > 1e-12:
        raise ValueError(f"spin must be a non-negative half-integer, got {J}")
    return round(twoJ) / 2


@dataclass(frozen=True)
class SpinOperatorSet:
    J: float
    dim: int
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray

    @property
    def ops(self):
        return (self.jx, self.jy, self.jz)

    def along(self, axis):
        """Component n.J for a 3-vector n."""
        n = np.asarray(axis, dtype=float)
        return n[0] * self.jx + n[1] * self.jy + n[2] * self.jz


@dataclass(frozen=True)
class GeneratorBasis:
    d: int
    generators: tuple


def m_values(J):
    J = _check_half_integer(J)
    return J - np.arange(int(round(2 * J)) + 1)


def ladder_elements(J):
    """Off-diagonal entries <J,m+1|J_+|J,m> along the superdiagonal."""
    m = m_values(J)
    return np.sqrt(J * (J + 1) - m[1:] * (m[1:] + 1))


def spin_matrices(J):
    """Return jx, jy, jz for spin J built from the ladder operators."""
    J = _check_half_integer(J)
    dim = int(round(2 * J)) + 1
    jp = np.diag(ladder_elements(J), 1).astype(complex)
    jm = jp.conj().T
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    jz = np.diag(m_values(J)).astype(complex)
    return SpinOperatorSet(J, dim, jx, jy, jz)


def gellmann_basis(d):
    """Generalized Gell-Mann matrices normalized to Tr(g_k g_l) = 2 delta_kl."""
    if d < 2 or int(d) != d:
        raise ValueError("d must be an integer >= 2")
    d = int(d)
    gens = []
    for a in range(d):
        for b in range(a + 1, d):
            s = np.zeros((d, d), complex)
            s[a, b] = s[b, a] = 1
            gens.append(s)
            t = np.zeros((d, d), complex)
            t[a, b] = -1j
            t[b, a] = 1j
            gens.append(t)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        gens.append(np.diag(diag * np.sqrt(2 / (l * (l + 1)))).astype(complex))
    return GeneratorBasis(d, tuple(gens))


def _check_hermitian(H, tol=1e-10):
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > tol * max(1.0, np.max(np.abs(H))):
        raise ValueError("matrix is not Hermitian")
    return H


def fix_phase(v, tol=1e-12):
    """Rotate the global phase so the first non-negligible entry is real positive."""
    v = np.asarray(v, dtype=complex)
    idx = np.flatnonzero(np.abs(v) > tol)
    if idx.size == 0:
        return v
    ph = v[idx[0]] / abs(v[idx[0]])
    return v / ph


def ground_state(H):
    """Smallest eigenvalue of a Hermitian matrix and a phase-fixed eigenvector."""
    H = _check_hermitian(H)
    w, v = np.linalg.eigh(H)
    return float(w[0]), fix_phase(v[:, 0])


def expect(state, op):
    return float(np.real(np.vdot(state, op @ state)))


def rotate_state(state, axis, angle, ops):
    """Apply exp(-i angle n.J) to a state vector."""
    state = np.asarray(state, dtype=complex)
    if state.shape != (ops.dim,):
        raise ValueError(f"state has shape {state.shape}, expected ({ops.dim},)")
    n = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ValueError("rotation axis must be non-zero")
    w, v = np.linalg.eigh(ops.along(n / norm))
    out = v @ (np.exp(-1j * angle * w) * (v.conj().T @ state))
    return out / np.linalg.norm(out)


def rotation_matrix(axis, angle):
    """SO(3) matrix for a right-handed rotation about axis by angle."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    K = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def random_rotation(rng):
    """Haar-random SO(3) matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def displaced_ground_tridiagonal(J, a, mu):
    """Ground state of (L_x - a)^2 + mu L_z for spin J.

    Works in the L_x eigenbasis, where the problem is a real symmetric
    tridiagonal matrix: (L_x - a)^2 is diagonal and L_z has the same
    matrix elements as L_x has in the L_z basis. Returns
    (energy, <L_x>, <L_x^2>, <L_z>).
    """
    m = m_values(J)
    off = 0.5 * ladder_elements(J)
    if m.size == 1:
        return float(m[0] ** 2), 0.0, 0.0, 0.0
    d = (m - a) ** 2
    w, v = eigh_tridiagonal(d, mu * off, select="i", select_range=(0, 0))
    psi = v[:, 0]
    p = psi * psi
    mean_x = float(p @ m)
    mean_x2 = float(p @ m ** 2)
    mean_z = float(2 * np.sum(psi[:-1] * psi[1:] * off))
    return float(w[0]), mean_x, mean_x2, mean_z
