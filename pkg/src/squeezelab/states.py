"""Reference many-body states and their collective-spin moment data.

Permutationally symmetric states of N spin-j particles that live in the
maximal multiplet J = N j are handled in the (2Nj+1)-dimensional symmetric
sector. Their single-particle moments follow from the two-body ones by
viewing each spin-j as 2j symmetrized qubits.
"""

from dataclasses import dataclass, field

import numpy as np

from .spin_ops import (
    _check_half_integer,
    expect,
    ground_state,
    spin_matrices,
)


@dataclass(frozen=True)
class MomentData:
    """First and second collective moments of an N-particle spin-j state.

    C is the symmetrized second-moment matrix <(J_k J_l + J_l J_k)/2>,
    Q the particle-averaged single-particle second-moment matrix and
    local the vector of summed single-particle second moments
    sum_n <(j_k^(n))^2>. For valid data local = N diag(Q).
    """

    n_particles: float
    spin_j: float
    mean: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    local: np.ndarray = field(default=None)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(3)
        C = np.asarray(self.C, dtype=float).reshape(3, 3)
        Q = np.asarray(self.Q, dtype=float).reshape(3, 3)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "C", (C + C.T) / 2)
        object.__setattr__(self, "Q", (Q + Q.T) / 2)
        if self.local is None:
            loc = self.n_particles * np.diag(Q)
        else:
            loc = np.asarray(self.local, dtype=float).reshape(3)
        object.__setattr__(self, "local", loc)

    @property
    def N(self):
        return self.n_particles

    @property
    def j(self):
        return self.spin_j

    @property
    def Gamma(self):
        return self.C - np.outer(self.mean, self.mean)

    @property
    def variances(self):
        return np.diag(self.Gamma)

    def rotated(self, O):
        """Moments in a frame rotated by the orthogonal matrix O."""
        O = np.asarray(O, dtype=float)
        if np.max(np.abs(O @ O.T - np.eye(3))) > 1e-9:
            raise ValueError("O is not orthogonal")
        Q = O @ self.Q @ O.T
        return MomentData(self.N, self.j, O @ self.mean, O @ self.C @ O.T, Q, self.N * np.diag(Q))

    def validate(self, tol=1e-9):
        """Return a list of violated invariants (empty when valid)."""
        N, j = self.N, self.j
        scale = max(1.0, N * N * j * j)
        problems = []
        if np.min(np.linalg.eigvalsh(self.Gamma)) < -tol * scale:
            problems.append("covariance matrix is not positive semidefinite")
        if np.linalg.norm(self.mean) > N * j + tol * scale:
            problems.append("mean spin exceeds N j")
        if abs(np.trace(self.Q) - j * (j + 1)) > tol * max(1.0, j * j):
            problems.append("trace of Q differs from j(j+1)")
        if np.max(np.abs(self.local - N * np.diag(self.Q))) > tol * scale:
            problems.append("local moments differ from N diag(Q)")
        return problems


def _frame_from_axis(axis):
    n = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ValueError("axis must be non-zero")
    return n / norm


def css_moments(N, j, axis=(0, 0, 1)):
    """Coherent spin state of N spin-j particles polarized along axis."""
    if N < 1:
        raise ValueError("N must be >= 1")
    j = _check_half_integer(j)
    n = _frame_from_axis(axis)
    P = np.outer(n, n)
    mean = N * j * n
    Gamma = N * j / 2 * (np.eye(3) - P)
    Q = j * j * P + j / 2 * (np.eye(3) - P)
    return MomentData(N, j, mean, Gamma + np.outer(mean, mean), Q)


def dicke_moments(N, m, axis=(0, 0, 1)):
    """Symmetric Dicke state |D_N^m> of N qubits with m excitations.

    The quantization axis sets the direction of <J> = (m - N/2) axis.
    """
    if not 0 <= m <= N:
        raise ValueError("m must satisfy 0 <= m <= N")
    n = _frame_from_axis(axis)
    P = np.outer(n, n)
    J = N / 2
    mz = m - N / 2
    czz = mz * mz
    cperp = (J * (J + 1) - czz) / 2
    C = czz * P + cperp * (np.eye(3) - P)
    return MomentData(N, 0.5, mz * n, C, np.eye(3) / 4)


def symmetric_single_particle_Q(C, N, j):
    """Q for a state in the maximal multiplet J = N j from its C matrix."""
    M = int(round(2 * N * j))
    if M < 2:
        return np.eye(3) / 4
    c2 = (np.asarray(C) - M / 4 * np.eye(3)) / (M * (M - 1))
    k = int(round(2 * j))
    return k / 4 * np.eye(3) + k * (k - 1) * c2


def unpolarized_dicke_moments(N, j, axis=(0, 0, 1)):
    """Moments of |J = Nj, M = 0> along axis, in closed form."""
    j = _check_half_integer(j)
    if abs(N * j - round(N * j)) > 1e-12:
        raise ValueError("N j must be an integer")
    n = _frame_from_axis(axis)
    P = np.outer(n, n)
    J = N * j
    C = J * (J + 1) / 2 * (np.eye(3) - P)
    qzz = (N - 1) * j * j / (2 * j * N - 1) if 2 * j * N > 1 else j * j
    qxx = (j * (j + 1) - qzz) / 2
    Q = qzz * P + qxx * (np.eye(3) - P)
    return MomentData(N, j, np.zeros(3), C, Q)


def singlet_moments(N, j):
    """Permutation-invariant many-body singlet."""
    j = _check_half_integer(j)
    if abs(N * j - round(N * j)) > 1e-12:
        raise ValueError("a singlet needs N j to be an integer")
    return MomentData(N, j, np.zeros(3), np.zeros((3, 3)), np.eye(3) * j * (j + 1) / 3)


def symmetric_moments(psi, N, j, ops=None):
    """Moments of a state vector in the maximal multiplet J = N j."""
    J = N * j
    if ops is None:
        ops = spin_matrices(J)
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (ops.dim,):
        raise ValueError("state dimension does not match 2Nj+1")
    J3 = ops.ops
    phi = [op @ psi for op in J3]
    mean = np.array([np.real(np.vdot(psi, p)) for p in phi])
    C = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            C[a, b] = C[b, a] = np.real(np.vdot(phi[a], phi[b]))
    return MomentData(N, j, mean, C, symmetric_single_particle_Q(C, N, j))


def oat_state(N, chi_t, field_b=0.0, ops=None):
    """One-axis twisted state exp(-i chi_t (Jx^2 + b Jz)) |J, J>_z, J = N/2.

    Returns (state vector, MomentData).
    """
    if N > 14 and ops is None:
        raise ValueError("oat_state is limited to N <= 14")
    J = N / 2
    ops = ops or spin_matrices(J)
    H = ops.jx @ ops.jx + field_b * ops.jz
    w, v = np.linalg.eigh(H)
    psi0 = np.zeros(ops.dim, complex)
    psi0[0] = 1
    psi = v @ (np.exp(-1j * chi_t * w) * (v.conj().T @ psi0))
    return psi, symmetric_moments(psi, N, 0.5, ops)


def extreme_state(Jtot, mu, ops=None, shift=0.0):
    """Ground state of (Jx - shift)^2 + mu Jz.

    mu > 0 drives <Jz> negative. shift = 0 gives the states of the
    familiar scan; a nonzero shift is needed for the half-integer
    curves at small polarization.
    """
    if Jtot > 200:
        raise ValueError("extreme_state is limited to Jtot <= 200")
    ops = ops or spin_matrices(Jtot)
    A = ops.jx - shift * np.eye(ops.dim)
    return ground_state(A @ A + mu * ops.jz)[1]


def white_noise(md, p):
    """Mix with the maximally mixed state: rho -> (1-p) rho + p 1/d^N."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    N, j = md.N, md.j
    s = j * (j + 1) / 3
    C = (1 - p) * md.C + p * N * s * np.eye(3)
    Q = (1 - p) * md.Q + p * s * np.eye(3)
    return MomentData(N, j, (1 - p) * md.mean, C, Q)


def spin_expectations(psi, ops):
    """<Jx>, <Jy>, <Jz> for a single-spin state."""
    return np.array([expect(psi, op) for op in ops.ops])
