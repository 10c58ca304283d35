"""Gaussian model of an atomic ensemble probed by QND light pulses.

The state vector is V = J (+) S^(1) (+) ... (+) S^(n) with three
components per block. All operations are linear maps on the mean and
covariance; J_x and S_x enter the QND coupling as classical constants.
"""

from dataclasses import dataclass, field, replace

import numpy as np

AXIS = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class GaussParams:
    n_atoms: float = 2e6
    n_photons: float = 5e8
    coupling_g: float = 1e-7
    scattering_eta: float = 0.5e-9
    atom_spin: float = 1.0
    back_action: bool = True
    scatter_order: str = "after"
    initial_variance: str = "css"

    def __post_init__(self):
        for k in ("n_atoms", "n_photons", "atom_spin"):
            if getattr(self, k) <= 0:
                raise ValueError(f"{k} must be positive")
        if self.coupling_g < 0 or self.scattering_eta < 0:
            raise ValueError("coupling_g and scattering_eta must be non-negative")
        if self.scatter_order not in ("after", "before"):
            raise ValueError("scatter_order must be 'after' or 'before'")
        if self.initial_variance not in ("css", "j0"):
            raise ValueError("initial_variance must be 'css' or 'j0'")

    @property
    def chi(self):
        return float(np.exp(-self.scattering_eta * self.n_photons))

    @property
    def mean_jx(self):
        return self.n_atoms * self.atom_spin

    @property
    def transverse_var(self):
        if self.initial_variance == "j0":
            return self.n_atoms / 4
        return self.n_atoms * self.atom_spin / 2

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class MeterRecord:
    pulse_index: int
    recorded: bool
    pre_projection_variance: float
    cross_covariances: np.ndarray


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray
    params: GaussParams
    n_pulses: int
    used: tuple = ()
    projected: tuple = ()
    jx_eff: float = None

    def __post_init__(self):
        if self.jx_eff is None:
            object.__setattr__(self, "jx_eff", float(self.mean[0]))

    @property
    def labels(self):
        out = ["Jx", "Jy", "Jz"]
        for i in range(1, self.n_pulses + 1):
            out += [f"Sx{i}", f"Sy{i}", f"Sz{i}"]
        return out

    def index(self, pulse, comp):
        """Row of component comp ('x','y','z') of pulse (0 = atoms)."""
        return 3 * pulse + AXIS[comp]

    @property
    def atomic_cov(self):
        return self.cov[:3, :3]


def init_state(params, n_pulses):
    """x-polarized atoms and n coherent x-polarized light pulses."""
    if n_pulses < 0:
        raise ValueError("n_pulses must be >= 0")
    d = 3 * (n_pulses + 1)
    mean = np.zeros(d)
    cov = np.zeros((d, d))
    mean[0] = params.mean_jx
    cov[1, 1] = cov[2, 2] = params.transverse_var
    for i in range(1, n_pulses + 1):
        mean[3 * i] = params.n_photons / 2
        cov[3 * i + 1, 3 * i + 1] = cov[3 * i + 2, 3 * i + 2] = params.n_photons / 4
    return GaussianState(mean, cov, params, n_pulses)


def rotation_x(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def rotate_atoms(state, theta):
    """Larmor rotation about x: acts on the atomic block and atom rows of cross blocks."""
    O = rotation_x(theta)
    M = np.eye(state.mean.size)
    M[:3, :3] = O
    return replace(state, mean=M @ state.mean, cov=M @ state.cov @ M.T)


def qnd_interact(state, pulse):
    """S_y += g <S_x> J_z and (unless back action is off) J_y += g <J_x> S_z."""
    if not 1 <= pulse <= state.n_pulses:
        raise ValueError("pulse index out of range")
    if pulse in state.used:
        raise ValueError(f"pulse {pulse} has already interacted")
    p = state.params
    g = p.coupling_g
    sx = state.mean[3 * pulse]
    M = np.eye(state.mean.size)
    M[3 * pulse + 1, 2] = g * sx
    if p.back_action:
        M[1, 3 * pulse + 2] = g * state.jx_eff
    return replace(state, mean=M @ state.mean, cov=M @ state.cov @ M.T,
                   used=state.used + (pulse,))


def scatter(state, chi):
    """Polarization loss: a fraction 1-chi of the atoms gets a random polarization."""
    if not 0 < chi <= 1:
        raise ValueError("chi must lie in (0, 1]")
    NA = state.params.n_atoms
    mean = state.mean.copy()
    cov = state.cov.copy()
    mean[:3] *= chi
    cov[:3, 3:] *= chi
    cov[3:, :3] *= chi
    cov[:3, :3] = chi * chi * cov[:3, :3] + (chi * (1 - chi) * NA / 2
                                             + (1 - chi) * 2 / 3 * NA) * np.eye(3)
    return replace(state, mean=mean, cov=cov, jx_eff=float(mean[0]))


def project_meter(state, pulse, record=True):
    """Condition the covariance on the S_y outcome of a pulse (mean is not sampled)."""
    if pulse in state.projected:
        raise ValueError(f"pulse {pulse} has already been projected")
    k = 3 * pulse + 1
    v = state.cov[k, k]
    if v <= 1e-12:
        raise ValueError("meter variance is degenerate")
    col = state.cov[:, k].copy()
    rec = MeterRecord(pulse, record, float(v), col.copy())
    cov = state.cov - np.outer(col, col) / v
    return replace(state, cov=(cov + cov.T) / 2, projected=state.projected + (pulse,)), rec


def measure(state, pulse, project=False):
    """Interaction plus scattering in the configured order, optionally followed by projection."""
    chi = state.params.chi
    if state.params.scatter_order == "before":
        state = qnd_interact(scatter(state, chi), pulse)
    else:
        state = scatter(qnd_interact(state, pulse), chi)
    if project:
        state, _ = project_meter(state, pulse)
    return state


def conditional_squeezing(n_atoms, n_photons, g, j):
    """1 / (1 + zeta^2) with zeta^2 = (N_L / 2) (N_A j) g^2."""
    if n_atoms <= 0 or n_photons <= 0 or j <= 0 or g < 0:
        raise ValueError("inputs must be positive")
    return 1.0 / (1.0 + n_photons / 2 * n_atoms * j * g * g)


def heisenberg_slack(state, tol=1e-6):
    """(Delta J_y)^2 (Delta J_z)^2 - <J_x>^2 / 4, relative to N_A^2."""
    G = state.cov
    return (G[1, 1] * G[2, 2] - G[1, 2] ** 2 - state.mean[0] ** 2 / 4) / state.params.n_atoms ** 2


def is_physical(state, tol=1e-6):
    sym = np.max(np.abs(state.cov - state.cov.T)) <= 1e-9 * max(1.0, np.max(np.abs(state.cov)))
    return bool(sym and np.min(np.diag(state.cov)) >= -1e-9 and heisenberg_slack(state) >= -tol)


def dump_csv(state):
    """Labeled covariance table, one row per component."""
    labels = state.labels
    lines = ["label," + ",".join(labels)]
    for lab, row in zip(labels, state.cov):
        lines.append(lab + "," + ",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"
