"""Leggett-Garg tests with sequences of QND measurements on an atomic ensemble.

Outcomes are the S_y components of the probe pulses after interaction.
Their joint distribution is the unconditional Gaussian of the meter
variables, so correlators follow from covariance matrices alone.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import integrate
from scipy.stats import norm

from . import gaussian as gs


@dataclass(frozen=True)
class MeasurementSequence:
    """Ordered program of ("rot", theta) and ("meas", label, recorded) steps."""

    steps: tuple
    name: str = ""

    def __post_init__(self):
        labels = []
        for st in self.steps:
            if st[0] == "rot":
                if len(st) != 2:
                    raise ValueError("rotation step needs one angle")
            elif st[0] == "meas":
                labels.append(st[1])
            else:
                raise ValueError(f"unknown step {st[0]!r}")
        if len(set(labels)) != len(labels):
            raise ValueError("measurement labels must be unique")
        if not any(st[0] == "meas" and st[2] for st in self.steps):
            raise ValueError("at least one measurement must be recorded")

    @property
    def measurements(self):
        return [st[1] for st in self.steps if st[0] == "meas"]

    @property
    def recorded(self):
        return [st[1] for st in self.steps if st[0] == "meas" and st[2]]

    @classmethod
    def from_slots(cls, slots, delays, recorded=None, name=""):
        """Measurements at the given slot labels separated by the given delays."""
        if len(delays) != len(slots) - 1:
            raise ValueError("need one delay between each pair of measurements")
        rec = set(slots if recorded is None else recorded)
        steps = [("meas", slots[0], slots[0] in rec)]
        for s, d in zip(slots[1:], delays):
            if d != 0:
                steps.append(("rot", float(d)))
            steps.append(("meas", s, s in rec))
        return cls(tuple(steps), name)

    @classmethod
    def equally_spaced(cls, slots, theta, recorded=None, name=""):
        """Measurements at slot labels s performed at time (s - 1) theta."""
        delays = [theta * (b - a) for a, b in zip(slots, slots[1:])]
        return cls.from_slots(list(slots), delays, recorded, name)

    def to_text(self):
        out = []
        for st in self.steps:
            if st[0] == "rot":
                out.append(f"rot {st[1]!r}")
            else:
                out.append(f"meas {st[1]}" + (" record" if st[2] else ""))
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text, name=""):
        steps = []
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "rot" and len(parts) == 2:
                    steps.append(("rot", float(parts[1])))
                elif parts[0] == "meas" and len(parts) in (2, 3):
                    if len(parts) == 3 and parts[2] != "record":
                        raise ValueError
                    steps.append(("meas", int(parts[1]), len(parts) == 3))
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"line {n}: cannot parse {line!r}") from None
        return cls(tuple(steps), name)


def simulate(seq, params):
    """Joint covariance and means of the recorded meter outcomes S_y.

    Returns (labels, mean vector, covariance matrix).
    """
    labels = seq.measurements
    state = gs.init_state(params, len(labels))
    pulse_of = {lab: i + 1 for i, lab in enumerate(labels)}
    for st in seq.steps:
        if st[0] == "rot":
            state = gs.rotate_atoms(state, st[1])
        else:
            state = gs.measure(state, pulse_of[st[1]])
    rec = seq.recorded
    idx = [3 * pulse_of[lab] + 1 for lab in rec]
    return rec, state.mean[idx], state.cov[np.ix_(idx, idx)]


def _rho(A, B, C):
    A, B, C = np.broadcast_arrays(np.asarray(A, float), np.asarray(B, float), np.asarray(C, float))
    if np.any(A <= 0) or np.any(C <= 0):
        raise ValueError("variances must be positive")
    return np.clip(B / np.sqrt(A * C), -1.0, 1.0)


def correlator_discrete(A, B, C):
    """<sgn(y_i) sgn(y_j)> = (1 - 2 alpha / pi) sgn(B), alpha = arctan(sqrt(AC - B^2) / |B|)."""
    A, B, C = np.broadcast_arrays(np.asarray(A, float), np.asarray(B, float), np.asarray(C, float))
    if np.any(A <= 0) or np.any(C <= 0):
        raise ValueError("variances must be positive")
    det = np.clip(A * C - B * B, 0.0, None)
    alpha = np.arctan2(np.sqrt(det), np.abs(B))
    out = (1 - 2 * alpha / np.pi) * np.sign(B)
    return out if out.ndim else float(out)


def correlator_arcsin(A, B, C):
    """Equivalent form (2/pi) arcsin(rho)."""
    out = 2 / np.pi * np.arcsin(_rho(A, B, C))
    return out if np.ndim(out) else float(out)


def orthant_prob(G2):
    """P(y_i > 0, y_j > 0) for a zero-mean bivariate normal."""
    G2 = np.asarray(G2, dtype=float)
    w = np.linalg.eigvalsh((G2 + G2.T) / 2)
    if w[0] < -1e-12 * max(1.0, abs(w[-1])):
        raise ValueError("covariance is not positive semidefinite")
    A, B, C = G2[0, 0], G2[0, 1], G2[1, 1]
    if A <= 0 or C <= 0:
        rho = 0.0
    else:
        rho = float(np.clip(B / np.sqrt(A * C), -1, 1))
    return 0.25 + np.arcsin(rho) / (2 * np.pi)


def _clip_mean(m, s, c):
    """E[clip(Y / c, -1, 1)] for Y ~ N(m, s^2)."""
    if s <= 0:
        return float(np.clip(m / c, -1, 1))
    a, b = (-c - m) / s, (c - m) / s
    inner = m * (norm.cdf(b) - norm.cdf(a)) + s * (norm.pdf(a) - norm.pdf(b))
    return inner / c + norm.sf(b) - norm.cdf(a)


def correlator_truncated(G2, c):
    """<f(y_i) f(y_j)> for the relabeling f(y) = y/c inside [-c, c], sgn(y) outside.

    The inner expectation over y_j given y_i is done in closed form and
    the outer one by adaptive quadrature; c = 0 gives the sign correlator.
    """
    if c < 0:
        raise ValueError("c must be non-negative")
    G2 = np.asarray(G2, dtype=float)
    A, B, C = G2[0, 0], G2[0, 1], G2[1, 1]
    if c == 0:
        return correlator_discrete(A, B, C)
    if A <= 0 or C <= 0:
        raise ValueError("variances must be positive")
    sa = np.sqrt(A)
    k = B / A
    s = np.sqrt(max(C - B * B / A, 0.0))

    def f(y):
        return np.clip(y / c, -1, 1)

    def integrand(y):
        return f(y) * _clip_mean(k * y, s, c) * norm.pdf(y, scale=sa)

    lim = 12 * sa
    pts = sorted({max(-c, -lim), min(c, lim)})
    parts = [(-lim, pts[0]), (pts[0], pts[-1]), (pts[-1], lim)]
    total = 0.0
    for a, b in parts:
        if b > a:
            total += integrate.quad(integrand, a, b, epsabs=1e-12, epsrel=1e-10, limit=200)[0]
    return float(np.clip(total, -1, 1))


def qubit_kn(theta, n):
    """Sum over pairs of cos(theta (j - i)) plus floor(n/2)."""
    theta = np.asarray(theta, dtype=float)
    d = np.arange(1, n)
    return ((n - d)[:, None] * np.cos(np.outer(d, np.atleast_1d(theta)))).sum(0).reshape(theta.shape) + n // 2


def _rot_batch(thetas):
    c, s = np.cos(thetas), np.sin(thetas)
    O = np.zeros((thetas.size, 3, 3))
    O[:, 0, 0] = 1
    O[:, 1, 1] = c
    O[:, 1, 2] = -s
    O[:, 2, 1] = s
    O[:, 2, 2] = c
    return O


def _pair_leaves(thetas, i, j, params):
    """(A, B, C) over theta for every sequence measuring i, j and any subset of
    the other slots before j. Slot s is at time (s - 1) theta."""
    p = params
    g, NL, NA = p.coupling_g, p.n_photons, p.n_atoms
    sx = NL / 2
    chi = p.chi
    noise = chi * (1 - chi) * NA / 2 + (1 - chi) * 2 / 3 * NA
    T = thetas.size
    O = _rot_batch(thetas)
    G0 = np.zeros((T, 3, 3))
    G0[:, 1, 1] = G0[:, 2, 2] = p.transverse_var
    leaves = []

    def scat(G, mx, cv):
        G = chi * chi * G
        G[:, [0, 1, 2], [0, 1, 2]] += noise
        return G, mx * chi, (None if cv is None else chi * cv)

    def step(s, G, mx, cv, A):
        if s > 1:
            G = O @ G @ O.transpose(0, 2, 1)
            if cv is not None:
                cv = np.einsum("tab,tb->ta", O, cv)
        branches = [True] if s in (i, j) else [False, True]
        for meas in branches:
            G2, mx2, cv2, A2 = G, mx, cv, A
            if meas:
                if p.scatter_order == "before":
                    G2, mx2, cv2 = scat(G2, mx2, cv2)
                if s == j:
                    B = g * sx * cv2[:, 2]
                    C = NL / 4 + g * g * sx * sx * G2[:, 2, 2]
                    leaves.append((A2, B, C))
                    continue
                if s == i:
                    A2 = NL / 4 + g * g * sx * sx * G2[:, 2, 2]
                    cv2 = g * sx * G2[:, :, 2].copy()
                if p.back_action:
                    G2 = G2.copy()
                    G2[:, 1, 1] += g * g * mx2 * mx2 * NL / 4
                if p.scatter_order == "after":
                    G2, mx2, cv2 = scat(G2, mx2, cv2)
            step(s + 1, G2, mx2, cv2, A2)

    step(1, G0, p.mean_jx, None, None)
    return leaves


def family_correlators(thetas, n, params, c=0.0):
    """C_ij for all pairs of an n-slot scheme, each minimized over the
    sequences that measure i and j plus any subset of the other slots."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    out = {}
    for i, j in combinations(range(1, n + 1), 2):
        best = None
        for A, B, C in _pair_leaves(thetas, i, j, params):
            if c == 0:
                val = correlator_discrete(A, B, C)
            else:
                val = np.array([correlator_truncated(np.array([[a, b], [b, cc]]), c)
                                for a, b, cc in zip(A, B, C)])
            best = val if best is None else np.minimum(best, val)
        out[(i, j)] = best
    return out


def k_n(thetas, n, params, c=0.0, table=None):
    """K_n = sum_{i<j} C_ij + floor(n/2) with family-optimized correlators."""
    table = family_correlators(thetas, n, params, c) if table is None else table
    return sum(table.values()) + n // 2


def k3_triple(thetas, n, params, table=None):
    """Best K_3 = C_ab + C_bc + C_ac + 1 over triples of an n-slot scheme.

    Returns (values over theta, best triple per theta).
    """
    table = family_correlators(thetas, n, params) if table is None else table
    triples = list(combinations(range(1, n + 1), 3))
    vals = np.array([table[(a, b)] + table[(b, c)] + table[(a, c)] + 1 for a, b, c in triples])
    arg = np.argmin(vals, axis=0)
    return vals.min(axis=0), [triples[k] for k in arg]


def pair_probabilities(G2):
    """Probabilities of the four sign outcomes (++, +-, -+, --)."""
    ppp = orthant_prob(G2)
    pmm = ppp
    ppm = 0.5 - ppp
    return np.array([ppp, ppm, ppm, pmm])


def pair_covariance(seq, params, i, j):
    labels, _, cov = simulate(seq, params)
    a, b = labels.index(i), labels.index(j)
    return cov[np.ix_([a, b], [a, b])]


@dataclass(frozen=True)
class Protocol:
    """Sequences used for each correlator, the auxiliary sequences and the reference."""

    n: int
    reference: MeasurementSequence
    sequences: dict
    auxiliary: dict


def seven_measurement_protocol(theta):
    """Three sequences of seven slots giving C_35, C_57 and C_37."""
    eq = MeasurementSequence.equally_spaced
    ref = eq([1, 2, 3, 5, 7], theta, recorded=[3, 5, 7], name="ref")
    seqs = {
        (3, 5): eq([1, 2, 3, 5, 7], theta, recorded=[3, 5], name="S35"),
        (5, 7): eq([1, 2, 3, 4, 5, 7], theta, recorded=[5, 7], name="S57"),
        (3, 7): eq([1, 2, 3, 4, 5, 6, 7], theta, recorded=[3, 7], name="S37"),
    }
    fs = MeasurementSequence.from_slots
    t = theta
    aux = {
        (3, 5): seqs[(3, 5)],
        (5, 7): fs([1, 2, 3, 4, 5, 7], [t, t, 2 * t, 0, 2 * t], [5, 7], "S57'"),
        (3, 7): fs([1, 2, 3, 4, 5, 6, 7], [t, t, 2 * t, 0, 2 * t, 0], [3, 7], "S37'"),
    }
    return Protocol(7, ref, seqs, aux)


def invasivity(protocol, pair, params):
    """Total variation between the sign statistics of the auxiliary and reference sequences."""
    i, j = pair
    if i not in protocol.reference.measurements or j not in protocol.reference.measurements:
        raise ValueError("reference must contain both measurements")
    p_aux = pair_probabilities(pair_covariance(protocol.auxiliary[pair], params, i, j))
    p_ref = pair_probabilities(pair_covariance(protocol.reference, params, i, j))
    return float(np.abs(p_aux - p_ref).sum())


def protocol_correlators(protocol, params):
    out = {}
    for (i, j), seq in protocol.sequences.items():
        G = pair_covariance(seq, params, i, j)
        out[(i, j)] = correlator_discrete(G[0, 0], G[0, 1], G[1, 1])
    return out


def ki_n(protocol, params, n_eff=3):
    """KI = sum C_ij + floor(n_eff/2) + sum I_ij, plus the parts as a dict."""
    C = protocol_correlators(protocol, params)
    I = {pair: invasivity(protocol, pair, params) for pair in protocol.sequences}
    k = sum(C.values()) + n_eff // 2
    return k + sum(I.values()), {"K": k, "C": C, "I": I}


def qnd_fom(params, j0=None):
    """Figures of merit of a three-pulse QND run without rotations.

    phi_i = S_y^(i) / (g <S_x>) is the Faraday phase in units of J_z.
    Returns a dict; degenerate quantities are reported as nan with a
    message under "flags".
    """
    g = params.coupling_g
    flags = []
    j0 = params.n_atoms / 4 if j0 is None else j0
    if g == 0:
        nan = float("nan")
        return {"dX2_M": nan, "dX2_S": nan, "dX2_SgivenM": nan, "r_A": nan,
                "flags": ["coupling is zero: no information reaches the meter"]}
    seq = MeasurementSequence.from_slots([1, 2, 3], [0, 0], name="qnd3")
    _, _, cov = simulate(seq, params)
    scale = g * params.n_photons / 2
    P = cov / scale ** 2
    ro = (params.n_photons / 4) / scale ** 2
    chi_reg = P[0, 1] / P[0, 0]
    v = np.array([1.0, -chi_reg, 0.0])
    cond = float(v @ P @ v) - ro
    c12, c13 = P[0, 1], P[0, 2]
    if abs(c12) < 1e-300:
        flags.append("cov(phi1, phi2) vanishes")
        rA = float("nan")
    else:
        rA = c13 / c12
    out = {
        "dX2_M": float(P[0, 0] / j0),
        "dX2_S": float(((P[1, 1] - ro) - (P[0, 0] - ro)) / (rA * j0)),
        "dX2_SgivenM": float(cond / (rA * j0)),
        "r_A": float(rA),
        "var_readout": float(ro),
        "chi_regression": float(chi_reg),
        "flags": flags,
    }
    return out
