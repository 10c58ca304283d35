"""Brute-force validators used to cross-check the library at small scale.

Many-body states are built from blocks of pure states; a product state
is the special case of blocks of size one. Moments are computed from
sparse collective operators, so the full (2j+1)^N space is only touched
for single-block states.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar

from .spin_ops import gellmann_basis, spin_matrices
from .states import MomentData

MAX_DIM = 6561


def n_threads():
    """Worker count, capped by SQUEEZELAB_THREADS when set."""
    try:
        cap = int(os.environ.get("SQUEEZELAB_THREADS", "0"))
    except ValueError:
        cap = 0
    n = os.cpu_count() or 1
    return max(1, min(n, cap) if cap > 0 else n)


@dataclass(frozen=True)
class MomentBatch:
    """Stacked moment data with a leading sample axis."""

    N: int
    j: float
    mean: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    local: np.ndarray

    def __len__(self):
        return self.mean.shape[0]

    def item(self, i):
        return MomentData(self.N, self.j, self.mean[i], self.C[i], self.Q[i], self.local[i])

    def take(self, idx):
        return MomentBatch(self.N, self.j, self.mean[idx], self.C[idx], self.Q[idx], self.local[idx])

    @staticmethod
    def mix(weights, batches):
        """Convex combination sample by sample; all moments mix linearly."""
        w = np.asarray(weights, float)
        b0 = batches[0]
        fields = [sum(wi[:, None] * b.mean for wi, b in zip(w, batches))]
        for name in ("C", "Q"):
            fields.append(sum(wi[:, None, None] * getattr(b, name) for wi, b in zip(w, batches)))
        fields.append(sum(wi[:, None] * b.local for wi, b in zip(w, batches)))
        return MomentBatch(b0.N, b0.j, *fields)


@dataclass(frozen=True)
class ProductStateSample:
    """Separable state: a mixture of product states.

    factors has shape (terms, N, 2j+1); weights has shape (terms,).
    """

    factors: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors, complex)
        w = np.asarray(self.weights, float)
        if f.ndim != 3 or f.shape[0] != w.shape[0]:
            raise ValueError("factors must be (terms, N, d) with one weight per term")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be a probability vector")
        if np.max(np.abs(np.linalg.norm(f, axis=-1) - 1)) > 1e-10:
            raise ValueError("factors must be normalized")

    def moments(self, j):
        N = self.factors.shape[1]
        model = BlockModel((1,) * N, j)
        parts = [model.moments([f[n][None] for n in range(N)]) for f in self.factors]
        return MomentBatch.mix(self.weights[:, None], parts).item(0)


@lru_cache(maxsize=None)
def _block_ops(size, j):
    """Sparse collective spin operators and summed single-site second moments on a block."""
    s = spin_matrices(j)
    d = s.dim
    single = [sp.csr_matrix(op) for op in s.ops]
    D = d ** size
    if D > MAX_DIM:
        raise ValueError(f"block dimension {D} exceeds {MAX_DIM}")
    J = [sp.csr_matrix((D, D), dtype=complex) for _ in range(3)]
    q = {}
    pairs = [(a, b) for a in range(3) for b in range(a, 3)]
    for a, b in pairs:
        q[a, b] = sp.csr_matrix((D, D), dtype=complex)
    for n in range(size):
        left = sp.identity(d ** n, format="csr")
        right = sp.identity(d ** (size - n - 1), format="csr")
        for a in range(3):
            J[a] = J[a] + sp.kron(sp.kron(left, single[a]), right, format="csr")
        for a, b in pairs:
            op = (single[a] @ single[b] + single[b] @ single[a]) / 2
            q[a, b] = q[a, b] + sp.kron(sp.kron(left, op), right, format="csr")
    if D <= 64:
        return tuple(m.T.toarray() for m in J), {k: v.T.toarray() for k, v in q.items()}
    return tuple(m.T.tocsr() for m in J), {k: v.T.tocsr() for k, v in q.items()}


def _block_moments(psi, j):
    """Block mean (S,3), collective second moments (S,3,3) and summed local moments (S,3,3)."""
    psi = np.asarray(psi, complex)
    d = int(round(2 * j + 1))
    size = int(round(np.log(psi.shape[1]) / np.log(d)))
    JT, qT = _block_ops(size, j)
    phi = [np.asarray(psi @ op) for op in JT]
    mean = np.stack([np.real(np.einsum("si,si->s", psi.conj(), p)) for p in phi], axis=1)
    C = np.empty((psi.shape[0], 3, 3))
    q = np.empty((psi.shape[0], 3, 3))
    for a in range(3):
        for b in range(a, 3):
            C[:, a, b] = C[:, b, a] = np.real(np.einsum("si,si->s", phi[a].conj(), phi[b]))
            v = np.real(np.einsum("si,si->s", psi.conj(), np.asarray(psi @ qT[a, b])))
            q[:, a, b] = q[:, b, a] = v
    return mean, C, q


class BlockModel:
    """Product of pure states on consecutive blocks with the given sizes."""

    def __init__(self, sizes, j):
        self.sizes = tuple(int(s) for s in sizes)
        self.j = float(j)
        self.d = int(round(2 * j + 1))
        self.N = sum(self.sizes)
        self.dims = tuple(self.d ** s for s in self.sizes)
        for D in self.dims:
            if D > MAX_DIM:
                raise ValueError(f"block dimension {D} exceeds {MAX_DIM}")

    def random(self, rng, n):
        out = []
        for D in self.dims:
            v = rng.normal(size=(n, D)) + 1j * rng.normal(size=(n, D))
            out.append(v / np.linalg.norm(v, axis=1, keepdims=True))
        return out

    def moments(self, blocks):
        """MomentBatch of the product of the given block states, each (S, D_b)."""
        mean = 0.0
        C = 0.0
        q = 0.0
        for psi in blocks:
            m, c, qq = _block_moments(psi, self.j)
            C = C + c - m[:, :, None] * m[:, None, :]
            mean = mean + m
            q = q + qq
        C = C + mean[:, :, None] * mean[:, None, :]
        local = np.diagonal(q, axis1=1, axis2=2).copy()
        return MomentBatch(self.N, self.j, mean, C, q / self.N, local)

    def pack(self, blocks, i):
        return np.concatenate([np.concatenate([b[i].real, b[i].imag]) for b in blocks])

    def unpack(self, x):
        out = []
        pos = 0
        for D in self.dims:
            v = x[pos:pos + D] + 1j * x[pos + D:pos + 2 * D]
            pos += 2 * D
            out.append((v / np.linalg.norm(v))[None])
        return out


def full_space_moments(psi, N, j):
    """Exact moments of a pure state on (2j+1)^N dimensions (at most 6561)."""
    d = int(round(2 * j + 1))
    psi = np.asarray(psi, complex).reshape(-1)
    if d ** N > MAX_DIM:
        raise ValueError(f"dimension {d ** N} exceeds {MAX_DIM}")
    if psi.size != d ** N:
        raise ValueError("state length does not match (2j+1)^N")
    psi = psi / np.linalg.norm(psi)
    return BlockModel((N,), j).moments([psi[None]]).item(0)


def _as_batch_expr(expr, batched):
    if batched:
        return lambda b: np.asarray(expr(b), float)
    return lambda b: np.array([float(expr(b.item(i))) for i in range(len(b))])


def _refine(model, f, blocks, i, iterations, seed):
    """Coordinate-wise bounded line searches on the real block coordinates."""
    x = model.pack(blocks, i)
    best = f(model.moments(model.unpack(x)))[0]
    rng = np.random.default_rng(seed)
    order = rng.permutation(np.tile(np.arange(x.size), iterations // x.size + 1))[:iterations]
    for c in order:
        def line(t, c=c):
            y = x.copy()
            y[c] = t
            if np.linalg.norm(y) == 0:
                return np.inf
            return f(model.moments(model.unpack(y)))[0]
        r = minimize_scalar(line, bounds=(x[c] - 1.0, x[c] + 1.0), method="bounded",
                            options={"xatol": 1e-10})
        if r.fun < best:
            best = r.fun
            x[c] = r.x
    return best


def _draw(model, rng, n, mixtures):
    blocks = model.random(rng, n)
    batch = model.moments(blocks)
    if mixtures > 0:
        other = model.moments(model.random(rng, n))
        w = rng.uniform(size=n)
        mixed = MomentBatch.mix(np.stack([w, 1 - w]), [batch, other])
        use = rng.uniform(size=n) < mixtures
        for name in ("mean", "C", "Q", "local"):
            getattr(batch, name)[use] = getattr(mixed, name)[use]
    return blocks, batch


def _chunks(samples, seed, chunk):
    seeds = np.random.SeedSequence(seed).spawn(max(1, -(-samples // chunk)))
    return [(s, min(chunk, samples - k * chunk)) for k, s in enumerate(seeds)]


def separable_samples(N, j, samples, seed=0, mixtures=0.25, chunk=5000):
    """MomentBatch of random separable states (product states and two-term mixtures)."""
    model = BlockModel((1,) * N, j)
    jobs = _chunks(samples, seed, chunk)
    with ThreadPoolExecutor(n_threads()) as pool:
        parts = list(pool.map(lambda a: _draw(model, np.random.default_rng(a[0]), a[1], mixtures)[1],
                              jobs))
    return MomentBatch(N, model.j, *[np.concatenate([getattr(p, k) for p in parts])
                                     for k in ("mean", "C", "Q", "local")])


def _sample_min(model, f, samples, seed, chunk=5000, mixtures=0.0, refine=True,
                n_refine=2, iterations=200):
    """Minimum of f over random states of the block model; chunks run on a thread pool."""
    def run(job):
        blocks, batch = _draw(model, np.random.default_rng(job[0]), job[1], mixtures)
        vals = f(batch)
        top = np.argsort(vals)[:n_refine]
        return vals[top], [[b[t] for b in blocks] for t in top]

    with ThreadPoolExecutor(n_threads()) as pool:
        results = list(pool.map(run, _chunks(samples, seed, chunk)))
    vals = np.concatenate([r[0] for r in results])
    cands = [c for r in results for c in r[1]]
    best = float(np.min(vals))
    if refine:
        for rank, t in enumerate(np.argsort(vals)[:n_refine]):
            blocks = [b[None] for b in cands[t]]
            best = min(best, float(_refine(model, f, blocks, 0, iterations, seed + rank)))
    return best


def separable_min(expr, N, j, samples=10000, refine=True, seed=0, batched=False, mixtures=0.25):
    """Sampled minimum of expr over separable states of N spin-j particles.

    expr maps MomentData to a float, or a MomentBatch to an array when
    batched is True. A fraction of the samples are two-term mixtures.
    """
    if N > 6 or j not in (0.5, 1, 1.0):
        raise ValueError("separable_min supports N <= 6 and j in {1/2, 1}")
    model = BlockModel((1,) * N, j)
    return _sample_min(model, _as_batch_expr(expr, batched), samples, seed,
                       mixtures=mixtures, refine=refine)


def block_partitions(N, k):
    """Block-size multisets of N particles with every block at most k."""
    def rec(n, cap):
        if n == 0:
            yield ()
            return
        for s in range(min(n, cap), 0, -1):
            for rest in rec(n - s, s):
                yield (s,) + rest
    return list(rec(N, k))


def kproducible_min(expr, N, k, j=0.5, samples=2000, refine=True, seed=0, batched=False):
    """Sampled minimum of expr over pure k-producible states.

    Collective moments are invariant under relabeling particles, so each
    block-size multiset stands for all set partitions with those sizes.
    Returns (minimum, partition attaining it).
    """
    if N > 6:
        raise ValueError("kproducible_min supports N <= 6")
    if not 1 <= k <= N:
        raise ValueError("k must satisfy 1 <= k <= N")
    f = _as_batch_expr(expr, batched)
    best, arg = np.inf, None
    for i, sizes in enumerate(block_partitions(N, k)):
        v = _sample_min(BlockModel(sizes, j), f, samples, seed + 1000 * i, refine=refine)
        if v < best:
            best, arg = v, sizes
    return best, arg


def random_product_states(N, j, rng, n=1):
    """n random product states as an array (n, N, 2j+1)."""
    d = int(round(2 * j + 1))
    v = rng.normal(size=(n, N, d)) + 1j * rng.normal(size=(n, N, d))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def product_state_vector(factors):
    out = np.ones(1, complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def chain_correlations(psi, N, j):
    """corr[l, n, m] = <j_l^(n) j_l^(m)> and means[l, n] of a pure chain state."""
    s = spin_matrices(j)
    d = s.dim
    psi = np.asarray(psi, complex).reshape((d,) * N)

    def apply(op, n, v):
        return np.moveaxis(np.tensordot(op, v, axes=([1], [n])), 0, n)

    corr = np.empty((3, N, N), complex)
    means = np.empty((3, N))
    for l, op in enumerate(s.ops):
        acted = [apply(op, n, psi) for n in range(N)]
        for n in range(N):
            means[l, n] = np.real(np.vdot(psi, acted[n]))
            for m in range(N):
                corr[l, n, m] = np.vdot(acted[n], acted[m])
    return corr, means


def product_chain(N, j, rng):
    """Correlation tensor and means of a random product chain."""
    s = spin_matrices(j)
    f = random_product_states(N, j, rng)[0]
    means = np.array([[np.real(np.vdot(v, op @ v)) for v in f] for op in s.ops])
    sq = np.array([[np.real(np.vdot(v, op @ op @ v)) for v in f] for op in s.ops])
    corr = means[:, :, None] * means[:, None, :]
    for l in range(3):
        np.fill_diagonal(corr[l], sq[l])
    return corr, means


def product_sud_moments(N, d, rng):
    """(G_means, G_second, local_g) of a random product state of N qudits."""
    g = gellmann_basis(d).generators
    f = random_product_states(N, (d - 1) / 2, rng)[0]
    m = np.array([[np.real(np.vdot(v, G @ v)) for v in f] for G in g])
    q = np.array([[np.real(np.vdot(v, G @ G @ v)) for v in f] for G in g])
    means = m.sum(1)
    local = q.sum(1)
    second = local + means ** 2 - (m ** 2).sum(1)
    return means, second, local


def mc_sign_correlator(G2, n_samples=10 ** 6, seed=0, chunk=10 ** 6):
    """Monte-Carlo <sgn(y1) sgn(y2)> for zero-mean normals with covariance G2.

    Returns (estimate, standard error).
    """
    G2 = np.asarray(G2, float)
    L = np.linalg.cholesky(G2 + 1e-300 * np.eye(2))
    rng = np.random.default_rng(seed)
    total = 0.0
    total2 = 0.0
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        y = rng.standard_normal((n, 2)) @ L.T
        s = np.sign(y[:, 0]) * np.sign(y[:, 1])
        total += s.sum()
        total2 += (s * s).sum()
        done += n
    mean = total / n_samples
    var = total2 / n_samples - mean * mean
    return float(mean), float(np.sqrt(max(var, 0.0) / n_samples))


def mc_orthant(G2, n_samples=10 ** 6, seed=0, chunk=10 ** 6):
    """Monte-Carlo P(y1 > 0, y2 > 0) with standard error."""
    G2 = np.asarray(G2, float)
    L = np.linalg.cholesky(G2)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        y = rng.standard_normal((n, 2)) @ L.T
        hits += int(np.count_nonzero((y[:, 0] > 0) & (y[:, 1] > 0)))
        done += n
    p = hits / n_samples
    return p, float(np.sqrt(p * (1 - p) / n_samples))


def symmetric_to_full(psi, N):
    """Embed a symmetric-sector qubit state (m descending) into the 2^N product basis."""
    from math import comb

    psi = np.asarray(psi, complex)
    if psi.size != N + 1:
        raise ValueError("symmetric state must have N + 1 amplitudes")
    if 2 ** N > MAX_DIM:
        raise ValueError(f"dimension {2 ** N} exceeds {MAX_DIM}")
    idx = np.arange(2 ** N)
    downs = np.array([bin(i).count("1") for i in idx])
    norms = np.sqrt(np.array([comb(N, k) for k in range(N + 1)], float))
    return psi[downs] / norms[downs]
