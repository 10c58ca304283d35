import itertools

import numpy as np
import pytest

from squeezelab import oracle, ssi, states
from squeezelab.spin_ops import gellmann_basis, random_rotation, spin_matrices


def random_symmetric(N, rng):
    s = spin_matrices(N / 2)
    v = rng.normal(size=s.dim) + 1j * rng.normal(size=s.dim)
    return states.symmetric_moments(v / np.linalg.norm(v), N, 0.5, s)


def test_modified_moments_examples():
    Jt2, _ = ssi.modified_moments(states.css_moments(10, 0.5))
    assert Jt2[2] == pytest.approx(22.5)
    Jt2, _ = ssi.modified_moments(states.singlet_moments(12, 1))
    assert np.allclose(Jt2, -12 * 2 / 3)
    Jt2, _ = ssi.modified_moments(states.dicke_moments(4, 2))
    assert Jt2[0] == pytest.approx(2)


def test_dicke_violates_only_the_dicke_inequality():
    rep = ssi.ssi_set_check(states.unpolarized_dicke_moments(100, 0.5))
    assert rep.entangled
    assert list(rep.violated) == [False, False, True, False]
    assert rep.compact[(2,)] < 0


def test_singlet_violates_variance_sum():
    rep = ssi.ssi_set_check(states.singlet_moments(10, 1))
    assert rep.violated[1]


def test_frame_must_be_orthonormal():
    with pytest.raises(ValueError):
        ssi.ssi_set_check(states.css_moments(3, 0.5), np.ones((3, 3)))


def test_search_frame_finds_rotated_dicke(rng):
    md = states.unpolarized_dicke_moments(30, 0.5).rotated(random_rotation(rng))
    rep, O = ssi.search_frame(md)
    assert rep.slacks.min() == pytest.approx(-225, rel=1e-6)
    assert np.allclose(O @ O.T, np.eye(3))


def test_product_states_never_violate():
    b = oracle.separable_samples(3, 0.5, 10000, seed=3)
    slacks = ssi.complete_set_arrays(b.mean, b.C, b.local, b.N, b.j)
    assert slacks.min() >= -1e-9 * 9


@pytest.mark.parametrize("N,j", [(2, 0.5), (3, 1), (4, 0.5), (4, 1)])
def test_separable_soundness_all_moment_criteria(N, j):
    b = oracle.separable_samples(N, j, 11000, seed=N * 10 + int(2 * j))
    tol = 1e-9 * N * N
    assert ssi.compact_arrays(b.mean, b.C, b.local, N, j).min() >= -tol
    assert ssi.complete_set_arrays(b.mean, b.C, b.local, N, j).min() >= -tol
    assert ssi.xi_G_arrays(b.mean, b.C, b.Q, N, j)[0].min() >= 1 - 1e-9
    assert ssi.two_body_arrays(b.mean, b.C, b.Q, N, j).min() >= -1e-9
    named = ssi.named_arrays(b.mean, b.C, b.local, N, j)
    keys = ["xi_ent_j", "xi_dicke_j", "xi_planar_j", "xi_singlet_j", "xi_T"]
    if j == 0.5:
        keys.append("xi_orig")
        assert np.nanmin(named["xi_P"]) >= 0.5 - 1e-9
    for k in keys:
        assert np.nanmin(named[k]) >= 1 - 1e-9, k


def test_xi_g_table_values():
    assert ssi.xi_G(states.singlet_moments(10, 0.5)).value == 0
    md = states.unpolarized_dicke_moments(4000, 1)
    assert ssi.xi_G(md).value == pytest.approx(3999 / 7999, abs=1e-9)
    r = ssi.xi_G(md)
    assert np.allclose(np.abs(r.squeezed_directions), [[0, 0, 1]])


def test_xi_g_needs_two_particles():
    with pytest.raises(ValueError):
        ssi.xi_G(states.css_moments(1, 0.5))


def test_rotation_invariance(rng):
    md = states.unpolarized_dicke_moments(50, 0.5)
    base = ssi.xi_G(md).value
    assert ssi.rotation_invariance_check(md, np.eye(3))
    assert ssi.rotation_invariance_check(md, np.eye(3)[[2, 0, 1]])
    dev = max(abs(ssi.xi_G(md.rotated(random_rotation(rng))).value - base) for _ in range(100))
    assert dev < 1e-8
    with pytest.raises(ValueError):
        ssi.rotation_invariance_check(md, 2 * np.eye(3))


def test_named_parameter_examples():
    p = ssi.named_parameters(states.css_moments(20, 0.5))
    # the squeezed axis is x, the mean lies along z
    assert p["xi_orig"] == pytest.approx(1)
    p = ssi.named_parameters(states.singlet_moments(20, 1))
    assert p["xi_singlet_j"] == 0 and p["xi_T"] == 0
    p = ssi.named_parameters(states.unpolarized_dicke_moments(20, 0.5))
    assert isinstance(p["xi_ent_j"], ssi.NotApplicable)
    assert not p["xi_ent_j"]


def test_named_parameters_detect_dicke_in_its_frame():
    md = states.unpolarized_dicke_moments(100, 1, axis=(1, 0, 0))
    assert ssi.named_parameters(md)["xi_dicke_j"] < 1


def test_rounding_level_denominator_is_not_applicable():
    # the planar mean of a z-polarized OAT state is zero up to rounding
    _, md = states.oat_state(10, 0.15)
    assert isinstance(ssi.named_parameters(md)["xi_P"], ssi.NotApplicable)


def test_xi_g_finer_than_xi_ent(rng):
    # polarized squeezed states from a ground-state scan
    N = 120
    s = spin_matrices(N / 2)
    for mu in np.geomspace(1, 500, 12):
        md = states.symmetric_moments(states.extreme_state(N / 2, mu, s), N, 0.5, s)
        p = ssi.named_parameters(md)
        if p["xi_ent_j"] and p["xi_ent_j"] < 1:
            assert ssi.xi_G(md).value < 1


def test_map_half_to_j():
    m, t = ssi.map_half_to_j([1, 2, 3], [4, 5, 6], 0.5)
    assert np.allclose(m, [1, 2, 3]) and np.allclose(t, [4, 5, 6])
    md = states.css_moments(9, 1)
    Jt2, _ = ssi.modified_moments(md)
    m, t = ssi.map_half_to_j(md.mean, Jt2, 1)
    assert np.abs(ssi.compact_from_modified(m, t, 9, 0.5)).max() < 1e-9
    with pytest.raises(ValueError):
        ssi.map_half_to_j([0, 0, 0], [0, 0, 0], 0)


def test_map_half_to_j_soundness_spin_three_halves(rng):
    for _ in range(1000):
        N = int(rng.integers(2, 5))
        v = rng.normal(size=(N, 4)) + 1j * rng.normal(size=(N, 4))
        f = v / np.linalg.norm(v, axis=1, keepdims=True)
        md = oracle.ProductStateSample(f[None], np.ones(1)).moments(1.5)
        Jt2, _ = ssi.modified_moments(md)
        m, t = ssi.map_half_to_j(md.mean, Jt2, 1.5)
        assert ssi.compact_from_modified(m, t, N, 0.5).min() >= -1e-9 * N * N


def test_fluctuating():
    md = states.unpolarized_dicke_moments(30, 0.5)
    ens = ssi.FluctuatingEnsemble(((1.0, md),))
    assert ssi.xi_G_fluctuating(ens) == pytest.approx(ssi.xi_G(md).value)
    ens = ssi.FluctuatingEnsemble(((0.5, states.singlet_moments(100, 0.5)),
                                   (0.5, states.singlet_moments(102, 0.5))))
    assert ssi.xi_G_fluctuating(ens) == 0
    w = np.full(11, 1 / 11)
    ens = ssi.FluctuatingEnsemble(tuple((wi, states.css_moments(n, 0.5)) for wi, n in
                                        zip(w, range(10, 21))))
    assert ssi.xi_G_fluctuating(ens) >= 1 - 1e-9
    with pytest.raises(ValueError):
        ssi.FluctuatingEnsemble(((0.3, md),))
    with pytest.raises(ValueError):
        ssi.xi_G_fluctuating(ssi.FluctuatingEnsemble(((1.0, states.css_moments(1, 0.5)),)))


def test_ti_q_zero_reduces_to_compact(rng):
    N = 5
    f = oracle.random_product_states(N, 0.5, rng)[0]
    v = oracle.product_state_vector(f)
    v = v + 0.3 * (rng.normal(size=v.size) + 1j * rng.normal(size=v.size))
    v /= np.linalg.norm(v)
    corr, means = oracle.chain_correlations(v, N, 0.5)
    md = oracle.full_space_moments(v, N, 0.5)
    comp = ssi.compact_slacks(md)
    for I in ssi.SUBSETS:
        assert ssi.ti_ssi_check(corr, means, 0.0, I, 0.5) == pytest.approx(comp[I], abs=1e-9)


def test_ti_product_chains(rng):
    for _ in range(1000):
        N = int(rng.integers(2, 9))
        corr, means = oracle.product_chain(N, 0.5, rng)
        q = rng.uniform(0, 2 * np.pi)
        for I in ((), (0,), (0, 1, 2), (1, 2)):
            assert ssi.ti_ssi_check(corr, means, q, I, 0.5) >= -1e-9


def test_ti_singlet_pairs_at_pi():
    N = 4
    s = np.array([0, 1, -1, 0]) / np.sqrt(2)
    # pairs (0,1) and (2,3)
    v = np.kron(s, s)
    corr, means = oracle.chain_correlations(v, N, 0.5)
    lib = ssi.ti_ssi_check(corr, means, np.pi, (0, 1, 2), 0.5)
    h = spin_matrices(0.5)
    eye = np.eye(2)

    def site(op, n):
        out = np.ones((1, 1))
        for m in range(N):
            out = np.kron(out, op if m == n else eye)
        return out

    jt2 = []
    for op in h.ops:
        A = sum(np.exp(1j * np.pi * n) * site(op, n) for n in range(N))
        loc = sum(site(op @ op, n) for n in range(N))
        jt2.append(np.vdot(v, (A.conj().T @ A - loc) @ v).real)
    direct = (N - 1) * sum(jt2) + N * (N - 1) / 4
    assert lib == pytest.approx(direct, abs=1e-12)
    # at q = pi the staggered moments of singlet pairs are large, so no violation;
    # at q = 0 the state is a total singlet and is detected
    assert lib > 0
    assert ssi.ti_ssi_check(corr, means, 0.0, (0, 1, 2), 0.5) < 0


def test_ti_rejects_non_hermitian():
    corr = np.zeros((3, 3, 3), complex)
    corr[0, 0, 1] = 1j
    with pytest.raises(ValueError):
        ssi.ti_moments(corr, np.zeros((3, 3)), 0.1)


def test_ti_distance_form():
    corr, means = ssi.correlations_from_distance(np.ones((3, 4)) * 0.25, [0, 0, 0.5], 4)
    assert corr.shape == (3, 4, 4) and means.shape == (3, 4)


def _collective_g(v, N, d):
    g = gellmann_basis(d).generators
    eye = np.eye(d)

    def site(op, n):
        out = np.ones((1, 1))
        for m in range(N):
            out = np.kron(out, op if m == n else eye)
        return out

    G = [sum(site(a, n) for n in range(N)) for a in g]
    loc = [sum(np.vdot(v, site(a @ a, n) @ v).real for n in range(N)) for a in g]
    return (np.array([np.vdot(v, x @ v).real for x in G]),
            np.array([np.vdot(v, x @ x @ v).real for x in G]), np.array(loc))


def test_sud_reduces_to_qubit_compact(rng):
    N = 3
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    v /= np.linalg.norm(v)
    m, s2, loc = _collective_g(v, N, 2)
    md = oracle.full_space_moments(v, N, 0.5)
    comp = ssi.compact_slacks(md)
    # Gell-Mann order for d=2 is (sx, sy, sz)
    for I in ssi.SUBSETS:
        assert ssi.sud_ssi_check(m, s2, loc, N, 2, I) == pytest.approx(4 * comp[I], abs=1e-9)


def test_sud_product_qutrits(rng):
    for _ in range(1000):
        m, s2, loc = oracle.product_sud_moments(2, 3, rng)
        assert ssi.sud_best_slack(m, s2, loc, 2, 3)[0] >= -1e-9


def test_sud_singlets():
    # three-qutrit antisymmetric state: invariant under SU(3)
    v = np.zeros(27)
    for p in itertools.permutations(range(3)):
        sign = np.linalg.det(np.eye(3)[list(p)])
        v[p[0] * 9 + p[1] * 3 + p[2]] = sign
    v /= np.linalg.norm(v)
    m, s2, loc = _collective_g(v.astype(complex), 3, 3)
    assert ssi.sud_ssi_check(m, s2, loc, 3, 3, range(8)) < 0
    # two spin-1 particles in their spin singlet
    w = np.zeros(9)
    w[2], w[4], w[6] = 1, -1, 1
    m, s2, loc = _collective_g(w.astype(complex) / np.sqrt(3), 2, 3)
    assert ssi.sud_best_slack(m, s2, loc, 2, 3)[0] < 0


def test_sud_dimension_checks():
    with pytest.raises(ValueError):
        ssi.sud_ssi_check(np.zeros(3), np.zeros(3), np.zeros(3), 2, 3, ())
    with pytest.raises(ValueError):
        ssi.sud_ssi_check(np.zeros(8), np.zeros(8), np.zeros(8), 2, 3, (9,))


def test_linear_depth():
    N = 30
    md = states.unpolarized_dicke_moments(N, 0.5, axis=(0, 0, 1))
    assert all(ssi.linear_depth_check(md, k) < 0 for k in range(1, N))
    assert ssi.linear_depth_check(states.css_moments(N, 0.5, (1, 0, 0)), 1) >= -1e-9
    assert ssi.linear_depth_check(states.css_moments(N, 0.5, (0, 0, 1)), 1) >= -1e-9
    with pytest.raises(ValueError):
        ssi.linear_depth_check(md, N)


def test_linear_depth_on_symmetric_products(rng):
    for _ in range(300):
        N = int(rng.integers(3, 12))
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        f = np.tile(v / np.linalg.norm(v), (N, 1))
        md = oracle.ProductStateSample(f[None], np.ones(1)).moments(0.5)
        assert ssi.linear_depth_check(md, N - 1) >= -1e-9 * N * N


def test_two_body_matches_compact(rng):
    for _ in range(1000):
        N = int(rng.integers(2, 15))
        md = random_symmetric(N, rng) if rng.uniform() < 0.7 else \
            oracle.separable_samples(N if N <= 6 else 6, 0.5, 1, seed=int(rng.integers(1e6))).item(0)
        tb, _, _ = ssi.two_body_form(md)
        comp = ssi.compact_slacks(md)
        for I in ssi.SUBSETS:
            n = md.N
            assert tb[I] == pytest.approx(comp[I] / (n * (n - 1)), abs=1e-9)


def test_two_body_singlet_pair():
    md = states.singlet_moments(2, 0.5)
    tb, c, _ = ssi.two_body_form(md)
    assert c.sum() == pytest.approx(-0.75)
    assert tb[(0, 1, 2)] < 0
    tb, _, _ = ssi.two_body_form(states.css_moments(6, 0.5))
    assert min(tb.values()) == pytest.approx(0, abs=1e-12)


def test_ppt():
    c, m = ssi.av2_correlations(states.singlet_moments(2, 0.5))
    assert ssi.ppt_symmetric_check(c, m) < 0
    c, m = ssi.av2_correlations(states.css_moments(2, 0.5, (1, 1, 1)))
    assert ssi.ppt_symmetric_check(c, m) >= -1e-9
    trip = np.array([0, 1, 1, 0]) / np.sqrt(2)
    rho = np.outer(trip, trip)
    val = ssi.ppt_symmetric_check(rho=rho)
    c, m = ssi.av2_correlations(states.dicke_moments(2, 1))
    # the triplet is entangled; <s_z s_z> = -1 already gives -1/4 along z
    assert ssi.ppt_symmetric_check(c, m) == pytest.approx(-0.25)
    assert val < 0
    with pytest.raises(ValueError):
        ssi.ppt_symmetric_check(rho=np.eye(4))


def test_ppt_products(rng):
    for _ in range(200):
        # the condition applies to symmetric states, so both factors agree
        f = oracle.random_product_states(1, 0.5, rng)[0, 0]
        v = np.kron(f, f)
        assert ssi.ppt_symmetric_check(rho=np.outer(v, v.conj())) >= -1e-9


def test_concurrence():
    assert ssi.concurrence_symmetric(0, 0, 1, 1) == 0
    assert ssi.concurrence_symmetric(-1, -1, -1, 0) == pytest.approx(1)
    assert ssi.concurrence_symmetric(0, 0, 0, 0) == 0
