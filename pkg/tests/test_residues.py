"""Residue integration of Green-chain products and the reduction identities."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cbs2atom import atom, residues
from cbs2atom.atom import AtomDriveParams, DELTA_MINUS, DELTA_PLUS
from cbs2atom.linalg import DegenerateSpectrumError, SpectralDecomposition
from cbs2atom.residues import (
    Chain,
    GreenFactor,
    PoleCollisionError,
    chain_value,
    check_sum_rule_I,
    check_sum_rule_II,
    check_sum_rule_III,
    embed_first_slot,
    embed_second_slot,
    expand_chain,
    integrate_chains,
    integrate_pole_sum,
    quadrature_line_integral,
)


def make(rabi, delta=0.0, phase=0.0):
    return atom.build(AtomDriveParams(rabi=rabi, delta=delta, phase=phase))


def scalar_decomp(lam):
    """A 1x1 'decomposition' with a single prescribed eigenvalue."""
    return SpectralDecomposition(np.array([lam]), np.array([[[1.0 + 0j]]]), 1.0)


def product_value(chains, values):
    out = 1.0 + 0.0j
    for chain in chains:
        out *= chain_value(chain, values)
    return out


# ------------------------------------------------------- elementary integrals


def test_pair_integral_matches_textbook_value():
    # integral du/2pi (iu - lam)^-1 (-iu - mu)^-1 = -1/(lam + mu)
    rng = np.random.default_rng(11)
    for _ in range(8):
        lam = -abs(rng.normal(1, 0.5)) + 1j * rng.normal(0, 2)
        mu = -abs(rng.normal(1, 0.5)) + 1j * rng.normal(0, 2)
        chain = Chain(ops=(GreenFactor(scalar_decomp(lam), +1), GreenFactor(scalar_decomp(mu), -1)))
        val = integrate_chains([chain])[0, 0]
        assert abs(val + 1.0 / (lam + mu)) < 1e-12


def test_pair_integral_matches_quadrature():
    lam, mu = -0.8 + 1.3j, -1.7 - 0.4j
    chain = Chain(ops=(GreenFactor(scalar_decomp(lam), +1), GreenFactor(scalar_decomp(mu), -1)))
    res = integrate_chains([chain])[0, 0]
    quad_val = quadrature_line_integral(lambda u: chain_value(chain, {"w1": u})[0, 0])
    assert abs(res - quad_val) < 1e-10


def test_product_resolvent_integral_representation():
    # integral dw/2pi G1(iw) (x) G2(-iw) equals the inverse of the summed drift
    s1, s2 = make(1.3, delta=0.7), make(1.3, delta=0.7, phase=0.9)
    chain = Chain(ops=(
        GreenFactor(embed_first_slot(s1.decomp), +1),
        GreenFactor(embed_second_slot(s2.decomp), -1),
    ))
    gx = integrate_pole_sum(expand_chain(chain), "w1").constant()
    m_plus = np.kron(s1.M, np.eye(3)) + np.kron(np.eye(3), s2.M)
    assert np.max(np.abs(gx - np.linalg.inv(-m_plus))) < 1e-12


def test_two_term_reduction_with_empty_insertions():
    # at z=0 the two-line combination collapses to kron(G1(0), G2(0))
    s1, s2 = make(1.3, delta=0.7), make(1.3, delta=0.7, phase=0.9)
    e1, e2 = embed_first_slot(s1.decomp), embed_second_slot(s2.decomp)
    g1_zero = np.kron(s1.green(0.0), np.eye(3))
    g2_zero = np.kron(np.eye(3), s2.green(0.0))
    line1 = Chain(ops=(GreenFactor(e1, +1), GreenFactor(e2, -1), g2_zero))
    line2 = Chain(ops=(GreenFactor(e1, +1), g1_zero, GreenFactor(e2, -1)))
    lhs = integrate_pole_sum(expand_chain(line1) + expand_chain(line2), "w1").constant()
    rhs = np.kron(s1.green(0.0), s2.green(0.0))
    assert np.max(np.abs(lhs - rhs)) < 1e-10


# ----------------------------------------------------------- sum-rule checks


def test_sum_rule_I_random_draws():
    rng = np.random.default_rng(42)
    done = 0
    while done < 20:
        try:
            s1 = make(rng.uniform(0.3, 5.0), rng.uniform(-3, 3), rng.uniform(0, 2 * np.pi))
            s2 = make(rng.uniform(0.3, 5.0), rng.uniform(-3, 3), rng.uniform(0, 2 * np.pi))
            s1.decomp, s2.decomp
        except DegenerateSpectrumError:
            continue
        z = 1j * rng.uniform(-3, 3)
        assert check_sum_rule_I(s1, s2, z, rng=rng) < 1e-10
        done += 1


def test_sum_rule_II_random_draws():
    rng = np.random.default_rng(43)
    for _ in range(5):
        s1 = make(rng.uniform(0.8, 4.0), rng.uniform(-2, 2), rng.uniform(0, 2 * np.pi))
        s2 = make(rng.uniform(0.8, 4.0), rng.uniform(-2, 2), rng.uniform(0, 2 * np.pi))
        omega = rng.uniform(-3, 3)
        assert check_sum_rule_II(s1, s2, omega, rng=rng) < 1e-10


def test_sum_rule_II_against_double_quadrature():
    # the iterated-residue value of the double integral matches brute-force
    # nested quadrature of the dense-resolvent integrand
    rng = np.random.default_rng(5)
    s1, s2 = make(2.0, 0.6), make(2.0, 0.6, phase=1.1)
    e1, e2 = embed_first_slot(s1.decomp), embed_second_slot(s2.decomp)
    ins = [
        (rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))) / np.sqrt(18)
        for _ in range(4)
    ]
    omega = 0.8
    lhs_chain = Chain(ops=(
        ins[0],
        GreenFactor(e1, +1, -0.5j * omega, "w2"), GreenFactor(e1, +1, 0.0, "w1"),
        ins[1],
        GreenFactor(e2, -1, -0.5j * omega, "w2"),
        ins[2],
        GreenFactor(e2, -1, 0.0, "w1"),
        ins[3],
    ))
    ps = expand_chain(lhs_chain)
    res = integrate_pole_sum(integrate_pole_sum(ps, "w2"), "w1").constant()

    # one matrix element is plenty for the 2d quadrature; feeding a basis
    # vector through the chain keeps every evaluation a cheap matvec, and
    # memoization shares work between the integrator's re/im passes
    row, col = 4, 7
    scalar_chain = Chain(ops=lhs_chain.ops, seed=np.eye(9)[col], extract=row)
    outer_cache = {}

    def inner(w1):
        if w1 not in outer_cache:
            cache = {}

            def f2(w2):
                if w2 not in cache:
                    cache[w2] = chain_value(scalar_chain, {"w1": w1, "w2": w2})
                return cache[w2]

            outer_cache[w1] = quadrature_line_integral(f2, epsabs=1e-12, epsrel=3e-9, limit=120)
        return outer_cache[w1]

    qq = quadrature_line_integral(inner, epsabs=1e-12, epsrel=1e-8, limit=120)
    assert abs(res[row, col] - qq) < 1e-9


def test_sum_rule_III_mirror_arguments():
    rng = np.random.default_rng(44)
    done = 0
    while done < 20:
        try:
            sys = make(rng.uniform(0.3, 5.0), rng.uniform(-3, 3), rng.uniform(0, 2 * np.pi))
            sys.decomp
        except DegenerateSpectrumError:
            continue
        z = 1j * rng.uniform(-4, 4)
        assert check_sum_rule_III(sys, z, -z, rng=rng) < 1e-10
        done += 1


def test_sum_rule_III_at_zero_degenerates_to_rule_I():
    sys = make(1.3, delta=0.7)
    assert check_sum_rule_III(sys, 0.0, 0.0, rng=3) < 1e-10


def test_sum_rule_III_requires_opposite_arguments():
    # the splitting identity is specific to mirror-image resolvent arguments;
    # an independent pair must show a finite deviation
    sys = make(1.3, delta=0.7)
    assert check_sum_rule_III(sys, 1j, 2j, rng=6) > 1e-6


def test_sum_rule_checks_reject_off_axis_arguments():
    sys = make(1.3)
    with pytest.raises(ValueError):
        check_sum_rule_I(sys, sys, 0.5 + 0j, rng=0)
    with pytest.raises(ValueError):
        check_sum_rule_III(sys, 0.5, -0.5, rng=0)


# ----------------------------------------------- multiplicities and contours


def test_exact_pole_collisions_integrate_correctly():
    # the same Green factor in several chains of a product produces exactly
    # repeated poles; the higher-order residue must match quadrature
    s = make(2.0)
    d = s.decomp
    g0_1, g0_2 = atom.g0_vectors(s)
    c1 = Chain(ops=(GreenFactor(d, +1),), seed=g0_1, extract=1)
    c2 = Chain(ops=(GreenFactor(d, +1),), seed=s.steady, extract=2)
    c3 = Chain(ops=(GreenFactor(d, -1),), seed=g0_2, extract=0)

    res2 = integrate_chains([c1, c2, c3])
    quad2 = quadrature_line_integral(lambda u: product_value([c1, c2, c3], {"w1": u}))
    assert abs(res2 - quad2) < 1e-12 + 1e-10 * abs(quad2)

    c4 = Chain(ops=(GreenFactor(d, +1),), seed=s.steady, extract=0)
    res3 = integrate_chains([c1, c2, c4, c3])
    quad3 = quadrature_line_integral(lambda u: product_value([c1, c2, c4, c3], {"w1": u}))
    assert abs(res3 - quad3) < 1e-12 + 1e-10 * abs(quad3)


def test_same_half_plane_product_integrates_to_zero():
    # all poles below the axis -> analytic above -> the integral vanishes
    s = make(2.0)
    g0_1, g0_2 = atom.g0_vectors(s)
    c1 = Chain(ops=(GreenFactor(s.decomp, -1),), seed=g0_2, extract=0)
    c2 = Chain(ops=(GreenFactor(s.decomp, -1),), seed=s.steady, extract=1)
    assert integrate_chains([c1, c2]) == 0
    quad_val = quadrature_line_integral(lambda u: product_value([c1, c2], {"w1": u}))
    assert abs(quad_val) < 1e-12


def test_production_like_chain_vs_quadrature():
    # weight x response structure with a spectral offset, as used downstream
    s = make(2.0)
    d = s.decomp
    g0_1, g0_2 = atom.g0_vectors(s)
    for nu in (0.0, 0.7, -3.2):
        g_nu = s.green(-1j * nu)
        response = Chain(
            ops=(g_nu, DELTA_PLUS, GreenFactor(d, -1, -1j * nu), DELTA_MINUS, g_nu),
            seed=g0_2, extract=0,
        )
        weight = Chain(ops=(GreenFactor(d, +1),), seed=g0_1, extract=1)
        res = integrate_chains([response, weight])
        quad_val = quadrature_line_integral(
            lambda u: product_value([response, weight], {"w1": u}))
        assert abs(res - quad_val) < 1e-8 * max(1.0, abs(quad_val))


# ------------------------------------------------------- algebraic structure


def test_linearity_of_integration():
    rng = np.random.default_rng(3)
    s1, s2 = make(1.1, 0.4), make(3.0, -1.2)
    f = expand_chain(Chain(ops=(GreenFactor(s1.decomp, +1), GreenFactor(s1.decomp, -1)), seed=s1.steady))
    g = expand_chain(Chain(ops=(GreenFactor(s2.decomp, +1), GreenFactor(s2.decomp, -1)), seed=s2.steady))
    alpha = complex(rng.normal(), rng.normal())
    beta = complex(rng.normal(), rng.normal())
    combo = integrate_pole_sum(f.scaled(alpha) + g.scaled(beta), "w1").constant()
    separate = alpha * integrate_pole_sum(f, "w1").constant() + beta * integrate_pole_sum(g, "w1").constant()
    assert np.max(np.abs(combo - separate)) < 1e-12


def test_conjugation_commutes_with_integration():
    s = make(2.0, 0.5)
    d = s.decomp
    g0_1, g0_2 = atom.g0_vectors(s)
    c1 = Chain(ops=(GreenFactor(d, -1, -0.7j), DELTA_MINUS, s.green(0.0)), seed=g0_2, extract=0)
    c2 = Chain(ops=(GreenFactor(d, +1),), seed=g0_1, extract=1)
    ps = expand_chain(c1).multiply(expand_chain(c2))
    v1 = integrate_pole_sum(ps.conjugated(), "w1").constant()
    v2 = np.conj(integrate_pole_sum(ps, "w1").constant())
    assert abs(v1 - v2) < 1e-14


@settings(max_examples=40, deadline=None)
@given(
    u=st.floats(-8, 8),
    rabi=st.floats(0.2, 4.0),
    delta=st.floats(-2.0, 2.0),
)
def test_pointwise_expansion_matches_dense_solves(u, rabi, delta):
    try:
        s = make(rabi, delta)
        d = s.decomp
    except DegenerateSpectrumError:
        assume(False)
    chain = Chain(
        ops=(GreenFactor(d, +1, 0.3j), DELTA_MINUS, GreenFactor(d, -1, -1.1j)),
        seed=s.steady,
    )
    via_poles = expand_chain(chain).evaluate({"w1": u})
    via_solves = chain_value(chain, {"w1": u})
    assert np.max(np.abs(via_poles - via_solves)) < 1e-11


# ----------------------------------------------------------------- failures


def test_pole_on_real_axis_rejected():
    bad = scalar_decomp(-1e-12 - 0.5j)
    good = scalar_decomp(-1.0 + 0.2j)
    chain = Chain(ops=(GreenFactor(bad, +1), GreenFactor(good, -1)))
    with pytest.raises(DegenerateSpectrumError):
        integrate_chains([chain])


def test_near_collision_rejected():
    a = scalar_decomp(-1.0 + 0.3j)
    b = scalar_decomp(-1.0 + 0.3j + 3e-10)
    anchor = scalar_decomp(-1.0 - 0.2j)
    chain = Chain(ops=(GreenFactor(a, +1), GreenFactor(b, +1), GreenFactor(anchor, -1)))
    with pytest.raises(PoleCollisionError):
        integrate_chains([chain])


def test_nonintegrable_decay_rejected():
    s = make(2.0)
    single = Chain(ops=(GreenFactor(s.decomp, +1),), seed=s.steady, extract=0)
    with pytest.raises(ValueError):
        integrate_chains([single])


def test_missing_variable_rejected():
    s = make(2.0)
    chain = Chain(ops=(GreenFactor(s.decomp, +1), GreenFactor(s.decomp, -1)), seed=s.steady)
    with pytest.raises(ValueError):
        integrate_chains([chain], variables=("w1", "w2"))


def test_constant_requires_full_integration():
    s = make(2.0)
    ps = expand_chain(Chain(ops=(GreenFactor(s.decomp, +1),), seed=s.steady))
    with pytest.raises(ValueError):
        ps.constant()


def test_extract_requires_seed():
    s = make(2.0)
    with pytest.raises(ValueError):
        Chain(ops=(GreenFactor(s.decomp, +1),), extract=0)
