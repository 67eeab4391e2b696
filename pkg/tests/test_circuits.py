import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffpia import analysis as an
from ffpia import circuits as cc
from ffpia import quadnet as qn
from ffpia.quadnet import V0

from conftest import SQRT2, analytic

INF = -math.inf


def test_gain_two_reflectivity():
    assert abs(cc.gain_to_reflectivity(2.0) - (3 - 2 * SQRT2)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(G=st.floats(1.0, 1e4))
def test_gain_roundtrip(G):
    assert cc.reflectivity_to_gain(cc.gain_to_reflectivity(G)) == pytest.approx(G, rel=1e-12)


@pytest.mark.parametrize("bad", [0.5, -1.0, math.nan])
def test_gain_rejects_below_one(bad):
    with pytest.raises(cc.CircuitError):
        cc.gain_to_reflectivity(bad)


def test_params_need_exactly_one_of_gain_reflectivity():
    with pytest.raises(cc.CircuitError):
        cc.PiaParams()
    with pytest.raises(cc.CircuitError):
        cc.PiaParams(gain=2.0, reflectivity=0.2)
    assert cc.PiaParams(reflectivity=3 - 2 * SQRT2).G == pytest.approx(2.0)


def test_ffw_pia_main_block_is_ideal_map():
    p = cc.build_pia_program(cc.PiaParams(gain=2.0, ancilla_A_dB=INF, ancilla_B_dB=INF))
    net, _ = cc.to_network(p)
    M = net.coefficient_matrix(["1", "2", "A", "B"])
    a = math.sqrt(2.0)
    assert np.allclose(M[:, :4], cc.ideal_pia(2.0), atol=1e-14)
    assert M[0, 0] == pytest.approx(a, abs=1e-15)
    assert M[0, 2] == pytest.approx(1.0, abs=1e-15)
    # ancilla x_A and p_B enter, the antisqueezed p_A and x_B never do
    assert np.all(M[:, 5] == 0) and np.all(M[:, 6] == 0)
    assert abs(M[0, 4]) == pytest.approx(0.6435942529, abs=1e-10)


@pytest.mark.parametrize("G", [1.0, 1.5, 2.0, 4.0, 10.0])
@pytest.mark.parametrize("theta", [0.0, 0.4, math.pi / 2])
def test_ideal_program_matches_ideal_map(G, theta):
    st_ = cc.to_gaussian(cc.build_ideal_pia_program(G, theta))
    T = cc.ideal_pia(G, theta)
    assert np.allclose(st_.cov, V0 * T @ T.T, atol=1e-12)
    m, c = analytic(cc.build_ideal_pia_program(G, theta))
    assert np.allclose(c, st_.cov, atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.7])
def test_ffw_limit_matches_ideal_program(theta):
    p = cc.build_pia_program(cc.PiaParams(gain=3.0, theta=theta, ancilla_A_dB=INF, ancilla_B_dB=INF))
    _, c1 = analytic(p)
    _, c2 = analytic(cc.build_ideal_pia_program(3.0, theta))
    assert np.allclose(c1, c2, atol=1e-12)


def test_pia_commutators_preserved(pia_m5):
    net, _ = cc.to_network(pia_m5)
    C = qn.commutator_matrix(net)
    assert np.allclose(C, qn.omega(2), atol=1e-12)


@pytest.mark.parametrize("build", [
    lambda: cc.build_pia_program(cc.PiaParams(gain=2.0)),
    lambda: cc.build_pia_program(cc.PiaParams(gain=3.3, theta=0.3, anti_excess_dB=2.0)),
    lambda: cc.build_cloner_program(),
    lambda: cc.build_cloner_program().displaced("1", 0.4, -1.0),
    lambda: cc.build_pia_program(cc.PiaParams(gain=2.0, imperfections=cc.ImperfectionModel())),
    lambda: cc.build_cloner_program(cc.ClonerParams(
        cc.PiaParams(gain=2.0, imperfections=cc.ImperfectionModel()), 0.3)),
    lambda: cc.build_kl_program(cc.KlClonerParams(2, 3, ancilla_dB=-5.0), original=(1.0, 0.2)),
])
def test_engines_agree(build):
    p = build()
    m1, c1 = analytic(p)
    st_ = cc.to_gaussian(p)
    assert np.allclose(m1, st_.mean, atol=1e-10)
    assert np.allclose(c1, st_.cov, atol=1e-10)


def test_m5_pia_output_variance(pia_m5):
    _, c = analytic(pia_m5)
    assert np.allclose(np.diag(c), 0.7827459, atol=1e-6)


def test_vacuum_ancilla_output_variance():
    p = cc.build_pia_program(cc.PiaParams(gain=2.0, ancilla_A_dB=0.0, ancilla_B_dB=0.0))
    _, c = analytic(p)
    assert np.allclose(np.diag(c), 0.8535534, atol=1e-6)


def test_reflectivity_one_is_identity():
    p = cc.build_pia_program(cc.PiaParams(gain=1.0))
    m, c = analytic(p.displaced("1", 0.5, 0.0))
    assert np.allclose(c, V0 * np.eye(4), atol=1e-14)
    assert m[0] == pytest.approx(0.5)


def test_cloner_ideal_outputs():
    m, c = analytic(cc.build_ideal_cloner_program().displaced("1", 1.0, 0.5))
    assert np.allclose(np.diag(c), [2 * V0] * 4 + [3 * V0] * 2, atol=1e-14)
    assert np.allclose(m, [1.0, 0.5, 1.0, 0.5, 1.0, -0.5], atol=1e-14)


def test_cloner_rejects_other_gains():
    with pytest.raises(cc.CircuitError):
        cc.ClonerParams(cc.PiaParams(gain=3.0))


def test_program_dict_roundtrip(cloner_m5):
    d = json.loads(json.dumps(cloner_m5.to_dict()))
    back = cc.Program.from_dict(d)
    assert back == cloner_m5


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), n=st.integers(2, 7))
def test_givens_decompose_reconstructs(seed, n):
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    rots, d = cc.givens_decompose(U)
    R = np.diag(d)
    for i, j, c, s in reversed(rots):
        G = np.eye(n)
        G[[i, i, j, j], [i, j, i, j]] = [c, s, -s, c]
        R = G.T @ R
    assert np.allclose(R, U, atol=1e-10)


@pytest.mark.parametrize("K,L", [(1, 2), (2, 3), (1, 3), (3, 5), (2, 5)])
def test_kl_symmetric_noise(K, L):
    p = cc.build_kl_program(cc.KlClonerParams(K, L))
    _, c = analytic(p)
    n = [an.clone_noise(c[2 * k, 2 * k], c[2 * k + 1, 2 * k + 1]) for k in range(L)]
    assert np.allclose(n, 1 / K - 1 / L, atol=1e-9)
    assert abs(an.kl_noise_relation(n, K, L)) < 1e-10


@pytest.mark.parametrize("K,L", [(1, 2), (2, 3), (3, 5)])
def test_kl_means(K, L):
    p = cc.build_kl_program(cc.KlClonerParams(K, L), original=(0.8, -0.3))
    m, _ = analytic(p)
    assert np.allclose(m[: 2 * L].reshape(L, 2), [0.8, -0.3], atol=1e-12)
    assert np.allclose(m[2 * L:].reshape(L - K, 2), [0.8, 0.3], atol=1e-12)


def test_kl_asymmetric_targets():
    p = cc.build_kl_program(cc.KlClonerParams(1, 2, noise_targets=(0.25, 1.0)))
    _, c = analytic(p)
    n = [an.clone_noise(c[2 * k, 2 * k], c[2 * k + 1, 2 * k + 1]) for k in range(2)]
    assert np.allclose(n, [0.25, 1.0], atol=1e-9)
    assert cc.kl_gain(cc.KlClonerParams(1, 2, noise_targets=(0.25, 1.0))) == pytest.approx(2.25)


def test_kl_rejects_infeasible_targets():
    with pytest.raises(cc.CircuitError):
        cc.build_kl_program(cc.KlClonerParams(1, 2, noise_targets=(0.1, 0.1)))
    with pytest.raises(cc.CircuitError):
        cc.KlClonerParams(2, 2)


def test_imperfections_keep_physical_and_reduce_gain():
    model = cc.ImperfectionModel()
    p = cc.build_cloner_program(cc.ClonerParams(cc.PiaParams(gain=2.0, imperfections=model)))
    st_ = cc.to_gaussian(p.displaced("1", 1.0, 0.0))
    from ffpia.gaussian import is_physical
    assert is_physical(st_)
    g = an.mean_gain(st_.mean, 0, (1.0, 0.0))
    assert g == pytest.approx(math.sqrt(0.93 * 0.99), rel=1e-12)


def test_perfect_imperfection_model_is_noop(pia_m5):
    p = cc.apply_imperfections(pia_m5, cc.ImperfectionModel.perfect())
    assert np.allclose(analytic(p)[1], analytic(pia_m5)[1], atol=1e-14)


def test_imperfection_model_validation():
    with pytest.raises(cc.CircuitError):
        cc.ImperfectionModel(visibility=1.2)
