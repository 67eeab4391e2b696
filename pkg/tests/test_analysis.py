import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffpia import analysis as an
from ffpia import circuits as cc
from ffpia.quadnet import V0

from conftest import analytic

INF = -math.inf


def test_variance_db():
    assert an.variance_db(3 * V0) == pytest.approx(10 * math.log10(3))
    with pytest.raises(an.AnalysisError):
        an.variance_db(0.0)


def test_duan_on_vacua_is_boundary():
    w = an.duan_witness(V0 * np.eye(4), 0, 1)
    assert w.value == pytest.approx(1.0) and w.bound == 1.0
    assert w.margin_dB == pytest.approx(0.0) and not w.entangled


def test_duan_rejects_same_mode():
    with pytest.raises(an.AnalysisError):
        an.duan_witness(V0 * np.eye(4), 1, 1)


def test_simon_on_product_state():
    assert an.simon_ppt_min_eig(V0 * np.eye(4), [0]) == pytest.approx(V0)
    with pytest.raises(an.AnalysisError):
        an.simon_ppt_min_eig(V0 * np.eye(4), [0, 1])
    with pytest.raises(an.AnalysisError):
        an.simon_ppt_min_eig(np.zeros((4, 4)), [0])


@pytest.mark.parametrize("s_db", [-10.0, -5.0, -2.0, -0.5])
def test_pia_outputs_entangled_for_any_squeezing(s_db):
    p = cc.build_pia_program(cc.PiaParams(gain=2.0, ancilla_A_dB=s_db, ancilla_B_dB=s_db))
    _, c = analytic(p)
    assert an.duan_witness(c, 0, 1).entangled
    assert an.simon_ppt_min_eig(c, [0]) < V0


def test_epr_ideal_and_vacuum():
    _, c = analytic(cc.build_ideal_pia_program(2.0))
    db = an.epr_variances(c).db()
    ideal = 10 * math.log10(3 - 2 * math.sqrt(2))
    assert db["x_minus"] == pytest.approx(ideal, abs=1e-9)
    assert db["x_plus"] == pytest.approx(-ideal, abs=1e-9)
    p = cc.build_pia_program(cc.PiaParams(gain=2.0, ancilla_A_dB=0.0, ancilla_B_dB=0.0))
    db = an.epr_variances(analytic(p)[1]).db()
    assert abs(db["x_minus"]) < 1e-12 and abs(db["p_plus"]) < 1e-12


def test_reconstruction_ideal_exact():
    m, c = analytic(cc.build_ideal_pia_program(2.0).displaced("1", 0.7, -0.2))
    for mode in (0, 1):
        r = an.reconstruct_pia(m, c, mode)
        assert abs(r.db_x) < 1e-12 and abs(r.db_p) < 1e-12
    r = an.reconstruct_pia(m, c, 0)
    assert (r.mean_x, r.mean_p) == pytest.approx((0.7, -0.2), abs=1e-12)


def test_reconstruction_m5(pia_m5):
    m, c = analytic(pia_m5)
    r = an.reconstruct_pia(m, c, 0)
    assert r.var_x == pytest.approx(0.4408603, abs=1e-7)
    assert r.db_x < 10 * math.log10(2)


def test_reconstruct_shape_errors():
    with pytest.raises(an.AnalysisError):
        an.reconstruct_pia(np.zeros(6), np.eye(6), 0)
    with pytest.raises(an.AnalysisError):
        an.reconstruct_clone(np.zeros(4), np.eye(4))


def test_clone_noise_convention():
    assert an.clone_noise(V0, V0) == 0.0
    assert an.clone_noise(2 * V0, 2 * V0) == 0.5
    assert an.fidelity(0.5) == pytest.approx(2 / 3)


def test_added_noise_checks_gain():
    c = 2 * V0 * np.eye(4)
    b = an.added_noise(c, [0, 1])
    assert b.n == (0.5, 0.5)
    assert b.fidelities == pytest.approx((2 / 3, 2 / 3))
    with pytest.raises(an.AnalysisError):
        an.added_noise(c, [0, 1], mean_gains=[0.95, 1.0])


def test_mean_gain():
    assert an.mean_gain(np.array([0.0, 2.0]), 0, (0.0, 1.0)) == 2.0
    with pytest.raises(an.AnalysisError):
        an.mean_gain(np.zeros(2), 0, (0.0, 0.0))


@pytest.mark.parametrize("K,L", [(1, 2), (2, 3), (1, 3), (3, 5)])
def test_kl_formulas(K, L):
    n = an.kl_symmetric_noise(K, L)
    assert n == pytest.approx(1 / K - 1 / L)
    assert an.kl_limit_fidelity(K, L) == pytest.approx(an.fidelity(n))
    assert an.kl_classical_fidelity(K) == K / (K + 1)
    assert abs(an.kl_noise_relation([n] * L, K, L)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(n1=st.floats(1e-3, 1e3))
def test_asymmetric_partner_saturates(n1):
    n2 = an.asymmetric_partner(n1)
    assert n1 * n2 == pytest.approx(0.25)
    assert abs(an.kl_noise_relation([n1, n2], 1, 2)) < 1e-9 * (1 + n1 + n2)


def test_cloning_cost():
    assert an.cloning_cost([0.5, 0.5], [1, 2]) == 1.5
    with pytest.raises(an.AnalysisError):
        an.cloning_cost([0.5], [1, 2])


def test_fidelity_report():
    rep = an.fidelity_report(an.NoiseBudget((0.5, 0.5)))
    assert rep.cloning_limit == pytest.approx(2 / 3) and rep.classical_limit == 0.5


def test_kl_validation():
    with pytest.raises(an.AnalysisError):
        an.kl_symmetric_noise(3, 3)
    with pytest.raises(an.AnalysisError):
        an.kl_noise_relation([0.1], 1, 2)
