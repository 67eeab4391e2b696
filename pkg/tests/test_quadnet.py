import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffpia import quadnet as qn
from ffpia.quadnet import V0

refl = st.floats(0.0, 1.0)
angle = st.floats(-2 * math.pi, 2 * math.pi)


def test_beamsplitter_convention():
    net = qn.apply_beamsplitter(qn.new_network(["a", "b"]), "a", "b", 0.3)
    t, r = math.sqrt(0.7), math.sqrt(0.3)
    assert net.x("a").coeff("a", "x") == t
    assert net.x("a").coeff("b", "x") == r
    assert net.x("b").coeff("a", "x") == -r
    assert net.p("b").coeff("b", "p") == t


def test_phase_quarter_turn_is_exact():
    net = qn.apply_phase(qn.new_network(["a"]), "a", math.pi / 2)
    assert dict(net.x("a").coeffs) == {("a", "p"): -1.0}
    assert dict(net.p("a").coeffs) == {("a", "x"): 1.0}


def test_squeeze_scales_quadratures():
    net = qn.apply_squeeze(qn.new_network(["a"]), "a", 0.5)
    assert net.x("a").coeff("a", "x") == pytest.approx(math.exp(-0.5))
    assert net.p("a").coeff("a", "p") == pytest.approx(math.exp(0.5))


@settings(max_examples=50, deadline=None)
@given(R1=refl, R2=refl, phi=angle, r=st.floats(-2, 2))
def test_unitary_networks_preserve_commutators(R1, R2, phi, r):
    net = qn.new_network(["a", "b", "c"])
    net = qn.apply_beamsplitter(net, "a", "b", R1)
    net = qn.apply_phase(net, "b", phi)
    net = qn.apply_squeeze(net, "c", r)
    net = qn.apply_beamsplitter(net, "c", "a", R2)
    assert np.allclose(qn.commutator_matrix(net), qn.omega(3), atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(eta=st.floats(0, 1), vx=st.floats(0.3, 3))
def test_loss_mixes_in_vacuum(eta, vx):
    net = qn.apply_loss(qn.new_network(["a"]), "a", eta, "v")
    ens = qn.InputEnsemble({"a": qn.ModeStats(1.0, 0.0, vx, V0 * V0 / vx * 2)},
                           default_vacuum=True)
    m, c = qn.output_moments(net, ens)
    assert m[0] == pytest.approx(math.sqrt(eta))
    assert c[0, 0] == pytest.approx(eta * vx + (1 - eta) * V0)


def test_loss_rejects_reused_label():
    net = qn.new_network(["a", "v"])
    with pytest.raises(qn.NetworkError):
        qn.apply_loss(net, "a", 0.5, "v")


def test_cancel_removes_key_exactly():
    net = qn.new_network(["m", "t"])
    net = qn.apply_beamsplitter(net, "m", "t", 0.37)
    out = qn.measure_feedforward(net, "m", "x", [("t", "x", qn.Cancel("m", "x"))])
    assert out.x("t").coeff("m", "x") == 0.0
    assert ("m", "x") not in out.x("t").coeffs
    assert out.live_modes == ("t",)
    g = qn.feedforward_gains(net, "m", "x", [("t", "x", qn.Cancel("m", "x"))])[0]
    assert g == pytest.approx(math.sqrt(0.37 / 0.63))


def test_feedforward_errors():
    net = qn.new_network(["m", "t"])
    with pytest.raises(qn.NetworkError):
        qn.measure_feedforward(net, "m", "x", [("m", "x", 1.0)])
    with pytest.raises(qn.NetworkError):
        qn.measure_feedforward(net, "m", "x", [("t", "x", qn.Cancel("t", "x"))])
    with pytest.raises(ValueError):
        qn.measure_feedforward(net, "m", "q", [("t", "x", 1.0)])


def test_beamsplitter_validation():
    net = qn.new_network(["a", "b"])
    with pytest.raises(qn.NetworkError):
        qn.apply_beamsplitter(net, "a", "b", 1.5)
    with pytest.raises(qn.NetworkError):
        qn.apply_beamsplitter(net, "a", "a", 0.5)


def test_infinite_squeezing_limit():
    st_ = qn.ModeStats.squeezed(-math.inf, "x")
    assert st_.var_x == 0 and math.isinf(st_.var_p)
    # a network that never touches the antisqueezed quadrature stays finite
    net = qn.new_network(["a"])
    m, c = qn.output_moments(net, qn.InputEnsemble({"a": st_}))
    assert c[0, 0] == 0.0


def test_modestats_uncertainty():
    with pytest.raises(ValueError):
        qn.ModeStats(0, 0, 0.1, 0.1)
    s = qn.ModeStats.squeezed(-3.0, "p", anti_excess_db=1.0)
    assert s.var_p == pytest.approx(V0 * 10 ** -0.3)
    assert s.var_x * s.var_p == pytest.approx(V0 ** 2 * 10 ** 0.1)


def test_rename_and_reorder():
    net = qn.new_network(["a", "b"])
    net = qn.rename(net, "a", "c")
    assert net.live_modes == ("c", "b")
    net = qn.reorder(net, ["b", "c"])
    assert net.live_modes == ("b", "c")
    with pytest.raises(qn.NetworkError):
        qn.rename(net, "b", "c")
    with pytest.raises(qn.NetworkError):
        qn.reorder(net, ["b"])


def test_combine_and_expr_stats():
    net = qn.apply_beamsplitter(qn.new_network(["a", "b"]), "a", "b", 0.5)
    ens = qn.InputEnsemble(default_vacuum=True)
    # x_a' + x_b' = sqrt2 x_b, variance 2 V0
    assert qn.expr_covariance(net, ens, [("a", "x", 1), ("b", "x", 1)]) == pytest.approx(2 * V0)
    assert qn.expr_mean(net, ens, [("a", "x", 1)]) == 0.0


def test_displacement_constant():
    net = qn.apply_displacement(qn.new_network(["a"]), "a", 1.0, -2.0)
    assert list(net.constants()) == [1.0, -2.0]
