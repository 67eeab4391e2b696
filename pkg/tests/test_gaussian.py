import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffpia import gaussian as gs
from ffpia.quadnet import V0


def test_vacuum_and_coherent():
    v = gs.vacuum(2)
    assert v.n_modes == 2
    assert np.array_equal(v.cov, V0 * np.eye(4))
    c = gs.coherent(1.0, -0.5)
    assert list(c.mean) == [1.0, -0.5]


def test_state_is_read_only():
    v = gs.vacuum(1)
    with pytest.raises(ValueError):
        v.cov[0, 0] = 1.0


def test_state_validation():
    with pytest.raises(gs.GaussianError):
        gs.GaussianState(np.zeros(2), np.eye(3))
    with pytest.raises(gs.GaussianError):
        gs.GaussianState(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))


@pytest.mark.parametrize("s_db", [-10.0, -5.0, -1.0, 0.0])
@pytest.mark.parametrize("axis", ["x", "p"])
def test_squeezed_vacuum(s_db, axis):
    s = gs.squeezed_vacuum(s_db, axis)
    i = 0 if axis == "x" else 1
    assert 10 * math.log10(s.cov[i, i] / V0) == pytest.approx(s_db)
    assert np.linalg.det(s.cov) == pytest.approx(V0 ** 2)
    assert gs.is_physical(s)


def test_squeezed_vacuum_rejects_bad_input():
    with pytest.raises(gs.GaussianError):
        gs.squeezed_vacuum(-math.inf)
    with pytest.raises(gs.GaussianError):
        gs.squeezed_vacuum(-3.0, anti_excess_db=-1)


@settings(max_examples=40, deadline=None)
@given(R=st.floats(0, 1), phi=st.floats(-7, 7), r=st.floats(-1.5, 1.5))
def test_elements_are_symplectic(R, phi, r):
    from ffpia.quadnet import is_symplectic
    for el in (gs.beamsplitter(0, 1, R), gs.phase(1, phi), gs.squeeze(0, r)):
        S, _ = el.matrix(2)
        assert is_symplectic(S, atol=1e-9)


def test_beamsplitter_matches_quadnet_convention():
    S, _ = gs.beamsplitter(0, 1, 0.25).matrix(2)
    assert S[0, 0] == pytest.approx(math.sqrt(0.75))
    assert S[0, 2] == pytest.approx(0.5)
    assert S[2, 0] == pytest.approx(-0.5)


def test_partial_trace_and_tensor():
    s = gs.tensor(gs.coherent(1, 2), gs.squeezed_vacuum(-3))
    r = gs.partial_trace(s, [1])
    assert np.allclose(r.cov, gs.squeezed_vacuum(-3).cov)
    with pytest.raises(gs.GaussianError):
        gs.partial_trace(s, [2])


@pytest.mark.parametrize("eta", [0.0, 0.5, 0.93, 1.0])
def test_loss_channel(eta):
    s = gs.loss_channel(gs.squeezed_vacuum(-6.0), 0, eta)
    vs = V0 * 10 ** -0.6
    assert s.cov[0, 0] == pytest.approx(eta * vs + (1 - eta) * V0)
    assert gs.is_physical(s)


def test_homodyne_conditioning_two_mode(rng):
    # perfectly correlated pair: conditioning on x of mode 0 pins x of mode 1
    st_ = gs.apply(gs.tensor(gs.squeezed_vacuum(-10, "p"), gs.vacuum()), gs.beamsplitter(0, 1, 0.5))
    c, var, k, rest = gs.homodyne_gain(st_, 0, 0.0)
    assert var > 0
    out, cond = gs.homodyne(st_, 0, 0.0, rng)
    assert cond.n_modes == 1
    assert cond.cov[0, 0] < st_.cov[2, 2]


def test_feedforward_average_equals_sampled_average(rng):
    st_ = gs.apply(gs.tensor(gs.squeezed_vacuum(-4, "x"), gs.coherent(0.3, 0.1)),
                   gs.beamsplitter(0, 1, 0.4))
    avg = gs.feedforward_average(st_, 0, "x", [(1, "p", 0.7)])
    outs = []
    for _ in range(4000):
        q, cond = gs.homodyne(st_, 0, 0.0, rng)
        outs.append(gs.displace_by(cond, 0, 0.0, 0.7, q).mean)
    outs = np.array(outs)
    assert np.allclose(outs.mean(axis=0), avg.mean, atol=0.05)


def test_symplectic_eigenvalues_of_thermal():
    s = gs.GaussianState(np.zeros(2), 3 * V0 * np.eye(2))
    assert gs.symplectic_eigenvalues(s.cov)[0] == pytest.approx(3 * V0)
    assert not gs.is_physical(gs.GaussianState(np.zeros(2), 0.5 * V0 * np.eye(2)))
