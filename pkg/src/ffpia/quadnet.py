"""Heisenberg-picture linear-form engine.

Every live mode carries its ``x`` and ``p`` quadrature as an exact linear
combination of the primordial input quadratures plus a real constant.  Circuit
identities can therefore be checked coefficient by coefficient.

Beamsplitter convention (used everywhere in the package)::

    x_a' =  sqrt(1-R) x_a + sqrt(R) x_b
    x_b' = -sqrt(R)   x_a + sqrt(1-R) x_b      (same for p)

Vacuum variance per quadrature is ``V0 = 1/4`` (``a = x + i p``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

V0 = 0.25
AXES = ("x", "p")

ModeId = Hashable
Key = tuple  # (ModeId, axis)


class NetworkError(ValueError):
    """Invalid operation on a :class:`NetworkState`."""


def _check_axis(axis: str) -> str:
    if axis not in AXES:
        raise NetworkError(f"axis must be 'x' or 'p', got {axis!r}")
    return axis


@dataclass(frozen=True)
class QuadExpr:
    """Sparse real linear form ``sum coeff * q + constant``.

    Entries that become exactly zero are dropped; nothing is pruned by
    tolerance.
    """

    coeffs: Mapping[Key, float] = field(default_factory=dict)
    constant: float = 0.0

    def __post_init__(self):
        clean = {}
        for k, v in dict(self.coeffs).items():
            v = float(v)
            if not math.isfinite(v):
                raise NetworkError(f"non-finite coefficient for {k!r}")
            if v != 0.0:
                clean[k] = v
        object.__setattr__(self, "coeffs", MappingProxyType(clean))
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def unit(cls, mode: ModeId, axis: str) -> "QuadExpr":
        return cls({(mode, _check_axis(axis)): 1.0})

    def coeff(self, mode: ModeId, axis: str) -> float:
        return self.coeffs.get((mode, axis), 0.0)

    def scaled(self, s: float) -> "QuadExpr":
        return QuadExpr({k: s * v for k, v in self.coeffs.items()}, s * self.constant)

    def __add__(self, other: "QuadExpr") -> "QuadExpr":
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return QuadExpr(out, self.constant + other.constant)

    def __neg__(self) -> "QuadExpr":
        return self.scaled(-1.0)

    def __sub__(self, other: "QuadExpr") -> "QuadExpr":
        return self + (-other)

    def shifted(self, c: float) -> "QuadExpr":
        return QuadExpr(self.coeffs, self.constant + c)

    def without(self, key: Key) -> "QuadExpr":
        out = dict(self.coeffs)
        out.pop(key, None)
        return QuadExpr(out, self.constant)


def _lin(a: float, ea: QuadExpr, b: float, eb: QuadExpr) -> QuadExpr:
    return ea.scaled(a) + eb.scaled(b)


@dataclass(frozen=True)
class NetworkState:
    """Live output modes and their quadrature expressions."""

    live_modes: tuple
    exprs: Mapping[ModeId, tuple]
    inputs: tuple

    def x(self, mode: ModeId) -> QuadExpr:
        return self._get(mode)[0]

    def p(self, mode: ModeId) -> QuadExpr:
        return self._get(mode)[1]

    def expr(self, mode: ModeId, axis: str) -> QuadExpr:
        return self._get(mode)[AXES.index(_check_axis(axis))]

    def _get(self, mode):
        try:
            return self.exprs[mode]
        except KeyError:
            raise NetworkError(f"mode {mode!r} is not live") from None

    def _replace(self, updates: dict, live=None, inputs=None) -> "NetworkState":
        exprs = dict(self.exprs)
        exprs.update(updates)
        live = self.live_modes if live is None else tuple(live)
        exprs = {m: exprs[m] for m in live}
        return NetworkState(live, MappingProxyType(exprs), self.inputs if inputs is None else inputs)

    def coefficient_matrix(self, order: Sequence[ModeId] | None = None) -> np.ndarray:
        """Stacked coefficient matrix, rows (x, p) per live mode, columns per input.

        ``order`` fixes the input column order; it defaults to the live-mode
        order, which is what the symplectic check needs for closed networks.
        """
        order = list(self.live_modes if order is None else order)
        cols = {(m, a): 2 * i + j for i, m in enumerate(order) for j, a in enumerate(AXES)}
        S = np.zeros((2 * len(self.live_modes), 2 * len(order)))
        for i, m in enumerate(self.live_modes):
            for j, e in enumerate(self.exprs[m]):
                for k, v in e.coeffs.items():
                    if k not in cols:
                        raise NetworkError(f"coefficient on {k!r} outside the column order")
                    S[2 * i + j, cols[k]] = v
        return S

    def constants(self) -> np.ndarray:
        return np.array([e.constant for m in self.live_modes for e in self.exprs[m]])


def commutator_matrix(net: NetworkState) -> np.ndarray:
    """``S Omega S^T`` over all primordial inputs; equals ``omega(n_live)`` when
    the network preserves the output commutators."""
    S = net.coefficient_matrix(net.inputs)
    return S @ omega(len(net.inputs)) @ S.T


def omega(n: int) -> np.ndarray:
    """Symplectic form for ordering (x1, p1, x2, p2, ...)."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def is_symplectic(S: np.ndarray, atol: float = 1e-12) -> bool:
    if S.shape[0] != S.shape[1] or S.shape[0] % 2:
        return False
    W = omega(S.shape[0] // 2)
    return bool(np.allclose(S @ W @ S.T, W, atol=atol, rtol=0))


def new_network(inputs: Iterable[ModeId]) -> NetworkState:
    inputs = list(inputs)
    if len(set(inputs)) != len(inputs):
        raise NetworkError("duplicate input labels")
    exprs = {m: (QuadExpr.unit(m, "x"), QuadExpr.unit(m, "p")) for m in inputs}
    return NetworkState(tuple(inputs), MappingProxyType(exprs), tuple(inputs))


def apply_beamsplitter(net: NetworkState, a: ModeId, b: ModeId, R: float) -> NetworkState:
    if not 0.0 <= R <= 1.0:
        raise NetworkError(f"reflectivity {R} outside [0, 1]")
    if a == b:
        raise NetworkError("beamsplitter needs two distinct modes")
    t, r = math.sqrt(1.0 - R), math.sqrt(R)
    xa, pa = net._get(a)
    xb, pb = net._get(b)
    return net._replace({
        a: (_lin(t, xa, r, xb), _lin(t, pa, r, pb)),
        b: (_lin(-r, xa, t, xb), _lin(-r, pa, t, pb)),
    })


def apply_phase(net: NetworkState, m: ModeId, phi: float) -> NetworkState:
    x, p = net._get(m)
    c, s = math.cos(phi), math.sin(phi)
    # exact values at multiples of pi/2 keep coefficient tests exact
    c, s = _snap(c), _snap(s)
    return net._replace({m: (_lin(c, x, -s, p), _lin(s, x, c, p))})


def _snap(v: float) -> float:
    for t in (-1.0, 0.0, 1.0):
        if abs(v - t) < 1e-15:
            return t
    return v


def apply_squeeze(net: NetworkState, m: ModeId, r: float) -> NetworkState:
    """Single-mode squeezer: x -> e^-r x, p -> e^r p."""
    x, p = net._get(m)
    return net._replace({m: (x.scaled(math.exp(-r)), p.scaled(math.exp(r)))})


def apply_displacement(net: NetworkState, m: ModeId, dx: float, dp: float) -> NetworkState:
    x, p = net._get(m)
    return net._replace({m: (x.shifted(dx), p.shifted(dp))})


def apply_loss(net: NetworkState, m: ModeId, eta: float, vac: ModeId) -> NetworkState:
    """Mix mode ``m`` with a fresh vacuum input ``vac`` at transmission ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise NetworkError(f"transmission {eta} outside [0, 1]")
    if vac in net.inputs:
        raise NetworkError(f"label {vac!r} already used")
    x, p = net._get(m)
    t, r = math.sqrt(eta), math.sqrt(1.0 - eta)
    return net._replace(
        {m: (_lin(t, x, r, QuadExpr.unit(vac, "x")), _lin(t, p, r, QuadExpr.unit(vac, "p")))},
        inputs=net.inputs + (vac,),
    )


class Cancel:
    """Feedforward gain chosen so that ``key`` drops out of the target exactly.

    The gain is ``-c_target / c_measured`` for that key and the key's
    coefficient is set to zero by construction rather than by rounding.
    """

    def __init__(self, mode: ModeId, axis: str):
        self.key = (mode, _check_axis(axis))

    def __repr__(self):
        return f"Cancel{self.key!r}"


def measure_feedforward(net: NetworkState, measured: ModeId, axis: str,
                        targets: Sequence[tuple]) -> NetworkState:
    """Homodyne ``axis`` of ``measured`` and feed the outcome forward.

    ``targets`` holds ``(mode, axis, gain)`` triples; ``gain`` may be a float
    or a :class:`Cancel`.  The measured mode leaves the live set.  Returns the
    new network; the gains actually used are available via
    :func:`feedforward_gains`.
    """
    return _measure_feedforward(net, measured, axis, targets)[0]


def feedforward_gains(net: NetworkState, measured: ModeId, axis: str,
                      targets: Sequence[tuple]) -> list[float]:
    return _measure_feedforward(net, measured, axis, targets)[1]


def _measure_feedforward(net, measured, axis, targets):
    q = net.expr(measured, axis)
    updates, gains = {}, []
    for mode, t_axis, gain in targets:
        if mode == measured:
            raise NetworkError("feedforward target equals measured mode")
        cur = updates.get(mode, net._get(mode))
        idx = AXES.index(_check_axis(t_axis))
        e = cur[idx]
        if isinstance(gain, Cancel):
            cm = q.coeffs.get(gain.key, 0.0)
            if cm == 0.0:
                raise NetworkError(f"measured quadrature has no {gain.key!r} component")
            g = -e.coeff(*gain.key) / cm
            new = (e + q.scaled(g)).without(gain.key)
        else:
            g = float(gain)
            new = e + q.scaled(g)
        gains.append(g)
        cur = (new, cur[1]) if idx == 0 else (cur[0], new)
        updates[mode] = cur
    live = [m for m in net.live_modes if m != measured]
    if measured not in net.exprs:
        raise NetworkError(f"mode {measured!r} is not live")
    return net._replace(updates, live=live), gains


def rename(net: NetworkState, old: ModeId, new: ModeId) -> NetworkState:
    """Relabel a live output mode (input labels inside expressions are untouched)."""
    if new in net.exprs and new != old:
        raise NetworkError(f"mode {new!r} already live")
    net._get(old)  # raises if not live
    live = [new if m == old else m for m in net.live_modes]
    exprs = {(new if m == old else m): v for m, v in net.exprs.items()}
    return NetworkState(tuple(live), MappingProxyType(exprs), net.inputs)


def reorder(net: NetworkState, order: Sequence[ModeId]) -> NetworkState:
    if sorted(map(repr, order)) != sorted(map(repr, net.live_modes)):
        raise NetworkError("order must be a permutation of the live modes")
    return net._replace({}, live=order)


@dataclass(frozen=True)
class ModeStats:
    mean_x: float = 0.0
    mean_p: float = 0.0
    var_x: float = V0
    var_p: float = V0

    def __post_init__(self):
        if self.var_x < 0 or self.var_p < 0 or math.isnan(self.var_x) or math.isnan(self.var_p):
            raise ValueError("variances must be non-negative")
        # infinite squeezing is allowed as the limit (0, inf)
        if self.var_x * self.var_p < V0 * V0 * (1 - 1e-12) and not (
                math.isinf(self.var_x) or math.isinf(self.var_p)):
            raise ValueError("variances violate the uncertainty relation")

    @classmethod
    def squeezed(cls, s_db: float, axis: str = "x", anti_excess_db: float = 0.0,
                 mean_x: float = 0.0, mean_p: float = 0.0) -> "ModeStats":
        if anti_excess_db < 0:
            raise ValueError("anti_excess_db must be >= 0")
        if s_db == -math.inf:
            vs, va = 0.0, math.inf
        else:
            vs = V0 * 10 ** (s_db / 10)
            va = V0 * V0 / vs * 10 ** (anti_excess_db / 10)
        vx, vp = (vs, va) if axis == "x" else (va, vs)
        return cls(mean_x, mean_p, vx, vp)


class InputEnsemble(dict):
    """Mutually uncorrelated per-mode input statistics (mode -> ModeStats).

    Modes not listed are taken as vacuum when ``default_vacuum`` is set.
    """

    def __init__(self, *args, default_vacuum: bool = False, **kw):
        super().__init__(*args, **kw)
        self.default_vacuum = default_vacuum

    def stats(self, mode) -> ModeStats:
        if mode in self:
            return self[mode]
        if self.default_vacuum:
            return ModeStats()
        raise KeyError(f"no ensemble entry for input {mode!r}")


def _input_moments(ens: InputEnsemble, key):
    st = ens.stats(key[0])
    return (st.mean_x, st.var_x) if key[1] == "x" else (st.mean_p, st.var_p)


def _mean_of(e: QuadExpr, ens) -> float:
    return e.constant + sum(v * _input_moments(ens, k)[0] for k, v in e.coeffs.items())


def _cov_of(e1: QuadExpr, e2: QuadExpr, ens) -> float:
    small, big = (e1, e2) if len(e1.coeffs) <= len(e2.coeffs) else (e2, e1)
    tot = 0.0
    for k, v in small.coeffs.items():
        w = big.coeffs.get(k)
        if w is not None:
            tot += v * w * _input_moments(ens, k)[1]
    return tot


def output_moments(net: NetworkState, ens: InputEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and covariance of the live modes, order (x1, p1, x2, p2, ...)."""
    flat = [e for m in net.live_modes for e in net.exprs[m]]
    mean = np.array([_mean_of(e, ens) for e in flat])
    n = len(flat)
    cov = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            cov[i, j] = cov[j, i] = _cov_of(flat[i], flat[j], ens)
    return mean, cov


def combine(net: NetworkState, obs: Sequence[tuple]) -> QuadExpr:
    """Linear form of ``sum weight * q(mode, axis)`` over live modes."""
    tot = QuadExpr()
    for mode, axis, w in obs:
        tot = tot + net.expr(mode, axis).scaled(w)
    return tot


def expr_covariance(net: NetworkState, ens: InputEnsemble, obs: Sequence[tuple]) -> float:
    e = combine(net, obs)
    return _cov_of(e, e, ens)


def expr_mean(net: NetworkState, ens: InputEnsemble, obs: Sequence[tuple]) -> float:
    return _mean_of(combine(net, obs), ens)
