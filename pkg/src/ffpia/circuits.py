"""Circuit programs for the feedforward amplifier and the cloners.

A :class:`Program` is an immutable list of operations on labelled modes.  It
can be executed exactly in the Heisenberg picture (:func:`to_network`), as a
deterministic outcome-averaged Gaussian state (:func:`to_gaussian`), or shot
by shot with sampled homodyne outcomes (:func:`ffpia.sampling.monte_carlo_circuit`).

Layout of the amplifier: a half beamsplitter splits modes 1 and 2 into two
arms, each arm passes a feedforward squeezer (ancilla A squeezes x in one arm,
ancilla B squeezes p in the other) and a second half beamsplitter recombines.
Each feedforward squeezer mixes the arm with its ancilla at reflectivity
``R_bs = 1 - R`` and feeds the measured conjugate quadrature back with gain
``-sqrt(R_bs / (1 - R_bs))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import gaussian as gs
from . import quadnet as qn
from .quadnet import V0


class CircuitError(ValueError):
    pass


# ---------------------------------------------------------------- programs

@dataclass(frozen=True)
class InputSpec:
    label: str
    kind: str = "vacuum"          # vacuum | coherent | squeezed
    mean: tuple = (0.0, 0.0)
    s_db: float = 0.0
    axis: str = "x"
    anti_excess_db: float = 0.0
    role: str = "main"            # main | ancilla | vacuum

    def stats(self) -> qn.ModeStats:
        if self.kind == "squeezed":
            return qn.ModeStats.squeezed(self.s_db, self.axis, self.anti_excess_db, *self.mean)
        return qn.ModeStats(self.mean[0], self.mean[1], V0, V0)

    def state(self) -> gs.GaussianState:
        if self.kind == "squeezed":
            st = gs.squeezed_vacuum(self.s_db, self.axis, self.anti_excess_db)
            return gs.GaussianState(np.asarray(self.mean, float), st.cov)
        return gs.coherent(*self.mean)


@dataclass(frozen=True)
class Op:
    """One circuit step.

    kinds and params:
      beamsplitter (R,) on (a, b); phase (phi,); squeeze (r,);
      displace (dx, dp); loss (eta, tag); discard ();
      feedforward (axis, targets) with targets ``((mode, axis, gain, cancel), ...)``
      where ``cancel`` is ``None`` or an ``(input_label, axis)`` key;
      rename (new_label,).
    """

    kind: str
    modes: tuple
    params: tuple = ()


@dataclass(frozen=True)
class Program:
    inputs: tuple
    ops: tuple = ()
    outputs: tuple = ()
    main: tuple = ()      # output labels that count as main beams

    def input(self, label: str) -> InputSpec:
        for s in self.inputs:
            if s.label == label:
                return s
        raise CircuitError(f"no input {label!r}")

    def with_inputs(self, **updates) -> "Program":
        """Replace input specs by label, e.g. ``with_inputs(**{'1': spec})``."""
        new = tuple(updates.get(s.label, s) for s in self.inputs)
        return replace(self, inputs=new)

    def displaced(self, label: str, x: float, p: float) -> "Program":
        s = self.input(label)
        kind = "coherent" if s.kind == "vacuum" else s.kind
        return self.with_inputs(**{label: replace(s, kind=kind, mean=(x, p))})

    def to_dict(self) -> dict:
        return {
            "inputs": [vars(s) | {"mean": list(s.mean)} for s in self.inputs],
            "ops": [{"kind": o.kind, "modes": list(o.modes), "params": _jsonable(o.params)}
                    for o in self.ops],
            "outputs": list(self.outputs),
            "main": list(self.main),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Program":
        inputs = tuple(InputSpec(**(s | {"mean": tuple(s["mean"])})) for s in d["inputs"])
        ops = tuple(Op(o["kind"], tuple(o["modes"]), _untuple(o["kind"], o["params"]))
                    for o in d["ops"])
        return cls(inputs, ops, tuple(d["outputs"]), tuple(d.get("main", ())))


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    return x


def _untuple(kind, params):
    if kind == "feedforward":
        axis, targets = params
        return (axis, tuple((t[0], t[1], t[2], None if t[3] is None else tuple(t[3]))
                            for t in targets))
    return tuple(params)


class Builder:
    """Mutable helper for assembling a :class:`Program`."""

    def __init__(self, inputs: Sequence[InputSpec] = ()):
        self.inputs = list(inputs)
        self.ops: list[Op] = []

    def add_input(self, spec: InputSpec) -> str:
        if any(s.label == spec.label for s in self.inputs):
            raise CircuitError(f"duplicate input {spec.label!r}")
        self.inputs.append(spec)
        return spec.label

    def op(self, kind, *modes, params=()):
        self.ops.append(Op(kind, tuple(modes), tuple(params)))
        return self

    def beamsplitter(self, a, b, R):
        if not 0 <= R <= 1:
            raise CircuitError(f"reflectivity {R} outside [0, 1]")
        return self.op("beamsplitter", a, b, params=(R,))

    def phase(self, m, phi):
        return self.op("phase", m, params=(phi,))

    def squeeze(self, m, r):
        return self.op("squeeze", m, params=(r,))

    def loss(self, m, eta, tag="main"):
        return self.op("loss", m, params=(eta, tag))

    def feedforward(self, measured, axis, targets):
        t = tuple((m, a, float(g), c) for m, a, g, c in targets)
        return self.op("feedforward", measured, params=(axis, t))

    def rename(self, old, new):
        return self.op("rename", old, params=(new,))

    def discard(self, m):
        return self.op("discard", m)

    def rotation(self, i, j, c, s):
        """Real rotation ``[[c, s], [-s, c]]`` on modes (i, j) via beamsplitter and phases."""
        if c < 0:
            self.phase(i, math.pi).phase(j, math.pi)
            c, s = -c, -s
        if s < 0:
            self.phase(j, math.pi).beamsplitter(i, j, min(1.0, s * s)).phase(j, math.pi)
        elif s != 0:
            self.beamsplitter(i, j, min(1.0, s * s))
        return self

    def build(self, outputs, main=None) -> Program:
        outputs = tuple(outputs)
        return Program(tuple(self.inputs), tuple(self.ops), outputs,
                       outputs if main is None else tuple(main))


# ---------------------------------------------------------------- executors

def to_network(program: Program) -> tuple[qn.NetworkState, qn.InputEnsemble]:
    """Exact Heisenberg-picture execution."""
    net = qn.new_network([s.label for s in program.inputs])
    ens = qn.InputEnsemble({s.label: s.stats() for s in program.inputs})
    nloss = 0
    for op in program.ops:
        k = op.kind
        if k == "beamsplitter":
            net = qn.apply_beamsplitter(net, *op.modes, *op.params)
        elif k == "phase":
            net = qn.apply_phase(net, op.modes[0], op.params[0])
        elif k == "squeeze":
            net = qn.apply_squeeze(net, op.modes[0], op.params[0])
        elif k == "displace":
            net = qn.apply_displacement(net, op.modes[0], *op.params)
        elif k == "loss":
            vac = f"vac-loss-{nloss}"
            nloss += 1
            net = qn.apply_loss(net, op.modes[0], op.params[0], vac)
            ens[vac] = qn.ModeStats()
        elif k == "feedforward":
            axis, targets = op.params
            tg = [(m, a, qn.Cancel(*c) if c is not None else g) for m, a, g, c in targets]
            net = qn.measure_feedforward(net, op.modes[0], axis, tg)
        elif k == "discard":
            net = qn.measure_feedforward(net, op.modes[0], "x", [])
        elif k == "rename":
            net = qn.rename(net, op.modes[0], op.params[0])
        else:
            raise CircuitError(f"unknown op {k!r}")
    return qn.reorder(net, program.outputs), ens


def to_gaussian(program: Program) -> gs.GaussianState:
    """Outcome-averaged Schrödinger-picture execution."""
    labels = [s.label for s in program.inputs]
    state = gs.vacuum(0)
    for s in program.inputs:
        state = gs.tensor(state, s.state())
    state, labels = run_ops(state, labels, program.ops, _average_ff)
    keep = [labels.index(o) for o in program.outputs]
    return gs.partial_trace(state, keep)


def _average_ff(state, labels, op):
    axis, targets = op.params
    m = labels.index(op.modes[0])
    tg = [(labels.index(t[0]), t[1], t[2]) for t in targets]
    return gs.feedforward_average(state, m, axis, tg)


def run_ops(state, labels, ops, feedforward):
    """Apply ``ops`` to a Gaussian-like state; ``feedforward`` handles measurement.

    Shared by the deterministic and the Monte Carlo executors.
    """
    labels = list(labels)
    for op in ops:
        k = op.kind
        idx = [labels.index(m) for m in op.modes] if k != "rename" else None
        if k == "beamsplitter":
            state = gs.apply(state, gs.beamsplitter(idx[0], idx[1], op.params[0]))
        elif k == "phase":
            state = gs.apply(state, gs.phase(idx[0], op.params[0]))
        elif k == "squeeze":
            state = gs.apply(state, gs.squeeze(idx[0], op.params[0]))
        elif k == "displace":
            state = gs.apply(state, gs.displace(idx[0], *op.params))
        elif k == "loss":
            state = gs.loss_channel(state, idx[0], op.params[0])
        elif k == "feedforward":
            state = feedforward(state, labels, op)
            labels.pop(idx[0])
        elif k == "discard":
            state = gs.partial_trace(state, [i for i in range(len(labels)) if i != idx[0]])
            labels.pop(idx[0])
        elif k == "rename":
            labels[labels.index(op.modes[0])] = op.params[0]
        else:
            raise CircuitError(f"unknown op {k!r}")
    return state, labels


# ---------------------------------------------------------------- parameters

def gain_to_reflectivity(G: float) -> float:
    if not G >= 1:
        raise CircuitError(f"gain {G} < 1")
    # reciprocal form avoids cancellation at large gain
    return 1.0 / (math.sqrt(G) + math.sqrt(G - 1)) ** 2


def reflectivity_to_gain(R: float) -> float:
    if not 0 < R <= 1:
        raise CircuitError(f"reflectivity {R} outside (0, 1]")
    return (1 / math.sqrt(R) + math.sqrt(R)) ** 2 / 4


@dataclass(frozen=True)
class ImperfectionModel:
    main_path_loss: float = 0.07
    homodyne_efficiency: float = 0.99
    visibility: float = 0.98

    def __post_init__(self):
        for name in ("main_path_loss", "homodyne_efficiency", "visibility"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise CircuitError(f"{name}={v} outside [0, 1]")

    @classmethod
    def perfect(cls) -> "ImperfectionModel":
        return cls(0.0, 1.0, 1.0)


@dataclass(frozen=True)
class PiaParams:
    gain: float | None = None
    reflectivity: float | None = None
    theta: float = 0.0
    ancilla_A_dB: float = -5.0
    ancilla_B_dB: float = -5.0
    anti_excess_dB: float = 0.0
    imperfections: ImperfectionModel | None = None

    def __post_init__(self):
        if (self.gain is None) == (self.reflectivity is None):
            raise CircuitError("give exactly one of gain or reflectivity")
        if self.gain is not None:
            gain_to_reflectivity(self.gain)
        else:
            reflectivity_to_gain(self.reflectivity)
        if self.ancilla_A_dB > 0 or self.ancilla_B_dB > 0:
            raise CircuitError("ancilla squeezing levels must be <= 0 dB")
        if self.anti_excess_dB < 0:
            raise CircuitError("anti_excess_dB must be >= 0")

    @property
    def R(self) -> float:
        return self.reflectivity if self.reflectivity is not None else gain_to_reflectivity(self.gain)

    @property
    def G(self) -> float:
        return self.gain if self.gain is not None else reflectivity_to_gain(self.reflectivity)


@dataclass(frozen=True)
class ClonerParams:
    pia: PiaParams = field(default_factory=lambda: PiaParams(gain=2.0))
    final_bs_R: float = 0.5

    def __post_init__(self):
        if abs(self.pia.G - 2.0) > 1e-12:
            raise CircuitError("the 1->2 cloner needs a gain-2 amplifier")
        if not 0 <= self.final_bs_R <= 1:
            raise CircuitError("final_bs_R outside [0, 1]")


@dataclass(frozen=True)
class KlClonerParams:
    K: int
    L: int
    noise_targets: tuple | None = None
    ancilla_dB: float | None = None     # None: ideal two-mode squeezer

    def __post_init__(self):
        if not (isinstance(self.K, int) and isinstance(self.L, int) and 1 <= self.K < self.L):
            raise CircuitError("need integers 1 <= K < L")
        if self.noise_targets is None:
            n = 1 / self.K - 1 / self.L
            object.__setattr__(self, "noise_targets", (n,) * self.L)
        else:
            object.__setattr__(self, "noise_targets", tuple(float(v) for v in self.noise_targets))
        if len(self.noise_targets) != self.L or min(self.noise_targets) < 0:
            raise CircuitError("need L non-negative noise targets")


# ---------------------------------------------------------------- builders

def ideal_pia(G: float, theta: float = 0.0) -> np.ndarray:
    """4x4 quadrature map (x_s, p_s, x_i, p_i) of the optimal two-mode amplifier."""
    if not G >= 1:
        raise CircuitError(f"gain {G} < 1")
    a, b = math.sqrt(G), math.sqrt(G - 1)
    c, s = math.cos(theta), math.sin(theta)
    # e^{i theta} b (x - i p) = b (c x + s p) + i b (s x - c p)
    B = b * np.array([[c, s], [s, -c]])
    A = a * np.eye(2)
    return np.block([[A, B], [B, A]])


def _other(axis):
    return "p" if axis == "x" else "x"


def ffw_squeezer_ops(bld: Builder, main: str, ancilla: str, R_bs: float, squeeze_axis: str):
    """Append a feedforward squeezer.

    ``squeeze_axis`` of ``main`` is scaled by ``sqrt(1-R_bs)`` and picks up
    ``sqrt(R_bs)`` times the ancilla's squeezed quadrature; the conjugate axis
    is scaled by ``1/sqrt(1-R_bs)``.  The ancilla must be squeezed along
    ``squeeze_axis``.
    """
    if not 0 <= R_bs < 1:
        raise CircuitError(f"R_bs={R_bs} outside [0, 1)")
    amp = _other(squeeze_axis)
    if R_bs == 0:
        return bld.feedforward(ancilla, amp, [(main, amp, 0.0, None)])
    g = -math.sqrt(R_bs / (1 - R_bs))
    bld.beamsplitter(main, ancilla, R_bs)
    return bld.feedforward(ancilla, amp, [(main, amp, g, (ancilla, amp))])


def build_ffw_squeezer(net: qn.NetworkState, main, ancilla, R_bs: float,
                       squeeze_axis: str) -> qn.NetworkState:
    """Apply a feedforward squeezer directly to a network."""
    bld = Builder()
    ffw_squeezer_ops(bld, main, ancilla, R_bs, squeeze_axis)
    for op in bld.ops:
        net = _apply_network_op(net, op)
    return net


def _apply_network_op(net, op):
    if op.kind == "beamsplitter":
        return qn.apply_beamsplitter(net, *op.modes, *op.params)
    if op.kind == "feedforward":
        axis, targets = op.params
        tg = [(m, a, qn.Cancel(*c) if c is not None else g) for m, a, g, c in targets]
        return qn.measure_feedforward(net, op.modes[0], axis, tg)
    raise CircuitError(f"unsupported op {op.kind!r}")


def pia_ops(bld: Builder, m1: str, m2: str, anc_a: str, anc_b: str, R: float, theta: float = 0.0):
    """Feedforward amplifier on modes ``m1`` (signal) and ``m2`` (idler)."""
    if theta:
        bld.phase(m2, -theta)
    bld.beamsplitter(m1, m2, 0.5)
    # m1 now holds (1+2)/sqrt2: x amplified, p squeezed; m2 holds (2-1)/sqrt2
    if R < 1:
        ffw_squeezer_ops(bld, m2, anc_a, 1 - R, "x")
        ffw_squeezer_ops(bld, m1, anc_b, 1 - R, "p")
    else:
        bld.discard(anc_a).discard(anc_b)
    bld.beamsplitter(m2, m1, 0.5)
    if theta:
        bld.phase(m2, theta)
    return bld


def ideal_pia_ops(bld: Builder, m1: str, m2: str, G: float, theta: float = 0.0):
    """Optimal amplifier as half beamsplitter, two ideal squeezers, half beamsplitter."""
    R = gain_to_reflectivity(G)
    if theta:
        bld.phase(m2, -theta)
    bld.beamsplitter(m1, m2, 0.5)
    if R < 1:
        bld.squeeze(m1, 0.5 * math.log(R))     # x amplified by 1/sqrt(R)
        bld.squeeze(m2, -0.5 * math.log(R))    # x squeezed by sqrt(R)
    bld.beamsplitter(m2, m1, 0.5)
    if theta:
        bld.phase(m2, theta)
    return bld


def build_ideal_pia_program(G: float, theta: float = 0.0,
                            imperfections: ImperfectionModel | None = None) -> Program:
    """Optimal amplifier without ancillas; same output moments as the
    feedforward circuit in the limit of infinite ancilla squeezing."""
    bld = Builder([InputSpec("1"), InputSpec("2")])
    ideal_pia_ops(bld, "1", "2", G, theta)
    prog = bld.build(["1", "2"])
    return prog if imperfections is None else apply_imperfections(prog, imperfections)


def build_ideal_cloner_program(final_bs_R: float = 0.5,
                               imperfections: ImperfectionModel | None = None) -> Program:
    bld = Builder([InputSpec("1"), InputSpec("2"), InputSpec("vac", role="vacuum")])
    ideal_pia_ops(bld, "1", "2", 2.0)
    bld.beamsplitter("vac", "1", final_bs_R)
    bld.rename("vac", "cln1").rename("1", "cln2").rename("2", "acln")
    prog = bld.build(["cln1", "cln2", "acln"])
    return prog if imperfections is None else apply_imperfections(prog, imperfections)


def _ancilla(label, s_db, axis, anti):
    return InputSpec(label, "squeezed", s_db=s_db, axis=axis, anti_excess_db=anti, role="ancilla")


def build_pia_program(params: PiaParams) -> Program:
    bld = Builder([
        InputSpec("1"), InputSpec("2"),
        _ancilla("A", params.ancilla_A_dB, "x", params.anti_excess_dB),
        _ancilla("B", params.ancilla_B_dB, "p", params.anti_excess_dB),
    ])
    pia_ops(bld, "1", "2", "A", "B", params.R, params.theta)
    prog = bld.build(["1", "2"])
    if params.imperfections is not None:
        prog = apply_imperfections(prog, params.imperfections)
    return prog


def build_pia_network(params: PiaParams) -> qn.NetworkState:
    return to_network(build_pia_program(params))[0]


def build_cloner_program(params: ClonerParams = ClonerParams()) -> Program:
    p = params.pia
    bld = Builder([
        InputSpec("1"), InputSpec("2"),
        _ancilla("A", p.ancilla_A_dB, "x", p.anti_excess_dB),
        _ancilla("B", p.ancilla_B_dB, "p", p.anti_excess_dB),
        InputSpec("vac", role="vacuum"),
    ])
    pia_ops(bld, "1", "2", "A", "B", p.R, p.theta)
    # "vac" port ends up holding clone 1, the signal port clone 2
    bld.beamsplitter("vac", "1", params.final_bs_R)
    bld.rename("vac", "cln1").rename("1", "cln2").rename("2", "acln")
    prog = bld.build(["cln1", "cln2", "acln"])
    if p.imperfections is not None:
        prog = apply_imperfections(prog, p.imperfections)
    return prog


def build_cloner_network(params: ClonerParams = ClonerParams()) -> qn.NetworkState:
    return to_network(build_cloner_program(params))[0]


def givens_decompose(U: np.ndarray) -> tuple[list, np.ndarray]:
    """Factor a real orthogonal ``U`` as ``G_1^T ... G_m^T D``.

    Returns ``(rotations, d)`` where each rotation is ``(i, j, c, s)`` for
    ``[[c, s], [-s, c]]`` on rows (i, j) and ``d`` is the diagonal of ``D``.
    """
    U = np.array(U, float)
    n = U.shape[0]
    if not np.allclose(U @ U.T, np.eye(n), atol=1e-12):
        raise CircuitError("matrix is not orthogonal")
    rots = []
    for col in range(n - 1):
        for row in range(n - 1, col, -1):
            a, b = U[row - 1, col], U[row, col]
            if b == 0.0:
                continue
            rho = math.hypot(a, b)
            c, s = a / rho, b / rho
            G = np.array([[c, s], [-s, c]])
            U[[row - 1, row]] = G @ U[[row - 1, row]]
            U[row, col] = 0.0
            rots.append((row - 1, row, c, s))
    return rots, np.sign(np.diag(U))


def orthogonal_ops(bld: Builder, labels: Sequence[str], U: np.ndarray):
    """Passive network with ``out_k = sum_j U[k, j] in_j`` on ``labels``."""
    rots, d = givens_decompose(U)
    for i, v in enumerate(d):
        if v < 0:
            bld.phase(labels[i], math.pi)
    for i, j, c, s in reversed(rots):
        # transpose of [[c, s], [-s, c]]
        bld.rotation(labels[i], labels[j], c, -s)
    return bld


def complete_orthogonal(cols: np.ndarray) -> np.ndarray:
    """Extend orthonormal columns to a full orthogonal matrix."""
    cols = np.atleast_2d(np.asarray(cols, float))
    n, k = cols.shape
    Q, _ = np.linalg.qr(np.hstack([cols, np.eye(n)]))
    Q = Q[:, :n]
    # QR may flip signs of the given columns
    for j in range(k):
        if Q[:, j] @ cols[:, j] < 0:
            Q[:, j] = -Q[:, j]
    Q[:, :k] = cols
    return Q


def kl_noise_residual(n: Sequence[float], K: int, L: int) -> float:
    n = np.asarray(n, float)
    return float(np.sqrt(n).sum() ** 2 - (L - K) * (n.sum() + 1))


def build_kl_program(params: KlClonerParams, original=(0.0, 0.0)) -> Program:
    """K -> L cloner: combine the originals, amplify with ``G = 1 + sum n``,
    distribute over L clones and L - K anticlones."""
    K, L = params.K, params.L
    n = np.asarray(params.noise_targets)
    if abs(kl_noise_residual(n, K, L)) > 1e-9:
        raise CircuitError(f"infeasible noise vector {tuple(n)}")
    N = float(n.sum())
    G = 1 + N
    tau = (L - K) / (K * N)
    if tau > 1 - 1e-12:
        tau = 1.0

    orgs = [f"org{j + 1}" for j in range(K)]
    specs = [InputSpec(o, "coherent", mean=tuple(original)) for o in orgs]
    specs += [InputSpec("idl", role="vacuum"), InputSpec("byp", role="vacuum")]
    ancs = [f"anc{j + 1}" for j in range(L - 2)]
    specs += [InputSpec(a, role="vacuum") for a in ancs]
    aancs = [f"aanc{j + 1}" for j in range(L - K - 1)]
    specs += [InputSpec(a, role="vacuum") for a in aancs]
    bld = Builder(specs)

    # (i) concentrate: org1 <- sum(org_j)/sqrt(K)
    for j in range(2, K + 1):
        bld.beamsplitter(orgs[0], orgs[j - 1], 1.0 / j)
    for o in orgs[1:]:
        bld.discard(o)

    # (ii) send a fraction tau to the amplifier, the rest to the bypass port
    if tau < 1:
        bld.beamsplitter(orgs[0], "byp", 1 - tau)
    if params.ancilla_dB is None:
        ideal_pia_ops(bld, orgs[0], "idl", G)
    else:
        for lab, ax in (("A", "x"), ("B", "p")):
            bld.add_input(_ancilla(lab, params.ancilla_dB, ax, 0.0))
        pia_ops(bld, orgs[0], "idl", "A", "B", gain_to_reflectivity(G))

    # (iii) distribute; columns: amplified signal, bypass, vacuum ancillas
    u = np.sqrt(n / N)
    ones = np.ones(L) / math.sqrt(K)
    if tau < 1:
        w = -(ones - math.sqrt(G * tau) * u) / math.sqrt(1 - tau)
        U = complete_orthogonal(np.column_stack([u, w]))
    else:
        U = complete_orthogonal(u[:, None])
    dist = [orgs[0], "byp"] + ancs
    orthogonal_ops(bld, dist, U)
    clones = [f"cln{k + 1}" for k in range(L)]
    for old, new in zip(dist, clones):
        bld.rename(old, new)

    M = L - K
    anti = ["idl"] + aancs
    if M > 1:
        V = complete_orthogonal(np.ones((M, 1)) / math.sqrt(M))
        orthogonal_ops(bld, anti, V)
    anticlones = [f"acln{k + 1}" for k in range(M)]
    for old, new in zip(anti, anticlones):
        bld.rename(old, new)
    return bld.build(clones + anticlones)


def build_kl_cloner(params: KlClonerParams, original=(0.0, 0.0)) -> Program:
    return build_kl_program(params, original)


def kl_gain(params: KlClonerParams) -> float:
    return 1 + float(sum(params.noise_targets))


# ---------------------------------------------------------------- imperfections

def apply_imperfections(program: Program, model: ImperfectionModel) -> Program:
    """Insert loss channels.

    ``1 - visibility**2`` loss precedes every feedforward homodyne (with the
    electronic gain rescaled by ``1/visibility`` so the antisqueezed ancilla
    noise still cancels); main-path loss then detector loss act on every
    main output.
    """
    eta_ff = model.visibility ** 2
    ops = []
    for op in program.ops:
        if op.kind == "feedforward" and eta_ff < 1:
            if eta_ff == 0:
                raise CircuitError("zero visibility leaves nothing to feed forward")
            axis, targets = op.params
            ops.append(Op("loss", op.modes, (eta_ff, "ff")))
            scale = 1 / math.sqrt(eta_ff)
            op = Op("feedforward", op.modes,
                    (axis, tuple((m, a, g * scale, c) for m, a, g, c in targets)))
        ops.append(op)
    for m in program.main:
        if model.main_path_loss > 0:
            ops.append(Op("loss", (m,), (1 - model.main_path_loss, "main")))
        if model.homodyne_efficiency < 1:
            ops.append(Op("loss", (m,), (model.homodyne_efficiency, "det")))
    return replace(program, ops=tuple(ops))
