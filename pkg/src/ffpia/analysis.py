"""Figures of merit computed from output moments.

Functions take a mean vector and covariance in (x1, p1, x2, p2, ...) order
with vacuum quadrature variance ``V0 = 1/4``.  Clone noise ``n`` is
``Var_x + Var_p - 2 V0``: zero for a vacuum-preserving channel and 1/2 for
the ideal symmetric 1 -> 2 clone (0.5 + 0.5 - 0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gaussian import symplectic_eigenvalues
from .quadnet import V0

SQRT2 = math.sqrt(2.0)


class AnalysisError(ValueError):
    pass


def variance_db(V: float, Vref: float = V0) -> float:
    if not (V > 0 and Vref > 0):
        raise AnalysisError(f"variances must be positive, got {V}, {Vref}")
    return 10 * math.log10(V / Vref)


def combo(mean: np.ndarray, cov: np.ndarray, weights: dict) -> tuple[float, float]:
    """Mean and variance of ``sum w * q`` with ``weights`` keyed by quadrature index."""
    w = np.zeros(len(mean))
    for i, v in weights.items():
        w[i] += v
    return float(w @ mean), float(w @ cov @ w)


def _x(m):
    return 2 * m


def _p(m):
    return 2 * m + 1


@dataclass(frozen=True)
class WitnessResult:
    value: float
    bound: float
    margin_dB: float
    entangled: bool


def duan_witness(cov: np.ndarray, i: int, j: int, x_sign: float = -1.0,
                 p_sign: float = 1.0) -> WitnessResult:
    """``Var(x_i + x_sign x_j) + Var(p_i + p_sign p_j)`` against the separable bound 4 V0."""
    n = cov.shape[0] // 2
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise AnalysisError("need two distinct valid mode indices")
    mean = np.zeros(cov.shape[0])
    vx = combo(mean, cov, {_x(i): 1.0, _x(j): x_sign})[1]
    vp = combo(mean, cov, {_p(i): 1.0, _p(j): p_sign})[1]
    value = vx + vp
    bound = 4 * V0
    margin = 10 * math.log10(value / bound)
    return WitnessResult(value, bound, margin, margin < 0)


def simon_ppt_min_eig(cov: np.ndarray, partition: Sequence[int]) -> float:
    """Smallest symplectic eigenvalue after transposing the modes in ``partition``.

    Below ``V0`` certifies entanglement across that cut.
    """
    n = cov.shape[0] // 2
    part = list(partition)
    if not part or len(part) >= n or any(not 0 <= m < n for m in part):
        raise AnalysisError(f"invalid bipartition {part} of {n} modes")
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise AnalysisError("covariance is not positive definite")
    flip = np.ones(2 * n)
    flip[[_p(m) for m in part]] = -1
    return float(symplectic_eigenvalues(cov * np.outer(flip, flip)).min())


@dataclass(frozen=True)
class EprVariances:
    x_minus: float
    p_plus: float
    x_plus: float
    p_minus: float

    def db(self) -> dict:
        ref = 2 * V0
        return {k: variance_db(getattr(self, k), ref)
                for k in ("x_minus", "p_plus", "x_plus", "p_minus")}


def epr_variances(cov: np.ndarray, i: int = 0, j: int = 1) -> EprVariances:
    z = np.zeros(cov.shape[0])
    v = lambda w: combo(z, cov, w)[1]  # noqa: E731
    return EprVariances(
        v({_x(i): 1, _x(j): -1}), v({_p(i): 1, _p(j): 1}),
        v({_x(i): 1, _x(j): 1}), v({_p(i): 1, _p(j): -1}),
    )


@dataclass(frozen=True)
class Reconstruction:
    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    shot: float     # normalization: one third of the weighted shot noise

    @property
    def db_x(self) -> float:
        return variance_db(self.var_x, self.shot)

    @property
    def db_p(self) -> float:
        return variance_db(self.var_p, self.shot)

    @property
    def noise(self) -> float:
        return self.var_x + self.var_p - 2 * V0

    @property
    def fidelity(self) -> float:
        return fidelity(self.noise)


def reconstruct_pia(mean: np.ndarray, cov: np.ndarray, mode: int = 0) -> Reconstruction:
    """Electrical inverse of the gain-2 amplifier.

    ``x_rec = sqrt2 x_mode - x_other`` and ``p_rec = sqrt2 p_mode + p_other``;
    the weighted shot noise (2 + 1) V0 is divided by three.
    """
    if len(mean) != 4:
        raise AnalysisError("expected two output modes")
    o = 1 - mode
    mx, vx = combo(mean, cov, {_x(mode): SQRT2, _x(o): -1.0})
    mp, vp = combo(mean, cov, {_p(mode): SQRT2, _p(o): 1.0})
    return Reconstruction(mx, mp, vx, vp, (2 + 1) * V0 / 3)


def reconstruct_clone(mean: np.ndarray, cov: np.ndarray) -> Reconstruction:
    """``x_rec = x_c1 + x_c2 - x_ac``, ``p_rec = p_c1 + p_c2 + p_ac``."""
    if len(mean) != 6:
        raise AnalysisError("expected three output modes (clone, clone, anticlone)")
    mx, vx = combo(mean, cov, {0: 1.0, 2: 1.0, 4: -1.0})
    mp, vp = combo(mean, cov, {1: 1.0, 3: 1.0, 5: 1.0})
    return Reconstruction(mx, mp, vx, vp, 3 * V0 / 3)


@dataclass(frozen=True)
class NoiseBudget:
    n: tuple
    mean_gains: tuple = field(default=())

    @property
    def fidelities(self) -> tuple:
        return tuple(fidelity(v) for v in self.n)


def clone_noise(var_x: float, var_p: float) -> float:
    return var_x + var_p - 2 * V0


def input_referred_noise(var_x: float, var_p: float, gain: float) -> float:
    """Clone noise after dividing the output by a mean-transfer ``gain``.

    Losses pull a clone toward vacuum, which lowers its raw variance; this
    refers the variances back to the input so the noise is not understated.
    """
    if not gain > 0:
        raise AnalysisError("gain must be positive")
    return (var_x + var_p) / gain ** 2 - 2 * V0


def added_noise(cov: np.ndarray, modes: Sequence[int], mean_gains: Sequence[float] | None = None,
                tol: float = 1e-9) -> NoiseBudget:
    """Added noise per clone from a vacuum-original covariance.

    ``mean_gains`` are the measured mean-transfer gains of the clones; any gain
    further than ``tol`` from one is an error, since ``n`` presumes unit gain.
    """
    gains = tuple(1.0 for _ in modes) if mean_gains is None else tuple(mean_gains)
    bad = [g for g in gains if abs(g - 1) > tol]
    if bad:
        raise AnalysisError(f"mean-transfer gains {gains} differ from 1; not rescaling")
    n = tuple(clone_noise(cov[_x(m), _x(m)], cov[_p(m), _p(m)]) for m in modes)
    if min(n) < -1e-12:
        raise AnalysisError(f"negative added noise {n}")
    return NoiseBudget(n, gains)


def mean_gain(mean_out: np.ndarray, mode: int, mean_in: Sequence[float]) -> float:
    """Ratio of output to input displacement magnitude for one mode."""
    a = math.hypot(*mean_in)
    if a == 0:
        raise AnalysisError("need a nonzero input displacement")
    return math.hypot(mean_out[_x(mode)], mean_out[_p(mode)]) / a


def fidelity(n: float, tol: float = 1e-12) -> float:
    if n < -tol:
        raise AnalysisError("noise must be non-negative")
    return 1.0 / (1.0 + max(n, 0.0))


@dataclass(frozen=True)
class FidelityReport:
    F: tuple
    cloning_limit: float
    classical_limit: float


def fidelity_report(budget: NoiseBudget, K: int = 1, L: int = 2) -> FidelityReport:
    return FidelityReport(budget.fidelities, kl_limit_fidelity(K, L), kl_classical_fidelity(K))


# ---- K -> L formulas

def _check_kl(K, L):
    if not (K >= 1 and L > K):
        raise AnalysisError(f"need 1 <= K < L, got K={K}, L={L}")


def cloning_cost(n: Sequence[float], c: Sequence[float]) -> float:
    if len(n) != len(c) or any(v < 0 for v in n) or any(v <= 0 for v in c):
        raise AnalysisError("need matching non-negative n and positive c")
    return float(sum(ci * ni for ci, ni in zip(c, n)))


def kl_noise_relation(n: Sequence[float], K: int, L: int) -> float:
    """Residual ``(sum sqrt n)^2 - (L-K)(sum n + 1)``; zero for optimal cloners."""
    _check_kl(K, L)
    if len(n) != L or any(v < 0 for v in n):
        raise AnalysisError("need L non-negative noises")
    return sum(math.sqrt(v) for v in n) ** 2 - (L - K) * (sum(n) + 1)


def kl_symmetric_noise(K: int, L: int) -> float:
    _check_kl(K, L)
    return 1 / K - 1 / L


def kl_limit_fidelity(K: int, L: int) -> float:
    _check_kl(K, L)
    return K * L / (K * L - K + L)


def kl_classical_fidelity(K: int) -> float:
    if K < 1:
        raise AnalysisError("K must be >= 1")
    return K / (K + 1)


def asymmetric_gain(n: Sequence[float]) -> float:
    if any(v < 0 for v in n):
        raise AnalysisError("noises must be non-negative")
    return 1 + float(sum(n))


def asymmetric_partner(n1: float) -> float:
    """Second noise of an optimal 1 -> 2 cloner given the first (n1 n2 = 1/4)."""
    if n1 <= 0:
        raise AnalysisError("n1 must be positive")
    return 0.25 / n1
