"""Gaussian states as (mean, covariance) with V0 = 1/4 vacuum variance.

Ordering is (x1, p1, x2, p2, ...).  All functions return new states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadnet import V0, _snap, omega

# below this the measured-quadrature variance is treated as zero
PINV_TOL = 1e-14


class GaussianError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size) or mean.size % 2:
            raise GaussianError("mean/cov shapes inconsistent")
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
            raise GaussianError("covariance not symmetric")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def mode_block(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        sl = slice(2 * m, 2 * m + 2)
        return self.mean[sl], self.cov[sl, sl]


def vacuum(n: int = 1) -> GaussianState:
    return GaussianState(np.zeros(2 * n), V0 * np.eye(2 * n))


def coherent(x: float, p: float) -> GaussianState:
    return GaussianState(np.array([x, p], float), V0 * np.eye(2))


def squeezed_vacuum(s_db: float, axis: str = "x", anti_excess_db: float = 0.0) -> GaussianState:
    """Single-mode squeezed vacuum; ``s_db`` relative to shot noise."""
    if anti_excess_db < 0:
        raise GaussianError("anti_excess_db must be >= 0")
    vs = V0 * 10 ** (s_db / 10)
    if not vs > 0 or not math.isfinite(vs):
        raise GaussianError(f"unphysical squeezing {s_db} dB")
    va = V0 * V0 / vs * 10 ** (anti_excess_db / 10)
    d = [vs, va] if axis == "x" else [va, vs]
    if axis not in ("x", "p"):
        raise GaussianError(f"bad axis {axis!r}")
    return GaussianState(np.zeros(2), np.diag(d))


def tensor(a: GaussianState, b: GaussianState) -> GaussianState:
    n = a.mean.size + b.mean.size
    cov = np.zeros((n, n))
    cov[: a.mean.size, : a.mean.size] = a.cov
    cov[a.mean.size:, a.mean.size:] = b.cov
    return GaussianState(np.concatenate([a.mean, b.mean]), cov)


def _quad_index(modes) -> np.ndarray:
    return np.array([2 * m + k for m in modes for k in (0, 1)], dtype=int)


def partial_trace(state: GaussianState, keep) -> GaussianState:
    keep = list(keep)
    for m in keep:
        if not 0 <= m < state.n_modes:
            raise GaussianError(f"mode index {m} out of range")
    idx = _quad_index(keep)
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


@dataclass(frozen=True)
class SymplecticEl:
    """Gaussian unitary element.

    kind: ``beamsplitter`` (params R), ``phase`` (phi), ``squeeze`` (r),
    ``displace`` (dx, dp).  ``modes`` is one index, or two for a beamsplitter.
    """

    kind: str
    modes: tuple
    params: tuple

    def local(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "beamsplitter":
            (R,) = self.params
            if not 0 <= R <= 1 or len(self.modes) != 2 or self.modes[0] == self.modes[1]:
                raise GaussianError("invalid beamsplitter")
            t, r = math.sqrt(1 - R), math.sqrt(R)
            S = np.kron(np.array([[t, r], [-r, t]]), np.eye(2))
            return S, np.zeros(4)
        if len(self.modes) != 1:
            raise GaussianError(f"{self.kind} acts on one mode")
        if self.kind == "phase":
            (phi,) = self.params
            c, s = _snap(math.cos(phi)), _snap(math.sin(phi))
            return np.array([[c, -s], [s, c]]), np.zeros(2)
        if self.kind == "squeeze":
            (r,) = self.params
            return np.diag([math.exp(-r), math.exp(r)]), np.zeros(2)
        if self.kind == "displace":
            dx, dp = self.params
            return np.eye(2), np.array([dx, dp], float)
        raise GaussianError(f"unknown element kind {self.kind!r}")

    def matrix(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Full ``2n x 2n`` symplectic matrix and displacement vector."""
        for m in self.modes:
            if not 0 <= m < n:
                raise GaussianError(f"mode index {m} out of range")
        S_loc, d_loc = self.local()
        idx = _quad_index(self.modes)
        S = np.eye(2 * n)
        S[np.ix_(idx, idx)] = S_loc
        d = np.zeros(2 * n)
        d[idx] = d_loc
        return S, d


def beamsplitter(a: int, b: int, R: float) -> SymplecticEl:
    return SymplecticEl("beamsplitter", (a, b), (R,))


def phase(m: int, phi: float) -> SymplecticEl:
    return SymplecticEl("phase", (m,), (phi,))


def squeeze(m: int, r: float) -> SymplecticEl:
    return SymplecticEl("squeeze", (m,), (r,))


def displace(m: int, dx: float, dp: float) -> SymplecticEl:
    return SymplecticEl("displace", (m,), (dx, dp))


def apply(state: GaussianState, el: SymplecticEl) -> GaussianState:
    S, d = el.matrix(state.n_modes)
    return GaussianState(S @ state.mean + d, S @ state.cov @ S.T)


def transform(state: GaussianState, M: np.ndarray, d: np.ndarray | None = None) -> GaussianState:
    """Apply an arbitrary real linear map to the quadratures (no symplectic check)."""
    cov = M @ state.cov @ M.T
    mean = M @ state.mean + (0 if d is None else d)
    return GaussianState(mean, 0.5 * (cov + cov.T))


def loss_channel(state: GaussianState, mode: int, eta: float) -> GaussianState:
    if not 0 <= eta <= 1:
        raise GaussianError(f"transmission {eta} outside [0, 1]")
    if not 0 <= mode < state.n_modes:
        raise GaussianError(f"mode index {mode} out of range")
    idx = _quad_index([mode])
    scale = np.ones(state.mean.size)
    scale[idx] = math.sqrt(eta)
    cov = state.cov * np.outer(scale, scale)
    cov[np.ix_(idx, idx)] += (1 - eta) * V0 * np.eye(2)
    return GaussianState(state.mean * scale, cov)


def quadrature_vector(n: int, mode: int, phi: float) -> np.ndarray:
    c = np.zeros(2 * n)
    # exact zeros for the x and p axes
    c[2 * mode] = _snap(math.cos(phi))
    c[2 * mode + 1] = _snap(math.sin(phi))
    return c


def homodyne_gain(state: GaussianState, mode: int, phi: float):
    """Pieces of the conditional update for measuring ``x cos(phi) + p sin(phi)``.

    Returns ``(c, var, kgain, rest)`` where ``c`` selects the measured
    quadrature, ``var`` its variance, ``kgain`` the regression vector of the
    remaining quadratures on the outcome and ``rest`` their indices.
    """
    if not 0 <= mode < state.n_modes:
        raise GaussianError(f"mode index {mode} out of range")
    c = quadrature_vector(state.n_modes, mode, phi)
    var = float(c @ state.cov @ c)
    rest = _quad_index([m for m in range(state.n_modes) if m != mode])
    cross = state.cov[rest] @ c
    kgain = cross * (0.0 if var < PINV_TOL else 1.0 / var)
    return c, var, kgain, rest


def homodyne(state: GaussianState, mode: int, phi: float, rng: np.random.Generator):
    """Sample a homodyne outcome and return ``(outcome, conditioned_state)``.

    The measured mode is removed.  The conditional covariance does not depend
    on the outcome.
    """
    c, var, k, rest = homodyne_gain(state, mode, phi)
    m = float(c @ state.mean)
    outcome = m + math.sqrt(max(var, 0.0)) * rng.standard_normal()
    mean = state.mean[rest] + k * (outcome - m)
    cov = state.cov[np.ix_(rest, rest)] - np.outer(k, state.cov[rest] @ c)
    return outcome, GaussianState(mean, 0.5 * (cov + cov.T))


def displace_by(state: GaussianState, mode: int, gx: float, gp: float,
                outcome: float) -> GaussianState:
    return apply(state, displace(mode, gx * outcome, gp * outcome))


def feedforward_average(state: GaussianState, measured: int, axis: str,
                        targets) -> GaussianState:
    """Outcome-averaged state after homodyne of ``measured`` plus feedforward.

    ``targets`` is a list of ``(mode, axis, gain)``.  Averaging the
    conditioned, displaced states over all outcomes equals applying the linear
    map ``q_target += gain * q_measured`` and discarding the measured mode.
    """
    n = state.n_modes
    M = np.eye(2 * n)
    src = 2 * measured + (0 if axis == "x" else 1)
    for mode, t_axis, gain in targets:
        if mode == measured:
            raise GaussianError("feedforward target equals measured mode")
        M[2 * mode + (0 if t_axis == "x" else 1), src] += gain
    out = transform(state, M)
    return partial_trace(out, [m for m in range(n) if m != measured])


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    n = cov.shape[0] // 2
    ev = np.linalg.eigvals(1j * omega(n) @ cov)
    return np.sort(np.abs(ev.real))[::2]


def is_physical(state: GaussianState, tol: float = 1e-10) -> bool:
    if state.n_modes == 0:
        return True
    return bool(symplectic_eigenvalues(state.cov).min() >= V0 - tol)


def purity_det(state: GaussianState) -> float:
    return float(np.linalg.det(state.cov))
