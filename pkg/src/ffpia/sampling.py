"""Monte Carlo homodyne records and maximum-likelihood moment estimation.

The electronic chain (sideband mixing, filtering, digitization) is replaced by
direct draws of quadrature values; nothing in it changes the Gaussian model.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import gaussian as gs
from . import kernels
from .circuits import Program, run_ops
from .quadnet import V0

BATCH = 200_000


class FitError(RuntimeError):
    pass


# ---------------------------------------------------------------- circuits

@dataclass
class _Batch:
    """Per-shot means sharing one covariance (it does not depend on outcomes)."""

    means: np.ndarray
    cov: gs.GaussianState

    @property
    def n_modes(self):
        return self.cov.n_modes


def _batch_apply_ops(batch: _Batch, labels, ops, rng):
    means = batch.means
    cov = batch.cov
    labels = list(labels)
    for op in ops:
        if op.kind == "feedforward":
            axis, targets = op.params
            m = labels.index(op.modes[0])
            c, var, k, rest = gs.homodyne_gain(cov, m, 0.0 if axis == "x" else math.pi / 2)
            tgt, gain = [], []
            for mode, t_axis, g, _ in targets:
                ti = labels.index(mode)
                ti -= ti > m
                tgt.append(2 * ti + (0 if t_axis == "x" else 1))
                gain.append(g)
            z = rng.standard_normal(means.shape[0])
            means, _ = kernels.homodyne_feedforward(means, c, k, rest, math.sqrt(max(var, 0.0)),
                                                    z, tgt, gain)
            cond = cov.cov[np.ix_(rest, rest)] - np.outer(k, cov.cov[rest] @ c)
            cov = gs.GaussianState(np.zeros(len(rest)), 0.5 * (cond + cond.T))
            labels.pop(m)
            continue
        # the covariance follows the gaussian module; every shot's mean
        # follows the same affine map
        M, d = _affine(op, labels)
        means = means @ M.T + d
        cov, labels = run_ops(cov, labels, [op], None)
    return _Batch(means, cov), labels


def _affine(op, labels):
    """Matrix and offset acting on the means for a non-measurement op."""
    n = len(labels)
    idx = [labels.index(m) for m in op.modes] if op.kind != "rename" else []
    if op.kind in ("beamsplitter", "phase", "squeeze", "displace"):
        el = {"beamsplitter": gs.beamsplitter, "phase": gs.phase,
              "squeeze": gs.squeeze, "displace": gs.displace}[op.kind](*idx, *op.params)
        return el.matrix(n)
    if op.kind == "loss":
        M = np.eye(2 * n)
        i = idx[0]
        M[2 * i, 2 * i] = M[2 * i + 1, 2 * i + 1] = math.sqrt(op.params[0])
        return M, np.zeros(2 * n)
    if op.kind == "discard":
        keep = [q for q in range(2 * n) if q // 2 != idx[0]]
        return np.eye(2 * n)[keep], np.zeros(len(keep))
    if op.kind == "rename":
        return np.eye(2 * n), np.zeros(2 * n)
    raise ValueError(f"unknown op {op.kind!r}")


@dataclass
class MonteCarloResult:
    mean: np.ndarray
    cov: np.ndarray
    n_shots: int
    mixture_cov: np.ndarray       # covariance of per-shot means + conditional covariance
    samples: np.ndarray | None = None

    @property
    def mean_stderr(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov) / self.n_shots)

    @property
    def cov_stderr(self) -> np.ndarray:
        d = np.diag(self.cov)
        return np.sqrt((np.outer(d, d) + self.cov ** 2) / self.n_shots)


class _Moments:
    """Chunked mean/covariance accumulator (Chan et al. pairwise update)."""

    def __init__(self, dim):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros((dim, dim))

    def add(self, x: np.ndarray):
        nb = x.shape[0]
        if nb == 0:
            return
        mb = x.mean(axis=0)
        xc = x - mb
        m2b = xc.T @ xc
        delta = mb - self.mean
        tot = self.n + nb
        self.m2 += m2b + np.outer(delta, delta) * self.n * nb / tot
        self.mean += delta * nb / tot
        self.n = tot

    def cov(self):
        return self.m2 / (self.n - 1)


def monte_carlo_circuit(program: Program, n_shots: int, rng: np.random.Generator,
                        return_samples: bool = False, batch: int = BATCH) -> MonteCarloResult:
    """Run ``program`` shot by shot with sampled feedforward outcomes.

    Each shot draws every feedforward homodyne outcome, displaces the targets
    and finally draws one value of every output quadrature.
    """
    if n_shots < 2:
        raise ValueError("need at least two shots")
    labels0 = [s.label for s in program.inputs]
    init = gs.vacuum(0)
    for s in program.inputs:
        init = gs.tensor(init, s.state())
    acc = _Moments(2 * len(program.outputs))
    macc = _Moments(2 * len(program.outputs))
    cond = None
    chunks = []
    done = 0
    while done < n_shots:
        S = min(batch, n_shots - done)
        means = np.tile(init.mean, (S, 1))
        b, labels = _batch_apply_ops(_Batch(means, gs.GaussianState(np.zeros(init.mean.size),
                                                                     init.cov)),
                                     labels0, program.ops, rng)
        keep = np.array([2 * labels.index(o) + k for o in program.outputs for k in (0, 1)], int)
        mu = b.means[:, keep]
        cond = b.cov.cov[np.ix_(keep, keep)]
        Lc = _sqrt_factor(cond)
        x = mu + rng.standard_normal(mu.shape) @ Lc.T
        acc.add(x)
        macc.add(mu)
        if return_samples:
            chunks.append(x)
        done += S
    mix = (macc.m2 / macc.n) + cond
    return MonteCarloResult(acc.mean.copy(), acc.cov(), n_shots, mix,
                            np.vstack(chunks) if return_samples else None)


def _sqrt_factor(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0, None))


# ---------------------------------------------------------------- phase scans

@dataclass
class ScanDataset:
    phases: np.ndarray
    outcomes: np.ndarray
    mode: str = ""

    def __post_init__(self):
        self.phases = np.asarray(self.phases, float)
        self.outcomes = np.asarray(self.outcomes, float)
        if self.phases.shape != self.outcomes.shape or self.phases.size < 1:
            raise ValueError("phases and outcomes must be equal-length and nonempty")
        if np.any(self.phases < 0) or np.any(self.phases >= 2 * np.pi):
            raise ValueError("phases must lie in [0, 2pi)")

    @property
    def n(self) -> int:
        return self.phases.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phase_rad", "outcome"])
            for ph, q in zip(self.phases, self.outcomes):
                w.writerow([repr(float(ph)), repr(float(q))])

    @classmethod
    def from_csv(cls, path, mode: str = "") -> "ScanDataset":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["phase_rad"]) for r in rows], [float(r["outcome"]) for r in rows], mode)


def scan_phases(n: int, periods: int = 4) -> np.ndarray:
    """Slow linear phase ramp covering ``periods`` turns, wrapped to [0, 2pi)."""
    return np.mod(np.linspace(0, 2 * np.pi * periods, n, endpoint=False), 2 * np.pi)


def marginal(state: gs.GaussianState, mode: int, phases) -> tuple[np.ndarray, np.ndarray]:
    mu, V = state.mode_block(mode)
    c, s = np.cos(phases), np.sin(phases)
    m = mu[0] * c + mu[1] * s
    var = V[0, 0] * c * c + V[1, 1] * s * s + 2 * V[0, 1] * s * c
    return m, var


def sample_scan(state: gs.GaussianState, mode: int, phases: Sequence[float],
                rng: np.random.Generator, label: str = "") -> ScanDataset:
    """Independent homodyne shots of ``mode``, one per entry of ``phases``."""
    phases = np.mod(np.asarray(phases, float), 2 * np.pi)
    if phases.size == 0:
        raise ValueError("phases must be nonempty")
    if not 0 <= mode < state.n_modes:
        raise ValueError(f"mode index {mode} out of range")
    m, var = marginal(state, mode, phases)
    q = m + np.sqrt(var) * rng.standard_normal(phases.size)
    return ScanDataset(phases, q, label or str(mode))


@dataclass
class EstimatedMoments:
    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float
    loglik: float
    iterations: int
    stderr: tuple = ()
    physical: bool = True

    @property
    def params(self) -> np.ndarray:
        return np.array([self.mean_x, self.mean_p, self.var_x, self.var_p, self.cov_xp])

    def to_json(self) -> str:
        d = asdict(self)
        d["stderr"] = list(self.stderr)
        return json.dumps(d)


def _design(phases):
    c, s = np.cos(phases), np.sin(phases)
    return np.column_stack([c, s]), np.column_stack([c * c, s * s, 2 * s * c])


def _initial_guess(phases, q):
    A1, A2 = _design(phases)
    mean = np.linalg.lstsq(A1, q, rcond=None)[0]
    r2 = (q - A1 @ mean) ** 2
    var = np.linalg.lstsq(A2, r2, rcond=None)[0]
    # keep the starting point strictly inside the physical region
    floor = 0.1 * max(float(np.median(r2)), 1e-12)
    vxx, vpp, vxp = max(var[0], floor), max(var[1], floor), var[2]
    lim = 0.9 * math.sqrt(vxx * vpp)
    return np.array([mean[0], mean[1], vxx, vpp, float(np.clip(vxp, -lim, lim))])


def fit_moments(data: ScanDataset, max_iter: int = 500, rtol: float = 1e-10,
                backend: str | None = None) -> EstimatedMoments:
    """Maximum-likelihood mean and covariance of one mode from a phase scan.

    Coordinate-wise Newton sweeps over (mean_x, mean_p, Vxx, Vpp, Vxp),
    starting from a least-squares fit, until the relative change of the
    log-likelihood over a sweep drops below ``rtol``.
    """
    ph, q = data.phases, data.outcomes
    if data.n < 50:
        raise FitError("need at least 50 records")
    _, A2 = _design(ph)
    if np.linalg.matrix_rank(A2, tol=1e-8 * math.sqrt(data.n)) < 3:
        raise FitError("insufficient phase coverage")

    theta = _initial_guess(ph, q)
    ll, g, H = kernels.scan_loglik(ph, q, theta, backend)
    if not np.isfinite(ll):
        raise FitError("initial guess outside the physical region")
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        ll_old = ll
        for a in range(5):
            h = H[a, a]
            step = -g[a] / h if h < 0 else g[a] * 1e-3
            for _ in range(60):
                trial = theta.copy()
                trial[a] += step
                ll_t, g_t, H_t = kernels.scan_loglik(ph, q, trial, backend)
                if np.isfinite(ll_t) and ll_t >= ll - 1e-12 * abs(ll):
                    theta, ll, g, H = trial, ll_t, g_t, H_t
                    break
                step *= 0.5
        if abs(ll - ll_old) <= rtol * abs(ll):
            converged = True
            break
    if not converged:
        raise FitError(f"no convergence after {max_iter} sweeps")
    try:
        cov = np.linalg.inv(-H)
        se = tuple(float(v) for v in np.sqrt(np.diag(cov)))
    except np.linalg.LinAlgError:
        se = (math.nan,) * 5
    mx, mp, vxx, vpp, vxp = (float(v) for v in theta)
    det = vxx * vpp - vxp * vxp
    physical = det > 0 and math.sqrt(det) >= V0 * (1 - 1e-2)
    return EstimatedMoments(mx, mp, vxx, vpp, vxp, ll, it, se, physical)


# ---------------------------------------------------------------- power

@dataclass(frozen=True)
class PowerEstimate:
    db: float
    lo: float
    hi: float

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.hi - self.lo)


def _segment_stats(x, segments):
    parts = np.array_split(np.asarray(x, float), segments)
    return np.array([[p.size, p.sum(), (p * p).sum()] for p in parts])


def _pooled_var(stats):
    n, s, ss = stats.sum(axis=0)
    return (ss - s * s / n) / (n - 1)


def power_db(samples, shot_samples, rng: np.random.Generator | None = None,
             segments: int = 20, n_boot: int = 2000, level: float = 0.95) -> PowerEstimate:
    """Noise power relative to shot noise in dB with a segment-bootstrap interval."""
    samples = np.asarray(samples, float)
    shot = np.asarray(shot_samples, float)
    if samples.size == 0 or shot.size == 0:
        raise ValueError("empty sample stream")
    ref = float(np.var(shot, ddof=1)) if shot.size > 1 else 0.0
    if ref <= 0:
        raise ValueError("reference stream has zero variance")
    db = 10 * math.log10(float(np.var(samples, ddof=1)) / ref)
    segs = min(segments, samples.size, shot.size)
    if segs < 2:
        return PowerEstimate(db, db, db)
    rng = np.random.default_rng(0) if rng is None else rng
    a, b = _segment_stats(samples, segs), _segment_stats(shot, segs)
    boots = np.empty(n_boot)
    for i in range(n_boot):
        ia = rng.integers(0, segs, segs)
        ib = rng.integers(0, segs, segs)
        boots[i] = 10 * math.log10(_pooled_var(a[ia]) / _pooled_var(b[ib]))
    lo, hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2])
    return PowerEstimate(db, float(lo), float(hi))


def save_moments(moments: Sequence[EstimatedMoments], path) -> None:
    Path(path).write_text(json.dumps([json.loads(m.to_json()) for m in moments], indent=2))
