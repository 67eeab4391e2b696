"""Pure-NumPy versions of the compiled kernels."""

import numpy as np


def homodyne_feedforward(means, c, k, rest, sigma, z, tgt, gain):
    """Batched homodyne conditioning followed by feedforward.

    For every shot ``s`` draws ``q = c.means[s] + sigma z[s]``, regresses the
    remaining quadratures ``means[s, rest]`` on the outcome with gain vector
    ``k`` and adds ``gain[t] * q`` to column ``tgt[t]`` of the result (indices
    into ``rest`` order).  Returns ``(new_means, outcomes)``.
    """
    m = means @ c
    q = m + sigma * z
    out = means[:, rest] + np.outer(q - m, k)
    for t, g in zip(tgt, gain):
        out[:, t] += g * q
    return out, q


def scan_loglik(phases, q, theta):
    """Gaussian log-likelihood of a phase scan with gradient and Hessian.

    ``theta = (mean_x, mean_p, Vxx, Vpp, Vxp)``; the quadrature at phase
    ``phi`` has mean ``mean_x cos + mean_p sin`` and variance
    ``Vxx cos^2 + Vpp sin^2 + 2 Vxp sin cos``.
    """
    mx, mp, vxx, vpp, vxp = theta
    cs, sn = np.cos(phases), np.sin(phases)
    mu = mx * cs + mp * sn
    V = vxx * cs * cs + vpp * sn * sn + 2 * vxp * sn * cs
    if np.any(V <= 0):
        return -np.inf, np.zeros(5), np.zeros((5, 5))
    r = q - mu
    iv = 1 / V
    ll = float(np.sum(-0.5 * np.log(2 * np.pi * V) - 0.5 * r * r * iv))
    zero = np.zeros_like(cs)
    jm = np.stack([cs, sn, zero, zero, zero])
    jv = np.stack([zero, zero, cs * cs, sn * sn, 2 * sn * cs])
    dmu = r * iv
    dV = 0.5 * iv * (r * r * iv - 1)
    grad = jm @ dmu + jv @ dV
    hmm, hmV, hVV = -iv, -r * iv * iv, iv * iv * (0.5 - r * r * iv)
    hess = ((jm * hmm) @ jm.T + (jm * hmV) @ jv.T + (jv * hmV) @ jm.T + (jv * hVV) @ jv.T)
    return ll, grad, hess
