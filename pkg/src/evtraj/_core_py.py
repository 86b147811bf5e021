"""Pure numpy implementation of the hot kernels.

Mirrors ``_core.pyx`` function for function; selected automatically when the
compiled extension is unavailable (or ``EVTRAJ_PURE_PYTHON=1``).
"""

import numpy as np
from scipy import special

EPS = 1e-6
REG_EQ4 = 0
REG_OMEGA = 1
N_PARTS = 5


def lgamma(x):
    return special.gammaln(np.asarray(x, dtype=np.float64))


def digamma(x):
    return special.digamma(np.asarray(x, dtype=np.float64))


def trigamma(x):
    return special.polygamma(1, np.asarray(x, dtype=np.float64))


def softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return special.expit(x)


def winner_modes(gamma_xy, gt):
    """Index of the mode with the least summed displacement, lowest index on ties.

    gamma_xy: (B, K, T', 2); gt: (B, T', 2).
    """
    gamma_xy = np.asarray(gamma_xy, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    dist = np.sqrt(((gamma_xy - gt[:, None]) ** 2).sum(-1)).sum(-1)
    return np.argmin(dist, axis=1).astype(np.int64)


def nig_terms(gamma, nu, alpha, beta, y, nu0, alpha0, reg_mode):
    """Elementwise NLL, evidence regularizer and reduced KL plus their partials.

    Returns ``(nll, reg, kl, grads)`` with ``grads`` of shape (3, 4, ...): one
    row per term, one column per parameter in (gamma, nu, alpha, beta) order.
    """
    r = y - gamma
    omega = 2.0 * beta * (1.0 + nu)
    d = r * r * nu + omega
    ah = alpha + 0.5
    log_omega = np.log(omega)
    log_d = np.log(d)
    nll = (0.5 * np.log(np.pi / nu) - alpha * log_omega + ah * log_d
           + special.gammaln(alpha) - special.gammaln(ah))
    g_nll = np.stack([
        -2.0 * ah * r * nu / d,
        -0.5 / nu - 2.0 * alpha * beta / omega + ah * (r * r + 2.0 * beta) / d,
        log_d - log_omega + special.digamma(alpha) - special.digamma(ah),
        -alpha / beta + 2.0 * ah * (1.0 + nu) / d,
    ])
    ar = np.abs(r)
    sgn = np.sign(r)
    zero = np.zeros_like(r)
    if reg_mode == REG_EQ4:
        ev = 2.0 * nu + alpha
        reg = ar * ev
        g_reg = np.stack([-sgn * ev, 2.0 * ar, ar, zero])
    else:
        reg = ar * omega
        g_reg = np.stack([-sgn * omega, 2.0 * beta * ar, zero, 2.0 * (1.0 + nu) * ar])
    kl = ((alpha - alpha0) * special.digamma(alpha) - special.gammaln(alpha)
          + special.gammaln(alpha0) + 0.5 * np.log(nu / nu0) + nu0 / (2.0 * nu) - 0.5)
    g_kl = np.stack([
        zero,
        0.5 / nu - nu0 / (2.0 * nu * nu),
        (alpha - alpha0) * special.polygamma(1, alpha),
        zero,
    ])
    return nll, reg, kl, np.stack([g_nll, g_reg, g_kl])


def dirichlet_terms(alphas, target):
    """Squared-error loss and misleading-evidence KL for (B, K) concentrations.

    Returns ``(sq, kl, d_sq, d_kl)``; gradients are w.r.t. ``alphas``.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    n, k = alphas.shape
    onehot = np.zeros_like(alphas)
    onehot[np.arange(n), target] = 1.0
    s = alphas.sum(1, keepdims=True)
    p = alphas / s
    q = (p * p).sum(1, keepdims=True)
    sq = ((onehot - p) ** 2).sum(1) + (alphas * (s - alphas)).sum(1) / (s[:, 0] ** 2 * (s[:, 0] + 1.0))
    pt = (p * onehot).sum(1, keepdims=True)
    d_sq = (-2.0 * (onehot - pt) / s + 2.0 * (p - q) / s * (1.0 - 1.0 / (s + 1.0))
            - (1.0 - q) / (s + 1.0) ** 2)
    at = onehot + (1.0 - onehot) * alphas
    st = at.sum(1, keepdims=True)
    kl = (special.gammaln(st[:, 0]) - special.gammaln(at).sum(1) - special.gammaln(k)
          + ((at - 1.0) * (special.digamma(at) - special.digamma(st))).sum(1))
    d_kl = ((at - 1.0) * special.polygamma(1, at) - (st - k) * special.polygamma(1, st))
    d_kl = d_kl * (1.0 - onehot)
    return sq, kl, d_sq, d_kl


def head_loss(raw, gt, n_modes, horizon, lam1, lam2, lam3, lam4, nu0, alpha0, reg_mode):
    """Fused evidential head: decode raw outputs, assign winners, loss and gradient.

    raw: (B, D) with D = K*T'*8 + K; gt: (B, T', 2).
    Returns ``(parts, winners, grad)``: parts (B, 5) holds the per-sample
    (nll, reg, kl, sq, kl_cls) components, grad (B, D) is the gradient of each
    sample's total loss with respect to its own raw outputs.
    """
    raw = np.asarray(raw, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    b = raw.shape[0]
    k, t = n_modes, horizon
    n_nig = k * t * 8
    if raw.shape[1] != n_nig + k or gt.shape != (b, t, 2):
        raise ValueError("head_loss: shape mismatch between raw outputs and ground truth")
    nig_raw = raw[:, :n_nig].reshape(b, k, t, 2, 4)
    winners = winner_modes(nig_raw[..., 0], gt)
    rows = np.arange(b)
    w = nig_raw[rows, winners]
    gamma = w[..., 0]
    nu = softplus(w[..., 1]) + EPS
    alpha = 1.0 + softplus(w[..., 2]) + EPS
    beta = softplus(w[..., 3]) + EPS
    nll, reg, kl, g = nig_terms(gamma, nu, alpha, beta, gt, nu0, alpha0, reg_mode)
    scale = 1.0 / (2.0 * t)
    parts = np.empty((b, N_PARTS))
    parts[:, 0] = nll.reshape(b, -1).sum(1) * scale
    parts[:, 1] = reg.reshape(b, -1).sum(1) * scale
    parts[:, 2] = kl.reshape(b, -1).sum(1) * scale
    d = (g[0] + lam1 * g[1] + lam2 * g[2]) * scale
    d_raw = np.stack([
        d[0],
        d[1] * _sigmoid(w[..., 1]),
        d[2] * _sigmoid(w[..., 2]),
        d[3] * _sigmoid(w[..., 3]),
    ], axis=-1)
    grad_nig = np.zeros_like(nig_raw)
    grad_nig[rows, winners] = d_raw

    ev_raw = raw[:, n_nig:]
    alphas = 1.0 + softplus(ev_raw)
    sq, klc, d_sq, d_klc = dirichlet_terms(alphas, winners)
    parts[:, 3] = sq
    parts[:, 4] = klc
    grad_ev = lam4 * (d_sq + lam3 * d_klc) * _sigmoid(ev_raw)
    grad = np.concatenate([grad_nig.reshape(b, n_nig), grad_ev], axis=1)
    return parts, winners, grad
