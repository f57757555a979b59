"""Training losses and their analytic gradients.

Gradients are hand-derived (the optimizer is plain gradient descent, no
autodiff) and every one of them is validated against
:func:`finite_diff_gradient` in the test suite.

Conventions:
* weighted BCE clamps the probability to [eps, 1-eps] before the logs;
  the gradient honors the clamp (zero where saturated).
* the two-class additive-angular-margin loss puts the margin on the
  target class cosine via cos(theta + m) = cos*cos(m) - sin*sin(m) with
  sin(theta) = sqrt(max(0, 1 - cos^2)).
"""

import numpy as np

from .exceptions import EmptyClassError, ZeroVectorError
from .matrix import sigmoid, sigmoid_raw

DEFAULT_PROB_EPS = 1e-7


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def weighted_bce(p, y, weights=(0.1, 0.9), eps=DEFAULT_PROB_EPS):
    """Class-weighted binary cross entropy on probabilities.

    weights = (w_neg, w_pos); the positive class is the target trial.
    Accepts scalars or aligned arrays and returns the elementwise loss
    (callers take the mean).
    """
    w_neg, w_pos = weights
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(y, dtype=np.float64)
    return -(w_pos * y * np.log(p) + w_neg * (1.0 - y) * np.log1p(-p))


def weighted_bce_grad_logit(z, y, weights=(0.1, 0.9), eps=DEFAULT_PROB_EPS):
    """d/dz of weighted_bce(sigmoid(z), y); zero where the clamp saturates."""
    w_neg, w_pos = weights
    p = sigmoid(np.asarray(z, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    inside = (p > eps) & (p < 1.0 - eps)
    grad = -w_pos * y * (1.0 - p) + w_neg * (1.0 - y) * p
    return np.where(inside, grad, 0.0)


def _cosine_parts(e, w):
    ne = np.linalg.norm(e)
    nw = np.linalg.norm(w)
    if ne < 1e-12 or nw < 1e-12:
        raise ZeroVectorError("zero vector in cosine")
    return float(e @ w / (ne * nw)), ne, nw


def aam_softmax_loss(e, w0, w1, y, margin=0.2, scale=30.0):
    """Two-class additive-angular-margin softmax cross entropy.

    The target-class logit is scale*cos(theta_y + margin), the other is
    scale*cos(theta_{1-y}); the loss is the softmax cross entropy of the
    pair. With margin=0, scale=1 this reduces exactly to softmax cross
    entropy on the raw cosine logits.
    """
    e = np.asarray(e, dtype=np.float64)
    weights = (np.asarray(w0, dtype=np.float64), np.asarray(w1, dtype=np.float64))
    cos_t, _, _ = _cosine_parts(e, weights[y])
    cos_o, _, _ = _cosine_parts(e, weights[1 - y])
    sin_t = np.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = cos_t * np.cos(margin) - sin_t * np.sin(margin)
    return float(softplus(scale * cos_o - scale * phi))


def aam_softmax_grads(e, w0, w1, y, margin=0.2, scale=30.0):
    """Loss value plus gradients wrt (e, w0, w1) for one sample."""
    e = np.asarray(e, dtype=np.float64)
    w = [np.asarray(w0, dtype=np.float64), np.asarray(w1, dtype=np.float64)]
    t, o = y, 1 - y
    cos_t, ne, nw_t = _cosine_parts(e, w[t])
    cos_o, _, nw_o = _cosine_parts(e, w[o])

    sin_sq = 1.0 - cos_t * cos_t
    if sin_sq > 0.0:
        sin_t = np.sqrt(sin_sq)
        dphi_dcos = np.cos(margin) + (cos_t / sin_t) * np.sin(margin)
    else:
        # clamp region: sin is pinned at 0, phi = cos * cos(margin)
        sin_t = 0.0
        dphi_dcos = np.cos(margin)
    phi = cos_t * np.cos(margin) - sin_t * np.sin(margin)

    delta = scale * cos_o - scale * phi
    loss = float(softplus(delta))
    q = sigmoid_raw(delta)  # dL/ddelta

    # d cos(e, w) wrt each argument
    def dcos_dw(cos, vec_w, norm_w):
        return e / (ne * norm_w) - cos * vec_w / (norm_w * norm_w)

    def dcos_de(cos, vec_w, norm_w):
        return vec_w / (ne * norm_w) - cos * e / (ne * ne)

    g_w = [np.zeros_like(w[0]), np.zeros_like(w[1])]
    g_w[t] = -q * scale * dphi_dcos * dcos_dw(cos_t, w[t], nw_t)
    g_w[o] = q * scale * dcos_dw(cos_o, w[o], nw_o)
    g_e = -q * scale * dphi_dcos * dcos_de(cos_t, w[t], nw_t) + q * scale * dcos_de(
        cos_o, w[o], nw_o
    )
    return loss, g_e, g_w[0], g_w[1]


def orthogonality_penalty(w0, w1):
    """Squared cosine of the two classifier weight vectors, in [0, 1]."""
    cos, _, _ = _cosine_parts(np.asarray(w0, dtype=np.float64), np.asarray(w1, dtype=np.float64))
    return float(cos * cos)


def orthogonality_grads(w0, w1):
    """Penalty value plus gradients wrt (w0, w1)."""
    w0 = np.asarray(w0, dtype=np.float64)
    w1 = np.asarray(w1, dtype=np.float64)
    cos, n0, n1 = _cosine_parts(w0, w1)
    g0 = 2.0 * cos * (w1 / (n0 * n1) - cos * w0 / (n0 * n0))
    g1 = 2.0 * cos * (w0 / (n0 * n1) - cos * w1 / (n1 * n1))
    return float(cos * cos), g0, g1


def finite_diff_gradient(f, x, h=1e-4):
    """Central-difference gradient of a scalar function.

    The verification oracle for every analytic gradient in this package;
    f must be twice differentiable near x.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        grad.flat[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def check_one_per_class(y):
    y = np.asarray(y)
    if not (np.any(y == 0) and np.any(y == 1)):
        raise EmptyClassError("training data must contain both classes")
