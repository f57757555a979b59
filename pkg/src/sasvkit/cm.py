"""Stage-1 countermeasure classifier.

A two-vector linear classifier (w0 = spoof, w1 = bona fide) trained with
the additive-angular-margin softmax on labeled countermeasure
embeddings. Its scoring vector W = w1 - w0 is what the integrated
scoring heads consume; an optional assist layer first mixes the raw
countermeasure embedding with the same utterance's speaker embedding:

    e_eff = M [e_cm; e_spk] + b

The estimator follows the sklearn protocol: hyperparameters in
``__init__``, fitted state in trailing-underscore attributes.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ShapeMismatchError
from .losses import check_one_per_class, orthogonality_grads, softplus
from .matrix import sigmoid_raw
from .optim import HyperParams, run_sgd
from .rng import StableRng


def assist_transform(e_cm_raw, e_spk, weight, bias):
    """Linear mix of the concatenated [e_cm; e_spk] into a dim-length
    embedding: weight @ concat + bias."""
    e_cm_raw = np.asarray(e_cm_raw, dtype=np.float64)
    e_spk = np.asarray(e_spk, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    dim = e_cm_raw.shape[-1]
    if e_spk.shape[-1] != dim or weight.shape != (dim, 2 * dim) or bias.shape != (dim,):
        raise ShapeMismatchError(
            f"assist shapes inconsistent: cm {e_cm_raw.shape}, spk {e_spk.shape}, "
            f"weight {weight.shape}, bias {bias.shape}"
        )
    z = np.concatenate([e_cm_raw, e_spk], axis=-1)
    return z @ weight.T + bias


def _batch_aam(E, y, w0, w1, margin, scale, want_e_grad):
    """Mean AAM loss over a batch plus gradients wrt w0, w1 (and E).

    Vectorized form of the per-sample derivation in losses.py; the two
    must agree, which the gradient suite checks.
    """
    n = E.shape[0]
    ne = np.linalg.norm(E, axis=1)
    nw = [np.linalg.norm(w0), np.linalg.norm(w1)]
    cos = [E @ w0 / (ne * nw[0]), E @ w1 / (ne * nw[1])]

    tgt = y.astype(int)
    rows = np.arange(n)
    cos_all = np.stack(cos, axis=1)
    cos_t = cos_all[rows, tgt]
    cos_o = cos_all[rows, 1 - tgt]

    sin_sq = 1.0 - cos_t * cos_t
    safe = sin_sq > 0.0
    sin_t = np.sqrt(np.where(safe, sin_sq, 0.0))
    dphi = np.where(safe, np.cos(margin) + np.divide(cos_t, np.where(safe, sin_t, 1.0)) * np.sin(margin), np.cos(margin))
    phi = cos_t * np.cos(margin) - sin_t * np.sin(margin)

    delta = scale * (cos_o - phi)
    loss = float(np.mean(softplus(delta)))
    q = sigmoid_raw(delta)

    # per-sample coefficient on d cos_j for each class j
    coef = np.zeros((n, 2))
    coef[rows, tgt] = -q * scale * dphi
    coef[rows, 1 - tgt] = q * scale
    coef /= n

    w = [w0, w1]
    grads_w = []
    for j in range(2):
        cj = coef[:, j]
        g = (cj / ne) @ E / nw[j] - float(cj @ cos[j]) * w[j] / (nw[j] * nw[j])
        grads_w.append(g)

    g_E = None
    if want_e_grad:
        g_E = np.zeros_like(E)
        for j in range(2):
            cj = coef[:, j]
            g_E += cj[:, None] * (w[j][None, :] / (ne[:, None] * nw[j]) - cos[j][:, None] * E / (ne * ne)[:, None])
    return loss, grads_w[0], grads_w[1], g_E


class CountermeasureClassifier(BaseEstimator, ClassifierMixin):
    """AAM-trained two-class linear countermeasure.

    Parameters mirror HyperParams; ``assist=True`` adds the jointly
    trained speaker-assist layer, in which case ``fit`` and
    ``decision_function`` require the aligned speaker embeddings.
    """

    def __init__(
        self,
        margin=0.2,
        scale=30.0,
        orth_lambda=0.0,
        assist=False,
        lr=0.05,
        epochs=100,
        batch_size=64,
        momentum=0.0,
        seed=0,
    ):
        self.margin = margin
        self.scale = scale
        self.orth_lambda = orth_lambda
        self.assist = assist
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.momentum = momentum
        self.seed = seed

    def _hp(self):
        return HyperParams(
            lr=self.lr,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            momentum=self.momentum,
            aam_margin=self.margin,
            aam_scale=self.scale,
            orth_lambda=self.orth_lambda,
        )

    def fit(self, X, y, speaker=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2:
            raise ShapeMismatchError(f"X must be 2-D, got {X.shape}")
        check_one_per_class(y)
        if self.assist and speaker is None:
            raise ShapeMismatchError("assist=True requires speaker embeddings")
        dim = X.shape[1]
        rng = StableRng(self.seed)

        params = {
            "w0": rng.init_uniform(dim, dim),
            "w1": rng.init_uniform(dim, dim),
        }
        if self.assist:
            speaker = np.asarray(speaker, dtype=np.float64)
            if speaker.shape != X.shape:
                raise ShapeMismatchError("speaker embeddings must align with X")
            params["assist_w"] = rng.init_uniform((dim, 2 * dim), 2 * dim)
            params["assist_b"] = np.zeros(dim)
            Z = np.concatenate([X, speaker], axis=1)

        hp = self._hp()

        def batch_fn(p, idx):
            yb = y[idx].astype(float)
            if self.assist:
                zb = Z[idx]
                eb = zb @ p["assist_w"].T + p["assist_b"]
            else:
                eb = X[idx]
            loss, g0, g1, g_e = _batch_aam(
                eb, yb, p["w0"], p["w1"], self.margin, self.scale, self.assist
            )
            grads = {"w0": g0, "w1": g1}
            if self.orth_lambda > 0.0:
                pen, p0, p1 = orthogonality_grads(p["w0"], p["w1"])
                loss += self.orth_lambda * pen
                grads["w0"] = grads["w0"] + self.orth_lambda * p0
                grads["w1"] = grads["w1"] + self.orth_lambda * p1
            if self.assist:
                grads["assist_w"] = g_e.T @ zb
                grads["assist_b"] = g_e.sum(axis=0)
            return loss, grads

        self.report_ = run_sgd(params, batch_fn, X.shape[0], hp, rng)
        self.w0_ = params["w0"]
        self.w1_ = params["w1"]
        if self.assist:
            self.assist_weight_ = params["assist_w"]
            self.assist_bias_ = params["assist_b"]
        self.dim_ = dim
        self.classes_ = np.array([0, 1])
        return self

    @property
    def scoring_vector_(self):
        """W = w1 - w0, recomputed on access."""
        check_is_fitted(self, "w1_")
        return self.w1_ - self.w0_

    def effective_embeddings(self, X, speaker=None):
        """Apply the assist layer when present; otherwise pass through."""
        check_is_fitted(self, "w1_")
        X = np.asarray(X, dtype=np.float64)
        if not getattr(self, "assist", False) or not hasattr(self, "assist_weight_"):
            return X
        if speaker is None:
            raise ShapeMismatchError("assist model requires speaker embeddings")
        return assist_transform(X, np.asarray(speaker, dtype=np.float64), self.assist_weight_, self.assist_bias_)

    def decision_function(self, X, speaker=None):
        e = self.effective_embeddings(X, speaker)
        return e @ self.scoring_vector_

    def predict(self, X, speaker=None):
        return (self.decision_function(X, speaker) >= 0.0).astype(int)

    def copy_fitted(self):
        """Deep copy of the fitted state (used to honor the frozen-branch
        contract during stage-2 training)."""
        check_is_fitted(self, "w1_")
        dup = CountermeasureClassifier(**self.get_params())
        dup.w0_ = self.w0_.copy()
        dup.w1_ = self.w1_.copy()
        dup.dim_ = self.dim_
        dup.classes_ = self.classes_.copy()
        if hasattr(self, "assist_weight_"):
            dup.assist_weight_ = self.assist_weight_.copy()
            dup.assist_bias_ = self.assist_bias_.copy()
        return dup

    @classmethod
    def from_arrays(cls, w0, w1, assist_weight=None, assist_bias=None, **params):
        model = cls(**params)
        model.w0_ = np.asarray(w0, dtype=np.float64)
        model.w1_ = np.asarray(w1, dtype=np.float64)
        if model.w0_.shape != model.w1_.shape or model.w0_.ndim != 1:
            raise ShapeMismatchError("w0 and w1 must be equal-length vectors")
        model.dim_ = model.w0_.shape[0]
        model.classes_ = np.array([0, 1])
        if assist_weight is not None:
            model.assist = True
            model.assist_weight_ = np.asarray(assist_weight, dtype=np.float64)
            model.assist_bias_ = np.asarray(assist_bias, dtype=np.float64)
        return model
