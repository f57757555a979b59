"""Integrated scoring heads.

Every head is an sklearn-style estimator over a trial feature matrix
``X`` laid out as ``[e_test | e_en | e_cm]`` (width 3*dim), with the
trial label ``y=1`` for target and ``y=0`` for nontarget and spoof
trials. ``fit`` minimizes the class-weighted binary cross entropy of
``sigmoid(decision_function(X))`` by seeded mini-batch gradient descent;
``decision_function`` returns the raw per-trial score in input order and
is pure, so trial scoring can be parallelized freely by callers.

Heads share a frozen stage-1 countermeasure model (``cm_model``), which
is copied on fit and never mutated. With ``joint=True`` the matrix,
attention and conv heads also descend into their private copy of the
countermeasure parameters (single-stage mode).

Strategies:

* ``matrix_linear``  linear layer on the flattened J matrix
* ``diag_zero``      same, with the score-matrix diagonal zeroed
* ``prob_product``   sigmoid(s_sv) * sigmoid(s_cm), parameter free
* ``score_sum``      s_sv + s_cm, parameter free
* ``concat``         MLP on the concatenated three embeddings
* ``conv``           5x1 then 1x1 convolution over the stacked five rows
* ``attention``      scalar sigmoid gates on the two test-side
                     embeddings, then the matrix pipeline
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ShapeMismatchError, UnsupportedStrategyError
from .losses import check_one_per_class, weighted_bce, weighted_bce_grad_logit
from .matrix import (
    EXPANSION_MATRIX,
    EXPANSION_PRINTED,
    batch_j_features,
    batch_score_entries,
    sigmoid,
)
from .optim import HyperParams, run_sgd
from .rng import StableRng
from .validation import check_trial_features, normalize_rows, split_trial_features

LEAKY_SLOPE = 0.01


def _leaky(a):
    return np.where(a >= 0.0, a, LEAKY_SLOPE * a)


def _leaky_grad(a):
    return np.where(a >= 0.0, 1.0, LEAKY_SLOPE)


# ---------------------------------------------------------------------------
# per-trial functional forms (contract surface; the estimators' vectorized
# paths are cross-checked against these in the tests)


def attention_gate(e_test, e_cm, u1, b1, u2, b2):
    """Scalar sigmoid gates applied to the two test-side embeddings."""
    e_test = np.asarray(e_test, dtype=np.float64)
    e_cm = np.asarray(e_cm, dtype=np.float64)
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if e_test.shape != u1.shape or e_cm.shape != u2.shape:
        raise ShapeMismatchError("gate vectors must match embedding dims")
    g1 = sigmoid(float(e_test @ u1 + b1))
    g2 = sigmoid(float(e_cm @ u2 + b2))
    return g1 * e_test, g2 * e_cm


def concat_score(e_test, e_en, e_cm, layers):
    """Forward pass of the concatenation MLP; layers = [(W, b), ...]."""
    h = np.concatenate(
        [np.asarray(e_test, dtype=np.float64), np.asarray(e_en, dtype=np.float64), np.asarray(e_cm, dtype=np.float64)]
    )
    for i, (W, b) in enumerate(layers):
        W = np.asarray(W, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if W.shape[1] != h.shape[0]:
            raise ShapeMismatchError(f"layer {i}: weight expects {W.shape[1]} inputs, got {h.shape[0]}")
        h = W @ h + b
        if i < len(layers) - 1:
            h = _leaky(h)
    if h.shape != (1,):
        raise ShapeMismatchError(f"final layer must output 1 value, got shape {h.shape}")
    return float(h[0])


def conv_score(e_test, e_en, e_cm, w0, w1, k5, b5, k1, b1, w_out, b_out):
    """Convolutional scoring over the stacked rows [e_test, e_en, e_cm, w0, w1].

    The 5x1 kernel collapses the row axis into ``channels`` maps, the 1x1
    kernel mixes channels into one dim-length embedding, and a final
    linear layer produces the score.
    """
    rows = [np.asarray(v, dtype=np.float64) for v in (e_test, e_en, e_cm, w0, w1)]
    dim = rows[0].shape[0]
    if any(r.shape != (dim,) for r in rows):
        raise ShapeMismatchError("all five stacked vectors must share dim")
    M = np.stack(rows)  # (5, dim)
    k5 = np.asarray(k5, dtype=np.float64)
    k1 = np.asarray(k1, dtype=np.float64)
    b5 = np.asarray(b5, dtype=np.float64)
    channels = k5.shape[0]
    if k5.shape != (channels, 5) or k1.shape != (channels,) or b5.shape != (channels,):
        raise ShapeMismatchError("conv kernel shapes inconsistent with channel count")
    w_out = np.asarray(w_out, dtype=np.float64)
    if w_out.shape != (dim,):
        raise ShapeMismatchError("w_out must be dim-length")
    h = k5 @ M + b5[:, None]  # (channels, dim)
    emb = k1 @ h + b1  # (dim,)
    return float(emb @ w_out + b_out)


# ---------------------------------------------------------------------------
# gradient of the matrix-head logit wrt the probability entries


def _dz_wrt_probs(w, theta1, p_sv, p_cm, theta2, expansion):
    if expansion == EXPANSION_MATRIX:
        d_t1 = w[0] * (2.0 * theta1 + 2.0) + w[1] * p_sv + w[2] * p_cm
        d_t2 = w[1] * p_sv + w[2] * p_cm + w[3] * (2.0 * theta2 + 2.0)
        d_psv = w[0] * p_cm + w[1] * (1.0 + theta1 + theta2) + w[2] + w[3] * p_cm
        d_pcm = w[0] * p_sv + w[1] + w[2] * (1.0 + theta1 + theta2) + w[3] * p_sv
    elif expansion == EXPANSION_PRINTED:
        d_t1 = w[0] * (2.0 * theta1 + 2.0) + w[1] * p_sv + w[2] * p_cm
        d_t2 = w[1] * p_cm + w[2] * p_sv + w[3] * (2.0 * theta2 + 2.0)
        d_psv = w[0] * p_cm + w[1] * (1.0 + theta1) + w[2] * (1.0 + theta2) + w[3] * p_cm
        d_pcm = w[0] * p_sv + w[1] * (1.0 + theta2) + w[2] * (1.0 + theta1) + w[3] * p_sv
    else:
        raise UnsupportedStrategyError(f"unknown J expansion {expansion!r}")
    return d_t1, d_psv, d_pcm, d_t2


class ScoringHead(BaseEstimator):
    """Shared estimator machinery; subclasses define the strategy."""

    strategy = None
    trainable = True
    supports_joint = False
    requires_cm = True
    decision_threshold = 0.0

    def _split(self, X):
        dim = X.shape[1] // 3
        if self.cm_model is not None and hasattr(self.cm_model, "dim_") and self.cm_model.dim_ != dim:
            raise ShapeMismatchError(
                f"X implies dim {dim} but countermeasure model has dim {self.cm_model.dim_}"
            )
        return dim, check_trial_features(X, dim)

    def _embeddings(self, X, cm):
        """Policy-prepared (e_test, e_en, e_cm) plus raw slices."""
        dim = X.shape[1] // 3
        e_test_raw, e_en_raw, e_cm_raw = split_trial_features(X, dim)
        e_cm = cm.effective_embeddings(e_cm_raw, speaker=e_test_raw) if cm is not None else e_cm_raw
        if self.normalize_asv:
            e_test = normalize_rows(e_test_raw)
            e_en = normalize_rows(e_en_raw)
        else:
            e_test, e_en = e_test_raw, e_en_raw
        return e_test, e_en, e_cm, e_test_raw, e_cm_raw

    def _hp(self):
        return HyperParams(
            lr=self.lr,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            momentum=self.momentum,
            bce_weights=tuple(self.bce_weights),
            prob_epsilon=self.prob_epsilon,
        )

    def fit(self, X, y):
        dim, X = self._split(X)
        if self.cm_model is None and self.requires_cm:
            raise UnsupportedStrategyError(f"{self.strategy} head requires a fitted countermeasure model")
        self.cm_model_ = self.cm_model.copy_fitted() if self.cm_model is not None else None
        self.dim_ = dim
        self.n_features_in_ = 3 * dim
        self.classes_ = np.array([0, 1])
        if not self.trainable:
            self.report_ = None
            return self

        y = np.asarray(y, dtype=np.float64)
        if y.shape != (X.shape[0],):
            raise ShapeMismatchError("y must align with X rows")
        check_one_per_class(y)

        rng = StableRng(self.seed)
        params = self._init_params(rng, dim)
        joint = bool(getattr(self, "joint", False)) and self.supports_joint
        if joint:
            params["cm_w0"] = self.cm_model_.w0_.copy()
            params["cm_w1"] = self.cm_model_.w1_.copy()
        hp = self._hp()
        cache = self._make_cache(X, joint)

        def batch_fn(p, idx):
            if joint:
                self.cm_model_.w0_ = p["cm_w0"]
                self.cm_model_.w1_ = p["cm_w1"]
                cache_b = self._make_cache(X[idx], True)
                z, fwd = self._forward(p, cache_b, slice(None))
            else:
                fwd_idx = idx
                z, fwd = self._forward(p, cache, fwd_idx)
            yb = y[idx]
            loss = float(np.mean(weighted_bce(sigmoid(z), yb, hp.bce_weights, hp.prob_epsilon)))
            dldz = weighted_bce_grad_logit(z, yb, hp.bce_weights, hp.prob_epsilon) / len(idx)
            grads = self._backward(p, fwd, dldz, joint)
            return loss, grads

        self.report_ = run_sgd(params, batch_fn, X.shape[0], hp, rng)
        if joint:
            self.cm_model_.w0_ = params.pop("cm_w0")
            self.cm_model_.w1_ = params.pop("cm_w1")
        self._adopt(params)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "dim_")
        _, X = self._split(X)
        if X.shape[1] != self.n_features_in_:
            raise ShapeMismatchError(f"X has width {X.shape[1]}, model expects {self.n_features_in_}")
        params = self._fitted_params()
        cache = self._make_cache(X, False)
        z, _ = self._forward(params, cache, slice(None))
        return z

    def predict(self, X):
        return (self.decision_function(X) >= self.decision_threshold).astype(int)

    # subclass hooks -------------------------------------------------------

    def _init_params(self, rng, dim):
        return {}

    def _make_cache(self, X, joint):
        raise NotImplementedError

    def _forward(self, params, cache, idx):
        raise NotImplementedError

    def _backward(self, params, fwd, dldz, joint):
        raise NotImplementedError

    def _fitted_params(self):
        raise NotImplementedError

    def _adopt(self, params):
        pass


class MatrixScoringHead(ScoringHead):
    """Linear classifier on the flattened J matrix.

    ``zero_diagonal=True`` pins the score-matrix diagonal at zero before
    the sigmoid (branch-independence variant). ``expansion`` selects the
    J form: the literal matrix formula (default) or the printed
    entrywise expansion kept for comparison runs.
    """

    strategy = "matrix_linear"
    supports_joint = True

    def __init__(
        self,
        cm_model=None,
        zero_diagonal=False,
        expansion=EXPANSION_MATRIX,
        normalize_asv=True,
        joint=False,
        lr=1.0,
        epochs=2000,
        batch_size=0,
        momentum=0.9,
        bce_weights=(0.1, 0.9),
        prob_epsilon=1e-7,
        seed=0,
    ):
        self.cm_model = cm_model
        self.zero_diagonal = zero_diagonal
        self.expansion = expansion
        self.normalize_asv = normalize_asv
        self.joint = joint
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.momentum = momentum
        self.bce_weights = bce_weights
        self.prob_epsilon = prob_epsilon
        self.seed = seed

    def _hp(self):
        hp = super()._hp()
        if self.batch_size <= 0:
            hp.batch_size = 1 << 30  # full batch
        return hp

    def _init_params(self, rng, dim):
        return {"w": rng.init_uniform(4, 4), "b": np.float64(0.0)}

    def _make_cache(self, X, joint):
        e_test, e_en, e_cm, e_test_raw, e_cm_raw = self._embeddings(X, self.cm_model_)
        cache = {"e_test": e_test, "e_en": e_en, "e_cm": e_cm}
        if not joint:
            w = self.cm_model_.scoring_vector_
            eta1, s_sv, s_cm, eta2 = batch_score_entries(e_test, e_cm, w, e_en)
            cache["entries"] = (eta1, s_sv, s_cm, eta2)
        return cache

    def _forward(self, params, cache, idx):
        if "entries" in cache:
            eta1, s_sv, s_cm, eta2 = (a[idx] for a in cache["entries"])
        else:
            w = self.cm_model_.scoring_vector_
            eta1, s_sv, s_cm, eta2 = batch_score_entries(
                cache["e_test"][idx], cache["e_cm"][idx], w, cache["e_en"][idx]
            )
        theta1, p_sv, p_cm, theta2 = sigmoid(eta1), sigmoid(s_sv), sigmoid(s_cm), sigmoid(eta2)
        F = batch_j_features(theta1, p_sv, p_cm, theta2, self.expansion, self.zero_diagonal)
        z = F @ params["w"] + params["b"]
        fwd = {
            "F": F,
            "probs": (theta1, p_sv, p_cm, theta2),
            "e_test": cache["e_test"][idx],
            "e_en": cache["e_en"][idx],
            "e_cm": cache["e_cm"][idx],
        }
        return z, fwd

    def _backward(self, params, fwd, dldz, joint):
        grads = {"w": fwd["F"].T @ dldz, "b": np.float64(np.sum(dldz))}
        if joint:
            theta1, p_sv, p_cm, theta2 = fwd["probs"]
            if self.zero_diagonal:
                theta1 = np.full_like(p_sv, 0.5)
                theta2 = np.full_like(p_sv, 0.5)
            d_t1, d_psv, d_pcm, d_t2 = _dz_wrt_probs(params["w"], theta1, p_sv, p_cm, theta2, self.expansion)
            ds_cm = dldz * d_pcm * p_cm * (1.0 - p_cm)
            if self.zero_diagonal:
                d_eta1 = np.zeros_like(ds_cm)
            else:
                d_eta1 = dldz * d_t1 * theta1 * (1.0 - theta1)
            gW = d_eta1 @ fwd["e_test"] + ds_cm @ fwd["e_cm"]
            grads["cm_w0"] = -gW
            grads["cm_w1"] = gW
        return grads

    def _fitted_params(self):
        return {"w": self.weights_, "b": self.bias_}

    def _adopt(self, params):
        self.weights_ = params["w"]
        self.bias_ = float(params["b"])


class DiagZeroScoringHead(MatrixScoringHead):
    """Matrix head with the score-matrix diagonal forced to zero."""

    strategy = "diag_zero"

    def __init__(self, cm_model=None, expansion=EXPANSION_MATRIX, normalize_asv=True, joint=False,
                 lr=1.0, epochs=2000, batch_size=0, momentum=0.9, bce_weights=(0.1, 0.9),
                 prob_epsilon=1e-7, seed=0):
        super().__init__(
            cm_model=cm_model,
            zero_diagonal=True,
            expansion=expansion,
            normalize_asv=normalize_asv,
            joint=joint,
            lr=lr,
            epochs=epochs,
            batch_size=batch_size,
            momentum=momentum,
            bce_weights=bce_weights,
            prob_epsilon=prob_epsilon,
            seed=seed,
        )


class ProbProductHead(ScoringHead):
    """sigmoid(s_sv) * sigmoid(s_cm); nothing to train."""

    strategy = "prob_product"
    trainable = False
    decision_threshold = 0.25

    def __init__(self, cm_model=None, normalize_asv=True):
        self.cm_model = cm_model
        self.normalize_asv = normalize_asv

    def _make_cache(self, X, joint):
        e_test, e_en, e_cm, _, _ = self._embeddings(X, self.cm_model_)
        return {"e_test": e_test, "e_en": e_en, "e_cm": e_cm}

    def _forward(self, params, cache, idx):
        w = self.cm_model_.scoring_vector_
        _, s_sv, s_cm, _ = batch_score_entries(cache["e_test"][idx], cache["e_cm"][idx], w, cache["e_en"][idx])
        return sigmoid(s_sv) * sigmoid(s_cm), None

    def _fitted_params(self):
        return {}


class ScoreSumHead(ScoringHead):
    """s_sv + s_cm (optionally min-max normalized per scored batch)."""

    strategy = "score_sum"
    trainable = False

    def __init__(self, cm_model=None, normalize_asv=True, minmax_normalize=False):
        self.cm_model = cm_model
        self.normalize_asv = normalize_asv
        self.minmax_normalize = minmax_normalize

    def _make_cache(self, X, joint):
        e_test, e_en, e_cm, _, _ = self._embeddings(X, self.cm_model_)
        return {"e_test": e_test, "e_en": e_en, "e_cm": e_cm}

    def _forward(self, params, cache, idx):
        w = self.cm_model_.scoring_vector_
        _, s_sv, s_cm, _ = batch_score_entries(cache["e_test"][idx], cache["e_cm"][idx], w, cache["e_en"][idx])
        if self.minmax_normalize:
            s_sv = self._minmax(s_sv)
            s_cm = self._minmax(s_cm)
        return s_sv + s_cm, None

    @staticmethod
    def _minmax(s):
        lo, hi = float(np.min(s)), float(np.max(s))
        if hi - lo < 1e-12:
            return np.zeros_like(s)
        return (s - lo) / (hi - lo)

    def _fitted_params(self):
        return {}


class ConcatHead(ScoringHead):
    """MLP over the concatenated [e_test; e_en; e_cm] features."""

    strategy = "concat"
    requires_cm = False

    def __init__(
        self,
        cm_model=None,
        hidden_sizes=(256, 128, 64),
        normalize_asv=True,
        lr=0.05,
        epochs=100,
        batch_size=64,
        momentum=0.0,
        bce_weights=(0.1, 0.9),
        prob_epsilon=1e-7,
        seed=0,
    ):
        self.cm_model = cm_model
        self.hidden_sizes = hidden_sizes
        self.normalize_asv = normalize_asv
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.momentum = momentum
        self.bce_weights = bce_weights
        self.prob_epsilon = prob_epsilon
        self.seed = seed

    def _sizes(self, dim):
        return [3 * dim, *self.hidden_sizes, 1]

    def _init_params(self, rng, dim):
        sizes = self._sizes(dim)
        params = {}
        for i in range(len(sizes) - 1):
            params[f"w{i}"] = rng.init_uniform((sizes[i + 1], sizes[i]), sizes[i])
            params[f"b{i}"] = np.zeros(sizes[i + 1])
        return params

    def _n_layers(self):
        return len(self.hidden_sizes) + 1

    def _make_cache(self, X, joint):
        e_test, e_en, e_cm, _, _ = self._embeddings(X, self.cm_model_)
        return {"feats": np.concatenate([e_test, e_en, e_cm], axis=1)}

    def _forward(self, params, cache, idx):
        h = cache["feats"][idx]
        n_layers = self._n_layers()
        hs, acts = [h], []
        for i in range(n_layers):
            a = h @ params[f"w{i}"].T + params[f"b{i}"]
            acts.append(a)
            h = _leaky(a) if i < n_layers - 1 else a
            hs.append(h)
        return h[:, 0], {"hs": hs, "acts": acts}

    def _backward(self, params, fwd, dldz, joint):
        n_layers = self._n_layers()
        grads = {}
        delta = dldz[:, None]
        for i in reversed(range(n_layers)):
            grads[f"w{i}"] = delta.T @ fwd["hs"][i]
            grads[f"b{i}"] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ params[f"w{i}"]) * _leaky_grad(fwd["acts"][i - 1])
        return grads

    def _fitted_params(self):
        return dict(self.layers_)

    def _adopt(self, params):
        self.layers_ = {k: v for k, v in params.items()}


class ConvHead(ScoringHead):
    """Conv scoring over the stacked rows [e_test, e_en, e_cm, w0, w1]."""

    strategy = "conv"
    supports_joint = True

    def __init__(
        self,
        cm_model=None,
        channels=8,
        normalize_asv=True,
        joint=False,
        lr=0.05,
        epochs=100,
        batch_size=64,
        momentum=0.0,
        bce_weights=(0.1, 0.9),
        prob_epsilon=1e-7,
        seed=0,
    ):
        self.cm_model = cm_model
        self.channels = channels
        self.normalize_asv = normalize_asv
        self.joint = joint
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.momentum = momentum
        self.bce_weights = bce_weights
        self.prob_epsilon = prob_epsilon
        self.seed = seed

    def _init_params(self, rng, dim):
        c = int(self.channels)
        return {
            "k5": rng.init_uniform((c, 5), 5),
            "b5": np.zeros(c),
            "k1": rng.init_uniform(c, c),
            "b1": np.float64(0.0),
            "w_out": rng.init_uniform(dim, dim),
            "b_out": np.float64(0.0),
        }

    def _make_cache(self, X, joint):
        e_test, e_en, e_cm, _, _ = self._embeddings(X, self.cm_model_)
        return {"e_test": e_test, "e_en": e_en, "e_cm": e_cm}

    def _forward(self, params, cache, idx):
        e_test = cache["e_test"][idx]
        e_en = cache["e_en"][idx]
        e_cm = cache["e_cm"][idx]
        n = e_test.shape[0]
        w0 = np.broadcast_to(self.cm_model_.w0_, e_test.shape)
        w1 = np.broadcast_to(self.cm_model_.w1_, e_test.shape)
        M = np.stack([e_test, e_en, e_cm, w0, w1], axis=1)  # (n, 5, dim)
        h = np.einsum("cr,nrd->ncd", params["k5"], M) + params["b5"][None, :, None]
        emb = np.einsum("c,ncd->nd", params["k1"], h) + params["b1"]
        z = emb @ params["w_out"] + params["b_out"]
        return z, {"M": M, "h": h, "emb": emb, "n": n}

    def _backward(self, params, fwd, dldz, joint):
        M, h, emb = fwd["M"], fwd["h"], fwd["emb"]
        w_out, k1 = params["w_out"], params["k1"]
        grads = {
            "w_out": emb.T @ dldz,
            "b_out": np.float64(np.sum(dldz)),
            "k1": np.einsum("n,ncd,d->c", dldz, h, w_out),
            "b1": np.float64(np.sum(dldz) * np.sum(w_out)),
            "k5": np.einsum("n,c,nrd,d->cr", dldz, k1, M, w_out),
            "b5": np.sum(dldz) * k1 * np.sum(w_out),
        }
        if joint:
            # rows 3 and 4 of M are w0 and w1
            dM = np.einsum("n,c,cr,d->nrd", dldz, k1, params["k5"], w_out)
            grads["cm_w0"] = dM[:, 3, :].sum(axis=0)
            grads["cm_w1"] = dM[:, 4, :].sum(axis=0)
        return grads

    def _fitted_params(self):
        return dict(self.kernel_params_)

    def _adopt(self, params):
        self.kernel_params_ = {k: v for k, v in params.items()}


class AttentionHead(ScoringHead):
    """Matrix pipeline with learned scalar gates on e_test and e_cm."""

    strategy = "attention"
    supports_joint = True

    def __init__(
        self,
        cm_model=None,
        expansion=EXPANSION_MATRIX,
        normalize_asv=True,
        joint=False,
        lr=0.5,
        epochs=2000,
        batch_size=0,
        momentum=0.0,
        bce_weights=(0.1, 0.9),
        prob_epsilon=1e-7,
        seed=0,
    ):
        self.cm_model = cm_model
        self.expansion = expansion
        self.normalize_asv = normalize_asv
        self.joint = joint
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.momentum = momentum
        self.bce_weights = bce_weights
        self.prob_epsilon = prob_epsilon
        self.seed = seed

    def _hp(self):
        hp = super()._hp()
        if self.batch_size <= 0:
            hp.batch_size = 1 << 30
        return hp

    def _init_params(self, rng, dim):
        return {
            "u1": rng.init_uniform(dim, dim),
            "b1": np.float64(0.0),
            "u2": rng.init_uniform(dim, dim),
            "b2": np.float64(0.0),
            "w": rng.init_uniform(4, 4),
            "b": np.float64(0.0),
        }

    def _make_cache(self, X, joint):
        e_test, e_en, e_cm, _, _ = self._embeddings(X, self.cm_model_)
        cache = {"e_test": e_test, "e_en": e_en, "e_cm": e_cm}
        if not joint:
            w = self.cm_model_.scoring_vector_
            cache["entries"] = batch_score_entries(e_test, e_cm, w, e_en)
        return cache

    def _forward(self, params, cache, idx):
        e_test = cache["e_test"][idx]
        e_en = cache["e_en"][idx]
        e_cm = cache["e_cm"][idx]
        if "entries" in cache:
            a1, a_sv, a_cm, a2 = (a[idx] for a in cache["entries"])
        else:
            a1, a_sv, a_cm, a2 = batch_score_entries(e_test, e_cm, self.cm_model_.scoring_vector_, e_en)
        g1 = sigmoid(e_test @ params["u1"] + params["b1"])
        g2 = sigmoid(e_cm @ params["u2"] + params["b2"])
        eta1, s_sv = g1 * a1, g1 * a_sv
        s_cm, eta2 = g2 * a_cm, g2 * a2
        theta1, p_sv, p_cm, theta2 = sigmoid(eta1), sigmoid(s_sv), sigmoid(s_cm), sigmoid(eta2)
        F = batch_j_features(theta1, p_sv, p_cm, theta2, self.expansion)
        z = F @ params["w"] + params["b"]
        fwd = {
            "F": F,
            "probs": (theta1, p_sv, p_cm, theta2),
            "bases": (a1, a_sv, a_cm, a2),
            "gates": (g1, g2),
            "e_test": e_test,
            "e_en": e_en,
            "e_cm": e_cm,
        }
        return z, fwd

    def _backward(self, params, fwd, dldz, joint):
        theta1, p_sv, p_cm, theta2 = fwd["probs"]
        a1, a_sv, a_cm, a2 = fwd["bases"]
        g1, g2 = fwd["gates"]
        d_t1, d_psv, d_pcm, d_t2 = _dz_wrt_probs(params["w"], theta1, p_sv, p_cm, theta2, self.expansion)
        d_eta1 = dldz * d_t1 * theta1 * (1.0 - theta1)
        d_ssv = dldz * d_psv * p_sv * (1.0 - p_sv)
        d_scm = dldz * d_pcm * p_cm * (1.0 - p_cm)
        d_eta2 = dldz * d_t2 * theta2 * (1.0 - theta2)

        d_g1 = d_eta1 * a1 + d_ssv * a_sv
        d_g2 = d_scm * a_cm + d_eta2 * a2
        s1 = d_g1 * g1 * (1.0 - g1)
        s2 = d_g2 * g2 * (1.0 - g2)
        grads = {
            "w": fwd["F"].T @ dldz,
            "b": np.float64(np.sum(dldz)),
            "u1": s1 @ fwd["e_test"],
            "b1": np.float64(np.sum(s1)),
            "u2": s2 @ fwd["e_cm"],
            "b2": np.float64(np.sum(s2)),
        }
        if joint:
            gW = (d_eta1 * g1) @ fwd["e_test"] + (d_scm * g2) @ fwd["e_cm"]
            grads["cm_w0"] = -gW
            grads["cm_w1"] = gW
        return grads

    def _fitted_params(self):
        return {
            "u1": self.gate_u1_,
            "b1": self.gate_b1_,
            "u2": self.gate_u2_,
            "b2": self.gate_b2_,
            "w": self.weights_,
            "b": self.bias_,
        }

    def _adopt(self, params):
        self.gate_u1_ = params["u1"]
        self.gate_b1_ = float(params["b1"])
        self.gate_u2_ = params["u2"]
        self.gate_b2_ = float(params["b2"])
        self.weights_ = params["w"]
        self.bias_ = float(params["b"])


STRATEGIES = {
    cls.strategy: cls
    for cls in (
        MatrixScoringHead,
        DiagZeroScoringHead,
        ProbProductHead,
        ScoreSumHead,
        ConcatHead,
        ConvHead,
        AttentionHead,
    )
}


def make_head(strategy, **kwargs):
    try:
        cls = STRATEGIES[strategy]
    except KeyError:
        raise UnsupportedStrategyError(
            f"unknown strategy {strategy!r}; expected one of {sorted(STRATEGIES)}"
        ) from None
    return cls(**kwargs)
