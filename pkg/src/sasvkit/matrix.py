"""Score-matrix scoring primitives.

The integrated score combines a speaker-verification branch and a
countermeasure branch through a 2x2 score matrix

    S = [[eta1,  s_sv],      eta1 = E_test . W     s_sv = E_test . E_en
         [s_cm,  eta2]]      s_cm = E_CM . W       eta2 = E_CM . E_en

i.e. exactly the product [E_test; E_CM] [W; E_en]^T, where W = w1 - w0
is the difference of the countermeasure classifier's two weight
vectors. S is mapped elementwise through a sigmoid to a probability
matrix P, and P is combined into

    J = P + P^T + P . P      (2x2 matrix product)

whose row-major flattening feeds a linear scoring layer.

The widely printed entrywise expansion of J writes the off-diagonals as
(1 + theta1) * p_sv + (1 + theta2) * p_cm, which does NOT equal the
matrix product's (1 + theta1 + theta2) * p_sv + p_cm on a generic P.
The matrix formula is primary here; ``expansion="printed"`` reproduces
the published entrywise variant for comparison experiments.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, UnsupportedStrategyError
from .validation import as_vector, check_same_dim, l2_normalize

EXPANSION_MATRIX = "matrix"
EXPANSION_PRINTED = "printed"

# float64 cannot represent values closer to 1 than ~1.1e-16, so the
# overflow-safe sigmoid clips into the largest representable open interval
_P_MIN = 1e-16
_P_MAX = 1.0 - 1e-16


def sigmoid_raw(x):
    """Overflow-safe sigmoid without the open-interval clip (gradient
    coefficients need the true tail values)."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out[0]) if scalar else out


def sigmoid(x):
    """Overflow-safe elementwise sigmoid with output strictly in (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    out = np.clip(np.atleast_1d(sigmoid_raw(x)), _P_MIN, _P_MAX)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class ScoreMatrix:
    eta1: float
    s_sv: float
    s_cm: float
    eta2: float

    def as_array(self):
        return np.array([[self.eta1, self.s_sv], [self.s_cm, self.eta2]])


@dataclass(frozen=True)
class ProbMatrix:
    theta1: float
    p_sv: float
    p_cm: float
    theta2: float

    def as_array(self):
        return np.array([[self.theta1, self.p_sv], [self.p_cm, self.theta2]])


@dataclass(frozen=True)
class JMatrix:
    j11: float
    j12: float
    j21: float
    j22: float

    def flatten(self):
        """Row-major flattening [j11, j12, j21, j22] (fixed, serialized)."""
        return np.array([self.j11, self.j12, self.j21, self.j22])


def cosine_score(e_test, e_en):
    """Cosine similarity of the two ASV embeddings, in [-1, 1]."""
    a = l2_normalize(e_test)
    b = l2_normalize(e_en)
    check_same_dim(a, b, names=["e_test", "e_en"])
    return float(np.clip(a @ b, -1.0, 1.0))


def cm_score(e_cm, w0, w1):
    """Countermeasure score E_CM . (w1 - w0); unbounded."""
    e = as_vector(e_cm, "e_cm")
    w0 = as_vector(w0, "w0")
    w1 = as_vector(w1, "w1")
    check_same_dim(e, w0, w1, names=["e_cm", "w0", "w1"])
    return float(e @ (w1 - w0))


def score_matrix(e_test, e_cm, w, e_en):
    """All four dot products of {E_test, E_CM} against {W, E_en}.

    Normalization of e_test and e_en is the caller's policy; this is the
    raw bilinear product.
    """
    e_test = as_vector(e_test, "e_test")
    e_cm = as_vector(e_cm, "e_cm")
    w = as_vector(w, "w")
    e_en = as_vector(e_en, "e_en")
    check_same_dim(e_test, e_cm, w, e_en, names=["e_test", "e_cm", "w", "e_en"])
    return ScoreMatrix(
        eta1=float(e_test @ w),
        s_sv=float(e_test @ e_en),
        s_cm=float(e_cm @ w),
        eta2=float(e_cm @ e_en),
    )


def prob_matrix(s):
    """Elementwise sigmoid of the score matrix."""
    p = sigmoid(np.array([s.eta1, s.s_sv, s.s_cm, s.eta2]))
    return ProbMatrix(theta1=float(p[0]), p_sv=float(p[1]), p_cm=float(p[2]), theta2=float(p[3]))


def j_matrix(p, expansion=EXPANSION_MATRIX):
    """Combine P into J = P + P^T + P.P (sums and products of probabilities).

    ``expansion="matrix"`` evaluates the literal matrix formula;
    ``expansion="printed"`` evaluates the published entrywise expansion,
    which agrees on the diagonal but differs off-diagonal.
    """
    if expansion == EXPANSION_MATRIX:
        arr = p.as_array()
        j = arr + arr.T + arr @ arr
        return JMatrix(j11=float(j[0, 0]), j12=float(j[0, 1]), j21=float(j[1, 0]), j22=float(j[1, 1]))
    if expansion == EXPANSION_PRINTED:
        t1, t2, psv, pcm = p.theta1, p.theta2, p.p_sv, p.p_cm
        d1 = t1 * t1 + 2.0 * t1
        d2 = t2 * t2 + 2.0 * t2
        e1 = 1.0 + t1
        e2 = 1.0 + t2
        return JMatrix(
            j11=d1 + psv * pcm,
            j12=e1 * psv + e2 * pcm,
            j21=e1 * pcm + e2 * psv,
            j22=d2 + psv * pcm,
        )
    raise UnsupportedStrategyError(f"unknown J expansion {expansion!r}")


def matrix_linear_score(j, w, b):
    """Linear layer on the flattened J matrix; returns a raw logit."""
    w = as_vector(w, "w")
    if w.shape[0] != 4:
        raise DomainError(f"matrix head weight must have 4 entries, got {w.shape[0]}")
    return float(w @ j.flatten() + b)


def diag_zero_score(e_test, e_cm, w, e_en, head_w, head_b, expansion=EXPANSION_MATRIX):
    """Matrix-linear pipeline with eta1 and eta2 forced to zero before
    the sigmoid (independence assumption between the two branches)."""
    s = score_matrix(e_test, e_cm, w, e_en)
    s = ScoreMatrix(eta1=0.0, s_sv=s.s_sv, s_cm=s.s_cm, eta2=0.0)
    return matrix_linear_score(j_matrix(prob_matrix(s), expansion), head_w, head_b)


def prob_product_score(p_sv, p_cm):
    """Product of the two branch probabilities (independence assumption)."""
    for name, p in (("p_sv", p_sv), ("p_cm", p_cm)):
        if not (0.0 < p < 1.0):
            raise DomainError(f"{name}={p!r} outside (0, 1)")
    return float(p_sv * p_cm)


def score_sum(s_sv, s_cm):
    """Plain sum of the two branch scores."""
    if not (np.isfinite(s_sv) and np.isfinite(s_cm)):
        raise DomainError("branch scores must be finite")
    return float(s_sv + s_cm)


# Vectorized forms used by the estimators; each matches its scalar
# counterpart entry for entry (cross-checked in the test suite).


def batch_score_entries(E_test, E_cm, w, E_en):
    """Per-trial (eta1, s_sv, s_cm, eta2) columns for row-aligned inputs."""
    eta1 = E_test @ w
    s_sv = np.einsum("ij,ij->i", E_test, E_en)
    s_cm = E_cm @ w
    eta2 = np.einsum("ij,ij->i", E_cm, E_en)
    return eta1, s_sv, s_cm, eta2


def batch_j_features(theta1, p_sv, p_cm, theta2, expansion=EXPANSION_MATRIX, zero_diagonal=False):
    """Stack per-trial flattened J rows, shape (n, 4).

    With ``zero_diagonal`` the diagonal probabilities are pinned at
    sigmoid(0) = 0.5 (the scores were zeroed before the sigmoid).
    """
    if zero_diagonal:
        theta1 = np.full_like(p_sv, 0.5)
        theta2 = np.full_like(p_sv, 0.5)
    if expansion == EXPANSION_MATRIX:
        j11 = theta1 * theta1 + 2.0 * theta1 + p_sv * p_cm
        j12 = (1.0 + theta1 + theta2) * p_sv + p_cm
        j21 = (1.0 + theta1 + theta2) * p_cm + p_sv
        j22 = theta2 * theta2 + 2.0 * theta2 + p_sv * p_cm
    elif expansion == EXPANSION_PRINTED:
        j11 = theta1 * theta1 + 2.0 * theta1 + p_sv * p_cm
        j12 = (1.0 + theta1) * p_sv + (1.0 + theta2) * p_cm
        j21 = (1.0 + theta1) * p_cm + (1.0 + theta2) * p_sv
        j22 = theta2 * theta2 + 2.0 * theta2 + p_sv * p_cm
    else:
        raise UnsupportedStrategyError(f"unknown J expansion {expansion!r}")
    return np.stack([j11, j12, j21, j22], axis=1)
