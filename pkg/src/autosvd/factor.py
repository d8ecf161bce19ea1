"""Latent-factor rating models: biased SVD, SVD++, AutoSVD and AutoSVD++.

All four share one parameterisation.  The effective item vector is
``item_base[i] + content_term[i]`` where ``content_term = beta * cae(C_i)``
(all zeros for the two plain variants), and the user vector is ``U[u]``,
augmented by ``|N(u)|^-1/2 * sum_{j in N(u)} Y[j]`` for the ``++`` variants.
N(u) is the set of items ``u`` rated in the training split.

SGD inner loops are numba kernels.  Within one rating every update reads
the pre-update values of that rating's parameters.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from numba import njit

from . import store
from .cae import DivergenceError

_logger = logging.getLogger(__name__)

VARIANTS = ("biased_svd", "svdpp", "autosvd", "autosvdpp")
TRAINERS = ("naive", "efficient")
IMPLICIT = frozenset({"svdpp", "autosvdpp"})
CONTENT = frozenset({"autosvd", "autosvdpp"})


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; valid variants: {', '.join(VARIANTS)}")


@dataclass(frozen=True)
class TrainConfig:
    gamma1: float = 0.01
    gamma2: float = 0.01
    lambda1: float = 0.1
    lambda2: float = 0.1
    beta: float = 0.1
    k: int = 10
    epochs: int = 50
    seed: int = 0
    init_scale: float = 0.05
    min_improvement: float = 0.0

    def __post_init__(self):
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ValueError("learning rates must be > 0")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("regularization weights must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.init_scale <= 0:
            raise ValueError("init_scale must be > 0")

    @classmethod
    def paper_defaults(cls, variant, **overrides):
        """Published hyperparameters: the AutoSVD set for ``biased_svd`` /
        ``autosvd``, the AutoSVD++ set for ``svdpp`` / ``autosvdpp``.

        Epoch counts are not published.  50 and 20 sit at the validation-RMSE
        minimum of each family on ML-100K (inner split of the training data);
        the weakly regularised ++ setting overfits after ~20 epochs.
        """
        _check_variant(variant)
        if variant in IMPLICIT:
            base = dict(gamma1=0.007, gamma2=0.007, lambda1=0.005, lambda2=0.015, beta=0.1,
                        epochs=20)
        else:
            base = dict(gamma1=0.01, gamma2=0.01, lambda1=0.1, lambda2=0.1, beta=0.1, epochs=50)
        base.update(overrides)
        return cls(**base)


@dataclass(eq=False)
class FactorModel:
    variant: str
    k: int
    mu: float
    b_u: np.ndarray
    b_i: np.ndarray
    U: np.ndarray
    item_base: np.ndarray
    Y: np.ndarray | None
    content_term: np.ndarray
    beta: float = 0.0
    features_checksum: str | None = None

    def __post_init__(self):
        _check_variant(self.variant)

    @property
    def n_users(self):
        return self.U.shape[0]

    @property
    def n_items(self):
        return self.item_base.shape[0]

    @property
    def implicit(self):
        return self.variant in IMPLICIT

    def item_vectors(self):
        return self.item_base + self.content_term

    def copy(self):
        return replace(
            self, b_u=self.b_u.copy(), b_i=self.b_i.copy(), U=self.U.copy(),
            item_base=self.item_base.copy(), Y=None if self.Y is None else self.Y.copy(),
            content_term=self.content_term.copy(),
        )

    def parameters(self):
        out = {"b_u": self.b_u, "b_i": self.b_i, "U": self.U, "item_base": self.item_base}
        if self.Y is not None:
            out["Y"] = self.Y
        return out

    def is_finite(self):
        return np.isfinite(self.mu) and all(np.all(np.isfinite(a)) for a in self.parameters().values())


def init_model(variant, n_users, n_items, mu, cfg, features=None, rng=None):
    """Zero biases, factors uniform in ``[-init_scale, init_scale]``."""
    _check_variant(variant)
    k = cfg.k
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    s = cfg.init_scale
    U = rng.uniform(-s, s, size=(n_users, k))
    item_base = rng.uniform(-s, s, size=(n_items, k))
    Y = rng.uniform(-s, s, size=(n_items, k)) if variant in IMPLICIT else None
    checksum = None
    if variant in CONTENT:
        features = np.asarray(features, dtype=np.float64)
        if features.shape != (n_items, k):
            raise ValueError(f"feature matrix has shape {features.shape}, expected {(n_items, k)}")
        content = cfg.beta * features
        checksum = store.checksum(features)
        beta = cfg.beta
    else:
        content = np.zeros((n_items, k))
        beta = 0.0
    return FactorModel(variant, k, float(mu), np.zeros(n_users), np.zeros(n_items), U,
                       item_base, Y, content, beta, checksum)


# --- prediction and objective ---------------------------------------------

def _implicit_operator(train):
    """Sparse matrix A with ``A @ Y`` = per-user ``|N(u)|^-1/2 * sum_j Y[j]``."""
    counts = train.user_counts
    scale = np.zeros(len(counts))
    nz = counts > 0
    scale[nz] = counts[nz] ** -0.5
    data = np.repeat(scale, counts)
    return sp.csr_matrix((data, train.indices, train.indptr), shape=(train.n_users, train.n_items))


def user_vectors(m, train):
    """``U[u]`` plus, for implicit variants, the normalised sum of ``Y`` over N(u)."""
    if m.Y is None:
        return m.U
    return m.U + _implicit_operator(train) @ m.Y


def predict_many(m, train, users, items, clip=True, cold_start=True):
    """Vectorised prediction for parallel ``users`` / ``items`` arrays.

    With ``cold_start`` a user without training ratings contributes neither
    bias nor factors, and an item without training ratings contributes
    neither ``b_i`` nor ``item_base`` (its fixed content term is kept).
    ``clip`` bounds the result to the training rating range.
    """
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    P = user_vectors(m, train)
    if cold_start:
        user_ok = (train.user_counts > 0)[users]
        item_ok = (train.item_counts > 0)[items]
        q = m.content_term[items] + m.item_base[items] * item_ok[:, None]
        pred = (m.mu + m.b_u[users] * user_ok + m.b_i[items] * item_ok
                + np.einsum("ij,ij->i", q, P[users]) * user_ok)
    else:
        q = m.content_term[items] + m.item_base[items]
        pred = m.mu + m.b_u[users] + m.b_i[items] + np.einsum("ij,ij->i", q, P[users])
    if clip:
        lo, hi = train.rating_scale
        pred = np.clip(pred, lo, hi)
    return pred


def predict(m, train, u, i, clip=True):
    return float(predict_many(m, train, [u], [i], clip=clip)[0])


def objective(m, train, cfg):
    """Regularised squared error over the training ratings.

    The regulariser is accumulated once per rating: ``lambda1 * (b_u^2 + b_i^2)
    + lambda2 * (||item_base_i||^2 + ||U_u||^2 + sum_{j in N(u)} ||Y_j||^2)``,
    the last sum only for implicit variants.
    """
    u, i = train.users, train.items
    err = train.ratings - predict_many(m, train, u, i, clip=False, cold_start=False)
    reg = cfg.lambda1 * (m.b_u[u] ** 2 + m.b_i[i] ** 2)
    fac = np.sum(m.item_base[i] ** 2, axis=1) + np.sum(m.U[u] ** 2, axis=1)
    if m.Y is not None:
        y_sq = np.sum(m.Y**2, axis=1)
        per_user = np.add.reduceat(np.append(y_sq[train.indices], 0.0), train.indptr[:-1])
        per_user[train.user_counts == 0] = 0.0
        fac = fac + per_user[u]
    reg = reg + cfg.lambda2 * fac
    return float(np.sum(err**2) + np.sum(reg))


def train_rmse(m, train):
    err = train.ratings - predict_many(m, train, train.users, train.items, clip=False,
                                       cold_start=False)
    return float(np.sqrt(np.mean(err**2)))


# --- numba kernels --------------------------------------------------------

@njit(cache=True)
def _step_autosvd(u, i, r, mu, b_u, b_i, U, E, C, g1, g2, l1, l2):
    k = U.shape[1]
    pred = mu + b_u[u] + b_i[i]
    for f in range(k):
        pred += (E[i, f] + C[i, f]) * U[u, f]
    e = r - pred
    b_u[u] += g1 * (e - l1 * b_u[u])
    b_i[i] += g1 * (e - l1 * b_i[i])
    for f in range(k):
        eo = E[i, f]
        uo = U[u, f]
        E[i, f] = eo + g2 * (e * uo - l2 * eo)
        U[u, f] = uo + g2 * (e * (C[i, f] + eo) - l2 * uo)
    return e


@njit(cache=True)
def _step_autosvdpp_naive(u, i, r, mu, b_u, b_i, U, E, C, Y, indptr, indices,
                          g1, g2, l1, l2, imp, q):
    k = U.shape[1]
    lo = indptr[u]
    hi = indptr[u + 1]
    norm = (hi - lo) ** -0.5 if hi > lo else 0.0
    for f in range(k):
        imp[f] = 0.0
    for p in range(lo, hi):
        j = indices[p]
        for f in range(k):
            imp[f] += Y[j, f]
    pred = mu + b_u[u] + b_i[i]
    for f in range(k):
        imp[f] *= norm
        q[f] = E[i, f] + C[i, f]
        pred += q[f] * (U[u, f] + imp[f])
    e = r - pred
    b_u[u] += g1 * (e - l1 * b_u[u])
    b_i[i] += g1 * (e - l1 * b_i[i])
    for f in range(k):
        eo = E[i, f]
        uo = U[u, f]
        E[i, f] = eo + g2 * (e * (uo + imp[f]) - l2 * eo)
        U[u, f] = uo + g2 * (e * q[f] - l2 * uo)
    for p in range(lo, hi):
        j = indices[p]
        for f in range(k):
            Y[j, f] += g2 * (e * norm * q[f] - l2 * Y[j, f])
    return e


@njit(cache=True)
def _epoch_autosvd(order, users, items, ratings, mu, b_u, b_i, U, E, C, g1, g2, l1, l2):
    for t in order:
        _step_autosvd(users[t], items[t], ratings[t], mu, b_u, b_i, U, E, C, g1, g2, l1, l2)


@njit(cache=True)
def _epoch_autosvdpp_naive(order, users, items, ratings, mu, b_u, b_i, U, E, C, Y,
                           indptr, indices, g1, g2, l1, l2):
    k = U.shape[1]
    imp = np.empty(k)
    q = np.empty(k)
    for t in order:
        _step_autosvdpp_naive(users[t], items[t], ratings[t], mu, b_u, b_i, U, E, C, Y,
                              indptr, indices, g1, g2, l1, l2, imp, q)


@njit(cache=True)
def _epoch_autosvdpp_efficient(user_order, by_user_ptr, by_user, items, ratings, mu,
                               b_u, b_i, U, E, C, Y, indptr, indices, g1, g2, l1, l2):
    k = U.shape[1]
    p_im = np.empty(k)
    p_old = np.empty(k)
    for u in user_order:
        t_lo = by_user_ptr[u]
        t_hi = by_user_ptr[u + 1]
        if t_hi == t_lo:
            continue
        lo = indptr[u]
        hi = indptr[u + 1]
        norm = (hi - lo) ** -0.5 if hi > lo else 0.0
        for f in range(k):
            p_im[f] = 0.0
        for p in range(lo, hi):
            j = indices[p]
            for f in range(k):
                p_im[f] += Y[j, f]
        for f in range(k):
            p_im[f] *= norm
            p_old[f] = p_im[f]
        for s in range(t_lo, t_hi):
            t = by_user[s]
            i = items[t]
            r = ratings[t]
            pred = mu + b_u[u] + b_i[i]
            for f in range(k):
                pred += (E[i, f] + C[i, f]) * (U[u, f] + p_im[f])
            e = r - pred
            b_u[u] += g1 * (e - l1 * b_u[u])
            b_i[i] += g1 * (e - l1 * b_i[i])
            for f in range(k):
                eo = E[i, f]
                uo = U[u, f]
                po = p_im[f]
                qf = eo + C[i, f]
                E[i, f] = eo + g2 * (e * (uo + po) - l2 * eo)
                U[u, f] = uo + g2 * (e * qf - l2 * uo)
                p_im[f] = po + g2 * (e * qf - l2 * po)
        for p in range(lo, hi):
            j = indices[p]
            for f in range(k):
                Y[j, f] += norm * (p_im[f] - p_old[f])


# --- epoch operations -----------------------------------------------------

def _require(m, allowed, op):
    if m.variant not in allowed:
        raise ValueError(f"{op} does not apply to variant {m.variant!r}")


def _check_finite(m, what):
    if not m.is_finite():
        raise DivergenceError(f"non-finite parameters after {what}; lower the learning rates")


def sgd_epoch_autosvd(m, train, cfg, order_seed):
    """One pass over the training ratings in seeded random order (biased SVD / AutoSVD)."""
    _require(m, {"biased_svd", "autosvd"}, "sgd_epoch_autosvd")
    order = np.random.default_rng(order_seed).permutation(len(train))
    _epoch_autosvd(order, train.users, train.items, train.ratings, m.mu, m.b_u, m.b_i,
                   m.U, m.item_base, m.content_term,
                   cfg.gamma1, cfg.gamma2, cfg.lambda1, cfg.lambda2)
    _check_finite(m, "sgd_epoch_autosvd")
    return m


def sgd_epoch_autosvdpp_naive(m, train, cfg, order_seed):
    """Per-rating SVD++ / AutoSVD++ updates, refreshing the implicit sum and
    touching every ``Y[j]``, ``j in N(u)``, for each rating."""
    _require(m, IMPLICIT, "sgd_epoch_autosvdpp_naive")
    order = np.random.default_rng(order_seed).permutation(len(train))
    _epoch_autosvdpp_naive(order, train.users, train.items, train.ratings, m.mu, m.b_u,
                           m.b_i, m.U, m.item_base, m.content_term, m.Y, train.indptr,
                           train.indices, cfg.gamma1, cfg.gamma2, cfg.lambda1, cfg.lambda2)
    _check_finite(m, "sgd_epoch_autosvdpp_naive")
    return m


def _group_by_user(train):
    by_user = np.argsort(train.users, kind="stable")
    ptr = np.zeros(train.n_users + 1, dtype=np.int64)
    np.cumsum(np.bincount(train.users, minlength=train.n_users), out=ptr[1:])
    return ptr, by_user


def sgd_epoch_autosvdpp_efficient(m, train, cfg, order_seed=0):
    """Per-user batched SVD++ / AutoSVD++ epoch.

    For each user (seeded random order) the implicit term is accumulated once
    into ``p_im``, updated alongside the other parameters over that user's
    ratings (load order), and the net change is spread over ``Y[j]``,
    ``j in N(u)``, afterwards.  Costs O(k) per rating instead of O(k |N(u)|).
    """
    _require(m, IMPLICIT, "sgd_epoch_autosvdpp_efficient")
    ptr, by_user = _group_by_user(train)
    user_order = np.random.default_rng(order_seed).permutation(train.n_users)
    _epoch_autosvdpp_efficient(user_order, ptr, by_user, train.items, train.ratings, m.mu,
                               m.b_u, m.b_i, m.U, m.item_base, m.content_term, m.Y,
                               train.indptr, train.indices,
                               cfg.gamma1, cfg.gamma2, cfg.lambda1, cfg.lambda2)
    _check_finite(m, "sgd_epoch_autosvdpp_efficient")
    return m


def epoch_function(variant, trainer):
    _check_variant(variant)
    if trainer not in TRAINERS:
        raise ValueError(f"unknown trainer {trainer!r}; expected one of {TRAINERS}")
    if variant in IMPLICIT:
        if trainer == "efficient":
            return sgd_epoch_autosvdpp_efficient
        return sgd_epoch_autosvdpp_naive
    if trainer == "efficient":
        raise ValueError(f"the efficient trainer only applies to svdpp/autosvdpp, not {variant!r}")
    return sgd_epoch_autosvd


@dataclass
class EpochRecord:
    epoch: int
    train_rmse: float
    seconds: float

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    model: FactorModel
    trace: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.model, self.trace))


def train(variant, train, cfg, features=None, trainer="naive", on_epoch=None):
    """Initialise and fit a factor model; returns ``(model, trace)``.

    ``features`` is the CAE feature matrix (n_items x k), required for the
    AutoSVD variants and ignored otherwise.  Training stops after
    ``cfg.epochs`` epochs or once the training RMSE improves by less than
    ``cfg.min_improvement`` (by default: once it stops decreasing).  ``on_epoch`` receives each :class:`EpochRecord`.
    """
    _check_variant(variant)
    step = epoch_function(variant, trainer)
    if variant in CONTENT and features is None:
        raise ValueError(f"variant {variant!r} needs a CAE feature matrix")
    rng = np.random.default_rng(cfg.seed)
    m = init_model(variant, train.n_users, train.n_items, train.global_mean, cfg,
                   features if variant in CONTENT else None, rng)
    trace = []
    prev = train_rmse(m, train) if cfg.epochs else None
    for epoch in range(1, cfg.epochs + 1):
        order_seed = int(rng.integers(2**63))
        t0 = time.perf_counter()
        step(m, train, cfg, order_seed)
        seconds = time.perf_counter() - t0
        rmse = train_rmse(m, train)
        rec = EpochRecord(epoch, rmse, seconds)
        trace.append(rec)
        _logger.info("%s epoch %d: train rmse %.5f (%.3fs)", variant, epoch, rmse, seconds)
        if on_epoch is not None:
            on_epoch(rec)
        if prev - rmse < cfg.min_improvement:
            break
        prev = rmse
    return TrainResult(m, trace)


# --- persistence ----------------------------------------------------------

def save_model(m, path):
    meta = {"variant": m.variant, "k": m.k, "mu": m.mu.hex(), "beta": m.beta,
            "n_users": m.n_users, "n_items": m.n_items,
            "features_checksum": m.features_checksum}
    arrays = dict(m.parameters())
    arrays["content_term"] = m.content_term
    return store.write_container(path, "factor_model", meta, arrays)


def load_model(path):
    meta, a = store.read_container(path, kind="factor_model")
    return FactorModel(meta["variant"], meta["k"], float.fromhex(meta["mu"]), a["b_u"], a["b_i"],
                       a["U"], a["item_base"], a.get("Y"), a["content_term"], meta["beta"],
                       meta["features_checksum"])
