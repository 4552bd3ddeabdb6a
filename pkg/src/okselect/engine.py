"""The per-round bandit-feedback protocol and its bookkeeping.

Each round draws one arm from the selector's sampling distribution,
predicts with that arm only, suffers its loss, takes an importance-weighted
gradient step on that arm, and hands the loss to the selector.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import core
from .errors import InvalidInputError, OkselectError, RunError
from .hypotheses import (ConstantHypothesis, RfHypothesis, RkhsHypothesis,
                         ogd_step_rf, ogd_step_rkhs)
from .kernels import FeatureMap, KernelSpec, feature_vector, gaussian_cross
from .losses import LossFunction, loss_derivatives, loss_values
from .selectors import Observation, Selector


@dataclass(slots=True)
class TrialRecord:
    round: int
    arm: int
    prediction: float
    label: float
    loss: float
    mistake: int
    raw_prediction: float
    p: np.ndarray | None = None
    nanoseconds: int = 0


@dataclass
class RunSummary:
    rounds: int
    metric_name: str
    metric: float
    cumulative_loss: float
    mistakes: int
    selection_counts: list
    seconds: float
    final_q: list
    final_p: list
    parameters: dict = field(default_factory=dict)

    @property
    def average_loss(self) -> float:
        return self.cumulative_loss / self.rounds

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "metric_name": self.metric_name,
            "metric": self.metric,
            "average_loss": self.average_loss,
            "cumulative_loss": self.cumulative_loss,
            "mistakes": self.mistakes,
            "selection_counts": list(self.selection_counts),
            "seconds": self.seconds,
            "final_q": list(self.final_q),
            "final_p": list(self.final_p),
            "parameters": dict(self.parameters),
        }


class OnlineRun:
    """One learner: a selector over K arms, a loss, and its round log.

    ``arms`` are all ``RkhsHypothesis``, all ``RfHypothesis`` or all
    ``ConstantHypothesis``. ``classification`` switches predictions to
    ``sign(f(x))`` (with ``sign(0) = +1``) and counts mistakes.
    """

    def __init__(self, selector: Selector, arms, loss: LossFunction, *, classification=False,
                 seed=None, p_every: int = 0, keep_records: bool = True, config=None):
        if len(arms) != selector.arms:
            raise InvalidInputError(f"{len(arms)} arms for a selector over {selector.arms}")
        kinds = {type(a) for a in arms}
        if len(kinds) != 1:
            raise InvalidInputError("all arms must be the same hypothesis type")
        self.selector = selector
        self.arms = list(arms)
        self.kind = kinds.pop()
        first = self.arms[0]
        if isinstance(first, RkhsHypothesis):
            self.input_dim = first.input_dim
        elif isinstance(first, RfHypothesis):
            self.input_dim = first.map.input_dim
        else:
            self.input_dim = None
        self.loss = loss
        self.classification = bool(classification)
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.p_every = int(p_every)
        self.keep_records = keep_records
        self.config = config
        self.records: list[TrialRecord] = []
        self.t = 0
        self.cumulative_loss = 0.0
        self.mistakes = 0
        self.counts = np.zeros(selector.arms, dtype=np.int64)
        self.elapsed_ns = 0

    @property
    def horizon(self) -> int:
        return self.selector.state.horizon


def step(run: OnlineRun, x, y) -> TrialRecord:
    t = run.t + 1
    if t > run.horizon:
        raise InvalidInputError(f"round {t} exceeds the configured horizon {run.horizon}")
    start = time.perf_counter_ns()
    x = np.ascontiguousarray(x, dtype=np.float64)
    if run.input_dim is not None and x.shape != (run.input_dim,):
        raise InvalidInputError(f"input of shape {x.shape} for arms over dimension {run.input_dim}")
    if not np.isfinite(x).all():
        raise InvalidInputError(f"non-finite input at round {t}")
    sel = run.selector
    arm = sel.sample(run.rng.random())
    p_arm = float(sel.p[arm])
    p_snap = sel.p.copy() if run.p_every and (t == 1 or t % run.p_every == 0) else None
    h = run.arms[arm]
    y = float(y)
    if run.kind is RfHypothesis:
        z = h.features(x)
        fx = float(h.weights @ z)
        feat_sq = float(z @ z)
    else:
        fx = h.predict(x)
        feat_sq = 1.0
    loss = run.loss.value(fx, y)
    g = run.loss.derivative(fx, y)
    inv_p = 1.0 / p_arm
    sel.update(Observation(arm, loss, p_arm, (g * inv_p) ** 2 * feat_sq))
    if g != 0.0 and run.kind is not ConstantHypothesis:
        lam = sel.stepsize(arm)
        if run.kind is RfHypothesis:
            ogd_step_rf(h, x, y, run.loss, lam, inv_p, prediction=fx, derivative=g, features=z)
        else:
            ogd_step_rkhs(h, x, y, run.loss, lam, inv_p, prediction=fx, derivative=g)
    if run.classification:
        pred = 1.0 if fx >= 0 else -1.0
        mistake = int(pred != y)
    else:
        pred = fx
        mistake = 0
    ns = time.perf_counter_ns() - start
    run.t = t
    run.cumulative_loss += loss
    run.mistakes += mistake
    run.counts[arm] += 1
    run.elapsed_ns += ns
    rec = TrialRecord(t, arm, pred, y, loss, mistake, fx, p_snap, ns)
    if run.keep_records:
        run.records.append(rec)
    return rec


def run_stream(run: OnlineRun, X, y) -> RunSummary:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise InvalidInputError("empty stream")
    if X.shape[0] != y.shape[0]:
        raise InvalidInputError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if run.t + X.shape[0] > run.horizon:
        raise InvalidInputError(f"stream of {X.shape[0]} rounds exceeds horizon {run.horizon}")
    for i in range(X.shape[0]):
        try:
            step(run, X[i], y[i])
        except OkselectError as exc:
            raise RunError(f"run aborted at round {run.t + 1}: {exc}") from exc
    return summarize(run)


def summarize(run: OnlineRun) -> RunSummary:
    T = run.t
    if run.classification:
        name, metric = "AMR", run.mistakes / T
    else:
        name, metric = "AL", run.cumulative_loss / T
    return RunSummary(
        rounds=T, metric_name=name, metric=metric, cumulative_loss=run.cumulative_loss,
        mistakes=run.mistakes, selection_counts=run.counts.tolist(),
        seconds=run.elapsed_ns / 1e9, final_q=run.selector.state.q.tolist(),
        final_p=run.selector.p.tolist(), parameters=run.selector.parameters(),
    )


# -- comparator oracle ---------------------------------------------------------

@dataclass
class OracleResult:
    cumulative_loss: float
    epochs: int
    per_epoch: list
    approximate: bool = True


# curvature bound of l(., y) in the prediction, for the batch step size
_CURVATURE = {"square": 2.0, "squared_hinge": 2.0, "logistic": 0.25}


def _conjugate_gradient(A, b, x0, tol=1e-10, max_iter=None):
    # matrix products only; no LAPACK factorisations
    x = x0.copy()
    r = b - A @ x
    d = r.copy()
    rs = float(r @ r)
    stop = tol * tol * max(float(b @ b), 1e-300)
    for _ in range(max_iter or 4 * b.shape[0]):
        if rs <= stop:
            break
        Ad = A @ d
        curv = float(d @ Ad)
        if curv <= 0.0:
            break
        step = rs / curv
        x += step * d
        r -= step * Ad
        rs_new = float(r @ r)
        d = r + (rs_new / rs) * d
        rs = rs_new
    return x


def _subspace_square_oracle(X, y, spec, radius, centers, seed):
    """Square-loss minimiser over the ball, restricted to ``span{k(c_j, .)}``.

    The centres are ``centers`` stream points drawn without replacement
    (all points when ``T <= centers``; the restriction is then lossless by
    the representer theorem). Solves the ridge system
    ``(K_ct K_tc + mu K_cc) a = K_ct y`` by conjugate gradients and bisects
    ``mu`` on a log scale until ``a' K_cc a = U^2``.
    """
    T = X.shape[0]
    if T <= centers:
        C = X
    else:
        C = X[np.sort(np.random.default_rng(seed).choice(T, centers, replace=False))]
    B = gaussian_cross(C, C, spec.gamma)
    # jitter keeps the system positive definite; a' (B + eps I) a bounds the true norm
    B[np.diag_indices_from(B)] += 1e-8
    Ktc = gaussian_cross(X, C, spec.gamma)
    # einsum keeps this product out of BLAS GEMM
    H = np.einsum("ki,kj->ij", Ktc, Ktc)
    g = Ktc.T @ y
    r2 = radius * radius
    scale = float(np.trace(H)) / H.shape[0]
    x = np.zeros(C.shape[0])

    def solve(mu, x0):
        return _conjugate_gradient(H + mu * B, g, x0)

    lo = 1e-10 * scale
    x = solve(lo, x)
    if float(x @ B @ x) > r2:
        hi = scale
        x_hi = solve(hi, np.zeros_like(x))
        while float(x_hi @ B @ x_hi) > r2:
            lo, hi = hi, hi * 10.0
            x_hi = solve(hi, x_hi)
        x = x_hi
        for _ in range(60):
            mid = math.sqrt(lo * hi)
            x_mid = solve(mid, x)
            if float(x_mid @ B @ x_mid) > r2:
                lo = mid
            else:
                hi, x = mid, x_mid
            if hi / lo < 1.0 + 1e-3:
                break
    sq_norm = float(x @ B @ x)
    if sq_norm > r2:
        x *= radius / math.sqrt(sq_norm)
    f = Ktc @ x
    return float(np.sum((f - y) ** 2))


def _batch_oracle(gram, y, loss, radius, iters, tol):
    """Accelerated projected functional gradient descent on the RKHS ball.

    Works on the expansion ``f = sum_t alpha_t k(x_t, .)``; the functional
    gradient of ``sum_t l(f(x_t), y_t)`` has coefficients ``l'(f(x_t), y_t)``.
    """
    T = gram.shape[0]
    top = _top_eigenvalue(gram)
    step = 1.0 / (_CURVATURE[loss.kind.value] * top)
    r2 = radius * radius
    alpha = np.zeros(T)
    f = np.zeros(T)
    a_prev, f_prev = alpha, f
    best = float(loss_values(loss, f, y).sum())
    history = [best]
    t_k = 1.0
    for _ in range(iters):
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_k * t_k))
        m = (t_k - 1.0) / t_next
        a_y = alpha + m * (alpha - a_prev)
        f_y = f + m * (f - f_prev)
        a_new = a_y - step * loss_derivatives(loss, f_y, y)
        f_new = gram @ a_new
        sq_norm = float(a_new @ f_new)
        if sq_norm > r2:
            s = radius / math.sqrt(sq_norm)
            a_new *= s
            f_new *= s
        a_prev, f_prev, alpha, f, t_k = alpha, f, a_new, f_new, t_next
        cur = float(loss_values(loss, f, y).sum())
        history.append(cur)
        if cur > history[-2]:
            # adaptive restart: drop the momentum
            a_prev, f_prev, t_k = alpha, f, 1.0
        if cur < best:
            improved = best - cur
            best = cur
            if improved <= tol * max(best, 1e-12):
                break
    return best, history


def _top_eigenvalue(gram, iters=50):
    v = np.full(gram.shape[0], 1.0 / math.sqrt(gram.shape[0]))
    lam = 1.0
    for _ in range(iters):
        w = gram @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 1.0
        v = w / lam
    return lam * 1.01


def offline_oracle(X, y, arm, loss: LossFunction, radius: float, epochs: int = 20,
                   gram_limit: int = 6000, iters: int = 500, tol: float = 1e-6,
                   centers: int = 400, seed: int = 0) -> OracleResult:
    """Approximate ``min_{f in arm's restricted space} sum_t l(f(x_t), y_t)``.

    ``arm`` is a ``KernelSpec`` (RKHS ball) or a ``FeatureMap``
    (random-feature box). Strategy, by case:

    * RKHS arm, square loss: exact constrained least squares over the span
      of ``centers`` stream points.
    * RKHS arm, other smooth loss, ``T <= gram_limit``: up to ``iters``
      steps of accelerated projected gradient descent on the Gram matrix.
    * otherwise: ``epochs`` passes of projected SGD with stepsize
      ``U / sqrt(epoch * T)``.

    The result is always the loss of some fixed hypothesis in the
    restricted space, so it upper-bounds the true minimum and regret
    measured against it lower-bounds the true regret.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    T = X.shape[0]
    if T == 0:
        raise InvalidInputError("empty stream")
    per_epoch = []
    if isinstance(arm, FeatureMap):
        Z = np.vstack([feature_vector(arm, x) for x in X])
        cap = radius / math.sqrt(arm.dimension)
        w = np.zeros(arm.dimension)
        for e in range(1, epochs + 1):
            eta = radius / math.sqrt(e * T)
            for t in range(T):
                g = loss.derivative(float(Z[t] @ w), y[t])
                if g:
                    w -= eta * g * Z[t]
                    np.clip(w, -cap, cap, out=w)
            per_epoch.append(float(loss_values(loss, Z @ w, y).sum()))
        return OracleResult(min(per_epoch), epochs, per_epoch)

    spec: KernelSpec = arm
    if loss.kind.value == "square":
        best = _subspace_square_oracle(X, y, spec, radius, centers, seed)
        return OracleResult(best, 1, [best])
    gram = gaussian_cross(X, X, spec.gamma) if T <= gram_limit else None
    if gram is not None and loss.kind.value in _CURVATURE:
        best, history = _batch_oracle(gram, y, loss, radius, iters, tol)
        return OracleResult(best, len(history) - 1, history)
    row = np.empty(T)
    alpha = np.zeros(T)
    sq_norm = 0.0
    r2 = radius * radius
    for e in range(1, epochs + 1):
        eta = radius / math.sqrt(e * T)
        for t in range(T):
            if gram is not None:
                krow = gram[t]
            else:
                core.gram_row(X, T, X[t], spec.gamma, row)
                krow = row
            fx = float(krow @ alpha)
            g = loss.derivative(fx, y[t])
            if not g:
                continue
            c = -eta * g
            alpha[t] += c
            sq_norm = max(sq_norm + 2.0 * c * fx + c * c, 0.0)
            if sq_norm > r2:
                alpha *= radius / math.sqrt(sq_norm)
                sq_norm = r2
        if gram is not None:
            f = gram @ alpha
        else:
            f = np.empty(T)
            for t in range(T):
                core.gram_row(X, T, X[t], spec.gamma, row)
                f[t] = row @ alpha
        per_epoch.append(float(loss_values(loss, f, y).sum()))
    return OracleResult(min(per_epoch), epochs, per_epoch)


def diagnostic_regret(summary: RunSummary, oracle_losses) -> float:
    """Learner's cumulative loss minus the best (approximate) comparator loss."""
    return summary.cumulative_loss - min(oracle_losses)
