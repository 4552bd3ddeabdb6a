"""Outer bandit level: which kernel arm to evaluate each round.

Three selectors share one ``SelectorState``:

* OKS: exponential weights on importance-weighted losses with fixed
  exploration ``delta``, learning rate ``eta`` and stepsize ``lambda``.
* OKS++: the same update with data-dependent ``delta_t``, ``eta_t`` and
  per-arm ``lambda_{t,i}`` computed from the observed losses.
* IOKS: online mirror descent with the (modified) 8-Tsallis regularizer,
  clipped loss estimates and per-arm learning rates that grow whenever an
  arm's sampling probability drops below half its last threshold.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalError, StateCorruptionError
from .losses import LossFunction

log = logging.getLogger(__name__)

TSALLIS_ALPHA = 8
_EXPONENT = -(TSALLIS_ALPHA - 1) / TSALLIS_ALPHA     # q^{-7/8}
_INV_EXPONENT = -TSALLIS_ALPHA / (TSALLIS_ALPHA - 1)  # base^{-8/7}
_LOG_FLOOR = math.log(1e-300)


@dataclass
class LossEstimate:
    arm: int
    raw_loss: float
    estimate: np.ndarray


@dataclass
class SelectorState:
    arms: int
    horizon: int
    q: np.ndarray
    p: np.ndarray
    cum_est_losses: np.ndarray
    log_weights: np.ndarray
    eta_global: float = 1.0
    eta_per_arm: np.ndarray = None
    rho: np.ndarray = None
    upsilon: float = 1.0
    delta: float = 0.0
    tilde_C: float = 0.0
    delta_sum_qc2: float = 0.0
    Delta: np.ndarray = None
    grad_sq_sum: np.ndarray = None
    lam: float = 0.0
    raises: np.ndarray = None

    @classmethod
    def uniform(cls, arms: int, horizon: int) -> "SelectorState":
        if arms < 1:
            raise InvalidInputError(f"need at least one arm, got {arms}")
        if horizon < 1:
            raise InvalidInputError(f"horizon must be >= 1, got {horizon}")
        u = np.full(arms, 1.0 / arms)
        return cls(
            arms=arms, horizon=horizon, q=u.copy(), p=u.copy(),
            cum_est_losses=np.zeros(arms), log_weights=np.zeros(arms),
            eta_per_arm=np.zeros(arms), rho=np.full(arms, 2.0 * arms),
            Delta=np.zeros(arms), grad_sq_sum=np.zeros(arms),
            raises=np.zeros(arms, dtype=np.int64),
        )


# -- shared pieces ---------------------------------------------------------

def sample_arm(state: SelectorState, rng_draw: float) -> int:
    """Inverse-CDF draw: the smallest i with ``p_1 + ... + p_i > rng_draw``."""
    p = state.p
    if p.shape != (state.arms,) or not np.all(np.isfinite(p)) or np.any(p < 0) \
            or abs(p.sum() - 1.0) > 1e-8:
        raise StateCorruptionError(f"sampling distribution is invalid: {p!r}")
    if not 0.0 <= rng_draw < 1.0:
        raise InvalidInputError(f"draw must lie in [0, 1), got {rng_draw}")
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, rng_draw, side="right"))
    if i >= state.arms:
        # rounding left cdf[-1] below the draw
        i = int(np.flatnonzero(p > 0)[-1])
    return i


def mix_exploration(q, delta: float) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if not 0.0 <= delta <= 1.0:
        raise InvalidInputError(f"delta must lie in [0, 1], got {delta}")
    return (1.0 - delta) * q + delta / q.shape[0]


def _softmax_from_logs(logw: np.ndarray) -> np.ndarray:
    z = logw - logw.max()
    np.maximum(z, _LOG_FLOOR, out=z)
    w = np.exp(z)
    return w / w.sum()


def importance_estimate(arm: int, loss: float, p, arms: int) -> LossEstimate:
    est = np.zeros(arms)
    est[arm] = loss / p[arm]
    return LossEstimate(arm, loss, est)


# -- OKS -------------------------------------------------------------------

def oks_parameters(K: int, T: int, G: float, ell_max: float):
    """Return ``(delta, lambda, eta)`` minimising the OKS expected-regret bound."""
    if T < 1 or K < 1:
        raise InvalidInputError("K and T must be >= 1")
    delta = (G / ell_max) ** (2.0 / 3.0) * K ** (1.0 / 3.0) * T ** (-1.0 / 3.0)
    if delta >= 1.0:
        log.warning("OKS exploration rate %.4g >= 1 for K=%d, T=%d; clipping to 0.99", delta, K, T)
        delta = 0.99
    lam = math.sqrt(delta / (K * T * G * G))
    eta = math.sqrt(2.0 * (1.0 - delta) * math.log(K)) / math.sqrt(K * T * ell_max * ell_max)
    return delta, lam, eta


def oks_update(state: SelectorState, estimate: LossEstimate) -> SelectorState:
    i = estimate.arm
    state.cum_est_losses += estimate.estimate
    state.log_weights[i] -= state.eta_global * estimate.estimate[i]
    state.q = _softmax_from_logs(state.log_weights)
    state.p = mix_exploration(state.q, state.delta)
    return state


# -- OKS++ -----------------------------------------------------------------

def _okspp_g(loss: LossFunction) -> float:
    # second-order smooth losses use G = 1 in delta_t and lambda_{t,i}
    return 1.0 if loss.nu == 2 else loss.g_scalar


def okspp_schedules(state: SelectorState, loss: LossFunction, U: float, K: int):
    """Return ``(delta_t, eta_t, lambda_t)`` from the statistics in ``state``."""
    if not loss.is_smooth:
        raise InvalidInputError(f"OKS++ needs a smooth loss, got {loss.kind.value}")
    gc0 = _okspp_g(loss) * loss.c0
    a = gc0 ** (1.0 / 3.0) * (U * K) ** (2.0 / 3.0)
    delta_t = a / (2.0 * max(a, 2.0 * state.tilde_C ** (1.0 / 3.0)))
    eta_t = math.sqrt(2.0 * math.log(K)) / math.sqrt(1.0 + state.delta_sum_qc2) if K > 1 else 0.0
    num = U ** (4.0 / 3.0) * max(gc0 * U * U * K * K, 8.0 * state.tilde_C) ** (-1.0 / 6.0)
    den = math.sqrt(4.0 / 3.0) * K ** (1.0 / 6.0) * gc0 ** (1.0 / 3.0)
    lam = num / (den * np.sqrt(1.0 + state.Delta))
    return delta_t, eta_t, lam


def okspp_update(state: SelectorState, estimate: LossEstimate, q_snapshot,
                 loss: LossFunction, U: float) -> SelectorState:
    """Fold one round into the OKS++ statistics and recompute q and p.

    ``q_snapshot`` is the exploitation distribution in force when the arm
    was drawn. The current ``eta_t`` multiplies the whole cumulative
    estimate: ``q_{t+1,i} ~ exp(-eta_t * sum_tau c~_{tau,i})``.
    """
    i = estimate.arm
    c = estimate.estimate
    state.cum_est_losses += c
    state.tilde_C += float(c[i])
    state.Delta[i] += float(c[i])
    state.delta_sum_qc2 += float(np.dot(q_snapshot, c * c))
    delta_t, eta_t, _ = okspp_schedules(state, loss, U, state.arms)
    state.delta = delta_t
    state.eta_global = eta_t
    state.q = _softmax_from_logs(-eta_t * state.cum_est_losses)
    state.p = mix_exploration(state.q, delta_t)
    return state


# -- IOKS ------------------------------------------------------------------

def ioks_parameters(K: int, T: int, U: float, G1: float, ell_max: float, variant: str = "experiment"):
    """Return ``(delta, eta_init, upsilon)`` for IOKS.

    ``variant="theory"`` uses ``3 l_max K^{3/8} / (2 U G1 sqrt(T ln T))``;
    ``variant="experiment"`` uses the larger ``8 l_max K^{3/8} / (U G1 sqrt(T ln T))``.
    """
    if T < 2:
        raise InvalidInputError(f"IOKS needs T >= 2, got {T}")
    delta = T ** -0.75
    upsilon = math.exp(2.0 / (3.0 * math.log(T)))
    base = ell_max * K ** 0.375 / (U * G1 * math.sqrt(T * math.log(T)))
    if variant == "theory":
        eta = 1.5 * base
    elif variant == "experiment":
        eta = 8.0 * base
    else:
        raise InvalidInputError(f"unknown IOKS variant {variant!r}")
    return delta, eta, upsilon


def ioks_estimate(c_norm: float, p, arm: int, eta_per_arm) -> LossEstimate:
    if not 0.0 <= c_norm <= 1.0:
        raise InvalidInputError(f"normalised loss must lie in [0, 1], got {c_norm}")
    p = np.asarray(p, dtype=np.float64)
    eta_max = float(np.max(eta_per_arm))
    est = np.zeros(p.shape[0])
    if p[arm] >= eta_max:
        est[arm] = c_norm / p[arm]
    else:
        est[arm] = c_norm / (p[arm] + eta_max)
    return LossEstimate(arm, c_norm, est)


def _tsallis_q(base_q, eta, c, mu):
    base = base_q + eta * (c - mu)
    return base ** _INV_EXPONENT


def ioks_normalizer(q, c, eta, mu) -> float:
    """``sum_i (q_i^{-7/8} + eta_i (c_i - mu))^{-8/7}``; increasing in ``mu``."""
    q = np.asarray(q, dtype=np.float64)
    return float(np.sum(_tsallis_q(q ** _EXPONENT, np.asarray(eta), np.asarray(c), mu)))


def ioks_solve_mu(q, c, eta, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Root ``mu*`` of ``ioks_normalizer(q, c, eta, mu) = 1`` (safeguarded Newton).

    The normaliser is strictly increasing on ``mu < min_i(c_i + q_i^{-7/8}/eta_i)``
    (where every base stays positive). For non-negative ``c`` it is <= 1 at
    ``mu = 0``, which gives the lower bracket; the upper bracket walks
    towards the pole until the sum exceeds 1.
    """
    q = np.asarray(q, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    if np.any(q <= 0) or np.any(eta <= 0):
        raise InvalidInputError("q and eta must be strictly positive")
    bq = q ** _EXPONENT

    def excess(mu):
        return float(np.sum(_tsallis_q(bq, eta, c, mu))) - 1.0

    pole = float(np.min(c + bq / eta))
    lo = min(0.0, float(np.min(c)))
    f_lo = excess(lo)
    if f_lo > 0:
        # only reachable with negative estimates; walk down until below 1
        step = 1.0
        while f_lo > 0:
            lo -= step
            step *= 2.0
            f_lo = excess(lo)
            if not math.isfinite(lo):
                raise NumericalError("IOKS normaliser: no lower bracket", {"q": q, "c": c, "eta": eta})
    if abs(f_lo) <= tol:
        return lo
    gap = (pole - lo) / 2.0
    hi = pole - gap
    f_hi = excess(hi)
    for _ in range(1100):
        if f_hi > 0:
            break
        gap /= 2.0
        hi = pole - gap
        f_hi = excess(hi)
    else:
        raise NumericalError("IOKS normaliser: upper bracket not found",
                             {"q": q, "c": c, "eta": eta, "pole": pole})
    # the normaliser is convex and increasing, so Newton from the right of
    # the root descends monotonically; bisection guards against rounding
    mu = hi
    for _ in range(max_iter):
        base = bq + eta * (c - mu)
        terms = base ** _INV_EXPONENT
        f = float(np.sum(terms)) - 1.0
        if abs(f) <= tol:
            return mu
        if f > 0:
            hi = mu
        else:
            lo = mu
        slope = float(np.sum(eta * terms / base)) * (-_INV_EXPONENT)
        nxt = mu - f / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == mu:
            return mu
        mu = nxt
    return mu


def ioks_solve(q, estimate: LossEstimate, eta_per_arm) -> np.ndarray:
    """OMD step with the 8-Tsallis regularizer, normalised over the simplex."""
    c = estimate.estimate
    q = np.asarray(q, dtype=np.float64)
    if not np.any(c):
        return q.copy()
    mu = ioks_solve_mu(q, c, eta_per_arm)
    q_next = _tsallis_q(q ** _EXPONENT, np.asarray(eta_per_arm, dtype=np.float64), c, mu)
    if not np.all(np.isfinite(q_next)) or np.any(q_next <= 0):
        raise NumericalError("IOKS update left the simplex", {"q": q, "c": c, "mu": mu, "q_next": q_next})
    return q_next / q_next.sum()


def ioks_lr_schedule(state: SelectorState, p_next) -> SelectorState:
    inv = 1.0 / np.asarray(p_next, dtype=np.float64)
    hit = inv > state.rho
    state.rho = np.where(hit, 2.0 * inv, state.rho)
    state.eta_per_arm = np.where(hit, state.upsilon * state.eta_per_arm, state.eta_per_arm)
    state.raises += hit
    return state


# -- selectors used by the engine -------------------------------------------

@dataclass
class Observation:
    """What the engine tells a selector after round t."""
    arm: int
    loss: float
    p_arm: float
    grad_sq: float = 0.0


class Selector:
    """Common driver: ``sample``, then ``update``, then ``stepsize`` for the drawn arm."""

    name = "base"

    def __init__(self, state: SelectorState):
        self.state = state

    @property
    def p(self) -> np.ndarray:
        return self.state.p

    @property
    def arms(self) -> int:
        return self.state.arms

    def sample(self, draw: float) -> int:
        return sample_arm(self.state, draw)

    def update(self, obs: Observation) -> None:
        raise NotImplementedError

    def stepsize(self, arm: int) -> float:
        raise NotImplementedError

    def parameters(self) -> dict:
        return {}


class OKSSelector(Selector):
    name = "oks"

    def __init__(self, arms: int, horizon: int, delta: float, eta: float, lam: float):
        state = SelectorState.uniform(arms, horizon)
        state.delta, state.eta_global, state.lam = float(delta), float(eta), float(lam)
        super().__init__(state)

    @classmethod
    def from_theory(cls, arms, horizon, G=1.0, ell_max=1.0, lam_multiplier=1.0):
        delta, lam, eta = oks_parameters(arms, horizon, G, ell_max)
        return cls(arms, horizon, delta, eta, lam * lam_multiplier)

    def update(self, obs: Observation) -> None:
        oks_update(self.state, importance_estimate(obs.arm, obs.loss, self.state.p, self.arms))

    def stepsize(self, arm: int) -> float:
        return self.state.lam

    def parameters(self) -> dict:
        s = self.state
        return {"delta": s.delta, "eta": s.eta_global, "lambda": s.lam}


class OKSPlusPlusSelector(Selector):
    name = "okspp"

    def __init__(self, arms: int, horizon: int, loss: LossFunction, radius: float):
        if not loss.is_smooth:
            raise InvalidInputError(f"OKS++ needs a smooth loss, got {loss.kind.value}")
        state = SelectorState.uniform(arms, horizon)
        self.loss = loss
        self.radius = float(radius)
        super().__init__(state)
        state.delta, state.eta_global, _ = okspp_schedules(state, loss, radius, arms)

    def update(self, obs: Observation) -> None:
        est = importance_estimate(obs.arm, obs.loss, self.state.p, self.arms)
        okspp_update(self.state, est, self.state.q.copy(), self.loss, self.radius)

    def stepsize(self, arm: int) -> float:
        _, _, lam = okspp_schedules(self.state, self.loss, self.radius, self.arms)
        return float(lam[arm])

    def parameters(self) -> dict:
        s = self.state
        delta0, eta0, lam0 = okspp_schedules(SelectorState.uniform(self.arms, s.horizon),
                                             self.loss, self.radius, self.arms)
        return {"delta_0": delta0, "eta_0": eta0, "lambda_0": float(lam0[0]),
                "G": _okspp_g(self.loss), "C0": self.loss.c0}


class IOKSSelector(Selector):
    name = "ioks"

    def __init__(self, arms: int, horizon: int, delta: float, eta: float, upsilon: float,
                 radius: float, ell_max: float):
        state = SelectorState.uniform(arms, horizon)
        state.delta, state.upsilon = float(delta), float(upsilon)
        state.eta_per_arm = np.full(arms, float(eta))
        self.radius = float(radius)
        self.ell_max = float(ell_max)
        self.eta_init = float(eta)
        super().__init__(state)

    @classmethod
    def from_theory(cls, arms, horizon, loss: LossFunction, radius: float, variant="experiment"):
        delta, eta, upsilon = ioks_parameters(arms, horizon, radius, loss.g_rkhs, loss.ell_max, variant)
        return cls(arms, horizon, delta, eta, upsilon, radius, loss.ell_max)

    def update(self, obs: Observation) -> None:
        s = self.state
        s.grad_sq_sum[obs.arm] += obs.grad_sq
        # losses above ell_max (possible when ell_max is overridden) are clipped to 1
        c_norm = min(obs.loss / self.ell_max, 1.0)
        est = ioks_estimate(c_norm, s.p, obs.arm, s.eta_per_arm)
        s.cum_est_losses += est.estimate
        q_next = ioks_solve(s.q, est, s.eta_per_arm)
        p_next = mix_exploration(q_next, s.delta)
        ioks_lr_schedule(s, p_next)
        s.q, s.p = q_next, p_next

    def stepsize(self, arm: int) -> float:
        return self.radius / (math.sqrt(2.0) * math.sqrt(1.0 + self.state.grad_sq_sum[arm]))

    def parameters(self) -> dict:
        s = self.state
        return {"delta": s.delta, "eta_init": self.eta_init, "upsilon": s.upsilon,
                "alpha": TSALLIS_ALPHA, "ell_max": self.ell_max}
