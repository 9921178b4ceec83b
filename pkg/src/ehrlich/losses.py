"""Reward and preference-learning losses on explicit discrete domains.

Everything here operates on small enumerable outcome spaces where
policies are probability tables, so the losses, their gradients, and
the KL-based objectives can be computed exactly and checked against
finite differences. Infeasible objective values (-inf) are remapped to
0 at this layer before rewards are formed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidParamsError, ParseError

LOSS_BATCH_VERSION = 1


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidParamsError(message)


# ---------------------------------------------------------------------------
# Policies


@dataclass(frozen=True)
class DiscretePolicy:
    """Probability table over a finite outcome space.

    1-D: one distribution. 2-D: rows are distributions conditioned on a
    prompt. Rows must sum to 1 within 1e-12.
    """

    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=np.float64)
        object.__setattr__(self, "probabilities", probs)
        _require(probs.ndim in (1, 2), f"probabilities must be 1-D or 2-D, got {probs.ndim}-D")
        _require(probs.size > 0, "probabilities must be nonempty")
        _require(bool((probs >= 0).all()), "probabilities must be nonnegative")
        sums = probs.sum(axis=-1)
        _require(bool(np.abs(sums - 1.0).max() <= 1e-12),
                 f"each distribution must sum to 1 within 1e-12, worst error {np.abs(sums - 1.0).max():.3e}")

    @property
    def num_outcomes(self) -> int:
        return self.probabilities.shape[-1]

    @property
    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probabilities)

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "DiscretePolicy":
        logits = np.asarray(logits, dtype=np.float64)
        shifted = logits - logits.max(axis=-1, keepdims=True)
        weights = np.exp(shifted)
        return cls(weights / weights.sum(axis=-1, keepdims=True))

    @classmethod
    def uniform(cls, num_outcomes: int) -> "DiscretePolicy":
        _require(num_outcomes >= 1, "num_outcomes must be >= 1")
        return cls(np.full(num_outcomes, 1.0 / num_outcomes))


def kl_divergence(p, q) -> float:
    """KL(p || q) with 0·log 0 := 0; +inf when p has mass where q has none."""
    p = _probs_of(p)
    q = _probs_of(q)
    _require(p.shape == q.shape, f"shape mismatch {p.shape} vs {q.shape}")
    support = p > 0
    if bool((q[support] == 0).any()):
        return math.inf
    return float((p[support] * np.log(p[support] / q[support])).sum())


def _probs_of(policy) -> np.ndarray:
    if isinstance(policy, DiscretePolicy):
        return policy.probabilities
    return np.asarray(policy, dtype=np.float64)


# ---------------------------------------------------------------------------
# Rewards


def margin_reward(f_x, f_y):
    """max(f_y - f_x, 0) after remapping -inf (infeasible) to 0."""
    fx = np.asarray(f_x, dtype=np.float64)
    fy = np.asarray(f_y, dtype=np.float64)
    fx = np.where(np.isneginf(fx), 0.0, fx)
    fy = np.where(np.isneginf(fy), 0.0, fy)
    out = np.where(fy > fx, fy - fx, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def boltzmann_target(rewards, beta: float) -> DiscretePolicy:
    """Probabilities proportional to exp(beta * reward)."""
    rewards = np.asarray(rewards, dtype=np.float64)
    _require(bool(np.isfinite(rewards).all()), "rewards must be finite")
    return DiscretePolicy.from_logits(beta * rewards)


# ---------------------------------------------------------------------------
# Sampled batches


@dataclass(frozen=True)
class LossConfig:
    beta: float = 1.0
    lam: float = 0.0

    def __post_init__(self) -> None:
        _require(self.beta > 0, f"beta must be positive, got {self.beta}")
        _require(self.lam >= 0, f"lam must be nonnegative, got {self.lam}")


@dataclass(frozen=True)
class LossBatch:
    """Sampled records (x, y, log pi_theta, log pi_ref, reward, length)."""

    x_ids: np.ndarray
    y_ids: np.ndarray
    log_pi_theta: np.ndarray
    log_pi_ref: np.ndarray
    rewards: np.ndarray
    lengths: np.ndarray

    def __post_init__(self) -> None:
        x_ids = np.asarray(self.x_ids, dtype=np.int64)
        y_ids = np.asarray(self.y_ids, dtype=np.int64)
        log_pi_theta = np.asarray(self.log_pi_theta, dtype=np.float64)
        log_pi_ref = np.asarray(self.log_pi_ref, dtype=np.float64)
        rewards = np.asarray(self.rewards, dtype=np.float64)
        lengths = np.asarray(self.lengths, dtype=np.int64)
        for name, arr in (("x_ids", x_ids), ("y_ids", y_ids),
                          ("log_pi_theta", log_pi_theta), ("log_pi_ref", log_pi_ref),
                          ("rewards", rewards), ("lengths", lengths)):
            object.__setattr__(self, name, arr)
            _require(arr.shape == x_ids.shape, f"{name} shape {arr.shape} != {x_ids.shape}")
        _require(x_ids.ndim == 1 and x_ids.size >= 1, "batch must be a nonempty 1-D record set")
        _require(bool(np.isfinite(log_pi_theta).all()), "log_pi_theta must be finite")
        _require(bool(np.isfinite(log_pi_ref).all()), "log_pi_ref must be finite")
        _require(bool(np.isfinite(rewards).all()), "rewards must be finite")
        _require(bool((lengths >= 1).all()), "lengths must be >= 1")

    def __len__(self) -> int:
        return self.x_ids.shape[0]

    @property
    def normalized_weights(self) -> np.ndarray:
        """Self-normalized importance weights exp(log pi - log ref) / sum."""
        raw = np.exp(self.log_pi_theta - self.log_pi_ref)
        return raw / raw.sum()


_LOSS_BATCH_FIELDS = ("x_id", "y_id", "log_pi_theta", "log_pi_ref", "reward", "length")


def write_loss_batch(batch: LossBatch, path) -> None:
    with open(path, "w", newline="") as handle:
        handle.write(f"# loss-batch v{LOSS_BATCH_VERSION}\n")
        writer = csv.writer(handle)
        writer.writerow(_LOSS_BATCH_FIELDS)
        for i in range(len(batch)):
            writer.writerow([
                int(batch.x_ids[i]), int(batch.y_ids[i]),
                repr(float(batch.log_pi_theta[i])), repr(float(batch.log_pi_ref[i])),
                repr(float(batch.rewards[i])), int(batch.lengths[i]),
            ])


def read_loss_batch(path) -> LossBatch:
    with open(path, newline="") as handle:
        first = handle.readline()
        if not first.startswith("# loss-batch v"):
            raise ParseError(f"{path}: missing loss-batch version header")
        version = first.removeprefix("# loss-batch v").strip()
        if version != str(LOSS_BATCH_VERSION):
            raise ParseError(f"{path}: unsupported loss-batch version {version!r}")
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != _LOSS_BATCH_FIELDS:
            raise ParseError(f"{path}: bad column header {header!r}")
        rows = [row for row in reader if row]
    if not rows:
        raise ParseError(f"{path}: empty batch")
    try:
        columns = list(zip(*rows, strict=True))
        return LossBatch(
            x_ids=np.array([int(v) for v in columns[0]]),
            y_ids=np.array([int(v) for v in columns[1]]),
            log_pi_theta=np.array([float(v) for v in columns[2]]),
            log_pi_ref=np.array([float(v) for v in columns[3]]),
            rewards=np.array([float(v) for v in columns[4]]),
            lengths=np.array([int(v) for v in columns[5]]),
        )
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed loss-batch row ({exc})") from exc


def batch_from_logits(logits, ref_log_probs, outcomes, rewards, lengths=None,
                      x_ids=None) -> LossBatch:
    """Materialize a LossBatch for outcomes sampled from a K-way policy."""
    outcomes = np.asarray(outcomes, dtype=np.int64)
    log_pi = _log_softmax(np.asarray(logits, dtype=np.float64))
    ref_log_probs = np.asarray(ref_log_probs, dtype=np.float64)
    if lengths is None:
        lengths = np.ones_like(outcomes)
    if x_ids is None:
        x_ids = np.zeros_like(outcomes)
    return LossBatch(
        x_ids=x_ids,
        y_ids=outcomes,
        log_pi_theta=log_pi[outcomes],
        log_pi_ref=ref_log_probs[outcomes],
        rewards=rewards,
        lengths=lengths,
    )


# ---------------------------------------------------------------------------
# Losses


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - math.log(np.exp(shifted).sum())


def marge_loss(batch: LossBatch, lam: float = 0.0, beta: float = 1.0) -> float:
    """Self-normalized importance-weighted margin objective.

    sum_i w~_i (log pi_i / len_i - beta * r_i) - lam * mean_i(log pi_i / len_i)
    """
    weights = batch.normalized_weights
    per_token = batch.log_pi_theta / batch.lengths
    weighted = float((weights * (per_token - beta * batch.rewards)).sum())
    return weighted - lam * float(per_token.mean())


def reinforce_loss(batch: LossBatch, lam: float = 0.0) -> float:
    """Self-normalized REINFORCE with the same length-normalized regularizer.

    sum_i w~_i (-r_i * log pi_i) - lam * mean_i(log pi_i / len_i)
    """
    weights = batch.normalized_weights
    weighted = float((weights * (-batch.rewards * batch.log_pi_theta)).sum())
    return weighted - lam * float((batch.log_pi_theta / batch.lengths).mean())


def dpo_loss(ratio_w, ratio_l, beta: float = 1.0) -> float:
    """mean(-log sigmoid(beta * (ratio_w - ratio_l))) over preference pairs."""
    ratio_w = np.asarray(ratio_w, dtype=np.float64)
    ratio_l = np.asarray(ratio_l, dtype=np.float64)
    _require(ratio_w.shape == ratio_l.shape, "ratio arrays must have equal shape")
    _require(ratio_w.size >= 1, "need at least one preference pair")
    return float(np.mean(-_log_sigmoid(beta * (ratio_w - ratio_l))))


def _log_sigmoid(z: np.ndarray) -> np.ndarray:
    # log sigmoid(z) = -log(1 + e^-z), stable on both tails
    out = np.where(z >= 0, -np.log1p(np.exp(-np.abs(z))), z - np.log1p(np.exp(-np.abs(z))))
    return out


def dpo_loss_from_logits(logits, ref_log_probs, winners, losers, beta: float = 1.0) -> float:
    log_pi = _log_softmax(np.asarray(logits, dtype=np.float64))
    ref_log_probs = np.asarray(ref_log_probs, dtype=np.float64)
    winners = np.asarray(winners, dtype=np.int64)
    losers = np.asarray(losers, dtype=np.int64)
    ratio_w = log_pi[winners] - ref_log_probs[winners]
    ratio_l = log_pi[losers] - ref_log_probs[losers]
    return dpo_loss(ratio_w, ratio_l, beta)


# ---------------------------------------------------------------------------
# Analytic gradients with respect to policy logits


def _score_jacobian(logits: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    """d log pi(y_i) / d s_k = 1[y_i = k] - softmax(s)_k, shape (M, K)."""
    probs = DiscretePolicy.from_logits(logits).probabilities
    onehot = np.zeros((outcomes.shape[0], logits.shape[0]))
    onehot[np.arange(outcomes.shape[0]), outcomes] = 1.0
    return onehot - probs[None, :]


def _weight_jacobian(weights: np.ndarray, score_jac: np.ndarray) -> np.ndarray:
    """d w~_i / d s_k = w~_i (d_ik - sum_j w~_j d_jk), shape (M, K)."""
    mean_jac = weights @ score_jac
    return weights[:, None] * (score_jac - mean_jac[None, :])


def marge_loss_grad(logits, ref_log_probs, outcomes, rewards, lengths=None,
                    lam: float = 0.0, beta: float = 1.0) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    outcomes = np.asarray(outcomes, dtype=np.int64)
    batch = batch_from_logits(logits, ref_log_probs, outcomes, rewards, lengths)
    weights = batch.normalized_weights
    score_jac = _score_jacobian(logits, outcomes)
    weight_jac = _weight_jacobian(weights, score_jac)
    per_token = batch.log_pi_theta / batch.lengths
    terms = per_token - beta * batch.rewards
    per_token_jac = score_jac / batch.lengths[:, None]
    grad = (weight_jac * terms[:, None]).sum(axis=0)
    grad += (weights[:, None] * per_token_jac).sum(axis=0)
    grad -= lam * per_token_jac.mean(axis=0)
    return grad


def reinforce_loss_grad(logits, ref_log_probs, outcomes, rewards, lengths=None,
                        lam: float = 0.0) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    outcomes = np.asarray(outcomes, dtype=np.int64)
    batch = batch_from_logits(logits, ref_log_probs, outcomes, rewards, lengths)
    weights = batch.normalized_weights
    score_jac = _score_jacobian(logits, outcomes)
    weight_jac = _weight_jacobian(weights, score_jac)
    terms = -batch.rewards * batch.log_pi_theta
    grad = (weight_jac * terms[:, None]).sum(axis=0)
    grad += (weights[:, None] * (-batch.rewards[:, None] * score_jac)).sum(axis=0)
    grad -= lam * (score_jac / batch.lengths[:, None]).mean(axis=0)
    return grad


def dpo_loss_grad(logits, ref_log_probs, winners, losers, beta: float = 1.0) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    winners = np.asarray(winners, dtype=np.int64)
    losers = np.asarray(losers, dtype=np.int64)
    log_pi = _log_softmax(logits)
    ref_log_probs = np.asarray(ref_log_probs, dtype=np.float64)
    delta = (log_pi[winners] - ref_log_probs[winners]) - (log_pi[losers] - ref_log_probs[losers])
    # d/ds_k of -log sigmoid(beta * delta) = (sigmoid(beta delta) - 1) * beta
    #   * (d delta / d s_k), and d delta / d s_k = 1[y_w=k] - 1[y_l=k]
    # because the softmax normalization cancels between winner and loser.
    factor = (_sigmoid(beta * delta) - 1.0) * beta
    grad = np.zeros_like(logits)
    np.add.at(grad, winners, factor)
    np.add.at(grad, losers, -factor)
    return grad / winners.shape[0]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


# ---------------------------------------------------------------------------
# Forward-reverse KL objective and its simplex solver


def frekl_objective(pi_theta, pi_star, pi_ref, lam: float) -> float:
    """KL(pi_theta || pi_star) + lam * KL(pi_ref || pi_theta), exactly."""
    _require(lam >= 0, f"lam must be nonnegative, got {lam}")
    forward = kl_divergence(pi_theta, pi_star)
    if lam == 0.0:
        return forward
    return forward + lam * kl_divergence(pi_ref, pi_theta)


def frekl_fixed_point_residual(pi_theta, pi_star, pi_ref, lam: float) -> float:
    """Spread of log pi - log pi* - lam*ref/pi; zero at the exact optimum."""
    pi = _probs_of(pi_theta)
    star = _probs_of(pi_star)
    ref = _probs_of(pi_ref)
    stationarity = np.log(pi) - np.log(star) - lam * ref / pi
    return float(stationarity.max() - stationarity.min())


def solve_frekl(pi_star, pi_ref, lam: float, tolerance: float = 1e-12,
                max_iters: int = 20000) -> DiscretePolicy:
    """Minimize the forward-reverse KL objective over the simplex.

    Multiplicative (exponentiated-gradient) updates with a backtracking
    step size keep iterates interior, so the reverse-KL term never blows
    up. Stops when an accepted step decreases the objective by less than
    the tolerance.
    """
    star = _probs_of(pi_star)
    ref = _probs_of(pi_ref)
    _require(star.ndim == 1 and star.shape == ref.shape,
             "pi_star and pi_ref must be 1-D with equal shape")
    _require(bool((star > 0).all()), "pi_star must be strictly positive")
    _require(bool((ref > 0).all()), "pi_ref must be strictly positive")
    _require(lam >= 0, f"lam must be nonnegative, got {lam}")
    _require(tolerance > 0, f"tolerance must be positive, got {tolerance}")

    # The optimum interpolates pi_star (lam -> 0) and pi_ref (lam -> inf);
    # a log-space blend is an excellent warm start at both extremes.
    logits = (np.log(star) + lam * np.log(ref)) / (1.0 + lam)
    policy = DiscretePolicy.from_logits(logits)
    objective = frekl_objective(policy, star, ref, lam)
    step = 0.1

    for _ in range(max_iters):
        pi = policy.probabilities
        gradient = np.log(pi) - np.log(star) + 1.0 - lam * ref / pi
        gradient -= gradient.mean()
        trial_logits = logits - step * gradient
        trial_policy = DiscretePolicy.from_logits(trial_logits)
        trial_objective = frekl_objective(trial_policy, star, ref, lam)
        if trial_objective < objective:
            decrease = objective - trial_objective
            logits, policy, objective = trial_logits, trial_policy, trial_objective
            step *= 1.2
            if decrease < tolerance:
                return policy
        else:
            step /= 2.0
            if step < 1e-18:
                # Step size exhausted by float precision: already optimal.
                return policy

    residual = frekl_fixed_point_residual(policy, star, ref, lam)
    raise ConvergenceError(
        f"solve_frekl: no convergence in {max_iters} iterations "
        f"(fixed-point residual {residual:.3e}, objective {objective:.6e})"
    )


# ---------------------------------------------------------------------------
# Translation invariance of Boltzmann policies


def translation_invariance_check(f_values, mode: str = "difference",
                                 beta: float = 1.0) -> float:
    """Max deviation of conditional Boltzmann policies across incumbents.

    Builds pi(y|x) = softmax_y(beta * r(x, y)) for every incumbent x in
    the domain and returns max over x, x', y of |pi(y|x) - pi(y|x')|.
    With the unclipped difference reward r = f(y) - f(x) the incumbent
    term is a constant shift, so the deviation is zero up to rounding;
    the clipped margin reward breaks that invariance.
    """
    _require(mode in ("difference", "margin"), f"mode must be 'difference' or 'margin', got {mode!r}")
    f_values = np.asarray(f_values, dtype=np.float64)
    _require(f_values.ndim == 1 and f_values.size >= 2, "need a 1-D domain of >= 2 scores")
    _require(bool(np.isfinite(f_values).all()), "f values must be finite")
    rewards = f_values[None, :] - f_values[:, None]  # [x, y]
    if mode == "margin":
        rewards = np.maximum(rewards, 0.0)
    policies = DiscretePolicy.from_logits(beta * rewards).probabilities
    return float((policies.max(axis=0) - policies.min(axis=0)).max())
