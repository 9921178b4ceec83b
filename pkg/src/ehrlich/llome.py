"""Bilevel optimization loop driven by a proposal generator.

Round structure: train the generator on nearest-neighbor improvement
data from the last labeled batch, refine seeds into a candidate pool
without touching the objective, filter the pool by likelihood and
structural feasibility, then spend oracle calls only on the filtered
selection. A genetic-algorithm presolver supplies the first labeled
batch; its evaluations count toward the total budget.

The inner loop never queries the objective: feasibility inside the
filter uses the transition-mask check only, and candidate likelihoods
come from the generator itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import GeneratorCollapseError, InvalidParamsError
from .function import ScoredSequence, regret_of_value
from .ga import GAConfig, run_ga
from .losses import margin_reward


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidParamsError(message)


@dataclass(frozen=True)
class ScoredSet:
    """Token batch with objective values (-inf marks infeasible)."""

    tokens: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        tokens = np.asarray(self.tokens, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "values", values)
        _require(tokens.ndim == 2, f"tokens must be (N, L), got shape {tokens.shape}")
        _require(values.shape == (tokens.shape[0],),
                 f"values shape {values.shape} must be ({tokens.shape[0]},)")

    def __len__(self) -> int:
        return self.tokens.shape[0]


@dataclass(frozen=True)
class RefinementDataset:
    """Improvement pairs (and optional preference triples) for training.

    Every pair (x, y) satisfies fractional Hamming distance <= the
    threshold and f(y) > f(x); triples add a non-improving neighbor
    with f(x) >= f(loser).
    """

    pair_inputs: np.ndarray
    pair_targets: np.ndarray
    triple_inputs: np.ndarray
    triple_winners: np.ndarray
    triple_losers: np.ndarray
    distance_threshold: float = 0.25
    num_neighbors: int = 30

    @property
    def num_pairs(self) -> int:
        return self.pair_inputs.shape[0]

    @property
    def num_triples(self) -> int:
        return self.triple_inputs.shape[0]


@dataclass(frozen=True)
class LoopConfig:
    rounds: int = 10
    evals_per_round: int = 2000
    presolver_rounds: int = 10
    seeds_per_round: int = 200
    refine_iters: int = 10
    samples_per_iter: int = 10
    base_temperatures: tuple = (0.6, 0.8, 1.0, 1.2, 1.4, 1.6)
    likelihood_floor: float | None = None  # None: exp(-2 * length)
    max_infeasible_fraction: float = 0.25
    dataset_mode: str = "pairs"
    distance_threshold: float = 0.25
    num_neighbors: int = 30
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("rounds", "evals_per_round", "presolver_rounds",
                     "seeds_per_round", "refine_iters", "samples_per_iter",
                     "num_neighbors"):
            _require(getattr(self, name) >= 1, f"{name} must be >= 1")
        _require(len(self.base_temperatures) >= 1, "base_temperatures must be nonempty")
        _require(all(t >= 0 for t in self.base_temperatures),
                 "base_temperatures must be nonnegative")
        if self.likelihood_floor is not None:
            _require(0.0 < self.likelihood_floor < 1.0,
                     f"likelihood_floor must be in (0, 1), got {self.likelihood_floor}")
        _require(0.0 <= self.max_infeasible_fraction < 1.0,
                 f"max_infeasible_fraction must be in [0, 1), got {self.max_infeasible_fraction}")
        _require(self.dataset_mode in ("pairs", "triples"),
                 f"dataset_mode must be 'pairs' or 'triples', got {self.dataset_mode!r}")
        _require(0.0 <= self.distance_threshold <= 1.0,
                 f"distance_threshold must be in [0, 1], got {self.distance_threshold}")

    def log_likelihood_floor(self, length: int) -> float:
        if self.likelihood_floor is None:
            return -2.0 * length
        return math.log(self.likelihood_floor)


@dataclass(frozen=True)
class CandidateSet:
    """Deduplicated refinement output, in first-seen order.

    ``seed_indices``/``seed_values`` point back to the refinement seed
    whose chain produced each candidate (the candidate's only labeled
    ancestor), which is what round diagnostics compare against.
    ``num_generated`` counts proposals before deduplication and
    ``mean_edit_fraction`` is the average fractional Hamming distance
    between chain inputs and their proposals (drives temperature
    adjustment next round).
    """

    tokens: np.ndarray
    logliks: np.ndarray
    seed_indices: np.ndarray
    seed_values: np.ndarray
    num_generated: int = 0
    mean_edit_fraction: float = 0.0

    def __len__(self) -> int:
        return self.tokens.shape[0]

    def take(self, indices: np.ndarray) -> "CandidateSet":
        return CandidateSet(
            tokens=self.tokens[indices],
            logliks=self.logliks[indices],
            seed_indices=self.seed_indices[indices],
            seed_values=self.seed_values[indices],
            num_generated=self.num_generated,
            mean_edit_fraction=self.mean_edit_fraction,
        )


@dataclass(frozen=True)
class PresolverData:
    """Everything the evolution presolver scored, in evaluation order."""

    scored: ScoredSet
    incumbent: ScoredSequence
    evals_used: int

    @property
    def min_regret(self) -> float:
        return regret_of_value(self.incumbent.value)


@dataclass(frozen=True)
class RoundStats:
    round_index: int
    oracle_calls: int
    num_generated: int
    num_candidates: int
    num_selected: int
    unique_fraction: float
    feasible_fraction: float
    min_regret: float
    mean_regret: float
    min_regret_so_far: float
    mean_margin_reward: float
    max_margin_reward: float
    mean_edit_fraction: float
    temperatures: tuple


@dataclass(frozen=True)
class LlomeResult:
    best: ScoredSequence
    rounds: tuple
    evals_used: int
    presolver_evals: int
    presolver_min_regret: float

    @property
    def min_regret(self) -> float:
        return regret_of_value(self.best.value)


def hamming_matrix(tokens: np.ndarray, block: int = 256) -> np.ndarray:
    """Pairwise Hamming distances (token counts) in row blocks."""
    n = tokens.shape[0]
    out = np.empty((n, n), dtype=np.int64)
    for start in range(0, n, block):
        stop = min(start + block, n)
        out[start:stop] = (
            tokens[start:stop, None, :] != tokens[None, :, :]
        ).sum(axis=2)
    return out


def _lexicographic_ranks(tokens: np.ndarray) -> np.ndarray:
    # lexsort uses its last key as primary, so feed columns reversed.
    order = np.lexsort(tokens[:, ::-1].T)
    ranks = np.empty(tokens.shape[0], dtype=np.int64)
    ranks[order] = np.arange(tokens.shape[0])
    return ranks


def format_dataset(scored: ScoredSet, mode: str = "pairs",
                   delta_x: float = 0.25, k_n: int = 30) -> RefinementDataset:
    """Nearest-neighbor improvement pairs (PropEn-style matching).

    For each anchor, ranks the k_n nearest other sequences by fractional
    Hamming distance (ties broken by ascending lexicographic order for
    determinism) and emits (anchor, neighbor) for in-threshold neighbors
    with strictly better score. Triples mode crosses each improving
    neighbor with every in-threshold non-improving one; winner and loser
    must both lie within delta_x of the anchor. Since infeasible entries
    carry f = -inf, they never appear as improvements. An empty result
    is legal.
    """
    _require(mode in ("pairs", "triples"), f"mode must be 'pairs' or 'triples', got {mode!r}")
    _require(len(scored) >= 1, "scored set must be nonempty")
    tokens, values = scored.tokens, scored.values
    n, length = tokens.shape
    pair_idx: list[tuple[int, int]] = []
    triple_idx: list[tuple[int, int, int]] = []
    if n >= 2:
        distances = hamming_matrix(tokens)
        ranks = _lexicographic_ranks(tokens)
        # Composite integer key makes the k-NN selection total-ordered:
        # distance first, lexicographic rank second.
        keys = distances * np.int64(n) + ranks[None, :]
        np.fill_diagonal(keys, np.iinfo(np.int64).max)
        kk = min(k_n, n - 1)
        neighbor_ids = np.argpartition(keys, kk - 1, axis=1)[:, :kk]
        # argpartition leaves the kept block unordered; sort by key so
        # neighbor lists are deterministic.
        row_keys = np.take_along_axis(keys, neighbor_ids, axis=1)
        neighbor_ids = np.take_along_axis(neighbor_ids, np.argsort(row_keys, axis=1), axis=1)
        max_dist = delta_x * length
        for i in range(n):
            improving = []
            non_improving = []
            for j in neighbor_ids[i]:
                if distances[i, j] > max_dist:
                    continue
                if values[j] > values[i]:
                    improving.append(j)
                elif values[i] >= values[j]:
                    non_improving.append(j)
            for j in improving:
                pair_idx.append((i, j))
                if mode == "triples":
                    for k in non_improving:
                        triple_idx.append((i, j, k))

    empty = np.empty((0, length), dtype=np.int64)
    pairs = np.array(pair_idx, dtype=np.int64).reshape(-1, 2)
    triples = np.array(triple_idx, dtype=np.int64).reshape(-1, 3)
    return RefinementDataset(
        pair_inputs=tokens[pairs[:, 0]] if len(pair_idx) else empty,
        pair_targets=tokens[pairs[:, 1]] if len(pair_idx) else empty,
        triple_inputs=tokens[triples[:, 0]] if len(triple_idx) else empty,
        triple_winners=tokens[triples[:, 1]] if len(triple_idx) else empty,
        triple_losers=tokens[triples[:, 2]] if len(triple_idx) else empty,
        distance_threshold=delta_x,
        num_neighbors=k_n,
    )


def adjust_temperatures(base, prev_mean_hamming: float) -> tuple:
    """Raise sampling temperatures when the previous round barely edited.

    Mean fractional edit distance below 0.075 adds 0.6; [0.075, 0.1)
    adds 0.4; [0.1, 0.125) adds 0.2; anything higher keeps the base.
    """
    _require(0.0 <= prev_mean_hamming <= 1.0,
             f"prev_mean_hamming must be in [0, 1], got {prev_mean_hamming}")
    if prev_mean_hamming < 0.075:
        bump = 0.6
    elif prev_mean_hamming < 0.1:
        bump = 0.4
    elif prev_mean_hamming < 0.125:
        bump = 0.2
    else:
        bump = 0.0
    return tuple(t + bump for t in base)


def iterative_refinement(generator, scored: ScoredSet, config: LoopConfig,
                         temperatures=None, seed: rng.SeedLike = 0) -> CandidateSet:
    """Expand the top-scored seeds into a deduplicated candidate pool.

    Each seed runs one greedy chain (temperature 0, single proposal per
    step) plus, per temperature, a chain whose next input is the
    highest-likelihood sample of the previous step. No oracle calls are
    made. Duplicate token vectors keep their maximum log-likelihood.
    """
    _require(len(scored) >= 1, "scored set must be nonempty")
    if temperatures is None:
        temperatures = config.base_temperatures
    order = np.argsort(-scored.values, kind="stable")[: config.seeds_per_round]
    seeds = scored.tokens[order]
    seed_values = scored.values[order]
    num_seeds = seeds.shape[0]

    index_of: dict[bytes, int] = {}
    tokens_out: list[np.ndarray] = []
    logliks_out: list[float] = []
    seed_idx_out: list[int] = []
    seed_val_out: list[float] = []
    generated = 0
    edit_sum = 0.0

    def absorb(proposals: np.ndarray, logliks: np.ndarray, chain_inputs: np.ndarray) -> None:
        # proposals: (S, C, L); logliks: (S, C); chain_inputs: (S, L)
        nonlocal generated, edit_sum
        count = proposals.shape[0] * proposals.shape[1]
        generated += count
        edit_sum += float(
            (proposals != chain_inputs[:, None, :]).mean(axis=2).sum()
        )
        for s in range(proposals.shape[0]):
            for c in range(proposals.shape[1]):
                key = proposals[s, c].tobytes()
                ll = float(logliks[s, c])
                at = index_of.get(key)
                if at is None:
                    index_of[key] = len(tokens_out)
                    tokens_out.append(proposals[s, c])
                    logliks_out.append(ll)
                    seed_idx_out.append(s)
                    seed_val_out.append(float(seed_values[s]))
                elif ll > logliks_out[at]:
                    logliks_out[at] = ll
                    seed_idx_out[at] = s
                    seed_val_out[at] = float(seed_values[s])

    # Greedy chains, all seeds advanced together.
    inputs = seeds.copy()
    for step in range(config.refine_iters):
        proposals, logliks = generator.propose(
            inputs, 0.0, 1, seed=rng.seed_path(seed, 0, step)
        )
        if proposals.shape[1] == 0:
            break  # generator returned nothing; chain cannot advance
        absorb(proposals, logliks, inputs)
        inputs = proposals[:, 0, :]

    # Sampled chains, one per temperature.
    for t_index, temperature in enumerate(temperatures):
        inputs = seeds.copy()
        for step in range(config.refine_iters):
            proposals, logliks = generator.propose(
                inputs, float(temperature), config.samples_per_iter,
                seed=rng.seed_path(seed, 1 + t_index, step),
            )
            if proposals.shape[1] == 0:
                break
            absorb(proposals, logliks, inputs)
            picks = np.argmax(logliks, axis=1)
            inputs = proposals[np.arange(num_seeds), picks, :]

    length = scored.tokens.shape[1]
    if not tokens_out:
        empty = np.empty((0, length), dtype=np.int64)
        return CandidateSet(empty, np.empty(0), np.empty(0, np.int64),
                            np.empty(0), num_generated=generated,
                            mean_edit_fraction=0.0)
    return CandidateSet(
        tokens=np.stack(tokens_out),
        logliks=np.array(logliks_out),
        seed_indices=np.array(seed_idx_out, dtype=np.int64),
        seed_values=np.array(seed_val_out),
        num_generated=generated,
        mean_edit_fraction=edit_sum / generated if generated else 0.0,
    )


def structural_feasibility(tokens: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Transition-mask feasibility for a candidate batch (no oracle)."""
    if tokens.shape[1] < 2:
        return np.ones(tokens.shape[0], dtype=bool)
    return mask[tokens[:, :-1], tokens[:, 1:]].all(axis=1)


def filter_candidates(candidates: CandidateSet, mask: np.ndarray, j: int,
                      log_p_min: float, p_max_infeas: float,
                      seed: rng.SeedLike = 0) -> CandidateSet:
    """Likelihood floor, infeasibility cap, and uniform downsample to j.

    Keeps candidates with log-likelihood strictly above the floor, caps
    the infeasible count at floor(feasible * p/(1-p)) by seeded uniform
    subsampling, then uniformly subsamples to at most j. Output
    preserves the candidate order (ascending original index).
    """
    _require(j >= 1, f"j must be >= 1, got {j}")
    keep = np.flatnonzero(candidates.logliks > log_p_min)
    if keep.size == 0:
        return candidates.take(keep)

    feasible = structural_feasibility(candidates.tokens[keep], mask)
    feasible_ids = keep[feasible]
    infeasible_ids = keep[~feasible]
    cap = int(math.floor(feasible_ids.size * p_max_infeas / (1.0 - p_max_infeas)))
    if infeasible_ids.size > cap:
        gen = rng.substream(seed, 0)
        chosen = gen.choice(infeasible_ids.size, size=cap, replace=False)
        infeasible_ids = infeasible_ids[np.sort(chosen)]
    kept = np.sort(np.concatenate([feasible_ids, infeasible_ids]))

    if kept.size > j:
        gen = rng.substream(seed, 1)
        chosen = gen.choice(kept.size, size=j, replace=False)
        kept = kept[np.sort(chosen)]
    return candidates.take(kept)


class _RecordingOracle:
    """Wraps a function to capture every scored batch (presolver data)."""

    def __init__(self, function):
        self._function = function
        self.params = function.params
        self.tokens: list[np.ndarray] = []
        self.values: list[np.ndarray] = []

    def initial_solution(self):
        return self._function.initial_solution()

    def evaluate_batch(self, tokens, backend=None):
        tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
        values = self._function.evaluate_batch(tokens, backend=backend)
        self.tokens.append(tokens.copy())
        self.values.append(np.asarray(values, dtype=np.float64))
        return values


def run_presolver(function, ga_config: GAConfig, presolver_rounds: int) -> PresolverData:
    """Run the evolution presolver on a budget of presolver_rounds batches.

    The budget is presolver_rounds * num_particles evaluations total,
    including the initial-solution evaluation, so the first batch plus
    (presolver_rounds - 1) full steps are scored. Everything scored is
    returned as labeled data.
    """
    _require(presolver_rounds >= 1, f"presolver_rounds must be >= 1, got {presolver_rounds}")
    recorder = _RecordingOracle(function)
    state = run_ga(recorder, ga_config,
                   budget=presolver_rounds * ga_config.num_particles,
                   stop_on_optimum=False)
    return PresolverData(
        scored=ScoredSet(
            tokens=np.concatenate(recorder.tokens, axis=0),
            values=np.concatenate(recorder.values, axis=0),
        ),
        incumbent=state.incumbent,
        evals_used=state.evals_used,
    )


def run_llome(function, generator, config: LoopConfig,
              presolver: PresolverData) -> LlomeResult:
    """The full bilevel loop over a fixed number of rounds.

    Per round: train on the last labeled batch, refine without oracle
    access, filter to at most evals_per_round candidates, then label
    exactly the selection. Aborts with GeneratorCollapseError when the
    loop cannot continue (no feasible seed, no candidates, or an empty
    selection).
    """
    length = function.params.length
    mask = function.transition.mask
    log_floor = config.log_likelihood_floor(length)

    labeled = presolver.scored
    best = presolver.incumbent
    evals_used = presolver.evals_used
    prev_edit_fraction: float | None = None
    rounds: list[RoundStats] = []

    for round_index in range(1, config.rounds + 1):
        if not (labeled.values > -np.inf).any():
            raise GeneratorCollapseError(
                f"round {round_index}: no feasible seed in the labeled set"
            )
        dataset = format_dataset(
            labeled, config.dataset_mode, config.distance_threshold, config.num_neighbors
        )
        generator = generator.train(dataset)
        if prev_edit_fraction is None:
            temperatures = tuple(config.base_temperatures)
        else:
            temperatures = adjust_temperatures(config.base_temperatures, prev_edit_fraction)

        candidates = iterative_refinement(
            generator, labeled, config, temperatures,
            seed=(config.seed, rng.DOMAIN_LLOME, round_index, 0),
        )
        if len(candidates) == 0:
            raise GeneratorCollapseError(
                f"round {round_index}: refinement produced no candidates"
            )
        selected = filter_candidates(
            candidates, mask, config.evals_per_round, log_floor,
            config.max_infeasible_fraction,
            seed=(config.seed, rng.DOMAIN_LLOME, round_index, 1),
        )
        if len(selected) == 0:
            raise GeneratorCollapseError(
                f"round {round_index}: filtering removed every candidate"
            )

        values = function.evaluate_batch(selected.tokens)
        evals_used += values.shape[0]
        top = int(np.argmax(values))
        if values[top] > best.value:
            best = ScoredSequence(tokens=selected.tokens[top].copy(),
                                  value=float(values[top]))

        feasible = values > -np.inf
        rewards = margin_reward(selected.seed_values, values)
        min_regret = float(1.0 - values[feasible].max()) if feasible.any() else math.inf
        mean_regret = float(1.0 - values[feasible].mean()) if feasible.any() else math.inf
        rounds.append(RoundStats(
            round_index=round_index,
            oracle_calls=int(values.shape[0]),
            num_generated=candidates.num_generated,
            num_candidates=len(candidates),
            num_selected=len(selected),
            unique_fraction=len(candidates) / candidates.num_generated,
            feasible_fraction=float(feasible.mean()),
            min_regret=min_regret,
            mean_regret=mean_regret,
            min_regret_so_far=regret_of_value(best.value),
            mean_margin_reward=float(rewards.mean()),
            max_margin_reward=float(rewards.max()),
            mean_edit_fraction=candidates.mean_edit_fraction,
            temperatures=temperatures,
        ))
        labeled = ScoredSet(tokens=selected.tokens, values=values)
        prev_edit_fraction = candidates.mean_edit_fraction

    return LlomeResult(
        best=best,
        rounds=tuple(rounds),
        evals_used=evals_used,
        presolver_evals=presolver.evals_used,
        presolver_min_regret=presolver.min_regret,
    )
