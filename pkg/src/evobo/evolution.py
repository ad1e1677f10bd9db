"""Evolutionary search over optimizer source code.

A population of generated optimizer classes is improved round by round: the
language model first seeds ``mu`` diverse candidates, then each generation
asks for ``lam`` offspring via single-parent refinement or two-parent
combination prompts, scores them on the benchmark, and keeps the best ``mu``.

Candidates that fail to generate, parse, or run stay in the archive with
fitness 0 and their error text, so later prompts can steer away from the
same mistakes.  The loop stops once ``T`` candidates have been generated in
total, counting failures.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .llm import BaseClient, GenerationFailure, LLMParams, LLMUnavailable
from .prompts import (
    Candidate,
    DuplicateParent,
    ParseFailure,
    PromptRequest,
    PromptTemplates,
    parse_response,
    render_crossover,
    render_initialization,
    render_mutation,
)

__all__ = [
    "ESConfig",
    "EvalOutcome",
    "RunObserver",
    "SearchResult",
    "SearchState",
    "crossover_pairs",
    "get_prompts",
    "rank_key",
    "run_search",
    "select",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ESConfig:
    """Evolution-strategy settings.

    ``T`` is the total number of candidates to generate across the whole
    run, ``mu`` the population size, ``lam`` the offspring count per
    generation, ``p_cr`` the probability that a slot is filled by a
    two-parent combination rather than a single-parent refinement.
    ``elitist`` keeps parents in the selection pool; otherwise only
    offspring compete.
    """

    T: int = 100
    mu: int = 4
    lam: int = 12
    p_cr: float = 0.5
    elitist: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.mu < 1:
            raise ValueError("mu must be at least 1")
        if self.lam < 1:
            raise ValueError("lam must be at least 1")
        if not 0.0 <= self.p_cr <= 1.0:
            raise ValueError("p_cr must lie in [0, 1]")
        if self.T < self.mu:
            raise ValueError("T must cover at least the initial population (T >= mu)")


def rank_key(candidate: Candidate) -> tuple:
    """Sort key: higher fitness first, then fewer lines, then created earlier."""
    fitness = candidate.fitness if candidate.fitness is not None else 0.0
    return (-fitness, candidate.loc, candidate.created)


def crossover_pairs(pool: list[Candidate]) -> list[tuple[Candidate, Candidate]]:
    """All ordered pairs (i before j) from a best-first pool.

    For a pool [a1, a2, a3] the order is (a1,a2), (a1,a3), (a2,a3): the best
    member is paired with every other before the second-best gets a turn.
    """
    return [
        (pool[i], pool[j])
        for i in range(len(pool))
        for j in range(i + 1, len(pool))
    ]


def get_prompts(
    population: list[Candidate],
    size: int,
    p_cr: float,
    rng: np.random.Generator,
) -> list[PromptRequest]:
    """Plan the next ``size`` LLM calls from the current population.

    Each slot draws once: with probability ``p_cr`` it takes the next pair
    from the combination queue (pairs over the best half of the population),
    otherwise the next single parent from the refinement queue (the whole
    population, best first).  A queue is refilled from its source after the
    dequeue that empties it, so long batches cycle through parents fairly.
    When the population is too small to form any pair, combination slots
    fall back to refinement of the best available parent.
    """
    if not population:
        raise ValueError("population must be nonempty")
    if size < 0:
        raise ValueError("size must be nonnegative")
    ranked = sorted(population, key=rank_key)
    pool = ranked[: math.ceil(len(ranked) / 2)]
    pair_queue = deque(crossover_pairs(pool))
    parent_queue = deque(ranked)
    requests: list[PromptRequest] = []
    for _ in range(size):
        want_pair = rng.random() < p_cr
        if want_pair and len(pool) >= 2:
            pair = pair_queue.popleft()
            requests.append(PromptRequest("crossover", pair))
            if not pair_queue:
                pair_queue.extend(crossover_pairs(pool))
        else:
            if want_pair:
                logger.warning(
                    "combination requested but population of %d admits no pairs; "
                    "falling back to refinement",
                    len(population),
                )
            parent = parent_queue.popleft()
            requests.append(PromptRequest("mutation", (parent,)))
            if not parent_queue:
                parent_queue.extend(ranked)
    return requests


def select(
    parents: list[Candidate],
    offspring: list[Candidate],
    mu: int,
    elitist: bool,
) -> list[Candidate]:
    """Pick the next population of size ``mu``.

    Elitist selection ranks parents and offspring together.  Otherwise only
    offspring compete; if there are fewer offspring than ``mu``, the best
    parents fill the gap (with a warning) so the population never shrinks.
    """
    if mu < 1:
        raise ValueError("mu must be at least 1")
    if not offspring:
        raise ValueError("offspring must be nonempty")
    if elitist:
        pool = list(parents) + list(offspring)
    else:
        pool = list(offspring)
        if len(pool) < mu:
            shortfall = mu - len(pool)
            logger.warning(
                "only %d offspring for a population of %d; keeping %d parent(s)",
                len(pool), mu, shortfall,
            )
            pool += sorted(parents, key=rank_key)[:shortfall]
    return sorted(pool, key=rank_key)[:mu]


@dataclass(frozen=True)
class EvalOutcome:
    """What the benchmark said about one candidate."""

    fitness: float
    error: str | None = None
    report: object = None


class RunObserver:
    """Hook points for logging and persistence; every method is a no-op."""

    def on_candidate(self, candidate: Candidate) -> None:
        pass

    def on_generation(self, index: int, population: list[Candidate], t: int) -> None:
        pass

    def on_state(self, state: "SearchState") -> None:
        pass


@dataclass
class SearchState:
    """Everything needed to continue a run exactly where it stopped."""

    rng: np.random.Generator
    population: list[Candidate] = field(default_factory=list)
    archive: list[Candidate] = field(default_factory=list)
    generated: int = 0
    t: int = 0
    generation: int = 0

    @classmethod
    def fresh(cls, seed: int) -> "SearchState":
        return cls(rng=np.random.default_rng(seed))


@dataclass(frozen=True)
class SearchResult:
    """Outcome of a finished search."""

    best: Candidate
    population: list[Candidate]
    archive: list[Candidate]
    generated: int
    t: int
    generations: int


def _failed_candidate(reason: str, origin: str, parents: tuple[str, ...], created: int) -> Candidate:
    return Candidate(
        name=f"unrealized-{created}",
        code="",
        origin=origin,
        parent_names=parents,
        fitness=0.0,
        error=reason,
        created=created,
    )


def _realize(
    reply: str | GenerationFailure,
    origin: str,
    parents: tuple[str, ...],
    created: int,
    evaluator,
) -> Candidate:
    """Turn one model reply into a scored candidate, failures included."""
    if isinstance(reply, GenerationFailure):
        return _failed_candidate(f"generation failed: {reply.reason}", origin, parents, created)
    parsed = parse_response(reply)
    if isinstance(parsed, ParseFailure):
        return _failed_candidate(f"parse failed: {parsed.reason}", origin, parents, created)
    candidate = replace(parsed, origin=origin, parent_names=parents, created=created)
    outcome = evaluator(candidate)
    candidate.fitness = float(outcome.fitness)
    candidate.error = outcome.error
    return candidate


def _render(request: PromptRequest, templates: PromptTemplates | None) -> tuple[str, PromptRequest]:
    """Render a planned call, degrading twin-pair combinations to refinement."""
    if request.kind == "crossover":
        try:
            return render_crossover(request.parents[0], request.parents[1], templates), request
        except DuplicateParent:
            logger.warning(
                "combination pair %r collapsed to identical code; refining instead",
                request.parents[0].name,
            )
            request = PromptRequest("mutation", (request.parents[0],))
    return render_mutation(request.parents[0], templates), request


def run_search(
    config: ESConfig,
    client: BaseClient,
    evaluator,
    observer: RunObserver | None = None,
    params: LLMParams | None = None,
    templates: PromptTemplates | None = None,
    state: SearchState | None = None,
) -> SearchResult:
    """Run the full generate-score-select loop.

    ``evaluator`` maps a parsed :class:`Candidate` to an
    :class:`EvalOutcome`; it owns sandboxing and benchmark policy.  The
    search stops once ``config.T`` candidates exist (failures count), so a
    partial final generation is requested when the budget does not divide
    evenly.  Pass a ``state`` snapshot to continue an interrupted run; the
    random stream, counters, archive, and population resume bit for bit.
    """
    observer = observer or RunObserver()
    state = state or SearchState.fresh(config.seed)
    rng = state.rng
    population = state.population
    archive = state.archive

    while len(archive) < config.mu and state.generated < config.T:
        prompt = render_initialization(archive, templates)
        try:
            reply: str | GenerationFailure = client.generate(prompt, params)
        except LLMUnavailable as exc:
            reply = GenerationFailure(str(exc))
        candidate = _realize(reply, "init", (), state.generated, evaluator)
        archive.append(candidate)
        population.append(candidate)
        state.generated += 1
        state.t += 1
        observer.on_candidate(candidate)
        observer.on_state(state)

    while state.generated < config.T:
        size = min(config.lam, config.T - state.generated)
        requests = get_prompts(population, size, config.p_cr, rng)
        rendered = [_render(req, templates) for req in requests]
        replies = client.generate_batch([text for text, _ in rendered], params)
        offspring = []
        for reply, (_, request) in zip(replies, rendered):
            names = tuple(p.name for p in request.parents)
            candidate = _realize(reply, request.kind, names, state.generated, evaluator)
            state.generated += 1
            archive.append(candidate)
            offspring.append(candidate)
            observer.on_candidate(candidate)
        population = select(population, offspring, config.mu, config.elitist)
        state.population = population
        state.t += len(population)
        state.generation += 1
        observer.on_generation(state.generation, population, state.t)
        observer.on_state(state)

    best = sorted(archive, key=rank_key)[0]
    return SearchResult(
        best=best,
        population=list(population),
        archive=list(archive),
        generated=state.generated,
        t=state.t,
        generations=state.generation,
    )
