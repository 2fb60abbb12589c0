"""Generational GA: roulette selection, single-point crossover, uniform
resample mutation, optional elitism, and threshold/plateau/budget stopping.

Genomes are integer vectors; every gene carries its own inclusive bound.
Invalid evaluations are kept in the population with fitness -inf but never
win selection or elitism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GAError(ValueError):
    """Raised on invalid genome specs, configs or unevaluated populations."""


@dataclass(frozen=True)
class GenomeSpec:
    """Per-gene inclusive integer bounds, e.g. ((0, 11), (0, 2))."""

    bounds: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.bounds) < 1:
            raise GAError("genome needs at least one gene")
        for i, (lo, hi) in enumerate(self.bounds):
            if hi < lo:
                raise GAError(f"gene {i} bound ({lo}, {hi}) is empty")

    @property
    def length(self) -> int:
        return len(self.bounds)

    def check(self, genes: np.ndarray) -> None:
        for i, ((lo, hi), g) in enumerate(zip(self.bounds, genes)):
            if not lo <= g <= hi:
                raise GAError(f"gene {i}={g} outside bound ({lo}, {hi})")


@dataclass
class Individual:
    genes: np.ndarray
    fitness: float | None = None

    @property
    def valid(self) -> bool:
        return self.fitness is not None and math.isfinite(self.fitness)

    def copy(self) -> "Individual":
        return Individual(self.genes.copy(), self.fitness)


@dataclass(frozen=True)
class GAConfig:
    population: int = 30
    crossover_rate: float = 0.9
    mutation_rate: float = 0.02
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        # >= 1 so degenerate single-individual populations can be built;
        # breeding itself works from any size (parents may repeat).
        if self.population < 1:
            raise GAError(f"population must be >= 1, got {self.population}")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise GAError(f"crossover_rate must be in [0, 1], got {self.crossover_rate}")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise GAError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if self.elitism < 0:
            raise GAError(f"elitism must be >= 0, got {self.elitism}")


@dataclass(frozen=True)
class StoppingCriteria:
    """Stop at the generation budget, on a best-fitness plateau smaller
    than min_improvement, or once best fitness reaches the threshold."""

    max_generations: int = 100
    min_improvement: float = 0.0
    fitness_threshold: float = math.inf

    def __post_init__(self):
        if self.max_generations < 1:
            raise GAError(f"max_generations must be >= 1, got {self.max_generations}")


@dataclass
class GenerationStats:
    generation: int
    best: float
    mean: float

    def as_dict(self) -> dict:
        return {"generation": self.generation, "best": self.best, "mean": self.mean}


Population = list


def init_population(spec: GenomeSpec, cfg: GAConfig, rng: np.random.Generator | None = None) -> Population:
    """Uniform-random genomes within bounds; fitness left unset."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    pop = []
    for _ in range(cfg.population):
        genes = np.array(
            [rng.integers(lo, hi + 1) for lo, hi in spec.bounds], dtype=np.int64
        )
        pop.append(Individual(genes))
    return pop


def evaluate(pop: Population, fitness_fn) -> int:
    """Fill in missing fitness values; failures become -inf. Returns the
    number of evaluator calls made."""
    calls = 0
    for ind in pop:
        if ind.fitness is not None:
            continue
        calls += 1
        try:
            ind.fitness = float(fitness_fn(ind.genes))
        except Exception:
            ind.fitness = -math.inf
        if ind.fitness is not None and math.isnan(ind.fitness):
            ind.fitness = -math.inf
    return calls


def selection_probabilities(pop: Population) -> np.ndarray:
    """Fitness-proportional probabilities after shifting the minimum to
    >= 1e-9; invalid individuals get probability 0."""
    fits = np.array(
        [ind.fitness if ind.valid else -math.inf for ind in pop], dtype=np.float64
    )
    mask = np.isfinite(fits)
    if not mask.any():
        raise GAError("no valid individuals to select from")
    valid = fits[mask]
    shift = max(0.0, 1e-9 - valid.min())
    shifted = np.where(mask, fits + shift, 0.0)
    return shifted / shifted[mask].sum()


def select_parent(pop: Population, rng: np.random.Generator) -> Individual:
    """Roulette-wheel draw over the valid individuals."""
    probs = selection_probabilities(pop)
    idx = rng.choice(len(pop), p=probs)
    return pop[idx]


def crossover(
    a: Individual, b: Individual, rng: np.random.Generator, crossover_rate: float
) -> tuple[Individual, Individual]:
    """Single-point crossover with probability crossover_rate, else copies."""
    k = len(a.genes)
    if len(b.genes) != k:
        raise GAError(f"genome length mismatch: {k} vs {len(b.genes)}")
    if k < 2:
        raise GAError("crossover needs genomes of length >= 2")
    if rng.random() < crossover_rate:
        q = int(rng.integers(1, k))
        c1 = np.concatenate([a.genes[:q], b.genes[q:]])
        c2 = np.concatenate([b.genes[:q], a.genes[q:]])
        return Individual(c1), Individual(c2)
    return Individual(a.genes.copy()), Individual(b.genes.copy())


def mutate(
    ind: Individual, rng: np.random.Generator, mutation_rate: float, spec: GenomeSpec
) -> Individual:
    """Resample each gene uniformly within its bound with prob mutation_rate."""
    genes = ind.genes.copy()
    for i, (lo, hi) in enumerate(spec.bounds):
        if rng.random() < mutation_rate:
            genes[i] = rng.integers(lo, hi + 1)
    return Individual(genes)


def run(
    spec: GenomeSpec,
    cfg: GAConfig,
    stop: StoppingCriteria,
    fitness_fn,
) -> tuple[Individual, list[GenerationStats]]:
    """Full generational loop. Returns the best individual ever evaluated
    and per-generation best/mean fitness."""
    rng = np.random.default_rng(cfg.seed)
    pop = init_population(spec, cfg, rng)
    evaluate(pop, fitness_fn)
    history: list[GenerationStats] = []
    best_ever: Individual | None = None
    prev_best = None

    for gen in range(stop.max_generations):
        valid_fits = [ind.fitness for ind in pop if ind.valid]
        if not valid_fits:
            raise GAError(f"generation {gen} has no valid individuals")
        best_now = max(valid_fits)
        history.append(GenerationStats(gen, best_now, float(np.mean(valid_fits))))

        gen_best = max((ind for ind in pop if ind.valid), key=lambda i: i.fitness)
        if best_ever is None or gen_best.fitness > best_ever.fitness:
            best_ever = gen_best.copy()

        if best_now >= stop.fitness_threshold:
            break
        if prev_best is not None and abs(best_now - prev_best) < stop.min_improvement:
            break
        prev_best = best_now
        if gen == stop.max_generations - 1:
            break

        pop = _next_generation(pop, spec, cfg, rng)
        evaluate(pop, fitness_fn)

    return best_ever, history


def _next_generation(
    pop: Population, spec: GenomeSpec, cfg: GAConfig, rng: np.random.Generator
) -> Population:
    ranked = sorted(
        (ind for ind in pop if ind.valid), key=lambda i: i.fitness, reverse=True
    )
    nxt: Population = [ranked[i].copy() for i in range(min(cfg.elitism, len(ranked)))]
    while len(nxt) < cfg.population:
        p1 = select_parent(pop, rng)
        p2 = select_parent(pop, rng)
        c1, c2 = crossover(p1, p2, rng, cfg.crossover_rate)
        nxt.append(mutate(c1, rng, cfg.mutation_rate, spec))
        if len(nxt) < cfg.population:
            nxt.append(mutate(c2, rng, cfg.mutation_rate, spec))
    return nxt
