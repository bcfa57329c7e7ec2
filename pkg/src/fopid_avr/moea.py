"""Chaotic-logistic-map random source and the NSGA-II optimizer.

Every stochastic decision (initial population, tournament indices,
crossover coefficients, mutation normals) consumes one logistic-map
stream in a fixed serial order; fitness evaluation draws nothing, so
evaluating children in parallel leaves a run bit-for-bit reproducible.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from fopid_avr.errors import ArityMismatch, DegenerateState

logger = logging.getLogger(__name__)

# Seeds that end on a fixed point or short cycle of the a=4 map.
PERIODIC_SEEDS = (0.0, 0.25, 0.5, 0.75, 1.0)
CLAMP = 1e-12


@dataclass(frozen=True)
class ChaoticRngState:
    """Logistic map x_{k+1} = a x_k (1 - x_k)."""

    a: float = 4.0
    x: float = 0.2027
    degenerate: bool = False

    def __post_init__(self):
        if not 0.0 < self.x < 1.0:
            raise DegenerateState(f"logistic state {self.x} outside (0, 1)")


def check_seed(x0: float) -> None:
    """Reject seeds on the map's fixed points or short cycles."""
    if not 0.0 < x0 < 1.0 or any(x0 == s for s in PERIODIC_SEEDS):
        raise DegenerateState(f"seed x0={x0} collapses the logistic map to a constant")


def logistic_next(state: ChaoticRngState) -> tuple[float, ChaoticRngState]:
    """Advance the map one step; the draw is the new iterate.

    Iterates that round onto 0 or 1 are clamped into (0, 1) and the new
    state is flagged ``degenerate``.
    """
    x = state.a * state.x * (1.0 - state.x)
    degenerate = state.degenerate
    if not CLAMP <= x <= 1.0 - CLAMP:
        if not np.isfinite(x) or x < 0.0 or x > 1.0 + 1e-9:
            raise DegenerateState(f"logistic map left [0, 1]: {x}")
        x = min(max(x, CLAMP), 1.0 - CLAMP)
        degenerate = True
    return x, ChaoticRngState(state.a, x, degenerate)


class LogisticStream:
    """Mutable cursor over the logistic sequence, the optimizer's sole RNG."""

    def __init__(self, state: ChaoticRngState | None = None):
        self.state = state if state is not None else ChaoticRngState()
        self.draws = 0

    def next(self) -> float:
        value, self.state = logistic_next(self.state)
        self.draws += 1
        return value

    def index(self, n: int) -> int:
        """Integer in [0, n) from one draw."""
        return min(int(self.next() * n), n - 1)

    def normal(self) -> float:
        """Standard normal via Box-Muller on two draws.

        The a=4 iterates follow the arcsine law; (2/pi) asin(sqrt(x)) maps
        them to uniform before the transform.
        """
        u1 = 2.0 / math.pi * math.asin(math.sqrt(self.next()))
        u2 = 2.0 / math.pi * math.asin(math.sqrt(self.next()))
        u1 = min(max(u1, CLAMP), 1.0)
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


# --------------------------------------------------------------------------
# Pareto machinery


def dominates(u, v) -> bool:
    """True iff u <= v componentwise with at least one strict inequality."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ArityMismatch(f"cannot compare {u.shape} with {v.shape}")
    return bool(np.all(u <= v) and np.any(u < v))


def dominance_matrix(objs: np.ndarray) -> np.ndarray:
    """D[i, j] is True when row i dominates row j."""
    objs = np.asarray(objs, dtype=float)
    le = np.all(objs[:, None, :] <= objs[None, :, :], axis=2)
    lt = np.any(objs[:, None, :] < objs[None, :, :], axis=2)
    return le & lt


def non_dominated_sort(objs) -> list[np.ndarray]:
    """Fronts F1, F2, ... as arrays of row indices (ascending within a front)."""
    objs = np.atleast_2d(np.asarray(objs, dtype=float))
    n = objs.shape[0]
    if n == 0:
        return []
    dom = dominance_matrix(objs)
    count = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(count == 0)
    while current.size:
        fronts.append(current)
        count = count - dom[current].sum(axis=0)
        count[current] = -1
        current = np.flatnonzero(count == 0)
    return fronts


def crowding_distance(objs) -> np.ndarray:
    """Crowding distance of each row of one front.

    Boundary points get +inf; an objective with zero range adds nothing.
    """
    objs = np.atleast_2d(np.asarray(objs, dtype=float))
    n, m = objs.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for k in range(m):
        order = np.argsort(objs[:, k], kind="stable")
        col = objs[order, k]
        span = col[-1] - col[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def hypervolume(points, ref) -> float:
    """Exact dominated hypervolume (minimization) w.r.t. ``ref``.

    Points not strictly better than ``ref`` in every objective are ignored.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ref = np.asarray(ref, dtype=float)
    if pts.size == 0:
        return 0.0
    pts = pts[np.all(pts < ref, axis=1)]
    if pts.shape[0] == 0:
        return 0.0
    return _hv_slice(pts, ref)


def _hv_slice(pts: np.ndarray, ref: np.ndarray) -> float:
    m = pts.shape[1]
    if m == 1:
        return float(ref[0] - pts[:, 0].min())
    if m == 2:
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        vol, best = 0.0, ref[1]
        for x, y in pts[order]:
            if y < best:
                vol += (ref[0] - x) * (best - y)
                best = y
        return float(vol)
    order = np.argsort(pts[:, -1], kind="stable")
    pts = pts[order]
    vol = 0.0
    for i in range(pts.shape[0]):
        upper = pts[i + 1, -1] if i + 1 < pts.shape[0] else ref[-1]
        depth = upper - pts[i, -1]
        if depth > 0:
            vol += depth * _hv_slice(pts[: i + 1, :-1], ref[:-1])
    return float(vol)


# --------------------------------------------------------------------------
# Population and operators


@dataclass
class Individual:
    genes: np.ndarray
    objectives: np.ndarray
    rank: int = 0
    crowding: float = 0.0


def rank_population(pop: Sequence[Individual]) -> list[list[int]]:
    """Assign rank (1-based front index) and in-front crowding distance."""
    if not pop:
        return []
    objs = np.array([ind.objectives for ind in pop])
    fronts = non_dominated_sort(objs)
    for r, front in enumerate(fronts, start=1):
        cd = crowding_distance(objs[front])
        for i, d in zip(front, cd):
            pop[i].rank = r
            pop[i].crowding = float(d)
    return [f.tolist() for f in fronts]


def tournament_select(pop: Sequence[Individual], stream: LogisticStream) -> int:
    """Binary tournament on (rank, crowding); index of the winner.

    Ties on both keep the first contestant drawn.
    """
    n = len(pop)
    if n == 1:
        return 0
    i = stream.index(n)
    j = stream.index(n)
    while j == i:
        j = stream.index(n)
    a, b = pop[i], pop[j]
    if b.rank < a.rank or (b.rank == a.rank and b.crowding > a.crowding):
        return j
    return i


def intermediate_crossover(p1, p2, stream: LogisticStream, lower, upper) -> np.ndarray:
    """child_g = p1_g + r_g (p2_g - p1_g), one fresh draw per gene."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    r = np.array([stream.next() for _ in range(p1.size)])
    return np.clip(p1 + r * (p2 - p1), lower, upper)


def gaussian_mutate(parent, stream: LogisticStream, lower, upper, sigma_frac: float = 0.1):
    """Add sigma_frac * (upper - lower) * N(0, 1) to every gene, then clamp."""
    parent = np.asarray(parent, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), parent.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), parent.shape)
    z = np.array([stream.normal() for _ in range(parent.size)])
    return np.clip(parent + sigma_frac * (upper - lower) * z, lower, upper)


# --------------------------------------------------------------------------
# NSGA-II


@dataclass(frozen=True)
class NsgaConfig:
    pop_size: int = 100
    crossover_fraction: float = 0.8
    mutation_fraction: float = 0.2
    tournament_size: int = 2
    pareto_fraction: float = 0.7
    stall_tolerance: float = 1e-4
    stall_window: int = 100
    max_generations: int = 500
    mutation_sigma: float = 0.1
    truncate_pareto: bool = True

    def __post_init__(self):
        for name in ("crossover_fraction", "mutation_fraction", "pareto_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.crossover_fraction + self.mutation_fraction > 1.0 + 1e-12:
            raise ValueError("crossover_fraction + mutation_fraction exceeds 1")
        if self.tournament_size != 2:
            raise ValueError("only binary tournaments are supported")
        if self.pop_size < 2:
            raise ValueError("pop_size must be at least 2")

    @property
    def pareto_cap(self) -> int:
        if not self.truncate_pareto:
            return self.pop_size
        return max(1, math.ceil(self.pareto_fraction * self.pop_size))


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    front_size: int
    hypervolume: float
    stall: float


@dataclass
class NsgaResult:
    front: list[Individual]
    population: list[Individual]
    log: list[GenerationRecord]
    stop_reason: str
    evaluations: int
    rng_state: ChaoticRngState
    hv_reference: np.ndarray
    history: list[np.ndarray] = field(default_factory=list)

    @property
    def front_objectives(self) -> np.ndarray:
        return np.array([ind.objectives for ind in self.front])

    @property
    def front_genes(self) -> np.ndarray:
        return np.array([ind.genes for ind in self.front])


def _evaluate_all(evaluator, genes_list, executor) -> list[np.ndarray]:
    if executor is None:
        return [np.asarray(evaluator(g), dtype=float) for g in genes_list]
    return [np.asarray(v, dtype=float) for v in executor.map(evaluator, genes_list)]


def _reference_point(objs: np.ndarray) -> np.ndarray:
    worst = objs.max(axis=0)
    ref = worst + 0.1 * np.abs(worst)
    return np.where(ref > worst, ref, worst + 1.0)


def _order_by_crowding(objs: np.ndarray) -> np.ndarray:
    """Indices sorted by descending crowding distance, stable."""
    cd = crowding_distance(objs)
    return np.argsort(-cd, kind="stable")


def environmental_selection(objs: np.ndarray, n: int, cap: int) -> np.ndarray:
    """Choose ``n`` survivors from the merged population.

    Fronts are taken whole while they fit and the split front is cut by
    crowding distance. The first front is first cut to ``cap`` members;
    later-front members then only enter when some retained first-front
    member dominates them, so no survivor can rise to rank 1 over an
    evicted elite.
    """
    fronts = non_dominated_sort(objs)
    f1 = fronts[0]
    chosen: list[int] = []
    evicted = np.zeros(0, dtype=int)
    if f1.size > min(cap, n):
        order = _order_by_crowding(objs[f1])
        chosen = f1[order[: min(cap, n)]].tolist()
        evicted = f1[order[min(cap, n):]]
    else:
        chosen = f1.tolist()
    guard = None
    if evicted.size:
        guard = dominance_matrix(objs)[np.array(chosen)].any(axis=0)
    leftovers: list[int] = []
    for front in fronts[1:]:
        if len(chosen) >= n:
            break
        members = front if guard is None else front[guard[front]]
        if guard is not None:
            leftovers.extend(front[~guard[front]].tolist())
        if members.size == 0:
            continue
        room = n - len(chosen)
        if members.size <= room:
            chosen.extend(members.tolist())
        else:
            order = _order_by_crowding(objs[members])
            chosen.extend(members[order[:room]].tolist())
    if len(chosen) < n:
        # not enough dominated candidates: restore evicted elites, then the rest
        for idx in list(evicted) + leftovers:
            if len(chosen) >= n:
                break
            chosen.append(int(idx))
    return np.array(chosen[:n], dtype=int)


def _truncate_front(front: list[Individual], cap: int) -> list[Individual]:
    if len(front) <= cap:
        return list(front)
    objs = np.array([ind.objectives for ind in front])
    keep = np.sort(_order_by_crowding(objs)[:cap])
    return [front[i] for i in keep]


def nsga2_run(
    evaluator: Callable[[np.ndarray], np.ndarray],
    lower,
    upper,
    config: NsgaConfig = NsgaConfig(),
    rng: ChaoticRngState | None = None,
    workers: int | None = None,
    keep_history: bool = False,
    on_generation: Callable[[GenerationRecord], None] | None = None,
) -> NsgaResult:
    """Minimize ``evaluator`` over the box [lower, upper] with NSGA-II.

    Stops when the mean relative hypervolume change of the rank-1 front
    over the last ``stall_window`` generations drops below
    ``stall_tolerance``, or after ``max_generations``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n, dim = config.pop_size, lower.size
    stream = LogisticStream(rng)
    executor = ProcessPoolExecutor(workers) if workers and workers > 1 else None

    try:
        init_genes = [
            lower + np.array([stream.next() for _ in range(dim)]) * (upper - lower)
            for _ in range(n)
        ]
        init_objs = _evaluate_all(evaluator, init_genes, executor)
        evaluations = n
        pop = [Individual(g, o) for g, o in zip(init_genes, init_objs)]
        rank_population(pop)

        first = np.array([ind.objectives for ind in pop if ind.rank == 1])
        feasible = first[np.all(first < 1e9, axis=1)]
        hv_ref = _reference_point(feasible if feasible.size else first)

        n_cx = int(round(config.crossover_fraction * n))
        n_mut = min(n - n_cx, int(round(config.mutation_fraction * n)))
        n_copy = n - n_cx - n_mut

        log: list[GenerationRecord] = []
        history: list[np.ndarray] = []
        hv_values: list[float] = []
        stop_reason = "max_generations"

        def record(gen: int):
            front = np.array([ind.objectives for ind in pop if ind.rank == 1])
            hv = hypervolume(front, hv_ref)
            if hv_values:
                prev = hv_values[-1]
                rel = abs(hv - prev) / max(abs(hv), 1e-300)
                changes.append(rel)
            hv_values.append(hv)
            window = changes[-config.stall_window:]
            stall = float(np.mean(window)) if window else float("nan")
            rec = GenerationRecord(gen, int(front.shape[0]), hv, stall)
            log.append(rec)
            if keep_history:
                history.append(front.copy())
            if on_generation is not None:
                on_generation(rec)
            return rec

        changes: list[float] = []
        record(0)

        for gen in range(1, config.max_generations + 1):
            children = []
            for _ in range(n_cx):
                a = pop[tournament_select(pop, stream)]
                b = pop[tournament_select(pop, stream)]
                children.append(intermediate_crossover(a.genes, b.genes, stream, lower, upper))
            for _ in range(n_copy):
                children.append(pop[tournament_select(pop, stream)].genes.copy())
            for _ in range(n_mut):
                a = pop[tournament_select(pop, stream)]
                children.append(
                    gaussian_mutate(a.genes, stream, lower, upper, config.mutation_sigma)
                )
            child_objs = _evaluate_all(evaluator, children, executor)
            evaluations += len(children)

            merged = pop + [Individual(g, o) for g, o in zip(children, child_objs)]
            objs = np.array([ind.objectives for ind in merged])
            keep = environmental_selection(objs, n, config.pareto_cap)
            pop = [replace(merged[i]) for i in keep]
            rank_population(pop)

            rec = record(gen)
            if len(changes) >= config.stall_window and rec.stall < config.stall_tolerance:
                stop_reason = "stall"
                break
    finally:
        if executor is not None:
            executor.shutdown()

    front = _truncate_front([ind for ind in pop if ind.rank == 1], config.pareto_cap)
    front.sort(key=lambda ind: tuple(ind.objectives))
    logger.info(
        "nsga2 stopped after %d generations (%s), %d evaluations",
        log[-1].generation,
        stop_reason,
        evaluations,
    )
    return NsgaResult(
        front=front,
        population=pop,
        log=log,
        stop_reason=stop_reason,
        evaluations=evaluations,
        rng_state=stream.state,
        hv_reference=hv_ref,
        history=history,
    )
