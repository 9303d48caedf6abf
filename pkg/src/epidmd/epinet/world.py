"""Stochastic network SEIR dynamics over a farm shipment network.

Each farm keeps its pigs in fixed-capacity *slots*.  A slot holds one pig's
state (or is empty), and the farm's contact graph is a symmetric bit matrix
over slots, so infected-neighbour counts are popcounts of ``row & infected``.
A pig arriving by shipment takes a free slot and gets fresh Bernoulli
contacts with every other slot, which keeps the edge probability of the
destination farm unchanged in expectation.
"""

from __future__ import annotations

import copy
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import InfectExceedsPopulation
from . import kernels, rng as streams
from .network import ContactGraphSpec, FarmNetwork, sample_contact_graph

logger = logging.getLogger(__name__)

EMPTY, S, E, I, R = -1, 0, 1, 2, 3
STATE_NAMES = ("S", "E", "I", "R")

RANDOM = "random"


@dataclass(frozen=True)
class SeirParams:
    """Transmission and stage parameters.

    ``sigma_days`` and ``gamma_days`` are mean stage durations in days, giving
    daily exit probabilities ``1/sigma_days`` and ``1/gamma_days``.  With
    ``stage_parameters="rate"`` they are read as exit rates per day instead,
    and the daily exit probability is ``1 - exp(-rate)``.
    """

    beta: float = 0.087
    sigma_days: float = 7.0
    gamma_days: float = 6.5
    stage_parameters: str = "duration"

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not self.sigma_days > 0 or not self.gamma_days > 0:
            raise ValueError("sigma_days and gamma_days must be positive")
        if self.stage_parameters not in ("duration", "rate"):
            raise ValueError("stage_parameters must be 'duration' or 'rate'")

    def _exit_prob(self, value: float) -> float:
        if self.stage_parameters == "rate":
            return -math.expm1(-value)
        return min(1.0, 1.0 / value)

    @property
    def p_onset(self) -> float:
        """Daily probability E -> I."""
        return self._exit_prob(self.sigma_days)

    @property
    def p_recover(self) -> float:
        """Daily probability I -> R."""
        return self._exit_prob(self.gamma_days)


@dataclass(frozen=True)
class OutbreakSeed:
    n_initial_infected: int
    farm_id: str = RANDOM

    def __post_init__(self):
        if int(self.n_initial_infected) != self.n_initial_infected or self.n_initial_infected < 1:
            raise ValueError("n_initial_infected must be a positive integer")


def _capacity(n: int) -> int:
    return max(64, -(-int(n * 1.25 + 8) // 64) * 64)


class FarmState:
    """Slot states plus the packed contact bit matrix of one farm."""

    def __init__(self, farm_id: str, adjacency: np.ndarray):
        n = adjacency.shape[0]
        cap = _capacity(n)
        self.farm_id = farm_id
        self.state = np.full(cap, EMPTY, dtype=np.int8)
        self.state[:n] = S
        self.adj = np.zeros((cap, cap // 64), dtype=np.uint64)
        self._load_dense(adjacency)

    def _load_dense(self, adjacency: np.ndarray) -> None:
        n = adjacency.shape[0]
        cap = self.capacity
        padded = np.zeros((n, cap), dtype=bool)
        padded[:, :n] = adjacency
        self.adj[:] = 0
        self.adj[:n] = np.packbits(padded, axis=1, bitorder="little").view(np.uint64)

    @property
    def capacity(self) -> int:
        return self.state.shape[0]

    @property
    def population(self) -> int:
        return int(np.count_nonzero(self.state != EMPTY))

    def counts(self) -> np.ndarray:
        return np.bincount(self.state[self.state != EMPTY], minlength=4)[:4]

    def occupied(self) -> np.ndarray:
        return np.flatnonzero(self.state != EMPTY)

    def dense_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """``(slots, adjacency)`` over occupied slots as a dense boolean matrix."""
        slots = self.occupied()
        bits = np.unpackbits(self.adj[slots].view(np.uint8), axis=1, bitorder="little")
        return slots, bits[:, slots].astype(bool)

    def grow(self, needed: int) -> None:
        cap = self.capacity
        new_cap = _capacity(max(needed, 2 * cap))
        state = np.full(new_cap, EMPTY, dtype=np.int8)
        state[:cap] = self.state
        adj = np.zeros((new_cap, new_cap // 64), dtype=np.uint64)
        adj[:cap, : cap // 64] = self.adj
        self.state, self.adj = state, adj

    def free_slots(self, k: int) -> np.ndarray:
        free = np.flatnonzero(self.state == EMPTY)
        if free.size < k:
            self.grow(self.population + k)
            free = np.flatnonzero(self.state == EMPTY)
        return free[:k]

    def infected_mask(self) -> np.ndarray:
        return np.packbits(self.state == I, bitorder="little").view(np.uint64)

    def resample(self, edge_prob: float, gen: np.random.Generator) -> None:
        cap = self.capacity
        upper = np.triu(gen.random((cap, cap)) < edge_prob, k=1)
        self.adj[:] = np.packbits(upper | upper.T, axis=1, bitorder="little").view(np.uint64)


class SeirWorld:
    """Complete epidemic state: network, per-farm pig states and contact graphs.

    ``day`` counts completed :func:`step_day` calls.  All randomness is drawn
    from substreams of ``rng_seed`` (see :mod:`epidmd.epinet.rng`).
    """

    def __init__(
        self,
        network: FarmNetwork,
        contact: ContactGraphSpec | None = None,
        rng_seed: int = 0,
        graphs=None,
    ):
        self.network = network
        self.contact = ContactGraphSpec() if contact is None else contact
        self.rng_seed = int(rng_seed)
        self.day = 0
        self.ever_infected = 0
        self.underflow_events = 0
        self.last_new_infections = np.zeros(len(network.farms), dtype=np.int64)
        self.farms = []
        for f, farm in enumerate(network.farms):
            if graphs is not None:
                adjacency = np.asarray(graphs[f], dtype=bool)
            else:
                gen = streams.substream(self.rng_seed, streams.CONTACTS, 0, f)
                adjacency = sample_contact_graph(farm.population, self.contact, gen)
            self.farms.append(FarmState(farm.farm_id, adjacency))
        self._index = network.index()
        self._edges = [
            (self._index[e.src], self._index[e.dst], e.prob, e.size) for e in network.edges
        ]

    def farm(self, farm_id: str) -> FarmState:
        return self.farms[self._index[farm_id]]

    def counts(self) -> np.ndarray:
        """``(n_farms, 4)`` array of S, E, I, R counts."""
        return np.array([f.counts() for f in self.farms], dtype=np.int64)

    def total_population(self) -> int:
        return sum(f.population for f in self.farms)

    def copy(self, rng_seed: int | None = None) -> SeirWorld:
        other = copy.copy(self)
        other.farms = [copy.copy(f) for f in self.farms]
        for f in other.farms:
            f.state = f.state.copy()
            f.adj = f.adj.copy()
        if rng_seed is not None:
            other.rng_seed = int(rng_seed)
        return other


def seed_outbreak(world: SeirWorld, seed: OutbreakSeed, rng=None) -> SeirWorld:
    """Move ``seed.n_initial_infected`` susceptible pigs of one farm to I."""
    gen = rng if isinstance(rng, np.random.Generator) else streams.substream(
        world.rng_seed if rng is None else int(rng), streams.SEED_OUTBREAK
    )
    if seed.farm_id == RANDOM:
        farm = world.farms[int(gen.integers(len(world.farms)))]
    else:
        if seed.farm_id not in world._index:
            raise KeyError(f"unknown farm {seed.farm_id!r}")
        farm = world.farm(seed.farm_id)
    susceptible = np.flatnonzero(farm.state == S)
    if seed.n_initial_infected > susceptible.size:
        raise InfectExceedsPopulation(
            f"cannot infect {seed.n_initial_infected} pigs on {farm.farm_id!r} "
            f"with {susceptible.size} susceptible"
        )
    chosen = gen.choice(susceptible, size=seed.n_initial_infected, replace=False)
    farm.state[chosen] = I
    world.ever_infected += int(seed.n_initial_infected)
    return world


def _ship(world: SeirWorld, day: int) -> None:
    edge_prob = world.contact.edge_prob
    arrived = [np.zeros(f.capacity, dtype=bool) for f in world.farms]
    for e, (src_i, dst_i, prob, size) in enumerate(world._edges):
        gen = streams.substream(world.rng_seed, streams.SHIPMENT, day, e)
        if not gen.random() < prob:
            continue
        src, dst = world.farms[src_i], world.farms[dst_i]
        eligible = np.flatnonzero((src.state != EMPTY) & ~arrived[src_i][: src.capacity])
        if size > eligible.size:
            world.underflow_events += 1
            logger.debug(
                "day %d: shipment %s->%s of %d pigs clamped to %d available",
                day, src.farm_id, dst.farm_id, size, eligible.size,
            )
            size = eligible.size
        if size == 0:
            continue
        moved = np.sort(gen.choice(eligible, size=size, replace=False))
        states = src.state[moved].copy()
        src.state[moved] = EMPTY
        slots = dst.free_slots(size)
        if arrived[dst_i].size < dst.capacity:
            arrived[dst_i] = np.concatenate(
                [arrived[dst_i], np.zeros(dst.capacity - arrived[dst_i].size, dtype=bool)]
            )
        for slot, st in zip(slots.tolist(), states.tolist()):
            bits = (gen.random(dst.capacity) < edge_prob).view(np.uint8)
            kernels.set_slot_edges(dst.adj, slot, bits)
            dst.state[slot] = st
            arrived[dst_i][slot] = True


def _disease_farm(world: SeirWorld, f: int, params: SeirParams, day: int, pow_table: np.ndarray) -> tuple[int, int]:
    farm = world.farms[f]
    if world.contact.resample_daily:
        farm.resample(world.contact.edge_prob, streams.substream(world.rng_seed, streams.RESAMPLE, day, f))
    gen = streams.substream(world.rng_seed, streams.DISEASE, day, f)
    u = gen.random(farm.capacity)
    state = farm.state
    sus = np.flatnonzero(state == S)
    exposed = np.flatnonzero(state == E)
    infected = np.flatnonzero(state == I)

    new_e = np.empty(0, dtype=np.intp)
    if params.beta > 0 and infected.size and sus.size:
        y = np.empty(sus.size, dtype=np.int32)
        kernels.count_infected_neighbors(farm.adj, farm.infected_mask(), sus, y)
        new_e = sus[u[sus] < pow_table[y]]
    onset = exposed[u[exposed] < params.p_onset]
    recover = infected[u[infected] < params.p_recover]
    state[new_e] = E
    state[onset] = I
    state[recover] = R
    return int(new_e.size), int(onset.size)


def step_day(world: SeirWorld, params: SeirParams, threads: int = 1, executor=None) -> SeirWorld:
    """Advance one day in place and return ``world``.

    Shipments run first, sequentially in edge order; pigs that arrived today
    are not reshipped.  Disease transitions then run per farm from the
    post-shipment states (a pig moves at most one stage per day).  Farms only
    touch their own substream and slots, so the result is the same for any
    thread count.  ``world.last_new_infections`` holds today's S->E counts.
    """
    day = world.day
    _ship(world, day)
    max_cap = max(f.capacity for f in world.farms)
    if params.beta < 1:
        pow_table = -np.expm1(np.arange(max_cap + 1) * math.log1p(-params.beta))
    else:
        pow_table = np.r_[0.0, np.ones(max_cap)]
    n = len(world.farms)

    def work(f):
        return _disease_farm(world, f, params, day, pow_table)

    if executor is not None:
        results = list(executor.map(work, range(n)))
    elif threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(n)))
    else:
        results = [work(f) for f in range(n)]
    world.last_new_infections = np.array([r[0] for r in results], dtype=np.int64)
    world.ever_infected += sum(r[1] for r in results)
    world.day = day + 1
    return world
