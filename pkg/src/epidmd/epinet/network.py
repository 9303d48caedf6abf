"""Farm shipment networks and intra-farm Erdos-Renyi contact graphs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .rng import as_generator


class Farm(NamedTuple):
    farm_id: str
    population: int


class Shipment(NamedTuple):
    """Directed edge: each day ``size`` pigs move ``src -> dst`` with probability ``prob``."""

    src: str
    dst: str
    prob: float
    size: int


@dataclass(frozen=True)
class FarmNetwork:
    farms: tuple
    edges: tuple = ()

    def __post_init__(self):
        farms = tuple(Farm(str(f), int(p)) for f, p in self.farms)
        edges = tuple(Shipment(str(s), str(d), float(p), int(k)) for s, d, p, k in self.edges)
        ids = [f.farm_id for f in farms]
        if not farms:
            raise ValueError("network needs at least one farm")
        if len(set(ids)) != len(ids):
            raise ValueError("farm ids must be unique")
        for f in farms:
            if f.population < 1:
                raise ValueError(f"farm {f.farm_id!r} needs a positive population")
        known = set(ids)
        for e in edges:
            if e.src not in known or e.dst not in known:
                raise ValueError(f"edge {e.src!r}->{e.dst!r} references an unknown farm")
            if e.src == e.dst:
                raise ValueError(f"self-loop on farm {e.src!r}")
            if not 0.0 <= e.prob <= 1.0:
                raise ValueError(f"shipment probability {e.prob} outside [0, 1]")
            if e.size < 1:
                raise ValueError("shipment size must be a positive integer")
        object.__setattr__(self, "farms", farms)
        object.__setattr__(self, "edges", edges)

    @property
    def farm_ids(self) -> tuple:
        return tuple(f.farm_id for f in self.farms)

    @property
    def total_population(self) -> int:
        return sum(f.population for f in self.farms)

    def index(self) -> dict:
        return {f.farm_id: i for i, f in enumerate(self.farms)}

    def reachable_from(self, farm_id: str) -> set:
        """Farms that pigs starting at ``farm_id`` can eventually reach."""
        out: dict = {}
        for e in self.edges:
            out.setdefault(e.src, []).append(e.dst)
        seen = {farm_id}
        stack = [farm_id]
        while stack:
            for nxt in out.get(stack.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen


def generate_network(
    n_farms: int,
    population_range: Sequence[int] = (100, 500),
    edge_density: float = 0.05,
    rng=None,
    shipment_prob_range: Sequence[float] = (0.0, 0.2),
    shipment_size_range: Sequence[int] = (1, 10),
) -> FarmNetwork:
    """Directed Erdos-Renyi farm graph with uniform random shipment rates and sizes."""
    if n_farms < 1:
        raise ValueError("n_farms must be at least 1")
    if not 0.0 <= edge_density <= 1.0:
        raise ValueError("edge_density must lie in [0, 1]")
    lo, hi = (int(v) for v in population_range)
    if not 1 <= lo <= hi:
        raise ValueError("population_range must satisfy 1 <= low <= high")
    rng = as_generator(rng)
    width = max(3, len(str(n_farms)))
    ids = [f"farm_{i + 1:0{width}d}" for i in range(n_farms)]
    pops = rng.integers(lo, hi + 1, size=n_farms)

    present = rng.random((n_farms, n_farms)) < edge_density
    np.fill_diagonal(present, False)
    src, dst = np.nonzero(present)
    p_lo, p_hi = shipment_prob_range
    k_lo, k_hi = shipment_size_range
    probs = rng.uniform(p_lo, p_hi, size=src.size)
    sizes = rng.integers(k_lo, k_hi + 1, size=src.size)
    farms = tuple(zip(ids, pops.tolist()))
    edges = tuple(
        (ids[s], ids[d], float(p), int(k)) for s, d, p, k in zip(src.tolist(), dst.tolist(), probs, sizes)
    )
    return FarmNetwork(farms, edges)


@dataclass(frozen=True)
class ContactGraphSpec:
    edge_prob: float = 0.5
    resample_daily: bool = False

    def __post_init__(self):
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ValueError("edge_prob must lie in [0, 1]")


def sample_contact_graph(population: int, spec: ContactGraphSpec | None = None, rng=None) -> np.ndarray:
    """Symmetric boolean adjacency with each unordered pair present independently."""
    if population < 1:
        raise ValueError("population must be at least 1")
    spec = ContactGraphSpec() if spec is None else spec
    rng = as_generator(rng)
    upper = np.triu(rng.random((population, population)) < spec.edge_prob, k=1)
    return upper | upper.T
