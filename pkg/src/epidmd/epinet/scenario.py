"""Scenario configuration and the simulation driver."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import logging

import numpy as np

from ..errors import ConfigError
from ..snapshot import SnapshotSeries
from .network import ContactGraphSpec, FarmNetwork, generate_network
from .rng import NETWORK, SEED_OUTBREAK, substream
from .world import RANDOM, OutbreakSeed, SeirParams, SeirWorld, seed_outbreak, step_day

OBSERVABLES = {
    "S": "S", "susceptible": "S",
    "E": "E", "exposed": "E",
    "I": "I", "infected": "I", "infected_count": "I",
    "R": "R", "recovered": "R",
    "new_infections": "new_infections",
}
_COLUMN = {"S": 0, "E": 1, "I": 2, "R": 3}

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioConfig:
    network: FarmNetwork
    params: SeirParams = field(default_factory=SeirParams)
    contact: ContactGraphSpec = field(default_factory=ContactGraphSpec)
    days: int = 100
    seed: int = 0
    observable: str = "I"
    outbreaks: tuple = ()

    @classmethod
    def from_dict(cls, data: dict, seed: int | None = None) -> ScenarioConfig:
        """Validate a scenario document, reporting problems by field path."""
        return _parse(data, seed)


def _require(data: dict, key: str, path: str) -> Any:
    if key not in data:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return data[key]


def _number(data, key, path, *, lo=None, hi=None, lo_open=False, integer=False, default=None, required=True):
    where = f"{path}.{key}"
    if key not in data:
        if required:
            raise ConfigError(where, "missing required field")
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, f"expected a number, got {type(v).__name__}")
    if integer and int(v) != v:
        raise ConfigError(where, f"expected an integer, got {v!r}")
    if not np.isfinite(v):
        raise ConfigError(where, "must be finite")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(where, f"must be {'>' if lo_open else '>='} {lo}, got {v!r}")
    if hi is not None and v > hi:
        raise ConfigError(where, f"must be <= {hi}, got {v!r}")
    return int(v) if integer else float(v)


def _parse_network(data: dict, path: str, seed: int) -> FarmNetwork:
    if "farms" not in data and "generate" in data:
        g = data["generate"]
        gp = f"{path}.generate"
        if not isinstance(g, dict):
            raise ConfigError(gp, "expected an object")
        n = _number(g, "n_farms", gp, lo=1, integer=True)
        pr = g.get("population_range", [100, 500])
        if not (isinstance(pr, list) and len(pr) == 2):
            raise ConfigError(f"{gp}.population_range", "expected [low, high]")
        try:
            return generate_network(
                n,
                population_range=pr,
                edge_density=_number(g, "edge_density", gp, lo=0, hi=1, default=0.05, required=False),
                rng=substream(seed, NETWORK),
                shipment_prob_range=tuple(g.get("shipment_prob_range", (0.0, 0.2))),
                shipment_size_range=tuple(g.get("shipment_size_range", (1, 10))),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(gp, str(exc)) from None

    farms_raw = _require(data, "farms", path)
    if not isinstance(farms_raw, list) or not farms_raw:
        raise ConfigError(f"{path}.farms", "expected a non-empty list")
    farms = []
    for k, item in enumerate(farms_raw):
        fp = f"{path}.farms[{k}]"
        if not isinstance(item, dict):
            raise ConfigError(fp, "expected an object with id and population")
        farms.append((str(_require(item, "id", fp)), _number(item, "population", fp, lo=1, integer=True)))
    edges = []
    for k, item in enumerate(data.get("edges", [])):
        ep = f"{path}.edges[{k}]"
        if not isinstance(item, dict):
            raise ConfigError(ep, "expected an object")
        edges.append((
            str(_require(item, "src", ep)),
            str(_require(item, "dst", ep)),
            _number(item, "prob", ep, lo=0, hi=1),
            _number(item, "size", ep, lo=1, integer=True),
        ))
    try:
        return FarmNetwork(tuple(farms), tuple(edges))
    except ValueError as exc:
        raise ConfigError(f"{path}.edges", str(exc)) from None


def _parse(data: dict, seed_override: int | None) -> ScenarioConfig:
    path = "config"
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a JSON object")
    seed = _number(data, "seed", path, lo=0, integer=True, default=0, required=False)
    if seed_override is not None:
        seed = int(seed_override)
    network = _parse_network(data, path, seed)
    mode = data.get("stage_parameters", "duration")
    if mode not in ("duration", "rate"):
        raise ConfigError(f"{path}.stage_parameters", "expected 'duration' or 'rate'")
    params = SeirParams(
        beta=_number(data, "beta", path, lo=0, hi=1),
        sigma_days=_number(data, "sigma_days", path, lo=0, lo_open=True),
        gamma_days=_number(data, "gamma_days", path, lo=0, lo_open=True),
        stage_parameters=mode,
    )
    resample = data.get("resample_contacts_daily", False)
    if not isinstance(resample, bool):
        raise ConfigError(f"{path}.resample_contacts_daily", "expected true or false")
    contact = ContactGraphSpec(
        edge_prob=_number(data, "edge_prob", path, lo=0, hi=1, default=0.5, required=False),
        resample_daily=resample,
    )
    days = _number(data, "days", path, lo=1, integer=True)
    observable = data.get("observable", "I")
    if observable not in OBSERVABLES:
        raise ConfigError(f"{path}.observable", f"unknown observable {observable!r}; choose from {sorted(OBSERVABLES)}")

    raw = data.get("outbreak", [])
    raw = [raw] if isinstance(raw, dict) else raw
    if not isinstance(raw, list):
        raise ConfigError(f"{path}.outbreak", "expected an object or a list of objects")
    outbreaks = []
    ids = set(network.farm_ids)
    for k, item in enumerate(raw):
        op = f"{path}.outbreak" if isinstance(data.get("outbreak"), dict) else f"{path}.outbreak[{k}]"
        if not isinstance(item, dict):
            raise ConfigError(op, "expected an object")
        farm_id = str(item.get("farm_id", RANDOM))
        if farm_id != RANDOM and farm_id not in ids:
            raise ConfigError(f"{op}.farm_id", f"unknown farm {farm_id!r}")
        n = _number(item, "n_initial_infected", op, lo=1, integer=True)
        outbreaks.append(OutbreakSeed(n, farm_id))
    return ScenarioConfig(network, params, contact, days, seed, OBSERVABLES[observable], tuple(outbreaks))


def record(world: SeirWorld, observable: str) -> np.ndarray:
    if observable == "new_infections":
        return world.last_new_infections.astype(float)
    return world.counts()[:, _COLUMN[observable]].astype(float)


def simulate(config, threads: int = 1, world: SeirWorld | None = None) -> SnapshotSeries:
    """Run ``config.days`` days and return the per-farm observable, one row per day.

    Row ``k`` holds the observable at the end of day ``k + 1`` (``t0 = 1``).
    A prepared ``world`` may be passed to skip construction and seeding.
    """
    if isinstance(config, dict):
        config = ScenarioConfig.from_dict(config)
    if world is None:
        world = SeirWorld(config.network, config.contact, config.seed)
        for k, ob in enumerate(config.outbreaks):
            seed_outbreak(world, ob, substream(config.seed, SEED_OUTBREAK, 0, k))
    rows = np.empty((config.days, len(config.network.farms)))
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for d in range(config.days):
            step_day(world, config.params, executor=pool)
            rows[d] = record(world, config.observable)
    finally:
        if pool is not None:
            pool.shutdown()
    if world.underflow_events:
        logger.warning("%d shipments were clamped to the pigs available at their source", world.underflow_events)
    return SnapshotSeries(rows, dt=1.0, node_ids=config.network.farm_ids, t0=world.day - config.days + 1)
