"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--pigs 2000] [--farms 50] [--days 100]

Times the infected-neighbour count in isolation and then a full simulation
with each backend swapped in, checking that both give the same trajectory.
"""

import argparse
import time
from unittest import mock

import numpy as np

from epidmd.epinet import (
    ContactGraphSpec,
    OutbreakSeed,
    ScenarioConfig,
    generate_network,
    kernels,
    sample_contact_graph,
    simulate,
)
from epidmd.epinet.world import I, FarmState


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench_count(n_pigs, repeats=20):
    rng = np.random.default_rng(0)
    farm = FarmState("bench", sample_contact_graph(n_pigs, ContactGraphSpec(0.5), rng))
    farm.state[:n_pigs] = np.where(rng.random(n_pigs) < 0.05, I, 0)
    rows = np.flatnonzero(farm.state == 0)
    mask = farm.infected_mask()
    results = {}
    for name, impl in sorted(kernels.BACKENDS.items()):
        out = np.empty(rows.size, dtype=np.int32)
        results[name] = (best_of(lambda: impl.count_infected_neighbors(farm.adj, mask, rows, out), repeats), out.copy())
    return results


def bench_simulate(n_farms, n_pigs, days):
    net = generate_network(n_farms, (n_pigs, n_pigs), 0.05, rng=1, shipment_prob_range=(0.0, 0.2))
    cfg = ScenarioConfig(net, days=days, seed=1, outbreaks=(OutbreakSeed(10, net.farm_ids[0]),))
    results = {}
    for name, impl in sorted(kernels.BACKENDS.items()):
        with mock.patch.multiple(kernels, count_infected_neighbors=impl.count_infected_neighbors, set_slot_edges=impl.set_slot_edges):
            t = time.perf_counter()
            series = simulate(cfg)
            results[name] = (time.perf_counter() - t, series)
    return results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pigs", type=int, default=2000)
    ap.add_argument("--farms", type=int, default=50)
    ap.add_argument("--days", type=int, default=100)
    args = ap.parse_args()
    if len(kernels.BACKENDS) < 2:
        print("compiled backend unavailable; only the numpy fallback is timed")

    counts = bench_count(args.pigs)
    print(f"count_infected_neighbors, {args.pigs} pigs:")
    for name, (secs, _) in counts.items():
        print(f"  {name:<9}{secs * 1e3:9.3f} ms")
    outs = [o for _, o in counts.values()]
    assert all(np.array_equal(outs[0], o) for o in outs), "backends disagree"

    sims = bench_simulate(args.farms, args.pigs, args.days)
    print(f"simulate, {args.farms} farms x {args.pigs} pigs x {args.days} days (includes graph sampling):")
    for name, (secs, _) in sims.items():
        print(f"  {name:<9}{secs:9.3f} s")
    series = [s for _, s in sims.values()]
    assert all(s == series[0] for s in series), "trajectories differ between backends"
    print("backends agree")


if __name__ == "__main__":
    main()
