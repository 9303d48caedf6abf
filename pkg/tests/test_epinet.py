import math

import numpy as np
import pytest

from epidmd.epinet import (
    ContactGraphSpec,
    FarmNetwork,
    OutbreakSeed,
    RANDOM,
    ScenarioConfig,
    SeirParams,
    SeirWorld,
    generate_network,
    sample_contact_graph,
    seed_outbreak,
    simulate,
    step_day,
)
from epidmd.epinet import kernels, rng as streams
from epidmd.epinet.world import E, EMPTY, I, R, S, FarmState
from epidmd.errors import ConfigError, InfectExceedsPopulation

BACKENDS = sorted(kernels.BACKENDS)


def single_farm(n, edge_prob=0.5, seed=0):
    return SeirWorld(FarmNetwork((("A", n),)), ContactGraphSpec(edge_prob), seed)


def chain_network(pops=(60, 50, 40), prob=0.5, size=3):
    ids = [f"f{i}" for i in range(len(pops))]
    edges = [(ids[i], ids[i + 1], prob, size) for i in range(len(ids) - 1)]
    return FarmNetwork(tuple(zip(ids, pops)), tuple(edges))


# --- networks and contact graphs ------------------------------------------------------


def test_network_single_farm_has_no_edges():
    assert generate_network(1, rng=0).edges == ()


def test_network_complete_digraph():
    net = generate_network(3, edge_density=1.0, rng=0)
    assert len(net.edges) == 6
    assert {(e.src, e.dst) for e in net.edges} == {(a, b) for a in net.farm_ids for b in net.farm_ids if a != b}


def test_network_deterministic():
    assert generate_network(20, (10, 90), 0.2, rng=42) == generate_network(20, (10, 90), 0.2, rng=42)
    assert generate_network(20, (10, 90), 0.2, rng=42) != generate_network(20, (10, 90), 0.2, rng=43)


@pytest.mark.parametrize(
    "farms,edges",
    [
        ((("a", 1), ("a", 2)), ()),
        ((("a", 1),), (("a", "b", 0.5, 1),)),
        ((("a", 1), ("b", 1)), (("a", "a", 0.5, 1),)),
        ((("a", 1), ("b", 1)), (("a", "b", 1.5, 1),)),
        ((("a", 0),), ()),
    ],
)
def test_network_invariants(farms, edges):
    with pytest.raises(ValueError):
        FarmNetwork(farms, edges)


def test_contact_graph_extremes():
    assert not sample_contact_graph(10, ContactGraphSpec(0.0), 1).any()
    g = sample_contact_graph(4, ContactGraphSpec(1.0), 1)
    assert np.triu(g, 1).sum() == 6
    assert not g.diagonal().any()


def test_contact_graph_edge_count_statistics():
    n, p, reps = 100, 0.5, 1000
    pairs = n * (n - 1) // 2
    gen = np.random.default_rng(123)
    counts = np.array([np.triu(sample_contact_graph(n, ContactGraphSpec(p), gen), 1).sum() for _ in range(reps)])
    se = math.sqrt(pairs * p * (1 - p)) / math.sqrt(reps)
    assert abs(counts.mean() - p * pairs) <= 3 * se


def test_contact_graph_symmetric_and_deterministic():
    g1 = sample_contact_graph(50, ContactGraphSpec(0.3), 9)
    g2 = sample_contact_graph(50, ContactGraphSpec(0.3), 9)
    np.testing.assert_array_equal(g1, g2)
    np.testing.assert_array_equal(g1, g1.T)


# --- kernels ------------------------------------------------------------------------------


@pytest.mark.parametrize("backend", BACKENDS)
def test_count_infected_neighbors_matches_dense(backend):
    impl = kernels.BACKENDS[backend]
    rng = np.random.default_rng(0)
    n = 150
    farm = FarmState("x", sample_contact_graph(n, ContactGraphSpec(0.4), rng))
    farm.state[:n] = rng.choice([S, E, I, R], size=n)
    _, dense = farm.dense_adjacency()
    rows = np.flatnonzero(farm.state == S)
    out = np.empty(rows.size, dtype=np.int32)
    impl.count_infected_neighbors(farm.adj, farm.infected_mask(), rows, out)
    expected = dense[rows][:, farm.state[:n] == I].sum(axis=1)
    np.testing.assert_array_equal(out, expected)


@pytest.mark.parametrize("backend", BACKENDS)
def test_set_slot_edges_keeps_symmetry(backend):
    impl = kernels.BACKENDS[backend]
    rng = np.random.default_rng(1)
    farm = FarmState("x", sample_contact_graph(100, ContactGraphSpec(0.5), rng))
    for slot in (0, 63, 64, 99, 120):
        bits = (rng.random(farm.capacity) < 0.5).view(np.uint8)
        impl.set_slot_edges(farm.adj, slot, bits)
        full = np.unpackbits(farm.adj.view(np.uint8), axis=1, bitorder="little").astype(bool)
        np.testing.assert_array_equal(full, full.T)
        assert not full[slot, slot]
        expect = bits.astype(bool).copy()
        expect[slot] = False
        np.testing.assert_array_equal(full[slot], expect)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
def test_backends_agree_on_random_inputs():
    rng = np.random.default_rng(2)
    adj = rng.integers(0, 2**63, size=(300, 5), dtype=np.uint64)
    mask = rng.integers(0, 2**63, size=5, dtype=np.uint64)
    rows = np.sort(rng.choice(300, 120, replace=False)).astype(np.intp)
    outs = []
    for b in BACKENDS:
        out = np.empty(rows.size, dtype=np.int32)
        kernels.BACKENDS[b].count_infected_neighbors(adj, mask, rows, out)
        outs.append(out)
    np.testing.assert_array_equal(*outs)


# --- seeding -----------------------------------------------------------------------------


def test_seed_entire_farm():
    w = single_farm(30)
    seed_outbreak(w, OutbreakSeed(30, "A"))
    assert tuple(w.counts()[0]) == (0, 0, 30, 0)


def test_seed_rejects_zero_and_excess():
    with pytest.raises(ValueError):
        OutbreakSeed(0, "A")
    with pytest.raises(InfectExceedsPopulation):
        seed_outbreak(single_farm(10), OutbreakSeed(11, "A"))


def test_seed_random_farm_replay():
    net = generate_network(12, (20, 40), 0.1, rng=3)

    def chosen(seed):
        w = SeirWorld(net, rng_seed=seed)
        seed_outbreak(w, OutbreakSeed(2, RANDOM))
        return int(np.argmax(w.counts()[:, I]))

    assert chosen(5) == chosen(5)
    assert len({chosen(s) for s in range(40)}) > 1


# --- daily step ----------------------------------------------------------------------------


def test_step_without_infection_only_advances_day():
    w = single_farm(40)
    before = w.farms[0].state.copy()
    step_day(w, SeirParams(beta=0.0))
    np.testing.assert_array_equal(w.farms[0].state, before)
    assert w.day == 1


def test_certain_transmission_on_complete_graph():
    w = single_farm(25, edge_prob=1.0)
    seed_outbreak(w, OutbreakSeed(1, "A"))
    step_day(w, SeirParams(beta=1.0, sigma_days=1e9, gamma_days=1e9))
    s, e, i, r = w.counts()[0]
    assert (s, e, i + r) == (0, 24, 1)


def test_transmission_probability_on_small_farm():
    # 1 - (1 - beta)^Y enumerated over the fixed graph vs empirical S->E frequency.
    params = SeirParams()
    w = single_farm(300, seed=4)
    seed_outbreak(w, OutbreakSeed(6, "A"))
    slots, dense = w.farms[0].dense_adjacency()
    state = w.farms[0].state[slots]
    y = dense[state == S][:, state == I].sum(axis=1)
    p = 1 - (1 - params.beta) ** y
    reps = 400
    hits = 0
    for k in range(reps):
        trial = w.copy(rng_seed=10_000 + k)
        step_day(trial, params)
        hits += int(trial.counts()[0, E])
    se = math.sqrt(np.sum(p * (1 - p))) / (p.size * math.sqrt(reps))
    assert abs(hits / (reps * p.size) - p.mean()) <= 3 * se


def test_stage_probabilities_duration_and_rate():
    assert SeirParams().p_onset == pytest.approx(1 / 7)
    assert SeirParams().p_recover == pytest.approx(1 / 6.5)
    rate = SeirParams(stage_parameters="rate")
    assert rate.p_onset == pytest.approx(1 - math.exp(-7))
    with pytest.raises(ValueError):
        SeirParams(beta=1.2)


def test_synchronous_update_moves_one_stage_per_day():
    w = single_farm(50, edge_prob=1.0)
    seed_outbreak(w, OutbreakSeed(1, "A"))
    step_day(w, SeirParams(beta=1.0, sigma_days=1.0, gamma_days=1e9))
    # Newly exposed pigs cannot also become infectious on the same day.
    assert tuple(w.counts()[0]) == (0, 49, 1, 0)


def test_shipments_preserve_states_and_total():
    net = chain_network(prob=1.0, size=5)
    w = SeirWorld(net, rng_seed=1)
    seed_outbreak(w, OutbreakSeed(20, "f0"), 0)
    frozen = SeirParams(beta=0.0, sigma_days=1e12, gamma_days=1e12)
    totals = w.counts().sum(axis=0)
    for _ in range(5):
        step_day(w, frozen)
        np.testing.assert_array_equal(w.counts().sum(axis=0), totals)
    pops = [f.population for f in w.farms]
    assert pops == [60 - 25, 50, 40 + 25]


def test_arrivals_attach_with_edge_probability():
    net = FarmNetwork((("src", 400), ("dst", 40)), (("src", "dst", 1.0, 20),))
    w = SeirWorld(net, ContactGraphSpec(0.3), rng_seed=2)
    for _ in range(10):
        step_day(w, SeirParams(beta=0.0))
    slots, dense = w.farm("dst").dense_adjacency()
    n = slots.size
    assert n == 240
    density = np.triu(dense, 1).sum() / (n * (n - 1) / 2)
    se = math.sqrt(0.3 * 0.7 / (n * (n - 1) / 2))
    assert abs(density - 0.3) <= 4 * se
    np.testing.assert_array_equal(dense, dense.T)


def test_shipment_underflow_is_clamped():
    net = FarmNetwork((("a", 3), ("b", 5)), (("a", "b", 1.0, 10),))
    w = SeirWorld(net, rng_seed=0)
    step_day(w, SeirParams())
    assert [f.population for f in w.farms] == [0, 8]
    assert w.underflow_events == 1
    step_day(w, SeirParams())
    assert w.underflow_events == 2


def test_arrived_pigs_are_not_reshipped_same_day():
    net = FarmNetwork((("a", 5), ("b", 1), ("c", 1)), (("a", "b", 1.0, 5), ("b", "c", 1.0, 6)))
    w = SeirWorld(net, rng_seed=0)
    step_day(w, SeirParams(beta=0.0))
    assert [f.population for f in w.farms] == [0, 5, 2]


def test_farm_capacity_grows():
    net = FarmNetwork((("a", 500), ("b", 2)), (("a", "b", 1.0, 100),))
    w = SeirWorld(net, rng_seed=0)
    cap = w.farm("b").capacity
    for _ in range(3):
        step_day(w, SeirParams(beta=0.0))
    assert w.farm("b").population == 302 and w.farm("b").capacity > cap
    slots, dense = w.farm("b").dense_adjacency()
    np.testing.assert_array_equal(dense, dense.T)


# --- long-run invariants ------------------------------------------------------------------------


def test_conservation_and_monotone_recovery():
    net = generate_network(8, (40, 120), 0.3, rng=5, shipment_prob_range=(0.2, 0.8), shipment_size_range=(1, 6))
    w = SeirWorld(net, rng_seed=5)
    seed_outbreak(w, OutbreakSeed(4, net.farm_ids[0]))
    total = w.total_population()
    last_r, last_ever = 0, w.ever_infected
    for _ in range(120):
        step_day(w, SeirParams())
        c = w.counts()
        assert c.sum() == total
        assert c[:, R].sum() >= last_r
        assert w.ever_infected >= last_ever
        for f, farm in zip(c, w.farms):
            assert f.sum() == farm.population
        last_r, last_ever = c[:, R].sum(), w.ever_infected
    assert w.ever_infected == c[:, I].sum() + c[:, R].sum()


def test_absorption_without_transmission():
    w = single_farm(200)
    w.farms[0].state[:50] = E
    w.farms[0].state[50:100] = I
    for _ in range(200):
        step_day(w, SeirParams(beta=0.0))
    c = w.counts()[0]
    assert c[E] == 0 and c[I] == 0 and c[R] == 100


def test_no_spontaneous_infection_in_disconnected_component():
    farms = (("a", 60), ("b", 60), ("c", 60), ("d", 60))
    edges = (("a", "b", 0.9, 5), ("c", "d", 0.9, 5), ("d", "c", 0.9, 5))
    net = FarmNetwork(farms, edges)
    assert net.reachable_from("a") == {"a", "b"}
    cfg = ScenarioConfig(net, SeirParams(), ContactGraphSpec(), days=150, seed=3, outbreaks=(OutbreakSeed(5, "a"),))
    s = simulate(cfg)
    assert s.values[:, 2:].max() == 0
    assert s.values[:, 0].max() > 0


def test_all_recovered_gives_zero_series():
    net = chain_network()
    w = SeirWorld(net, rng_seed=0)
    for f in w.farms:
        f.state[f.state != EMPTY] = R
    cfg = ScenarioConfig(net, days=30, seed=0)
    s = simulate(cfg, world=w)
    assert s.T == 30 and not s.values.any()


def test_single_day_observable_trace():
    net = chain_network(prob=0.0)
    cfg = ScenarioConfig(net, SeirParams(beta=0.0), days=1, seed=17, outbreaks=(OutbreakSeed(5, "f0"),))
    s = simulate(cfg)
    # Replay the farm's disease stream: an infected slot recovers when its uniform < 1/6.5.
    w = SeirWorld(net, rng_seed=17)
    seed_outbreak(w, cfg.outbreaks[0], streams.substream(17, streams.SEED_OUTBREAK, 0, 0))
    u = streams.substream(17, streams.DISEASE, 0, 0).random(w.farms[0].capacity)
    infected = np.flatnonzero(w.farms[0].state == I)
    expected = 5 - int(np.sum(u[infected] < 1 / 6.5))
    np.testing.assert_array_equal(s.values[0], [expected, 0, 0])
    assert s.t0 == 1


def test_single_day_observable_mean():
    net = chain_network(prob=0.0)
    rows = []
    for seed in range(600):
        cfg = ScenarioConfig(net, SeirParams(beta=0.0), days=1, seed=seed, outbreaks=(OutbreakSeed(5, "f0"),))
        rows.append(simulate(cfg).values[0, 0])
    p = 1 / 6.5
    se = math.sqrt(5 * p * (1 - p) / len(rows))
    assert abs(np.mean(rows) - 5 * (1 - p)) <= 3 * se


@pytest.mark.parametrize("observable", ["S", "E", "I", "R", "new_infections"])
def test_determinism_and_thread_independence(observable):
    net = generate_network(10, (30, 80), 0.2, rng=8, shipment_prob_range=(0.1, 0.5))
    cfg = ScenarioConfig(net, days=60, seed=11, observable=observable, outbreaks=(OutbreakSeed(3, net.farm_ids[0]),))
    a = simulate(cfg)
    b = simulate(cfg)
    c = simulate(cfg, threads=4)
    assert a == b == c


def test_new_infections_sum_matches_exposures():
    net = chain_network(prob=0.3)
    base = dict(network=net, days=40, seed=2, outbreaks=(OutbreakSeed(3, "f0"),))
    incidence = simulate(ScenarioConfig(observable="new_infections", **base))
    w = SeirWorld(net, rng_seed=2)
    seed_outbreak(w, OutbreakSeed(3, "f0"), streams.substream(2, streams.SEED_OUTBREAK, 0, 0))
    simulate(ScenarioConfig(**base), world=w)
    c = w.counts().sum(axis=0)
    assert incidence.values.sum() == c[E] + c[I] + c[R] - 3


def test_resample_daily_is_deterministic():
    net = chain_network()
    cfg = ScenarioConfig(
        net, contact=ContactGraphSpec(0.5, resample_daily=True), days=20, seed=1, outbreaks=(OutbreakSeed(3, "f0"),)
    )
    assert simulate(cfg) == simulate(cfg, threads=3)


# --- configuration -----------------------------------------------------------------------------


def base_config():
    return {
        "farms": [{"id": "a", "population": 30}, {"id": "b", "population": 20}],
        "edges": [{"src": "a", "dst": "b", "prob": 0.5, "size": 2}],
        "beta": 0.087,
        "sigma_days": 7,
        "gamma_days": 6.5,
        "days": 10,
        "seed": 1,
        "outbreak": {"farm_id": "a", "n_initial_infected": 2},
    }


def test_config_round():
    cfg = ScenarioConfig.from_dict(base_config())
    assert cfg.params == SeirParams() and cfg.days == 10 and cfg.observable == "I"
    assert cfg.outbreaks == (OutbreakSeed(2, "a"),)
    assert ScenarioConfig.from_dict(base_config(), seed=9).seed == 9


@pytest.mark.parametrize(
    "mutate,path",
    [
        (lambda c: c.pop("beta"), "config.beta"),
        (lambda c: c.update(beta=2), "config.beta"),
        (lambda c: c.update(sigma_days=0), "config.sigma_days"),
        (lambda c: c.pop("days"), "config.days"),
        (lambda c: c["farms"][1].pop("population"), "config.farms[1].population"),
        (lambda c: c["edges"][0].update(prob="x"), "config.edges[0].prob"),
        (lambda c: c.update(observable="Q"), "config.observable"),
        (lambda c: c["outbreak"].update(farm_id="zz"), "config.outbreak.farm_id"),
    ],
)
def test_config_errors_name_field(mutate, path):
    cfg = base_config()
    mutate(cfg)
    with pytest.raises(ConfigError) as err:
        ScenarioConfig.from_dict(cfg)
    assert err.value.path == path


def test_config_generate_block():
    cfg = base_config()
    del cfg["farms"], cfg["edges"], cfg["outbreak"]
    cfg["generate"] = {"n_farms": 5, "population_range": [10, 20], "edge_density": 0.5}
    a = ScenarioConfig.from_dict(cfg)
    assert len(a.network.farms) == 5
    assert a.network == ScenarioConfig.from_dict(cfg).network
