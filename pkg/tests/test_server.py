"""Reader-side registry: enrollment material, prediction, session draws,
comparison, and persistence."""

import numpy as np
import pytest

from conftest import make_device
from dualpuf.device import serialize_response
from dualpuf.errors import (
    IncompleteTable,
    MissingEntry,
    WidthMismatch,
    ZeroSeed,
)
from dualpuf.server import (
    DEFAULT_T_RANGE,
    MODEL_MODE,
    TABLE_MODE,
    ServerRegistry,
    compare,
    default_tau,
    gen_session,
    load_crp_table,
    load_registry,
    predict_response,
    register_from_ttp,
    save_crp_table,
    save_registry,
    table_lookup,
)


def table_registry(dev, **kwargs):
    return register_from_ttp(
        dev.raw_crp_table(), dev.config.lane_pairs, tau=0, **kwargs
    )


def model_registry(dev, **kwargs):
    return register_from_ttp(list(dev.lanes), dev.config.lane_pairs, tau=0, **kwargs)


def test_default_tau():
    assert default_tau(64, 0.0) == 0
    assert default_tau(64, 0.5) == 7
    assert default_tau(10, 0.1) == 1


def test_default_t_range_is_parity_balanced_and_wire_safe():
    t_min, t_max = DEFAULT_T_RANGE
    assert (t_min, t_max) == (2, 17)
    values = list(range(t_min, t_max + 1))
    assert sum(v % 2 for v in values) * 2 == len(values)


def test_registry_validation():
    dev = make_device(k=2)
    table = dev.raw_crp_table()
    good = dict(
        k=2, n_stages=8, lane_pairs=dev.config.lane_pairs, rng_seed=0,
        t_range=(2, 17),
    )
    with pytest.raises(ValueError):
        ServerRegistry(mode="nonsense", tau=0, **good)
    with pytest.raises(ValueError):
        register_from_ttp(table, dev.config.lane_pairs, tau=2)  # tau >= k
    with pytest.raises(ValueError):
        register_from_ttp(table, dev.config.lane_pairs, tau=0, t_range=(0, 4))
    with pytest.raises(WidthMismatch):
        register_from_ttp(list(dev.lanes[:1]), dev.config.lane_pairs, tau=0)


def test_register_table_mode_requires_full_coverage():
    dev = make_device(k=2)
    table = dev.raw_crp_table()
    registry = register_from_ttp(table, dev.config.lane_pairs, tau=0)
    assert registry.mode == TABLE_MODE
    del table[137]
    with pytest.raises(IncompleteTable):
        register_from_ttp(table, dev.config.lane_pairs, tau=0)


def test_table_and_model_modes_agree():
    dev = make_device()
    by_table = table_registry(dev)
    by_model = model_registry(dev)
    assert (by_table.mode, by_model.mode) == (TABLE_MODE, MODEL_MODE)
    rng = np.random.default_rng(7)
    for _ in range(100):
        challenge = int(rng.integers(1, 256))
        mode = int(rng.integers(0, 2))
        assert np.array_equal(
            predict_response(by_table, challenge, mode),
            predict_response(by_model, challenge, mode),
        )


def test_prediction_matches_the_tag():
    dev = make_device()
    registry = model_registry(dev)
    rng = np.random.default_rng(9)
    for _ in range(200):
        challenge = int(rng.integers(1, 256))
        mode = int(rng.integers(0, 2))
        assert np.array_equal(
            predict_response(registry, challenge, mode), dev.respond(challenge, mode)
        )


def test_prediction_rejects_out_of_range():
    registry = model_registry(make_device())
    for bad in (0, 1 << 8):
        with pytest.raises(ZeroSeed):
            predict_response(registry, bad, 1)


def test_gen_session_bounds_and_determinism():
    dev = make_device()
    a = table_registry(dev, rng_seed=42)
    b = table_registry(dev, rng_seed=42)
    draws = [gen_session(a) for _ in range(300)]
    assert draws == [gen_session(b) for _ in range(300)]
    for c1, c2, t in draws:
        assert 1 <= c1 < 256 and 1 <= c2 < 256
        assert 2 <= t <= 17


def test_gen_session_tick_gap_parity_is_balanced():
    registry = table_registry(make_device(), rng_seed=3, t_range=(1, 16))
    odd = sum(gen_session(registry)[2] % 2 for _ in range(6000))
    assert abs(odd / 6000 - 0.5) < 0.025  # 3-sigma binomial band is 0.019


def test_compare_thresholds():
    base = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
    one_off = base.copy()
    one_off[3] ^= 1
    assert compare(base, base, 0) == 1
    assert compare(base, one_off, 0) == 0
    assert compare(base, one_off, 1) == 1
    with pytest.raises(WidthMismatch):
        compare(base, base[:4], 0)


def test_table_lookup():
    dev = make_device(k=3)
    raw = {c: dev.raw_crp_query(c) for c in (1, 99, 255)}
    registry = table_registry(dev)
    for challenge, bits in raw.items():
        assert np.array_equal(table_lookup(registry, challenge), bits)
    for bad in (0, 256):
        with pytest.raises(MissingEntry):
            table_lookup(registry, bad)
    with pytest.raises(MissingEntry):
        table_lookup(model_registry(make_device()), 5)


def test_registry_persistence_round_trip(tmp_path):
    dev = make_device()
    for build, name in ((table_registry, "t.json"), (model_registry, "m.json")):
        registry = build(dev, rng_seed=11)
        path = tmp_path / name
        save_registry(registry, str(path))
        back = load_registry(str(path))
        assert (back.mode, back.k, back.n_stages) == (
            registry.mode, registry.k, registry.n_stages,
        )
        assert back.lane_pairs == registry.lane_pairs
        assert (back.tau, back.t_range, back.voter_t) == (
            registry.tau, registry.t_range, registry.voter_t,
        )
        if registry.mode == TABLE_MODE:
            assert np.array_equal(back.table, registry.table)
        else:
            assert np.array_equal(back.weights, registry.weights)
            assert np.array_equal(back.offsets, registry.offsets)
        rng = np.random.default_rng(1)
        for _ in range(50):
            challenge = int(rng.integers(1, 256))
            assert np.array_equal(
                predict_response(back, challenge, 1),
                predict_response(registry, challenge, 1),
            )
        # the reloaded generator restarts from the stored seed
        fresh = build(dev, rng_seed=11)
        assert [gen_session(back) for _ in range(20)] == [
            gen_session(fresh) for _ in range(20)
        ]


def test_crp_table_file_round_trip(tmp_path):
    dev = make_device(k=5)
    table = dev.raw_crp_table()
    path = tmp_path / "crps.txt"
    save_crp_table(table, str(path), n_stages=8, k=5)
    assert load_crp_table(str(path)) == table
    first = path.read_text().splitlines()[0].split()
    assert first[0] == "01" and len(first) == 2


def test_prediction_does_not_mutate_the_registry():
    registry = table_registry(make_device())
    snapshot = registry.table.copy()
    for challenge in (1, 50, 200):
        predict_response(registry, challenge, 1)
        predict_response(registry, challenge, 0)
    assert np.array_equal(registry.table, snapshot)
