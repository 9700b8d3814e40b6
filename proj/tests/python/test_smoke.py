import math
from pathlib import Path

import numpy as np
import pytest

import netmoe

REPO_ROOT = Path(__file__).resolve().parents[2]


def quick_tc(epochs=3):
    tc = netmoe.TrainConfig.desk()
    tc.epochs = epochs
    return tc


def test_units_and_config():
    assert netmoe.dbm_to_watts(34.0) == pytest.approx(2.51189, abs=1e-5)
    cfg = netmoe.SystemConfig.defaults()
    assert cfg.num_users == 4 and cfg.num_antennas == 4
    cfg.validate()
    assert isinstance(cfg.digest(), int)
    loaded = netmoe.SystemConfig.load(str(REPO_ROOT / "data/default_config.json"))
    assert loaded.digest() == cfg.digest()


def test_state_generation_shapes():
    cfg = netmoe.SystemConfig.defaults()
    state = netmoe.generate_state(cfg, seed=11)
    assert state.h_true.shape == (4, 4)
    assert state.h_true.dtype == np.complex128
    assert state.omega_true.shape == (4,)
    col_norms = np.linalg.norm(state.beamformer, axis=0)
    np.testing.assert_allclose(col_norms, 1.0, rtol=1e-12)
    # same seed, same draw
    again = netmoe.generate_state(cfg, seed=11)
    np.testing.assert_array_equal(state.h_true, again.h_true)


def test_registry_and_training_roundtrip(tmp_path):
    cfg = netmoe.SystemConfig.defaults()
    reg = netmoe.registry_build(cfg, quick_tc())
    assert len(reg) == 30
    assert reg[0].name == "Comm_SumR_Reg"
    assert reg[23].name == "JCC_MaxT_Rob"
    assert not reg[0].trained

    loss = netmoe.train_expert(reg[0], quick_tc(), cfg, seed=5)
    assert math.isfinite(loss)
    assert reg[0].trained
    assert len(reg[0].loss_trace) == 3

    path = tmp_path / "expert.bin"
    netmoe.save_expert(reg[0], str(path))
    loaded = netmoe.load_expert(str(path), cfg)
    state = netmoe.generate_state(cfg, seed=3)
    a = netmoe.infer(reg[0], state, cfg)
    b = netmoe.infer(loaded, state, cfg)
    np.testing.assert_array_equal(a.p_tx, b.p_tx)


def test_inference_metrics_and_feasibility():
    cfg = netmoe.SystemConfig.defaults()
    reg = netmoe.registry_build(cfg, quick_tc())
    netmoe.train_expert(reg[0], quick_tc(), cfg, seed=5)
    state = netmoe.generate_state(cfg, seed=3)
    alloc = netmoe.infer(reg[0], state, cfg)
    assert alloc.kind == "comm"
    report = netmoe.check_feasibility(alloc, cfg)
    assert report.feasible
    m = netmoe.joint_metrics(state, alloc, cfg, use_true=True)
    np.testing.assert_allclose(m.r_joint, np.asarray(m.r_tx) + np.asarray(m.r_co))
    value = netmoe.evaluate_utility(reg[0].spec, m)
    assert value == pytest.approx(np.sum(m.r_tx))
    robust = netmoe.robust_utility(reg[1].spec, state, alloc, cfg, 0.05, seed=9)
    assert math.isfinite(robust)
    assert robust <= np.sum(m.r_tx) * 1.5  # same order of magnitude


def test_gate_decide_and_combine():
    cfg = netmoe.SystemConfig.defaults()
    reg = netmoe.registry_build(cfg, quick_tc())
    for idx in (1, 19):
        netmoe.train_expert(reg[idx - 1], quick_tc(), cfg, seed=idx)
    cards = [netmoe.make_expert_card(reg[i - 1]) for i in (1, 19)]
    backend = netmoe.make_rule_backend()
    decision = netmoe.decide(
        backend,
        cards,
        "Maximize the wireless sum rate and minimize the worst-user "
        "transmission delay under perfect channel state information.",
    )
    assert sorted(decision.names) == ["Comm_MaxT_Reg", "Comm_SumR_Reg"]
    assert decision.weights == pytest.approx([0.5, 0.5])

    state = netmoe.generate_state(cfg, seed=2)
    members = [netmoe.infer(reg[i - 1], state, cfg) for i in (1, 19)]
    blended = netmoe.combine(decision, members, cfg)
    assert netmoe.check_feasibility(blended, cfg).feasible

    with pytest.raises(netmoe.GateError):
        netmoe.decide(backend, cards, "hello there")


def test_sim_set_spec_loads():
    spec = netmoe.SimSetSpec.load(str(REPO_ROOT / "data/sets/set1.json"))
    spec.validate()
    assert spec.id == 1
    assert len(spec.library) == 16
    assert spec.x_metric.name == "Comm_MaxT_Reg"
    assert netmoe.display_unit(spec.x_metric) == "log10(s)"


def test_replay_backend_and_fixtures():
    store = str(REPO_ROOT / "data/replay_store.json")
    backend = netmoe.make_replay_backend(store)
    cfg = netmoe.SystemConfig.defaults()
    reg = netmoe.registry_build(cfg, quick_tc())
    cards = [netmoe.make_expert_card(r) for r in reg]
    fixtures = netmoe.load_fixtures(str(REPO_ROOT / "data/recorded_fixtures.json"))
    report = netmoe.evaluate_gate_accuracy(backend, cards, fixtures)
    assert report.total == 5
    assert report.selection_exact == 4
    assert report.failures == 1
