from fractions import Fraction

import pytest

from app.errors import MachineError
from app.services.compiler import build_rs_network, compile_scm, network_stats, normalize_loads, relabel_servers
from app.services.counter_machine import SCM, copier_scm, ramp_scm, random_scm
from app.services.network import ArrivalProcess, load_factors, validate_network
from app.services.verification import audit_loads

F = Fraction


def test_incrementer_network_size(compiled_incrementer):
    stats = network_stats(compiled_incrementer)
    assert (stats.servers, stats.classes) == (14, 38)
    assert set(stats.groups) == {"SN1", "SN2", "MN"}


@pytest.mark.parametrize("scm", [copier_scm(2), random_scm(3, 3), ramp_scm(4)], ids=["copier", "random", "ramp"])
def test_unnormalized_size_formula(scm):
    cn = compile_scm(scm)
    assert len(cn.spec.server_ids) == 2 * scm.m + 12
    assert len(cn.spec.classes) == 10 * scm.m + 28
    assert cn.m == scm.m


def test_cycle_arrival_attached_to_i33(compiled_incrementer):
    c = compiled_incrementer.spec.by_id[compiled_incrementer.cid("SN1.i33")]
    assert c.arrival == ArrivalProcess(F(3), F(27, 10))
    assert c.next_class == "011"
    assert compiled_incrementer.spec.by_id["233"].next_class == "012"


def test_increment_routes_to_i51(compiled_incrementer):
    cn = compiled_incrementer
    assert cn.spec.by_id[cn.cid("MN.4j3[1]")].next_class == cn.cid("SN1.i51")
    assert cn.spec.by_id[cn.cid("SN1.i51")].next_class == cn.cid("SN1.i11")


def test_neutral_update_exits(idle):
    cn = compile_scm(idle)
    assert cn.spec.by_id[cn.cid("MN.4j3[1]")].next_class is None


def test_chain_links_sit_at_successor_states(oscillator):
    cn = compile_scm(oscillator)
    for j, state in enumerate(oscillator.states, start=1):
        successor = oscillator.index(oscillator.alpha[(state, 0, 0)])
        link = cn.spec.by_id[cn.cid(f"MN.3k4[k={j}]")]
        assert link.server_id == f"S3.{successor}"
        assert link.next_class is None


def test_initial_job_in_initial_state_class(compiled_incrementer):
    assert compiled_incrementer.init.in_service == (("02.1", F(271, 100)),)


def test_compiled_network_validates(compiled_oscillator):
    assert validate_network(compiled_oscillator.spec) is compiled_oscillator.spec


def test_unnormalized_loads(compiled_incrementer):
    loads = load_factors(compiled_incrementer.spec)
    assert loads["S11"] == F(1, 2)
    assert loads["S13"] == F(61, 150)
    assert loads["S02"] == F(271, 300)


def test_unnormalized_crossing_server_overloads_with_three_increments():
    loads = audit_loads(compile_scm(ramp_scm(3)).spec)
    assert loads["S12"].load == 1
    assert not loads["S12"].ok


def test_normalized_size_formula(oscillator):
    cn = compile_scm(oscillator, normalized=True)
    m, l1, l2 = 2, 1, 0
    assert len(cn.spec.server_ids) == 4 * m * m + 2 * m + 11
    assert len(cn.spec.classes) == 20 * m * m + 5 * m + 30 + l1 + l2
    assert cn.normalized
    assert cn.gating_width(1) == 1
    assert cn.gating_width(2) == 0


@pytest.mark.parametrize("scm", [ramp_scm(4), copier_scm(2), random_scm(11, 3)], ids=["ramp", "copier", "random"])
def test_normalized_loads_below_one(scm):
    audit = audit_loads(compile_scm(scm, normalized=True).spec)
    assert all(a.ok for a in audit.values()), {sid: a.load for sid, a in audit.items() if not a.ok}


def test_normalized_gating_and_state_servers(copier):
    cn = compile_scm(copier, normalized=True)
    m = copier.m
    loads = load_factors(cn.spec)
    eps = F(1, 200 * m)
    assert loads["G1"] == 2 * F(1, 3) * eps + F(1, 100) + F(1, 300)
    assert loads["S02.1"] == F(271, 300)
    assert "S15" not in loads
    i41 = cn.spec.by_id[cn.cid("SN1.i41")]
    assert i41.service_time == F(1, 5) / m


def test_normalize_is_idempotent(compiled_oscillator):
    once = normalize_loads(compiled_oscillator)
    assert normalize_loads(once) is once


def test_stage_chain_reaches_dispatch(oscillator):
    cn = compile_scm(oscillator, normalized=True)
    stages = 4 * oscillator.m
    entry = cn.spec.by_id[cn.cid("MN.3k5[k=1].stage[1]")]
    assert entry.arrival is not None
    last = cn.spec.by_id[cn.cid(f"MN.3k5[k=1].stage[{stages}]")]
    assert last.next_class == cn.cid("MN.4j1[1]")
    assert cn.spec.by_id[cn.cid("MN.03j[1]")].next_class == cn.cid("MN.3k1[k=1].stage[1]")


def test_relabel_servers_keeps_classes(compiled_oscillator):
    mapping = {sid: f"X{k}" for k, sid in enumerate(reversed(compiled_oscillator.spec.server_ids))}
    moved = relabel_servers(compiled_oscillator, mapping)
    assert len(moved.spec.server_ids) == len(compiled_oscillator.spec.server_ids)
    assert moved.directory == compiled_oscillator.directory
    assert {c.class_id for c in moved.spec.classes} == {c.class_id for c in compiled_oscillator.spec.classes}


def test_rs_network():
    cn = build_rs_network(3)
    assert sorted(cn.spec.by_id) == ["111", "112", "121", "122"]
    assert cn.init.queued == {"121": 3}
    assert cn.m == 0
    assert build_rs_network(0).init.queued == {}
    with pytest.raises(ValueError):
        build_rs_network(-1)


def test_compile_rejects_invalid_machine(oscillator):
    broken = SCM(oscillator.states, {}, oscillator.beta, oscillator.initial)
    with pytest.raises(MachineError) as info:
        compile_scm(broken)
    assert info.value.exit_code == 6
