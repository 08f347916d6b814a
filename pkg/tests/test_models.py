import json
from fractions import Fraction

import pytest

from app.errors import MachineError, ParseError
from app.models import SCMFile, parse_network, probe_spec, serialize_network
from app.services.compiler import build_rs_network, compile_scm
from app.services.counter_machine import copier_scm

F = Fraction

MINIMAL = {
    "name": "tiny",
    "classes": [
        {"id": "a", "server": "S", "service": "2.71", "priority": 1, "next": "b", "arrival": {"period": 3, "offset": "-1/100", "start_index": 1}},
        {"id": "b", "server": "T", "service": "1/2", "capacity": 0, "priority": 1},
    ],
    "initial": {"in_service": [{"class": "a", "remaining": "1"}]},
}


def dump(doc):
    return json.dumps(doc)


def test_parse_minimal_network():
    cn = parse_network(dump(MINIMAL))
    a, b = cn.spec.by_id["a"], cn.spec.by_id["b"]
    assert a.service_time == F(271, 100)
    assert a.capacity is None
    assert a.arrival.offset == F(-1, 100)
    assert a.arrival.start_index == 1
    assert b.zero_capacity
    assert cn.init.in_service == (("a", F(1)),)


@pytest.mark.parametrize(
    "path, value",
    [
        (("classes", 1, "capacity"), "-1"),
        (("classes", 1, "capacity"), -1),
        (("classes", 1, "service"), 0.5),
        (("classes", 1, "service"), "-1/2"),
        (("classes", 0, "arrival", "period"), "0"),
        (("classes", 0, "priority"), "high"),
    ],
)
def test_parse_rejects_bad_fields(path, value):
    doc = json.loads(dump(MINIMAL))
    target = doc
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
    with pytest.raises(ParseError) as info:
        parse_network(dump(doc), "net.json")
    assert info.value.path == "net.json"
    assert info.value.exit_code == 2


def test_parse_rejects_malformed_json():
    with pytest.raises(ParseError):
        parse_network("{not json")


def test_compiled_network_survives_serialization(copier):
    cn = compile_scm(copier, normalized=True)
    back = parse_network(serialize_network(cn))
    assert back.spec.classes == cn.spec.classes
    assert back.init == cn.init
    assert back.directory == cn.directory
    assert back.scm_state_index == cn.scm_state_index
    assert sorted(back.scm_state_index.values()) == list(range(1, cn.m + 1))
    assert back.normalized


def test_serialized_network_uses_class_alias():
    text = serialize_network(build_rs_network(1))
    doc = json.loads(text)
    assert doc["initial"]["queued"] == {"121": 1}
    assert serialize_network(compile_scm(copier_scm(1))).count('"class"') == 1


def test_scm_file_round_trip(oscillator):
    doc = SCMFile.from_machine(oscillator)
    assert SCMFile.model_validate_json(doc.model_dump_json()).to_machine() == oscillator


def test_scm_file_rejects_duplicate_alpha(oscillator):
    doc = SCMFile.from_machine(oscillator)
    doc.alpha.append(doc.alpha[0])
    with pytest.raises(MachineError):
        doc.to_machine()


def test_probe_spec():
    assert probe_spec("W:SN1.i12,SN1.i21@1/2") == (["SN1.i12", "SN1.i21"], F(1, 2))
    for bad in ("SN1.i12@1", "W:@1", "W:a@0", "W:a@soon"):
        with pytest.raises(ParseError):
            probe_spec(bad)
