"""Compile a simplified counter machine into a multiclass queueing network whose
stability matches the machine's boundedness, plus the load-normalizing
transform and the standalone crossing network used to encode one counter.

Class ids: subnetwork i (one per counter) uses "i" followed by the two-digit
table id ("112", "141", ...). The machine-state network uses "011", "012",
"02.j", "03.j", "3.j.k", "4.j.k". Gating classes are "gi.k" and stage classes
append "/s". `directory` maps readable names such as "SN1.i12",
"MN.02j[3]" or "MN.3k2[k=5]" to class ids.
"""

import logging
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Tuple

from .counter_machine import SCM
from .network import (
    ArrivalProcess,
    ClassSpec,
    InitialCondition,
    NetworkSpec,
    relabel,
    validate_network,
)

logger = logging.getLogger(__name__)

F = Fraction
CHAIN_LINKS = 4

# (suffix, server digit, service, capacity, priority, next suffix or marker)
# "exit" departs, "MN" routes to the state network's 01i class.
SN_CLASSES: Tuple[Tuple[str, int, Fraction, Optional[int], int, str], ...] = (
    ("11", 1, F(0), None, 2, "21"),
    ("12", 1, F(1, 2), None, 1, "exit"),
    ("13", 1, F(0), 0, 3, "31"),
    ("14", 1, F(0), 0, 4, "31"),
    ("21", 2, F(1, 2), None, 1, "exit"),
    ("22", 2, F(0), None, 2, "12"),
    ("23", 2, F(0), 0, 3, "31"),
    ("31", 3, F(1, 25), None, 2, "exit"),
    ("32", 3, F(11, 10), None, 1, "exit"),
    ("33", 3, F(0), 0, 3, "MN"),
    ("41", 4, F(1, 5), None, 1, "exit"),
    ("42", 4, F(0), 0, 2, "11"),
    ("51", 5, F(1, 50), None, 1, "11"),
)

# (target suffix, period, offset); every process starts at n = 0
SN_ARRIVALS: Tuple[Tuple[str, Fraction, Fraction], ...] = (
    ("22", F(1), F(0)),
    ("42", F(1), F(1, 50)),
    ("13", F(3), F(8, 5)),
    ("23", F(3), F(21, 10)),
    ("14", F(3), F(13, 5)),
    ("32", F(3), F(3, 2)),
    ("33", F(3), F(27, 10)),
)

MN_SHORT_SERVICE = F(9, 100)
MN_LONG_SERVICE = F(271, 100)
MN_DISPATCH_SERVICE = F(1, 50)

# chain link k sits at the state alpha(s_j, b1, b2) for these flags
CHAIN_FLAGS: Tuple[Tuple[int, int], ...] = ((1, 1), (0, 1), (1, 0), (0, 0))

# beta -> (subnetwork, suffix) of the counter-update class
UPDATE_TARGETS: Dict[Tuple[int, int], Tuple[int, str]] = {
    (-1, 0): (1, "41"),
    (1, 0): (1, "51"),
    (0, -1): (2, "41"),
    (0, 1): (2, "51"),
}

_GATE_KEY = re.compile(r"^SN(\d)\.g\[(\d+)\]$")


@dataclass(frozen=True)
class CompiledNetwork:
    spec: NetworkSpec
    init: InitialCondition
    directory: Dict[str, str]
    normalized: bool = False
    scm_state_index: Dict[str, int] = field(default_factory=dict)

    def cid(self, name: str) -> str:
        return self.directory[name]

    @property
    def m(self) -> int:
        return sum(1 for name in self.directory if name.startswith("MN.02j["))

    def sn_classes(self, i: int) -> FrozenSet[str]:
        prefix = f"SN{i}."
        return frozenset(cid for name, cid in self.directory.items() if name.startswith(prefix))

    @property
    def mn_classes(self) -> FrozenSet[str]:
        return frozenset(cid for name, cid in self.directory.items() if name.startswith("MN."))

    def rs_classes(self, i: int) -> FrozenSet[str]:
        return frozenset(self.directory[f"SN{i}.i{s}"] for s in ("11", "12", "21", "22"))

    def workload_classes(self, i: int) -> FrozenSet[str]:
        return frozenset((self.directory[f"SN{i}.i12"], self.directory[f"SN{i}.i21"]))

    def gating_width(self, i: int) -> int:
        """Number of gating classes fed by counter-increment routings (0 if not normalized)"""
        gates = [name for name in self.directory if (m := _GATE_KEY.match(name)) and int(m.group(1)) == i]
        return max(0, len(gates) - 2)

    def increment_classes(self, i: int) -> FrozenSet[str]:
        if self.normalized:
            return frozenset(self.directory[f"SN{i}.g[{k}]"] for k in range(1, self.gating_width(i) + 1))
        name = f"SN{i}.i51"
        return frozenset((self.directory[name],)) if name in self.directory else frozenset()

    def decrement_classes(self, i: int) -> FrozenSet[str]:
        name = f"SN{i}.i41"
        return frozenset((self.directory[name],)) if name in self.directory else frozenset()

    @property
    def counter_update_classes(self) -> FrozenSet[str]:
        out: FrozenSet[str] = frozenset()
        for i in (1, 2):
            out = out | self.increment_classes(i) | self.decrement_classes(i)
        return out

    def state_class(self, j: int) -> str:
        return self.directory[f"MN.02j[{j}]"]

    @property
    def state_classes(self) -> Dict[str, int]:
        """class id of each 02j -> j"""
        return {self.directory[f"MN.02j[{j}]"]: j for j in range(1, self.m + 1)}

    @property
    def dispatch_servers(self) -> Tuple[str, ...]:
        return tuple(self.spec.by_id[self.directory[f"MN.4j1[{j}]"]].server_id for j in range(1, self.m + 1))


@dataclass
class NetworkStats:
    servers: int
    classes: int
    groups: Dict[str, List[str]]


def _sn_classes(i: int, mn_target: str) -> Tuple[List[ClassSpec], Dict[str, str]]:
    arrivals = {suffix: ArrivalProcess(period, offset) for suffix, period, offset in SN_ARRIVALS}
    classes = []
    directory = {}
    for suffix, server, service, capacity, priority, nxt in SN_CLASSES:
        if nxt == "exit":
            next_class = None
        elif nxt == "MN":
            next_class = mn_target
        else:
            next_class = f"{i}{nxt}"
        cid = f"{i}{suffix}"
        classes.append(ClassSpec(cid, f"S{i}{server}", service, capacity, next_class, priority, arrivals.get(suffix)))
        directory[f"SN{i}.i{suffix}"] = cid
    return classes, directory


def compile_scm(scm: SCM, normalized: bool = False) -> CompiledNetwork:
    scm.validate()
    m = scm.m
    index = {s: scm.index(s) for s in scm.states}
    classes: List[ClassSpec] = []
    directory: Dict[str, str] = {}

    for i, target in ((1, "011"), (2, "012")):
        sn, names = _sn_classes(i, target)
        classes += sn
        directory.update(names)

    classes.append(ClassSpec("011", "S01", MN_SHORT_SERVICE, None, None, 1))
    classes.append(ClassSpec("012", "S01", 2 * MN_SHORT_SERVICE, None, None, 2))
    directory["MN.011"] = "011"
    directory["MN.012"] = "012"

    every_third = ArrivalProcess(F(3), F(0), start_index=1)
    for state in scm.states:
        j = index[state]
        chain = [f"3.{j}.{k}" for k in range(1, CHAIN_LINKS + 1)]
        classes.append(ClassSpec(f"02.{j}", "S02", MN_LONG_SERVICE, None, f"03.{j}", 1))
        classes.append(ClassSpec(f"03.{j}", "S01", F(0), None, chain[0], 3))
        for k, (b1, b2) in enumerate(CHAIN_FLAGS):
            host = index[scm.alpha[(state, b1, b2)]]
            nxt = chain[k + 1] if k + 1 < CHAIN_LINKS else None
            classes.append(ClassSpec(chain[k], f"S3.{host}", MN_SHORT_SERVICE, None, nxt, 1))
        classes.append(
            ClassSpec(f"3.{j}.5", f"S3.{j}", F(0), 0, f"4.{j}.1", 2, ArrivalProcess(F(3), F(-1, 100), start_index=1))
        )
        update = UPDATE_TARGETS.get(tuple(scm.beta[state]))
        if update is None and tuple(scm.beta[state]) != (0, 0):
            logger.debug(f"state {state} has unreachable delta {scm.beta[state]}; its update job exits")
        update_class = f"{update[0]}{update[1]}" if update else None
        classes.append(ClassSpec(f"4.{j}.1", f"S4.{j}", MN_DISPATCH_SERVICE, None, None, 1))
        classes.append(ClassSpec(f"4.{j}.2", f"S4.{j}", F(0), 0, f"02.{j}", 2, every_third))
        classes.append(ClassSpec(f"4.{j}.3", f"S4.{j}", F(0), 0, update_class, 3, every_third))
        directory[f"MN.02j[{j}]"] = f"02.{j}"
        directory[f"MN.03j[{j}]"] = f"03.{j}"
        for k in range(1, CHAIN_LINKS + 2):
            directory[f"MN.3k{k}[k={j}]"] = f"3.{j}.{k}"
        for k in range(1, 4):
            directory[f"MN.4j{k}[{j}]"] = f"4.{j}.{k}"

    spec = validate_network(NetworkSpec(name=f"scm-{m}", classes=tuple(classes)))
    init = InitialCondition(in_service=((f"02.{index[scm.initial]}", MN_LONG_SERVICE),))
    cn = CompiledNetwork(spec, init, directory, normalized=False, scm_state_index=index)
    logger.info(f"Compiled {m}-state machine into {len(spec.server_ids)} servers, {len(spec.classes)} classes")
    return normalize_loads(cn) if normalized else cn


def normalize_loads(cn: CompiledNetwork) -> CompiledNetwork:
    """Rework a compiled network so every server has load below one while
    keeping the status functions intact:

    * increment jobs go through a gating server G_i instead of i51;
    * i41 service shrinks by a factor m and i42 delays the feed by 1/50 itself;
    * S02 is split per state, and every S3.j into 4m chained stage servers.
    """
    if cn.normalized:
        return cn
    m = cn.m
    eps = F(1, 200 * m)
    classes: Dict[str, ClassSpec] = {c.class_id: c for c in cn.spec.classes}
    directory = dict(cn.directory)

    for i in (1, 2):
        i51 = directory.pop(f"SN{i}.i51")
        del classes[i51]
        feeders = sorted(
            (directory[name] for name in directory if name.startswith("MN.4j3[") and classes[directory[name]].next_class == i51),
            key=lambda cid: int(cid.split(".")[1]),
        )
        gate = f"G{i}"
        for k, src in enumerate(feeders, start=1):
            gid = f"g{i}.{k}"
            classes[gid] = ClassSpec(gid, gate, eps, 0, None, k)
            classes[src] = replace(classes[src], next_class=gid)
            directory[f"SN{i}.g[{k}]"] = gid
        width = len(feeders)
        blocker, opener = f"g{i}.{width + 1}", f"g{i}.{width + 2}"
        classes[blocker] = ClassSpec(blocker, gate, F(3, 100), 0, None, width + 1, ArrivalProcess(F(3), F(0), 1))
        classes[opener] = ClassSpec(
            opener, gate, F(1, 100), 0, directory[f"SN{i}.i11"], width + 2, ArrivalProcess(F(3), F(1, 100), 1)
        )
        directory[f"SN{i}.g[{width + 1}]"] = blocker
        directory[f"SN{i}.g[{width + 2}]"] = opener

        i41, i42 = directory[f"SN{i}.i41"], directory[f"SN{i}.i42"]
        classes[i41] = replace(classes[i41], service_time=classes[i41].service_time / m)
        classes[i42] = replace(classes[i42], service_time=F(1, 50), arrival=ArrivalProcess(F(1), F(0)))

    for j in range(1, m + 1):
        cid = directory[f"MN.02j[{j}]"]
        classes[cid] = replace(classes[cid], server_id=f"S02.{j}")

    stages = CHAIN_LINKS * m
    entry: Dict[str, str] = {}
    split = [c for c in classes.values() if c.server_id.startswith("S3.")]
    for c in split:
        entry[c.class_id] = f"{c.class_id}/1"
    for c in split:
        del classes[c.class_id]
        name = next(n for n, v in directory.items() if v == c.class_id)
        del directory[name]
        for s in range(1, stages + 1):
            sid = f"{c.class_id}/{s}"
            if s < stages:
                nxt = f"{c.class_id}/{s + 1}"
            else:
                nxt = entry.get(c.next_class, c.next_class)
            classes[sid] = ClassSpec(
                sid,
                f"{c.server_id}.{s}",
                c.service_time / stages,
                c.capacity,
                nxt,
                c.priority,
                c.arrival if s == 1 else None,
            )
            directory[f"{name}.stage[{s}]"] = sid
    for cid, c in list(classes.items()):
        if c.next_class in entry:
            classes[cid] = replace(c, next_class=entry[c.next_class])

    spec = validate_network(NetworkSpec(name=f"{cn.spec.name}-normalized", classes=tuple(classes.values())))
    logger.info(f"Normalized network: {len(spec.server_ids)} servers, {len(spec.classes)} classes")
    return CompiledNetwork(spec, cn.init, directory, normalized=True, scm_state_index=dict(cn.scm_state_index))


def network_stats(cn: CompiledNetwork) -> NetworkStats:
    groups: Dict[str, List[str]] = {}
    for name in sorted(cn.directory):
        groups.setdefault(name.split(".", 1)[0], []).append(name)
    return NetworkStats(len(cn.spec.server_ids), len(cn.spec.classes), groups)


def relabel_servers(cn: CompiledNetwork, mapping: Dict[str, str]) -> CompiledNetwork:
    return replace(cn, spec=validate_network(relabel(cn.spec, mapping)))


def build_rs_network(m: int) -> CompiledNetwork:
    """Standalone two-server crossing network with m jobs waiting in i21. The
    i22 side is fed at every integer n >= 1, the i11 side at n + 1/50."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    classes = (
        ClassSpec("111", "S11", F(0), None, "121", 2, ArrivalProcess(F(1), F(1, 50))),
        ClassSpec("112", "S11", F(1, 2), None, None, 1),
        ClassSpec("121", "S12", F(1, 2), None, None, 1),
        ClassSpec("122", "S12", F(0), None, "112", 2, ArrivalProcess(F(1), F(0), start_index=1)),
    )
    spec = validate_network(NetworkSpec(name=f"rs-{m}", classes=classes))
    directory = {f"SN1.i{c.class_id[1:]}": c.class_id for c in classes}
    init = InitialCondition(queued={"121": m} if m else {})
    return CompiledNetwork(spec, init, directory)
