"""Gate-level netlist model and its on-disk document format.

A netlist is a flat graph of two-valued combinational gates plus edge-triggered
flip-flops, all connected by named nets. Every net has exactly one driver: a
primary input port, a gate output, or a flip-flop Q pin. Documents are JSON
objects with the fields ``name``, ``inputs``, ``outputs``, ``gates`` and
``ffs``; element order in the document is preserved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

# Supported gate kinds and their input counts. MUX2 takes (in0, in1, sel) and
# selects in1 when sel is 1.
GATE_ARITY = {
    "AND": 2,
    "OR": 2,
    "NAND": 2,
    "NOR": 2,
    "XOR": 2,
    "XNOR": 2,
    "NOT": 1,
    "BUF": 1,
    "MUX2": 3,
    "CONST0": 0,
    "CONST1": 0,
}


class NetlistError(Exception):
    pass


class NetlistParseError(NetlistError):
    """Raised for malformed documents; carries the text position if known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class NetlistValidationError(NetlistError):
    def __init__(self, violations: list["Violation"]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"netlist failed validation: {lines}")


@dataclass(frozen=True)
class Gate:
    id: str
    kind: str
    inputs: tuple[str, ...]
    output: str


@dataclass(frozen=True)
class FlipFlop:
    name: str
    d: str
    q: str
    enable: Optional[str] = None
    init: int = 0


@dataclass(frozen=True)
class Netlist:
    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    nets: frozenset[str]
    gates: tuple[Gate, ...]
    flipflops: tuple[FlipFlop, ...]

    @classmethod
    def build(
        cls,
        name: str,
        inputs: Iterable[str],
        outputs: Iterable[str],
        gates: Iterable[Gate],
        flipflops: Iterable[FlipFlop],
    ) -> "Netlist":
        """Construct a netlist, deriving the net set from all references."""
        inputs = tuple(inputs)
        outputs = tuple(outputs)
        gates = tuple(gates)
        flipflops = tuple(flipflops)
        nets: set[str] = set(inputs) | set(outputs)
        for g in gates:
            nets.update(g.inputs)
            nets.add(g.output)
        for f in flipflops:
            nets.add(f.d)
            nets.add(f.q)
            if f.enable is not None:
                nets.add(f.enable)
        return cls(name, inputs, outputs, frozenset(nets), gates, flipflops)

    def ff_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.flipflops)

    def ff_map(self) -> dict[str, FlipFlop]:
        return {f.name: f for f in self.flipflops}


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    def __str__(self) -> str:  # subclasses fill in the details
        return self.__class__.__name__


@dataclass(frozen=True)
class DuplicateName(Violation):
    name: str
    element: str

    def __str__(self):
        return f"duplicate {self.element} name '{self.name}'"


@dataclass(frozen=True)
class UnknownGateKind(Violation):
    gate_id: str
    kind: str

    def __str__(self):
        return f"gate '{self.gate_id}' has unknown kind '{self.kind}'"


@dataclass(frozen=True)
class BadArity(Violation):
    gate_id: str
    kind: str
    expected: int
    got: int

    def __str__(self):
        return (
            f"gate '{self.gate_id}' ({self.kind}) expects {self.expected} "
            f"inputs, got {self.got}"
        )


@dataclass(frozen=True)
class BadInitValue(Violation):
    ff: str
    value: object

    def __str__(self):
        return f"flip-flop '{self.ff}' init value {self.value!r} is not 0 or 1"


@dataclass(frozen=True)
class MalformedName(Violation):
    name: str
    element: str

    def __str__(self):
        return f"{self.element} name '{self.name}' is malformed"


@dataclass(frozen=True)
class MultipleDrivers(Violation):
    net: str
    drivers: tuple[str, ...]

    def __str__(self):
        return f"net '{self.net}' has multiple drivers: {', '.join(self.drivers)}"


@dataclass(frozen=True)
class UndrivenNet(Violation):
    net: str
    referenced_by: tuple[str, ...]

    def __str__(self):
        return (
            f"undriven net '{self.net}' "
            f"(referenced by {', '.join(self.referenced_by)})"
        )


@dataclass(frozen=True)
class CombinationalCycle(Violation):
    gate_ids: tuple[str, ...]

    def __str__(self):
        return f"combinational cycle through gates: {' -> '.join(self.gate_ids)}"


def _well_formed_name(name: object) -> bool:
    if not isinstance(name, str) or not name:
        return False
    return all(seg != "" for seg in name.split("."))


def validate(n: Netlist) -> list[Violation]:
    """Check all structural rules; returns an empty list for a clean netlist."""
    violations: list[Violation] = []

    seen_gates: set[str] = set()
    for g in n.gates:
        if not _well_formed_name(g.id):
            violations.append(MalformedName(str(g.id), "gate"))
        if g.id in seen_gates:
            violations.append(DuplicateName(g.id, "gate"))
        seen_gates.add(g.id)
        arity = GATE_ARITY.get(g.kind)
        if arity is None:
            violations.append(UnknownGateKind(g.id, g.kind))
        elif len(g.inputs) != arity:
            violations.append(BadArity(g.id, g.kind, arity, len(g.inputs)))

    seen_ffs: set[str] = set()
    for f in n.flipflops:
        if not _well_formed_name(f.name):
            violations.append(MalformedName(str(f.name), "flip-flop"))
        if f.name in seen_ffs:
            violations.append(DuplicateName(f.name, "flip-flop"))
        seen_ffs.add(f.name)
        if f.init not in (0, 1):
            violations.append(BadInitValue(f.name, f.init))

    seen_ports: set[str] = set()
    for p in n.inputs:
        if p in seen_ports:
            violations.append(DuplicateName(p, "input port"))
        seen_ports.add(p)
    seen_out: set[str] = set()
    for p in n.outputs:
        if p in seen_out:
            violations.append(DuplicateName(p, "output port"))
        seen_out.add(p)

    # driver bookkeeping: input ports, gate outputs and FF Q pins drive nets
    drivers: dict[str, list[str]] = {}
    for p in n.inputs:
        drivers.setdefault(p, []).append(f"input port '{p}'")
    for g in n.gates:
        drivers.setdefault(g.output, []).append(f"gate '{g.id}'")
    for f in n.flipflops:
        drivers.setdefault(f.q, []).append(f"flip-flop '{f.name}' Q")

    for net in sorted(drivers):
        who = drivers[net]
        if len(who) > 1:
            violations.append(MultipleDrivers(net, tuple(who)))

    refs: dict[str, list[str]] = {}
    for g in n.gates:
        for net in g.inputs:
            refs.setdefault(net, []).append(f"gate '{g.id}'")
    for f in n.flipflops:
        refs.setdefault(f.d, []).append(f"flip-flop '{f.name}' D")
        if f.enable is not None:
            refs.setdefault(f.enable, []).append(f"flip-flop '{f.name}' enable")
    for p in n.outputs:
        refs.setdefault(p, []).append(f"output port '{p}'")

    for net in sorted(refs):
        if net not in drivers:
            violations.append(UndrivenNet(net, tuple(refs[net])))

    violations.extend(_find_cycles(n))
    return violations


def _gate_dependencies(n: Netlist) -> dict[str, list[str]]:
    """Map gate id -> ids of gates whose outputs feed it (combinational only)."""
    out_to_gate = {g.output: g.id for g in n.gates}
    deps: dict[str, list[str]] = {}
    for g in n.gates:
        deps[g.id] = [out_to_gate[net] for net in g.inputs if net in out_to_gate]
    return deps


def _find_cycles(n: Netlist) -> list[Violation]:
    deps = _gate_dependencies(n)
    remaining = {gid: set(d) for gid, d in deps.items()}
    ready = [gid for gid, d in remaining.items() if not d]
    consumers: dict[str, list[str]] = {}
    for gid, d in deps.items():
        for dep in d:
            consumers.setdefault(dep, []).append(gid)
    done: set[str] = set()
    while ready:
        gid = ready.pop()
        done.add(gid)
        for c in consumers.get(gid, ()):
            remaining[c].discard(gid)
            if not remaining[c] and c not in done:
                ready.append(c)
    stuck = [gid for gid in remaining if gid not in done]
    if not stuck:
        return []
    # walk dependencies until a gate repeats, then report that loop
    path = [stuck[0]]
    seen = {stuck[0]: 0}
    while True:
        nxt = next(d for d in deps[path[-1]] if d not in done)
        if nxt in seen:
            cycle = path[seen[nxt]:]
            return [CombinationalCycle(tuple(cycle))]
        seen[nxt] = len(path)
        path.append(nxt)


def levelize(n: Netlist) -> list[str]:
    """Topological order of gate ids.

    Primary inputs and flip-flop Q pins are rank-0 sources, so a gate appears
    after every gate that drives one of its inputs. Order is deterministic:
    ties resolve by document position.
    """
    deps = _gate_dependencies(n)
    remaining = {gid: len(d) for gid, d in deps.items()}
    consumers: dict[str, list[str]] = {}
    for g in n.gates:
        for dep in deps[g.id]:
            consumers.setdefault(dep, []).append(g.id)
    order: list[str] = []
    queue = [g.id for g in n.gates if remaining[g.id] == 0]
    head = 0
    while head < len(queue):
        gid = queue[head]
        head += 1
        order.append(gid)
        for c in consumers.get(gid, ()):
            remaining[c] -= 1
            if remaining[c] == 0:
                queue.append(c)
    if len(order) != len(n.gates):
        stuck = sorted(set(g.id for g in n.gates) - set(order))
        raise NetlistError(f"combinational cycle involving gates: {', '.join(stuck)}")
    return order


# ---------------------------------------------------------------------------
# document format


def parse_netlist(text: str) -> Netlist:
    """Parse a netlist document; raises unless the result validates cleanly."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetlistParseError(f"syntax error: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(doc, dict):
        raise NetlistParseError("document root must be an object")
    for key in ("name", "inputs", "outputs", "gates", "ffs"):
        if key not in doc:
            raise NetlistParseError(f"missing required field '{key}'")
    if not isinstance(doc["name"], str):
        raise NetlistParseError("'name' must be a string")
    for key in ("inputs", "outputs", "gates", "ffs"):
        if not isinstance(doc[key], list):
            raise NetlistParseError(f"'{key}' must be a list")

    gates = []
    for i, entry in enumerate(doc["gates"]):
        if not isinstance(entry, dict):
            raise NetlistParseError(f"gate entry {i} must be an object")
        try:
            gid, kind, ins, out = entry["id"], entry["kind"], entry["in"], entry["out"]
        except KeyError as e:
            raise NetlistParseError(f"gate entry {i} missing field {e}") from e
        if not isinstance(ins, list) or not all(isinstance(x, str) for x in ins):
            raise NetlistParseError(f"gate '{gid}': 'in' must be a list of net names")
        if not isinstance(out, str):
            raise NetlistParseError(f"gate '{gid}': 'out' must be a net name")
        gates.append(Gate(gid, kind, tuple(ins), out))

    ffs = []
    for i, entry in enumerate(doc["ffs"]):
        if not isinstance(entry, dict):
            raise NetlistParseError(f"ff entry {i} must be an object")
        try:
            name, d, q, init = entry["name"], entry["d"], entry["q"], entry["init"]
        except KeyError as e:
            raise NetlistParseError(f"ff entry {i} missing field {e}") from e
        en = entry.get("en")
        ffs.append(FlipFlop(name, d, q, en, init))

    n = Netlist.build(doc["name"], doc["inputs"], doc["outputs"], gates, ffs)
    violations = validate(n)
    if violations:
        raise NetlistValidationError(violations)
    return n


def serialize_netlist(n: Netlist) -> str:
    doc = {
        "name": n.name,
        "inputs": list(n.inputs),
        "outputs": list(n.outputs),
        "gates": [
            {"id": g.id, "kind": g.kind, "in": list(g.inputs), "out": g.output}
            for g in n.gates
        ],
        "ffs": [
            {
                "name": f.name,
                "d": f.d,
                "q": f.q,
                **({"en": f.enable} if f.enable is not None else {}),
                "init": f.init,
            }
            for f in n.flipflops
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_netlist(path) -> Netlist:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_netlist(fh.read())


def save_netlist(n: Netlist, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_netlist(n))
