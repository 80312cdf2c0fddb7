"""Cycle-accurate two-valued simulation.

Each cycle applies that cycle's input vector, settles the combinational
logic, fires the clock edge (every flip-flop simultaneously takes
``enable ? D : Q``), then settles again so monitored outputs are sampled
after the edge. State is held in plain value objects so a simulation can be
forked cheaply for fault injection.
"""

from __future__ import annotations

import csv
import io
import json
import weakref
from dataclasses import dataclass
from typing import Mapping, Optional

from .netlist import Netlist, NetlistError, levelize, validate


class SimulationError(Exception):
    pass


class MissingInputError(SimulationError):
    pass


class StimulusError(SimulationError):
    pass


@dataclass(frozen=True)
class SimState:
    """Snapshot of a simulation: cycle counter, Q values, settled net values.

    ``net_values`` is empty right after reset; it is established by the first
    settle and from then on is the fixed point of evaluating all gates for the
    current flip-flop values and primary inputs.
    """

    cycle: int
    ff_values: dict[str, int]
    net_values: dict[str, int]


@dataclass(frozen=True)
class Stimulus:
    n_cycles: int
    input_vectors: tuple[dict[str, int], ...]
    active_window: tuple[int, int]
    monitors: tuple[str, ...]


@dataclass(frozen=True)
class GoldenTrace:
    """Reference output recording: one row per cycle, one bit per monitor."""

    monitors: tuple[str, ...]
    rows: tuple[tuple[int, ...], ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.monitors)
        for row in self.rows:
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GoldenTrace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise StimulusError("trace file is empty")
        monitors = tuple(rows[0])
        data = []
        for i, row in enumerate(rows[1:]):
            if len(row) != len(monitors):
                raise StimulusError(f"trace row {i} has {len(row)} columns, expected {len(monitors)}")
            try:
                bits = tuple(int(x) for x in row)
            except ValueError as e:
                raise StimulusError(f"trace row {i} holds a non-integer value") from e
            if any(b not in (0, 1) for b in bits):
                raise StimulusError(f"trace row {i} holds a non-binary value")
            data.append(bits)
        return cls(monitors, tuple(data))


# opcode table for the compiled evaluation plan
_OPS = {
    "AND": 0, "OR": 1, "NOT": 2, "XOR": 3, "NAND": 4,
    "NOR": 5, "XNOR": 6, "BUF": 7, "MUX2": 8, "CONST0": 9, "CONST1": 10,
}


class Simulator:
    """Compiled simulation kernel for one netlist."""

    def __init__(self, netlist: Netlist):
        violations = validate(netlist)
        if violations:
            raise NetlistError(
                "netlist must validate cleanly before simulation: "
                + "; ".join(str(v) for v in violations)
            )
        self.netlist = netlist
        self._net_ids = {net: i for i, net in enumerate(sorted(netlist.nets))}
        self._net_names = sorted(netlist.nets)
        gate_by_id = {g.id: g for g in netlist.gates}
        plan = []
        for gid in levelize(netlist):
            g = gate_by_id[gid]
            ins = [self._net_ids[x] for x in g.inputs]
            ins += [0] * (3 - len(ins))
            plan.append((_OPS[g.kind], ins[0], ins[1], ins[2], self._net_ids[g.output]))
        self._plan = tuple(plan)
        self._ffs = tuple(
            (
                f.name,
                self._net_ids[f.q],
                self._net_ids[f.d],
                self._net_ids[f.enable] if f.enable is not None else -1,
                f.init,
            )
            for f in netlist.flipflops
        )
        self._input_ids = {p: self._net_ids[p] for p in netlist.inputs}

    # -- state construction -------------------------------------------------

    def reset(self) -> SimState:
        """Initial state: cycle 0, every flip-flop at its declared init value."""
        return SimState(0, {name: init for name, _, _, _, init in self._ffs}, {})

    def _values(self, ff_values: Mapping[str, int], inputs: Mapping[str, int]) -> list[int]:
        v = [0] * len(self._net_ids)
        for port, idx in self._input_ids.items():
            try:
                bit = inputs[port]
            except KeyError:
                raise MissingInputError(f"no value for primary input '{port}'") from None
            if bit not in (0, 1):
                raise SimulationError(f"input '{port}' value {bit!r} is not a bit")
            v[idx] = bit
        for port in inputs:
            if port not in self._input_ids:
                raise SimulationError(f"'{port}' is not a primary input of '{self.netlist.name}'")
        for name, q, _, _, _ in self._ffs:
            v[q] = ff_values[name]
        return v

    def _settle(self, v: list[int]) -> None:
        for op, i0, i1, i2, out in self._plan:
            if op == 0:
                v[out] = v[i0] & v[i1]
            elif op == 1:
                v[out] = v[i0] | v[i1]
            elif op == 2:
                v[out] = v[i0] ^ 1
            elif op == 3:
                v[out] = v[i0] ^ v[i1]
            elif op == 4:
                v[out] = (v[i0] & v[i1]) ^ 1
            elif op == 5:
                v[out] = (v[i0] | v[i1]) ^ 1
            elif op == 6:
                v[out] = v[i0] ^ v[i1] ^ 1
            elif op == 7:
                v[out] = v[i0]
            elif op == 8:
                v[out] = v[i1] if v[i2] else v[i0]
            elif op == 9:
                v[out] = 0
            else:
                v[out] = 1

    def _net_dict(self, v: list[int]) -> dict[str, int]:
        return {name: v[self._net_ids[name]] for name in self._net_names}

    def _latch(self, v: list[int]) -> dict[str, int]:
        new_ff = {}
        for name, q, d, en, _ in self._ffs:
            if en >= 0 and v[en] == 0:
                new_ff[name] = v[q]
            else:
                new_ff[name] = v[d]
        return new_ff

    # -- public stepping -----------------------------------------------------

    def settle(self, state: SimState, inputs: Mapping[str, int]) -> SimState:
        """Combinationally settle nets for this cycle's inputs; no clock edge."""
        v = self._values(state.ff_values, inputs)
        self._settle(v)
        return SimState(state.cycle, dict(state.ff_values), self._net_dict(v))

    def step_cycle(self, state: SimState, inputs: Mapping[str, int]) -> SimState:
        """Advance one clock cycle; returned nets are settled post-edge."""
        v = self._values(state.ff_values, inputs)
        self._settle(v)
        new_ff = self._latch(v)
        for name, q, _, _, _ in self._ffs:
            v[q] = new_ff[name]
        self._settle(v)
        return SimState(state.cycle + 1, new_ff, self._net_dict(v))

    def run(
        self,
        stimulus: Stimulus,
        initial: Optional[SimState] = None,
        keep_states: bool = False,
    ) -> tuple[GoldenTrace, Optional[list[SimState]]]:
        """Simulate the whole stimulus, sampling monitors after every edge."""
        validate_stimulus(self.netlist, stimulus)
        mon_ids = [self._net_ids[m] for m in stimulus.monitors]
        state = initial if initial is not None else self.reset()
        if state.cycle != 0:
            raise SimulationError("run starts at cycle 0; got a state at cycle %d" % state.cycle)
        ff = dict(state.ff_values)
        rows = []
        states = [] if keep_states else None
        for cycle in range(stimulus.n_cycles):
            inputs = stimulus.input_vectors[cycle]
            v = self._values(ff, inputs)
            self._settle(v)
            ff = self._latch(v)
            for name, q, _, _, _ in self._ffs:
                v[q] = ff[name]
            self._settle(v)
            rows.append(tuple(v[m] for m in mon_ids))
            if keep_states:
                states.append(SimState(cycle + 1, dict(ff), self._net_dict(v)))
        return GoldenTrace(stimulus.monitors, tuple(rows)), states


# one kernel per netlist value; two equal netlists share a kernel
_kernels: "weakref.WeakKeyDictionary[Netlist, Simulator]" = weakref.WeakKeyDictionary()


def simulator_for(netlist: Netlist) -> Simulator:
    sim = _kernels.get(netlist)
    if sim is None:
        sim = Simulator(netlist)
        _kernels[netlist] = sim
    return sim


def reset(netlist: Netlist) -> SimState:
    return simulator_for(netlist).reset()


def settle(netlist: Netlist, state: SimState, inputs: Mapping[str, int]) -> SimState:
    return simulator_for(netlist).settle(state, inputs)


def step_cycle(netlist: Netlist, state: SimState, inputs: Mapping[str, int]) -> SimState:
    return simulator_for(netlist).step_cycle(state, inputs)


def run(
    netlist: Netlist,
    stimulus: Stimulus,
    initial: Optional[SimState] = None,
    keep_states: bool = False,
) -> tuple[GoldenTrace, Optional[list[SimState]]]:
    return simulator_for(netlist).run(stimulus, initial, keep_states)


# ---------------------------------------------------------------------------
# stimulus documents


def validate_stimulus(netlist: Netlist, st: Stimulus) -> None:
    missing = [m for m in st.monitors if m not in netlist.outputs]
    if missing:
        raise StimulusError(
            f"monitors not among outputs of '{netlist.name}': {', '.join(missing)}"
        )
    for cycle, vec in enumerate(st.input_vectors):
        for port in netlist.inputs:
            if port not in vec:
                raise MissingInputError(f"cycle {cycle} has no value for input '{port}'")


def parse_stimulus(text: str) -> Stimulus:
    """Parse a stimulus document.

    ``vectors`` maps cycle numbers to input assignments; a cycle that is not
    listed inherits the previous cycle's full vector. Cycle 0 must be present.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise StimulusError(f"syntax error: {e.msg} (line {e.lineno})") from e
    if not isinstance(doc, dict):
        raise StimulusError("stimulus root must be an object")
    for key in ("n_cycles", "active_window", "monitors", "vectors"):
        if key not in doc:
            raise StimulusError(f"missing required field '{key}'")
    n_cycles = doc["n_cycles"]
    if not isinstance(n_cycles, int) or n_cycles < 1:
        raise StimulusError("'n_cycles' must be a positive integer")
    window = doc["active_window"]
    if (
        not isinstance(window, list)
        or len(window) != 2
        or not all(isinstance(x, int) for x in window)
    ):
        raise StimulusError("'active_window' must be [first, last]")
    first, last = window
    if not (0 <= first <= last < n_cycles):
        raise StimulusError(
            f"active window [{first}, {last}] does not fit in {n_cycles} cycles"
        )
    monitors = doc["monitors"]
    if not isinstance(monitors, list) or not all(isinstance(m, str) for m in monitors):
        raise StimulusError("'monitors' must be a list of output names")

    raw = doc["vectors"]
    if not isinstance(raw, dict):
        raise StimulusError("'vectors' must map cycle numbers to input assignments")
    by_cycle: dict[int, dict[str, int]] = {}
    for key, vec in raw.items():
        try:
            cycle = int(key)
        except ValueError as e:
            raise StimulusError(f"vector key '{key}' is not a cycle number") from e
        if not (0 <= cycle < n_cycles):
            raise StimulusError(f"vector cycle {cycle} outside 0..{n_cycles - 1}")
        if not isinstance(vec, dict):
            raise StimulusError(f"vector for cycle {cycle} must be an object")
        for port, bit in vec.items():
            if bit not in (0, 1):
                raise StimulusError(f"cycle {cycle} input '{port}' value {bit!r} is not a bit")
        by_cycle[cycle] = dict(vec)
    if 0 not in by_cycle:
        raise StimulusError("cycle 0 vector is required")

    expanded = []
    current: dict[str, int] = {}
    for cycle in range(n_cycles):
        if cycle in by_cycle:
            current = by_cycle[cycle]
        expanded.append(dict(current))
    return Stimulus(n_cycles, tuple(expanded), (first, last), tuple(monitors))


def serialize_stimulus(st: Stimulus) -> str:
    vectors: dict[str, dict[str, int]] = {}
    previous: dict[str, int] | None = None
    for cycle, vec in enumerate(st.input_vectors):
        if vec != previous:
            vectors[str(cycle)] = dict(sorted(vec.items()))
            previous = vec
    doc = {
        "n_cycles": st.n_cycles,
        "active_window": list(st.active_window),
        "monitors": list(st.monitors),
        "vectors": vectors,
    }
    return json.dumps(doc, indent=2) + "\n"


def load_stimulus(path) -> Stimulus:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_stimulus(fh.read())


def save_stimulus(st: Stimulus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_stimulus(st))


def load_trace(path) -> GoldenTrace:
    with open(path, "r", encoding="utf-8") as fh:
        return GoldenTrace.from_csv(fh.read())


def save_trace(trace: GoldenTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace.to_csv())
