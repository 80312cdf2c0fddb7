"""Access to the example circuits and data files shipped with the package.

Two desk-scale circuits stand in for a production design: ``crc8_pipeline``,
a transmit/receive pair of CRC-8 units joined by a structural loopback with
an equality monitor, and ``lfsr_counter``, a small autonomous mix of shift
and counter logic. Each circuit ships with a manifest of element counts, a
stimulus, and a frozen golden trace produced once by the simulator in this
package (tools/build_bundled_circuits.py regenerates everything).
"""

from __future__ import annotations

import json
from pathlib import Path

from .netlist import Netlist, load_netlist
from .simulator import GoldenTrace, Stimulus, load_stimulus, load_trace

CIRCUITS = ("crc8_pipeline", "lfsr_counter")

_DATA = Path(__file__).resolve().parent / "data"


def data_path(filename: str) -> Path:
    path = _DATA / filename
    if not path.exists():
        raise FileNotFoundError(f"no bundled data file '{filename}'")
    return path


def circuit_path(name: str) -> Path:
    return data_path(f"{name}.json")


def stimulus_path(name: str) -> Path:
    return data_path(f"{name}.stimulus.json")


def golden_path(name: str) -> Path:
    return data_path(f"{name}.golden.csv")


def fit_library_path() -> Path:
    return data_path("fit_library.csv")


def load_circuit(name: str) -> Netlist:
    return load_netlist(circuit_path(name))


def load_circuit_stimulus(name: str) -> Stimulus:
    return load_stimulus(stimulus_path(name))


def load_circuit_golden(name: str) -> GoldenTrace:
    return load_trace(golden_path(name))


def load_manifest(name: str) -> dict:
    with open(data_path(f"{name}.manifest.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)
