"""Statistical fault-injection campaigns against a golden reference run.

Each injection restarts the simulation from reset, applies one fault at its
scheduled cycle (mid-cycle: after the combinational settle, before the edge),
finishes the stimulus, and compares the monitored trace to the golden trace
from the injection cycle onward. Any difference is a functional failure;
otherwise the fault was masked. Injection times are drawn uniformly (with
replacement) from the stimulus active window by a seeded generator, so a
campaign is a pure function of its inputs and seed. Aggregation is written to
be independent of execution order, which keeps multi-worker runs and reruns
byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .clocktree import ClockTree
from .faults import FaultKind, FaultSpec, InjectionEffect, apply_set, apply_seu
from .netlist import Netlist
from .seeding import derive_rng
from .simulator import GoldenTrace, Stimulus, simulator_for


class CampaignError(Exception):
    pass


class Classification(str, Enum):
    MASKED = "masked"
    FUNCTIONAL_FAILURE = "functional_failure"


@dataclass(frozen=True)
class CampaignConfig:
    """Knobs of one campaign; the stimulus travels alongside, not inside.

    ``targets=None`` selects every buffer of the clock tree in SET mode and
    every flip-flop of the netlist in SEU mode. With ``shared_time_list`` the
    one sampled time list is reused for every target, which makes state
    coverage comparable across targets and keeps the changed/unchanged totals
    of same-depth networks identical.
    """

    mode: FaultKind
    injections_per_target: int
    seed: int
    targets: Optional[tuple[str, ...]] = None
    shared_time_list: bool = True

    def __post_init__(self):
        if self.injections_per_target < 1:
            raise CampaignError(
                f"injections_per_target must be >= 1, got {self.injections_per_target}"
            )


@dataclass(frozen=True)
class InjectionOutcome:
    spec: FaultSpec
    effect: InjectionEffect
    classification: Classification
    note: Optional[str] = None


@dataclass
class CampaignTotals:
    injected: int = 0
    reached: int = 0
    changed: int = 0
    unchanged: int = 0
    failures: int = 0


@dataclass
class TargetTally:
    target: str
    injected: int = 0
    reached: int = 0
    changed: int = 0
    unchanged: int = 0
    failures: int = 0


@dataclass
class FFTally:
    times_changed: int = 0
    times_changed_and_failed: int = 0
    times_upset: int = 0
    times_upset_and_failed: int = 0


@dataclass
class CampaignResult:
    netlist_name: str
    mode: FaultKind
    seed: Optional[int]
    injections_per_target: Optional[int]
    shared_time_list: Optional[bool]
    outcomes: tuple[InjectionOutcome, ...]
    totals: CampaignTotals
    per_target: dict[str, TargetTally]
    per_ff: dict[str, FFTally]
    label: str = ""


# ---------------------------------------------------------------------------
# trace comparison


def compare_traces(golden: GoldenTrace, observed: GoldenTrace, from_cycle: int) -> Optional[str]:
    """First difference between two traces at cycle >= from_cycle, or None."""
    if golden.monitors != observed.monitors or len(golden.rows) != len(observed.rows):
        return (
            f"shape mismatch: golden {len(golden.rows)}x{len(golden.monitors)}, "
            f"observed {len(observed.rows)}x{len(observed.monitors)}"
        )
    for cycle in range(from_cycle, len(golden.rows)):
        g, o = golden.rows[cycle], observed.rows[cycle]
        if g != o:
            for monitor, gb, ob in zip(golden.monitors, g, o):
                if gb != ob:
                    return f"monitor '{monitor}' differs at cycle {cycle}: golden {gb}, observed {ob}"
    return None


def classify(golden: GoldenTrace, observed: GoldenTrace, from_cycle: int) -> Classification:
    if compare_traces(golden, observed, from_cycle) is None:
        return Classification.MASKED
    return Classification.FUNCTIONAL_FAILURE


# ---------------------------------------------------------------------------
# time sampling


def sample_times(cfg: CampaignConfig, window: tuple[int, int], target: Optional[str] = None) -> list[int]:
    """Draw injection cycles uniformly, with replacement, from the window.

    The shared list ignores ``target``; with per-target lists each target gets
    its own deterministic stream derived from the seed and the target name.
    """
    first, last = window
    if first > last:
        raise CampaignError(f"empty injection window [{first}, {last}]")
    label = "times" if cfg.shared_time_list or target is None else f"times/{target}"
    rng = derive_rng(cfg.seed, label)
    return [rng.randrange(first, last + 1) for _ in range(cfg.injections_per_target)]


# ---------------------------------------------------------------------------
# single injection


def run_injection(
    netlist: Netlist,
    stimulus: Stimulus,
    golden: GoldenTrace,
    spec: FaultSpec,
    tree: Optional[ClockTree] = None,
) -> InjectionOutcome:
    """Replay the stimulus from reset with one fault applied at spec.cycle."""
    if not (0 <= spec.cycle < stimulus.n_cycles):
        raise CampaignError(
            f"injection cycle {spec.cycle} outside stimulus of {stimulus.n_cycles} cycles"
        )
    if golden.monitors != stimulus.monitors or len(golden.rows) != stimulus.n_cycles:
        raise CampaignError("golden trace does not match the stimulus monitors/cycles")
    if spec.kind is FaultKind.SET and tree is None:
        raise CampaignError("clock transient injection needs a clock tree")

    sim = simulator_for(netlist)
    state = sim.reset()
    effect: Optional[InjectionEffect] = None
    rows = []
    for cycle in range(stimulus.n_cycles):
        inputs = stimulus.input_vectors[cycle]
        if cycle == spec.cycle:
            mid = sim.settle(state, inputs)
            if spec.kind is FaultKind.SET:
                state, effect = apply_set(netlist, tree, mid, spec.target)
            else:
                state, effect = apply_seu(netlist, mid, spec.target)
        state = sim.step_cycle(state, inputs)
        rows.append(tuple(state.net_values[m] for m in stimulus.monitors))

    observed = GoldenTrace(stimulus.monitors, tuple(rows))
    note = compare_traces(golden, observed, spec.cycle)
    classification = (
        Classification.MASKED if note is None else Classification.FUNCTIONAL_FAILURE
    )
    return InjectionOutcome(spec, effect, classification, note)


# ---------------------------------------------------------------------------
# campaign driving

# per-worker context for process pools, set once by the initializer so specs
# are the only payload crossing process boundaries per task
_worker_ctx: dict = {}


def _init_worker(netlist, stimulus, golden, tree):
    _worker_ctx["args"] = (netlist, stimulus, golden, tree)
    simulator_for(netlist)


def _run_one(spec: FaultSpec) -> InjectionOutcome:
    netlist, stimulus, golden, tree = _worker_ctx["args"]
    return run_injection(netlist, stimulus, golden, spec, tree)


def resolve_targets(
    netlist: Netlist,
    cfg: CampaignConfig,
    tree: Optional[ClockTree],
) -> tuple[str, ...]:
    if cfg.mode is FaultKind.SET:
        if tree is None:
            raise CampaignError("SET campaigns need a clock tree")
        universe = tree.buffer_ids()
    else:
        universe = netlist.ff_names()
    if cfg.targets is None:
        return tuple(universe)
    unknown = [t for t in cfg.targets if t not in set(universe)]
    if unknown:
        kind = "buffer" if cfg.mode is FaultKind.SET else "flip-flop"
        raise CampaignError(f"unknown {kind} target(s): {', '.join(unknown)}")
    return tuple(cfg.targets)


def build_specs(
    netlist: Netlist,
    stimulus: Stimulus,
    cfg: CampaignConfig,
    tree: Optional[ClockTree] = None,
) -> list[FaultSpec]:
    """Expand a campaign config into the full ordered injection list."""
    specs = []
    for target in resolve_targets(netlist, cfg, tree):
        times = sample_times(cfg, stimulus.active_window, target)
        specs.extend(FaultSpec(cfg.mode, target, t) for t in times)
    return specs


def exhaustive_specs(
    netlist: Netlist,
    stimulus: Stimulus,
    mode: FaultKind,
    tree: Optional[ClockTree] = None,
    targets: Optional[Sequence[str]] = None,
) -> list[FaultSpec]:
    """Every target at every cycle of the active window, in canonical order."""
    if targets is None:
        if mode is FaultKind.SET:
            if tree is None:
                raise CampaignError("SET campaigns need a clock tree")
            targets = tree.buffer_ids()
        else:
            targets = netlist.ff_names()
    first, last = stimulus.active_window
    return [
        FaultSpec(mode, target, cycle)
        for target in targets
        for cycle in range(first, last + 1)
    ]


def run_specs(
    netlist: Netlist,
    stimulus: Stimulus,
    specs: Sequence[FaultSpec],
    tree: Optional[ClockTree] = None,
    golden: Optional[GoldenTrace] = None,
    workers: int = 1,
    config: Optional[CampaignConfig] = None,
    label: str = "",
) -> CampaignResult:
    """Run an explicit injection list and aggregate in list order."""
    kinds = {s.kind for s in specs}
    if len(kinds) > 1:
        raise CampaignError("an injection list must not mix fault kinds")
    mode = kinds.pop() if kinds else (config.mode if config else FaultKind.SET)
    if golden is None:
        golden, _ = simulator_for(netlist).run(stimulus)

    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(netlist, stimulus, golden, tree),
        ) as pool:
            chunk = max(1, len(specs) // (workers * 8))
            outcomes = list(pool.map(_run_one, specs, chunksize=chunk))
    else:
        outcomes = [run_injection(netlist, stimulus, golden, s, tree) for s in specs]

    # aggregation depends only on the spec list order, never completion order
    totals = CampaignTotals()
    per_target: dict[str, TargetTally] = {}
    per_ff = {name: FFTally() for name in netlist.ff_names()}
    target_order = []
    for s in specs:
        if s.target not in per_target:
            per_target[s.target] = TargetTally(s.target)
            target_order.append(s.target)
    for out in outcomes:
        tally = per_target[out.spec.target]
        failed = out.classification is Classification.FUNCTIONAL_FAILURE
        totals.injected += 1
        tally.injected += 1
        totals.reached += len(out.effect.reached)
        tally.reached += len(out.effect.reached)
        totals.changed += len(out.effect.changed)
        tally.changed += len(out.effect.changed)
        totals.unchanged += len(out.effect.unchanged)
        tally.unchanged += len(out.effect.unchanged)
        if failed:
            totals.failures += 1
            tally.failures += 1
        if mode is FaultKind.SET:
            for name in out.effect.changed:
                per_ff[name].times_changed += 1
                if failed:
                    per_ff[name].times_changed_and_failed += 1
        else:
            for name in out.effect.changed:
                per_ff[name].times_upset += 1
                if failed:
                    per_ff[name].times_upset_and_failed += 1

    return CampaignResult(
        netlist_name=netlist.name,
        mode=mode,
        seed=config.seed if config else None,
        injections_per_target=config.injections_per_target if config else None,
        shared_time_list=config.shared_time_list if config else None,
        outcomes=tuple(outcomes),
        totals=totals,
        per_target={t: per_target[t] for t in target_order},
        per_ff=per_ff,
        label=label,
    )


def run_campaign(
    netlist: Netlist,
    stimulus: Stimulus,
    cfg: CampaignConfig,
    tree: Optional[ClockTree] = None,
    golden: Optional[GoldenTrace] = None,
    workers: int = 1,
    label: str = "",
) -> CampaignResult:
    specs = build_specs(netlist, stimulus, cfg, tree)
    return run_specs(
        netlist, stimulus, specs, tree=tree, golden=golden,
        workers=workers, config=cfg, label=label,
    )


# ---------------------------------------------------------------------------
# campaign logs


def _config_header(result: CampaignResult) -> dict:
    return {
        "netlist": result.netlist_name,
        "mode": result.mode.value,
        "seed": result.seed,
        "injections_per_target": result.injections_per_target,
        "shared_time_list": result.shared_time_list,
        "label": result.label,
    }


def log_to_csv(result: CampaignResult) -> str:
    """One record per injection, with the config echoed in a comment line."""
    buf = io.StringIO()
    buf.write("# " + json.dumps(_config_header(result), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "target", "cycle", "n_reached", "n_changed", "classification"])
    for out in result.outcomes:
        w.writerow([
            out.spec.kind.value,
            out.spec.target,
            out.spec.cycle,
            len(out.effect.reached),
            len(out.effect.changed),
            out.classification.value,
        ])
    return buf.getvalue()


def result_to_json(result: CampaignResult) -> str:
    doc = {
        "config": _config_header(result),
        "totals": vars(result.totals),
        "per_target": [
            {
                "target": t.target,
                "injected": t.injected,
                "reached": t.reached,
                "changed": t.changed,
                "unchanged": t.unchanged,
                "failures": t.failures,
            }
            for t in result.per_target.values()
        ],
        "per_ff": {
            name: {
                "times_changed": f.times_changed,
                "times_changed_and_failed": f.times_changed_and_failed,
                "times_upset": f.times_upset,
                "times_upset_and_failed": f.times_upset_and_failed,
            }
            for name, f in result.per_ff.items()
        },
        "records": [
            {
                "kind": out.spec.kind.value,
                "target": out.spec.target,
                "cycle": out.spec.cycle,
                "n_reached": len(out.effect.reached),
                "n_changed": len(out.effect.changed),
                "classification": out.classification.value,
            }
            for out in result.outcomes
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def result_from_json(text: str) -> CampaignResult:
    """Rebuild the aggregate view of a campaign from its structured log.

    Per-injection effects come back as counts only, which is all the report
    stage needs; the full flip-flop membership of each effect is not logged.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CampaignError(f"campaign result is not valid JSON: {e}") from e
    try:
        cfg = doc["config"]
        mode = FaultKind(cfg["mode"])
        totals = CampaignTotals(**doc["totals"])
        per_target = {
            t["target"]: TargetTally(
                t["target"], t["injected"], t["reached"], t["changed"],
                t["unchanged"], t["failures"],
            )
            for t in doc["per_target"]
        }
        per_ff = {name: FFTally(**f) for name, f in doc["per_ff"].items()}
        outcomes = tuple(
            InjectionOutcome(
                FaultSpec(FaultKind(r["kind"]), r["target"], r["cycle"]),
                InjectionEffect(
                    reached=("?",) * r["n_reached"],
                    changed=("?",) * r["n_changed"],
                    unchanged=("?",) * (r["n_reached"] - r["n_changed"]),
                ),
                Classification(r["classification"]),
            )
            for r in doc["records"]
        )
        return CampaignResult(
            netlist_name=cfg["netlist"],
            mode=mode,
            seed=cfg["seed"],
            injections_per_target=cfg["injections_per_target"],
            shared_time_list=cfg["shared_time_list"],
            outcomes=outcomes,
            totals=totals,
            per_target=per_target,
            per_ff=per_ff,
            label=cfg.get("label", ""),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CampaignError(
            f"not a campaign result document (bad or missing field: {e})"
        ) from e
