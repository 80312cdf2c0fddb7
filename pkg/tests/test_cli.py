import hashlib
import json
import shutil
import subprocess
from pathlib import Path

from cdnfi import __version__
from cdnfi.bundled import circuit_path, fit_library_path, golden_path, stimulus_path
from cdnfi.cli import main
from cdnfi.clocktree import load_tree, tree_stats
from cdnfi.netlist import FlipFlop, Netlist, save_netlist
from test_netlist import TOGGLE_DOC


TOGGLE_STIMULUS = json.dumps({
    "n_cycles": 4,
    "active_window": [0, 3],
    "monitors": ["q"],
    "vectors": {"0": {}},
}) + "\n"


def write_toggle(tmp_path):
    netlist = tmp_path / "toggle.json"
    netlist.write_text(TOGGLE_DOC)
    stimulus = tmp_path / "toggle.stimulus.json"
    stimulus.write_text(TOGGLE_STIMULUS)
    return netlist, stimulus


def recirculating_bank(n_ffs):
    """A netlist that is nothing but flip-flops feeding themselves."""
    ffs = [FlipFlop(f"r{i:04d}", f"q{i:04d}", f"q{i:04d}", None, 0) for i in range(n_ffs)]
    return Netlist.build("bank", [], ["q0000"], [], ffs)


def tree_of_files(root):
    return sorted(p.relative_to(root) for p in Path(root).rglob("*") if p.is_file())


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.strip() == f"cdnfi {__version__}"


def test_no_subcommand_is_usage_error():
    assert main([]) == 2


def test_unknown_subcommand_is_usage_error():
    assert main(["frobnicate"]) == 2


def test_sim_writes_trace_and_manifest(tmp_path, capsys):
    netlist, stimulus = write_toggle(tmp_path)
    out = tmp_path / "golden.csv"
    assert main(["sim", str(netlist), str(stimulus), "--out", str(out)]) == 0
    assert out.read_text() == "q\n1\n0\n1\n0\n"
    assert "wrote" in capsys.readouterr().out

    manifest = json.loads((tmp_path / "golden.csv.manifest.json").read_text())
    assert manifest["tool"] == "cdnfi"
    assert manifest["version"] == __version__
    assert manifest["command"] == "sim"
    assert manifest["outputs"] == [str(out)]
    by_path = {i["path"]: i["sha256"] for i in manifest["inputs"]}
    for p in (netlist, stimulus):
        assert by_path[str(p)] == hashlib.sha256(p.read_bytes()).hexdigest()


def test_sim_missing_input_exits_2(tmp_path, capsys):
    netlist, _ = write_toggle(tmp_path)
    out = tmp_path / "golden.csv"
    rc = main(["sim", str(netlist), str(tmp_path / "nope.json"), "--out", str(out)])
    assert rc == 2
    assert not out.exists()
    assert "error:" in capsys.readouterr().err


def test_gen_cdn_by_name_reference_line(tmp_path, capsys):
    bank = tmp_path / "bank.json"
    save_netlist(recirculating_bank(1233), bank)
    out_dir = tmp_path / "cdns"
    assert main([
        "gen-cdn", str(bank), "--min-fanout", "16", "--out-dir", str(out_dir),
    ]) == 0
    line = capsys.readouterr().out.strip()
    assert line == "cdn_by_name.json: stages=7 buffers=127 fanout=19..20"
    tree = load_tree(out_dir / "cdn_by_name.json")
    assert tree_stats(tree).buffer_count == 127


def test_gen_cdn_by_name_ignores_count(tmp_path, capsys):
    bank = tmp_path / "bank.json"
    save_netlist(recirculating_bank(9), bank)
    out_dir = tmp_path / "cdns"
    assert main([
        "gen-cdn", str(bank), "--min-fanout", "2", "--count", "3",
        "--out-dir", str(out_dir),
    ]) == 0
    assert "single network" in capsys.readouterr().out
    assert [p.name for p in sorted(out_dir.glob("cdn_*.json"))] == ["cdn_by_name.json"]


def test_gen_cdn_random_family(tmp_path, capsys):
    bank = tmp_path / "bank.json"
    save_netlist(recirculating_bank(64), bank)
    out_dir = tmp_path / "cdns"
    assert main([
        "gen-cdn", str(bank), "--min-fanout", "4", "--grouping", "random",
        "--seed", "5", "--count", "3", "--out-dir", str(out_dir),
    ]) == 0
    files = sorted(out_dir.glob("cdn_random_*.json"))
    assert [p.name for p in files] == [
        "cdn_random_000.json", "cdn_random_001.json", "cdn_random_002.json",
    ]
    trees = [load_tree(p) for p in files]
    stats = {tree_stats(t) for t in trees}
    assert len(stats) == 1  # same topology...
    leaf_sets = {tuple(b.cone for b in t.leaves()) for t in trees}
    assert len(leaf_sets) == 3  # ...different memberships
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["seed"] == 5
    assert len(manifest["outputs"]) == 3


def test_gen_cdn_random_is_reproducible(tmp_path):
    bank = tmp_path / "bank.json"
    save_netlist(recirculating_bank(32), bank)
    for d in ("one", "two"):
        assert main([
            "gen-cdn", str(bank), "--min-fanout", "2", "--grouping", "random",
            "--seed", "9", "--count", "2", "--out-dir", str(tmp_path / d),
        ]) == 0
    for name in ("cdn_random_000.json", "cdn_random_001.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_gen_cdn_rejects_bad_fanout(tmp_path, capsys):
    bank = tmp_path / "bank.json"
    save_netlist(recirculating_bank(4), bank)
    rc = main(["gen-cdn", str(bank), "--min-fanout", "0", "--out-dir", str(tmp_path / "x")])
    assert rc == 2
    assert not (tmp_path / "x").exists()


def test_campaign_seu_end_to_end(tmp_path, capsys):
    out_dir = tmp_path / "out"
    rc = main([
        "campaign", str(circuit_path("lfsr_counter")),
        str(stimulus_path("lfsr_counter")),
        "--mode", "seu", "--injections-per-target", "3", "--seed", "42",
        "--fit-library", str(fit_library_path()),
        "--out-dir", str(out_dir),
    ])
    assert rc == 0
    names = {p.name for p in out_dir.iterdir()}
    assert {
        "golden.csv", "log_seu.csv", "result_seu.json", "totals.csv",
        "per_target_fdr.csv", "ranking_seu.csv", "rate_summary.csv",
        "summary.txt", "manifest.json",
    } <= names
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("seu: injected=42 reached=42 changed=42 unchanged=0")
    result = json.loads((out_dir / "result_seu.json").read_text())
    assert result["totals"]["injected"] == 42
    # the computed golden matches the bundled reference trace
    assert (out_dir / "golden.csv").read_bytes() == golden_path("lfsr_counter").read_bytes()


def test_campaign_set_requires_tree(tmp_path, capsys):
    out_dir = tmp_path / "out"
    rc = main([
        "campaign", str(circuit_path("lfsr_counter")),
        str(stimulus_path("lfsr_counter")),
        "--mode", "set", "--out-dir", str(out_dir),
    ])
    assert rc == 2
    assert "--tree" in capsys.readouterr().err
    assert not out_dir.exists()


def test_campaign_multi_tree_conservation(tmp_path, capsys):
    cdn_dir = tmp_path / "cdns"
    assert main([
        "gen-cdn", str(circuit_path("lfsr_counter")), "--min-fanout", "3",
        "--grouping", "random", "--seed", "1", "--count", "2",
        "--out-dir", str(cdn_dir),
    ]) == 0
    out_dir = tmp_path / "out"
    rc = main([
        "campaign", str(circuit_path("lfsr_counter")),
        str(stimulus_path("lfsr_counter")),
        "--golden", str(golden_path("lfsr_counter")),
        "--mode", "set",
        "--tree", str(cdn_dir / "cdn_random_000.json"),
        "--tree", str(cdn_dir / "cdn_random_001.json"),
        "--injections-per-target", "4", "--seed", "7",
        "--out-dir", str(out_dir),
    ])
    assert rc == 0
    results = [
        json.loads((out_dir / f"result_cdn_random_{i:03d}.json").read_text())
        for i in range(2)
    ]
    assert results[0]["totals"]["changed"] == results[1]["totals"]["changed"]
    assert results[0]["totals"]["unchanged"] == results[1]["totals"]["unchanged"]
    assert (out_dir / "overlap.csv").exists()
    assert (out_dir / "failure_spread.csv").exists()
    # explicit --golden is digested as an input, not rewritten as an output
    assert not (out_dir / "golden.csv").exists()
    manifest = json.loads((out_dir / "manifest.json").read_text())
    digested = {i["path"] for i in manifest["inputs"]}
    assert str(golden_path("lfsr_counter")) in digested


def test_campaign_reruns_and_workers_are_byte_identical(tmp_path, monkeypatch):
    for sub, workers in (("a", "1"), ("b", "1"), ("c", "3")):
        root = tmp_path / sub
        root.mkdir()
        for name in ("lfsr_counter.json", "lfsr_counter.stimulus.json"):
            shutil.copy(circuit_path("lfsr_counter").parent / name, root / name)
        monkeypatch.chdir(root)
        rc = main([
            "campaign", "lfsr_counter.json", "lfsr_counter.stimulus.json",
            "--mode", "seu", "--injections-per-target", "2", "--seed", "3",
            "--workers", workers, "--out-dir", "out",
        ])
        assert rc == 0
    baseline = tree_of_files(tmp_path / "a")
    assert tree_of_files(tmp_path / "b") == baseline
    assert tree_of_files(tmp_path / "c") == baseline
    for rel in baseline:
        data = (tmp_path / "a" / rel).read_bytes()
        assert (tmp_path / "b" / rel).read_bytes() == data, rel
        assert (tmp_path / "c" / rel).read_bytes() == data, rel


def test_report_rebuilds_bundle(tmp_path, capsys):
    out_dir = tmp_path / "camp"
    assert main([
        "campaign", str(circuit_path("lfsr_counter")),
        str(stimulus_path("lfsr_counter")),
        "--mode", "seu", "--injections-per-target", "2", "--seed", "11",
        "--out-dir", str(out_dir),
    ]) == 0
    rep_dir = tmp_path / "rep"
    rc = main([
        "report", str(out_dir / "result_seu.json"),
        "--fit-library", str(fit_library_path()),
        "--out-dir", str(rep_dir),
    ])
    assert rc == 0
    assert "report bundle" in capsys.readouterr().out
    assert (rep_dir / "totals.csv").read_bytes() == (out_dir / "totals.csv").read_bytes()
    assert (rep_dir / "ranking_seu.csv").read_bytes() == (out_dir / "ranking_seu.csv").read_bytes()
    assert (rep_dir / "rate_summary.csv").exists()


def test_report_rejects_non_result_json(tmp_path, capsys):
    wrong = tmp_path / "manifest.json"
    wrong.write_text('{"command": "sim", "config": {"mode": "set"}}\n')
    rep_dir = tmp_path / "rep"
    assert main(["report", str(wrong), "--out-dir", str(rep_dir)]) == 2
    err = capsys.readouterr().err
    assert "error:" in err and "not a campaign result" in err
    assert not rep_dir.exists()


def test_report_rejects_bad_top_fraction(tmp_path):
    assert main([
        "report", "whatever.json", "--top-fraction", "1.5",
        "--out-dir", str(tmp_path),
    ]) == 2


def test_console_script_is_installed():
    proc = subprocess.run(
        ["cdnfi", "--version"], capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == f"cdnfi {__version__}"
