import json

import numpy as np
import pytest

from dyncomm.cli import main
from dyncomm.harness import SbmParams, generate_dynamic_sbm


def write_d1_like(path, seed=0):
    """Contact-list files of a realistic shape: 242 string ids,
    timestamps in seconds binned into 7 windows, class labels as truth."""
    ev, gt = generate_dynamic_sbm(SbmParams(n_nodes=242, n_communities=10, T=7, p_in=0.25,
                                            p_out=0.01, seed=seed))
    rng = np.random.default_rng(seed)
    window = 3600.0
    lines = ["# time\tu\tv"]
    for row in ev.splitlines():
        t, u, v = row.split("\t")
        stamp = int(t) * window + rng.integers(0, 3600)
        lines.append(f"{stamp}\tp{u}\tp{v}")
    truth = ["# slice\tnode\tcommunity"]
    for row in gt.splitlines():
        t, n, c = row.split("\t")
        truth.append(f"{t}\tp{n}\tclass{c}")
    (path / "contacts.tsv").write_text("\n".join(lines) + "\n")
    (path / "classes.tsv").write_text("\n".join(truth) + "\n")
    return path / "contacts.tsv", path / "classes.tsv"


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse usage errors
        return exc.code


def test_synth_then_detect(tmp_path, capsys):
    assert main(["synth", "--nodes", "30", "--communities", "2", "--slices", "2",
                 "--p-in", "0.6", "--out", str(tmp_path / "d")]) == 0
    assert (tmp_path / "d" / "params.json").exists()
    code = main(["detect", "--input", str(tmp_path / "d" / "events.tsv"),
                 "--truth", str(tmp_path / "d" / "truth.tsv"), "--runs", "2", "--restarts", "2",
                 "--out", str(tmp_path / "o")])
    assert code == 0
    assert capsys.readouterr().out.splitlines()[-1].startswith("mntd\tmodularity ")
    assert (tmp_path / "o" / "run_001" / "factors.npz").exists()
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["table_row"]["variant"] == "mntd"


@pytest.mark.parametrize(
    "argv",
    [
        ["detect", "--input", "x.tsv"],  # missing --out
        ["detect", "--input", "x.tsv", "--out", "o", "--k", "2", "--variant", "nope"],
        ["detect", "--input", "x.tsv", "--out", "o"],  # no k and no truth
        ["detect", "--input", "x.tsv", "--out", "o", "--k", "2", "--slice-mode", "window"],
        ["detect", "--input", "x.tsv", "--out", "o", "--k", "2", "--lambda-a", "-1"],
        ["bogus"],
    ],
)
def test_config_errors_exit_1(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(argv) == 1


def test_missing_and_malformed_input_exit_1(tmp_path):
    assert main(["detect", "--input", str(tmp_path / "none.tsv"), "--k", "2", "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.tsv"
    bad.write_text("0\ta\n")
    assert main(["detect", "--input", str(bad), "--k", "2", "--out", str(tmp_path)]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_runtime_errors_exit_2(tmp_path):
    ev = tmp_path / "ev.tsv"
    ev.write_text("0\ta\tb\n")
    assert main(["detect", "--input", str(ev), "--k", "3", "--out", str(tmp_path / "o")]) == 1
    # the report directory cannot be created over a file
    blocker = tmp_path / "taken"
    blocker.write_text("")
    assert main(["detect", "--input", str(ev), "--k", "1", "--runs", "1", "--out", str(blocker)]) == 2
    # weights this large overflow the multiplicative updates
    ev.write_text("0\ta\tb\t1e300\n")
    assert main(["detect", "--input", str(ev), "--k", "1", "--weighting", "count", "--runs", "1",
                 "--restarts", "1", "--out", str(tmp_path / "o")]) == 2


def test_table(tmp_path, capsys):
    for v, nmi in (("mntd", "0.900±0.05"), ("nrd", "0.800±0.10")):
        d = tmp_path / v
        d.mkdir()
        row = {"variant": v, "nmi": nmi, "modularity": "0.400±0.02"}
        (d / "summary.json").write_text(json.dumps({"table_row": row}))
    assert main(["table", str(tmp_path / "mntd" / "summary.json"), str(tmp_path / "nrd" / "summary.json")]) == 0
    assert capsys.readouterr().out == "metric\tMNTD\tNRD\nNMI\t0.900±0.05\t0.800±0.10\n"


def test_d1_shaped_structural_run(tmp_path, capsys):
    ev, gt = write_d1_like(tmp_path)
    for variant in ("mntd", "nrd", "merandom"):
        code = main(["detect", "--input", str(ev), "--truth", str(gt), "--slice-mode", "window",
                     "--window", "3600", "--variant", variant, "--runs", "1", "--restarts", "1",
                     "--max-iters", "100", "--out", str(tmp_path / variant)])
        assert code == 0
    man = json.loads((tmp_path / "mntd" / "manifest.json").read_text())
    assert man["nodes"] == 242 and man["slices"] == list(range(7)) and man["k"] == 10
    capsys.readouterr()
    paths = [str(tmp_path / v / "summary.json") for v in ("mntd", "nrd", "merandom")]
    assert main(["table", *paths]) == 0
    head, body = capsys.readouterr().out.splitlines()
    assert head == "metric\tMNTD\tNRD\tMERANDOM"
    assert all("±" in cell for cell in body.split("\t")[1:])
