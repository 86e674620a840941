import json
from pathlib import Path

from finiterank.cli import main


def run(args):
    return main(args)


def test_check_weights_schwartz(tmp_path):
    code = run(["check-weights", "--scenario", "schwartz_1d",
                "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "weights_report.json").read_text())
    assert report["directed"]["passed"]
    assert report["bounded_away_from_zero"]["passed"]
    assert report["ratio"][0]["K_boxes"] is not None


def test_check_weights_om_finite(tmp_path):
    assert run(["check-weights", "--scenario", "om_finite_1d",
                "--out", str(tmp_path)]) == 0


def test_check_weights_broken_family(tmp_path):
    cfg = {
        "name": "broken",
        "order": 1, "value_dim": 1,
        "family": {"kind": "custom", "k_max": 0,
                   "entries": {"1,0": "indicator(0, 1)", "2,0": "indicator(2, 3)"}},
        "domain": {"boxes": [[[-1.0], [4.0]]], "points_per_axis": 251},
        "seminorms": {"sup": {"kind": "sup_all"}},
    }
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(cfg))
    code = run(["check-weights", "--scenario", str(path), "--out", str(tmp_path)])
    assert code == 4
    report = json.loads((tmp_path / "weights_report.json").read_text())
    assert not report["directed"]["passed"]
    bad = [p for p in report["directed"]["pairs"] if p["dominating"] is None]
    assert bad and bad[0]["witness"] is not None


def test_usage_error_exit_code(tmp_path):
    assert run(["check-weights", "--scenario", "no_such_scenario",
                "--out", str(tmp_path)]) == 2
    assert run(["bogus-command"]) == 2


def test_approximate_certified_and_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        code = run(["approximate", "--scenario", "schwartz_1d", "--eps", "0.2",
                    "--j", "1", "--l", "1", "--alpha", "sup",
                    "--out", str(out), "--seed", "7", "--refine", "2"])
        assert code == 0
    first = (out1 / "ledger_0p2.json").read_bytes()
    second = (out2 / "ledger_0p2.json").read_bytes()
    assert first == second
    pinned = (Path(__file__).parent / "fixtures"
              / "ledger_schwartz_j1_l1_eps0p2.json").read_bytes()
    assert first == pinned
    ledger = json.loads(first)
    assert ledger["certified"] is True
    assert (out1 / "ledger_0p2.csv").exists()
    assert (out1 / "factors_0p2.csv").exists()
    verify = json.loads((out1 / "verify_0p2.json").read_text())
    assert verify["domination_ok"] and verify["budget_ok"]


def test_approximate_unreachable_budget(tmp_path):
    # far below what the coarse grid can certify: uncertified (1) or a tagged
    # criterion failure (4), never a crash
    code = run(["approximate", "--scenario", "schwartz_1d", "--eps", "5e-05",
                "--j", "1", "--l", "1", "--grid", "301", "--out", str(tmp_path)])
    assert code in (1, 4)


def test_convergence_outputs(tmp_path):
    code = run(["convergence", "--scenario", "schwartz_1d", "--eps", "0.4,0.2",
                "--j", "1", "--l", "1", "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "convergence.csv").read_text().splitlines()
    assert rows[0] == "n,seminorm_error"
    errs = [float(r.split(",")[1]) for r in rows[1:]]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    rank_rows = (tmp_path / "rank_vs_eps.csv").read_text().splitlines()
    pairs = [(float(r.split(",")[0]), int(r.split(",")[1])) for r in rank_rows[1:]]
    eps_sorted = sorted(pairs, key=lambda t: -t[0])
    ranks = [rank for _, rank in eps_sorted]
    assert all(a <= b for a, b in zip(ranks, ranks[1:]))
