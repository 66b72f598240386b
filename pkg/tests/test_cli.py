import io
import json
import shutil
from pathlib import Path

import pytest

from renofriendly.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_ai_factor():
    assert cli("ai-factor", "--b", "0.7") == (0, "9/17 (≈ 0.5294)\n")
    assert cli("ai-factor", "--b", "0.5") == (0, "1\n")
    assert cli("ai-factor", "--b", "9/10") == (0, "3/19 (≈ 0.1579)\n")


def test_ai_factor_general_reference():
    assert cli("ai-factor", "--b", "0.7", "--a-r", "2") == (0, "18/17 (≈ 1.0588)\n")


def test_ai_factor_json():
    code, out = cli("--json", "ai-factor", "--b", "0.7")
    assert json.loads(out) == {"b_c": "7/10", "a_c": "9/17", "value": 9 / 17}


def test_ai_factor_rejects_b_of_one(capsys):
    code, _ = cli("ai-factor", "--b", "1.0")
    assert code == 2
    assert "decrease factor out of range" in capsys.readouterr().err


def test_probs_one_loss():
    code, out = cli("probs", "--rates", "17,15", "--losses", "1")
    assert code == 0
    assert "flow 0: 17/32" in out and "flow 1: 15/32" in out


def test_probs_two_losses():
    code, out = cli("probs", "--rates", "17,15", "--losses", "2")
    assert "{0}: 289/1024" in out
    assert "{0,1}: 510/1024" in out
    assert "{1}: 225/1024" in out
    assert "(0,1): 255/1024" in out


def test_probs_json():
    _, out = cli("--json", "probs", "--rates", "17,15", "--losses", "2")
    d = json.loads(out)
    assert d["hit_sets"] == {"{0}": "289/1024", "{1}": "225/1024", "{0,1}": "255/512"}


def test_probs_rejects_zero_rate():
    assert cli("probs", "--rates", "1,0")[0] == 2


def test_simulate_writes_trace_and_svgs(tmp_path):
    code, out = cli("simulate", "--config", str(CONFIGS / "sync_1v1.toml"),
                    "--trace-csv", str(tmp_path / "t.csv"), "--svg", str(tmp_path / "svg"))
    assert code == 0
    assert "reno" in out and "creno" in out
    assert (tmp_path / "t.csv").read_text().startswith("round,t_start_s,flow_id,cca,")
    svgs = sorted(p.name for p in (tmp_path / "svg").iterdir())
    assert svgs == ["summary_whiskers.svg", "sync-1v1_sawtooth.svg"]


def test_simulate_json_and_seed_override():
    _, a = cli("--json", "--seed", "3", "simulate", "--config", str(CONFIGS / "pie_1v1.toml"))
    _, b = cli("--json", "--seed", "4", "simulate", "--config", str(CONFIGS / "pie_1v1.toml"))
    rows = json.loads(a)
    assert {r["flow_group"] for r in rows} == {"A", "B"}
    assert a != b


def test_grid(tmp_path):
    cfg = tmp_path / "grid.toml"
    text = (CONFIGS / "grid_taildrop.toml").read_text()
    text = text.replace("link_mbps = [4, 12, 40, 120, 200]", "link_mbps = [12, 40]")
    text = text.replace("base_rtt_ms = [5, 10, 20, 50, 100]", "base_rtt_ms = [10]")
    cfg.write_text(text)
    code, _ = cli("grid", "--config", str(cfg), "--out", str(tmp_path / "s.csv"), "--svg", str(tmp_path / "svg"))
    assert code == 0
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 1 + 2 * 2 * 2
    assert (tmp_path / "svg" / "summary_whiskers.svg").exists()


def test_chain_and_csvs(tmp_path):
    code, out = cli("chain", "--config", str(CONFIGS / "probabilistic_1v1.toml"),
                    "--states-csv", str(tmp_path / "s.csv"), "--summary-csv", str(tmp_path / "r.csv"))
    assert code == 0 and "ratio_to_fair" in out
    assert (tmp_path / "r.csv").read_text().startswith("flow,cca,long_run_rate,ratio_to_fair\n")


def test_chain_rejects_pie():
    with pytest.raises(SystemExit):
        cli("chain", "--config", str(CONFIGS / "pie_1v1.toml"))


def test_mc_json():
    code, out = cli("--json", "mc", "--config", str(CONFIGS / "probabilistic_1v1.toml"), "--seeds", "2")
    d = json.loads(out)
    assert d["seeds"] == 2 and [g["cca"] for g in d["groups"]] == ["reno", "creno"]


def test_missing_config_reports_path(tmp_path, capsys):
    code, _ = cli("simulate", "--config", str(tmp_path / "nope.toml"))
    assert code == 2
    assert "nope.toml" in capsys.readouterr().err


def test_bad_config_key(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('[[flows]]\ncca = "reno"\nspeed = 3\n')
    assert cli("simulate", "--config", str(p))[0] == 2
    assert "unknown key" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("renofriendly") is None, reason="console script not installed")
def test_console_script():
    import subprocess

    out = subprocess.run(["renofriendly", "ai-factor", "--b", "0.7"], capture_output=True, text=True, check=True)
    assert out.stdout == "9/17 (≈ 0.5294)\n"
