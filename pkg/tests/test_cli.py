"""Tests for the command-line front end."""
import csv
import io
import json

import pytest

from app import cli
from app.cli import CliUsageError, main, parse_config
from app.errors import InsufficientKeyPool, NegotiationOverflow
from app.schemas.records import LedgerRecord, SessionSummary
from app.settings import settings

SMALL_SESSION = ["--N", "20000", "--m", "16", "--s", "256", "--seed", "7"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def failed_summary():
    return SessionSummary(
        n_alice=10, n_bob=10, n_matched=9, E_emp=0.2, lambda_=7,
        verification_passed=False, ell=0,
        ledger=LedgerRecord(consumed_mapping_otp=64, consumed_k_upd=256, consumed_verification=51,
                            consumed_pa_seed=0, produced_ell=0, net_R=-320),
        transcript_digest="0" * 64, detection_fraction=0.1,
        detection_rate_analytic=0.1449, ber_analytic=0.245, ber_event_weighted=0.2424,
    )


class TestParseConfig:
    """Test flag parsing into a validated config."""

    def test_defaults(self):
        cfg = parse_config(["analyze"])
        assert (cfg.mu, cfg.m, cfg.eta, cfg.pd) == (0.1, 1024, 0.8, 1e-8)

    def test_simulate_default_rounds(self):
        cfg = parse_config(["simulate"])
        assert cfg.N == 10**6

    def test_sweep(self):
        cfg = parse_config(["keyrate", "--m", "16,32,64"])
        assert cfg.sweep.param == "m"
        assert cfg.sweep.values == [16, 32, 64]
        assert cfg.m == 16

    def test_sweep_only_for_keyrate(self):
        with pytest.raises(CliUsageError, match="--mu: lists are only accepted by keyrate"):
            parse_config(["simulate", "--mu", "0.1,0.2"])

    def test_one_sweep_only(self):
        with pytest.raises(CliUsageError, match="only one parameter"):
            parse_config(["keyrate", "--mu", "0.1,0.2", "--eta", "0.5,0.6"])

    def test_invalid_value_names_flag(self):
        with pytest.raises(CliUsageError, match="--m"):
            parse_config(["analyze", "--m", "1000"])

    def test_non_numeric(self):
        with pytest.raises(CliUsageError, match="--mu: not a number"):
            parse_config(["analyze", "--mu", "bright"])

    def test_seed_falls_back_to_environment(self, monkeypatch):
        monkeypatch.setattr(settings, "PKD_SEED", 11)
        cfg = parse_config(["simulate"])
        assert cfg.seed == 11
        cfg = parse_config(["simulate", "--seed", "3"])
        assert cfg.seed == 3

    def test_delta_theta_list(self):
        cfg = parse_config(["entangle-check", "--delta-theta", "0,1.5"])
        assert cfg.delta_theta == [0.0, 1.5]


class TestCommands:
    """Test each subcommand end to end."""

    def test_analyze(self, capsys):
        code, out, _ = run(capsys, "analyze")
        assert code == 0
        record = json.loads(out)
        assert record["p_usd"]["text"] == "1.94e-3657"
        assert record["p_min"] == pytest.approx(0.99826, abs=1e-4)

    def test_analyze_csv(self, capsys):
        code, out, _ = run(capsys, "analyze", "--format", "csv")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert rows[0]["p_usd"] == "1.94e-3657"

    def test_keyrate_sweep_csv(self, capsys):
        code, out, _ = run(capsys, "keyrate", "--mu", "0.05,0.1,0.2", "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "param,n,E,ell,R"
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [float(r["param"]) for r in rows] == [0.05, 0.1, 0.2]
        n = [float(r["n"]) for r in rows]
        assert n[0] < n[1] < n[2]

    def test_keyrate_reference_point(self, capsys):
        code, out, _ = run(capsys, "keyrate")
        assert code == 0
        (row,) = json.loads(out)
        assert row["R"] == pytest.approx(2e7, rel=0.15)

    def test_simulate(self, capsys):
        code, out, _ = run(capsys, "simulate", *SMALL_SESSION)
        assert code == 0
        summary = json.loads(out)
        assert summary["verification_passed"] is True
        assert "lambda" in summary
        assert summary["ell"] > 0

    def test_out_receives_transcript(self, capsys, tmp_path):
        target = tmp_path / "run.json"
        code, out, _ = run(capsys, "simulate", *SMALL_SESSION, "--out", str(target))
        assert code == 0
        summary = json.loads(out)
        transcript = json.loads(target.read_text())
        assert {"announced", "negotiation", "tag_hex", "config"} <= set(transcript)
        assert transcript["transcript_digest"] == summary["transcript_digest"]
        assert len(transcript["announced"]["alice"]) == summary["n_alice"]

    def test_transcript_is_reproducible(self, capsys, tmp_path):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        assert run(capsys, "simulate", *SMALL_SESSION, "--out", str(first))[0] == 0
        assert run(capsys, "simulate", *SMALL_SESSION, "--workers", "3", "--out", str(second))[0] == 0
        assert first.read_bytes() == second.read_bytes()

    def test_simulate_without_events(self, capsys):
        code, out, _ = run(capsys, "simulate", "--mu", "0", "--pd", "0", "--N", "1000", "--m", "16", "--s", "64")
        assert code == 0
        summary = json.loads(out)
        assert summary["n_matched"] == 0
        assert summary["ell"] == 0

    def test_simulate_cap(self, capsys):
        code, _, err = run(capsys, "simulate", "--N", str(10**9))
        assert code == 2
        assert "keyrate" in err

    def test_entangle_check(self, capsys):
        code, out, _ = run(capsys, "entangle-check")
        assert code == 0
        record = json.loads(out)
        assert record["passed"] is True
        assert len(record["rows"]) == 5 * 4

    def test_entangle_check_csv(self, capsys):
        code, out, _ = run(capsys, "entangle-check", "--k-max", "2", "--delta-theta", "0,1", "--format", "csv")
        assert code == 0
        assert len(out.strip().splitlines()) == 1 + 3 * 2

    def test_schema(self, capsys):
        code, out, _ = run(capsys, "schema")
        assert code == 0
        schemas = json.loads(out)
        assert {"AnalysisRecord", "KeyRateRow", "SessionSummary", "EntanglementRecord"} <= set(schemas)

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "analysis.json"
        code, out, _ = run(capsys, "analyze", "--out", str(target))
        assert code == 0
        assert out == ""
        assert json.loads(target.read_text())["m"] == 1024


class TestExitCodes:
    """Test the exit status of each failure class."""

    def test_unknown_flag(self, capsys):
        assert run(capsys, "analyze", "--bogus", "1")[0] == 2

    def test_abbreviated_flag_rejected(self, capsys):
        assert run(capsys, "analyze", "--mu", "0.1", "--forma", "csv")[0] == 2

    def test_bad_value(self, capsys):
        code, _, err = run(capsys, "keyrate", "--m", "1000")
        assert code == 2
        assert "--m" in err

    def test_help(self, capsys):
        assert run(capsys, "--help")[0] == 0

    def test_key_pool(self, capsys, monkeypatch):
        def exhausted(*args, **kwargs):
            raise InsufficientKeyPool(requested=10371, available=100)

        monkeypatch.setattr(cli, "build_simulation", exhausted)
        code, _, err = run(capsys, "simulate", *SMALL_SESSION)
        assert code == 3
        assert "100 bits left" in err

    def test_negotiation_overflow(self, capsys, monkeypatch):
        def overflow(*args, **kwargs):
            raise NegotiationOverflow(needed=50, t=40)

        monkeypatch.setattr(cli, "build_simulation", overflow)
        assert run(capsys, "simulate", *SMALL_SESSION)[0] == 4

    def test_verification_failure(self, capsys, monkeypatch):
        monkeypatch.setattr(cli, "build_simulation", lambda *args, **kwargs: (failed_summary(), {}))
        code, out, err = run(capsys, "simulate", *SMALL_SESSION)
        assert code == 5
        assert json.loads(out)["verification_passed"] is False
        assert "tags" in err


class TestEdgeCases:
    """Test degenerate operating points through the CLI."""

    def test_analyze_vacuum(self, capsys):
        code, out, _ = run(capsys, "analyze", "--mu", "0")
        assert code == 0
        record = json.loads(out)
        assert record["p_usd"]["text"] == "0"
        assert record["p_usd"]["ln"] is None
        assert record["p_min"] == pytest.approx(1 - 1 / 1024, abs=1e-6)

    def test_analyze_small_m_exact(self, capsys):
        code, out, _ = run(capsys, "analyze", "--m", "8")
        assert code == 0
        record = json.loads(out)
        assert record["p_usd_exact"] is not None
        assert record["secrecy_epsilon"] is None

    def test_keyrate_without_rounds(self, capsys):
        code, out, _ = run(capsys, "keyrate", "--N", "0")
        assert code == 0
        (row,) = json.loads(out)
        assert (row["n"], row["ell"], row["R"]) == (0.0, 0, 0)
