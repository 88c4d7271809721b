"""CLI harness: golden output, exit codes, JSON payload stability, config."""

import json

from overlap_lab import GraphPolynomial, edge, make_multigraph, parse_polynomial
from overlap_lab.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, _merge_options, main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExpand:
    def test_golden_worked_example(self, capsys):
        code, out, _ = run(
            capsys, "expand", "--graph", "{1,2}", "--word", "C d d"
        )
        assert code == EXIT_OK
        assert out == "2{1,2}^2 - 8{1,2}{1,3} + 6{1,2}{3,4}\n"

    def test_expand_matches_classes_not_strings(self, capsys):
        code, out, _ = run(capsys, "expand", "--graph", "{1,2}", "--word", "C d d")
        expected = GraphPolynomial(
            [
                (edge(1, 2, 2), 2),
                (make_multigraph([(1, 2, 1), (2, 3, 1)]), -8),
                (make_multigraph([(1, 2, 1), (3, 4, 1)]), 6),
            ]
        )
        assert parse_polynomial(out.strip()) == expected

    def test_empty_word_echoes_canonically(self, capsys):
        code, out, _ = run(capsys, "expand", "--graph", "{5,9}")
        assert code == EXIT_OK and out == "{1,2}\n"

    def test_derivation_of_empty_is_zero(self, capsys):
        code, out, _ = run(capsys, "expand", "--graph", "1", "--word", "d")
        assert code == EXIT_OK and out == "0\n"

    def test_big_delta_token(self, capsys):
        _, via_d, _ = run(capsys, "expand", "--graph", "{1,2}", "--word", "D")
        _, via_cdd, _ = run(capsys, "expand", "--graph", "{1,2}", "--word", "C d d")
        assert via_d == via_cdd

    def test_bad_token_is_usage_error(self, capsys):
        code, _, err = run(capsys, "expand", "--graph", "{1,2}", "--word", "x")
        assert code == EXIT_USAGE and "token" in err

    def test_parse_error_is_usage_error(self, capsys):
        code, _, err = run(capsys, "expand", "--graph", "{1,1}")
        assert code == EXIT_USAGE and "offset" in err


class TestVerify:
    def test_equal_exits_zero(self, capsys):
        code, out, _ = run(capsys, "verify", "--graph", "{1,2}", "--n", "2")
        assert code == EXIT_OK
        assert "equal: true" in out
        assert "raw terms: lhs=48 rhs=16" in out

    def test_any_graph_n0_exits_zero(self, capsys):
        code, out, _ = run(capsys, "verify", "--graph", "{1,2}{1,3}{2,3}", "--n", "0")
        assert code == EXIT_OK

    def test_over_budget_exits_two(self, capsys):
        code, _, err = run(capsys, "verify", "--graph", "{1,2}", "--n", "9")
        assert code == EXIT_USAGE and "refused" in err

    def test_missing_required_flag_exits_two(self, capsys):
        assert main(["verify"]) == EXIT_USAGE


class TestCounts:
    def test_text(self, capsys):
        code, out, _ = run(capsys, "counts", "--graph", "{1,2}", "--n", "2")
        assert code == EXIT_OK
        assert "raw_lhs=48 raw_rhs=16" in out

    def test_json_payload(self, capsys):
        code, out, _ = run(capsys, "counts", "--graph", "{1,2}", "--n", "1", "--json")
        doc = json.loads(out)
        assert doc["payload"]["raw_rhs_terms"] == 4
        assert doc["payload"]["canonical_lhs_terms"] == 3


class TestEstimate:
    def test_beta_zero_mean(self, capsys):
        code, out, _ = run(
            capsys, "estimate", "--model", "sk", "--N", "3", "--beta", "0",
            "--graph", "{1,2}", "--samples", "50", "--seed", "1",
        )
        assert code == EXIT_OK
        assert "mean=0.333333333333333" in out

    def test_json_rerun_payload_identical(self, capsys, tmp_path):
        argv = [
            "estimate", "--model", "sk", "--N", "2", "--beta", "0.5",
            "--graph", "{1,2}", "--samples", "200", "--seed", "5", "--json",
        ]
        _, out1, _ = run(capsys, *argv)
        _, out2, _ = run(capsys, *argv)
        doc1, doc2 = json.loads(out1), json.loads(out2)
        assert doc1["payload"] == doc2["payload"]
        assert doc1["payload_sha256"] == doc2["payload_sha256"]

    def test_quadrature_method(self, capsys):
        code, out, _ = run(
            capsys, "estimate", "--model", "sk", "--N", "2", "--beta", "0",
            "--graph", "{1,2}", "--method", "quadrature", "--json",
        )
        doc = json.loads(out)
        assert abs(doc["payload"]["mean"] - 0.5) < 1e-12
        assert doc["payload"]["method"] == "quadrature"

    def test_out_file_and_curve(self, capsys, tmp_path):
        out_path = tmp_path / "est.json"
        csv_path = tmp_path / "curve.csv"
        code, _, _ = run(
            capsys, "estimate", "--model", "sk", "--N", "2", "--beta", "0.5",
            "--graph", "{1,2}", "--samples", "100", "--seed", "2", "--json",
            "--out", str(out_path), "--lambda-grid", "0.1,0.2",
            "--curve-out", str(csv_path),
        )
        assert code == EXIT_OK
        assert json.loads(out_path.read_text())["type"] == "quenched_estimate"
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "lambda,mean,stderr"
        assert len(lines) == 6  # +-0.2, +-0.1, 0 and the header

    def test_ea_model(self, capsys):
        code, out, _ = run(
            capsys, "estimate", "--model", "ea", "--lattice", "4", "--beta", "0",
            "--graph", "{1,2}", "--samples", "20", "--seed", "3",
        )
        assert code == EXIT_OK and "mean=0.0 " in out

    def test_invalid_model_size_exits_two(self, capsys):
        code, _, err = run(
            capsys, "estimate", "--model", "sk", "--N", "9", "--beta", "0.5",
            "--graph", "{1,2}",
        )
        assert code == EXIT_USAGE


class TestIdentityCommand:
    def test_quadrature_passes(self, capsys):
        code, out, _ = run(
            capsys, "identity", "--model", "sk", "--N", "2", "--beta", "0.5",
            "--graph", "{1,2}", "--n", "1", "--method", "quadrature",
        )
        assert code == EXIT_OK
        assert "passed: true" in out

    def test_json_report_schema(self, capsys):
        code, out, _ = run(
            capsys, "identity", "--model", "sk", "--N", "2", "--beta", "0.5",
            "--graph", "{1,2}", "--n", "1", "--method", "quadrature", "--json",
        )
        doc = json.loads(out)
        assert doc["type"] == "identity_report"
        assert doc["payload"]["model"] == {"kind": "sk", "beta": 0.5, "n_spins": 2}
        assert len(doc["payload"]["rows"]) == 2

    def test_budget_exits_two(self, capsys):
        code, _, err = run(
            capsys, "identity", "--model", "sk", "--N", "5", "--beta", "0.5",
            "--graph", "{1,2}{3,4}", "--n", "2", "--samples", "10",
        )
        assert code == EXIT_USAGE and "refused" in err

    def test_violation_beyond_tolerance_exits_one(self, capsys):
        # an absurd tolerance turns the tiny stencil residual into a failure
        code, out, _ = run(
            capsys, "identity", "--model", "sk", "--N", "2", "--beta", "0.5",
            "--graph", "{1,2}", "--n", "1", "--method", "quadrature",
            "--tol", "1e-30",
        )
        assert code == EXIT_VIOLATION
        assert "passed: false" in out


class TestBaselineCommand:
    def test_quadrature(self, capsys):
        code, out, _ = run(
            capsys, "baseline", "--model", "sk", "--N", "2", "--beta", "0.5",
            "--method", "quadrature",
        )
        assert code == EXIT_OK and "passed: true" in out

    def test_mc_small(self, capsys):
        code, out, _ = run(
            capsys, "baseline", "--model", "sk", "--N", "3", "--beta", "0.5",
            "--samples", "2000", "--seed", "4",
        )
        assert code == EXIT_OK


class TestConfigPrecedence:
    def test_config_file_fills_missing_flags(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 2}))
        code, out, _ = run(
            capsys, "verify", "--graph", "{1,2}", "--config", str(cfg)
        )
        assert code == EXIT_OK and "n: 2" in out

    def test_flags_override_config(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 2}))
        code, out, _ = run(
            capsys, "verify", "--graph", "{1,2}", "--n", "1", "--config", str(cfg)
        )
        assert "n: 1" in out

    def test_workers_default_from_env(self, monkeypatch):
        import argparse

        monkeypatch.setenv("OVERLAP_THREADS", "4")
        ns = argparse.Namespace(
            command="baseline", config=None, json=None, out=None, model=None,
            N=None, lattice=None, beta=None, samples=None, seed=None,
            workers=None, method=None, nodes=None,
        )
        assert _merge_options(ns)["workers"] == 4
