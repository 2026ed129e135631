"""CLI: config parsing, exit codes, CSV output, reproducibility."""

import pytest

from gossiplab.cli import (
    ConfigError,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_PARAMS,
    EXIT_USAGE,
    build_config,
    build_parser,
    load_config_file,
    main,
)

DESK_FLAGS = [
    "--n", "100", "--c", "20", "--s", "10",
    "--startup-rounds", "120", "--seed", "9",
]


def write_conf(tmp_path, text, name="run.conf"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigFile:
    def test_parses_keys_comments_and_blanks(self, tmp_path):
        path = write_conf(
            tmp_path,
            "# full line comment\n"
            "n = 100\n"
            "c=20   # trailing comment\n"
            "\n"
            "  s = 10\n",
        )
        assert load_config_file(path) == {"n": "100", "c": "20", "s": "10"}

    def test_unknown_key(self, tmp_path):
        path = write_conf(tmp_path, "cache_size = 20\n")
        with pytest.raises(ConfigError, match="unknown key"):
            load_config_file(path)

    def test_duplicate_key(self, tmp_path):
        path = write_conf(tmp_path, "n = 10\nn = 20\n")
        with pytest.raises(ConfigError, match="duplicate"):
            load_config_file(path)

    def test_malformed_line(self, tmp_path):
        path = write_conf(tmp_path, "just some words\n")
        with pytest.raises(ConfigError, match="key=value"):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config_file(tmp_path / "absent.conf")


class TestBuildConfig:
    def parse(self, argv):
        return build_parser().parse_args(argv)

    def test_defaults_fill_unset_keys(self):
        ns = self.parse(["disseminate", "--seed", "1"])
        cfg = build_config(ns)
        assert (cfg.params.n, cfg.params.c, cfg.params.s) == (500, 100, 50)
        assert cfg.startup_rounds == 1000
        assert cfg.runs == 100

    def test_flag_beats_config_file(self, tmp_path):
        path = write_conf(tmp_path, "seed = 9\nn = 100\nc = 20\ns = 10\n")
        ns = self.parse(["disseminate", "--config", path, "--seed", "33"])
        cfg = build_config(ns)
        assert cfg.seed == 33
        assert cfg.params.n == 100

    def test_seed_is_mandatory(self):
        with pytest.raises(ValueError, match="seed is required"):
            build_config(self.parse(["disseminate", "--n", "100"]))

    def test_bad_value_in_config(self, tmp_path):
        path = write_conf(tmp_path, "seed = 1\nn = abc\n")
        with pytest.raises(ValueError, match="cannot parse"):
            build_config(self.parse(["disseminate", "--config", path]))


class TestExitCodes:
    def test_no_subcommand_is_usage(self, capsys):
        assert main([]) == EXIT_USAGE
        capsys.readouterr()

    def test_unknown_flag_is_usage(self, capsys):
        assert main(["disseminate", "--frobnicate", "1"]) == EXIT_USAGE
        capsys.readouterr()

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(
            ["disseminate", "--config", str(tmp_path / "no.conf"), "--seed", "1"]
        )
        assert code == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        path = write_conf(tmp_path, "bogus = 1\n")
        code = main(["disseminate", "--config", path, "--seed", "1"])
        assert code == EXIT_CONFIG
        capsys.readouterr()

    def test_missing_seed(self, capsys):
        assert main(["disseminate", "--n", "100"]) == EXIT_PARAMS
        assert "invalid parameters" in capsys.readouterr().err

    def test_invalid_param_value(self, capsys):
        argv = ["disseminate", *DESK_FLAGS, "--p-loss", "1.5"]
        assert main(argv) == EXIT_PARAMS
        capsys.readouterr()

    def test_grid_without_side(self, capsys):
        argv = ["disseminate", *DESK_FLAGS, "--topology", "grid"]
        assert main(argv) == EXIT_PARAMS
        capsys.readouterr()


class TestMatrixCommand:
    def test_prints_rows_and_sums(self, capsys):
        code = main(
            [
                "matrix",
                "--protocol", "shuffle-lossy",
                "--p-select", "0.5",
                "--p-drop", "0.889",
                "--p-loss", "0.1",
            ]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "0.040005" in out  # extinction entry of the 01 row
        assert "0.554995" in out
        assert out.count("1.000000") >= 4  # every row sums to one
        assert "row sum" in out

    def test_rejects_loss_on_lossless_variant(self, capsys):
        code = main(
            [
                "matrix",
                "--protocol", "shuffle",
                "--p-select", "0.5",
                "--p-drop", "0.5",
                "--p-loss", "0.2",
            ]
        )
        assert code == EXIT_PARAMS
        capsys.readouterr()


class TestTopologyExport:
    def test_clique_to_stdout(self, capsys):
        code = main(["topology-export", "--topology", "clique", "--nodes", "4"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "0: 1 2 3"
        assert lines[3] == "3: 0 1 2"

    def test_grid_to_file(self, tmp_path, capsys):
        target = tmp_path / "grid.txt"
        code = main(
            [
                "topology-export",
                "--topology", "grid",
                "--grid-side", "3",
                "--out", str(target),
            ]
        )
        assert code == EXIT_OK
        lines = target.read_text().splitlines()
        assert len(lines) == 9
        # center node of a 3x3 torus-free grid touches all four sides
        assert lines[4] == "4: 1 7 3 5"
        capsys.readouterr()

    def test_outdegree_needs_seed(self, capsys):
        code = main(
            ["topology-export", "--topology", "outdegree", "--nodes", "10"]
        )
        assert code == EXIT_PARAMS
        capsys.readouterr()

    def test_outdegree_deterministic(self, capsys):
        argv = [
            "topology-export",
            "--topology", "outdegree",
            "--nodes", "12",
            "--outdegree", "3",
            "--seed", "5",
        ]
        assert main(argv) == EXIT_OK
        first = capsys.readouterr().out
        assert main(argv) == EXIT_OK
        assert capsys.readouterr().out == first


class TestExperimentCommands:
    def test_occupancy_writes_csv(self, tmp_path, capsys):
        argv = [
            "occupancy", *DESK_FLAGS,
            "--measure-rounds", "30",
            "--out", str(tmp_path),
        ]
        assert main(argv) == EXIT_OK
        out = capsys.readouterr().out
        assert "P_inx=" in out and "P_drop=" in out
        data = (tmp_path / "occupancy.csv").read_bytes()
        assert b"\r" not in data
        lines = data.decode().splitlines()
        assert lines[0] == "round,p11,p10,p01"
        assert len(lines) == 31
        assert lines[1].startswith("1,")

    def test_disseminate_writes_csv(self, tmp_path, capsys):
        argv = [
            "disseminate", *DESK_FLAGS,
            "--measure-rounds", "40", "--runs", "3",
            "--out", str(tmp_path),
        ]
        assert main(argv) == EXIT_OK
        capsys.readouterr()
        lines = (tmp_path / "dissemination.csv").read_text().splitlines()
        assert lines[0] == (
            "round,mean_replication,std_replication,"
            "mean_coverage,std_coverage,successful_runs"
        )
        assert lines[1] == "0,1,0,1,0,3"
        assert len(lines) == 42

    def test_model_writes_csv(self, tmp_path, capsys):
        argv = [
            "model", *DESK_FLAGS,
            "--measure-rounds", "40", "--runs", "3",
            "--out", str(tmp_path),
        ]
        assert main(argv) == EXIT_OK
        assert "variant=shuffle" in capsys.readouterr().out
        assert (tmp_path / "model.csv").exists()

    def test_compare_requires_out(self, capsys):
        argv = ["compare", *DESK_FLAGS, "--measure-rounds", "30", "--runs", "3"]
        assert main(argv) == EXIT_USAGE
        capsys.readouterr()

    def test_compare_writes_three_files(self, tmp_path, capsys):
        argv = [
            "compare", *DESK_FLAGS,
            "--measure-rounds", "30", "--runs", "3",
            "--out", str(tmp_path),
        ]
        assert main(argv) == EXIT_OK
        capsys.readouterr()
        for name in ("replication.csv", "coverage.csv", "diff.csv"):
            assert (tmp_path / name).exists()
        rep = (tmp_path / "replication.csv").read_text().splitlines()
        assert rep[0] == "round,protocol_mean,protocol_std,model_mean,model_std"
        diff = (tmp_path / "diff.csv").read_text().splitlines()
        assert diff[0] == (
            "round,abs_diff_replication,protocol_std_replication,"
            "abs_diff_coverage,protocol_std_coverage"
        )
        assert len(rep) == len(diff) == 32

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        def run(sub):
            argv = [
                "compare", *DESK_FLAGS,
                "--measure-rounds", "25", "--runs", "3",
                "--out", str(tmp_path / sub),
            ]
            assert main(argv) == EXIT_OK
            capsys.readouterr()
            return {
                name: (tmp_path / sub / name).read_bytes()
                for name in ("replication.csv", "coverage.csv", "diff.csv")
            }

        assert run("a") == run("b")

    def test_jobs_do_not_change_bytes(self, tmp_path, capsys):
        def run(sub, jobs):
            argv = [
                "disseminate", *DESK_FLAGS,
                "--measure-rounds", "25", "--runs", "4",
                "--jobs", jobs,
                "--out", str(tmp_path / sub),
            ]
            assert main(argv) == EXIT_OK
            capsys.readouterr()
            return (tmp_path / sub / "dissemination.csv").read_bytes()

        assert run("serial", "1") == run("pool", "2")
