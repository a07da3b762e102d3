import json
import os

import numpy as np
import pytest

from romscale.cli import main
from romscale.data_model import read_snapshots

BURGERS_CFG = """\
nx = 64
nu = 5e-4
dt = 5e-4
t_collect_start = 0.1
t_collect_end = 1.0
n_snapshots = 30
seed = 3
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small end-to-end artifact tree: snapshots + basis."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "burgers.cfg"
    cfg.write_text(BURGERS_CFG)
    snaps = str(root / "snaps")
    basis = str(root / "basis")
    assert main(["generate", "burgers", "--config", str(cfg),
                 "--out", snaps]) == 0
    assert main(["pod", "--in", snaps, "--out", basis, "--rmax", "12"]) == 0
    return {"root": root, "cfg": str(cfg), "snaps": snaps, "basis": basis}


class TestGenerate:
    def test_manifest_written(self, workspace):
        with open(os.path.join(workspace["snaps"], "manifest.json")) as fh:
            manifest = json.load(fh)
        assert manifest["subcommand"] == "generate burgers"
        assert manifest["seed"] == 3
        assert "duration_seconds" in manifest

    def test_deterministic_reruns(self, workspace, tmp_path):
        out = str(tmp_path / "again")
        assert main(["generate", "burgers", "--config", workspace["cfg"],
                     "--out", out]) == 0
        a = read_snapshots(workspace["snaps"]).as_matrix()
        b = read_snapshots(out).as_matrix()
        np.testing.assert_array_equal(a, b)

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus_key = 3\n")
        assert main(["generate", "burgers", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 1

    def test_channel(self, tmp_path):
        out = str(tmp_path / "chan")
        assert main(["generate", "channel", "--out", out]) == 0
        assert read_snapshots(out).d == 3


class TestValidationErrors:
    def test_missing_snapshot_dir(self, tmp_path):
        assert main(["pod", "--in", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "o")]) == 1

    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == 1

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0


class TestLengthscale:
    def test_csv_columns(self, workspace, tmp_path):
        out = str(tmp_path / "ls")
        assert main(["lengthscale", "--basis", workspace["basis"],
                     "--snapshots", workspace["snaps"], "--r", "2,4",
                     "--out", out]) == 0
        text = open(os.path.join(out, "lengthscale.csv"),
                    newline="").read()
        assert text.startswith("r,lambda_ratio,delta1,delta2\r\n")
        assert text.count("\r\n") == 3

    def test_r_out_of_range(self, workspace, tmp_path):
        assert main(["lengthscale", "--basis", workspace["basis"],
                     "--r", "999", "--out", str(tmp_path / "x")]) == 1


class TestRun:
    def test_g_rom_trajectory(self, workspace, tmp_path):
        out = str(tmp_path / "run")
        assert main(["run", "--variant", "g", "--basis", workspace["basis"],
                     "--snapshots", workspace["snaps"], "--nu", "5e-4",
                     "--r", "4", "--dt", "5e-4", "--steps", "100",
                     "--out", out]) == 0
        lines = open(os.path.join(out, "trajectory.csv"),
                     newline="").read().splitlines()
        assert lines[0] == "t,KE,a_1,a_2,a_3,a_4"

    def test_blowup_is_data_not_failure(self, workspace, tmp_path):
        # huge dt destabilizes the ROM; exit code must still be 0
        out = str(tmp_path / "boom")
        assert main(["run", "--variant", "g", "--basis", workspace["basis"],
                     "--snapshots", workspace["snaps"], "--nu", "5e-4",
                     "--r", "4", "--dt", "0.5", "--steps", "200",
                     "--out", out]) == 0
        with open(os.path.join(out, "manifest.json")) as fh:
            manifest = json.load(fh)
        assert manifest["config"]["blew_up"] in (True, False)

    def test_ml_with_delta2(self, workspace, tmp_path):
        out = str(tmp_path / "ml")
        assert main(["run", "--variant", "ml", "--basis", workspace["basis"],
                     "--snapshots", workspace["snaps"], "--nu", "5e-4",
                     "--r", "4", "--dt", "5e-4", "--steps", "50",
                     "--alpha", "1.0", "--delta2", "--out", out]) == 0

    def test_ops_roundtrip_via_run(self, workspace, tmp_path):
        from romscale.pod import read_basis
        from romscale.rom_ops import assemble, write_operators
        basis = read_basis(workspace["basis"])
        ops_dir = str(tmp_path / "ops")
        write_operators(assemble(basis, 4, 5e-4), ops_dir)
        out = str(tmp_path / "runops")
        assert main(["run", "--variant", "g", "--basis", workspace["basis"],
                     "--snapshots", workspace["snaps"], "--ops", ops_dir,
                     "--r", "4", "--dt", "5e-4", "--steps", "50",
                     "--out", out]) == 0


class TestStats:
    def test_report_on_snapshots(self, workspace, tmp_path):
        out = str(tmp_path / "st")
        assert main(["stats", "--snapshots", workspace["snaps"],
                     "--out", out]) == 0
        text = open(os.path.join(out, "report.csv"), newline="").read()
        assert "ke_mean" in text and "n/a" in text  # no wall axis -> u_tau n/a

    def test_profile_for_channel(self, tmp_path):
        chan = str(tmp_path / "chan")
        out = str(tmp_path / "st")
        assert main(["generate", "channel", "--out", chan]) == 0
        assert main(["stats", "--snapshots", chan, "--nu", "1e-3",
                     "--out", out]) == 0
        assert os.path.isfile(os.path.join(out, "profile.csv"))

    def test_trajectory_requires_basis(self, workspace, tmp_path):
        assert main(["stats", "--snapshots", workspace["snaps"],
                     "--trajectory", "whatever.csv",
                     "--out", str(tmp_path / "x")]) == 1


class TestCalibrate:
    def test_threshold_csv(self, workspace, tmp_path):
        out = str(tmp_path / "cal")
        assert main(["calibrate", "--variant", "ml", "--which-delta", "2",
                     "--basis", workspace["basis"],
                     "--snapshots", workspace["snaps"],
                     "--config", workspace["cfg"],
                     "--r", "2,4", "--lo", "0", "--hi", "100", "--tol", "0.1",
                     "--dt", "5e-4", "--steps", "500", "--out", out]) == 0
        text = open(os.path.join(out, "calibrate.csv"), newline="").read()
        assert text.startswith("r,which_delta,threshold,verified\r\n")

    def test_grid_mismatch_is_validation_error(self, workspace, tmp_path):
        # default testbed config (nx=512) cannot match the 64-node basis
        assert main(["calibrate", "--variant", "ml", "--which-delta", "2",
                     "--basis", workspace["basis"],
                     "--snapshots", workspace["snaps"],
                     "--r", "2", "--lo", "0", "--hi", "10", "--tol", "0.1",
                     "--out", str(tmp_path / "x")]) == 1

    def test_unbracketed_threshold_is_numerical_failure(self, workspace, tmp_path):
        # stable ROM at both ends: no threshold inside [lo, hi]
        assert main(["calibrate", "--variant", "ml", "--which-delta", "2",
                     "--basis", workspace["basis"],
                     "--snapshots", workspace["snaps"],
                     "--config", workspace["cfg"],
                     "--r", "2", "--lo", "50", "--hi", "100", "--tol", "0.1",
                     "--dt", "5e-4", "--steps", "500",
                     "--out", str(tmp_path / "x")]) == 2
