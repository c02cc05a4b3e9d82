import numpy as np
import pytest
import yaml

from experiments.quasiclassical import checks
from experiments.quasiclassical.checks import cmd_check, run_all_checks
from experiments.quasiclassical.convergence import cmd_effective, decay_slope, mixture_separation
from experiments.quasiclassical.ground_state import cmd_gse
from experiments.quasiclassical.report import RunReport
from experiments.quasiclassical.traps import cmd_trap, halving_pairs
from shared.config import ExperimentConfig, load_config
from shared.errors import ArgumentError, CutoffTooSmallError
from src.runner import main


def _config(configs_dir, name, tmp_path, **overrides):
    return load_config(configs_dir / f"{name}.yaml").with_overrides(output_dir=tmp_path, **overrides)


def _edited(configs_dir, name, tmp_path, edit):
    data = yaml.safe_load((configs_dir / f"{name}.yaml").read_text())
    edit(data)
    return ExperimentConfig.from_dict(data).with_overrides(output_dir=tmp_path)


def _assert_passed(report: RunReport):
    assert report.passed, [f"{a.invariant}: {a.detail}" for a in report.failures]
    assert report.exit_code == 0


def test_report_rejects_unknown_invariants():
    report = RunReport("check", "0" * 64, 0)
    with pytest.raises(ArgumentError):
        report.check("NOT-AN-ID", True, "")
    report.check("FOCK-CCR", False, "broken")
    assert report.exit_code == 3
    assert "FOCK-CCR" in report.summary()


def test_mixture_helpers():
    points = np.array([[1.0, 0.0], [0.0, 1.0j], [3.0, 0.0]])
    assert mixture_separation(points) == pytest.approx(1.0)
    eps = np.array([0.5, 0.25, 0.125])
    assert decay_slope(eps, np.exp(-2.0 / eps)) == pytest.approx(-2.0)
    assert decay_slope(eps, np.array([1.0, 0.0, 0.0])) is None
    assert list(halving_pairs([0.4, 0.2, 0.15])) == [(0.4, 0.2)]


async def test_inadequate_cutoff_stops_the_battery(configs_dir, tmp_path):
    config = _config(configs_dir, "check_adversarial", tmp_path)
    with pytest.raises(CutoffTooSmallError) as info:
        await run_all_checks(config)
    assert info.value.cutoff == 1
    assert info.value.exit_code == 2


async def test_main_exit_codes(configs_dir, tmp_path):
    adversarial = str(configs_dir / "check_adversarial.yaml")
    assert await main(["check", "--config", adversarial, "--out", str(tmp_path)]) == 2
    assert await main(["check", "--config", adversarial, "--dry-run"]) == 0
    assert not list(tmp_path.iterdir())


async def test_crashing_check_becomes_a_failure(configs_dir, tmp_path):
    def check_ccr(config):
        raise RuntimeError("boom")

    config = _config(configs_dir, "check_default", tmp_path)
    results = await run_all_checks(config, [check_ccr])
    assert len(results) == 1
    assert results[0].invariant == checks.CHECK_INVARIANT["check_ccr"]
    assert not results[0].passed


@pytest.mark.parametrize("name", ["effective_vacuum", "effective_coherent", "effective_almost_periodic"])
async def test_effective_sweeps_pass(configs_dir, tmp_path, name):
    report = await cmd_effective(_config(configs_dir, name, tmp_path))
    _assert_passed(report)
    assert (tmp_path / "effective_gap.csv").exists()
    assert (tmp_path / "potential_limit.csv").exists()


async def test_mixture_sweep_checks_the_rate(configs_dir, tmp_path):
    report = await cmd_effective(_config(configs_dir, "effective_mixture", tmp_path))
    _assert_passed(report)
    ids = {a.invariant for a in report.assertions}
    assert {"EFF-MIXTURE-RATE", "EFF-RESOLVENT-MONOTONE"} <= ids


async def test_symmetric_mixture_has_no_gap(configs_dir, tmp_path):
    z = 1.0233267079464885

    def opposite_atoms(data):
        data["state"]["atoms"] = [
            {"weight": 0.5, "point": [z, z]},
            {"weight": 0.5, "point": [-z, -z]},
        ]

    config = _edited(configs_dir, "effective_mixture", tmp_path, opposite_atoms)
    report = await cmd_effective(config)
    _assert_passed(report)
    rate = [a for a in report.assertions if a.invariant == "EFF-MIXTURE-RATE"]
    assert len(rate) == 1 and "vanishes" in rate[0].detail


@pytest.mark.parametrize("name", ["trap_zero", "trap_harmonic", "trap_abs"])
async def test_trap_sweeps_pass(configs_dir, tmp_path, name):
    report = await cmd_trap(_config(configs_dir, name, tmp_path))
    _assert_passed(report)
    assert (tmp_path / "trap.csv").exists()
    assert all(row["max_cutoff"] <= 128 for row in report.metrics)


async def test_trap_respects_the_cutoff_ceiling(configs_dir, tmp_path):
    def low_ceiling(data):
        data["trap"]["cutoff_ceiling"] = 8
        data["sweep"]["eps"] = [0.4]

    config = _edited(configs_dir, "trap_harmonic", tmp_path, low_ceiling)
    with pytest.raises(CutoffTooSmallError) as info:
        await cmd_trap(config)
    assert info.value.cutoff == 8
    assert info.value.required > 8


async def test_gse_on_the_box(configs_dir, tmp_path):
    report = await cmd_gse(_config(configs_dir, "gse_massive", tmp_path, eps=[0.5, 0.25]))
    _assert_passed(report)
    ids = {a.invariant for a in report.assertions}
    assert {"GSE-UPPER", "GSE-FLOOR", "SPEC-BRUTE-FORCE", "GSE-EXTRAPOLATION"} <= ids
    assert (tmp_path / "gse.csv").exists()
    assert (tmp_path / "gse_minimizer.txt").exists()


async def test_gse_skips_a_coupled_zero_mode(tmp_path):
    config = ExperimentConfig.from_dict({
        "model": {
            "grid": {"half_width": 1.5, "points": 16},
            "modes": {"family": "nelson", "k_max": 1.0, "points": 3, "mass": 0.0, "form_factor": "constant"},
        },
        "run": {"experiment": "gse", "output_dir": str(tmp_path)},
    })
    report = await cmd_gse(config)
    assert not report.assertions
    assert any("massless" in message for message in report.flags)
    assert any("zero-frequency" in message for message in report.flags)


async def test_gse_runs_on_a_massless_field_without_zero_modes(configs_dir, tmp_path):
    def massless_pair(data):
        data["model"]["modes"] = {
            "family": "nelson", "k_max": 1.0, "points": 2, "mass": 0.0,
            "form_factor": "constant", "coupling_strength": 0.2,
        }
        data["sweep"]["eps"] = [0.5, 0.25]
        data["gse"].update(brute_force=False, refine_atoms=0)

    report = await cmd_gse(_edited(configs_dir, "gse_massive", tmp_path, massless_pair))
    _assert_passed(report)
    ids = {a.invariant for a in report.assertions}
    assert {"GSE-UPPER", "GSE-FLOOR", "GSE-EXTRAPOLATION"} <= ids
    assert any("massless" in message for message in report.flags)


async def test_full_battery(configs_dir, tmp_path):
    report = await cmd_check(_config(configs_dir, "check_default", tmp_path))
    _assert_passed(report)
    ids = {a.invariant for a in report.assertions}
    assert {"FOCK-CCR", "SPEC-LANCZOS-ORACLE"} <= ids


async def test_main_writes_the_report(configs_dir, tmp_path):
    code = await main([
        "effective", "--config", str(configs_dir / "effective_vacuum.yaml"),
        "--out", str(tmp_path), "--eps-list", "0.5", "0.25",
    ])
    assert code == 0
    assert (tmp_path / "effective_report.yaml").exists()
