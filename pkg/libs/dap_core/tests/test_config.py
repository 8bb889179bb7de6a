import json
from pathlib import Path

import pytest
import yaml

from dap_core.config import parse_config
from dap_core.errors import ConfigError
from dap_core.models import DistributionKind, Method


def _write(tmp_path: Path, text: str) -> Path:
    p = tmp_path / "run.yaml"
    p.write_text(text, encoding="utf-8")
    return p


def test_empty_file_gives_reference_defaults(tmp_path: Path):
    cfg = parse_config(_write(tmp_path, ""))
    assert cfg.params.N_total == 26
    assert cfg.params.zeta == 0.005
    assert cfg.trials == 10_000 and cfg.seed == 1
    assert cfg.params.gamma_M == pytest.approx(5.0119, abs=1e-4)
    assert cfg.params.base_separation_D == 300 and cfg.params.region_side_L == 1000
    assert len(cfg.zeta_grid) == 25
    assert cfg.n_values == [10, 14, 18, 22, 26]
    assert cfg.flat.balance_method == Method.analytic
    assert cfg.dist.is_uniform


def test_no_file_is_defaults():
    assert parse_config(None).to_flat() == parse_config(None, {}).to_flat()


def test_flat_and_nested_keys_agree(tmp_path: Path):
    flat = parse_config(_write(tmp_path, "propagation.sigma_macro_db: 6\nselection.zeta: 0.01\n"))
    nested = parse_config(_write(tmp_path, "propagation:\n  sigma_macro_db: 6\nselection:\n  zeta: 0.01\n"))
    assert flat.params == nested.params
    assert flat.params.shadow_sigma_macro == 6


def test_db_targets_converted_once(tmp_path: Path):
    cfg = parse_config(_write(tmp_path, "system.gamma_macro_db: 10\n"))
    assert cfg.params.gamma_M == pytest.approx(10.0)
    assert cfg.to_flat()["system.gamma_macro_db"] == 10


def test_unknown_key_names_key_and_line(tmp_path: Path):
    with pytest.raises(ConfigError) as err:
        parse_config(_write(tmp_path, "selection.zeta: 0.01\nbogus.key: 3\n"))
    assert err.value.key == "bogus.key"
    assert err.value.line == 2


def test_negative_side_rejected(tmp_path: Path):
    with pytest.raises(ConfigError) as err:
        parse_config(_write(tmp_path, "geometry:\n  region_side_m: -5\n"))
    assert err.value.key == "geometry.region_side_m"
    assert err.value.line == 2
    assert "region_side_L" in str(err.value)


def test_type_mismatch(tmp_path: Path):
    with pytest.raises(ConfigError) as err:
        parse_config(_write(tmp_path, "run.trials: many\n"))
    assert err.value.key == "run.trials" and err.value.line == 1


def test_cross_field_geometry(tmp_path: Path):
    with pytest.raises(ConfigError) as err:
        parse_config(_write(tmp_path, "geometry.base_separation_m: 600\n"))
    assert err.value.key == "geometry.base_separation_m"


def test_n_values_limited_by_pole_capacity(tmp_path: Path):
    cfg = parse_config(_write(tmp_path, "selection.zeta: 0.01\nsweep.n_values: [10, 40]\n"))
    with pytest.raises(ConfigError) as err:
        cfg.checked_n_values()
    assert err.value.key == "sweep.n_values"
    assert err.value.line == 2


def test_n_values_do_not_block_other_commands(tmp_path: Path):
    # K drops to 13.8, below the default N range; only the N sweep cares
    cfg = parse_config(_write(tmp_path, "system.gamma_macro_db: 10\nload.users: 12\n"))
    assert cfg.params.N_total == 12
    with pytest.raises(ConfigError):
        cfg.checked_n_values()
    assert parse_config().checked_n_values() == [10, 14, 18, 22, 26]


def test_duplicate_key(tmp_path: Path):
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, "selection.zeta: 0.01\nselection:\n  zeta: 0.02\n"))


def test_missing_file(tmp_path: Path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.yaml")


def test_flags_override_file(tmp_path: Path):
    cfg = parse_config(_write(tmp_path, "run.seed: 3\nrun.trials: 50\n"), {"run.seed": 7, "run.trials": None})
    assert cfg.seed == 7 and cfg.trials == 50


def test_resolved_config_is_a_valid_config(tmp_path: Path):
    cfg = parse_config(_write(tmp_path, "users.distribution: hotspot\nsweep.zeta_min: 1.0e-3\n"))
    assert cfg.dist.kind == DistributionKind.hotspot
    p = tmp_path / "echo.yaml"
    p.write_text(yaml.safe_dump(cfg.to_flat()), encoding="utf-8")
    assert parse_config(p) == cfg


def test_manifest_replays_its_config(tmp_path: Path):
    cfg = parse_config(_write(tmp_path, "selection.zeta: 0.02\n"))
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"schema_version": 1, "command": "simulate", "config": cfg.to_flat()}), encoding="utf-8")
    assert parse_config(p).params == cfg.params
