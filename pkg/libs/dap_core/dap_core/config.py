# dap_core/config.py
"""
Run configuration.

A config file is YAML holding flat dotted keys (``propagation.sigma_macro_db: 8``)
or the same keys nested by section. Omitted keys take the reference defaults.
SINR targets are given in dB and converted to linear exactly once, here.
"""
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Literal, Mapping

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError
from .models import Method, SystemParams, UserDistribution
from .sweeps import log_zeta_grid, n_range_limit, validate_zeta_grid
from .units import db_to_linear

log = logging.getLogger(__name__)

LOG_LEVEL = os.getenv("DAP_LOG_LEVEL", "INFO")


class FlatConfig(BaseModel):
    """Every accepted key, under its dotted name."""
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=False)

    spreading_factor: float = Field(128.0, alias="system.spreading_factor", gt=0)
    gamma_macro_db: float = Field(7.0, alias="system.gamma_macro_db")
    gamma_micro_db: float = Field(8.45, alias="system.gamma_micro_db")
    region_side_m: float = Field(1000.0, alias="geometry.region_side_m", gt=0)
    base_separation_m: float = Field(300.0, alias="geometry.base_separation_m", ge=0)
    breakpoint_macro_m: float = Field(100.0, alias="propagation.breakpoint_macro_m", gt=0)
    breakpoint_micro_m: float = Field(100.0, alias="propagation.breakpoint_micro_m", gt=0)
    sigma_macro_db: float = Field(8.0, alias="propagation.sigma_macro_db", ge=0)
    sigma_micro_db: float = Field(4.0, alias="propagation.sigma_micro_db", ge=0)
    gain_ratio: float = Field(10.0, alias="propagation.gain_ratio", gt=0)
    zeta: float = Field(0.005, alias="selection.zeta", gt=0)
    users: int = Field(26, alias="load.users", ge=1)
    noise_power: float = Field(1.0, alias="load.noise_power", gt=0)
    distribution: Literal["uniform", "hotspot"] = Field("uniform", alias="users.distribution")
    hotspot_fraction: float = Field(0.5, alias="users.hotspot_fraction", ge=0, le=1)
    hotspot_radius_m: float = Field(100.0, alias="users.hotspot_radius_m", gt=0)
    trials: int = Field(10_000, alias="run.trials", ge=1)
    seed: int = Field(1, alias="run.seed", ge=0, lt=2 ** 64)
    zeta_min: float = Field(1e-4, alias="sweep.zeta_min", gt=0, le=1)
    zeta_max: float = Field(0.1, alias="sweep.zeta_max", gt=0, le=1)
    zeta_points: int = Field(25, alias="sweep.zeta_points", ge=1)
    n_values: list[int] = Field([10, 14, 18, 22, 26], alias="sweep.n_values", min_length=1)
    balance_method: Method = Field(Method.analytic, alias="balance.method")
    zeta_lo: float = Field(1e-4, alias="balance.zeta_lo", gt=0, le=1)
    zeta_hi: float = Field(0.1, alias="balance.zeta_hi", gt=0, le=1)
    cdf_grid_points: int = Field(201, alias="cdf.grid_points", ge=2)
    report_zetas: list[float] = Field([0.001, 0.005, 0.05], alias="cdf.report_zetas", min_length=1)
    moments_min_count: int = Field(200, alias="moments.min_count", ge=2)
    moments_source: Literal["quadrature", "montecarlo"] = Field("quadrature", alias="moments.source")
    output_dir: str = Field("out", alias="output.dir", min_length=1)

    @field_validator("report_zetas")
    @classmethod
    def _report_zetas_in_range(cls, v: list[float]) -> list[float]:
        if any(not 0.0 < z <= 1.0 for z in v):
            raise ValueError("report zetas must lie in (0, 1]")
        return v


KEYS = {f.alias: name for name, f in FlatConfig.model_fields.items()}

# SystemParams field -> config key, for error reports
PARAM_KEYS = {
    "spreading_factor_G": "system.spreading_factor",
    "gamma_M": "system.gamma_macro_db",
    "gamma_mu": "system.gamma_micro_db",
    "region_side_L": "geometry.region_side_m",
    "base_separation_D": "geometry.base_separation_m",
    "breakpoint_macro_bM": "propagation.breakpoint_macro_m",
    "breakpoint_micro_bmu": "propagation.breakpoint_micro_m",
    "shadow_sigma_macro": "propagation.sigma_macro_db",
    "shadow_sigma_micro": "propagation.sigma_micro_db",
    "gain_ratio_h": "propagation.gain_ratio",
    "zeta": "selection.zeta",
    "N_total": "load.users",
    "noise_power_etaW": "load.noise_power",
}
KEY_PARAMS = {v: k for k, v in PARAM_KEYS.items()}


class RunConfig(BaseModel):
    """Resolved, validated configuration of one CLI run."""
    model_config = ConfigDict(frozen=True)

    flat: FlatConfig
    params: SystemParams
    dist: UserDistribution
    hotspot: UserDistribution
    zeta_grid: list[float]
    n_values_line: int | None = None

    @property
    def trials(self) -> int:
        return self.flat.trials

    @property
    def seed(self) -> int:
        return self.flat.seed

    @property
    def n_values(self) -> list[int]:
        return list(self.flat.n_values)

    def checked_n_values(self) -> list[int]:
        """sweep.n_values, each within [2, ceil(K) + 3]; only the N sweep needs them."""
        limit = n_range_limit(self.params)
        bad = [n for n in self.flat.n_values if not 2 <= n <= limit]
        if bad:
            raise ConfigError("sweep.n_values", f"{bad} outside [2, {limit}]", line=self.n_values_line)
        return list(self.flat.n_values)

    @property
    def search_interval(self) -> tuple[float, float]:
        return self.flat.zeta_lo, self.flat.zeta_hi

    @property
    def output_dir(self) -> Path:
        return Path(self.flat.output_dir)

    def to_flat(self) -> dict[str, Any]:
        """Resolved dotted mapping; itself a valid config file."""
        return self.flat.model_dump(mode="json", by_alias=True)


# -------------------------- YAML reading --------------------------
def _flatten(node: yaml.Node, prefix: str, out: dict[str, int], values: dict[str, Any], data: Any) -> None:
    """Collect dotted keys with their 1-based line from a composed mapping node."""
    for key_node, value_node in node.value:
        key = f"{prefix}{key_node.value}"
        sub = data.get(key_node.value) if isinstance(data, dict) else None
        if isinstance(value_node, yaml.MappingNode):
            _flatten(value_node, f"{key}.", out, values, sub)
            continue
        if key in out:
            raise ConfigError(key, "given more than once", line=key_node.start_mark.line + 1)
        out[key] = key_node.start_mark.line + 1
        values[key] = sub


def read_config_file(path: str | Path) -> tuple[dict[str, Any], dict[str, int]]:
    """
    Flat dotted values and their line numbers. A run manifest is accepted too:
    its resolved `config` echo is used.
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError("--config", f"file not found: {p}")
    text = p.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("--config", f"malformed YAML: {exc}", line=mark.line + 1 if mark else None) from exc
    if data is None:
        return {}, {}
    if not isinstance(data, dict) or not isinstance(root, yaml.MappingNode):
        raise ConfigError("--config", "top level must be a mapping of keys")
    if "schema_version" in data and isinstance(data.get("config"), dict):
        root = next(v for k, v in root.value if k.value == "config")
        data = data["config"]

    lines: dict[str, int] = {}
    values: dict[str, Any] = {}
    _flatten(root, "", lines, values, data)
    return values, lines


# -------------------------- validation --------------------------
def _raise_validation(exc: ValidationError, lines: Mapping[str, int], fallback: str) -> None:
    """Re-raise the first pydantic error as a ConfigError under its dotted key."""
    err = exc.errors()[0]
    loc = err.get("loc") or ()
    head = str(loc[0]) if loc else ""
    if head in KEYS:
        key = head
    else:
        # SystemParams fields, or a cross-field validator (empty loc)
        key = PARAM_KEYS.get(head, fallback)
    message = err.get("msg", str(exc))
    param = KEY_PARAMS.get(key)
    if param:
        message = f"{param}: {message}"
    raise ConfigError(key, message, line=lines.get(key)) from exc


def build_config(values: Mapping[str, Any], lines: Mapping[str, int] | None = None) -> RunConfig:
    lines = dict(lines or {})
    unknown = sorted(k for k in values if k not in KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key", line=lines.get(unknown[0]))
    try:
        flat = FlatConfig.model_validate(dict(values))
    except ValidationError as exc:
        _raise_validation(exc, lines, "config")
    if flat.zeta_points > 1 and not flat.zeta_min < flat.zeta_max:
        raise ConfigError("sweep.zeta_max", "must exceed sweep.zeta_min", line=lines.get("sweep.zeta_max"))
    if not flat.zeta_lo < flat.zeta_hi:
        raise ConfigError("balance.zeta_hi", "must exceed balance.zeta_lo", line=lines.get("balance.zeta_hi"))

    try:
        params = SystemParams(
            spreading_factor_G=flat.spreading_factor,
            gamma_M=db_to_linear(flat.gamma_macro_db),
            gamma_mu=db_to_linear(flat.gamma_micro_db),
            region_side_L=flat.region_side_m,
            base_separation_D=flat.base_separation_m,
            breakpoint_macro_bM=flat.breakpoint_macro_m,
            breakpoint_micro_bmu=flat.breakpoint_micro_m,
            shadow_sigma_macro=flat.sigma_macro_db,
            shadow_sigma_micro=flat.sigma_micro_db,
            gain_ratio_h=flat.gain_ratio,
            zeta=flat.zeta,
            N_total=flat.users,
            noise_power_etaW=flat.noise_power,
        )
    except ValidationError as exc:
        _raise_validation(exc, lines, "geometry.base_separation_m")

    hotspot = UserDistribution.hotspot(flat.hotspot_fraction, flat.hotspot_radius_m)
    dist = hotspot if flat.distribution == "hotspot" else UserDistribution.uniform()
    try:
        zeta_grid = validate_zeta_grid(log_zeta_grid(flat.zeta_min, flat.zeta_max, flat.zeta_points))
    except ValueError as exc:
        raise ConfigError("sweep.zeta_points", str(exc), line=lines.get("sweep.zeta_points")) from exc
    return RunConfig(
        flat=flat, params=params, dist=dist, hotspot=hotspot, zeta_grid=zeta_grid,
        n_values_line=lines.get("sweep.n_values"),
    )


def parse_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """File values, then non-None overrides (CLI flags) on top, then validation."""
    values, lines = read_config_file(path) if path is not None else ({}, {})
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
            lines.pop(key, None)
    config = build_config(values, lines)
    log.debug(f"resolved config: {config.to_flat()}")
    return config
