# dap_core/models.py
from __future__ import annotations

import math
from enum import Enum
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import special

from .units import db_to_linear

# reference defaults
DEFAULT_GAMMA_M_DB = 7.0
DEFAULT_GAMMA_MU_DB = 8.45


class Tier(str, Enum):
    macro = "macro"
    micro = "micro"


class DistributionKind(str, Enum):
    uniform = "uniform"
    hotspot = "hotspot"


class Method(str, Enum):
    simulation = "simulation"
    analytic = "analytic"


# -------------------------- core model --------------------------
class SystemParams(BaseModel):
    """
    Deployment, propagation and load of the two-tier system.

    Macro base at the origin, micro base (the DAP) at (D, 0), users in the square
    [-L/2, L/2]^2. SINR targets are linear; dB inputs are converted in config.py.
    Gain constants are normalised: H_mu = 1, H_M = h.
    """
    model_config = ConfigDict(frozen=True)

    spreading_factor_G: float = Field(128.0, gt=0, description="W/R_M")
    gamma_M: float = Field(db_to_linear(DEFAULT_GAMMA_M_DB), gt=0, description="macro SINR target (linear)")
    gamma_mu: float = Field(db_to_linear(DEFAULT_GAMMA_MU_DB), gt=0, description="DAP SINR target (linear)")
    region_side_L: float = Field(1000.0, gt=0, description="square side, m")
    base_separation_D: float = Field(300.0, ge=0, description="macro-to-micro base distance, m")
    breakpoint_macro_bM: float = Field(100.0, gt=0)
    breakpoint_micro_bmu: float = Field(100.0, gt=0)
    shadow_sigma_macro: float = Field(8.0, ge=0, description="dB")
    shadow_sigma_micro: float = Field(4.0, ge=0, description="dB")
    gain_ratio_h: float = Field(10.0, gt=0, description="H_M/H_mu")
    zeta: float = Field(0.005, gt=0, description="normalized desensitivity")
    N_total: int = Field(26, ge=1)
    noise_power_etaW: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _validate_geometry(self) -> "SystemParams":
        if not self.base_separation_D < self.region_side_L / 2:
            raise ValueError(
                f"base_separation_D={self.base_separation_D} must be < region_side_L/2="
                f"{self.region_side_L / 2} (micro base inside the region)"
            )
        return self

    @property
    def delta(self) -> float:
        return self.zeta * self.gain_ratio_h

    @property
    def pole_capacity(self) -> float:
        return self.spreading_factor_G / self.gamma_M + 1.0

    @property
    def H_M(self) -> float:
        return self.gain_ratio_h

    @property
    def H_mu(self) -> float:
        return 1.0

    @property
    def half_side(self) -> float:
        return self.region_side_L / 2.0

    @property
    def micro_base(self) -> "Position":
        return Position(x=self.base_separation_D, y=0.0)

    @property
    def combined_shadow_sigma_db(self) -> float:
        return math.hypot(self.shadow_sigma_macro, self.shadow_sigma_micro)

    def with_updates(self, **changes) -> "SystemParams":
        """Copy with changed fields, re-validated (model_copy skips validation)."""
        return SystemParams.model_validate({**self.model_dump(), **changes})


class Position(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float

    def within(self, region_side_L: float) -> bool:
        half = region_side_L / 2.0
        return abs(self.x) <= half and abs(self.y) <= half

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class UserRealization(BaseModel):
    """One user's position, shadowing (dB), path gains (linear) and tier."""
    model_config = ConfigDict(frozen=True)

    position: Position
    chi_M: float
    chi_mu: float
    T_M: float = Field(..., gt=0)
    T_mu: float = Field(..., gt=0)
    tier: Tier


class UserDistribution(BaseModel):
    """
    Uniform over the square, or a hotspot mixture: with probability
    hotspot_fraction the user is uniform on the disc of hotspot_radius around the
    micro base (clipped to the square), otherwise uniform over the square.
    """
    model_config = ConfigDict(frozen=True)

    kind: DistributionKind = DistributionKind.uniform
    hotspot_fraction: float = Field(0.0, ge=0.0, le=1.0)
    hotspot_radius: float = Field(100.0, gt=0)

    @classmethod
    def uniform(cls) -> "UserDistribution":
        return cls()

    @classmethod
    def hotspot(cls, fraction: float, radius: float) -> "UserDistribution":
        return cls(kind=DistributionKind.hotspot, hotspot_fraction=fraction, hotspot_radius=radius)

    @property
    def is_uniform(self) -> bool:
        # a zero-weight hotspot is the uniform law, and must draw the same stream
        return self.kind == DistributionKind.uniform or self.hotspot_fraction == 0.0


# -------------------------- interference / rate --------------------------
class CrossTierInterference(BaseModel):
    """I_M of the active DAP user and I_mu summed over the Macro users."""
    I_M: float = Field(..., ge=0)
    I_mu: float = Field(..., ge=0)


class PowerSolution(BaseModel):
    S_M: float = Field(..., gt=0)
    S_mu: float = Field(..., gt=0)


class Infeasible(BaseModel):
    reason: str


# -------------------------- monte carlo --------------------------
class TrialOutcome(BaseModel):
    """One snapshot. rates[i] is the rate of the i-th Micro user while it is active."""

    n: int = Field(..., ge=0)
    n_macro: int = Field(..., ge=0)
    rates: list[float] = Field(default_factory=list)
    tau_u_samples: list[float] = Field(default_factory=list)
    tau_d: float = Field(0.0, ge=0.0, le=1.0)
    i_m: list[float] = Field(default_factory=list)
    i_mu: float = Field(0.0, ge=0.0)
    terms: list[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _validate_counts(self) -> "TrialOutcome":
        if len(self.rates) != self.n or len(self.tau_u_samples) != self.n or len(self.i_m) != self.n:
            raise ValueError("rates, tau_u_samples and i_m must have one entry per Micro user")
        if len(self.terms) != self.n_macro:
            raise ValueError("terms must have one entry per Macro user")
        if any(not 0.0 <= r <= 1.0 for r in self.rates):
            raise ValueError("rates must lie in [0, 1]")
        expected = sum(self.rates) / self.n if self.n else 0.0
        if not math.isclose(self.tau_d, expected, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError(f"tau_d={self.tau_d} differs from mean rate {expected}")
        return self

    @property
    def n_total(self) -> int:
        return self.n + self.n_macro


# -------------------------- analytic --------------------------
class LognormalParams(BaseModel):
    """Mean m and standard deviation sigma of ln X."""
    model_config = ConfigDict(frozen=True)

    m: float
    sigma: float = Field(..., ge=0)

    def moment(self, k: int) -> float:
        return math.exp(k * self.m + 0.5 * (k * self.sigma) ** 2)

    def mean(self) -> float:
        return self.moment(1)

    def second_moment(self) -> float:
        return self.moment(2)


class TierCountDistribution(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: float = Field(..., ge=0.0, le=1.0)
    p: list[float]

    @model_validator(mode="after")
    def _validate_pmf(self) -> "TierCountDistribution":
        if any(v < 0 for v in self.p):
            raise ValueError("p_n must be non-negative")
        if abs(sum(self.p) - 1.0) > 1e-9:
            raise ValueError(f"p_n sums to {sum(self.p)}, not 1")
        return self

    @property
    def N(self) -> int:
        return len(self.p) - 1

    @property
    def p0(self) -> float:
        return self.p[0]

    def mean(self) -> float:
        return float(sum(n * pn for n, pn in enumerate(self.p)))


class RateConditional(BaseModel):
    """
    Law of r given n: r = min(Z, 1) with ln Z ~ N(mu_z, sigma_z^2), or a point
    mass (kind="point") at `atom` (0 on infeasible load, 1 with no interference).
    """
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    kind: Literal["lognormal", "point"]
    mu_z: float | None = None
    sigma_z: float | None = Field(None, ge=0)
    atom: float | None = Field(None, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _validate_kind(self) -> "RateConditional":
        if self.kind == "lognormal" and (self.mu_z is None or self.sigma_z is None):
            raise ValueError("lognormal conditional needs mu_z and sigma_z")
        if self.kind == "point" and self.atom is None:
            raise ValueError("point conditional needs atom")
        return self

    def cdf(self, r):
        """F(r|n); vectorised over r, F(r) = 1 for r >= 1."""
        r = np.asarray(r, dtype=float)
        if self.kind == "point":
            out = (r >= self.atom).astype(float)
        elif self.sigma_z == 0.0:
            out = (r >= min(math.exp(self.mu_z), 1.0)).astype(float)
        else:
            with np.errstate(divide="ignore"):
                z = (np.log(np.where(r > 0, r, 1.0)) - self.mu_z) / self.sigma_z
            out = np.where(r > 0, special.ndtr(z), 0.0)
        out = np.where(r >= 1.0, 1.0, out)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        """E{r|n} = E{Z 1[Z<1]} + P(Z >= 1)."""
        if self.kind == "point":
            return float(self.atom)
        mu, s = self.mu_z, self.sigma_z
        if s == 0.0:
            return min(math.exp(mu), 1.0)
        partial = math.exp(mu + 0.5 * s * s + special.log_ndtr((-mu - s * s) / s))
        return partial + float(special.ndtr(mu / s))

    def atom_at_one(self) -> float:
        """Probability mass of r == 1."""
        if self.kind == "point":
            return 1.0 if self.atom == 1.0 else 0.0
        if self.sigma_z == 0.0:
            return 1.0 if self.mu_z >= 0.0 else 0.0
        return float(special.ndtr(self.mu_z / self.sigma_z))


class RateDistribution(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: int = Field(..., ge=1)
    conditionals: dict[int, RateConditional]

    def for_n(self, n: int) -> RateConditional:
        return self.conditionals[n]


# -------------------------- sweeps --------------------------
class SweepRow(BaseModel):
    zeta: float
    N: int
    E_tau_u_sim: float | None = Field(None, ge=0.0, le=1.0)
    E_tau_d_sim: float | None = Field(None, ge=0.0, le=1.0)
    E_tau_u_analytic: float | None = Field(None, ge=0.0, le=1.0)
    E_tau_d_analytic: float | None = Field(None, ge=0.0, le=1.0)
    mean_n: float | None = Field(None, ge=0.0)
    q: float | None = Field(None, ge=0.0, le=1.0)
    status: Literal["ok", "failed"] = "ok"
    error: str | None = None

    @model_validator(mode="after")
    def _validate_mean_n(self) -> "SweepRow":
        if self.mean_n is not None and self.mean_n > self.N:
            raise ValueError(f"mean_n={self.mean_n} exceeds N={self.N}")
        return self


class BalancePoint(BaseModel):
    """Where E{tau_u} = E{tau_d}; zeta_star/tau_star are None on flagged rows."""

    N: int
    method: Method
    zeta_star: float | None = None
    tau_star: float | None = None
    gap: float | None = None
    iterations: int = 0
    status: Literal["ok", "no_crossing", "failed"] = "ok"
    error: str | None = None

    @property
    def found(self) -> bool:
        return self.status == "ok"


class HotspotComparison(BaseModel):
    uniform: BalancePoint
    hotspot: BalancePoint
    delta_zeta: float | None = None
    delta_tau: float | None = None
