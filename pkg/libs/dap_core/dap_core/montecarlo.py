# dap_core/montecarlo.py
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .interference import max_rate
from .models import SystemParams, TrialOutcome, UserDistribution
from .propagation import sample_users

log = logging.getLogger(__name__)

# trials per random stream; fixed so results never depend on the worker count
TRIAL_BLOCK = 512
DEFAULT_TRIALS = 10_000


def default_workers() -> int:
    return max(1, int(os.getenv("DAP_WORKERS", "1")))


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent stream for trial block `block` of master seed `seed`."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))


class _Block(NamedTuple):
    n: np.ndarray           # (trials,)
    tau_d: np.ndarray       # (trials,)
    i_mu: np.ndarray        # (trials,)
    rates: np.ndarray       # one per Micro user, trial-major
    rate_trial: np.ndarray
    i_m: np.ndarray         # aligned with rates
    terms: np.ndarray       # T_mu/T_M per Macro user, trial-major
    term_trial: np.ndarray


def _simulate_block(params: SystemParams, dist: UserDistribution, rng: np.random.Generator, size: int) -> _Block:
    N = params.N_total
    users = sample_users(params, dist, rng, (size, N))
    micro = users.micro
    macro = ~micro
    n = micro.sum(axis=1)

    t_ratio = users.T_mu / users.T_M
    i_m_all = users.T_M / users.T_mu
    # I_mu involves Macro users only, so every turn of a trial shares it
    i_mu = np.where(macro, t_ratio, 0.0).sum(axis=1)
    r_all = max_rate(params.pole_capacity, N, n[:, None], params.gamma_mu, i_m_all, i_mu[:, None])

    rows, cols = np.nonzero(micro)
    rates = r_all[rows, cols]
    rate_sum = np.where(micro, r_all, 0.0).sum(axis=1)
    tau_d = np.where(n > 0, rate_sum / np.maximum(n, 1), 0.0)
    mrows, mcols = np.nonzero(macro)
    return _Block(
        n=n, tau_d=tau_d, i_mu=i_mu,
        rates=rates, rate_trial=rows, i_m=i_m_all[rows, cols],
        terms=t_ratio[mrows, mcols], term_trial=mrows,
    )


def run_trial(params: SystemParams, dist: UserDistribution, rng: np.random.Generator) -> TrialOutcome:
    """
    One snapshot: draw N users, split them by tier, then let each Micro user take
    its turn on the DAP and record its maximum rate.
    """
    b = _simulate_block(params, dist, rng, 1)
    n = int(b.n[0])
    rates = b.rates.tolist()
    return TrialOutcome(
        n=n,
        n_macro=params.N_total - n,
        rates=rates,
        tau_u_samples=[r / n for r in rates],
        tau_d=float(b.tau_d[0]),
        i_m=b.i_m.tolist(),
        i_mu=float(b.i_mu[0]),
        terms=b.terms.tolist(),
    )


class SampleSet(BaseModel):
    """
    Pooled campaign samples. Per-trial arrays have length `trials`; per-user
    arrays carry the index of their trial in `rate_trial` / `term_trial`.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    params: SystemParams
    dist: UserDistribution
    seed: int
    trials: int
    n: np.ndarray
    tau_d: np.ndarray
    i_mu: np.ndarray
    rates: np.ndarray
    rate_trial: np.ndarray
    i_m: np.ndarray
    terms: np.ndarray
    term_trial: np.ndarray

    @model_validator(mode="after")
    def _validate_counts(self) -> "SampleSet":
        if len(self.n) != self.trials or int(self.histogram().sum()) != self.trials:
            raise ValueError("per-trial arrays must have one entry per trial")
        if len(self.rates) != int(self.n.sum()):
            raise ValueError("one rate per Micro user expected")
        return self

    @property
    def N(self) -> int:
        return self.params.N_total

    def histogram(self) -> np.ndarray:
        """Counts of n = 0..N."""
        return np.bincount(self.n, minlength=self.N + 1)

    def q_hat(self) -> float:
        """Empirical single-user Micro probability."""
        return float(self.n.sum()) / (self.trials * self.N)

    def mean_n(self) -> float:
        return float(self.n.mean())

    def tau_u(self) -> np.ndarray:
        return self.rates / self.n[self.rate_trial]

    def rate_weights(self) -> np.ndarray:
        """1/n per rate sample: every trial with n >= 1 carries total weight 1."""
        return 1.0 / self.n[self.rate_trial]

    def mean_tau_u(self) -> float | None:
        if len(self.rates) == 0:
            return None
        w = self.rate_weights()
        return float(np.sum(self.tau_u() * w) / np.sum(w))

    def mean_tau_d(self) -> float:
        return float(self.tau_d.mean())

    def mean_rate(self) -> float | None:
        if len(self.rates) == 0:
            return None
        w = self.rate_weights()
        return float(np.sum(self.rates * w) / np.sum(w))

    def i_mu_given_n(self, n: int) -> np.ndarray:
        return self.i_mu[self.n == n]

    def outcome(self, trial: int) -> TrialOutcome:
        lo, hi = np.searchsorted(self.rate_trial, [trial, trial + 1])
        tlo, thi = np.searchsorted(self.term_trial, [trial, trial + 1])
        n = int(self.n[trial])
        rates = self.rates[lo:hi].tolist()
        return TrialOutcome(
            n=n, n_macro=self.N - n, rates=rates,
            tau_u_samples=[r / n for r in rates],
            tau_d=float(self.tau_d[trial]),
            i_m=self.i_m[lo:hi].tolist(),
            i_mu=float(self.i_mu[trial]),
            terms=self.terms[tlo:thi].tolist(),
        )

    def equals(self, other: "SampleSet") -> bool:
        arrays = ("n", "tau_d", "i_mu", "rates", "rate_trial", "i_m", "terms", "term_trial")
        return (
            self.params == other.params and self.dist == other.dist and self.trials == other.trials
            and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
        )


def run_campaign(
    params: SystemParams,
    dist: UserDistribution,
    trials: int = DEFAULT_TRIALS,
    seed: int = 1,
    workers: int | None = None,
) -> SampleSet:
    """
    Run `trials` independent snapshots. Trial block b draws from
    block_rng(seed, b), and blocks are merged in index order, so the result is
    bit-identical for any worker count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    workers = workers or default_workers()
    sizes = [min(TRIAL_BLOCK, trials - start) for start in range(0, trials, TRIAL_BLOCK)]

    def run_block(block: int) -> _Block:
        return _simulate_block(params, dist, block_rng(seed, block), sizes[block])

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run_block, range(len(sizes))))
    else:
        blocks = [run_block(b) for b in range(len(sizes))]

    offsets = np.arange(len(sizes)) * TRIAL_BLOCK
    samples = SampleSet(
        params=params, dist=dist, seed=seed, trials=trials,
        n=np.concatenate([b.n for b in blocks]),
        tau_d=np.concatenate([b.tau_d for b in blocks]),
        i_mu=np.concatenate([b.i_mu for b in blocks]),
        rates=np.concatenate([b.rates for b in blocks]),
        rate_trial=np.concatenate([b.rate_trial + off for b, off in zip(blocks, offsets)]),
        i_m=np.concatenate([b.i_m for b in blocks]),
        terms=np.concatenate([b.terms for b in blocks]),
        term_trial=np.concatenate([b.term_trial + off for b, off in zip(blocks, offsets)]),
    )
    log.info(
        f"campaign done: zeta={params.zeta:g} N={params.N_total} trials={trials} seed={seed} "
        f"mean_n={samples.mean_n():.4f} workers={workers}"
    )
    return samples
