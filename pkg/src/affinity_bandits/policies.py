"""Bandit policies: phased elimination plus standard baselines.

All policies implement reset(num_arms, horizon, rng, bias=None) /
select(t) / update(arm, y) with 1-based time steps and 0-based arms, and
break index ties toward the lowest arm index. `policy_info()` reports
algorithm-specific diagnostics after (or during) a run.

The phased elimination policy is the round-based variant analysed for
history-reweighted feedback: it never reuses samples across rounds, so each
round's empirical means are unbiased up to the (slowly varying) reweighting
factor within the round. The UCB-V baseline is the known-bias variant: it
divides each observation by the exact reweighting factor before use, which
requires the bias model. EXP3/EXP3-IX clip observations to [0, 1] inside
their loss estimators (relevant only under unbounded noise).
"""
from __future__ import annotations

import math
from typing import Sequence

from .bias import BiasModel
from .rng import DrawSource

_LN_12_PI2 = math.log(12.0 / math.pi ** 2)


def elimination_round_size(r: int, num_arms: int, horizon: int,
                           offset: int = 5) -> int:
    """Per-arm sample count m_r = ceil(2^(2r+offset) * ln(12/pi^2 * K^2 * r^2 * n))."""
    if r < 1:
        raise ValueError(f"round index must be >= 1, got {r}")
    log_term = _LN_12_PI2 + 2.0 * math.log(num_arms) + 2.0 * math.log(r) \
        + math.log(horizon)
    return math.ceil(2.0 ** (2 * r + offset) * log_term)


class Policy:
    """Interface shared by all policies."""

    name = "policy"

    def reset(self, num_arms: int, horizon: int, rng: DrawSource | None = None,
              bias: BiasModel | None = None) -> None:
        raise NotImplementedError

    def select(self, t: int) -> int:
        raise NotImplementedError

    def update(self, arm: int, y: float) -> None:
        raise NotImplementedError

    def policy_info(self) -> dict:
        return {}

    def config(self) -> dict:
        """Round-trippable config: policy_from_config(p.config()) == same policy."""
        return {"policy": self.name}


class PhasedElimination(Policy):
    """Round-based elimination with per-round fresh sample means.

    An optional warm-up pulls every arm once and discards the sample.
    Rounds r = 1, 2, ...: each arm of the active set A_r is pulled m_r
    times, interleaved one pull per arm in ascending index order (the
    sweep repeats m_r times). At the end of a round, arms whose round
    mean is more than 2^-r below the best round mean are eliminated
    (strictly more; ties survive). If the horizon ends mid-round, the
    interleaved sweep simply continues until the budget runs out and no
    elimination happens.

    Parameters
    ----------
    offset : int
        Exponent offset in the round size 2^(2r+offset); 5 or 6.
    warmup : bool
        Pull each arm once before round 1, discarding the sample.
    """

    name = "elimination"

    def __init__(self, offset: int = 5, warmup: bool = True):
        if offset not in (5, 6):
            raise ValueError(f"offset must be 5 or 6, got {offset}")
        self.offset = int(offset)
        self.warmup = bool(warmup)

    def reset(self, num_arms, horizon, rng=None, bias=None):
        self.K = num_arms
        self.n = horizon
        self._warm_left = num_arms if self.warmup else 0
        self.round = 1
        self.active = list(range(num_arms))
        self.m_r = elimination_round_size(1, num_arms, horizon, self.offset)
        self._pos = 0            # index into self.active within the sweep
        self._ell = 1            # current sweep number, 1..m_r
        self._sums = [0.0] * num_arms
        self.exit_round = [None] * num_arms
        self.round_sizes = [self.m_r]
        self.active_sets = [list(self.active)]
        self.rounds_completed = 0

    def select(self, t):
        if self._warm_left > 0:
            return self.K - self._warm_left
        return self.active[self._pos]

    def update(self, arm, y):
        if self._warm_left > 0:
            self._warm_left -= 1
            return
        self._sums[arm] += y
        self._pos += 1
        if self._pos < len(self.active):
            return
        self._pos = 0
        self._ell += 1
        if self._ell <= self.m_r:
            return
        # Round complete: eliminate arms strictly below best - 2^-r.
        inv_m = 1.0 / self.m_r
        means = {i: self._sums[i] * inv_m for i in self.active}
        best = max(means.values())
        threshold = 2.0 ** (-self.round)
        survivors = [i for i in self.active if best - means[i] <= threshold]
        for i in self.active:
            if i not in survivors:
                self.exit_round[i] = self.round
        self.rounds_completed = self.round
        self.round += 1
        self.active = survivors
        self.m_r = elimination_round_size(self.round, self.K, self.n, self.offset)
        self._ell = 1
        self._sums = [0.0] * self.K
        self.round_sizes.append(self.m_r)
        self.active_sets.append(list(self.active))

    def policy_info(self):
        return {
            "exit_rounds": list(self.exit_round),
            "round_sizes": list(self.round_sizes),
            "active_sets": [list(a) for a in self.active_sets],
            "rounds_completed": self.rounds_completed,
        }

    def config(self):
        return {"policy": self.name, "offset": self.offset, "warmup": self.warmup}


class UCB1(Policy):
    """Classic UCB: pull each arm once, then argmax mean + sqrt(2 ln t / T_i)."""

    name = "ucb1"

    def reset(self, num_arms, horizon, rng=None, bias=None):
        self.K = num_arms
        self.counts = [0] * num_arms
        self.sums = [0.0] * num_arms

    def select(self, t):
        if t <= self.K:
            return t - 1
        log_t = math.log(t)
        best_arm = 0
        best_idx = -math.inf
        for i in range(self.K):
            idx = self.sums[i] / self.counts[i] + math.sqrt(2.0 * log_t / self.counts[i])
            if idx > best_idx:
                best_idx = idx
                best_arm = i
        return best_arm

    def update(self, arm, y):
        self.counts[arm] += 1
        self.sums[arm] += y


class UCBVDebiased(Policy):
    """Variance-aware UCB on exactly debiased observations (bias known).

    Each observation is divided by the reweighting factor W_i(t) in force
    when the arm was pulled, giving Z with E[Z] = mu_i. The index is

        mean(Z) + sqrt(2 * var(Z) * zeta * ln t / T_i) + c * 3 * b * zeta * ln t / T_i

    where b is a running bound on |Z| (initialised to 1) and var is the
    population variance of the debiased samples. Each arm is pulled once
    before indices are compared.
    """

    name = "ucbv_debiased"

    def __init__(self, zeta: float = 1.2, c: float = 1.0):
        self.zeta = float(zeta)
        self.c = float(c)

    def reset(self, num_arms, horizon, rng=None, bias=None):
        if bias is None:
            raise ValueError("debiased UCB-V needs the bias model")
        if bias.num_arms != num_arms:
            raise ValueError(f"bias model has {bias.num_arms} arms, expected {num_arms}")
        self.K = num_arms
        self.bias = bias
        self._fns = [f.fn_unchecked() for f in bias.functions]
        self.t = 0
        self.counts = [0] * num_arms
        self.means = [0.0] * num_arms      # running mean of Z
        self.m2 = [0.0] * num_arms         # running sum of squared deviations
        self.bound = 1.0                   # running max |Z|, at least 1

    def select(self, t):
        self.t = t
        if t <= self.K:
            return t - 1
        log_t = math.log(t)
        zl = self.zeta * log_t
        best_arm = 0
        best_idx = -math.inf
        for i in range(self.K):
            ti = self.counts[i]
            var = self.m2[i] / ti
            idx = (self.means[i] + math.sqrt(2.0 * var * zl / ti)
                   + self.c * 3.0 * self.bound * zl / ti)
            if idx > best_idx:
                best_idx = idx
                best_arm = i
        return best_arm

    def update(self, arm, y):
        # Reweighting factor in force at the pull we are recording.
        frac = ((self.bias.initial_pulls[arm] + self.counts[arm])
                / (self.bias.t0_bias + self.t - 1))
        z = y / self._fns[arm](frac)
        az = abs(z)
        if az > self.bound:
            self.bound = az
        self.counts[arm] += 1
        delta = z - self.means[arm]
        self.means[arm] += delta / self.counts[arm]
        self.m2[arm] += delta * (z - self.means[arm])

    def config(self):
        return {"policy": self.name, "zeta": self.zeta, "c": self.c}


class EXP3(Policy):
    """EXP3 with importance-weighted losses and eta = sqrt(2 ln K / (n K)).

    Scores are kept in the log domain (softmax with max subtraction).
    Observations are clipped to [0, 1] inside the loss estimator.
    """

    name = "exp3"

    def __init__(self, eta: float | None = None):
        self.eta_override = eta

    # Implicit-exploration parameter; 0 for plain EXP3.
    def _gamma(self) -> float:
        return 0.0

    def reset(self, num_arms, horizon, rng=None, bias=None):
        if rng is None:
            raise ValueError(f"{self.name} needs a randomness source")
        self.K = num_arms
        self.rng = rng
        self.eta = (self.eta_override if self.eta_override is not None
                    else math.sqrt(2.0 * math.log(num_arms) / (horizon * num_arms)))
        self.scores = [0.0] * num_arms     # cumulative gain estimates
        self._probs = [1.0 / num_arms] * num_arms
        self._last = 0

    def select(self, t):
        eta = self.eta
        m = max(self.scores)
        w = [math.exp(eta * (s - m)) for s in self.scores]
        tot = sum(w)
        self._probs = [x / tot for x in w]
        u = self.rng.uniform()
        acc = 0.0
        for i in range(self.K - 1):
            acc += self._probs[i]
            if u < acc:
                self._last = i
                return i
        self._last = self.K - 1
        return self.K - 1

    def update(self, arm, y):
        y = min(1.0, max(0.0, y))
        denom = self._probs[arm] + self._gamma()
        self.scores[arm] += 1.0 - (1.0 - y) / denom

    def policy_info(self):
        return {"eta": self.eta}

    def config(self):
        cfg = {"policy": self.name}
        if self.eta_override is not None:
            cfg["eta"] = self.eta_override
        return cfg


class EXP3IX(EXP3):
    """EXP3-IX: implicit exploration with gamma = eta / 2 in the estimator."""

    name = "exp3ix"

    def _gamma(self) -> float:
        return self.eta / 2.0

    def policy_info(self):
        return {"eta": self.eta, "gamma": self.eta / 2.0}


class Uniform(Policy):
    """Deterministic round-robin: arm (t-1) mod K."""

    name = "uniform"

    def reset(self, num_arms, horizon, rng=None, bias=None):
        self.K = num_arms

    def select(self, t):
        return (t - 1) % self.K

    def update(self, arm, y):
        pass


_POLICIES = {
    "elimination": PhasedElimination,
    "ucb1": UCB1,
    "ucbv_debiased": UCBVDebiased,
    "exp3": EXP3,
    "exp3ix": EXP3IX,
    "uniform": Uniform,
}


def make_policy(name: str, **params) -> Policy:
    """Construct a policy by registry name with keyword parameters."""
    if name not in _POLICIES:
        raise ValueError(f"unknown policy {name!r}; known: {sorted(_POLICIES)}")
    return _POLICIES[name](**params)


def policy_from_config(cfg: dict | str) -> Policy:
    """Parse {"policy": "elimination", "offset": 5} or a bare name string."""
    if isinstance(cfg, str):
        return make_policy(cfg)
    if "policy" in cfg:
        name = cfg["policy"]
    elif "name" in cfg:
        name = cfg["name"]
    else:
        raise ValueError(f"policy config needs a 'policy' key: {cfg!r}")
    params = {k: v for k, v in cfg.items() if k not in ("policy", "name")}
    return make_policy(name, **params)
