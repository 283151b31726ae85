"""Stochastic bandit environments whose feedback is reweighted by pull history.

An environment couples per-arm true means with a noise family and a feedback
mode. On a pull of arm i at state (t, counts) with reweighting factor
W = f_i(pull fraction), the observed value satisfies E[Y | history] = mu_i * W
in every mode:

  multiplicative  Y = W * X              X ~ noise(mu_i)
  additive        Y = X + mu_i * (W - 1)
  mask            Y = B * X, B ~ Bern(W) independent of X

With Bernoulli noise the mask mode yields Y ~ Bern(mu_i * W) exactly; the
other combinations match mu_i * W in mean, while higher moments differ by
mode. Gaussian noise can leave multiplicative/additive observations outside
[0, 1]; policies that need bounded feedback must handle that themselves.
Mask mode with Gaussian noise is permitted, but note the centered feedback
is then only approximately 1-subGaussian for extreme reweighting factors;
bundled experiments use mask only with Bernoulli noise.

Environment draws are scalar and consume a caller-supplied draw source, so a
run's observation sequence is a pure function of (seed, stream) and the pull
sequence. Mask mode always consumes two draws per step (mask first, then the
noise draw) regardless of the mask outcome, keeping the draw count per step
constant.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .bias import BiasModel, PullState, bias_fraction, reweight
from .rng import DrawSource

_NOISES = ("bernoulli", "gaussian")
_MODES = ("multiplicative", "additive", "mask")


class Environment:
    """K-armed environment with history-reweighted feedback.

    Parameters
    ----------
    means : sequence of float in [0, 1]
        True per-arm means mu_i.
    bias : BiasModel
        Reweighting functions and phantom initial pulls; must match K.
    noise : {"bernoulli", "gaussian"}
    mode : {"multiplicative", "additive", "mask"}
    sigma : float, optional
        Standard deviation for Gaussian noise; defaults to 1 (the
        unit-variance Gaussian environment class).
    """

    __slots__ = ("means", "bias", "noise", "mode", "sigma")

    def __init__(self, means: Sequence[float], bias: BiasModel,
                 noise: str = "bernoulli", mode: str = "multiplicative",
                 sigma: float | None = None):
        means = tuple(float(m) for m in means)
        if len(means) == 0:
            raise ValueError("means must be non-empty")
        if any(not (0.0 <= m <= 1.0) for m in means):
            raise ValueError(f"means must lie in [0,1], got {means}")
        if not isinstance(bias, BiasModel):
            raise ValueError("bias must be a BiasModel")
        if bias.num_arms != len(means):
            raise ValueError(f"bias model has {bias.num_arms} arms, means {len(means)}")
        if noise not in _NOISES:
            raise ValueError(f"unknown noise family {noise!r}")
        if mode not in _MODES:
            raise ValueError(f"unknown feedback mode {mode!r}")
        if noise == "gaussian":
            if sigma is None:
                sigma = 1.0
            if not (sigma > 0) or not math.isfinite(sigma):
                raise ValueError(f"gaussian noise requires sigma > 0, got {sigma}")
            self.sigma = float(sigma)
        else:
            if sigma is not None:
                raise ValueError("sigma only applies to gaussian noise")
            self.sigma = None
        self.means = means
        self.bias = bias
        self.noise = noise
        self.mode = mode

    @property
    def num_arms(self) -> int:
        return len(self.means)

    def true_mean(self, arm: int) -> float:
        return self.means[arm]

    def optimal_arm(self) -> int:
        """Index of the largest true mean (lowest index on ties)."""
        best = max(self.means)
        return self.means.index(best)

    def gaps(self) -> tuple[float, ...]:
        """Suboptimality gaps Delta_i = max_j mu_j - mu_i."""
        best = max(self.means)
        return tuple(best - m for m in self.means)

    def reweight_factor(self, state: PullState, arm: int) -> float:
        """W_i(t) = f_i((T0_i + T_i(t-1)) / (t0 + t - 1))."""
        return reweight(self.bias, arm, bias_fraction(self.bias, state, arm))

    def biased_mean(self, state: PullState, arm: int) -> float:
        """Conditional observation mean mu_i * W_i(t) at this state."""
        return self.means[arm] * self.reweight_factor(state, arm)

    def sample(self, state: PullState, arm: int, src: DrawSource) -> float:
        """Draw one observation for pulling `arm` at `state`."""
        w = self.reweight_factor(state, arm)
        mu = self.means[arm]
        if self.mode == "mask":
            b = 1.0 if src.uniform() < w else 0.0
            if self.noise == "bernoulli":
                x = 1.0 if src.uniform() < mu else 0.0
            else:
                x = mu + self.sigma * src.normal()
            return b * x
        if self.noise == "bernoulli":
            x = 1.0 if src.uniform() < mu else 0.0
        else:
            x = mu + self.sigma * src.normal()
        if self.mode == "multiplicative":
            return w * x
        return x + mu * (w - 1.0)

    def sample_many(self, state: PullState, arm: int, n: int,
                    gen: np.random.Generator) -> np.ndarray:
        """Vectorized i.i.d. observations at a fixed state (for calibration).

        Uses the same per-mode construction as `sample` but via a numpy
        Generator, so draw-for-draw agreement with scalar sampling is not
        guaranteed -- only the distribution is.
        """
        w = self.reweight_factor(state, arm)
        mu = self.means[arm]
        if self.noise == "bernoulli":
            x = (gen.random(n) < mu).astype(np.float64)
        else:
            x = mu + self.sigma * gen.standard_normal(n)
        if self.mode == "mask":
            b = (gen.random(n) < w).astype(np.float64)
            return b * x
        if self.mode == "multiplicative":
            return w * x
        return x + mu * (w - 1.0)

    def to_config(self) -> dict:
        cfg = {
            "means": list(self.means),
            "bias": self.bias.to_config(),
            "noise": self.noise,
            "mode": self.mode,
        }
        if self.sigma is not None:
            cfg["sigma"] = self.sigma
        return cfg

    @staticmethod
    def from_config(cfg: dict) -> "Environment":
        return Environment(
            means=cfg["means"],
            bias=BiasModel.from_config(cfg["bias"]),
            noise=cfg.get("noise", "bernoulli"),
            mode=cfg.get("mode", "multiplicative"),
            sigma=cfg.get("sigma"),
        )

    def __repr__(self) -> str:
        extra = f", sigma={self.sigma}" if self.sigma is not None else ""
        return (f"Environment(means={self.means}, noise={self.noise!r}, "
                f"mode={self.mode!r}{extra})")


def make_env(cfg: dict) -> Environment:
    """Construct an environment from a plain-dict configuration."""
    return Environment.from_config(cfg)


def sample_feedback(env: Environment, state: PullState, arm: int,
                    src: DrawSource) -> float:
    """One feedback observation; E[Y | history] = mu_arm * W_arm(t)."""
    return env.sample(state, arm, src)


def debiased_sample(y: float, w: float) -> float:
    """y / w: unbiased for mu under multiplicative feedback with known w.

    The correction scales the variance by w**-2.
    """
    if not (w > 0.0):
        raise ValueError(f"reweighting factor must be positive, got {w}")
    return y / w


def pseudo_regret(env: Environment, counts: Sequence[int]) -> float:
    """Realized pseudo-regret sum_i Delta_i * T_i(n) for final pull counts."""
    if len(counts) != env.num_arms:
        raise ValueError(f"got {len(counts)} counts for {env.num_arms} arms")
    gaps = env.gaps()
    return float(sum(d * c for d, c in zip(gaps, counts)))
