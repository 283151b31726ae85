"""Pull-history reweighting model and pull-count bookkeeping.

The observed feedback for arm i at time t has its mean multiplied by
W_i(t) = f_i((T0_i + T_i(t-1)) / (t0 + t - 1)), where T0_i are phantom
initial pulls, T_i(t-1) is the number of real pulls of arm i so far, and
t0 = sum_i T0_i. The reweighting function f is bounded in (0,1],
non-decreasing, and Lipschitz; several parametric families are supported
and composable via clipping.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

_KINDS = ("constant", "power", "sigmoid", "clip_min", "clip_max")


class BiasFunction:
    """A reweighting function f: (0,1] -> (0,1].

    Supported kinds:
      constant(c)        f(x) = c, with c in (0,1]
      power(alpha)       f(x) = x**alpha, alpha >= 1
      sigmoid            f(x) = 1/(1+exp(-x)), range [1/2, 1) on (0,1]
      clip_min(c1, g)    f(x) = min(c1, g(x)), c1 in (0,1]
      clip_max(c2, g)    f(x) = max(c2, g(x)), c2 in [0,1]

    Each instance carries its Lipschitz constant on [0,1] as metadata
    (constant: 0; power(alpha): alpha; sigmoid: 1/4; clips: inner's).
    Monotonicity and range are preserved by construction for every kind.
    """

    __slots__ = ("kind", "param", "inner", "_fn")

    def __init__(self, kind: str, param: float | None = None,
                 inner: "BiasFunction | None" = None):
        if kind not in _KINDS:
            raise ValueError(f"unknown bias function kind {kind!r}")
        self.kind = kind
        self.param = None if param is None else float(param)
        self.inner = inner
        if kind == "constant":
            if param is None or not (0.0 < param <= 1.0):
                raise ValueError("constant(c) requires c in (0,1] so outputs "
                                 f"stay in (0,1]; got {param}")
            if inner is not None:
                raise ValueError("constant takes no inner function")
            c = self.param
            self._fn = lambda x: c
        elif kind == "power":
            if param is None or not (param >= 1.0) or not math.isfinite(param):
                raise ValueError(f"power(alpha) requires alpha >= 1, got {param}")
            if inner is not None:
                raise ValueError("power takes no inner function")
            a = self.param
            self._fn = (lambda x: x) if a == 1.0 else (lambda x: x ** a)
        elif kind == "sigmoid":
            if param is not None or inner is not None:
                raise ValueError("sigmoid takes no parameters")
            self._fn = lambda x: 1.0 / (1.0 + math.exp(-x))
        elif kind == "clip_min":
            if param is None or not (0.0 < param <= 1.0):
                raise ValueError(f"clip_min(c1, inner) requires c1 in (0,1], got {param}")
            if inner is None:
                raise ValueError("clip_min requires an inner function")
            c1, g = self.param, inner._fn
            self._fn = lambda x: min(c1, g(x))
        else:  # clip_max
            if param is None or not (0.0 <= param <= 1.0):
                raise ValueError(f"clip_max(c2, inner) requires c2 in [0,1], got {param}")
            if inner is None:
                raise ValueError("clip_max requires an inner function")
            c2, g = self.param, inner._fn
            self._fn = lambda x: max(c2, g(x))

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant of f on [0,1]."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "power":
            return self.param
        if self.kind == "sigmoid":
            return 0.25
        return self.inner.lipschitz

    def __call__(self, x: float) -> float:
        if not (0.0 < x <= 1.0):
            raise ValueError(f"reweighting argument must lie in (0,1], got {x}")
        return self._fn(x)

    def fn_unchecked(self) -> Callable[[float], float]:
        """Bare evaluation closure without the domain check.

        For hot simulation loops where the caller guarantees arguments in
        (0,1] (pull fractions always are, since T0_i >= 1).
        """
        return self._fn

    def evaluate_array(self, x):
        """Vectorized evaluation on a numpy array of points in (0,1]."""
        import numpy as np
        x = np.asarray(x, dtype=np.float64)
        if x.size and (float(x.min()) <= 0.0 or float(x.max()) > 1.0):
            raise ValueError("reweighting arguments must lie in (0,1]")
        if self.kind == "constant":
            return np.full_like(x, self.param)
        if self.kind == "power":
            return x if self.param == 1.0 else x ** self.param
        if self.kind == "sigmoid":
            return 1.0 / (1.0 + np.exp(-x))
        inner = self.inner.evaluate_array(x)
        if self.kind == "clip_min":
            return np.minimum(self.param, inner)
        return np.maximum(self.param, inner)

    def to_config(self) -> dict:
        cfg: dict = {"kind": self.kind}
        if self.kind == "constant":
            cfg["c"] = self.param
        elif self.kind == "power":
            cfg["alpha"] = self.param
        elif self.kind == "clip_min":
            cfg["c1"] = self.param
            cfg["inner"] = self.inner.to_config()
        elif self.kind == "clip_max":
            cfg["c2"] = self.param
            cfg["inner"] = self.inner.to_config()
        return cfg

    @staticmethod
    def from_config(cfg: dict) -> "BiasFunction":
        """Parse {"kind": "power", "alpha": 2.0} style configuration."""
        if not isinstance(cfg, dict) or "kind" not in cfg:
            raise ValueError(f"bias function config must be a dict with 'kind': {cfg!r}")
        kind = cfg["kind"]
        if kind == "constant":
            return BiasFunction("constant", cfg.get("c"))
        if kind == "power":
            return BiasFunction("power", cfg.get("alpha"))
        if kind == "sigmoid":
            return BiasFunction("sigmoid")
        if kind == "clip_min":
            return BiasFunction("clip_min", cfg.get("c1"),
                                BiasFunction.from_config(cfg.get("inner")))
        if kind == "clip_max":
            return BiasFunction("clip_max", cfg.get("c2"),
                                BiasFunction.from_config(cfg.get("inner")))
        raise ValueError(f"unknown bias function kind {kind!r}")

    def __repr__(self) -> str:
        if self.kind in ("clip_min", "clip_max"):
            return f"BiasFunction({self.kind}, {self.param}, {self.inner!r})"
        if self.param is not None:
            return f"BiasFunction({self.kind}, {self.param})"
        return f"BiasFunction({self.kind})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, BiasFunction)
                and self.to_config() == other.to_config())


def constant(c: float) -> BiasFunction:
    return BiasFunction("constant", c)


def power(alpha: float) -> BiasFunction:
    return BiasFunction("power", alpha)


def sigmoid() -> BiasFunction:
    return BiasFunction("sigmoid")


def clip_min(c1: float, inner: BiasFunction) -> BiasFunction:
    return BiasFunction("clip_min", c1, inner)


def clip_max(c2: float, inner: BiasFunction) -> BiasFunction:
    return BiasFunction("clip_max", c2, inner)


class BiasModel:
    """Reweighting functions plus the phantom initial pull counts.

    Parameters
    ----------
    f : BiasFunction or sequence of BiasFunction
        Shared reweighting function, or one per arm.
    initial_pulls : sequence of int
        Phantom pull counts T0_i, one per arm, each >= 1.
    """

    __slots__ = ("functions", "initial_pulls", "t0_bias", "shared")

    def __init__(self, f: BiasFunction | Sequence[BiasFunction],
                 initial_pulls: Sequence[int]):
        pulls = tuple(int(p) for p in initial_pulls)
        if len(pulls) == 0:
            raise ValueError("initial_pulls must be non-empty")
        if any(p < 1 for p in pulls):
            raise ValueError(f"every initial pull count must be >= 1, got {pulls}")
        if any(p != q for p, q in zip(pulls, initial_pulls)):
            raise ValueError("initial pull counts must be integers")
        if isinstance(f, BiasFunction):
            self.shared = True
            self.functions = (f,) * len(pulls)
        else:
            fns = tuple(f)
            if len(fns) != len(pulls):
                raise ValueError(f"got {len(fns)} functions for {len(pulls)} arms")
            if not all(isinstance(g, BiasFunction) for g in fns):
                raise ValueError("per-arm functions must be BiasFunction instances")
            self.shared = all(g == fns[0] for g in fns)
            self.functions = fns
        self.initial_pulls = pulls
        self.t0_bias = sum(pulls)

    @property
    def num_arms(self) -> int:
        return len(self.initial_pulls)

    def to_config(self) -> dict:
        if self.shared:
            fcfg = self.functions[0].to_config()
        else:
            fcfg = [g.to_config() for g in self.functions]
        return {"f": fcfg, "initial_pulls": list(self.initial_pulls)}

    @staticmethod
    def from_config(cfg: dict) -> "BiasModel":
        fcfg = cfg["f"]
        if isinstance(fcfg, list):
            f = [BiasFunction.from_config(g) for g in fcfg]
        else:
            f = BiasFunction.from_config(fcfg)
        return BiasModel(f, cfg["initial_pulls"])

    def __repr__(self) -> str:
        return f"BiasModel(f={self.functions[0]!r}{'' if self.shared else '...'}, T0={self.initial_pulls})"


class PullState:
    """Time step and per-arm pull counts: t >= 1 with counts T_i(t-1).

    Invariant: sum(counts) == t - 1 (one pull per elapsed step).
    """

    __slots__ = ("t", "counts")

    def __init__(self, t: int, counts: Sequence[int]):
        counts = tuple(int(c) for c in counts)
        if t < 1:
            raise ValueError(f"time must be >= 1, got {t}")
        if any(c < 0 for c in counts):
            raise ValueError(f"counts must be non-negative, got {counts}")
        if sum(counts) != t - 1:
            raise ValueError(f"counts {counts} sum to {sum(counts)}, expected t-1={t-1}")
        self.t = int(t)
        self.counts = counts

    @staticmethod
    def initial(num_arms: int) -> "PullState":
        return PullState(1, (0,) * num_arms)

    def __repr__(self) -> str:
        return f"PullState(t={self.t}, counts={self.counts})"


def bias_fraction(model: BiasModel, state: PullState, arm: int) -> float:
    """Fraction of pulls credited to `arm`: (T0_i + T_i(t-1)) / (t0 + t - 1).

    Strictly positive because T0_i >= 1, and at most 1.
    """
    if len(state.counts) != model.num_arms:
        raise ValueError(f"state has {len(state.counts)} arms, model {model.num_arms}")
    if not (0 <= arm < model.num_arms):
        raise IndexError(f"arm {arm} out of range for {model.num_arms} arms")
    return (model.initial_pulls[arm] + state.counts[arm]) / (model.t0_bias + state.t - 1)


def reweight(model: BiasModel, arm: int, fraction: float) -> float:
    """Evaluate arm's reweighting function at a pull fraction in (0,1]."""
    if not (0 <= arm < model.num_arms):
        raise IndexError(f"arm {arm} out of range for {model.num_arms} arms")
    return model.functions[arm](fraction)


def advance(state: PullState, arm: int) -> PullState:
    """New state after one pull of `arm`: t+1, that arm's count +1."""
    if not (0 <= arm < len(state.counts)):
        raise IndexError(f"arm {arm} out of range for {len(state.counts)} arms")
    counts = list(state.counts)
    counts[arm] += 1
    return PullState(state.t + 1, counts)
