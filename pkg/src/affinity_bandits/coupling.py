"""Paired-run construction showing UCB's linear regret under feedback bias.

Couples two UCB runs on 2-armed Bernoulli instances: a "biased" run whose
observed means are mu_i * fraction_i(t) (identity reweighting, Bernoulli
mask feedback), and a "static" run on a frozen unbiased instance whose
means sandwich the biased ones while the event

    B_t = for all s <= t:
        mu_bias_1(s) <= mu_st_1 < mu_st_2 <= mu_bias_2(s)

holds. Samples are generated jointly (Bernoulli thinning when both runs
pull the same arm; a FIFO sample exchange through two queues when they
cross), so that while B_t holds the static run pulls arm 1 at least as
often as the biased run pulls arm 1 — pointwise on every sample path. With
two arms, the sandwich at step t reduces to fraction_1(t) <= epsilon.

Arms are 0-based: arm 0 is the optimal arm of both instances ("arm 1" of
the two-armed construction), arm 1 the suboptimal one.

After B_t fails, or if a queue underflows (unreachable while B_t holds;
kept as a safeguard), the remaining steps draw independently — biased
sample then static sample — from the same environment stream. Every step
consumes exactly two environment uniforms regardless of case, so the draw
sequence is a pure function of the seed.
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .envs import Environment
from .policies import UCB1
from .rng import DrawSource, ENV_STREAM
from .simulate import monte_carlo, resolve_workers


class CouplingConfig:
    """Parameters of the paired construction.

    mu1 > mu2 are the Bernoulli means (arm 0 optimal); T0_1, T0_2 the
    biased instance's initial pulls; T0_1_static the surrogate initial
    pulls of arm 0 that define the static instance. Derived quantities:

        epsilon  = T0_1_static / (T0_1_static + T0_2)
        t1       = T0_1_static - T0_1 + 1   (B_{t1} holds deterministically)
        mu_st_1  = mu1 * epsilon
        mu_st_2  = mu2 * (1 - epsilon)

    Construction validates the sandwich ordering at t = 1 and
    T0_1 <= T0_1_static < (mu2/mu1) * T0_2.
    """

    __slots__ = ("mu1", "mu2", "t0_1", "t0_2", "t0_1_static", "n",
                 "epsilon", "t1", "mu_st_1", "mu_st_2")

    def __init__(self, mu1: float, mu2: float, t0_1: int, t0_2: int,
                 t0_1_static: int, n: int):
        if not (0.0 < mu2 < mu1 <= 1.0):
            raise ValueError(f"need 0 < mu2 < mu1 <= 1, got mu1={mu1}, mu2={mu2}")
        if min(t0_1, t0_2, t0_1_static) < 1:
            raise ValueError("initial pull counts must be >= 1")
        if n < 1:
            raise ValueError(f"horizon must be >= 1, got {n}")
        self.mu1, self.mu2 = float(mu1), float(mu2)
        self.t0_1, self.t0_2 = int(t0_1), int(t0_2)
        self.t0_1_static = int(t0_1_static)
        self.n = int(n)
        self.epsilon = self.t0_1_static / (self.t0_1_static + self.t0_2)
        self.t1 = self.t0_1_static - self.t0_1 + 1
        self.mu_st_1 = self.mu1 * self.epsilon
        self.mu_st_2 = self.mu2 * (1.0 - self.epsilon)
        if not (self.t0_1 <= self.t0_1_static < (mu2 / mu1) * self.t0_2):
            raise ValueError(
                f"need T0_1 <= T0_1_static < (mu2/mu1) T0_2: "
                f"{self.t0_1} <= {self.t0_1_static} < {(mu2 / mu1) * self.t0_2}")
        t0 = self.t0_1 + self.t0_2
        mu_b1_first = self.mu1 * self.t0_1 / t0
        mu_b2_first = self.mu2 * self.t0_2 / t0
        if not (mu_b1_first <= self.mu_st_1 < self.mu_st_2 <= mu_b2_first):
            raise ValueError(
                f"sandwich ordering fails at t=1: "
                f"{mu_b1_first} <= {self.mu_st_1} < {self.mu_st_2} <= {mu_b2_first}")

    @staticmethod
    def paper_instance(n: int = 20000) -> "CouplingConfig":
        """mu=(0.9, 0.8), T0_1=10, T0_1_static=16216, T0_2=round(16216^1.5).

        16216^1.5 is not an integer (2064978.829...); it is rounded to
        2064979 because pull counts are integral. The sandwich ordering is
        re-verified at construction, so the rounding is safe.
        """
        return CouplingConfig(mu1=0.9, mu2=0.8, t0_1=10,
                              t0_2=round(16216 ** 1.5),
                              t0_1_static=16216, n=n)

    def biased_env_config(self, mode: str = "mask") -> dict:
        """The plain biased instance as a simulator environment config."""
        return {
            "means": [self.mu1, self.mu2],
            "bias": {"f": {"kind": "power", "alpha": 1.0},
                     "initial_pulls": [self.t0_1, self.t0_2]},
            "noise": "bernoulli",
            "mode": mode,
        }

    def to_config(self) -> dict:
        return {"mu1": self.mu1, "mu2": self.mu2, "t0_1": self.t0_1,
                "t0_2": self.t0_2, "t0_1_static": self.t0_1_static,
                "n": self.n}


class CoupledTrace:
    """Per-step records of one coupled run.

    Arrays of length n: actions and (0/1) feedback of both runs, the
    cumulative event-B status, the queue length after the step, and the
    post-step arm-0 counts of both runs. break_reason is None while the
    coupling never left the joint cases, else "sandwich" or "empty_queue"
    with break_t the first affected step.
    """

    __slots__ = ("config", "seed", "a_bias", "y_bias", "a_static", "y_static",
                 "b_status", "queue_len", "count1_bias", "count1_static",
                 "break_reason", "break_t", "queue_bias", "queue_static")

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])

    @property
    def n(self) -> int:
        return len(self.a_bias)

    def final_counts_bias(self) -> tuple[int, int]:
        n1 = int(self.count1_bias[-1])
        return n1, self.n - n1

    def final_counts_static(self) -> tuple[int, int]:
        n1 = int(self.count1_static[-1])
        return n1, self.n - n1


def coupled_run(config: CouplingConfig, seed: int) -> CoupledTrace:
    """One paired run of biased and static UCB under the joint sampler."""
    n = config.n
    src = DrawSource(seed, ENV_STREAM)
    uniform = src.uniform
    ucb_bias = UCB1()
    ucb_static = UCB1()
    ucb_bias.reset(2, n)
    ucb_static.reset(2, n)

    mu1, mu2 = config.mu1, config.mu2
    mu_st_1, mu_st_2 = config.mu_st_1, config.mu_st_2
    t0_1, t0_2 = config.t0_1, config.t0_2
    t0 = t0_1 + t0_2
    eps = config.epsilon

    q_bias: deque = deque()    # (y_bias at push time, mu_bias_2 at push time)
    q_static: deque = deque()  # y_static at push time

    a_bias = np.empty(n, dtype=np.int8)
    y_bias = np.empty(n, dtype=np.int8)
    a_static = np.empty(n, dtype=np.int8)
    y_static = np.empty(n, dtype=np.int8)
    b_status = np.empty(n, dtype=bool)
    queue_len = np.empty(n, dtype=np.int32)
    count1_bias = np.empty(n, dtype=np.int32)
    count1_static = np.empty(n, dtype=np.int32)

    c1_bias = 0   # biased run's pulls of arm 0
    c1_static = 0
    b_holds = True
    break_reason = None
    break_t = None

    for t in range(1, n + 1):
        # Event B at the top of step t uses counts through t-1; with two
        # arms the three sandwich inequalities all reduce to frac_1 <= eps.
        if b_holds:
            frac1 = (t0_1 + c1_bias) / (t0 + t - 1)
            if frac1 > eps:
                b_holds = False
                if break_reason is None:
                    break_reason = "sandwich"
                    break_t = t
        ab = ucb_bias.select(t)
        ast = ucb_static.select(t)
        mu_b1 = mu1 * (t0_1 + c1_bias) / (t0 + t - 1)
        mu_b2 = mu2 * (t0_2 + (t - 1 - c1_bias)) / (t0 + t - 1)

        coupled = b_holds
        if coupled and ab == 0 and ast == 1:
            if not (q_bias and q_static):
                coupled = False
                b_holds = False
                if break_reason is None:
                    break_reason = "empty_queue"
                    break_t = t

        u1 = uniform()
        u2 = uniform()
        if not coupled:
            # Independent sampling: biased draw first, then static.
            mu_b = mu_b1 if ab == 0 else mu_b2
            mu_s = mu_st_1 if ast == 0 else mu_st_2
            yb = 1 if u1 < mu_b else 0
            ys = 1 if u2 < mu_s else 0
        elif ab == 0 and ast == 0:
            # Both pull arm 0: static sample, biased by thinning.
            ys = 1 if u1 < mu_st_1 else 0
            yb = ys if u2 < mu_b1 / mu_st_1 else 0
        elif ab == 1 and ast == 1:
            # Both pull arm 1: biased sample, static by thinning.
            yb = 1 if u1 < mu_b2 else 0
            ys = yb if u2 < mu_st_2 / mu_b2 else 0
        elif ab == 1 and ast == 0:
            # Crossed: independent draws, copies pushed into both queues.
            ys = 1 if u1 < mu_st_1 else 0
            yb = 1 if u2 < mu_b2 else 0
            q_static.append(ys)
            q_bias.append((yb, mu_b2))
        else:
            # Crossed the other way: consume one queued pair.
            yb_old, mu_b2_old = q_bias.popleft()
            ys_old = q_static.popleft()
            # Static reuses the queued biased sample at its push-time ratio;
            # biased reuses the queued static sample at the current ratio.
            ys = yb_old if u1 < mu_st_2 / mu_b2_old else 0
            yb = ys_old if u2 < mu_b1 / mu_st_1 else 0

        ucb_bias.update(ab, float(yb))
        ucb_static.update(ast, float(ys))
        if ab == 0:
            c1_bias += 1
        if ast == 0:
            c1_static += 1
        i = t - 1
        a_bias[i] = ab
        y_bias[i] = yb
        a_static[i] = ast
        y_static[i] = ys
        b_status[i] = b_holds
        queue_len[i] = len(q_bias)
        count1_bias[i] = c1_bias
        count1_static[i] = c1_static

    return CoupledTrace(config=config, seed=seed, a_bias=a_bias,
                        y_bias=y_bias, a_static=a_static, y_static=y_static,
                        b_status=b_status, queue_len=queue_len,
                        count1_bias=count1_bias, count1_static=count1_static,
                        break_reason=break_reason, break_t=break_t,
                        queue_bias=list(q_bias), queue_static=list(q_static))


def dominance_check(trace: CoupledTrace) -> bool:
    """True iff static arm-0 pulls >= biased arm-0 pulls at every step
    where the event B still held."""
    mask = trace.b_status
    return bool(np.all(trace.count1_static[mask] >= trace.count1_bias[mask]))


def queue_identity_check(trace: CoupledTrace) -> bool:
    """Queue length equals static-minus-biased arm-0 pulls while coupled.

    Checked through the last step before any break; after a break the
    queues are frozen and the identity no longer applies.
    """
    n = trace.n
    last = n if trace.break_t is None else trace.break_t - 1
    if last == 0:
        return True
    diff = (trace.count1_static[:last] - trace.count1_bias[:last])
    return bool(np.all(trace.queue_len[:last] == diff))


def sufficient_event_check(trace: CoupledTrace) -> tuple[bool, bool]:
    """(sufficient event held, B_n held).

    The sufficient event checks T_static_1(t) <= eps * t at the
    consecutive-integer checkpoints t = t1, t1+1, ..., n; it implies B_n.
    """
    cfg = trace.config
    b_n = bool(trace.b_status[-1])
    t1 = cfg.t1
    if t1 > trace.n:
        return True, b_n
    ts = np.arange(t1, trace.n + 1)
    held = bool(np.all(trace.count1_static[t1 - 1:] <= cfg.epsilon * ts))
    return held, b_n


def coupled_verdict(config: CouplingConfig, seed: int) -> dict:
    """Run one coupled pair and summarize the per-step checks."""
    trace = coupled_run(config, seed)
    suff, b_n = sufficient_event_check(trace)
    cb = trace.final_counts_bias()
    cs = trace.final_counts_static()
    return {
        "seed": seed,
        "dominance_ok": dominance_check(trace),
        "queue_identity_ok": queue_identity_check(trace),
        "b_final": b_n,
        "sufficient_event": suff,
        "break_reason": trace.break_reason,
        "break_t": trace.break_t,
        "bias_counts": list(cb),
        "static_counts": list(cs),
        "bias_subopt_frac": cb[1] / trace.n,
    }


def _verdict_worker(args):
    cfg_dict, seed = args
    return coupled_verdict(CouplingConfig(**cfg_dict), seed)


def coupled_monte_carlo(config: CouplingConfig, repeats: int,
                        base_seed: int = 0,
                        threads: int | None = None) -> list[dict]:
    """Per-run verdicts for seeds base_seed+1..base_seed+repeats, seed order."""
    jobs = [(config.to_config(), base_seed + i) for i in range(1, repeats + 1)]
    workers = min(resolve_workers(threads), repeats)
    if workers <= 1 or repeats == 1:
        return [_verdict_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, repeats // (workers * 4))
        return list(pool.map(_verdict_worker, jobs, chunksize=chunk))


def linear_regret_stat(config: CouplingConfig, repeats: int,
                       base_seed: int = 0,
                       threads: int | None = None) -> dict:
    """Uncoupled biased UCB at the construction's instance.

    Reports the empirical frequency of T_2(n) >= 0.99 n and the mean
    pseudo-regret divided by n. Requires n >= t1 (the horizon regime of
    the linear-regret statement).
    """
    n = config.n
    if n < config.t1:
        raise ValueError(f"horizon {n} below the construction's t1={config.t1}")
    env = Environment.from_config(config.biased_env_config())
    events = [{"name": "subopt_ge_99", "arm": 1, "op": "ge",
               "threshold": 0.99 * n}]
    result = monte_carlo(env, "ucb1", n, repeats, base_seed=base_seed,
                         events=events, threads=threads)
    return {
        "prob_suboptimal_ge_99": result.aggregates["event_probs"]["subopt_ge_99"],
        "mean_regret_over_n": result.aggregates["pseudo_regret_mean"] / n,
        "repeats": repeats,
        "base_seed": base_seed,
        "digest": result.digest,
        "result": result,
    }
