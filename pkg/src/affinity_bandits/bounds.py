"""Closed-form regret-bound calculators and machine-checkable lemma helpers.

Evaluates the instance-dependent and worst-case upper bounds for the
phased-elimination policy, the consistency lower bound with its proof-level
parameter choices, the horizon condition under which the upper bounds are
proved, and several deterministic combinatorial facts (small-bias-set
pigeonhole, a growth recursion, the divergence-decomposition proxy
inequality, and the idealized round table f_min with its exit rounds).

All logarithms are natural. Where a formula evaluates the reweighting
function outside its (0,1] domain (the lower bound's beta/K and beta'/K can
exceed 1), the argument is clamped to 1; this clamping is local to the
lower-bound evaluation and noted in the report.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .bias import BiasFunction, BiasModel
from .policies import elimination_round_size

_LN_12_PI2 = math.log(12.0 / math.pi ** 2)

M_R_CAP = 10 ** 7  # stop unrolling round tables once m_r exceeds this


class SamplingSchedule:
    """Round sizes m_r = ceil(2^(2r+offset) * ln(12/pi^2 * K^2 * r^2 * n))."""

    __slots__ = ("num_arms", "horizon", "offset")

    def __init__(self, num_arms: int, horizon: int, offset: int = 5):
        if num_arms < 1 or horizon < 1:
            raise ValueError("need num_arms >= 1 and horizon >= 1")
        if offset not in (5, 6):
            raise ValueError(f"offset must be 5 or 6, got {offset}")
        self.num_arms = int(num_arms)
        self.horizon = int(horizon)
        self.offset = int(offset)

    def m(self, r: int) -> int:
        return elimination_round_size(r, self.num_arms, self.horizon, self.offset)

    def cumulative(self, r: int) -> int:
        """Sum of m_r' over rounds r' = 1..r."""
        return sum(self.m(i) for i in range(1, r + 1))


class Instance:
    """A bound-evaluation instance: means, shared f, initial pulls, horizon."""

    __slots__ = ("means", "f", "initial_pulls", "n", "offset", "gaps", "t0")

    def __init__(self, means: Sequence[float], f: BiasFunction,
                 initial_pulls: Sequence[int], n: int, offset: int = 5):
        self.means = tuple(float(m) for m in means)
        if any(not math.isfinite(m) or not (0.0 <= m <= 1.0) for m in self.means):
            raise ValueError(f"means must be finite in [0,1], got {means}")
        if not isinstance(f, BiasFunction):
            raise ValueError("f must be a BiasFunction")
        self.f = f
        self.initial_pulls = tuple(int(p) for p in initial_pulls)
        if len(self.initial_pulls) != len(self.means):
            raise ValueError("initial_pulls length must match means")
        if any(p < 1 for p in self.initial_pulls):
            raise ValueError("initial pull counts must be >= 1")
        if n < 1:
            raise ValueError(f"horizon must be >= 1, got {n}")
        self.n = int(n)
        self.offset = int(offset)
        best = max(self.means)
        self.gaps = tuple(best - m for m in self.means)
        self.t0 = sum(self.initial_pulls)

    @property
    def num_arms(self) -> int:
        return len(self.means)

    def schedule(self) -> SamplingSchedule:
        return SamplingSchedule(self.num_arms, self.n, self.offset)

    @staticmethod
    def from_config(cfg: dict) -> "Instance":
        return Instance(means=cfg["means"],
                        f=BiasFunction.from_config(cfg["f"]),
                        initial_pulls=cfg["initial_pulls"],
                        n=cfg["n"], offset=cfg.get("offset", 5))

    def to_config(self) -> dict:
        return {"means": list(self.means), "f": self.f.to_config(),
                "initial_pulls": list(self.initial_pulls), "n": self.n,
                "offset": self.offset}


# ---------------------------------------------------------------------------
# Upper bounds

def _low_bias_regime(inst: Instance) -> bool:
    """Whether T0_max <= 2^7 ln(12 K^2 n / pi^2), the typical-scaling regime."""
    k, n = inst.num_arms, inst.n
    return max(inst.initial_pulls) <= 2.0 ** 7 * (_LN_12_PI2
                                                  + 2.0 * math.log(k)
                                                  + math.log(n))


def _worst_case_f_arg(inst: Instance) -> float:
    """Smallest reachable pull fraction at the start: T0_min/(t0 + K - 1)."""
    return min(inst.initial_pulls) / (inst.t0 + inst.num_arms - 1)


def upper_bound_inst_dep(inst: Instance) -> float:
    """Instance-dependent elimination regret bound.

    sum over suboptimal arms of
        Delta_i + (2^11/3) * ln(12/pi^2 * K^2 * n^3) / (Delta_i * F^2)
    with F = f(1/(15K)) in the low-initial-bias regime
    (T0_max <= 2^7 ln(12 K^2 n / pi^2)), else F = f(T0_min/(t0+K-1)).
    """
    k, n = inst.num_arms, inst.n
    log_term = _LN_12_PI2 + 2.0 * math.log(k) + 3.0 * math.log(n)
    if _low_bias_regime(inst):
        f_val = inst.f(1.0 / (15.0 * k))
    else:
        f_val = inst.f(_worst_case_f_arg(inst))
    total = 0.0
    for d in inst.gaps:
        if d > 0.0:
            total += d + (2.0 ** 11 / 3.0) * log_term / (d * f_val ** 2)
    return total


def upper_bound_worst_case(inst: Instance) -> float:
    """Gap-free elimination regret bound.

    K + 2 * sqrt(2^11 n K ln(12/pi^2 K^2 n^3) / (3 f(T0_min/(t0+K-1))^2)).
    """
    k, n = inst.num_arms, inst.n
    log_term = _LN_12_PI2 + 2.0 * math.log(k) + 3.0 * math.log(n)
    f_val = inst.f(_worst_case_f_arg(inst))
    return k + 2.0 * math.sqrt(2.0 ** 11 * n * k * log_term / (3.0 * f_val ** 2))


# ---------------------------------------------------------------------------
# Lower bound

def _f_clamped(f: BiasFunction, x: float) -> float:
    """f(min(x, 1)): the lower-bound formulas can produce arguments > 1."""
    return f(min(x, 1.0))


def lower_bound(inst: Instance, a: float) -> dict:
    """Consistency lower bound with proof-level parameter choices.

    For a policy consistent with exponent `a`, the regret on this instance
    is (up to the theorem's universal constant) at least

        f(beta'/K)^-2 * sum_{i in B'} gamma (1-a) ln(n) / Delta_i
        + sum_{i in A \\ B'} (1-a) ln(n) / Delta_i

    with A = all suboptimal arms, gamma = |A|/K, beta = 2K/|A|,
    alpha = |A|/(6K), beta' = (1/alpha)(2 ln(Dmax/Dmin) + ln(4K/alpha)
    - 2 ln f(beta/K)), and B' the ceil(|A|/4) suboptimal arms of largest
    gap (a deterministic stand-in; the theorem asserts existence). Also
    reports the proof's epsilon = min(0.1, (1-mu_max)/Dmax) and
    n0 = alpha (1-a) ln(n) / (4 (1+eps)^2 Dmax^2).
    """
    if not (0.0 < a < 1.0):
        raise ValueError(f"consistency exponent must be in (0,1), got {a}")
    k = inst.num_arms
    if k < 2:
        raise ValueError("lower bound needs at least 2 arms")
    best = max(inst.means)
    if sum(1 for m in inst.means if m == best) != 1:
        raise ValueError("lower bound needs a unique optimal arm")
    subopt = [i for i in range(k) if inst.gaps[i] > 0.0]
    gaps = [inst.gaps[i] for i in subopt]
    d_max, d_min = max(gaps), min(gaps)
    size = len(subopt)
    gamma = size / k
    beta = 2.0 * k / size
    alpha = size / (6.0 * k)
    f = inst.f
    beta_prime = (1.0 / alpha) * (2.0 * math.log(d_max / d_min)
                                  + math.log(4.0 * k / alpha)
                                  - 2.0 * math.log(_f_clamped(f, beta / k)))
    eps = min(0.1, (1.0 - best) / d_max)
    log_n = math.log(inst.n)
    n0 = alpha * (1.0 - a) * log_n / (4.0 * (1.0 + eps) ** 2 * d_max ** 2)
    b_size = math.ceil(size / 4.0)
    by_gap = sorted(subopt, key=lambda i: (-inst.gaps[i], i))
    b_prime = set(by_gap[:b_size])
    f_bp = _f_clamped(f, beta_prime / k)
    value = 0.0
    for i in subopt:
        term = (1.0 - a) * log_n / inst.gaps[i]
        value += (gamma * term / f_bp ** 2) if i in b_prime else term
    return {
        "value": value,
        "beta": beta,
        "alpha": alpha,
        "beta_prime": beta_prime,
        "epsilon": eps,
        "n0": n0,
        "gamma": gamma,
        "b_prime": sorted(b_prime),
        "note": ("up to the theorem's universal constant; B' taken as the "
                 "largest-gap quarter of the suboptimal arms; f clamped to "
                 "f(min(x,1)) where arguments exceed 1"),
    }


def check_horizon_condition(inst: Instance) -> tuple[bool, float]:
    """Horizon condition for the elimination upper bounds.

    ln(nK) >= (mu_1 L / 2^5) * (1 + max{
        (1 + (T0_max - T0_min)/K) * ln(1 + 2^8 ln(12/pi^2 K^2 n)),
        (1 + T0_max - T0_min) * ln 13 })

    Returns (satisfied, LHS/RHS ratio); ratio is inf when RHS is 0
    (e.g. constant f has L = 0, so the condition is vacuous).
    """
    k, n = inst.num_arms, inst.n
    mu1 = max(inst.means)
    big_l = inst.f.lipschitz
    gap0 = max(inst.initial_pulls) - min(inst.initial_pulls)
    inner_log = _LN_12_PI2 + 2.0 * math.log(k) + math.log(n)
    rhs = (mu1 * big_l / 2.0 ** 5) * (
        1.0 + max((1.0 + gap0 / k) * math.log(1.0 + 2.0 ** 8 * inner_log),
                  (1.0 + gap0) * math.log(13.0)))
    lhs = math.log(n * k)
    if rhs <= 0.0:
        return True, math.inf
    return lhs >= rhs, lhs / rhs


# ---------------------------------------------------------------------------
# Combinatorial lemma checkers

def small_bias_set(fractions: Sequence[float], beta: float) -> set[int]:
    """Arms with pull fraction at most beta/K; always at least (1-1/beta)K many.

    The pigeonhole cardinality bound is verified on every call; a violation
    would falsify the lemma and raises.
    """
    if not (beta > 1.0):
        raise ValueError(f"beta must be > 1, got {beta}")
    k = len(fractions)
    if k == 0:
        raise ValueError("fractions must be non-empty")
    total = float(sum(fractions))
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {total}")
    cut = beta / k
    s = {i for i, x in enumerate(fractions) if x <= cut}
    if len(s) < (1.0 - 1.0 / beta) * k - 1e-12:
        raise RuntimeError(
            f"pigeonhole violated: |S|={len(s)} < (1-1/beta)K="
            f"{(1.0 - 1.0 / beta) * k} for fractions={list(fractions)}")
    return s


def stability_minimal_witness(K: float, beta: float, beta_prime: float,
                              t: float, m: int, eps: float = 1e-9) -> list[float]:
    """x of length m sitting margin eps above the recursion hypothesis.

    The margin is eps or eps * |rhs|, whichever is larger: when beta' is
    close to K the recursion values explode and an absolute 1e-9 bump
    would vanish in float64 rounding, leaving the strict hypothesis unmet.
    """
    x: list[float] = []
    for _ in range(m):
        rhs = ((beta_prime - beta) * t / (K - beta_prime)
               + beta_prime / (K - beta_prime) * sum(x))
        x.append(rhs + max(eps, eps * abs(rhs)))
    return x


def stability_recursion_check(K: float, beta: float, beta_prime: float,
                              t: float, x: Sequence[float],
                              details: bool = False):
    """Growth recursion: hypothesis at every index implies exponential growth.

    hypothesis_i: x_i > (b'-b)t/(K-b') + b'/(K-b') * sum_{j<i} x_j
    conclusion_i: x_i > ((b'-b)t/K) * exp(b' i / K)      (i is 1-based)

    Returns whether both hold for all i (or the pair of booleans with
    details=True). Parameters must satisfy 1 < beta < beta' < K and t > 0.
    """
    if not (1.0 < beta < beta_prime < K):
        raise ValueError(f"need 1 < beta < beta' < K, got "
                         f"beta={beta}, beta'={beta_prime}, K={K}")
    if not (t > 0.0):
        raise ValueError(f"need t > 0, got {t}")
    hyp = True
    concl = True
    prefix = 0.0
    for i, xi in enumerate(x, start=1):
        if not (xi > (beta_prime - beta) * t / (K - beta_prime)
                + beta_prime / (K - beta_prime) * prefix):
            hyp = False
        if not (xi > (beta_prime - beta) * t / K
                * math.exp(beta_prime * i / K)):
            concl = False
        prefix += xi
    if details:
        return hyp, concl
    return hyp and concl


# ---------------------------------------------------------------------------
# Divergence-decomposition proxy

def _bias_model_from_trace(trace) -> BiasModel:
    if trace.bias_config is None:
        raise ValueError("trace carries no bias model")
    return BiasModel.from_config(trace.bias_config)


def biased_proxy(trace, arm: int, tau: int) -> float:
    """sum_{t <= tau} W_arm(t)^2 1{A_t = arm} from the trace's exact history.

    Needs a full trace (the reweighting factor at each pull is recomputed
    from the running fraction). With constant(1) bias this equals T_arm(tau).
    """
    if trace.actions is None:
        raise ValueError("biased proxy needs a full trace")
    if not (0 <= tau <= trace.n):
        raise ValueError(f"tau={tau} outside [0, {trace.n}]")
    model = _bias_model_from_trace(trace)
    if not (0 <= arm < model.num_arms):
        raise IndexError(f"arm {arm} out of range")
    fn = model.functions[arm].fn_unchecked()
    t0 = model.t0_bias
    init = model.initial_pulls[arm]
    count = 0
    total = 0.0
    actions = trace.actions
    for t in range(1, tau + 1):
        if actions[t - 1] == arm:
            w = fn((init + count) / (t0 + t - 1))
            total += w * w
            count += 1
    return total


def proxy_stopping_time(trace, arm: int, n0: float, beta_prime: float) -> int:
    """tau_i = min{t >= n0 : fraction of `arm` after step t > beta'/K, or t = n}."""
    model = _bias_model_from_trace(trace)
    k = model.num_arms
    cut = beta_prime / k
    t0 = model.t0_bias
    init = model.initial_pulls[arm]
    if trace.actions is None:
        raise ValueError("stopping time needs a full trace")
    count = 0
    start = max(1, math.ceil(n0))
    actions = trace.actions
    for t in range(1, trace.n + 1):
        if actions[t - 1] == arm:
            count += 1
        if t >= start and (init + count) / (t0 + t) > cut:
            return t
    return trace.n


def proxy_inequality_check(trace, arm: int, n0: float,
                           beta_prime: float) -> tuple[bool, float, float, int]:
    """Per-trace check: proxy(tau_i) <= n0 + f(beta'/K)^2 * T_arm(n0, tau_i].

    Returns (holds, proxy, bound, tau_i). Requires beta' < K so that f is
    evaluated inside its domain.
    """
    model = _bias_model_from_trace(trace)
    k = model.num_arms
    if not (0.0 < beta_prime < k):
        raise ValueError(f"need 0 < beta' < K, got beta'={beta_prime}, K={k}")
    tau = proxy_stopping_time(trace, arm, n0, beta_prime)
    proxy = biased_proxy(trace, arm, tau)
    lo = min(tau, max(0, math.floor(n0)))
    pulls_after = int(trace.counts_at(tau)[arm]) - int(trace.counts_at(lo)[arm])
    f_val = model.functions[arm](beta_prime / k)
    bound = n0 + f_val ** 2 * pulls_after
    return proxy <= bound + 1e-12, proxy, bound, tau


# ---------------------------------------------------------------------------
# Idealized round table (f_min) and per-round bias error

class FminTable:
    """Unrolled idealized elimination rounds.

    u_sets[r-1] is the surviving set entering round r; fbar[r-1][i] the
    idealized minimum average reweighting of arm i during round r (None for
    arms not in the set); exit_rounds[i] the round after which arm i leaves
    (None if it survives every unrolled round). Unrolling stops when every
    suboptimal arm has exited, max_round is hit, or m_r exceeds the cap.
    """

    __slots__ = ("u_sets", "fbar", "exit_rounds", "capped")

    def __init__(self, u_sets, fbar, exit_rounds, capped):
        self.u_sets = u_sets
        self.fbar = fbar
        self.exit_rounds = exit_rounds
        self.capped = capped


def fmin_table(inst: Instance, schedule: SamplingSchedule | None = None,
               max_round: int = 64, m_cap: int = M_R_CAP,
               min_rounds: int = 0) -> FminTable:
    """Unroll the idealized confidence-set recursion.

    U_1 = all arms; U_{r+1} = {i in U_r : Delta_i * fbar_i(r) <= 2^(1-r)},

    fbar_i(r) = (1/m_r) * sum_{l=1..m_r}
        f((T0_i + sum_{r'<r} m_r' + l - 1)
          / (t0 + sum_{r'<r} |U_r'| m_r' + |U_r| (l-1) + b_i(U_r)))

    where b_i(S) counts members of S with index < i. The l-sum is
    evaluated vectorized.
    """
    if schedule is None:
        schedule = inst.schedule()
    f = inst.f
    k = inst.num_arms
    t0 = inst.t0
    u = list(range(k))
    u_sets = []
    fbar_rows = []
    exit_rounds: list[int | None] = [None] * k
    pulls_before = 0        # sum of m_r' for rounds before the current one
    denom_before = 0        # sum of |U_r'| * m_r' for rounds before
    capped = False
    for r in range(1, max_round + 1):
        m_r = schedule.m(r)
        if m_r > m_cap:
            capped = True
            break
        u_sets.append(list(u))
        size = len(u)
        ell = np.arange(m_r, dtype=np.float64)   # l - 1
        row: list[float | None] = [None] * k
        for rank, i in enumerate(u):
            num = inst.initial_pulls[i] + pulls_before + ell
            den = t0 + denom_before + size * ell + rank
            row[i] = float(np.mean(f.evaluate_array(num / den)))
        fbar_rows.append(row)
        cut = 2.0 ** (1 - r)
        survivors = [i for i in u if inst.gaps[i] * row[i] <= cut]
        for i in u:
            if i not in survivors:
                exit_rounds[i] = r
        pulls_before += m_r
        denom_before += size * m_r
        u = survivors
        if r >= min_rounds and all(inst.gaps[i] == 0.0 for i in u):
            break
    return FminTable(u_sets=u_sets, fbar=fbar_rows, exit_rounds=exit_rounds,
                     capped=capped)


def fmin_round(inst: Instance, schedule: SamplingSchedule | None = None,
               r: int = 1) -> list[float | None]:
    """Per-arm idealized average reweighting fbar_i(r) (None if i left U_r)."""
    if r < 1:
        raise ValueError(f"round must be >= 1, got {r}")
    table = fmin_table(inst, schedule, max_round=r, min_rounds=r)
    if len(table.fbar) < r:
        raise ValueError(f"round {r} exceeds the unrolled table "
                         f"(m_r cap {M_R_CAP})")
    return table.fbar[r - 1]


def bias_error_bound(inst: Instance, schedule: SamplingSchedule | None,
                     r: int, active_sets: Sequence[Sequence[int]]) -> tuple[float, float]:
    """Within-round reweighting drift: closed-form bound and exact maximum.

    For the active-set history active_sets[0..r-1] (entering rounds 1..r),
    returns (bound, exact) where

    bound = (L/m_r)(1 + (1 + (T0_max - T0_min)/|A_r|)
                    * ln(1 + |A_r| m_r / (t0 + sum_{r'<r} |A_r'| m_r')))

    and exact is the largest |fbar_i(r) - fbar_j(r)| over pairs in A_r,
    computed by direct summation over the round's sweeps.
    """
    if schedule is None:
        schedule = inst.schedule()
    if r < 1 or len(active_sets) < r:
        raise ValueError("need the active sets for every round up to r")
    a_r = sorted(active_sets[r - 1])
    if not a_r:
        raise ValueError("active set for round r must be non-empty")
    m_r = schedule.m(r)
    t0 = inst.t0
    denom_before = sum(len(active_sets[i - 1]) * schedule.m(i)
                       for i in range(1, r))
    pulls_before = sum(schedule.m(i) for i in range(1, r))
    size = len(a_r)
    t0_gap = max(inst.initial_pulls) - min(inst.initial_pulls)
    big_l = inst.f.lipschitz
    bound = (big_l / m_r) * (
        1.0 + (1.0 + t0_gap / size)
        * math.log(1.0 + size * m_r / (t0 + denom_before)))
    ell = np.arange(m_r, dtype=np.float64)
    fbars = []
    for rank, i in enumerate(a_r):
        num = inst.initial_pulls[i] + pulls_before + ell
        den = t0 + denom_before + size * ell + rank
        fbars.append(float(np.mean(inst.f.evaluate_array(num / den))))
    exact = max(abs(a - b) for a in fbars for b in fbars) if size > 1 else 0.0
    return bound, exact


# ---------------------------------------------------------------------------
# KL helpers

def kl_gaussian(mu: float, mu_prime: float) -> float:
    """KL between unit-variance Gaussians: (mu - mu')^2 / 2."""
    return (mu - mu_prime) ** 2 / 2.0


def kl_bernoulli(p: float, q: float) -> float:
    """KL(Bern(p) || Bern(q)), with the usual 0 log 0 = 0 conventions."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError(f"p, q must be in [0,1], got p={p}, q={q}")
    if p == q:
        return 0.0
    if q in (0.0, 1.0):
        return math.inf
    total = 0.0
    if p > 0.0:
        total += p * math.log(p / q)
    if p < 1.0:
        total += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return total


# ---------------------------------------------------------------------------
# Report

def bound_report(inst: Instance, a: float = 0.5,
                 fmin_rounds: int = 6) -> dict:
    """All bound values and intermediates for one instance, as plain data."""
    sched = inst.schedule()
    ok, ratio = check_horizon_condition(inst)
    report = {
        "instance": inst.to_config(),
        "gaps": list(inst.gaps),
        "upper_inst_dep": upper_bound_inst_dep(inst),
        "upper_worst_case": upper_bound_worst_case(inst),
        "horizon_condition_ok": ok,
        "horizon_condition_ratio": ratio,
        "intermediates": {
            "m_r": [sched.m(r) for r in range(1, fmin_rounds + 1)],
            "f_at_1_over_15K": inst.f(1.0 / (15.0 * inst.num_arms)),
            "f_at_worst_case_arg": inst.f(_worst_case_f_arg(inst)),
            "low_bias_regime": _low_bias_regime(inst),
            "lipschitz": inst.f.lipschitz,
        },
    }
    try:
        lb = lower_bound(inst, a)
    except ValueError as exc:
        report["lower_bound"] = None
        report["lower_bound_error"] = str(exc)
    else:
        report["lower_bound"] = lb["value"]
        report["lower_bound_label"] = lb["note"]
        report["intermediates"].update({
            "a": a, "beta": lb["beta"], "beta_prime": lb["beta_prime"],
            "alpha": lb["alpha"], "n0": lb["n0"], "epsilon": lb["epsilon"],
            "b_prime": lb["b_prime"],
        })
    table = fmin_table(inst, sched, max_round=fmin_rounds)
    report["intermediates"]["fmin_table"] = [
        [None if v is None else v for v in row] for row in table.fbar]
    report["intermediates"]["fmin_exit_rounds"] = table.exit_rounds
    return report
