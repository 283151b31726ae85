"""Simulation and verification toolkit for bandits with history-dependent
feedback attenuation.

Feedback for arm i at time t is attenuated by W_i(t) = f(share of past pulls
of i, initial pseudo-pulls included); the toolkit provides the bias core,
seeded environments, policies (a phased elimination routine that is robust to
the attenuation, plus optimistic/adversarial baselines), closed-form regret
bounds with checkable intermediate quantities, a paired-run construction that
couples a biased optimistic run to an unbiased twin, and a CLI that
regenerates every bundled dataset from (config digest, seed).
"""

from .bias import (BiasFunction, BiasModel, PullState, advance, bias_fraction,
                   clip_max, clip_min, constant, power, reweight, sigmoid)
from .bounds import (FminTable, Instance, SamplingSchedule, bias_error_bound,
                     biased_proxy, bound_report, check_horizon_condition,
                     fmin_round, fmin_table, kl_bernoulli, kl_gaussian,
                     lower_bound, proxy_inequality_check, proxy_stopping_time,
                     small_bias_set, stability_minimal_witness,
                     stability_recursion_check, upper_bound_inst_dep,
                     upper_bound_worst_case)
from .coupling import (CoupledTrace, CouplingConfig, coupled_monte_carlo,
                       coupled_run, coupled_verdict, dominance_check,
                       linear_regret_stat, queue_identity_check,
                       sufficient_event_check)
from .envs import (Environment, debiased_sample, make_env, pseudo_regret,
                   sample_feedback)
from .policies import (EXP3, EXP3IX, PhasedElimination, Policy, UCB1,
                       UCBVDebiased, Uniform, elimination_round_size,
                       make_policy, policy_from_config)
from .rng import DrawSource, ENV_STREAM, POLICY_STREAM, make_generator
from .simulate import (ExperimentResult, Trace, config_digest,
                       geometric_times, monte_carlo, run, run_from_config,
                       snapshot_fractions, trace_summary, write_aggregate_csv,
                       write_jsonl, write_trace_csv)

__version__ = "0.1.0"

__all__ = [
    "BiasFunction", "BiasModel", "PullState", "advance", "bias_fraction",
    "clip_max", "clip_min", "constant", "power", "reweight", "sigmoid",
    "FminTable", "Instance", "SamplingSchedule", "bias_error_bound",
    "biased_proxy", "bound_report", "check_horizon_condition", "fmin_round",
    "fmin_table", "kl_bernoulli", "kl_gaussian", "lower_bound",
    "proxy_inequality_check", "proxy_stopping_time", "small_bias_set",
    "stability_minimal_witness", "stability_recursion_check",
    "upper_bound_inst_dep", "upper_bound_worst_case",
    "CoupledTrace", "CouplingConfig", "coupled_monte_carlo", "coupled_run",
    "coupled_verdict", "dominance_check", "linear_regret_stat",
    "queue_identity_check", "sufficient_event_check",
    "Environment", "debiased_sample", "make_env", "pseudo_regret",
    "sample_feedback",
    "EXP3", "EXP3IX", "PhasedElimination", "Policy", "UCB1", "UCBVDebiased",
    "Uniform", "elimination_round_size", "make_policy", "policy_from_config",
    "DrawSource", "ENV_STREAM", "POLICY_STREAM", "make_generator",
    "ExperimentResult", "Trace", "config_digest", "geometric_times",
    "monte_carlo", "run", "run_from_config", "snapshot_fractions",
    "trace_summary", "write_aggregate_csv", "write_jsonl", "write_trace_csv",
    "__version__",
]
