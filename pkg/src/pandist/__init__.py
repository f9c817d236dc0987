"""Facility location and distribution planning under demand uncertainty.

Deterministic, two-stage stochastic and moment-based distributionally robust
models, an in-house simplex/branch-and-bound solver pair, and out-of-sample
plan evaluation.
"""
from .instance import (CANDIDATE, FORBIDDEN, PREOPENED, Instance, InputError, ScenarioSet, Site,
                       TypedInstance, ValidationReport, Violation, validate_instance,
                       validate_typed_instance)
from .model import EQ, GE, LE, BuildError, ModelBuilder, ModelIR, write_lp
from .lp import LpSolution, solve_lp
from .milp import MilpSolution, SolverLimitError, enumerate_bruteforce, solve_milp
from .scenarios import (AmbiguityError, AmbiguitySpec, MomentEstimate, build_ambiguity_bounds,
                        empirical_moments, moments_from_quantiles, penalty_schedule, rng_for,
                        sample_normal_scenarios, sample_uniform_scenarios)
from .formulations import (build_dc_inventory_extension, build_deterministic, build_dro_milp,
                           build_extensive_smip, build_lead_time_extension,
                           build_multi_type_extension, build_worst_case_lp, dro_worst_case_part)
from .dro_verify import (DualCertificate, OracleError, build_second_stage_dual, second_stage_cost,
                         second_stage_dual, worst_case_expectation, worst_case_expectation_dual)
from .evaluation import (CostBreakdown, PlanEvaluation, apply_dc_policy, apply_scarcity,
                         check_first_stage, check_solution_invariants, compare_approaches,
                         out_of_sample_evaluate, solve_approach)

__version__ = "0.1.0"
