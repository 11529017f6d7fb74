"""Commutativity conditions: brute-force oracle, SMT embedding, verification and inference."""

from .embed import EmbedError, LogicalAdt, decode_state, embed, emit_commutativity_query
from .infer import Inference, infer_condition, pool_atoms
from .loopsum import LoopSummaryError, instrument_loop_summaries
from .oracle import OracleVerdict, Sample, commutes_at, oracle_check_condition, site_samples
from .site import program_sites, site_domains, site_vars, spec_of
from .solver import SolverResult, SolverUnavailable, run_smt, solver_available
from .verify import MODES, SolverVerdict, Verdict, solver_check, verify_condition

__all__ = [
    "EmbedError",
    "Inference",
    "LogicalAdt",
    "LoopSummaryError",
    "MODES",
    "OracleVerdict",
    "Sample",
    "SolverResult",
    "SolverUnavailable",
    "SolverVerdict",
    "Verdict",
    "commutes_at",
    "decode_state",
    "embed",
    "emit_commutativity_query",
    "infer_condition",
    "instrument_loop_summaries",
    "oracle_check_condition",
    "pool_atoms",
    "program_sites",
    "run_smt",
    "site_domains",
    "site_samples",
    "site_vars",
    "solver_available",
    "solver_check",
    "spec_of",
    "verify_condition",
]
