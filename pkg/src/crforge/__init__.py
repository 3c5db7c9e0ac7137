"""Common randomness from correlated countable-alphabet sources over a noisy channel.

Modules:

- ``dist``: countable pmfs, explicit joints, information measures, sources
- ``typicality``: unified typicality and the finite-n verifiers
- ``channel``: DMCs, Blahut-Arimoto capacity, the index link
- ``protocol``: binned codebook, encoder/decoder, Monte-Carlo runs
- ``capacity``: numerical evaluation of the capacity formula
- ``harness``/``cli``: config-driven pipelines
"""

from .capacity import (CapacityProblem, CapacitySolution, evaluate_point, solve_ascent,
                       solve_brute_force, solve_sweep)
from .channel import (Dmc, LinkModel, blahut_arimoto, check_rate_condition, shannon_capacity,
                      simulate_link, transmit)
from .dist import (AuxChannel, CountablePmf, DoublySymmetricBinary, ExplicitJoint, JointPmf,
                   ResampleCoupling, conditional_log2_second_moment, entropy, is_admissible,
                   kl_divergence, log2_second_moment, mutual_information, source_from_json)
from .errors import (CodebookTooLarge, CrforgeError, MismatchedInstances, RateConditionViolated,
                     ResourceLimitError, TooLarge, ValidationError)
from .protocol import (Codebook, RunReport, build_codebook, codebook_sizes, decode, encode,
                       rate_certificate, run_protocol)
from .typicality import (DenseScorer, TypicalityLadder, empirical_type, independent_pair_probability,
                         is_typical, typicality_score, verify_aep, verify_consistency,
                         verify_jaep, verify_markov_lemma)

__version__ = "0.1.0"

__all__ = [
    "AuxChannel", "CapacityProblem", "CapacitySolution", "Codebook", "CodebookTooLarge",
    "CountablePmf", "CrforgeError", "DenseScorer", "Dmc", "DoublySymmetricBinary",
    "ExplicitJoint", "JointPmf", "LinkModel", "MismatchedInstances", "RateConditionViolated",
    "ResampleCoupling", "ResourceLimitError", "RunReport", "TooLarge", "TypicalityLadder",
    "ValidationError", "blahut_arimoto", "build_codebook", "check_rate_condition",
    "codebook_sizes", "conditional_log2_second_moment", "decode", "empirical_type", "encode",
    "entropy", "evaluate_point", "independent_pair_probability", "is_admissible", "is_typical",
    "kl_divergence", "log2_second_moment", "mutual_information", "rate_certificate",
    "run_protocol", "shannon_capacity", "simulate_link", "solve_ascent", "solve_brute_force",
    "solve_sweep", "source_from_json", "transmit", "typicality_score", "verify_aep",
    "verify_consistency", "verify_jaep", "verify_markov_lemma",
]
