"""Reducibility certificates for quasi-periodic linear cocycles."""
from .cocycle import Certificate, CocycleEvaluator, IntegratorSettings, integrate_cocycle
from .groups import (GramForm, assert_constant, gram_map, group_residual, normalize_base_point,
                     normalize_sl, normalize_unitary, reduce_to_group)
from .jordan import (JordanBasis, RealDecomposition, decompose_real, extract_jordan_bases,
                     merge_real_blocks, realify_block, shift_exponent, subbundle_intersection_dim,
                     verify_jordan_basis)
from .resonance import (ExponentClass, ResonanceHit, SearchBox, classify_exponent,
                        detect_resonance, detect_resonance_discrete, normalize_exponent,
                        unimodular_complete)
from .suspension import (BumpProfile, DiscreteCocycle, SuspensionEvaluator, lift_reduction,
                         matrix_log_field, restrict_to_subtorus, suspend, verify_suspension)
from .torus import EvaluationGrid, FrequencyVector, TorusMap, fit_from_samples
from .verify import (ResidualReport, check_cocycle_law, check_derivative_relation,
                     residual_conjugation)

__all__ = [
    "BumpProfile", "Certificate", "CocycleEvaluator", "DiscreteCocycle", "EvaluationGrid",
    "ExponentClass", "FrequencyVector", "GramForm", "IntegratorSettings", "JordanBasis",
    "RealDecomposition", "ResidualReport", "ResonanceHit", "SearchBox", "SuspensionEvaluator",
    "TorusMap", "assert_constant", "check_cocycle_law", "check_derivative_relation",
    "classify_exponent", "decompose_real", "detect_resonance", "detect_resonance_discrete",
    "extract_jordan_bases", "fit_from_samples", "gram_map", "group_residual",
    "integrate_cocycle", "lift_reduction", "matrix_log_field", "merge_real_blocks",
    "normalize_base_point", "normalize_exponent", "normalize_sl", "normalize_unitary",
    "realify_block", "reduce_to_group", "residual_conjugation", "restrict_to_subtorus",
    "shift_exponent", "subbundle_intersection_dim", "suspend", "unimodular_complete",
    "verify_jordan_basis", "verify_suspension",
]
