"""Heavy-tailed block families, their convolutions and class diagnostics."""

from .scales import ParameterError, ScaleSequence, build_scale_sequence
from .distributions import (ExponentialControl, Law, PiecewiseDist, build_family1, build_family2,
                            build_from_config, build_non_ol_example, build_staircase_ol_example,
                            build_tail_equivalent, moment_diagnostic)
from .convolution import (ConvPower, ConvTable, NumericConv, PairConv, cstar_estimate, nfold_tail,
                          self_conv_density, t_functional)
from .counting import CountingDist
from .compound import (CompoundSpec, compound_tail, kesten_envelope, levy_compound_tail,
                       series_condition_check, thm_bounds)
from .classes import (ClassReport, ClassifyConfig, Subject, classify, convolution_root_crosscheck,
                      density_o_tail_probe, insensitivity_probe, ratio_sweep,
                      tail_condition_x0, tail_equivalence_transfer)
from .montecarlo import SampleBatch, empirical_conv_tail, empirical_tail, sample_xi

__all__ = [
    "ParameterError", "ScaleSequence", "build_scale_sequence",
    "Law", "PiecewiseDist", "ExponentialControl", "build_family1", "build_family2",
    "build_from_config", "build_non_ol_example", "build_staircase_ol_example",
    "build_tail_equivalent", "moment_diagnostic",
    "ConvPower", "ConvTable", "NumericConv", "PairConv", "cstar_estimate", "nfold_tail",
    "self_conv_density", "t_functional",
    "CountingDist", "CompoundSpec", "compound_tail", "kesten_envelope", "levy_compound_tail",
    "series_condition_check", "thm_bounds",
    "ClassReport", "ClassifyConfig", "Subject", "classify", "convolution_root_crosscheck",
    "density_o_tail_probe", "insensitivity_probe", "ratio_sweep", "tail_condition_x0",
    "tail_equivalence_transfer",
    "SampleBatch", "empirical_conv_tail", "empirical_tail", "sample_xi",
]
