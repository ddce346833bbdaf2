from .gof import (GofReport, chi_square_gof, counts_from_samples, ks_pvalue, ks_statistic,
                  normal_cdf)
from .oracle import (CapExceeded, Pmf, block_lengths, convolve, exact_block_pmf,
                     exact_block_pmf_by_environment, exact_walk_pmf, srw_pmf)
from .suites import (FddReport, FlatnessSummary, strictly_decreasing, verify_fdd,
                     verify_flatness, verify_marginal)

__all__ = [
    "CapExceeded", "FddReport", "FlatnessSummary", "GofReport", "Pmf", "block_lengths",
    "chi_square_gof", "convolve", "counts_from_samples", "exact_block_pmf",
    "exact_block_pmf_by_environment", "exact_walk_pmf", "ks_pvalue", "ks_statistic",
    "normal_cdf", "srw_pmf", "strictly_decreasing", "verify_fdd", "verify_flatness",
    "verify_marginal",
]
