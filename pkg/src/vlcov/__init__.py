"""A package for computing the SINR and rate coverage of indoor visible light attocell networks"""
from .analytic import CoverageCurve, Scenario, sinr_coverage, sinr_coverage_typical, rate_coverage
from .channel import NetworkParams, derive_constants
from .simulator import Mode, TYPICAL, estimate_coverage

__all__ = ["CoverageCurve", "Scenario", "sinr_coverage", "sinr_coverage_typical", "rate_coverage", "NetworkParams",
           "derive_constants", "Mode", "TYPICAL", "estimate_coverage"]
