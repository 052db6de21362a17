"""Logic-of-Constraints formulas: parsing, checking and distribution analysis."""

from .analyzer import (
    NOT_EVALUABLE,
    UNDEFINED,
    AssertionChecker,
    Bin,
    DistributionAnalyzer,
    DistributionResult,
    LocEvalError,
    ViolationReport,
    analyze_distribution,
    analyze_many,
    check,
    evaluate_instance,
    percentile_cut,
)
from .formula import (
    AnalysisPeriod,
    BinOp,
    FormulaError,
    LocFormula,
    Neg,
    Num,
    Term,
    bin_count,
    max_offset,
    parse_formula,
    to_text,
)

__all__ = [
    "NOT_EVALUABLE", "UNDEFINED", "AssertionChecker", "Bin", "DistributionAnalyzer",
    "DistributionResult", "LocEvalError", "ViolationReport", "analyze_distribution",
    "analyze_many", "check", "evaluate_instance", "percentile_cut", "AnalysisPeriod",
    "BinOp", "FormulaError", "LocFormula", "Neg", "Num", "Term", "bin_count",
    "max_offset", "parse_formula", "to_text",
]
