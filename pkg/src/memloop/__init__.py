"""memloop: lossless conversion between scalar memory equations with
exponential-sum kernels and finite loop Markov chains, with solvers for both
representations and the single-delay limit.
"""

from . import dde, embed, kernels, markov, me_solver, rootfind
from .core import (
    AllSplitRatesZero,
    CoincidentRates,
    DimensionTooLarge,
    DomainError,
    DuplicateGaps,
    EmptyLoop,
    ExpPolyKernel,
    GeneratorMatrix,
    InconsistentMass,
    InfeasibleDecomposition,
    InvalidRate,
    InvariantViolation,
    LoopGenerator,
    LoopKernel,
    NegativeSplitRate,
    NonIncreasingTimes,
    NonPositiveReturnRate,
    NonUniqueStationary,
    ParseError,
    ProbabilityVector,
    RationalFunction,
    RepeatedPoles,
    RootCountShortfall,
    RootFindingFailure,
    StepTooLarge,
    TooManyExponents,
    Trajectory,
    ZeroMass,
    from_json,
    kernel_from_json,
    loop_from_json,
    generator_from_json,
    point_mass,
    time_grid,
    to_json,
    validate_loop,
)

__all__ = [
    "AllSplitRatesZero",
    "CoincidentRates",
    "DimensionTooLarge",
    "DomainError",
    "DuplicateGaps",
    "EmptyLoop",
    "ExpPolyKernel",
    "GeneratorMatrix",
    "InconsistentMass",
    "InfeasibleDecomposition",
    "InvalidRate",
    "InvariantViolation",
    "LoopGenerator",
    "LoopKernel",
    "NegativeSplitRate",
    "NonIncreasingTimes",
    "NonPositiveReturnRate",
    "NonUniqueStationary",
    "ParseError",
    "ProbabilityVector",
    "RationalFunction",
    "RepeatedPoles",
    "RootCountShortfall",
    "RootFindingFailure",
    "StepTooLarge",
    "TooManyExponents",
    "Trajectory",
    "ZeroMass",
    "dde",
    "embed",
    "from_json",
    "generator_from_json",
    "kernel_from_json",
    "kernels",
    "loop_from_json",
    "markov",
    "me_solver",
    "point_mass",
    "rootfind",
    "time_grid",
    "to_json",
    "validate_loop",
]

__version__ = "0.1.0"
