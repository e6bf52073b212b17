"""Monotonicity testers for distributions on [n] under several oracle models."""

from .distcore import (
    Histogram,
    IntervalPartition,
    ObliviousPartition,
    Pmf,
    WitnessReport,
    distance_to_expprop_exact,
    distance_to_monotone_exact,
    distance_to_monotone_flat,
    expand,
    fixup,
    flatten,
    mirror,
    oblivious_partition,
    project_monotone,
    reduce,
    satisfies_expprop,
    tau_witnesses,
    tv_distance,
)

from .instances import InstanceSpec
from .oracles import Kind, OracleSession, QueryLog
from .testers import TESTERS, ToleranceParams, Verdict

__version__ = "0.1.0"

__all__ = [
    "Histogram", "IntervalPartition", "ObliviousPartition", "Pmf", "WitnessReport",
    "distance_to_expprop_exact", "distance_to_monotone_exact", "distance_to_monotone_flat",
    "expand", "fixup", "flatten", "mirror", "oblivious_partition", "project_monotone", "reduce",
    "satisfies_expprop", "tau_witnesses", "tv_distance", "InstanceSpec", "Kind", "OracleSession",
    "QueryLog", "TESTERS", "ToleranceParams", "Verdict",
]
