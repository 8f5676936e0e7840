"""Loop pipelining with stage slicing for a small imperative IR.

Thin wrapper over the native module: parse/validate programs, inspect
loops and dependence graphs, slice kernels, build pipeline plans and run
them against the built-in workloads.
"""

from _pipeslice import (  # noqa: F401
    bench_csv,
    calibrate,
    find_loops_of,
    parse_roundtrip,
    pdg_json,
    plan_json,
    run,
    slice_names,
    slice_text,
    validate_text,
    workload_source,
    workloads,
)

__all__ = [
    "bench_csv",
    "calibrate",
    "find_loops_of",
    "parse_roundtrip",
    "pdg_json",
    "plan_json",
    "run",
    "slice_names",
    "slice_text",
    "validate_text",
    "workload_source",
    "workloads",
]
