"""Driving-simulator backbone: vehicle dynamics, scenarios, telemetry, alignment and analysis."""

from ._cabinsim import (
    DT,
    AlignmentError,
    IoError,
    ParseError,
    ValidationError,
    align,
    analyze,
    decode_frame,
    encode_frame,
    force_feedback,
    parse_scenario,
    replay,
    run_headless,
    step_vehicle,
    synth_gaze,
)

__version__ = "0.3.0"

__all__ = [
    "DT",
    "AlignmentError",
    "IoError",
    "ParseError",
    "ValidationError",
    "align",
    "analyze",
    "decode_frame",
    "encode_frame",
    "force_feedback",
    "parse_scenario",
    "replay",
    "run_headless",
    "step_vehicle",
    "synth_gaze",
]
