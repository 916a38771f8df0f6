"""Scenario-guided analysis of SCR tabular requirements specifications."""

from .consistency import check_consistency
from .diagnostics import Diagnostic, ParseError, Severity, SourceSpan
from .engine import (DEFAULT_BOUND, ConsistencyError, NoViolationWithinBound, Trace,
                     Violation, analyze, format_trace, replay, simulate)
from .model import (InputEvent, NondeterministicTransition, SpecModel, SystemState,
                    legal_inputs, step, successors)
from .parser import parse_spec, render_spec
from .promela import EmittedModel, emit_promela
from .scenario import Scenario, compile_to_automaton, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_BOUND", "ConsistencyError", "Diagnostic", "EmittedModel", "InputEvent",
    "NoViolationWithinBound", "NondeterministicTransition", "ParseError", "Scenario",
    "Severity", "SourceSpan", "SpecModel", "SystemState", "Trace", "Violation", "analyze",
    "check_consistency", "compile_to_automaton", "emit_promela", "format_trace",
    "legal_inputs", "parse_scenario", "parse_spec", "render_spec", "replay", "simulate",
    "step", "successors",
]
