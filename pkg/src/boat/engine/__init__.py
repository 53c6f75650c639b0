"""Execution engine: compile, plan, run and render."""
from boat.engine.compiler import EvaluationError, OutOfRange, compile_program
from boat.engine.evaluate import evaluate, infer_type
from boat.engine.executor import (EvaluationContext, ExecutionPlan, PlanError, cpu_count, plan,
                                  run)
from boat.engine.render import FORMATS, format_value, read_json, render_output

__all__ = [
    "EvaluationContext", "EvaluationError", "ExecutionPlan", "FORMATS", "OutOfRange", "PlanError",
    "compile_program", "cpu_count", "evaluate", "format_value", "infer_type", "plan",
    "read_json", "render_output", "run",
]
