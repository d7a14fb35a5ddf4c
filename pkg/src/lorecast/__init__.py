"""Layout-aware power and timing forecasts from natural-language designs.

Two-phase toolkit: a regulated prompting loop turns a structured design
description into syntactically valid Verilog through an LLM backend, then
AST-derived features feed gradient-boosted tree ensembles that predict
post-routing power (µW) and |TNS| (ns) without running synthesis.
"""

__version__ = "0.1.0"
