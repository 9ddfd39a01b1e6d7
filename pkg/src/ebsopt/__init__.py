"""Query-steerable e-bike sharing rebalancing optimization.

A forest-embedded mixed-integer pipeline: deterministic rebalancing and
battery-swap model, random-forest cost predictor compiled into MIP form,
scope-down parameterization driven by a pluggable language-model boundary,
a bundled branch-and-bound solver, evaluation metrics, and an HTTP service
for the operator console.
"""

__version__ = "0.1.0"
