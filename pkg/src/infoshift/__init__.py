"""Exact and sample-based information metrics for conditional models under
distribution shift.

Layers, bottom up:

- ``numkit``: seeded RNG streams, Jacobi eigensolver, tiny MLP, AdamW.
- ``discrete``: exact distributions, entropies, divergences, tuning.
- ``metrics``: preference metrics and the shift/capacity bound family.
- ``estimators``: sample-based mutual-information and divergence estimators.
- ``synthgen``: synthetic worlds with controllable shift structure.
- ``analysis``: correlation statistics and sweep tables.
- ``cli`` / ``pipelines``: reproducible end-to-end runs.
"""

__version__ = "0.1.0"
