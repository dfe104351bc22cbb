"""Cooperative NOMA resource management for hybrid cloud/edge XR networks.

Scenario generation, the rate/delay/fronthaul model, the convexified
subproblems with their in-repo cone solver, centralized and distributed outer
loops, and the experiment runner behind the ``conoma`` command.
"""

__version__ = "0.1.0"
