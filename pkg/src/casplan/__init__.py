"""Competence-aware planning over levels of autonomy.

Stochastic shortest-path planning extended with a chain of autonomy
levels, online learning of the human feedback profile, and gated
exploration that grows the allowed-autonomy profile toward the agent's
level of competence.
"""

__version__ = "0.1.0"
