"""Bug triage as a resource-allocation problem.

Developers are scored per LDA topic from their fix history, the score
weights are tuned with differential evolution, and incoming bug reports are
assigned chunk by chunk with Gale-Shapley matching.
"""

__version__ = "0.1.0"
