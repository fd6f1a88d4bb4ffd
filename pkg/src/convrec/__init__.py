"""Conversational recommender system workbench.

Dialogs, knowledge-graph side data and item catalogs flow through a unified
corpus into task-specific batches; a model zoo covers recommendation,
conversation and policy; a training system fits and evaluates complete
systems; an HTTP service lets humans chat with and correct a built system.
"""

__version__ = "0.1.0"
