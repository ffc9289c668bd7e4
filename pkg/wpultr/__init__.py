"""
wpultr - Whole-Page Unbiased Learning to Rank

Discovers a user-behavior causal graph from biased click logs, removes
confounding with importance weights, and trains a ranker whose updates flow
only through the relevance-to-click path. Ships a click simulator with a known
generating graph for validation.
"""

__version__ = "0.1.0"
