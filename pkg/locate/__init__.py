"""Weakly supervised affordance grounding pipeline."""
