"""Probabilistic agent programs: status-set semantics, Kripke structures and p-consistency."""
