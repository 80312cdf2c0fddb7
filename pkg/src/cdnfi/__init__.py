"""Fault injection for clock distribution networks.

Builds virtual clock trees over a gate-level netlist, injects clock SETs and
flip-flop SEUs against a golden reference simulation, and derives functional
de-rating figures from the campaign outcomes.
"""

__version__ = "0.1.0"
