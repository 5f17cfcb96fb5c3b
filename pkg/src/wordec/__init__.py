"""Word-level datapath equivalence checking via e-graph rewriting."""

__version__ = "0.1.0"
