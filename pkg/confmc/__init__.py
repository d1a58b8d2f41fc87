"""confmc: chance/mass semantics of MDPs and their reachability checkers."""

__version__ = "0.1.0"
