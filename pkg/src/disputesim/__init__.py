"""Deterministic simulator and analysis toolkit for fraud-proof disputes.

The package splits into three layers:

* machinery: ``vm`` (the disputed state machine), ``commitment``
  (Merkle claims), ``clock`` (virtual time, chess clocks, censorship
  budget), ``match_engine`` (one pairwise match), ``tournament``
  (matchmaking, rounds, demotions, full disputes);
* adversary models: ``adversary`` (round-level strategy search and
  simulation policies);
* analysis: ``analysis`` (worst-case delays, schedule tables,
  economics) and ``bounds`` (numerical verification of the round-bound
  machinery).

``cli`` wires everything to config files and CSV/JSON outputs.
"""

from . import adversary, analysis, bounds, clock, commitment, match_engine, tournament, vm

__all__ = [
    "adversary",
    "analysis",
    "bounds",
    "clock",
    "commitment",
    "match_engine",
    "tournament",
    "vm",
]

__version__ = "0.1.0"
