"""fmesim: heralded frequency-multiplexed entangled single-photon source
simulator for a two-species atomic ensemble.

Subpackages by stage: hilbert (truncated Fock kernel), write_dynamics
(rates, pair-creation evolution, Langevin moments), herald (threshold
detection and projection), retrieval (frequency qubit and polariton
transport), protocol (repeat-until-success Monte Carlo), config and cli
(presets, validation, command line).
"""

__version__ = "0.1.0"
