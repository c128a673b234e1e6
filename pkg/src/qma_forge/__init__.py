"""Dense simulation and numerical checks for quantum verifiers with several unentangled proofs."""

__version__ = "0.1.0"
