"""Cheat-sensitive quantum bit commitment: simulator and security analysis.

Subpackages
-----------
qsim
    Dense statevector/density-matrix kernel over labelled qubit registers.
protocol
    The non-relativistic commitment protocol state machine.
strategies
    Honest parties and the attack families the security argument covers.
analysis
    Exact branch enumeration, Monte Carlo estimation, information gain,
    the measurement-factorisation checker and the no-information checker.
relativistic
    Discrete-event simulation of the timing-based protocol variant.
cli
    Config-driven experiment runner (``csbc`` console script).
"""

__version__ = "0.1.0"

from . import analysis, protocol, qsim, relativistic, strategies  # noqa: E402
from .protocol import CommitSymbol, Transcript, run_protocol  # noqa: E402
from .strategies import (  # noqa: E402
    AncillaAttack,
    EntangledCommitment,
    StrategySpec,
    honest_committer,
    honest_receiver,
)

__all__ = [
    "analysis",
    "protocol",
    "qsim",
    "relativistic",
    "strategies",
    "CommitSymbol",
    "Transcript",
    "run_protocol",
    "AncillaAttack",
    "EntangledCommitment",
    "StrategySpec",
    "honest_committer",
    "honest_receiver",
    "__version__",
]
