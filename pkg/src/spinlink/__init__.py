"""Simulation and analysis toolkit for a two-node atomic-ensemble entanglement link.

Modules:

- ``qcore``: polarization vectors, two-qubit states, fidelity and concurrence
- ``source``: photon / spin-wave pair source (MOT A)
- ``memory``: Rydberg-EIT storage, retrieval efficiency, loss budget (MOT B)
- ``detection``: analyzers, detectors, click records and coincidence tallies
- ``analysis``: correlation, HBT, fringe, concurrence and CHSH estimators
- ``tomography``: 16-setting tomography with linear inversion and MLE
- ``config``, ``campaigns``, ``pipeline``, ``cli``: the batch harness
"""
from .errors import (ConfigError, DataIntegrityError, FitError, InvalidArgument, ReconstructionError,
                     ReportError, SpinLinkError, UndefinedEstimate)

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataIntegrityError", "FitError", "InvalidArgument", "ReconstructionError",
           "ReportError", "SpinLinkError", "UndefinedEstimate", "__version__"]
