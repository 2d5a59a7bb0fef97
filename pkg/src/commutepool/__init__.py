"""commutepool: fleet routing for shared autonomous commuting.

The package covers the whole pipeline: synthetic scenario generation,
time-window derivation, mini-route pricing by label setting, column
generation over two master formulations (edge-based assembly and set
covering), exact-rational and HiGHS solver backends, plan metrics, and a
cost-of-ownership model, all behind one CLI.
"""

__version__ = "0.1.0"

from .model import Commuter, Instance  # noqa: F401
