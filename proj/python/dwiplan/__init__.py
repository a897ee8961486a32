"""DWI-guided biopsy planning: phantoms, D-maps, partitioning, needle plans."""

try:
    from dwiplan._dwiplan import *  # noqa: F401,F403
except ImportError:
    from _dwiplan import *  # noqa: F401,F403
