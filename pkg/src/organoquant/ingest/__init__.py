"""Channel-plane ingestion from CZI containers and P5 graymaps."""
from .czi import *  # noqa: F401,F403
from .czi import __all__ as _czi_all
from .pgm import *  # noqa: F401,F403
from .pgm import __all__ as _pgm_all

__all__ = list(_czi_all) + list(_pgm_all)
