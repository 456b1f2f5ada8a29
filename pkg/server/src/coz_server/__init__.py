"""Reference server speaking the three zoom-chain endpoints.

Stub mode answers deterministically with zero model dependencies; real mode
loads configured models behind the same wire schemas.
"""

from .app import ModelServer, ServerStartupError
from .config import ROLES, ServerConfig

__all__ = ["ModelServer", "ServerConfig", "ServerStartupError", "ROLES"]
