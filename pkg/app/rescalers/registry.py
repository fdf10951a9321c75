"""
Rescaler Registry
Lookup van de rescaler per RescaleStrategy
"""

from typing import Dict, List, Optional

import structlog

from app.errors import UnsupportedError
from app.models import RescaleStrategy
from app.rescalers.base import BaseRescaler
from app.rescalers.strategies import NoRescale, PostAvgPool, PostPe, PreDopePe

logger = structlog.get_logger()


class RescalerRegistry:
    """
    Rescaler Registry

    Eén rescaler per strategy; attention vraagt hier de key/value pipeline op.
    """

    def __init__(self):
        self._rescalers: Dict[RescaleStrategy, BaseRescaler] = {}
        self._initialize_rescalers()

    def _initialize_rescalers(self):
        """Register all strategies"""
        self.register(NoRescale())
        self.register(PostPe())
        self.register(PostAvgPool())
        self.register(PreDopePe())

    def register(self, rescaler: BaseRescaler):
        self._rescalers[rescaler.strategy] = rescaler
        logger.debug(
            "rescaler_registered", strategy=rescaler.strategy.value, rescaler=rescaler.rescaler_name
        )

    def find(self, strategy: RescaleStrategy) -> Optional[BaseRescaler]:
        return self._rescalers.get(strategy)

    def get(self, strategy: RescaleStrategy) -> BaseRescaler:
        """
        Get de rescaler voor een strategy

        Raises:
            UnsupportedError: geen rescaler geregistreerd
        """
        rescaler = self.find(strategy)
        if rescaler is None:
            raise UnsupportedError(f"no rescaler registered for strategy '{strategy}'")
        return rescaler

    @property
    def registered_strategies(self) -> List[RescaleStrategy]:
        return list(self._rescalers.keys())


# Global registry instance
rescaler_registry = RescalerRegistry()
