"""
Base Rescaler
Abstract base class voor alle context rescaling strategies
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Tuple

import structlog

from app.core.counters import LINEAR, record_activation
from app.core.tensor import Tensor, WindowSet
from app.models import AttnConfig, AttnWeights, RescaleStrategy

logger = structlog.get_logger()

MapShape = Tuple[int, int, int]


@dataclass(frozen=True)
class KeyValue:
    """
    Key/value windows for one attention layer

    context is the context WindowSet as it was materialized, before any
    post-scaling; its element count is what the strategy costs in memory.
    """

    key: WindowSet
    value: WindowSet
    context: WindowSet

    @property
    def window(self) -> int:
        """Side of a key/value window (RP without rescaling, P otherwise)"""
        return self.key.win_h


class BaseRescaler(ABC):
    """
    Base Rescaler

    Elke strategy implementeert deze interface: van feature map naar key/value
    windows, plus de lineaire maps die daarvoor nodig zijn.
    """

    @property
    @abstractmethod
    def strategy(self) -> RescaleStrategy:
        """De strategy die deze rescaler implementeert"""
        pass

    @property
    def rescaler_name(self) -> str:
        """Naam van de rescaler (voor logging)"""
        return self.__class__.__name__

    @property
    @abstractmethod
    def key_map(self) -> str:
        """Name of the map whose bias ends up in every key (collapse analysis)"""
        pass

    @abstractmethod
    def map_shapes(self, cfg: AttnConfig) -> Dict[str, MapShape]:
        """
        Strategy-specific maps as name -> (Cout, Cin, kernel)

        query and out are shared by every strategy and not listed here.
        """
        pass

    @abstractmethod
    def keys_values(self, x: Tensor, w: AttnWeights, cfg: AttnConfig) -> KeyValue:
        """
        Build the key and value windows

        Args:
            x: C×H×W input feature (unpadded)
            w: weights holding at least map_shapes(cfg)
            cfg: attention config (window, ratio, pad mode)
        """
        pass

    def record_context(self, context: WindowSet):
        """Count the materialized context in the linear-activation tally"""
        record_activation(LINEAR, context.windows)
        logger.debug(
            "context_materialized",
            rescaler=self.rescaler_name,
            windows=context.count,
            window=context.win_h,
            elements=context.element_count,
        )
