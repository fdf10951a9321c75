"""
Base Gradient Rule
Abstract base class voor alle gradient rules
"""

from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np
import structlog

from app.core.tape import TapeNode

logger = structlog.get_logger()


class BaseGradRule(ABC):
    """
    Base Gradient Rule

    Elke rule implementeert de vector-Jacobian product voor precies één op.
    De registry routeert tape nodes naar de juiste rule op basis van `op`.
    """

    @property
    @abstractmethod
    def op(self) -> str:
        """Het op-id dat deze rule afhandelt"""
        pass

    @property
    def rule_name(self) -> str:
        """Naam van de rule (voor logging)"""
        return self.__class__.__name__

    @abstractmethod
    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        """
        Pull the output gradient back through the op

        Args:
            node: the recorded op application (input values and saved context)
            grad: d(root)/d(node output), same shape as node.value

        Returns:
            One gradient per input, in input order; None for absent inputs
        """
        pass

    def log_node(self, node: TapeNode, message: str, **kwargs):
        """Helper voor structured logging"""
        logger.debug(
            message,
            rule=self.rule_name,
            op=node.op,
            index=node.index,
            shape=list(node.value.shape),
            **kwargs,
        )
