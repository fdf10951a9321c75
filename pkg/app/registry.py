"""
Gradient Rule Registry
Centralized registration en lookup van gradient rules
"""

from typing import Dict, List, Optional

import structlog

from app.gradients import (
    AddRule,
    AvgPool2dRule,
    BilinearUpsampleRule,
    ConcatRule,
    Conv2dRule,
    MatmulRule,
    MulRule,
    PermuteRule,
    ReshapeRule,
    ScaleRule,
    SliceRule,
    SoftmaxRule,
    SumRule,
    UnfoldRule,
)
from app.gradients.base import BaseGradRule

logger = structlog.get_logger()


class GradRuleRegistry:
    """
    Gradient Rule Registry

    Beheert alle gradient rules en routeert tape nodes naar de juiste rule.

    Key Design: precies één rule per op. Een op zonder rule kan wel vooruit
    gerekend worden, maar backward() weigert de graph (UnsupportedError).
    """

    def __init__(self, populate: bool = True):
        self._rules: Dict[str, BaseGradRule] = {}
        if populate:
            self._initialize_rules()

    def _initialize_rules(self):
        """
        Register all rules

        HIER VOEG JE NIEUWE RULES TOE!
        Elke nieuwe op in app.core.ops heeft hier een rule nodig.
        """

        # Layout
        self.register(ReshapeRule())
        self.register(PermuteRule())
        self.register(ConcatRule())
        self.register(SliceRule())

        # Elementwise
        self.register(AddRule())
        self.register(MulRule())
        self.register(ScaleRule())
        self.register(SumRule())
        self.register(SoftmaxRule())

        # Linear
        self.register(MatmulRule())
        self.register(Conv2dRule())

        # Spatial
        self.register(UnfoldRule())
        self.register(AvgPool2dRule())
        self.register(BilinearUpsampleRule())

        logger.debug("rules_registered", ops=self.registered_ops, count=len(self._rules))

    def register(self, rule: BaseGradRule):
        """
        Register een rule voor zijn op

        Args:
            rule: Een instantie van BaseGradRule; vervangt een eerdere rule voor dezelfde op
        """
        if rule.op in self._rules:
            logger.warning(
                "rule_replaced", op=rule.op, old=self._rules[rule.op].rule_name, new=rule.rule_name
            )
        self._rules[rule.op] = rule
        logger.debug("rule_registered", op=rule.op, rule=rule.rule_name)

    def get_rule(self, op: str) -> Optional[BaseGradRule]:
        """
        Get de rule voor een op

        Args:
            op: Het op-id (bijv. "conv2d")

        Returns:
            De rule, of None als er geen is
        """
        return self._rules.get(op)

    def has_rule(self, op: str) -> bool:
        """Check of er een rule is voor een op"""
        return op in self._rules

    @property
    def registered_ops(self) -> List[str]:
        """Get alle geregistreerde op-ids"""
        return list(self._rules.keys())


# Global registry instance
grad_registry = GradRuleRegistry()
