"""
Policy Registry — maps policy names to PolicyInterface classes.

This is the single extensibility point for adding new policies.
"""

from __future__ import annotations

from typing import Type

from app.policies.builtin import DirectPolicy, DrlPolicy, GeniePolicy, ThresholdPolicy
from app.policies.interface import PolicyInterface

# ── Default registry ───────────────────────────────────────────────

_REGISTRY: dict[str, Type[PolicyInterface]] = {
    "genie": GeniePolicy,
    "drl": DrlPolicy,
    "threshold": ThresholdPolicy,
    "direct": DirectPolicy,
}


def register_policy(name: str, cls: Type[PolicyInterface]) -> None:
    """Register a new policy (or override an existing one)."""
    _REGISTRY[name] = cls


def get_policy_class(name: str) -> Type[PolicyInterface]:
    """
    Look up the class registered under *name*.

    Raises KeyError if the policy is not registered.
    """
    if name not in _REGISTRY:
        raise KeyError(
            f"Unknown policy {name!r}. Registered policies: {list(_REGISTRY.keys())}"
        )
    return _REGISTRY[name]


def list_policies() -> list[str]:
    """Return all registered policy names."""
    return list(_REGISTRY.keys())


def create_policy(name: str) -> PolicyInterface:
    """Factory: instantiate a policy by name."""
    return get_policy_class(name)()
