"""Reward-function client for the product-mapping scoring service."""

__version__ = "0.1.0"

from .client import (BridgeConfig, BridgeError, CapacityError, RewardBridge,
                     ServiceError, TransportError, reward_fn)

__all__ = ["BridgeConfig", "BridgeError", "CapacityError", "RewardBridge",
           "ServiceError", "TransportError", "reward_fn"]
