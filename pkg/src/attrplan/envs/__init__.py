from .base import Env
from .blocks import BlocksEnv
from .crafting import CraftingEnv
from .switches import SwitchesEnv

ENVIRONMENTS = {"switches": SwitchesEnv, "crafting": CraftingEnv, "blocks": BlocksEnv}


def make_env(name: str, **params) -> Env:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}") from None
    return cls(**params)


__all__ = ["Env", "BlocksEnv", "CraftingEnv", "SwitchesEnv", "ENVIRONMENTS", "make_env"]
