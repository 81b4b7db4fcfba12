from exbc.envs.base import EnvSpec, FrameStack, SuccessPredicate, generate_examples
from exbc.envs.chainworld import ChainWorld, chain_exact_q
from exbc.envs.pointgrab import PointGrab

ENV_REGISTRY = {
    "chain": ChainWorld,
    "pointgrab": PointGrab,
}


def make_env(name: str, **params):
    """Instantiate a registered environment by name."""
    if name not in ENV_REGISTRY:
        raise KeyError(f"unknown env {name!r}; known: {sorted(ENV_REGISTRY)}")
    return ENV_REGISTRY[name](**params)


__all__ = [
    "ChainWorld",
    "ENV_REGISTRY",
    "EnvSpec",
    "FrameStack",
    "PointGrab",
    "SuccessPredicate",
    "chain_exact_q",
    "generate_examples",
    "make_env",
]
