from exbc.nets.backend import backend_name
from exbc.nets.critics import TwinCritics, polyak_update
from exbc.nets.mlp import Mlp
from exbc.nets.optim import AdamW
from exbc.nets.policy import SquashedGaussianPolicy

__all__ = [
    "AdamW",
    "Mlp",
    "SquashedGaussianPolicy",
    "TwinCritics",
    "backend_name",
    "polyak_update",
]
