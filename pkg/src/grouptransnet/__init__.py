"""RGB-D salient object detection with grouped transformers, on a small numpy autograd engine."""
from .config import Config, ConfigError, load_config, parse_config
from .model import GroupTransNet, Outputs
from .tensor import NonFiniteError, ShapeError, Tensor, backward, no_grad

__all__ = [
    "Config", "ConfigError", "GroupTransNet", "NonFiniteError", "Outputs", "ShapeError", "Tensor",
    "backward", "load_config", "no_grad", "parse_config",
]
__version__ = "0.1.0"
