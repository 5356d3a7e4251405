from functools import wraps

from .errors import UsageError
from .numerics import no_grad


def inference_mode(method):
    """Decorator to run the method without recording a gradient graph."""

    @wraps(method)
    def wrapper(self, *args, **kwargs):
        with no_grad():
            return method(self, *args, **kwargs)

    return wrapper


def eval_only(method):
    """Decorator to ensure the method is only called on a model in eval mode."""

    @wraps(method)
    def wrapper(self, *args, **kwargs):
        if self.model.training:
            raise UsageError(
                f"The method '{method.__name__}' needs the model in eval mode (dropout off)."
            )
        return method(self, *args, **kwargs)

    return wrapper
