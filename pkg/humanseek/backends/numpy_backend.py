import numpy as np

from humanseek.backends.filesystem_backend import FileSystemBase
from humanseek.backends.filesystem_backend import FileSystemInterface
from humanseek.backends.validation import validate_dtype

__all__ = ["NumpyInterface", "NumpyBackend"]


class NumpyInterface(FileSystemInterface):
    """
    Dense reward values as ``.npy``. Accepts an array or anything carrying a ``values`` array (a
    RewardField); stored as C-ordered float64 without pickling.
    """

    def load(self) -> np.ndarray:
        data = np.load(file=self.path, allow_pickle=False)
        validate_dtype(data, np.ndarray)
        return data

    def save(self, data) -> None:
        values = getattr(data, "values", data)
        validate_dtype(values, np.ndarray)
        if not np.isfinite(values).all():
            raise ValueError(f"Refusing to write non-finite values to {self.path}")
        np.save(file=self.path, arr=np.ascontiguousarray(values, dtype=np.float64), allow_pickle=False)


class NumpyBackend(FileSystemBase):
    def __init__(self, path):
        super(NumpyBackend, self).__init__(interface=NumpyInterface, ext="npy", path=path)
