from humanseek.backends.base import Backend
from humanseek.backends.base import BackendInterface

__all__ = ["VolatileBackend", "VolatileInterface"]


class VolatileInterface(BackendInterface):
    """Nothing is persisted; the node is recomputed once per graph and kept in memory."""

    def __init__(self, name):
        super(VolatileInterface, self).__init__(path=f"volatile/{name}")

    def exists(self):
        return False

    def load(self):
        raise NotImplementedError

    def save(self, data):
        pass

    def delete(self):
        pass

    def lock(self):
        return _NullLock()


class _NullLock(object):
    def __enter__(self):
        return self

    def __exit__(self, type, value, traceback):
        return False


class VolatileBackend(Backend):
    def __init__(self):
        super(VolatileBackend, self).__init__(interface=VolatileInterface, cache_data=True)
