from pathlib import Path
from typing import Any
from typing import Type

from humanseek.locker import FileLock

__all__ = [
    "BackendInterface",
    "Backend",
]


class BackendInterface(object):
    """
    This abstract class provides the functions a backend must implement to persist one artifact:

    * exists()
    * load()
    * save()
    * delete()
    * lock()

    A backend guarantees the serialised data type of the artifact. For example, the JSON backend
    stores reward fields and metric summaries, the CSV backend stores per-episode results and the
    SVG backend stores figures. The lock is not abstract: it creates a lock file next to the artifact
    for the scope of a ``with`` statement.

    ```python
    interface = JsonBackend("out").get("metrics")
    with interface.lock():
        interface.save({"SR": 1.0})
    ```
    """

    def __init__(self, path: str, *args, **kwargs):
        """
        Parameters
        ----------
            path: string
                Uniquely identifies the artifact.
        """

        self.path = Path(path)

    def exists(self) -> bool:
        """
        Returns
        -------
            `True` if the artifact at `path` has already been written.
        """

        raise NotImplementedError

    def load(self) -> Any:
        """
        Returns
        -------
            The deserialised artifact.

        Raises
        ------
            FileNotFoundError: if the artifact does not exist.
        """

        raise NotImplementedError

    def save(self, data: Any) -> None:
        """
        Serialise `data` to `path`.
        """

        raise NotImplementedError

    def delete(self) -> None:
        raise NotImplementedError

    def lock(self) -> FileLock:
        """
        Returns
        -------
            FileLock:
                Use with a `with` statement; `FileLockExistsException` is raised if another writer
                holds the artifact.
        """

        self.prepare()

        return FileLock(self.path)

    def prepare(self) -> None:
        """Ensures that the parent directory exists before saving."""

        self.path.parent.mkdir(parents=True, exist_ok=True)


class Backend(object):
    """
    Creates `BackendInterface`s for named artifacts.
    """

    def __init__(self, interface: Type[BackendInterface], cache_data: bool = True):
        """
        Parameters
        ----------
            interface: BackendInterface
                The interface class instantiated per artifact.
            cache_data: bool
                If `True`, the evaluated value is also kept in the owning graph's memory cache.
        """

        self.cache_data = cache_data
        self.interface = interface

    def get(self, name: str, *args, **kwargs) -> BackendInterface:
        return self.interface(name, *args, **kwargs)
