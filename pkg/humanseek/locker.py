# Artifact lock after the lazyflow file lock; an existing lock raises immediately instead of waiting.
import fcntl
from pathlib import Path
from typing import Optional
from typing import TextIO

__all__ = [
    "FileLockExistsException",
    "FileLock",
]


class FileLockExistsException(Exception):
    pass


class FileLock(object):
    """
    A non-blocking lock on an artifact path, usable in a ``with`` statement. The lock file sits next to
    the artifact (``results.csv`` -> ``results.lock``) and is removed on release.
    """

    def __init__(self, protected_file_path):
        self.is_locked = False
        self.lock_filename = Path(protected_file_path).with_suffix(".lock")
        self.lock_file: Optional[TextIO] = None

    def locked(self) -> bool:
        """True iff this instance owns the lock."""
        return self.is_locked

    def available(self) -> bool:
        return not self.lock_filename.exists()

    def acquire(self) -> bool:
        try:
            self.lock_file = open(self.lock_filename, "w")
            fcntl.flock(self.lock_file, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except FileNotFoundError:
            raise
        except IOError:
            raise FileLockExistsException(f"The artifact {self.lock_filename.with_suffix('')} is being written.")
        self.is_locked = True
        return True

    def release(self) -> None:
        self.is_locked = False
        if self.lock_file is not None:
            fcntl.flock(self.lock_file, fcntl.LOCK_UN)
            self.lock_file.close()
            self.lock_file = None
        try:
            self.lock_filename.unlink()
        except FileNotFoundError:
            pass

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, type, value, traceback):
        self.release()

    def __del__(self):
        if self.is_locked:
            self.release()
