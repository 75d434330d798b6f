import re
from pathlib import Path

from humanseek.backends.base import Backend
from humanseek.backends.base import BackendInterface

__all__ = [
    "FileSystemInterface",
    "FileSystemBase",
    "artifact_stem",
]

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def artifact_stem(name) -> str:
    """File-name safe version of an artifact name ("lab world/3" -> "lab_world_3")."""
    stem = _UNSAFE.sub("_", str(name)).strip("_")
    if not stem:
        raise ValueError(f"Artifact name {name!r} has no usable characters")
    return stem


class FileSystemInterface(BackendInterface):
    """One artifact file; its directory is created on construction."""

    def __init__(self, path):
        super(FileSystemInterface, self).__init__(path=path)
        self.prepare()

    def exists(self) -> bool:
        return self.path.is_file()

    def delete(self) -> None:
        self.path.unlink(missing_ok=True)


class FileSystemBase(Backend):
    """Artifacts named `<stem>.<ext>` below one output directory."""

    def __init__(self, interface, path, ext):
        super(FileSystemBase, self).__init__(interface=interface)

        self.ext = ext
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)

    def artifact_path(self, name) -> Path:
        return self.path / f"{artifact_stem(name)}.{self.ext}"

    def get(self, name, *args, **kwargs):
        return self.interface(self.artifact_path(name), *args, **kwargs)
