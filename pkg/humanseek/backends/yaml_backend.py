import yaml

from humanseek.backends.filesystem_backend import FileSystemBase
from humanseek.backends.filesystem_backend import FileSystemInterface
from humanseek.backends.validation import validate_dtype

__all__ = [
    "YamlInterface",
    "YamlBackend",
]


class YamlInterface(FileSystemInterface):
    """Run configurations. Objects with a ``to_dict`` method (RunConfig) are written through it."""

    def load(self) -> dict:
        with open(self.path, "r") as fil:
            data = yaml.safe_load(fil) or dict()
        validate_dtype(data, dict)
        return data

    def save(self, data) -> None:
        if hasattr(data, "to_dict"):
            data = data.to_dict()
        validate_dtype(data, dict)
        with open(self.path, "w") as fil:
            yaml.safe_dump(data, fil, sort_keys=True, default_flow_style=False)


class YamlBackend(FileSystemBase):
    def __init__(self, path):
        super(YamlBackend, self).__init__(path=path, ext="yaml", interface=YamlInterface)
