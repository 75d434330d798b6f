import json

import numpy as np

from humanseek.backends.filesystem_backend import FileSystemBase
from humanseek.backends.filesystem_backend import FileSystemInterface

__all__ = [
    "NpEncoder",
    "JsonInterface",
    "JsonBackend",
    "JsonLinesInterface",
    "JsonLinesBackend",
    "dumps",
]


# Solve errors in serialising numpy types to JSON, via:
# https://stackoverflow.com/questions/50916422/python-typeerror-object-of-type-int64-is-not-json-serializable
class NpEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        else:
            return super(NpEncoder, self).default(obj)


def dumps(data, indent=None) -> str:
    """Deterministic JSON text: sorted keys, numpy-aware."""
    return json.dumps(data, sort_keys=True, indent=indent, cls=NpEncoder)


class JsonInterface(FileSystemInterface):
    def __init__(self, name, indent=None):
        super(JsonInterface, self).__init__(path=name)
        self.indent = indent

    def load(self):
        with open(self.path, "r") as fil:
            return json.load(fil)

    def save(self, data):
        with open(self.path, "w") as fil:
            fil.write(dumps(data, indent=self.indent))
            fil.write("\n")


class JsonBackend(FileSystemBase):
    def __init__(self, path, indent=None):
        super(JsonBackend, self).__init__(path=path, ext="json", interface=JsonInterface)
        self.indent = indent

    def get(self, name, *args, **kwargs):
        return super(JsonBackend, self).get(name, indent=self.indent)


class JsonLinesInterface(FileSystemInterface):
    """One JSON record per line; episode event logs and trajectories."""

    def load(self):
        with open(self.path, "r") as fil:
            return [json.loads(line) for line in fil if line.strip()]

    def save(self, data):
        with open(self.path, "w") as fil:
            for record in data:
                fil.write(dumps(record))
                fil.write("\n")


class JsonLinesBackend(FileSystemBase):
    def __init__(self, path):
        super(JsonLinesBackend, self).__init__(path=path, ext="jsonl", interface=JsonLinesInterface)
