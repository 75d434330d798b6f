from pandas import DataFrame
from pandas import read_csv

from humanseek.backends.filesystem_backend import FileSystemBase
from humanseek.backends.filesystem_backend import FileSystemInterface
from humanseek.backends.validation import validate_dtype

__all__ = ["CsvBackend", "CsvInterface"]


class CsvInterface(FileSystemInterface):
    def __init__(self, path, float_format="%.6f"):
        super(CsvInterface, self).__init__(path=path)
        self.float_format = float_format

    def load(self):
        data = read_csv(self.path)
        validate_dtype(data, DataFrame)
        return data

    def save(self, data):
        validate_dtype(data, DataFrame)
        data.to_csv(self.path, index=False, float_format=self.float_format, lineterminator="\n")


class CsvBackend(FileSystemBase):
    def __init__(self, path, float_format="%.6f"):
        super(CsvBackend, self).__init__(interface=CsvInterface, ext="csv", path=path)
        self.float_format = float_format

    def get(self, name, *args, **kwargs):
        return super(CsvBackend, self).get(name, float_format=self.float_format)
