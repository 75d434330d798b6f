import matplotlib

matplotlib.use("Agg")

from matplotlib import pyplot as plt  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from humanseek.backends.filesystem_backend import FileSystemBase  # noqa: E402
from humanseek.backends.filesystem_backend import FileSystemInterface  # noqa: E402
from humanseek.backends.validation import validate_dtype  # noqa: E402

__all__ = ["MatPlotLibInterface", "MatPlotLibBackend", "SvgBackend"]

# Fixed salt and no date so that identical figures serialise to identical bytes.
matplotlib.rcParams["svg.hashsalt"] = "humanseek"


class MatPlotLibInterface(FileSystemInterface):
    def load(self):
        return self.path.read_text() if self.path.suffix == ".svg" else True

    def save(self, data):
        fig = data
        validate_dtype(fig, Figure)
        fig.savefig(self.path, metadata={"Date": None})
        plt.close(fig)


class MatPlotLibBackend(FileSystemBase):
    def __init__(self, path, ext):
        super(MatPlotLibBackend, self).__init__(interface=MatPlotLibInterface, ext=ext, path=path)


class SvgBackend(MatPlotLibBackend):
    def __init__(self, path):
        super(SvgBackend, self).__init__(path=path, ext="svg")
