import numpy as np
import pandas as pd
import pytest
from matplotlib import pyplot as plt

from humanseek.backends import CsvBackend
from humanseek.backends import JsonBackend
from humanseek.backends import JsonLinesBackend
from humanseek.backends import NumpyBackend
from humanseek.backends import SvgBackend
from humanseek.backends import YamlBackend
from humanseek.backends import artifact_stem
from humanseek.compgraph import ComputationGraph
from humanseek.compgraph import config_digest
from humanseek.config import RunConfig
from humanseek.core import StateGrid
from humanseek.locker import FileLock
from humanseek.locker import FileLockExistsException
from humanseek.reward import RewardField


class Counter(object):
    def __init__(self, value):
        self.value = value
        self.calls = 0

    def __call__(self):
        self.calls += 1
        return self.value


def test_nodes_evaluate_once_per_graph():
    graph = ComputationGraph(name="Counting")
    source = Counter([1, 2, 3])
    node = graph.make_node(func=source, name="source")
    total = graph.make_node(func=sum, args=node, name="total")
    assert graph.name == "counting"
    assert graph.evaluate() == dict(source=[1, 2, 3], total=6)
    assert total.evaluate() == 6
    assert source.calls == 1


def test_file_backend_skips_recomputation(tmp_path):
    source = Counter(dict(SR=0.5))
    first = ComputationGraph().make_node(func=source, backend=JsonBackend(tmp_path), name="metrics")
    assert first.evaluate() == dict(SR=0.5)
    assert (tmp_path / "metrics.json").read_text() == '{"SR": 0.5}\n'

    second = ComputationGraph().make_node(func=source, backend=JsonBackend(tmp_path), name="metrics")
    assert second.exists
    assert second.evaluate() == dict(SR=0.5)
    assert source.calls == 1
    assert second.evaluate(force=True) == dict(SR=0.5)
    assert source.calls == 2


def test_make_node_validation():
    graph = ComputationGraph()
    graph.make_node(func=len, args=([1],), name="n")
    with pytest.raises(KeyError):
        graph.make_node(func=len, args=([1],), name="n")
    graph.make_node(func=len, args=([1],), name="n", key="n2")
    with pytest.raises(TypeError):
        graph.make_node(func=3, name="x")
    with pytest.raises(ValueError):
        graph.make_node(func=len, kwargs=[1], name="y")
    with pytest.raises(ValueError):
        graph.make_node(func=len, backend="out", name="z")


def test_uncollected_and_chained_nodes():
    graph = ComputationGraph()
    seen = []
    hidden = graph.make_node(func=lambda: seen.append("hidden") or 1, name="hidden", collect=False)
    after = graph.make_node(func=lambda: seen.append("after") or 2, name="after", collect=False)
    hidden.append_evaluation(after)
    assert graph.nodes == {}
    hidden.evaluate()
    assert seen == ["hidden", "after"]
    with pytest.raises(TypeError):
        hidden.append_evaluation("node")


def test_config_digest_is_order_free():
    assert config_digest(dict(a=1, b=[1, 2])) == config_digest(dict(b=[1, 2], a=1))
    assert config_digest(dict(a=1)) != config_digest(dict(a=2))
    assert len(config_digest(dict(a=np.float64(0.5)))) == 12


def test_artifact_stem():
    assert artifact_stem("lab world/3") == "lab_world_3"
    assert artifact_stem("reward_lfd_g1") == "reward_lfd_g1"
    with pytest.raises(ValueError):
        artifact_stem("///")


def test_csv_backend_float_format(tmp_path):
    interface = CsvBackend(tmp_path).get("results")
    interface.save(pd.DataFrame(dict(x=[1.0 / 3.0], ok=[True])))
    assert interface.path.read_text() == "x,ok\n0.333333,True\n"
    assert interface.load()["x"].tolist() == [0.333333]
    with pytest.raises(TypeError):
        interface.save([1, 2])


def test_json_lines_backend(tmp_path):
    interface = JsonLinesBackend(tmp_path).get("log")
    interface.save([dict(kind="MoveTo", t=0.0), dict(kind="DeclareSuccess", t=np.float64(1.5))])
    assert interface.path.read_text().splitlines() == ['{"kind": "MoveTo", "t": 0.0}', '{"kind": "DeclareSuccess", "t": 1.5}']
    assert interface.load()[1]["t"] == 1.5


def test_numpy_backend(tmp_path):
    grid = StateGrid(x_bins=(0.0, 1.0), y_bins=(0.0,), theta_bins=(0.0,), g_bins=(0, 1), v_bins=(0.4,))
    interface = NumpyBackend(tmp_path).get("reward")
    interface.save(RewardField(values=np.ones(grid.shape), grid=grid))
    assert interface.load().shape == grid.shape
    with pytest.raises(ValueError):
        interface.save(np.array([np.nan]))
    with pytest.raises(TypeError):
        interface.save([1.0])


def test_yaml_backend_writes_run_config(tmp_path):
    interface = YamlBackend(tmp_path).get("config")
    interface.save(RunConfig(seed=9))
    assert interface.load()["seed"] == 9
    assert RunConfig.from_dict(interface.load()) == RunConfig(seed=9)


def test_svg_backend_is_byte_stable(tmp_path):
    def figure():
        fig, ax = plt.subplots()
        ax.plot([0, 1, 2], [0, 1, 0])
        return fig

    backend = SvgBackend(tmp_path)
    backend.get("a").save(figure())
    backend.get("b").save(figure())
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    with pytest.raises(TypeError):
        backend.get("c").save("figure")


def test_file_lock(tmp_path):
    target = tmp_path / "results.csv"
    with FileLock(target) as lock:
        assert lock.locked()
        assert not FileLock(target).available()
        with pytest.raises(FileLockExistsException):
            FileLock(target).acquire()
    assert FileLock(target).available()
