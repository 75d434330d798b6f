import hashlib
import json
from functools import partial
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union
from uuid import uuid4

from loguru import logger

from humanseek.backends import Backend
from humanseek.backends import BackendInterface
from humanseek.backends import NpEncoder
from humanseek.backends import VolatileBackend
from humanseek.backends import VolatileInterface

__all__ = [
    "ComputationGraph",
    "NodeWrapper",
    "config_digest",
]


class ComputationGraph(object):
    """
    A lightweight container for lazily evaluated experiment steps. Each CLI command builds one graph:
    loading a map or demonstrations, fitting a reward field, planning, and exporting artifacts are
    nodes, and the expensive ones are attached to a file backend so a rerun with the same
    configuration deserialises them instead of recomputing.

    >>> def load_demos():
    ...     return [[0.0, 1.0], [0.5, 1.0]]
    ...
    >>> from humanseek import ComputationGraph
    >>> graph = ComputationGraph(name="toy")
    >>> demos = graph.make_node(func=load_demos, name="demos")
    >>> demos.evaluate()
    [[0.0, 1.0], [0.5, 1.0]]

    Nodes consume other nodes through `kwargs`:

    >>> def count(demos):
    ...     return len(demos)
    ...
    >>> n_demos = graph.make_node(func=count, name="n_demos", kwargs=dict(demos=demos))
    >>> n_demos.evaluate()
    2
    """

    def __init__(self, name: Optional[str] = None):
        """
        Parameters
        ----------
        name: Optional[str] (default=None)
            Name of the collection of nodes. If None, a random uuid4 string is used.
        """

        if name is None:
            name = str(uuid4())

        self.name: str = name.lower()
        self.nodes: Dict[Any, NodeWrapper] = dict()
        # Per-graph memory cache; two graphs never share evaluated values.
        self.cache: Dict[Any, Any] = dict()

    def __repr__(self) -> str:
        name = self.name
        nodes = sorted(map(str, self.nodes.keys()))

        return f"{self.__class__.__name__}({name=}, {nodes=})"

    def evaluate(self, force: bool = False) -> Dict[Any, Any]:
        """
        Evaluate every node of the graph.

        Parameters
        ----------
        force: bool (default=False)
            Recompute nodes even when their artifact already exists.

        Returns
        -------
        Dict mapping node keys to evaluated values.
        """

        evaluations = dict()
        for key, node in self.nodes.items():
            evaluations[key] = node.evaluate(force=force)
        return evaluations

    def make_node(
        self,
        func: Callable,
        args: Optional[Union[Any, List[Any], Tuple[Any]]] = None,
        kwargs: Optional[Dict[str, Any]] = None,
        backend: Optional[Backend] = None,
        name: Optional[Any] = None,
        key: Optional[Any] = None,
        cache: bool = True,
        collect: bool = True,
    ) -> "NodeWrapper":
        """
        Wrap `func` as a lazily evaluated node.

        Parameters
        ----------
        func: Callable
            The function that is to be wrapped.
        args: Optional[Union[List[Any], Tuple[Any]]] (default=None)
            The args to be passed into `func`.
        kwargs: Optional[Dict[str, Any]] (default=None)
            The kwargs to be passed into `func`; `NodeWrapper` values are evaluated first.
        backend: Optional[Backend] (default=None)
            Backend used to persist the value; a volatile backend is used when None.
        name: Optional[str] (default=None)
            Artifact name of the node (file stem for file backends).
        key: Optional[str] (default=None)
            Key under which the node is stored in `self.nodes`; defaults to `name`.
        cache: bool (default=True)
            Whether to use `backend` at all.
        collect: bool (default=True)
            Whether to add the node to `self.nodes`.

        Returns
        -------
        node: NodeWrapper
        """

        if not callable(func):
            raise TypeError(f"Expected a callable, got {type(func)}.")

        if name is None:
            name = str(uuid4())
        if key is None:
            key = name
        if collect and key in self.nodes:
            raise KeyError(f"A node with key '{key}' already exists in {list(self.nodes.keys())}.")

        if backend is not None and not isinstance(backend, Backend):
            raise ValueError(f"The backend is expected to be of type Backend, but got {type(backend)}.")
        if not cache:
            backend = None

        if kwargs is not None and not isinstance(kwargs, dict):
            raise ValueError(f"The kwargs are expected to be a dict, but got {type(kwargs)}.")

        if args is not None and not isinstance(args, tuple):
            if isinstance(args, list):
                args = tuple(args)
            else:
                args = (args,)

        node = NodeWrapper(graph=self, name=name, func=func, backend=backend, args=args, kwargs=kwargs)

        if collect:
            self.nodes[key] = node

        return node


def get_function_name(func: Callable) -> str:
    """Best-effort readable name of a callable."""

    if isinstance(func, partial):
        func = func.func

    return getattr(func, "__name__", type(func).__name__)


def config_digest(obj: Any, length: int = 12) -> str:
    """Stable short digest of a JSON-serialisable configuration, used to key cache directories."""

    text = json.dumps(obj, sort_keys=True, cls=NpEncoder, default=str)
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:length]


class NodeWrapper(object):
    def __init__(
        self,
        graph: ComputationGraph,
        name: Any,
        func: Callable,
        backend: Optional[Backend],
        args: Optional[Tuple[Any]] = None,
        kwargs: Optional[Dict[str, Any]] = None,
    ):
        """
        Lazy evaluation/serialisation wrapper around `func`.

        Parameters
        ----------
        graph: ComputationGraph
            The parent graph; its cache holds the evaluated value.
        name: str
            The artifact name of the node.
        func: Callable
            The function whose output is cached via the backend.
        backend: Backend
            Serialisation backend; volatile when None.
        args, kwargs:
            Arguments of `func`.
        """

        self.graph: ComputationGraph = graph

        self.name: str = name

        self.func: Callable = func
        self.args: Tuple[Any, ...] = tuple() if args is None else args
        self.kwargs: Dict[str, Any] = dict() if kwargs is None else kwargs

        self.chained_nodes: List[NodeWrapper] = []

        if backend is None:
            backend = VolatileBackend()

        self.backend_interface: BackendInterface = backend.get(name)

    def __repr__(self) -> str:
        func = get_function_name(self.func)
        n_args = len(self.args)
        kwargs = "{" + ", ".join(f"'{kk}': ..." for kk in self.kwargs.keys()) + "}"

        return f"{self.__class__.__name__}({func=}, {n_args=}, kwargs={kwargs})"

    def append_evaluation(self, node: "NodeWrapper") -> None:
        """Cascade `node` to be evaluated after `self`."""

        if not isinstance(node, NodeWrapper):
            raise TypeError(f"Expected NodeWrapper, but got {type(node)}: {node}.")

        self.chained_nodes.append(node)

    @property
    def exists(self) -> bool:
        return self.backend_interface.exists()

    @property
    def sources(self) -> Dict[str, "NodeWrapper"]:
        return {kk: vv for kk, vv in self.kwargs.items() if isinstance(vv, NodeWrapper)}

    @property
    def keywords(self) -> Dict[str, Any]:
        return {kk: vv for kk, vv in self.kwargs.items() if not isinstance(vv, NodeWrapper)}

    def evaluate(self, force: bool = False) -> Any:
        """
        Evaluate `self.func`, or return the value from the graph cache or the backend.

        Parameters
        ----------
        force: bool (default=False)
            Recompute and re-serialise even if the artifact exists. Upstream nodes are not forced.

        Returns
        -------
        Any: the return value of `self.func`.
        """

        out = compute_or_load_evaluation(
            name=self.name,
            func=self.func,
            backend_interface=self.backend_interface,
            args=self.args,
            kwargs=self.kwargs,
            cache=self.graph.cache,
            force=force,
        )

        for node in self.chained_nodes:
            node.evaluate()

        return out


def resolve_arguments(
    arguments: Union[Any, List[Any], Tuple[Any], Dict[str, Any]]
) -> Union[Any, List[Any], Tuple[Any], Dict[str, Any]]:
    """Evaluate NodeWrapper objects found in args and kwargs."""
    if isinstance(arguments, NodeWrapper):
        return arguments.evaluate()
    if isinstance(arguments, ComputationGraph):
        logger.warning("Not evaluating nested ComputationGraphs, returning object")
        return arguments
    if isinstance(arguments, (list, tuple)):
        return type(arguments)(resolve_arguments(val) for val in arguments)
    elif isinstance(arguments, dict):
        return {kk: resolve_arguments(vv) for kk, vv in arguments.items()}
    return arguments


def compute_or_load_evaluation(
    name: str,
    func: Callable,
    backend_interface: BackendInterface,
    args: Optional[Tuple[Any]],
    kwargs: Optional[Dict[str, Any]],
    cache: Dict[Any, Any],
    force: bool = False,
):
    """
    Manages the backend, the function and the graph cache for one node.

    Parameters
    ----------
    name: str
        Name of the node to be calculated/loaded/returned from cache.
    func: callable
        The function that computes the node value.
    backend_interface: BackendInterface
        The backend interface of the node.
    args, kwargs:
        Arguments of `func`; NodeWrappers are resolved first.
    cache: dict
        The owning graph's memory cache.
    force: bool
        Ignore the cache and any existing artifact.

    Returns
    -------
    Any:
        The return value of `func`, either calculated or loaded.
    """

    name_short = str(name)
    if len(name_short) > 75:
        name_short = f"...{name_short[-50:]}"

    # Artifacts are unique per path; names repeat across backends.
    cache_key = str(backend_interface.path)
    if not force and cache_key in cache:
        return cache[cache_key]

    if force or not backend_interface.exists():
        if args is None:
            args = tuple()
        if kwargs is None:
            kwargs = dict()

        with backend_interface.lock():
            args = resolve_arguments(args)
            kwargs = resolve_arguments(kwargs)

            logger.info(f"Evaluating {name_short}...")
            try:
                data = func(*args, **kwargs)
            except Exception as ex:
                logger.exception(f"The following exception was raised when computing {name}: {ex}")
                raise

            if not isinstance(backend_interface, VolatileInterface):
                logger.info(f"Serialising {name_short}...")
                try:
                    backend_interface.save(data=data)
                except Exception as ex:
                    logger.exception(f"The following exception was raised when saving {name}: {ex}")
                    raise

    else:
        try:
            logger.info(f"Deserialising {name_short}...")
            data = backend_interface.load()
        except Exception as ex:
            logger.exception(f"The following exception was raised when loading {name}: {ex}")
            raise

    if data is not None:
        cache[cache_key] = data

    return data
