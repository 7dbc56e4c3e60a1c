"""Complete metric graphs in the directed-bond representation.

A graph here is always the complete simple graph on V vertices with
incommensurate bond lengths and one symmetric unitary scattering matrix per
vertex. Bonds are kept in lexicographic order of their vertex pairs; each
bond appears twice in the directed-bond space, once per traversal direction.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, NumericalIntegrityError

GRAPH_SCHEMA = "qgraphlab.graph/1"

_CONDITION_KINDS = ("neumann", "random")


def bond_count(vertex_count: int) -> int:
    """Number of undirected bonds of the complete simple graph."""
    return vertex_count * (vertex_count - 1) // 2


class DirectedBondIndex:
    """Index bookkeeping for the 2B directed bonds of a complete graph.

    Undirected bonds (a, b) with a < b are numbered lexicographically as
    0..B-1. Directed index i < B means traversal a -> b (low to high),
    i >= B the reversal of bond i - B. The flip involution swaps the two
    blocks.
    """

    def __init__(self, vertex_count: int):
        if vertex_count < 2:
            raise ConfigurationError("vertex_count must be at least 2")
        V = vertex_count
        self.vertex_count = V
        self.bonds = [(a, b) for a in range(V) for b in range(a + 1, V)]
        self.B = len(self.bonds)
        self._bond_id = {pair: i for i, pair in enumerate(self.bonds)}
        n = 2 * self.B
        self.size = n
        origin = np.empty(n, dtype=np.intp)
        terminus = np.empty(n, dtype=np.intp)
        for (a, b), i in self._bond_id.items():
            origin[i], terminus[i] = a, b
            origin[self.B + i], terminus[self.B + i] = b, a
        self.origin = origin
        self.terminus = terminus
        flip = np.concatenate([np.arange(self.B) + self.B, np.arange(self.B)])
        self.flip = flip
        # incoming/outgoing directed bonds per vertex, far endpoint ascending
        self.incoming = [
            np.array([self.directed(u, v) for u in range(V) if u != v], dtype=np.intp)
            for v in range(V)
        ]
        self.outgoing = [
            np.array([self.directed(v, u) for u in range(V) if u != v], dtype=np.intp)
            for v in range(V)
        ]

    def bond(self, a: int, b: int) -> int:
        return self._bond_id[(a, b) if a < b else (b, a)]

    def directed(self, origin: int, terminus: int) -> int:
        """Directed-bond index for the traversal origin -> terminus."""
        if origin < terminus:
            return self._bond_id[(origin, terminus)]
        return self.B + self._bond_id[(terminus, origin)]


@dataclass(frozen=True)
class Graph:
    """A closed complete quantum graph.

    vertex_conditions[v] is the (V-1) x (V-1) symmetric unitary scattering
    matrix of vertex v, rows and columns ordered by ascending far endpoint.
    """

    vertex_count: int
    lengths: np.ndarray
    vertex_conditions: tuple
    condition_kind: str
    seed: int | None = None
    index: DirectedBondIndex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", DirectedBondIndex(self.vertex_count))
        if len(self.lengths) != self.index.B:
            raise ConfigurationError(
                f"expected {self.index.B} lengths for V={self.vertex_count}, "
                f"got {len(self.lengths)}"
            )

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    @property
    def doubled_lengths(self) -> np.ndarray:
        """Length of each directed bond (each L appears once per direction)."""
        return np.concatenate([self.lengths, self.lengths])

    def mean_density(self) -> float:
        """Mean spectral density: expected levels per unit k."""
        return self.total_length / np.pi


def neumann_vertex_matrix(valency: int) -> np.ndarray:
    """Neumann-Kirchhoff vertex scattering matrix, 2/v - delta_ij."""
    if valency < 1:
        raise ConfigurationError("valency must be positive")
    return (2.0 / valency) * np.ones((valency, valency)) - np.eye(valency)


def random_symmetric_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a symmetric unitary matrix as O diag(e^{i phi}) O^T.

    O is Haar-distributed real orthogonal (QR of a Gaussian matrix with the
    sign-fixed R diagonal), phases are uniform on [0, 2pi).
    """
    if dim < 1:
        raise ConfigurationError("dim must be positive")
    X = rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(X)
    Q = Q * np.sign(np.diag(R))
    phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, dim))
    return (Q * phases) @ Q.T


def commensurate_pair_exists(lengths: np.ndarray, max_den: int = 10,
                             tol: float = 1e-6) -> bool:
    """True if any length ratio sits within tol of a rational p/q, p,q <= max_den."""
    rationals = sorted({
        float(Fraction(p, q))
        for p in range(1, max_den + 1)
        for q in range(1, max_den + 1)
    })
    rationals = np.array(rationals)
    L = np.asarray(lengths, dtype=float)
    n = len(L)
    for i in range(n):
        ratios = L[i + 1:] / L[i]
        if ratios.size and np.any(
                np.abs(ratios[:, None] - rationals[None, :]) <= tol):
            return True
        inv = L[i] / L[i + 1:]
        if inv.size and np.any(
                np.abs(inv[:, None] - rationals[None, :]) <= tol):
            return True
    return False


def _draw_lengths(B: int, L_min: float, L_max: float,
                  rng: np.random.Generator, max_tries: int = 64) -> np.ndarray:
    for _ in range(max_tries):
        lengths = rng.uniform(L_min, L_max, B)
        if not commensurate_pair_exists(lengths):
            return lengths
    raise NumericalIntegrityError(
        "could not draw incommensurate bond lengths "
        f"in {max_tries} tries; widen [L_min, L_max]")


def build_complete_graph(vertex_count: int, L_min: float = 1.0,
                         L_max: float = 2.0, condition_kind: str = "neumann",
                         seed: int | None = None) -> Graph:
    """Build a complete graph with random incommensurate lengths.

    Lengths are uniform on [L_min, L_max], redrawn until no pairwise ratio
    is within 1e-6 of a rational with numerator and denominator <= 10.
    Deterministic given the seed.
    """
    if vertex_count < 2:
        raise ConfigurationError("vertex_count must be at least 2")
    if not (0 < L_min < L_max):
        raise ConfigurationError("need 0 < L_min < L_max")
    if condition_kind not in _CONDITION_KINDS:
        raise ConfigurationError(
            f"condition_kind must be one of {_CONDITION_KINDS}")
    root = np.random.SeedSequence(seed)
    length_child, *condition_children = root.spawn(1 + vertex_count)
    B = bond_count(vertex_count)
    lengths = _draw_lengths(B, L_min, L_max, np.random.default_rng(length_child))
    conditions = _make_conditions(vertex_count, condition_kind, condition_children)
    return Graph(vertex_count, lengths, conditions, condition_kind, seed)


def graph_from_lengths(vertex_count: int, lengths, condition_kind: str = "neumann",
                       seed: int | None = None) -> Graph:
    """Build a graph with explicitly fixed bond lengths (no resampling).

    Used for analytically solvable configurations; the incommensurability
    filter is intentionally not applied here.
    """
    lengths = np.asarray(lengths, dtype=float)
    if np.any(lengths <= 0):
        raise ConfigurationError("bond lengths must be positive")
    if condition_kind not in _CONDITION_KINDS:
        raise ConfigurationError(
            f"condition_kind must be one of {_CONDITION_KINDS}")
    root = np.random.SeedSequence(seed)
    condition_children = root.spawn(1 + vertex_count)[1:]
    conditions = _make_conditions(vertex_count, condition_kind, condition_children)
    return Graph(vertex_count, lengths, conditions, condition_kind, seed)


def _make_conditions(vertex_count: int, condition_kind: str,
                     children) -> tuple:
    valency = vertex_count - 1
    if condition_kind == "neumann":
        sigma = neumann_vertex_matrix(valency).astype(complex)
        return tuple(sigma.copy() for _ in range(vertex_count))
    return tuple(
        random_symmetric_unitary(valency, np.random.default_rng(child))
        for child in children
    )


def bond_scattering_factor(graph: Graph) -> np.ndarray:
    """Vertex scattering in the directed-bond representation (2B x 2B).

    Entry (i, j) is nonzero only when directed bonds i and j share their
    terminus vertex v; the value is vertex_conditions[v] indexed by the far
    endpoints. Symmetric whenever every vertex matrix is symmetric.
    """
    idx = graph.index
    n = idx.size
    out = np.zeros((n, n), dtype=complex)
    for v in range(graph.vertex_count):
        inc = idx.incoming[v]
        out[np.ix_(inc, inc)] = graph.vertex_conditions[v]
    return out


def transition_factor(graph: Graph) -> np.ndarray:
    """The k-independent factor of the evolution map: flip @ bond scattering.

    Entry ((b,d), (b',d')) is the amplitude for hopping from directed bond
    (b',d') into (b,d) at the shared vertex origin(b,d) = terminus(b',d').
    Unitary for a closed graph; satisfies M^T = flip M flip.
    """
    sigma = bond_scattering_factor(graph)
    return sigma[graph.index.flip, :]


@dataclass(frozen=True)
class EvolutionMap:
    """Cached pieces of U(k) = diag(e^{ik L}) @ factor for one graph."""

    factor: np.ndarray
    doubled_lengths: np.ndarray
    trace_length: float
    factor_phase: float  # arg det(factor), fixed branch

    def at(self, k: float) -> np.ndarray:
        return np.exp(1j * k * self.doubled_lengths)[:, None] * self.factor


def evolution_map(graph: Graph) -> EvolutionMap:
    factor = transition_factor(graph)
    sign, logdet = np.linalg.slogdet(factor)
    if not np.isfinite(logdet):
        raise NumericalIntegrityError("evolution factor is singular")
    ell = graph.doubled_lengths
    return EvolutionMap(factor, ell, float(ell.sum()), float(np.angle(sign)))


def evolution_operator(graph: Graph, k: float) -> np.ndarray:
    """U(k): amplitude (b',d') -> (b,d) times the phase e^{ik L_b} of the new bond."""
    return evolution_map(graph).at(k)


def assemble_evolution_map(graph: Graph, k: float) -> np.ndarray:
    """Dense U(k) built in one call; prefer evolution_map for k sweeps."""
    return evolution_operator(graph, k)


# ---------------------------------------------------------------------------
# serialization


def _complex_matrix_to_lists(m: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _complex_matrix_from_lists(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def graph_to_dict(graph: Graph) -> dict:
    return {
        "schema": GRAPH_SCHEMA,
        "vertex_count": graph.vertex_count,
        "bond_count": graph.index.B,
        "condition_kind": graph.condition_kind,
        "seed": graph.seed,
        "lengths": [float(x) for x in graph.lengths],
        "vertex_conditions": [
            _complex_matrix_to_lists(m) for m in graph.vertex_conditions
        ],
    }


def graph_from_dict(data: dict, check: bool = True) -> Graph:
    if data.get("schema") != GRAPH_SCHEMA:
        raise ConfigurationError(
            f"unsupported graph schema {data.get('schema')!r}")
    V = int(data["vertex_count"])
    lengths = np.array(data["lengths"], dtype=float)
    conditions = tuple(
        _complex_matrix_from_lists(rows) for rows in data["vertex_conditions"]
    )
    if len(conditions) != V:
        raise ConfigurationError("vertex_conditions count does not match V")
    graph = Graph(V, lengths, conditions, str(data["condition_kind"]),
                  data.get("seed"))
    if check:
        validate_graph(graph)
    return graph


def validate_graph(graph: Graph, tol: float = 1e-8) -> None:
    """Gate a (possibly externally supplied) graph: unitary symmetric vertices."""
    v = graph.vertex_count - 1
    eye = np.eye(v)
    for i, m in enumerate(graph.vertex_conditions):
        if m.shape != (v, v):
            raise NumericalIntegrityError(
                f"vertex {i} condition has shape {m.shape}, expected {(v, v)}")
        if np.abs(m - m.T).max() > tol:
            raise NumericalIntegrityError(
                f"vertex {i} condition is not symmetric")
        if np.abs(m @ m.conj().T - eye).max() > tol:
            raise NumericalIntegrityError(
                f"vertex {i} condition is not unitary")
    if np.any(graph.lengths <= 0):
        raise NumericalIntegrityError("non-positive bond length")


def save_graph(graph: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph), fh, indent=1)
        fh.write("\n")


def load_graph(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))


def graph_hash(graph: Graph) -> str:
    """Stable content hash of the serialized graph."""
    payload = json.dumps(graph_to_dict(graph), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
