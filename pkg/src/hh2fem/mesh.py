"""Conforming triangle meshes with newest-vertex bisection.

Triangles are stored as vertex triples (v0, v1, v2); the reference edge is
always (v0, v1) and bisection inserts its midpoint m, producing the children
(v2, v0, m) and (v1, v2, m) whose reference edges lie opposite the new node.
Marked elements are refined so that all three edges are halved (four sons);
in interior-node mode they additionally receive a vertex strictly inside
(six sons).  Conformity is restored by an edge-marking fixpoint: every
element that owns a marked edge gets its reference edge marked too, and each
element is then split according to which of its edges carry a midpoint.

Meshes are immutable: refinement returns a new mesh holding a link to its
parent, so element lineage can be traced across generations.
"""

import enum
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    pass


class LineageError(MeshError):
    """Raised when two meshes are not related by refinement."""


class RefineMode(enum.Enum):
    """Refinement of marked elements: 4 sons, or 6 sons with interior node."""

    M3 = "m3"
    M3P = "m3p"


@dataclass(frozen=True)
class Vertex:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Triangle:
    """Element accessor; ``v`` lists vertex ids with (v[0], v[1]) the reference edge."""

    id: int
    v: tuple
    parent: int
    generation: int


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass
class Mesh:
    """Immutable conforming triangulation.

    Attributes
    ----------
    vertices : ndarray (nv, 2)
        Vertex coordinates.  Refinement appends to the parent's list, so
        vertex ids are stable across generations.
    triangles : ndarray (nt, 3)
        Vertex ids per element, positively oriented; reference edge first two.
    parent_tris : ndarray (nt,)
        Id of each element's parent in the previous generation (-1 at roots).
    region : ndarray (nt,)
        Ancestor element id in generation 0 (used for piecewise coefficients).
    generation : int
    parent : Mesh or None
    parent_edge_midpoint : ndarray (n_parent_edges,) or None
        For each edge of the parent mesh, the vertex id of its midpoint in
        this mesh, or -1 if the edge was not bisected.
    bisect_pairs : ndarray (n_new_vertices, 2) or None
        For each vertex appended by the refinement, the two vertex ids whose
        midpoint it is (ids valid in this mesh, in creation order).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    parent_tris: np.ndarray
    region: np.ndarray
    generation: int = 0
    parent: "Mesh | None" = None
    parent_edge_midpoint: "np.ndarray | None" = None
    bisect_pairs: "np.ndarray | None" = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_arrays(cls, vertices, triangles, region=None):
        """Build a generation-0 mesh from raw arrays and validate it.

        ``region`` optionally labels each triangle (default: its own index);
        labels are inherited by all descendants.
        """
        vertices = _freeze(np.asarray(vertices, dtype=float).reshape(-1, 2))
        triangles = _freeze(np.asarray(triangles, dtype=np.int64).reshape(-1, 3))
        nt = len(triangles)
        if region is None:
            region = np.arange(nt, dtype=np.int64)
        else:
            region = np.asarray(region, dtype=np.int64)
            if region.shape != (nt,) or np.any(region < 0):
                raise MeshError("region labels must be one non-negative id per triangle")
        mesh = cls(
            vertices=vertices,
            triangles=triangles,
            parent_tris=_freeze(np.full(nt, -1, dtype=np.int64)),
            region=_freeze(region),
        )
        if np.any(triangles < 0) or np.any(triangles >= len(vertices)):
            raise MeshError("triangle refers to a missing vertex")
        if np.any(mesh.signed_areas <= 0.0):
            raise MeshError("triangles must be positively oriented")
        mesh._edge_data  # builds the edge table; raises on >2 incidences
        return mesh

    # -- basic geometry ----------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def __len__(self):
        return len(self.triangles)

    @property
    def corners(self):
        """Vertex coordinates per element, shape (nt, 3, 2)."""
        c = self._cache.get("corners")
        if c is None:
            c = _freeze(self.vertices[self.triangles])
            self._cache["corners"] = c
        return c

    @property
    def signed_areas(self):
        a = self._cache.get("signed_areas")
        if a is None:
            p = self.corners
            d1 = p[:, 1] - p[:, 0]
            d2 = p[:, 2] - p[:, 0]
            a = _freeze(0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]))
            self._cache["signed_areas"] = a
        return a

    @property
    def areas(self):
        return self.signed_areas

    @property
    def diameters(self):
        d = self._cache.get("diameters")
        if d is None:
            p = self.corners
            e = p[:, [1, 2, 0]] - p
            d = _freeze(np.sqrt((e**2).sum(axis=2)).max(axis=1))
            self._cache["diameters"] = d
        return d

    def vertex(self, i):
        x, y = self.vertices[i]
        return Vertex(id=int(i), x=float(x), y=float(y))

    def triangle(self, t):
        return Triangle(
            id=int(t),
            v=tuple(int(v) for v in self.triangles[t]),
            parent=int(self.parent_tris[t]),
            generation=self.generation,
        )

    # -- edge table ---------------------------------------------------------

    @property
    def _edge_data(self):
        data = self._cache.get("edges")
        if data is None:
            data = _build_edges(self.triangles)
            self._cache["edges"] = data
        return data

    @property
    def edges(self):
        """Unique edges as sorted vertex pairs, shape (ne, 2), lexicographic."""
        return self._edge_data[0]

    @property
    def tri_edges(self):
        """Edge ids per element slot: (v0,v1), (v1,v2), (v2,v0)."""
        return self._edge_data[1]

    @property
    def edge_tris(self):
        """Incident element ids per edge, shape (ne, 2); -1 on boundary side."""
        return self._edge_data[2]

    @property
    def boundary_edges(self):
        return self._edge_data[3]

    @property
    def boundary_vertices(self):
        m = self._cache.get("bvert")
        if m is None:
            m = np.zeros(self.num_vertices, dtype=bool)
            m[self.edges[self.boundary_edges]] = True
            m = _freeze(m)
            self._cache["bvert"] = m
        return m


def _build_edges(triangles):
    nt = len(triangles)
    pairs = triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    tri_edges = inverse.reshape(nt, 3).astype(np.int64)
    counts = np.bincount(inverse, minlength=len(edges))
    if counts.max(initial=0) > 2:
        raise MeshError("an edge is shared by more than two triangles")
    owner = np.arange(3 * nt, dtype=np.int64) // 3
    order = np.argsort(inverse, kind="stable")
    starts = np.zeros(len(edges), dtype=np.int64)
    starts[1:] = np.cumsum(counts)[:-1]
    edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_tris[:, 0] = owner[order[starts]]
    two = counts == 2
    edge_tris[two, 1] = owner[order[starts[two] + 1]]
    boundary = counts == 1
    return (_freeze(edges), _freeze(tri_edges), _freeze(edge_tris), _freeze(boundary))


def initial_lshape():
    """Criss-cross triangulation of (-1,1)^2 minus [0,1]x[-1,0].

    Three unit squares, each split into four triangles around its center:
    11 vertices, 12 elements, total area 3.  The reentrant corner (0, 0) is
    a boundary vertex, and every reference edge is the (unique) longest edge
    of its element.
    """
    vertices = np.array(
        [
            [-1.0, -1.0],  # 0
            [0.0, -1.0],   # 1
            [-1.0, 0.0],   # 2
            [0.0, 0.0],    # 3  reentrant corner
            [1.0, 0.0],    # 4
            [-1.0, 1.0],   # 5
            [0.0, 1.0],    # 6
            [1.0, 1.0],    # 7
            [-0.5, -0.5],  # 8  center of lower-left square
            [-0.5, 0.5],   # 9  center of upper-left square
            [0.5, 0.5],    # 10 center of upper-right square
        ]
    )
    triangles = np.array(
        [
            [0, 1, 8], [1, 3, 8], [3, 2, 8], [2, 0, 8],
            [2, 3, 9], [3, 6, 9], [6, 5, 9], [5, 2, 9],
            [3, 4, 10], [4, 7, 10], [7, 6, 10], [6, 3, 10],
        ],
        dtype=np.int64,
    )
    return Mesh.from_arrays(vertices, triangles)


# child layouts per marked-edge pattern, as indices into the per-element
# node tuple (v0, v1, v2, m0, m1, m2, c).  Pattern code = sum of 2^slot over
# marked edge slots; code 8 is a marked element in interior-node mode.
_CHILD_RECIPES = {
    0: np.array([[0, 1, 2]]),
    1: np.array([[2, 0, 3], [1, 2, 3]]),
    3: np.array([[2, 0, 3], [3, 1, 4], [2, 3, 4]]),
    5: np.array([[3, 2, 5], [0, 3, 5], [1, 2, 3]]),
    7: np.array([[3, 2, 5], [0, 3, 5], [3, 1, 4], [2, 3, 4]]),
    8: np.array([[5, 3, 6], [2, 5, 6], [0, 3, 5], [3, 1, 4], [4, 2, 6], [3, 4, 6]]),
}
_CHILD_COUNTS = {code: len(r) for code, r in _CHILD_RECIPES.items()}


def refine(mesh, marked, mode=RefineMode.M3):
    """Refine ``marked`` elements and restore conformity by closure.

    Marked elements have all three edges bisected (plus an interior node in
    mode M3P); closure elements receive one to three bisections.  Returns a
    new mesh; the input is left untouched.
    """
    mode = RefineMode(mode)
    nt = mesh.num_triangles
    nv = mesh.num_vertices
    if isinstance(marked, (set, frozenset)):
        marked = sorted(marked)
    marked = np.unique(np.asarray(marked, dtype=np.int64).reshape(-1))
    if marked.size and (marked[0] < 0 or marked[-1] >= nt):
        raise MeshError(f"marked element out of range [0, {nt})")

    tri_edges = mesh.tri_edges
    ne = len(mesh.edges)
    edge_marked = np.zeros(ne, dtype=bool)
    edge_marked[tri_edges[marked].ravel()] = True

    # closure fixpoint: an element with any marked edge marks its reference edge
    while True:
        has = edge_marked[tri_edges].any(axis=1)
        need = has & ~edge_marked[tri_edges[:, 0]]
        if not need.any():
            break
        edge_marked[tri_edges[need, 0]] = True

    split_edges = np.flatnonzero(edge_marked)
    midv = np.full(ne, -1, dtype=np.int64)
    midv[split_edges] = nv + np.arange(len(split_edges))
    mid_pairs = mesh.edges[split_edges]
    mid_coords = 0.5 * (mesh.vertices[mid_pairs[:, 0]] + mesh.vertices[mid_pairs[:, 1]])

    slot_marked = edge_marked[tri_edges]
    codes = (slot_marked * np.array([1, 2, 4])).sum(axis=1)
    interior = np.full(nt, -1, dtype=np.int64)
    if mode is RefineMode.M3P and marked.size:
        interior[marked] = nv + len(split_edges) + np.arange(marked.size)
        codes[marked] = 8
        # interior node sits at the midpoint of the segment (m0, v2)
        m0 = midv[tri_edges[marked, 0]]
        int_pairs = np.column_stack([m0, mesh.triangles[marked, 2]])
        int_coords = 0.5 * (mid_coords[m0 - nv] + mesh.vertices[int_pairs[:, 1]])
    else:
        int_pairs = np.empty((0, 2), dtype=np.int64)
        int_coords = np.empty((0, 2))

    counts = np.zeros(nt, dtype=np.int64)
    for code, k in _CHILD_COUNTS.items():
        counts[codes == code] = k
    offsets = np.zeros(nt, dtype=np.int64)
    offsets[1:] = np.cumsum(counts)[:-1]
    total = int(counts.sum())

    nodes = np.column_stack([mesh.triangles, midv[tri_edges], interior])
    new_tris = np.empty((total, 3), dtype=np.int64)
    for code, recipe in _CHILD_RECIPES.items():
        sel = np.flatnonzero(codes == code)
        if not sel.size:
            continue
        rows = offsets[sel][:, None] + np.arange(len(recipe))[None, :]
        new_tris[rows.ravel()] = nodes[sel][:, recipe.ravel()].reshape(-1, 3)

    new_vertices = np.vstack([mesh.vertices, mid_coords, int_coords])
    parent_tris = np.repeat(np.arange(nt, dtype=np.int64), counts)
    child = Mesh(
        vertices=_freeze(new_vertices),
        triangles=_freeze(new_tris),
        parent_tris=_freeze(parent_tris),
        region=_freeze(mesh.region[parent_tris]),
        generation=mesh.generation + 1,
        parent=mesh,
        parent_edge_midpoint=_freeze(midv),
        bisect_pairs=_freeze(np.vstack([mid_pairs, int_pairs])),
    )
    return child


def uniform_refine(mesh, mode=RefineMode.M3):
    """Refine every element (all edges halved; 4 or 6 sons each)."""
    return refine(mesh, np.arange(mesh.num_triangles), mode)


def ancestor_map(coarse, fine):
    """For each element of ``fine``, the id of its ancestor in ``coarse``."""
    if fine is coarse:
        return np.arange(coarse.num_triangles, dtype=np.int64)
    anc = None
    m = fine
    while m is not coarse:
        if m.parent is None:
            raise LineageError("fine mesh does not descend from coarse mesh")
        anc = m.parent_tris if anc is None else m.parent_tris[anc]
        m = m.parent
    return anc


def child_map(coarse, fine):
    """Descendants in ``fine`` of each coarse element, as a list of id arrays.

    The two meshes must be related by zero or more refinement calls;
    otherwise a :class:`LineageError` is raised.  Children tile their parent
    exactly (their areas sum to the parent's area).
    """
    anc = ancestor_map(coarse, fine)
    order = np.argsort(anc, kind="stable")
    counts = np.bincount(anc, minlength=coarse.num_triangles)
    out = []
    pos = 0
    for c in counts:
        out.append(order[pos:pos + c])
        pos += c
    return out


def shape_regularity(mesh):
    """max_T diam(T) / |T|^(1/2) over the mesh."""
    return float((mesh.diameters / np.sqrt(mesh.areas)).max())


def check_conforming(mesh):
    """Verify edge incidences and the absence of hanging nodes.

    Newest-vertex bisection only ever splits an edge at its midpoint, so a
    hanging node manifests as a mesh vertex sitting exactly at the midpoint
    of an existing edge.  Raises :class:`MeshError` on any defect.
    """
    if np.any(mesh.signed_areas <= 0.0):
        raise MeshError("degenerate or inverted triangle")
    edges = mesh.edges  # construction raises if an edge has >2 elements
    vert_keys = {v.tobytes() for v in np.ascontiguousarray(mesh.vertices)}
    mids = np.ascontiguousarray(
        0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    )
    for i, mid in enumerate(mids):
        if mid.tobytes() in vert_keys:
            a, b = edges[i]
            raise MeshError(f"hanging node at midpoint of edge ({a}, {b})")


def write_mesh(mesh, path):
    """Dump a mesh in the plain text format: counts, vertices, elements."""
    lines = [f"{mesh.num_vertices} {mesh.num_triangles}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Read the plain text format written by :func:`write_mesh`."""
    with open(path) as fh:
        tokens = fh.read().split()
    nv, nt = int(tokens[0]), int(tokens[1])
    if len(tokens) != 2 + 2 * nv + 3 * nt:
        raise MeshError("malformed mesh file")
    coords = np.array(tokens[2:2 + 2 * nv], dtype=float).reshape(nv, 2)
    tris = np.array(tokens[2 + 2 * nv:], dtype=np.int64).reshape(nt, 3)
    return Mesh.from_arrays(coords, tris)
