"""Uniform Cartesian grids, domain masks and second-order discrete calculus.

Node data live in plain numpy arrays indexed like the grid (``indexing='ij'``).
Scalar fields have shape ``counts``, vector fields ``counts + (n,)`` and
symmetric matrix fields ``counts + (n, n)``.  Nodes where a quantity is not
defined hold NaN.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

__all__ = [
    "EXTERIOR", "BOUNDARY", "INTERIOR",
    "GridSpec", "DomainMask", "ScalarField", "VectorField", "SymMatrixField",
    "StencilError",
    "box_mask", "disk_mask", "annulus_mask", "mask_from_inside",
    "gradient_central", "hessian_central", "directional_second_difference",
    "directional_second_difference_field", "oscillation", "discrete_norms",
    "write_field", "read_field", "pack_sym", "unpack_sym",
]

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2


class StencilError(ValueError):
    """A stencil needed a node that is outside the computational domain."""


@dataclass(frozen=True)
class GridSpec:
    lo: tuple
    hi: tuple
    counts: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if not (len(lo) == len(hi) == len(counts)):
            raise ValueError("lo, hi and counts must have the same length")
        if len(counts) not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(counts)}")
        if min(counts) < 3:
            raise ValueError(f"need at least 3 nodes per axis, got {counts}")
        hs = [(b - a) / (c - 1) for a, b, c in zip(lo, hi, counts)]
        if min(hs) <= 0:
            raise ValueError("hi must exceed lo on every axis")
        if max(hs) - min(hs) > 1e-12 * max(hs):
            raise ValueError(f"grid spacing must be isotropic, got {hs}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def box(cls, lo, hi, h):
        """Grid on the box [lo, hi] with spacing h; h must divide every side."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.size == 1 and hi.size > 1:
            lo = np.full_like(hi, lo[0])
        if hi.size == 1 and lo.size > 1:
            hi = np.full_like(lo, hi[0])
        ratio = (hi - lo) / h
        counts = np.rint(ratio).astype(int) + 1
        if np.any(np.abs(ratio - np.rint(ratio)) > 1e-9 * np.maximum(ratio, 1)):
            raise ValueError(f"h={h} does not divide the box sides {hi - lo}")
        return cls(tuple(lo), tuple(hi), tuple(counts))

    @classmethod
    def cube(cls, dim, lo, hi, h):
        return cls.box([lo] * dim, [hi] * dim, h)

    @property
    def dim(self):
        return len(self.counts)

    @property
    def h(self):
        return (self.hi[0] - self.lo[0]) / (self.counts[0] - 1)

    @property
    def shape(self):
        return self.counts

    @property
    def size(self):
        return int(np.prod(self.counts))

    def axes(self):
        return [np.linspace(a, b, c) for a, b, c in zip(self.lo, self.hi, self.counts)]

    def coords(self):
        """Coordinate arrays, one per axis, each of shape ``counts``."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self):
        """All node coordinates, shape ``counts + (dim,)``."""
        return np.stack(self.coords(), axis=-1)

    def node_coord(self, index):
        return np.array([a + i * self.h for a, i in zip(self.lo, index)])

    def nearest_node(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.rint((x - np.array(self.lo)) / self.h).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, np.array(self.counts) - 1))


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Per-node tags: EXTERIOR, BOUNDARY (Dirichlet) or INTERIOR (unknown)."""

    grid: GridSpec
    tags: np.ndarray

    def __post_init__(self):
        tags = np.asarray(self.tags, dtype=np.int8)
        if tags.shape != self.grid.shape:
            raise ValueError(f"tag array shape {tags.shape} != grid shape {self.grid.shape}")
        tags.flags.writeable = False
        object.__setattr__(self, "tags", tags)

    @property
    def interior(self):
        return self.tags == INTERIOR

    @property
    def boundary(self):
        return self.tags == BOUNDARY

    @property
    def active(self):
        return self.tags != EXTERIOR

    def restrict(self, keep):
        """Sub-mask whose interior is ``interior & keep``.

        Interior nodes dropped by ``keep`` become exterior, so norms over the
        result only see the kept region.
        """
        keep = np.asarray(keep, dtype=bool)
        tags = np.where(self.interior & keep, INTERIOR, EXTERIOR).astype(np.int8)
        return DomainMask(self.grid, tags)

    def distance_to_boundary(self):
        """Euclidean distance from each node to the nearest non-interior node."""
        from scipy.ndimage import distance_transform_edt

        d = distance_transform_edt(self.interior, sampling=self.grid.h)
        return np.asarray(d)

    def shrink(self, margin):
        """Interior nodes at distance >= margin from every non-interior node."""
        return self.restrict(self.distance_to_boundary() >= margin - 1e-12 * self.grid.h)


def _neighbour_offsets(dim):
    return [o for o in itertools.product((-1, 0, 1), repeat=dim) if any(o)]


def _shift(a, offset, fill=np.nan):
    """``out[i] = a[i + offset]`` on the leading axes, ``fill`` off the grid."""
    out = np.full(a.shape, fill, dtype=a.dtype)
    src, dst = [], []
    for o, n in zip(offset, a.shape):
        if o >= 0:
            src.append(slice(o, n))
            dst.append(slice(0, max(n - o, 0)))
        else:
            src.append(slice(0, max(n + o, 0)))
            dst.append(slice(-o, n))
    out[tuple(dst)] = a[tuple(src)]
    return out


def mask_from_inside(grid, inside):
    """Tag nodes from an inside/outside predicate.

    Interior nodes are inside nodes whose whole 3**n neighbourhood is inside;
    the remaining inside nodes are boundary nodes.
    """
    inside = np.asarray(inside, dtype=bool)
    full = inside.copy()
    for off in _neighbour_offsets(grid.dim):
        full &= _shift(inside, off, fill=False)
    tags = np.full(grid.shape, EXTERIOR, dtype=np.int8)
    tags[inside] = BOUNDARY
    tags[full] = INTERIOR
    return DomainMask(grid, tags)


def box_mask(grid):
    return mask_from_inside(grid, np.ones(grid.shape, dtype=bool))


def disk_mask(grid, center=None, radius=1.0):
    x = grid.points()
    c = np.zeros(grid.dim) if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(x - c, axis=-1)
    return mask_from_inside(grid, r <= radius * (1 + 1e-12))


def annulus_mask(grid, center=None, inner=0.25, outer=1.0):
    x = grid.points()
    c = np.zeros(grid.dim) if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(x - c, axis=-1)
    return mask_from_inside(grid, (r >= inner * (1 - 1e-12)) & (r <= outer * (1 + 1e-12)))


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    kind = "scalar"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"scalar field shape {v.shape} != grid shape {self.grid.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    values: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    kind = "vector"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape + (self.grid.dim,):
            raise ValueError(f"vector field shape {v.shape} does not match grid")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class SymMatrixField:
    grid: GridSpec
    values: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    kind = "symmatrix"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = self.grid.dim
        if v.shape != self.grid.shape + (n, n):
            raise ValueError(f"matrix field shape {v.shape} does not match grid")
        asym = np.abs(v - np.swapaxes(v, -1, -2))
        if np.nanmax(asym, initial=0.0) > 1e-12 * max(1.0, np.nanmax(np.abs(v), initial=0.0)):
            raise ValueError("matrix field is not symmetric")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid, matrix):
        m = np.asarray(matrix, dtype=float)
        return cls(grid, np.broadcast_to(m, grid.shape + m.shape).copy())


def pack_sym(values):
    """Upper triangle (row-major) of the trailing n x n axes."""
    n = values.shape[-1]
    i, j = np.triu_indices(n)
    return values[..., i, j]


def unpack_sym(packed, n):
    i, j = np.triu_indices(n)
    out = np.empty(packed.shape[:-1] + (n, n))
    out[..., i, j] = packed
    out[..., j, i] = packed
    return out


def _check_grid(u, mask):
    if u.grid != mask.grid:
        raise ValueError("field and mask live on different grids")


def _first_node(sel):
    return tuple(int(i) for i in np.argwhere(sel)[0])


def gradient_central(u, mask, where=None):
    """Second-order gradient at the nodes in ``where`` (default: interior).

    Central differences where both axis neighbours are active; otherwise the
    one-sided three-point formula.  Raises StencilError if neither fits.
    """
    _check_grid(u, mask)
    grid = mask.grid
    h, n = grid.h, grid.dim
    act = mask.active
    where = mask.interior if where is None else np.asarray(where, dtype=bool) & act
    uw = np.where(act, u.values, 0.0)
    g = np.full(grid.shape + (n,), np.nan)
    for ax in range(n):
        e = np.zeros(n, dtype=int)
        e[ax] = 1
        a_up, a_dn = _shift(act, e, False), _shift(act, -e, False)
        central = where & a_up & a_dn
        g[central, ax] = ((_shift(uw, e) - _shift(uw, -e)) / (2 * h))[central]
        rest = where & ~central
        if not rest.any():
            continue
        fwd = rest & a_up & _shift(act, 2 * e, False)
        g[fwd, ax] = ((-3 * uw + 4 * _shift(uw, e) - _shift(uw, 2 * e)) / (2 * h))[fwd]
        bwd = rest & ~fwd & a_dn & _shift(act, -2 * e, False)
        g[bwd, ax] = ((3 * uw - 4 * _shift(uw, -e) + _shift(uw, -2 * e)) / (2 * h))[bwd]
        bad = rest & ~fwd & ~bwd
        if bad.any():
            raise StencilError(f"node {_first_node(bad)} has too few neighbours along axis {ax}")
    return VectorField(grid, g)


def hessian_central(u, mask, where=None):
    """Hessian at interior nodes: 3-point diagonal, 4-point cross stencils."""
    _check_grid(u, mask)
    grid = mask.grid
    h, n = grid.h, grid.dim
    where = mask.interior if where is None else np.asarray(where, dtype=bool)
    bad = where & ~mask.interior
    if bad.any():
        raise StencilError(f"node {_first_node(bad)} is not interior; Hessian stencil exits the mask")
    uw = np.where(mask.active, u.values, 0.0)
    H = np.full(grid.shape + (n, n), np.nan)
    eye = np.eye(n, dtype=int)
    for i in range(n):
        d2 = (_shift(uw, eye[i]) - 2 * uw + _shift(uw, -eye[i])) / h**2
        H[where, i, i] = d2[where]
        for j in range(i + 1, n):
            pp = _shift(uw, eye[i] + eye[j])
            pm = _shift(uw, eye[i] - eye[j])
            mp = _shift(uw, -eye[i] + eye[j])
            mm = _shift(uw, -eye[i] - eye[j])
            dij = ((pp - pm - mp + mm) / (4 * h**2))[where]
            H[where, i, j] = dij
            H[where, j, i] = dij
    return SymMatrixField(grid, H)


def _integer_direction(direction, dim):
    e = np.asarray(direction, dtype=float).reshape(-1)
    if e.size != dim or not np.any(e):
        raise ValueError(f"direction {direction} is not a nonzero {dim}-vector")
    k = e / np.max(np.abs(e))
    ki = np.rint(k)
    if np.any(np.abs(k - ki) > 1e-9) or np.any(np.abs(ki) > 1):
        raise ValueError(f"direction {direction} is not an axis or diagonal grid direction")
    return ki.astype(int)


def directional_second_difference(u, mask, node, direction, m=1):
    """(u(x+d) - 2u(x) + u(x-d)) / |d|**2 with d = m*h*direction at one node."""
    grid = mask.grid
    k = _integer_direction(direction, grid.dim) * int(m)
    node = np.asarray(node, dtype=int)
    pts = [tuple(node + k), tuple(node), tuple(node - k)]
    for p in pts:
        inside = all(0 <= c < s for c, s in zip(p, grid.shape))
        if not inside or not mask.active[p]:
            raise StencilError(f"stencil point {p} of node {tuple(node)} exits the mask")
    v = u.values
    return (v[pts[0]] - 2 * v[pts[1]] + v[pts[2]]) / (grid.h**2 * float(k @ k))


def directional_second_difference_field(u, mask, direction, m=1, where=None):
    """Vectorised directional second difference over ``where`` (default interior)."""
    grid = mask.grid
    k = _integer_direction(direction, grid.dim) * int(m)
    where = mask.interior if where is None else np.asarray(where, dtype=bool)
    act = mask.active
    ok = act & _shift(act, k, False) & _shift(act, -k, False)
    bad = where & ~ok
    if bad.any():
        raise StencilError(f"stencil of node {_first_node(bad)} exits the mask")
    uw = np.where(act, u.values, 0.0)
    out = np.full(grid.shape, np.nan)
    d = (_shift(uw, k) - 2 * uw + _shift(uw, -k)) / (grid.h**2 * float(k @ k))
    out[where] = d[where]
    return ScalarField(grid, out)


def ball_nodes(mask, center, radius):
    """Boolean selector of active nodes with |x - center| <= radius."""
    grid = mask.grid
    c = np.asarray(center, dtype=float).reshape(-1)
    r = np.linalg.norm(grid.points() - c, axis=-1)
    return mask.active & (r <= radius * (1 + 1e-12))


def oscillation(u, center, radius, mask):
    """max - min of u over active nodes in the closed ball; returns (osc, count)."""
    sel = ball_nodes(mask, center, radius)
    count = int(sel.sum())
    if count < 4:
        raise ValueError(f"only {count} nodes in ball of radius {radius} around {tuple(center)}")
    vals = u.values[sel]
    return float(vals.max() - vals.min()), count


def discrete_norms(u, mask, subdomain=None):
    """sup, L2 and H2-seminorm of u with node weight h**n.

    ``subdomain`` is an optional boolean selector; the H2 seminorm uses the
    interior nodes of the selection.
    """
    grid = mask.grid
    w = grid.h**grid.dim
    sel = mask.active if subdomain is None else mask.active & np.asarray(subdomain, dtype=bool)
    isel = sel & mask.interior
    vals = u.values[sel]
    out = {
        "sup": float(np.max(np.abs(vals))) if vals.size else 0.0,
        "l2": float(np.sqrt(w * np.sum(vals**2))),
        "h2": 0.0,
        "count": int(sel.sum()),
    }
    if isel.any():
        H = hessian_central(u, mask, where=isel).values[isel]
        out["h2"] = float(np.sqrt(w * np.sum(H**2)))
    return out


_WIDTH = {"scalar": lambda n: 1, "vector": lambda n: n, "symmatrix": lambda n: n * (n + 1) // 2}
_KINDS = {"scalar": ScalarField, "vector": VectorField, "symmatrix": SymMatrixField}


def write_field(path, fld, provenance=None):
    """JSON header line then little-endian float64 payload in row-major node order."""
    g = fld.grid
    header = {"dim": g.dim, "counts": list(g.counts), "lo": list(g.lo), "hi": list(g.hi), "kind": fld.kind}
    if provenance is not None:
        header["provenance"] = provenance
    vals = pack_sym(fld.values) if fld.kind == "symmatrix" else fld.values
    payload = np.ascontiguousarray(vals, dtype="<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def read_field(path):
    """Inverse of :func:`write_field`; returns (field, header)."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    kind = header["kind"]
    if kind not in _KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    grid = GridSpec(tuple(header["lo"]), tuple(header["hi"]), tuple(header["counts"]))
    if grid.dim != header["dim"]:
        raise ValueError("header dim does not match counts")
    width = _WIDTH[kind](grid.dim)
    data = np.frombuffer(payload, dtype="<f8")
    if data.size != grid.size * width:
        raise ValueError(f"payload holds {data.size} values, expected {grid.size * width}")
    data = data.astype(float)
    if kind == "scalar":
        vals = data.reshape(grid.shape)
    elif kind == "vector":
        vals = data.reshape(grid.shape + (grid.dim,))
    else:
        vals = unpack_sym(data.reshape(grid.shape + (width,)), grid.dim)
    return _KINDS[kind](grid, vals), header
