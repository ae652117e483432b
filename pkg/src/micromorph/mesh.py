"""Structured quadrilateral meshes of n x n unit-cell specimens.

The specimen occupies B = [-n l/2, n l/2]^2 and is meshed with a uniform
grid of ``resolution`` elements per cell edge.  The Q2 node grid and the
oriented edge lists needed by the curl-conforming spaces are derived here.

Edge bookkeeping: every global edge carries a canonical orientation (+x
for horizontal edges, +y for vertical ones).  Each element lists its four
edges counterclockwise (bottom, right, top, left) together with the sign
relating the local traversal to the canonical orientation, so interior
edges are seen with opposite signs by their two neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import UnitCellGeometry

__all__ = ["StructuredMesh", "build_mesh", "MeshResolutionError"]


class MeshResolutionError(ValueError):
    """Geometry rectangle edges do not align with the element grid."""


@dataclass(frozen=True)
class StructuredMesh:
    """Uniform quad mesh of an n x n specimen.

    ``solid`` marks elements carrying stiffness; void elements stay in the
    connectivity but are skipped during assembly.
    """

    geometry: UnitCellGeometry
    n_cells: int
    resolution: int
    nx: int  # elements per side (= n_cells * resolution)
    ny: int
    hx: float
    hy: float
    origin: np.ndarray  # lower-left corner of B
    solid: np.ndarray  # (ny, nx) bool

    # --- sizes -------------------------------------------------------
    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def node_grid_shape(self) -> tuple:
        return (2 * self.nx + 1, 2 * self.ny + 1)

    @property
    def n_nodes(self) -> int:
        gx, gy = self.node_grid_shape
        return gx * gy

    @property
    def n_h_edges(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def n_v_edges(self) -> int:
        return (self.nx + 1) * self.ny

    @property
    def n_edges(self) -> int:
        return self.n_h_edges + self.n_v_edges

    @property
    def length(self) -> float:
        return self.n_cells * self.geometry.l

    # --- ids ---------------------------------------------------------
    def node_id(self, i, j):
        """Q2 grid node (i, j) -> id; i along x in [0, 2nx], j along y."""
        return np.asarray(j) * (2 * self.nx + 1) + np.asarray(i)

    def node_xy(self, node_ids) -> np.ndarray:
        ids = np.asarray(node_ids)
        gx = 2 * self.nx + 1
        i = ids % gx
        j = ids // gx
        x = self.origin[0] + 0.5 * self.hx * i
        y = self.origin[1] + 0.5 * self.hy * j
        return np.stack([x, y], axis=-1)

    @property
    def node_coords(self) -> np.ndarray:
        return self.node_xy(np.arange(self.n_nodes))

    def h_edge_id(self, ex, ey):
        """Horizontal edge below element row ey, column ex; oriented +x."""
        return np.asarray(ey) * self.nx + np.asarray(ex)

    def v_edge_id(self, ex, ey):
        """Vertical edge left of element column ex, row ey; oriented +y."""
        return self.n_h_edges + np.asarray(ey) * (self.nx + 1) + np.asarray(ex)

    def element_nodes(self, ex, ey) -> np.ndarray:
        """9 Q2 node ids of element (ex, ey), local order (iy, ix) row-major."""
        i0, j0 = 2 * ex, 2 * ey
        ids = [self.node_id(i0 + ix, j0 + iy) for iy in range(3) for ix in range(3)]
        return np.asarray(ids)

    def element_edges(self, ex, ey):
        """CCW (edge_id, sign) pairs: bottom, right, top, left."""
        return (
            (self.h_edge_id(ex, ey), +1),
            (self.v_edge_id(ex + 1, ey), +1),
            (self.h_edge_id(ex, ey + 1), -1),
            (self.v_edge_id(ex, ey), -1),
        )

    def edge_endpoints(self, edge_id: int) -> np.ndarray:
        """(2, 2) start/end coordinates in canonical orientation."""
        if edge_id < self.n_h_edges:
            ey, ex = divmod(edge_id, self.nx)
            x0 = self.origin[0] + ex * self.hx
            y0 = self.origin[1] + ey * self.hy
            return np.array([[x0, y0], [x0 + self.hx, y0]])
        eid = edge_id - self.n_h_edges
        ey, ex = divmod(eid, self.nx + 1)
        x0 = self.origin[0] + ex * self.hx
        y0 = self.origin[1] + ey * self.hy
        return np.array([[x0, y0], [x0, y0 + self.hy]])

    # --- masks -------------------------------------------------------
    def solid_elements(self) -> np.ndarray:
        """Indices (ey, ex) of solid elements as an (n, 2) array."""
        ey, ex = np.nonzero(self.solid)
        return np.stack([ey, ex], axis=1)

    def solid_fraction(self) -> float:
        return float(np.count_nonzero(self.solid)) / self.solid.size

    def boundary_node_ids(self) -> np.ndarray:
        gx, gy = self.node_grid_shape
        i, j = np.meshgrid(np.arange(gx), np.arange(gy), indexing="ij")
        on = (i == 0) | (i == gx - 1) | (j == 0) | (j == gy - 1)
        return self.node_id(i[on], j[on])

    def boundary_edge_ids(self) -> np.ndarray:
        ids = []
        for ex in range(self.nx):
            ids.append(self.h_edge_id(ex, 0))
            ids.append(self.h_edge_id(ex, self.ny))
        for ey in range(self.ny):
            ids.append(self.v_edge_id(0, ey))
            ids.append(self.v_edge_id(self.nx, ey))
        return np.asarray(sorted(ids))

    def to_csv(self, path) -> None:
        """Node snapshot (node id, x, y) for external plotting."""
        xy = self.node_coords
        with open(path, "w") as fh:
            fh.write("node,x,y\n")
            for nid, (x, y) in enumerate(xy):
                fh.write(f"{nid},{x!r},{y!r}\n")


def build_mesh(
    geometry: UnitCellGeometry, n_cells: int = 1, resolution: int = 20
) -> StructuredMesh:
    """Mesh the n x n specimen B = [-n l/2, n l/2]^2.

    ``resolution`` must be even (so the half-cell landmarks fall on the
    grid) and every rectangle edge of the shape program must align with the
    element grid; otherwise the mask sampled at element centers would
    misrepresent the geometry and the build is refused.
    """
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    if resolution < 4 or resolution % 2 != 0:
        raise ValueError("resolution must be even and >= 4")
    h = geometry.l / resolution
    coords = geometry.grid_coordinates()
    misaligned = np.abs(np.round(coords / h) * h - coords) > 1e-9 * geometry.l
    if np.any(misaligned):
        raise MeshResolutionError(
            f"shape program coordinates {coords[misaligned]} do not align "
            f"with the grid spacing {h} at resolution {resolution}"
        )
    cell_mask = geometry.solid_mask(resolution)
    solid = np.tile(cell_mask, (n_cells, n_cells))
    nx = ny = n_cells * resolution
    half = 0.5 * n_cells * geometry.l
    return StructuredMesh(
        geometry=geometry,
        n_cells=n_cells,
        resolution=resolution,
        nx=nx,
        ny=ny,
        hx=h,
        hy=h,
        origin=np.array([-half, -half]),
        solid=solid,
    )
