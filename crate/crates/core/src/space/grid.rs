use crate::error::{Error, Result};

/// Node placement on each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridKind {
    /// Nodes at `i h`, `i = 0..n`, including both boundary points;
    /// `h = length / (n - 1)`, trapezoidal quadrature.
    Vertex,
    /// Nodes at cell midpoints `(i + 1/2) h`; `h = length / n`, uniform
    /// quadrature.
    CellCentered,
}

/// Uniform tensor grid on `[0, length]^dim` with `dim` in {1, 2}.
///
/// Nodes are indexed row-major: `index = iy * n + ix`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    kind: GridKind,
}

/// A pair of axis-neighbouring nodes together with the measure of the dual
/// face between them (1 in one dimension).
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Edge {
    pub a: usize,
    pub b: usize,
    pub axis: usize,
    pub cross: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64, kind: GridKind) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 nodes per axis, got {n}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(Self {
            dim,
            n,
            length,
            kind,
        })
    }

    pub fn vertex_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(1, n, length, GridKind::Vertex)
    }

    pub fn cell_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(1, n, length, GridKind::CellCentered)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn h(&self) -> f64 {
        match self.kind {
            GridKind::Vertex => self.length / (self.n - 1) as f64,
            GridKind::CellCentered => self.length / self.n as f64,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Lebesgue measure of the domain.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    fn axis_coordinate(&self, i: usize) -> f64 {
        match self.kind {
            GridKind::Vertex => i as f64 * self.h(),
            GridKind::CellCentered => (i as f64 + 0.5) * self.h(),
        }
    }

    /// Per-axis indices of a node.
    pub fn multi_index(&self, index: usize) -> [usize; 2] {
        match self.dim {
            1 => [index, 0],
            _ => [index % self.n, index / self.n],
        }
    }

    /// Physical coordinates of a node; unused axes are zero.
    pub fn coordinates(&self, index: usize) -> [f64; 2] {
        let [ix, iy] = self.multi_index(index);
        match self.dim {
            1 => [self.axis_coordinate(ix), 0.0],
            _ => [self.axis_coordinate(ix), self.axis_coordinate(iy)],
        }
    }

    fn axis_weight(&self, i: usize) -> f64 {
        let h = self.h();
        match self.kind {
            GridKind::Vertex if i == 0 || i == self.n - 1 => 0.5 * h,
            _ => h,
        }
    }

    /// Quadrature weights: trapezoidal on vertex grids, uniform on
    /// cell-centered grids.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|k| {
                let [ix, iy] = self.multi_index(k);
                match self.dim {
                    1 => self.axis_weight(ix),
                    _ => self.axis_weight(ix) * self.axis_weight(iy),
                }
            })
            .collect()
    }

    /// True for nodes lying on the boundary (vertex grids) or adjacent to it
    /// (cell-centered grids).
    pub fn is_boundary(&self, index: usize) -> bool {
        let [ix, iy] = self.multi_index(index);
        let edge = |i: usize| i == 0 || i == self.n - 1;
        match self.dim {
            1 => edge(ix),
            _ => edge(ix) || edge(iy),
        }
    }

    pub(crate) fn edges(&self) -> Vec<Edge> {
        let n = self.n;
        let h = self.h();
        let mut out = Vec::new();
        match self.dim {
            1 => {
                for i in 0..n - 1 {
                    out.push(Edge {
                        a: i,
                        b: i + 1,
                        axis: 0,
                        cross: 1.0,
                    });
                }
            }
            _ => {
                // Faces of the dual cell: half-length along the boundary on
                // vertex grids.
                let cross = |transverse: usize| match self.kind {
                    GridKind::Vertex if transverse == 0 || transverse == n - 1 => 0.5 * h,
                    _ => h,
                };
                for iy in 0..n {
                    for ix in 0..n - 1 {
                        let a = iy * n + ix;
                        out.push(Edge {
                            a,
                            b: a + 1,
                            axis: 0,
                            cross: cross(iy),
                        });
                    }
                }
                for iy in 0..n - 1 {
                    for ix in 0..n {
                        let a = iy * n + ix;
                        out.push(Edge {
                            a,
                            b: a + n,
                            axis: 1,
                            cross: cross(ix),
                        });
                    }
                }
            }
        }
        out
    }

    /// Boundary faces as `(node, axis, face measure)`. On vertex grids the
    /// face is the part of the boundary in the node's dual cell; on
    /// cell-centered grids it is the cell face on the boundary, half a mesh
    /// width away from the node.
    pub(crate) fn boundary_faces(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        let h = self.h();
        let mut out = Vec::new();
        match self.dim {
            1 => {
                out.push((0, 0, 1.0));
                out.push((n - 1, 0, 1.0));
            }
            _ => {
                let measure = |along: usize| match self.kind {
                    GridKind::Vertex if along == 0 || along == n - 1 => 0.5 * h,
                    _ => h,
                };
                for k in 0..n {
                    // x = 0 and x = L sides (normal along axis 0)
                    out.push((k * n, 0, measure(k)));
                    out.push((k * n + n - 1, 0, measure(k)));
                    // y = 0 and y = L sides (normal along axis 1)
                    out.push((k, 1, measure(k)));
                    out.push(((n - 1) * n + k, 1, measure(k)));
                }
            }
        }
        out
    }

    /// Samples a function of the node coordinates.
    pub fn sample(&self, f: impl Fn(&[f64; 2]) -> f64) -> Vec<f64> {
        (0..self.node_count()).map(|k| f(&self.coordinates(k))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_width_depends_on_kind() {
        let v = Grid::vertex_1d(65, 1.0).unwrap();
        let c = Grid::cell_1d(64, 1.0).unwrap();
        assert_eq!(v.h(), 1.0 / 64.0);
        assert_eq!(c.h(), 1.0 / 64.0);
        assert_eq!(v.coordinates(64)[0], 1.0);
        assert_eq!(c.coordinates(0)[0], 0.5 / 64.0);
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(Grid::vertex_1d(2, 1.0).is_err());
        assert!(Grid::new(3, 8, 1.0, GridKind::Vertex).is_err());
        assert!(Grid::cell_1d(8, 0.0).is_err());
    }

    #[test]
    fn weights_sum_to_volume() {
        for kind in [GridKind::Vertex, GridKind::CellCentered] {
            for dim in [1, 2] {
                let g = Grid::new(dim, 7, 2.0, kind).unwrap();
                let total: f64 = g.weights().iter().sum();
                assert!((total - g.volume()).abs() < 1e-12);
                assert_eq!(g.weights().len(), g.node_count());
            }
        }
    }

    #[test]
    fn row_major_indexing() {
        let g = Grid::new(2, 4, 1.0, GridKind::CellCentered).unwrap();
        assert_eq!(g.multi_index(6), [2, 1]);
        let c = g.coordinates(6);
        assert!((c[0] - 0.625).abs() < 1e-15 && (c[1] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn edge_and_face_counts() {
        let g = Grid::new(2, 5, 1.0, GridKind::Vertex).unwrap();
        assert_eq!(g.edges().len(), 2 * 5 * 4);
        let perimeter: f64 = g.boundary_faces().iter().map(|f| f.2).sum();
        assert!((perimeter - 4.0).abs() < 1e-12);
    }
}
