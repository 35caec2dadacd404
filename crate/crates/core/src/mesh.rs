//! Structured quadrilateral mesh storage and geometric primitives.
//!
//! Nodes are indexed row-major, `node(i, j) = j * (nx + 1) + i`, cells
//! likewise with `cell(i, j) = j * nx + i`. Each cell lists its nodes
//! counterclockwise starting at the lower-left corner:
//!
//! ```text
//!   3 ---- 2
//!   |      |
//!   0 ---- 1
//! ```
//!
//! Topology is shared behind an `Arc` so that staged copies of the
//! coordinate array (RK stages, snapshots) do not duplicate connectivity.

use std::io::{BufRead, Write};
use std::sync::Arc;

use arrayvec::ArrayVec;

use crate::{Error, Result, Vec2};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, lo, hi)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.x0, self.x1, self.y0, self.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x1 <= self.x0 || self.y1 <= self.y0 {
            return Err(Error::InvalidConfig(format!(
                "degenerate domain [{}, {}] x [{}, {}]",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    /// Unit tangent of the boundary line this side lies on.
    pub fn tangent(self) -> Vec2 {
        match self {
            Side::Left | Side::Right => Vec2::new(0.0, 1.0),
            Side::Bottom | Side::Top => Vec2::new(1.0, 0.0),
        }
    }
}

/// Boundary classification of a node, fixed at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Edge(Side),
    /// Vertical side first (`Left`/`Right`), then horizontal (`Bottom`/`Top`).
    Corner(Side, Side),
}

impl NodeKind {
    pub fn is_interior(self) -> bool {
        matches!(self, NodeKind::Interior)
    }
}

/// Length and unit normal of a directed edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeGeom {
    pub length: f64,
    pub normal: Vec2,
}

/// Length and left-hand unit normal of the edge from `from` to `to`.
///
/// The normal is the edge direction rotated 90 degrees counterclockwise, so
/// reversing the endpoints negates it.
pub fn edge_geometry(from: Vec2, to: Vec2) -> Result<EdgeGeom> {
    let e = to - from;
    let length = e.norm();
    if length == 0.0 || !length.is_finite() {
        return Err(Error::DegenerateEdge { at: from });
    }
    Ok(EdgeGeom {
        length,
        normal: e.perp() * (1.0 / length),
    })
}

/// Signed shoelace area of a quadrilateral; positive when counterclockwise.
#[inline]
pub fn quad_area(p: &[Vec2; 4]) -> f64 {
    // Diagonal form: half the cross product of the two diagonals.
    0.5 * (p[2] - p[0]).cross(p[3] - p[1])
}

#[derive(Debug)]
struct Topology {
    nx: usize,
    ny: usize,
    domain: Rect,
    cells: Vec<[usize; 4]>,
    neighbors: Vec<ArrayVec<usize, 4>>,
    kinds: Vec<NodeKind>,
}

/// Structured quadrilateral mesh: immutable topology plus movable nodes.
#[derive(Clone, Debug)]
pub struct QuadMesh {
    topo: Arc<Topology>,
    coords: Vec<Vec2>,
}

impl QuadMesh {
    /// Uniform `nx` by `ny` grid covering `domain`.
    pub fn build_uniform(domain: Rect, nx: usize, ny: usize) -> Result<Self> {
        domain.validate()?;
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidConfig(format!(
                "cell counts must be positive, got nx={nx}, ny={ny}"
            )));
        }
        let stride = nx + 1;
        let node = |i: usize, j: usize| j * stride + i;

        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;
        let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut kinds = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut neighbors = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            // Pin the last row/column to the domain edge instead of
            // accumulating i * h, which may overshoot by an ulp.
            let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * hy };
            for i in 0..=nx {
                let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx };
                coords.push(Vec2::new(x, y));

                let vertical = match i {
                    0 => Some(Side::Left),
                    _ if i == nx => Some(Side::Right),
                    _ => None,
                };
                let horizontal = match j {
                    0 => Some(Side::Bottom),
                    _ if j == ny => Some(Side::Top),
                    _ => None,
                };
                kinds.push(match (vertical, horizontal) {
                    (None, None) => NodeKind::Interior,
                    (Some(s), None) | (None, Some(s)) => NodeKind::Edge(s),
                    (Some(v), Some(h)) => NodeKind::Corner(v, h),
                });

                // Counterclockwise: east, north, west, south.
                let mut adj = ArrayVec::new();
                if i < nx {
                    adj.push(node(i + 1, j));
                }
                if j < ny {
                    adj.push(node(i, j + 1));
                }
                if i > 0 {
                    adj.push(node(i - 1, j));
                }
                if j > 0 {
                    adj.push(node(i, j - 1));
                }
                neighbors.push(adj);
            }
        }

        let mut cells = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                cells.push([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
            }
        }

        Ok(Self {
            topo: Arc::new(Topology {
                nx,
                ny,
                domain,
                cells,
                neighbors,
                kinds,
            }),
            coords,
        })
    }

    pub fn nx(&self) -> usize {
        self.topo.nx
    }

    pub fn ny(&self) -> usize {
        self.topo.ny
    }

    /// The rectangle the mesh was built on.
    pub fn domain(&self) -> Rect {
        self.topo.domain
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn cell_count(&self) -> usize {
        self.topo.cells.len()
    }

    /// Initial spacing along x, `(x1 - x0) / nx`.
    pub fn spacing(&self) -> f64 {
        self.topo.domain.width() / self.topo.nx as f64
    }

    pub fn coords(&self) -> &[Vec2] {
        &self.coords
    }

    #[inline]
    pub fn coord(&self, q: usize) -> Vec2 {
        self.coords[q]
    }

    /// Same topology with a new coordinate array.
    pub fn with_coords(&self, coords: Vec<Vec2>) -> Result<Self> {
        if coords.len() != self.coords.len() {
            return Err(Error::TopologyMismatch(format!(
                "expected {} node coordinates, got {}",
                self.coords.len(),
                coords.len()
            )));
        }
        Ok(Self {
            topo: Arc::clone(&self.topo),
            coords,
        })
    }

    pub fn same_topology(&self, other: &QuadMesh) -> bool {
        Arc::ptr_eq(&self.topo, &other.topo)
            || (self.topo.nx == other.topo.nx && self.topo.ny == other.topo.ny)
    }

    pub fn node_neighbors(&self, q: usize) -> Result<&[usize]> {
        self.topo
            .neighbors
            .get(q)
            .map(|a| a.as_slice())
            .ok_or(Error::IndexOutOfRange {
                what: "node",
                index: q,
                len: self.node_count(),
            })
    }

    pub fn cell_nodes(&self, c: usize) -> Result<&[usize; 4]> {
        self.topo.cells.get(c).ok_or(Error::IndexOutOfRange {
            what: "cell",
            index: c,
            len: self.cell_count(),
        })
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.topo.cells
    }

    pub fn node_kind(&self, q: usize) -> NodeKind {
        self.topo.kinds[q]
    }

    #[inline]
    pub fn cell_vertices(&self, c: usize) -> [Vec2; 4] {
        self.topo.cells[c].map(|q| self.coords[q])
    }

    /// Signed area of cell `c`. Negative means the cell is inverted.
    ///
    /// Panics if `c` is out of range.
    #[inline]
    pub fn cell_area(&self, c: usize) -> f64 {
        quad_area(&self.cell_vertices(c))
    }

    pub fn cell_areas(&self) -> Vec<f64> {
        (0..self.cell_count()).map(|c| self.cell_area(c)).collect()
    }

    /// Largest distance between any two of the cell's four nodes.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let p = self.cell_vertices(c);
        let mut d: f64 = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                d = d.max((p[b] - p[a]).norm());
            }
        }
        d
    }

    /// Every edge once, as `(q, q')` with `q < q'`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.topo
            .neighbors
            .iter()
            .enumerate()
            .flat_map(|(q, adj)| adj.iter().filter(move |&&p| p > q).map(move |&p| (q, p)))
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges()
            .map(|(a, b)| (self.coords[b] - self.coords[a]).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Fails with [`Error::Tangled`] on the first cell with nonpositive area.
    pub fn check_untangled(&self, stage: Option<usize>) -> Result<()> {
        for c in 0..self.cell_count() {
            let area = self.cell_area(c);
            if !(area > 0.0) {
                return Err(Error::Tangled { cell: c, area, stage });
            }
        }
        Ok(())
    }

    /// Writes the `POINTS` / `CELLS` text snapshot.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "POINTS {}", self.node_count())?;
        for p in &self.coords {
            writeln!(w, "{:.16e} {:.16e}", p.x, p.y)?;
        }
        writeln!(w, "CELLS {}", self.cell_count())?;
        for c in &self.topo.cells {
            writeln!(w, "{} {} {} {}", c[0], c[1], c[2], c[3])?;
        }
        Ok(())
    }
}

/// Contents of a parsed snapshot file.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub points: Vec<Vec2>,
    pub cells: Vec<[usize; 4]>,
}

/// Parses the text produced by [`QuadMesh::write_snapshot`].
pub fn read_snapshot<R: BufRead>(r: R) -> Result<Snapshot> {
    let bad = |msg: String| Error::InvalidConfig(format!("snapshot: {msg}"));
    let mut lines = r.lines().map(|l| l.map_err(|e| bad(e.to_string())));
    let header = |name: &str, lines: &mut dyn Iterator<Item = Result<String>>| -> Result<usize> {
        let line = lines.next().ok_or_else(|| bad(format!("missing {name} header")))??;
        let mut it = line.split_whitespace();
        match (it.next(), it.next().map(str::parse::<usize>)) {
            (Some(tag), Some(Ok(n))) if tag == name => Ok(n),
            _ => Err(bad(format!("expected '{name} <count>', got '{line}'"))),
        }
    };

    let n = header("POINTS", &mut lines)?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("truncated POINTS".into()))??;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad coordinate '{t}'"))))
            .collect::<Result<_>>()?;
        if v.len() != 2 {
            return Err(bad(format!("expected 2 coordinates, got '{line}'")));
        }
        points.push(Vec2::new(v[0], v[1]));
    }

    let m = header("CELLS", &mut lines)?;
    let mut cells = Vec::with_capacity(m);
    for _ in 0..m {
        let line = lines.next().ok_or_else(|| bad("truncated CELLS".into()))??;
        let v: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad node index '{t}'"))))
            .collect::<Result<_>>()?;
        let quad: [usize; 4] = v
            .try_into()
            .map_err(|_| bad(format!("expected 4 node indices, got '{line}'")))?;
        if let Some(&q) = quad.iter().find(|&&q| q >= n) {
            return Err(bad(format!("node index {q} exceeds point count {n}")));
        }
        cells.push(quad);
    }
    Ok(Snapshot { points, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(nx: usize, ny: usize) -> QuadMesh {
        QuadMesh::build_uniform(Rect::square(0.0, 1.0), nx, ny).unwrap()
    }

    #[test]
    fn single_cell_unit_square() {
        let m = unit(1, 1);
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.cell_count(), 1);
        assert_eq!(m.cell_area(0), 1.0);
    }

    #[test]
    fn two_by_two_counts_and_neighbors() {
        let m = unit(2, 2);
        assert_eq!(m.node_count(), 9);
        assert_eq!(m.cell_count(), 4);
        assert_eq!(m.node_neighbors(4).unwrap().len(), 4);
        for corner in [0, 2, 6, 8] {
            assert_eq!(m.node_neighbors(corner).unwrap().len(), 2);
            assert!(matches!(m.node_kind(corner), NodeKind::Corner(..)));
        }
        for side in [1, 3, 5, 7] {
            assert_eq!(m.node_neighbors(side).unwrap().len(), 3);
        }
        assert_eq!(m.cell_nodes(3).unwrap().len(), 4);
        assert!(m.node_neighbors(9).is_err());
        assert!(m.cell_nodes(4).is_err());
    }

    #[test]
    fn vortex_coarse_spacing() {
        let m = QuadMesh::build_uniform(Rect::square(-10.0, 10.0), 50, 50).unwrap();
        assert_relative_eq!(m.spacing(), 0.4, max_relative = 1e-15);
        assert_relative_eq!(m.min_edge_length(), 0.4, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(QuadMesh::build_uniform(Rect::square(0.0, 1.0), 0, 3).is_err());
        assert!(QuadMesh::build_uniform(Rect::square(0.0, 1.0), 3, 0).is_err());
        assert!(QuadMesh::build_uniform(Rect::new(1.0, 1.0, 0.0, 1.0), 2, 2).is_err());
        assert!(QuadMesh::build_uniform(Rect::new(0.0, 1.0, 2.0, 1.0), 2, 2).is_err());
    }

    #[test]
    fn shoelace_examples() {
        let v = |x, y| Vec2::new(x, y);
        assert_eq!(quad_area(&[v(0., 0.), v(1., 0.), v(1., 1.), v(0., 1.)]), 1.0);
        assert_eq!(quad_area(&[v(0., 0.), v(2., 0.), v(2., 1.), v(0., 1.)]), 2.0);
        // Hand shoelace: 1/2 |0 + 1.1 + 1.19 + 0| = 1.145
        let a = quad_area(&[v(0., 0.), v(1., 0.), v(1.2, 1.1), v(-0.1, 0.9)]);
        assert_relative_eq!(a, 1.145, max_relative = 1e-14);
        // Clockwise ordering flips the sign.
        assert_eq!(quad_area(&[v(0., 0.), v(0., 1.), v(1., 1.), v(1., 0.)]), -1.0);
    }

    #[test]
    fn edge_geometry_examples() {
        let o = Vec2::ZERO;
        let g = edge_geometry(o, Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!((g.length, g.normal), (1.0, Vec2::new(0.0, 1.0)));
        let g = edge_geometry(o, Vec2::new(0.0, 2.0)).unwrap();
        assert_eq!((g.length, g.normal), (2.0, Vec2::new(-1.0, 0.0)));
        let g = edge_geometry(o, Vec2::new(3.0, 4.0)).unwrap();
        assert_eq!(g.length, 5.0);
        assert_relative_eq!(g.normal.x, -0.8, max_relative = 1e-15);
        assert_relative_eq!(g.normal.y, 0.6, max_relative = 1e-15);
        assert!(matches!(
            edge_geometry(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)),
            Err(Error::DegenerateEdge { .. })
        ));
    }

    #[test]
    fn diameters() {
        assert_relative_eq!(unit(1, 1).cell_diameter(0), 2f64.sqrt(), max_relative = 1e-15);
        let r = QuadMesh::build_uniform(Rect::new(0.0, 2.0, 0.0, 1.0), 1, 1).unwrap();
        assert_relative_eq!(r.cell_diameter(0), 5f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn dyadic_cells_have_exact_area() {
        let m = unit(8, 16);
        for c in 0..m.cell_count() {
            assert_eq!(m.cell_area(c), 1.0 / 128.0);
        }
    }

    #[test]
    fn topology_invariants() {
        let m = QuadMesh::build_uniform(Rect::new(-1.0, 2.0, 0.5, 1.5), 7, 5).unwrap();
        assert_eq!(m.node_count(), 8 * 6);
        assert_eq!(m.cell_count(), 35);
        for q in 0..m.node_count() {
            let adj = m.node_neighbors(q).unwrap();
            let expected = match m.node_kind(q) {
                NodeKind::Interior => 4,
                NodeKind::Edge(_) => 3,
                NodeKind::Corner(..) => 2,
            };
            assert_eq!(adj.len(), expected);
            for &p in adj {
                assert!(m.node_neighbors(p).unwrap().contains(&q));
            }
        }
        assert!(m.cell_areas().iter().all(|&a| a > 0.0));
        let total: f64 = m.cell_areas().iter().sum();
        assert_relative_eq!(total, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn shared_edge_normals_are_negated() {
        let m = unit(3, 3);
        for (a, b) in m.edges() {
            let fwd = edge_geometry(m.coord(a), m.coord(b)).unwrap();
            let rev = edge_geometry(m.coord(b), m.coord(a)).unwrap();
            assert_eq!(fwd.normal, -rev.normal);
            assert_eq!(fwd.length, rev.length);
        }
        assert_eq!(m.edges().count(), 2 * 3 * 4);
    }

    #[test]
    fn snapshot_round_trip() {
        let m = QuadMesh::build_uniform(Rect::square(-10.0, 10.0), 3, 2).unwrap();
        let mut buf = Vec::new();
        m.write_snapshot(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("POINTS 12\n"));
        assert!(text.contains("CELLS 6\n"));
        let snap = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(snap.points, m.coords());
        assert_eq!(snap.cells, m.cells());
    }

    #[test]
    fn snapshot_rejects_garbage() {
        assert!(read_snapshot("POINTS 1\n0 0\nCELLS 1\n0 0 0 5\n".as_bytes()).is_err());
        assert!(read_snapshot("POINTS 2\n0 0\n".as_bytes()).is_err());
        assert!(read_snapshot("NODES 0\n".as_bytes()).is_err());
    }
}
