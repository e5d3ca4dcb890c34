//! Uniform rectangular primal mesh, its dual control volumes and boundary
//! classification.
//!
//! Numbering is row-major and fixed: vertex `(i, j)` has id `j * (nx + 1) + i`,
//! element `(i, j)` has id `j * nx + i`. Element corners are listed
//! counter-clockwise starting at the bottom-left:
//!
//! ```text
//!   3 ----- 2
//!   |   |   |        each element is cut by the lines through its center
//!   |---+---|        into four subquadrants, one per corner; the two
//!   |   |   |        halves of each center line are the interior
//!   0 ----- 1        control-volume faces ("segments") of the element
//! ```

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Tag rule: one tag per side of the rectangle.
///
/// Corners belong to both adjacent sides; a vertex touching any Dirichlet
/// side is a Dirichlet vertex (the Dirichlet part of the boundary is closed).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySpec {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl BoundarySpec {
    pub const fn uniform(tag: BoundaryTag) -> Self {
        Self {
            left: tag,
            right: tag,
            bottom: tag,
            top: tag,
        }
    }

    pub const fn all_dirichlet() -> Self {
        Self::uniform(BoundaryTag::Dirichlet)
    }

    /// Dirichlet on `x = 0` and `x = Lx`, Neumann on the horizontal sides.
    pub const fn dirichlet_left_right() -> Self {
        Self {
            left: BoundaryTag::Dirichlet,
            right: BoundaryTag::Dirichlet,
            bottom: BoundaryTag::Neumann,
            top: BoundaryTag::Neumann,
        }
    }

    pub fn tag(&self, side: Side) -> BoundaryTag {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }

    pub fn has_dirichlet(&self) -> bool {
        [self.left, self.right, self.bottom, self.top].contains(&BoundaryTag::Dirichlet)
    }
}

/// Local coordinates of the element corners in the unit reference square.
pub const CORNER_LOCAL: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

/// One of the four interior control-volume faces of an element.
///
/// The face separates the subquadrants of corners `from` and `to`; `normal`
/// points from `from` into `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub from: usize,
    pub to: usize,
    /// Midpoint in reference coordinates.
    pub local_mid: (f64, f64),
    pub normal: Point,
    /// Whether the segment is vertical (length `hy / 2`) or horizontal (`hx / 2`).
    pub vertical: bool,
}

pub const SEGMENTS: [Segment; 4] = [
    Segment {
        from: 0,
        to: 1,
        local_mid: (0.5, 0.25),
        normal: Point::new(1.0, 0.0),
        vertical: true,
    },
    Segment {
        from: 1,
        to: 2,
        local_mid: (0.75, 0.5),
        normal: Point::new(0.0, 1.0),
        vertical: false,
    },
    Segment {
        from: 3,
        to: 2,
        local_mid: (0.5, 0.75),
        normal: Point::new(1.0, 0.0),
        vertical: true,
    },
    Segment {
        from: 0,
        to: 3,
        local_mid: (0.25, 0.5),
        normal: Point::new(0.0, 1.0),
        vertical: false,
    },
];

/// Edge `k` of an element: 0 bottom, 1 right, 2 top, 3 left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub normal: Point,
    /// The two half-edges, each as `(adjacent corner, local midpoint)`.
    pub halves: [(usize, (f64, f64)); 2],
    pub vertical: bool,
}

pub const EDGES: [Edge; 4] = [
    Edge {
        normal: Point::new(0.0, -1.0),
        halves: [(0, (0.25, 0.0)), (1, (0.75, 0.0))],
        vertical: false,
    },
    Edge {
        normal: Point::new(1.0, 0.0),
        halves: [(1, (1.0, 0.25)), (2, (1.0, 0.75))],
        vertical: true,
    },
    Edge {
        normal: Point::new(0.0, 1.0),
        halves: [(2, (0.75, 1.0)), (3, (0.25, 1.0))],
        vertical: false,
    },
    Edge {
        normal: Point::new(-1.0, 0.0),
        halves: [(3, (0.0, 0.75)), (0, (0.0, 0.25))],
        vertical: true,
    },
];

/// Reference-square box `[x0, x1] x [y0, y1]` of the subquadrant at corner `k`.
pub fn subquadrant_local(k: usize) -> (f64, f64, f64, f64) {
    match k {
        0 => (0.0, 0.5, 0.0, 0.5),
        1 => (0.5, 1.0, 0.0, 0.5),
        2 => (0.5, 1.0, 0.5, 1.0),
        _ => (0.0, 0.5, 0.5, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
    boundary: BoundarySpec,
    vertex_tags: Vec<Option<BoundaryTag>>,
}

impl StructuredMesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, boundary: BoundarySpec) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("element counts must be at least 1"));
        }
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::invalid("domain side lengths must be positive and finite"));
        }
        let mut vertex_tags = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let mut sides = [None; 4];
                if i == 0 {
                    sides[0] = Some(boundary.left);
                }
                if i == nx {
                    sides[1] = Some(boundary.right);
                }
                if j == 0 {
                    sides[2] = Some(boundary.bottom);
                }
                if j == ny {
                    sides[3] = Some(boundary.top);
                }
                let tag = if sides.contains(&Some(BoundaryTag::Dirichlet)) {
                    Some(BoundaryTag::Dirichlet)
                } else if sides.iter().any(Option::is_some) {
                    Some(BoundaryTag::Neumann)
                } else {
                    None
                };
                vertex_tags.push(tag);
            }
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
            boundary,
            vertex_tags,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn n_vertices(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn element_area(&self) -> f64 {
        self.hx * self.hy
    }

    #[inline]
    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn vertex_ij(&self, v: usize) -> (usize, usize) {
        (v % (self.nx + 1), v / (self.nx + 1))
    }

    #[inline]
    pub fn x_coord(&self, i: usize) -> f64 {
        self.lx * i as f64 / self.nx as f64
    }

    #[inline]
    pub fn y_coord(&self, j: usize) -> f64 {
        self.ly * j as f64 / self.ny as f64
    }

    pub fn vertex(&self, v: usize) -> Point {
        let (i, j) = self.vertex_ij(v);
        Point::new(self.x_coord(i), self.y_coord(j))
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.n_vertices()).map(move |v| self.vertex(v))
    }

    #[inline]
    pub fn element_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    /// Corner vertex ids of element `e`, counter-clockwise from bottom-left.
    #[inline]
    pub fn element_corners(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.element_ij(e);
        let v0 = self.vertex_index(i, j);
        let up = self.nx + 1;
        [v0, v0 + 1, v0 + 1 + up, v0 + up]
    }

    pub fn elements(&self) -> impl Iterator<Item = [usize; 4]> + '_ {
        (0..self.n_elements()).map(move |e| self.element_corners(e))
    }

    pub fn element_origin(&self, e: usize) -> Point {
        let (i, j) = self.element_ij(e);
        Point::new(self.x_coord(i), self.y_coord(j))
    }

    /// Physical point of reference coordinates `(xi, eta)` in element `e`.
    #[inline]
    pub fn local_to_global(&self, e: usize, xi: f64, eta: f64) -> Point {
        let o = self.element_origin(e);
        Point::new(o.x + xi * self.hx, o.y + eta * self.hy)
    }

    /// Element across edge `k` (see [`EDGES`]), or the boundary side.
    pub fn across_edge(&self, e: usize, k: usize) -> core::result::Result<usize, Side> {
        let (i, j) = self.element_ij(e);
        match k {
            0 if j == 0 => Err(Side::Bottom),
            0 => Ok(e - self.nx),
            1 if i + 1 == self.nx => Err(Side::Right),
            1 => Ok(e + 1),
            2 if j + 1 == self.ny => Err(Side::Top),
            2 => Ok(e + self.nx),
            _ if i == 0 => Err(Side::Left),
            _ => Ok(e - 1),
        }
    }

    /// Element containing `p` plus its reference coordinates.
    ///
    /// Points on an inter-element edge resolve to the lowest element id.
    pub fn locate(&self, p: Point) -> Result<(usize, f64, f64)> {
        let tol_x = 1e-12 * self.lx;
        let tol_y = 1e-12 * self.ly;
        if !(p.x >= -tol_x && p.x <= self.lx + tol_x && p.y >= -tol_y && p.y <= self.ly + tol_y) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y });
        }
        let i = Self::cell_of(p.x / self.hx, self.nx);
        let j = Self::cell_of(p.y / self.hy, self.ny);
        let e = self.element_index(i, j);
        let o = self.element_origin(e);
        Ok((e, (p.x - o.x) / self.hx, (p.y - o.y) / self.hy))
    }

    fn cell_of(s: f64, n: usize) -> usize {
        let c = libm::ceil(s) - 1.0;
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(n - 1)
        }
    }

    pub fn vertex_tag(&self, v: usize) -> Option<BoundaryTag> {
        self.vertex_tags[v]
    }

    pub fn is_dirichlet(&self, v: usize) -> bool {
        self.vertex_tags[v] == Some(BoundaryTag::Dirichlet)
    }

    /// Control-volume rectangle of vertex `v`, clipped to the domain.
    pub fn cv_rect(&self, v: usize) -> Rect {
        let (i, j) = self.vertex_ij(v);
        let x = self.x_coord(i);
        let y = self.y_coord(j);
        Rect {
            x0: if i == 0 { 0.0 } else { x - 0.5 * self.hx },
            x1: if i == self.nx { self.lx } else { x + 0.5 * self.hx },
            y0: if j == 0 { 0.0 } else { y - 0.5 * self.hy },
            y1: if j == self.ny { self.ly } else { y + 0.5 * self.hy },
        }
    }

    pub fn cv_area(&self, v: usize) -> f64 {
        let (i, j) = self.vertex_ij(v);
        let wx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
        wx * wy * self.hx * self.hy
    }

    /// Geometry of interior segment `k` of element `e`: `(midpoint, length)`.
    pub fn segment_geometry(&self, e: usize, k: usize) -> (Point, f64) {
        let s = &SEGMENTS[k];
        let mid = self.local_to_global(e, s.local_mid.0, s.local_mid.1);
        let len = if s.vertical { 0.5 * self.hy } else { 0.5 * self.hx };
        (mid, len)
    }

    /// Elements adjacent to vertex `v` paired with the vertex's local corner
    /// index in each, in increasing element order.
    pub fn vertex_elements(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (i, j) = self.vertex_ij(v);
        // (di, dj, corner): element (i - di, j - dj) sees v as `corner`
        const ADJ: [(usize, usize, usize); 4] = [(1, 1, 2), (0, 1, 3), (1, 0, 1), (0, 0, 0)];
        ADJ.iter().filter_map(move |&(di, dj, corner)| {
            if i < di || j < dj {
                return None;
            }
            let (ei, ej) = (i - di, j - dj);
            (ei < self.nx && ej < self.ny).then(|| (self.element_index(ei, ej), corner))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceNeighbor {
    Vertex(usize),
    Boundary(BoundaryTag),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvFace {
    pub midpoint: Point,
    /// Unit normal pointing out of the owning control volume.
    pub normal: Point,
    pub length: f64,
    /// Element the face lies in (on the boundary: the element it bounds).
    pub element: usize,
    pub neighbor: FaceNeighbor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlVolume {
    pub owner: usize,
    pub rect: Rect,
    pub faces: Vec<CvFace>,
}

/// Dual mesh: one control volume per vertex, Dirichlet vertices included.
pub fn control_volumes(mesh: &StructuredMesh) -> Vec<ControlVolume> {
    (0..mesh.n_vertices())
        .map(|v| control_volume(mesh, v))
        .collect()
}

pub fn control_volume(mesh: &StructuredMesh, v: usize) -> ControlVolume {
    let mut faces = Vec::with_capacity(8);
    let corners_of = |e: usize| mesh.element_corners(e);
    for (e, corner) in mesh.vertex_elements(v) {
        let corners = corners_of(e);
        for (k, seg) in SEGMENTS.iter().enumerate() {
            let (sign, other) = if seg.from == corner {
                (1.0, seg.to)
            } else if seg.to == corner {
                (-1.0, seg.from)
            } else {
                continue;
            };
            let (midpoint, length) = mesh.segment_geometry(e, k);
            faces.push(CvFace {
                midpoint,
                normal: Point::new(sign * seg.normal.x, sign * seg.normal.y),
                length,
                element: e,
                neighbor: FaceNeighbor::Vertex(corners[other]),
            });
        }
        for (k, edge) in EDGES.iter().enumerate() {
            let Err(side) = mesh.across_edge(e, k) else {
                continue;
            };
            for &(c, (xi, eta)) in &edge.halves {
                if c != corner {
                    continue;
                }
                let length = if edge.vertical { 0.5 * mesh.hy() } else { 0.5 * mesh.hx() };
                faces.push(CvFace {
                    midpoint: mesh.local_to_global(e, xi, eta),
                    normal: edge.normal,
                    length,
                    element: e,
                    neighbor: FaceNeighbor::Boundary(mesh.boundary().tag(side)),
                });
            }
        }
    }
    ControlVolume {
        owner: v,
        rect: mesh.cv_rect(v),
        faces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize, spec: BoundarySpec) -> StructuredMesh {
        StructuredMesh::new(n, n, 1.0, 1.0, spec).unwrap()
    }

    #[test]
    fn two_by_two_counts_and_areas() {
        let m = unit(2, BoundarySpec::all_dirichlet());
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_elements(), 4);
        assert_eq!(m.cv_area(0), 1.0 / 16.0);
        assert_eq!(m.cv_area(4), 0.25);
        let cv = control_volume(&m, 4);
        assert_eq!(cv.rect, Rect { x0: 0.25, x1: 0.75, y0: 0.25, y1: 0.75 });
        assert_eq!(cv.faces.len(), 8);
    }

    #[test]
    fn boundary_cv_is_clipped() {
        let m = unit(2, BoundarySpec::all_dirichlet());
        let corner = control_volume(&m, 0);
        assert_eq!(corner.rect, Rect { x0: 0.0, x1: 0.25, y0: 0.0, y1: 0.25 });
        let edge = control_volume(&m, 1);
        assert_eq!(edge.rect, Rect { x0: 0.25, x1: 0.75, y0: 0.0, y1: 0.25 });
        let boundary_faces = edge
            .faces
            .iter()
            .filter(|f| matches!(f.neighbor, FaceNeighbor::Boundary(_)))
            .count();
        assert_eq!(boundary_faces, 2);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(StructuredMesh::new(0, 2, 1.0, 1.0, BoundarySpec::all_dirichlet()).is_err());
        assert!(StructuredMesh::new(2, 2, -1.0, 1.0, BoundarySpec::all_dirichlet()).is_err());
        assert!(StructuredMesh::new(2, 2, 1.0, 0.0, BoundarySpec::all_dirichlet()).is_err());
    }

    #[test]
    fn example_two_tagging() {
        let m = unit(50, BoundarySpec::dirichlet_left_right());
        for v in 0..m.n_vertices() {
            let (i, j) = m.vertex_ij(v);
            let expected = if i == 0 || i == 50 {
                Some(BoundaryTag::Dirichlet)
            } else if j == 0 || j == 50 {
                Some(BoundaryTag::Neumann)
            } else {
                None
            };
            assert_eq!(m.vertex_tag(v), expected, "vertex {v}");
        }
    }

    #[test]
    fn example_one_mesh() {
        let m = unit(100, BoundarySpec::all_dirichlet());
        assert_eq!(m.hx(), 0.01);
        assert_eq!(m.n_vertices(), 101 * 101);
    }

    #[test]
    fn faces_close_and_pair() {
        let m = StructuredMesh::new(3, 2, 1.5, 0.7, BoundarySpec::dirichlet_left_right()).unwrap();
        let cvs = control_volumes(&m);
        let mut total = 0.0;
        for cv in &cvs {
            total += cv.rect.area();
            let (mut sx, mut sy) = (0.0, 0.0);
            for f in &cv.faces {
                sx += f.length * f.normal.x;
                sy += f.length * f.normal.y;
                if let FaceNeighbor::Vertex(n) = f.neighbor {
                    let twin = cvs[n]
                        .faces
                        .iter()
                        .find(|g| g.neighbor == FaceNeighbor::Vertex(cv.owner) && g.element == f.element)
                        .expect("paired face");
                    assert_eq!(twin.length, f.length);
                    assert_eq!(twin.normal.x, -f.normal.x);
                    assert_eq!(twin.normal.y, -f.normal.y);
                }
            }
            assert!(sx.abs() < 1e-14 && sy.abs() < 1e-14, "cv {} not closed", cv.owner);
        }
        assert!((total - m.area()).abs() <= 1e-13 * m.area());
    }

    #[test]
    fn locate_tie_breaks_low() {
        let m = unit(2, BoundarySpec::all_dirichlet());
        let (e, xi, _) = m.locate(Point::new(0.5, 0.25)).unwrap();
        assert_eq!(e, 0);
        assert_eq!(xi, 1.0);
        assert!(m.locate(Point::new(1.2, 0.5)).is_err());
        assert_eq!(m.locate(Point::new(1.0, 1.0)).unwrap().0, 3);
    }
}
