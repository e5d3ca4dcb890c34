//! Continuous (`V_h`) and discontinuous (`V_{d,h}`) piecewise-bilinear fields
//! on a [`StructuredMesh`], plus the quadrature rules used across the crate.
//!
//! Quadrature exactness:
//! - [`Quadrature::gauss2`] (2x2 Gauss) integrates polynomials of degree <= 3
//!   in each variable exactly; used for element stiffness and, applied per
//!   subquadrant, for loads, control-volume source integrals and mass
//!   matrices.
//! - [`Quadrature::gauss3`] (3x3 Gauss), degree <= 5 per variable; used for
//!   L2 errors against analytic functions.
//! - Surface integrals on control-volume faces use the midpoint rule per
//!   segment, exact for integrands linear along the segment (the normal
//!   derivative of a bilinear function is).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::math;
use crate::mesh::{subquadrant_local, Point, StructuredMesh};

/// Values of the four bilinear shape functions at reference point `(xi, eta)`.
#[inline]
pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

/// Physical gradients of the four shape functions at `(xi, eta)`.
#[inline]
pub fn shape_grad(xi: f64, eta: f64, hx: f64, hy: f64) -> [Point; 4] {
    [
        Point::new(-(1.0 - eta) / hx, -(1.0 - xi) / hy),
        Point::new((1.0 - eta) / hx, -xi / hy),
        Point::new(eta / hx, xi / hy),
        Point::new(-eta / hx, (1.0 - xi) / hy),
    ]
}

#[inline]
fn combine(values: [f64; 4], weights: [f64; 4]) -> f64 {
    values[0] * weights[0] + values[1] * weights[1] + values[2] * weights[2] + values[3] * weights[3]
}

#[inline]
fn combine_grad(values: [f64; 4], grads: [Point; 4]) -> Point {
    let mut g = Point::default();
    for k in 0..4 {
        g.x += values[k] * grads[k].x;
        g.y += values[k] * grads[k].y;
    }
    g
}

/// Tensor-product rule on the reference square `[0,1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    fn tensor(nodes: &[f64], w: &[f64]) -> Self {
        let mut points = Vec::with_capacity(nodes.len() * nodes.len());
        let mut weights = Vec::with_capacity(nodes.len() * nodes.len());
        for (j, &y) in nodes.iter().enumerate() {
            for (i, &x) in nodes.iter().enumerate() {
                points.push((x, y));
                weights.push(w[i] * w[j]);
            }
        }
        Self { points, weights }
    }

    pub fn gauss2() -> Self {
        let a = 0.5 / math::sqrt(3.0);
        Self::tensor(&[0.5 - a, 0.5 + a], &[0.5, 0.5])
    }

    pub fn gauss3() -> Self {
        let a = 0.5 * math::sqrt(0.6);
        Self::tensor(&[0.5 - a, 0.5, 0.5 + a], &[5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
    }

    /// Maps the rule onto the reference sub-box `[x0,x1] x [y0,y1]`; weights
    /// are scaled by the sub-box area.
    pub fn on_box(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let (dx, dy) = (x1 - x0, y1 - y0);
        Self {
            points: self
                .points
                .iter()
                .map(|&(x, y)| (x0 + dx * x, y0 + dy * y))
                .collect(),
            weights: self.weights.iter().map(|w| w * dx * dy).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((f64, f64), f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Continuous piecewise-bilinear field: one value per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(mesh: &StructuredMesh) -> Self {
        Self {
            values: vec![0.0; mesh.n_vertices()],
        }
    }

    pub fn constant(mesh: &StructuredMesh, c: f64) -> Self {
        Self {
            values: vec![c; mesh.n_vertices()],
        }
    }

    pub fn from_fn(mesh: &StructuredMesh, f: impl Fn(Point) -> f64) -> Self {
        Self {
            values: mesh.vertices().map(f).collect(),
        }
    }

    pub fn from_values(mesh: &StructuredMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_vertices(),
                got: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, mesh: &StructuredMesh) -> Result<()> {
        if self.values.len() == mesh.n_vertices() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: mesh.n_vertices(),
                got: self.values.len(),
            })
        }
    }

    #[inline]
    pub fn corners(&self, mesh: &StructuredMesh, e: usize) -> [f64; 4] {
        mesh.element_corners(e).map(|v| self.values[v])
    }

    #[inline]
    pub fn eval_local(&self, mesh: &StructuredMesh, e: usize, xi: f64, eta: f64) -> f64 {
        combine(self.corners(mesh, e), shape(xi, eta))
    }

    #[inline]
    pub fn grad_local(&self, mesh: &StructuredMesh, e: usize, xi: f64, eta: f64) -> Point {
        combine_grad(self.corners(mesh, e), shape_grad(xi, eta, mesh.hx(), mesh.hy()))
    }

    pub fn eval(&self, mesh: &StructuredMesh, p: Point) -> Result<f64> {
        let (e, xi, eta) = mesh.locate(p)?;
        Ok(self.eval_local(mesh, e, xi, eta))
    }

    /// Gradient at `p`. On an element edge the gradient of element `hint` is
    /// used when given, else the lowest-id element containing `p`.
    pub fn grad(&self, mesh: &StructuredMesh, p: Point, hint: Option<usize>) -> Result<Point> {
        let (e, xi, eta) = locate_with_hint(mesh, p, hint)?;
        Ok(self.grad_local(mesh, e, xi, eta))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Clone with every value clamped into `[lo, hi]`.
    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v.clamp(lo, hi)).collect(),
        }
    }
}

fn locate_with_hint(mesh: &StructuredMesh, p: Point, hint: Option<usize>) -> Result<(usize, f64, f64)> {
    match hint {
        Some(e) => {
            if e >= mesh.n_elements() {
                return Err(Error::IndexOutOfRange {
                    index: e,
                    dim: mesh.n_elements(),
                });
            }
            let o = mesh.element_origin(e);
            let xi = (p.x - o.x) / mesh.hx();
            let eta = (p.y - o.y) / mesh.hy();
            let tol = 1e-10;
            if xi < -tol || xi > 1.0 + tol || eta < -tol || eta > 1.0 + tol {
                return Err(Error::OutOfDomain { x: p.x, y: p.y });
            }
            Ok((e, xi, eta))
        }
        None => mesh.locate(p),
    }
}

/// Discontinuous piecewise-bilinear field: four corner values per element.
#[derive(Debug, Clone, PartialEq)]
pub struct DgField {
    pub values: Vec<[f64; 4]>,
}

impl DgField {
    pub fn zeros(mesh: &StructuredMesh) -> Self {
        Self {
            values: vec![[0.0; 4]; mesh.n_elements()],
        }
    }

    /// Restriction of a continuous field to each element.
    pub fn from_nodal(mesh: &StructuredMesh, field: &NodalField) -> Self {
        Self {
            values: (0..mesh.n_elements()).map(|e| field.corners(mesh, e)).collect(),
        }
    }

    pub fn eval(&self, mesh: &StructuredMesh, p: Point, hint: Option<usize>) -> Result<f64> {
        let (e, xi, eta) = locate_with_hint(mesh, p, hint)?;
        Ok(combine(self.values[e], shape(xi, eta)))
    }

    pub fn grad(&self, mesh: &StructuredMesh, p: Point, hint: Option<usize>) -> Result<Point> {
        let (e, xi, eta) = locate_with_hint(mesh, p, hint)?;
        Ok(self.grad_local(mesh, e, xi, eta))
    }

    #[inline]
    pub fn grad_local(&self, mesh: &StructuredMesh, e: usize, xi: f64, eta: f64) -> Point {
        combine_grad(self.values[e], shape_grad(xi, eta, mesh.hx(), mesh.hy()))
    }

    /// Piecewise-constant interpolant on element `e`: subquadrant `k` carries
    /// the corner value at corner `k`.
    pub fn interp_const(&self, e: usize) -> [f64; 4] {
        self.values[e]
    }
}

/// `[∫_{Q_k ∩ τ} w φ_0, ..., ∫ w φ_3]` over subquadrant `corner` of element `e`,
/// by 2x2 Gauss on the subquadrant.
pub fn subquadrant_moments(
    mesh: &StructuredMesh,
    e: usize,
    corner: usize,
    weight: &dyn Fn(Point) -> f64,
) -> [f64; 4] {
    let (x0, x1, y0, y1) = subquadrant_local(corner);
    let area = mesh.element_area();
    let mut out = [0.0; 4];
    for ((xi, eta), w) in Quadrature::gauss2().on_box(x0, x1, y0, y1).iter() {
        let p = mesh.local_to_global(e, xi, eta);
        let wf = weight(p) * w * area;
        let n = shape(xi, eta);
        for k in 0..4 {
            out[k] += wf * n[k];
        }
    }
    out
}

/// `∫_{Q_k ∩ τ} f` over subquadrant `corner` of element `e` (2x2 Gauss).
pub fn subquadrant_integral(mesh: &StructuredMesh, e: usize, corner: usize, f: &dyn Fn(Point) -> f64) -> f64 {
    let (x0, x1, y0, y1) = subquadrant_local(corner);
    let area = mesh.element_area();
    Quadrature::gauss2()
        .on_box(x0, x1, y0, y1)
        .iter()
        .map(|((xi, eta), w)| f(mesh.local_to_global(e, xi, eta)) * w * area)
        .sum()
}

/// Control-volume mass matrix `M[ζ][k] = ∫_{ω_ζ} w φ_k`, or its row-lumped
/// diagonal version. With `w ≡ 1` the consistent matrix on a uniform grid has
/// the subquadrant pattern `(9, 3, 1, 3) / 64 · |τ|`.
pub fn cv_mass_matrix(mesh: &StructuredMesh, weight: &dyn Fn(Point) -> f64, lumped: bool) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(16 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let corners = mesh.element_corners(e);
        for c in 0..4 {
            let m = subquadrant_moments(mesh, e, c, weight);
            if lumped {
                triplets.push((corners[c], corners[c], m.iter().sum()));
            } else {
                for k in 0..4 {
                    triplets.push((corners[c], corners[k], m[k]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), triplets)
        .expect("mesh indices are in range")
}

/// `∫_{ω_ζ} f` for every control volume (2x2 Gauss per subquadrant).
pub fn cv_integrals(mesh: &StructuredMesh, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for e in 0..mesh.n_elements() {
        for (c, v) in mesh.element_corners(e).into_iter().enumerate() {
            out[v] += subquadrant_integral(mesh, e, c, f);
        }
    }
    out
}

/// `‖u‖_{L2}` of a nodal field (exact: 2x2 Gauss on bilinear squares).
pub fn l2_norm(mesh: &StructuredMesh, u: &NodalField) -> f64 {
    l2_norm_with(mesh, &Quadrature::gauss2(), |e, xi, eta| u.eval_local(mesh, e, xi, eta))
}

/// `‖a - b‖_{L2}` of two nodal fields.
pub fn l2_distance(mesh: &StructuredMesh, a: &NodalField, b: &NodalField) -> f64 {
    l2_norm_with(mesh, &Quadrature::gauss2(), |e, xi, eta| {
        a.eval_local(mesh, e, xi, eta) - b.eval_local(mesh, e, xi, eta)
    })
}

/// `‖u - f‖_{L2}` against an analytic function (3x3 Gauss).
pub fn l2_distance_fn(mesh: &StructuredMesh, u: &NodalField, f: &dyn Fn(Point) -> f64) -> f64 {
    l2_norm_with(mesh, &Quadrature::gauss3(), |e, xi, eta| {
        u.eval_local(mesh, e, xi, eta) - f(mesh.local_to_global(e, xi, eta))
    })
}

/// `‖f‖_{L2}` of an analytic function (3x3 Gauss on the mesh).
pub fn l2_norm_fn(mesh: &StructuredMesh, f: &dyn Fn(Point) -> f64) -> f64 {
    l2_norm_with(mesh, &Quadrature::gauss3(), |e, xi, eta| f(mesh.local_to_global(e, xi, eta)))
}

fn l2_norm_with(mesh: &StructuredMesh, q: &Quadrature, f: impl Fn(usize, f64, f64) -> f64) -> f64 {
    let area = mesh.element_area();
    let mut sum = 0.0;
    for e in 0..mesh.n_elements() {
        for ((xi, eta), w) in q.iter() {
            let v = f(e, xi, eta);
            sum += v * v * w * area;
        }
    }
    math::sqrt(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundarySpec;

    fn mesh(n: usize) -> StructuredMesh {
        StructuredMesh::new(n, n, 1.0, 1.0, BoundarySpec::all_dirichlet()).unwrap()
    }

    #[test]
    fn constant_and_linear_reproduction() {
        let m = StructuredMesh::new(4, 3, 2.0, 1.5, BoundarySpec::all_dirichlet()).unwrap();
        let one = NodalField::constant(&m, 1.0);
        let x = NodalField::from_fn(&m, |p| p.x);
        for p in [Point::new(0.3, 0.2), Point::new(1.99, 1.49), Point::new(1.0, 0.75)] {
            assert!((one.eval(&m, p).unwrap() - 1.0).abs() < 1e-14);
            assert!((x.eval(&m, p).unwrap() - p.x).abs() < 1e-13);
            let g = x.grad(&m, p, None).unwrap();
            assert!((g.x - 1.0).abs() < 1e-13 && g.y.abs() < 1e-13);
            let g0 = one.grad(&m, p, None).unwrap();
            assert!(g0.x.abs() < 1e-14 && g0.y.abs() < 1e-14);
        }
    }

    #[test]
    fn center_value_is_corner_mean() {
        let m = mesh(3);
        let u = NodalField::from_fn(&m, |p| libm::sin(7.0 * p.x) + p.y * p.y);
        for e in 0..m.n_elements() {
            let c = u.corners(&m, e);
            let mean = c.iter().sum::<f64>() / 4.0;
            assert!((u.eval_local(&m, e, 0.5, 0.5) - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn xy_gradient_at_center_of_unit_element() {
        let m = mesh(1);
        let u = NodalField::from_fn(&m, |p| p.x * p.y);
        let g = u.grad(&m, Point::new(0.5, 0.5), None).unwrap();
        assert_eq!((g.x, g.y), (0.5, 0.5));
    }

    #[test]
    fn out_of_domain() {
        let m = mesh(2);
        let u = NodalField::zeros(&m);
        assert!(matches!(u.eval(&m, Point::new(-0.1, 0.5)), Err(Error::OutOfDomain { .. })));
        let d = DgField::zeros(&m);
        assert!(d.eval(&m, Point::new(0.9, 0.9), Some(0)).is_err());
    }

    #[test]
    fn dg_hint_selects_side() {
        let m = mesh(2);
        let mut d = DgField::zeros(&m);
        d.values[0] = [1.0; 4];
        d.values[1] = [2.0; 4];
        let p = Point::new(0.5, 0.25);
        assert_eq!(d.eval(&m, p, None).unwrap(), 1.0);
        assert_eq!(d.eval(&m, p, Some(1)).unwrap(), 2.0);
    }

    #[test]
    fn interp_const_matches_corners_and_integral() {
        let m = mesh(2);
        let mut d = DgField::zeros(&m);
        d.values[3] = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(d.interp_const(3), [1.0, 2.0, 3.0, 4.0]);
        // each subquadrant has area |τ|/4
        let integral: f64 = d.interp_const(3).iter().map(|c| c * m.element_area() / 4.0).sum();
        assert!((integral - m.element_area() / 4.0 * 10.0).abs() < 1e-15);
        d.values[0] = [5.0; 4];
        assert_eq!(d.interp_const(0), [5.0; 4]);
    }

    #[test]
    fn consistent_mass_pattern() {
        let m = mesh(1);
        let mass = cv_mass_matrix(&m, &|_| 1.0, false);
        let a = m.element_area();
        let c = m.element_corners(0);
        assert!((mass.get(c[0], c[0]) - 9.0 / 64.0 * a).abs() < 1e-15);
        assert!((mass.get(c[0], c[1]) - 3.0 / 64.0 * a).abs() < 1e-15);
        assert!((mass.get(c[0], c[2]) - 1.0 / 64.0 * a).abs() < 1e-15);
        assert!((mass.get(c[0], c[3]) - 3.0 / 64.0 * a).abs() < 1e-15);
        let lumped = cv_mass_matrix(&m, &|_| 1.0, true);
        assert!((lumped.get(0, 0) - 0.25 * a).abs() < 1e-15);
    }

    #[test]
    fn l2_norms() {
        let m = mesh(4);
        let one = NodalField::constant(&m, 1.0);
        assert!((l2_norm(&m, &one) - 1.0).abs() < 1e-14);
        let x = NodalField::from_fn(&m, |p| p.x);
        // ∫ x^2 = 1/3
        assert!((l2_norm(&m, &x) - libm::sqrt(1.0 / 3.0)).abs() < 1e-14);
        assert!(l2_distance_fn(&m, &x, &|p| p.x) < 1e-14);
        assert!((l2_norm_fn(&m, &|p| p.x) - libm::sqrt(1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn gauss_rules_integrate_exactly() {
        // x^3 y^2 on [0,1]^2 = 1/12
        let g2: f64 = Quadrature::gauss2().iter().map(|((x, y), w)| x * x * x * y * y * w).sum();
        assert!((g2 - 1.0 / 12.0).abs() < 1e-15);
        let g3: f64 = Quadrature::gauss3().iter().map(|((x, y), w)| x.powi(5) * y.powi(4) * w).sum();
        assert!((g3 - 1.0 / 30.0).abs() < 1e-15);
    }
}
