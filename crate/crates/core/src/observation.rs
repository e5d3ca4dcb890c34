//! Sparse measurement operator `P_ħ(u) = Σ γ_i(u) φ_{ħ,i}` on a coarse
//! lattice aligned with the fine mesh, and the time-indexed measurement store.
//!
//! Both halves are kept as sparse matrices: `Γ` (lattice × fine vertices)
//! applies the functionals, `Φ` (fine vertices × lattice) evaluates the coarse
//! bilinear reconstruction at fine vertices. Because the lattice is aligned,
//! the coarse bilinear function restricted to a fine element is bilinear, so
//! `Φ γ` represents `P_ħ u` exactly in the fine space.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fields::{subquadrant_integral, subquadrant_moments, NodalField};
use crate::linalg::SparseMatrix;
use crate::math;
use crate::mesh::{Point, StructuredMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FunctionalKind {
    /// `γ_i(u) = u(x_i)`.
    #[default]
    PointValue,
    /// `γ_i(u)` = mean of `u` over the lattice cell `[x_i ± ħ/2] × [y_i ± ħ/2] ∩ Ω`.
    CellAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrid {
    kind: FunctionalKind,
    hbar: f64,
    stride: (usize, usize),
    cells: (usize, usize),
    points: Vec<Point>,
    gamma: SparseMatrix,
    phi: SparseMatrix,
    projector: SparseMatrix,
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = math::round(r);
    (n >= 1.0 && math::abs(r - n) <= 1e-9 * r.max(1.0)).then_some(n as usize)
}

impl SparseGrid {
    /// Lattice with spacing `hbar` in both directions. `hbar` must be an
    /// integer multiple of both mesh spacings and divide both side lengths.
    pub fn new(mesh: &StructuredMesh, hbar: f64, kind: FunctionalKind) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Configuration(format!("sparse spacing {hbar} must be positive")));
        }
        if hbar < mesh.hx().min(mesh.hy()) * (1.0 - 1e-9) {
            return Err(Error::Configuration(format!(
                "sparse spacing {hbar} is finer than the mesh spacing"
            )));
        }
        let (Some(sx), Some(sy)) = (integer_ratio(hbar, mesh.hx()), integer_ratio(hbar, mesh.hy())) else {
            return Err(Error::Configuration(format!(
                "sparse spacing {hbar} is not an integer multiple of the mesh spacing"
            )));
        };
        if !mesh.nx().is_multiple_of(sx) || !mesh.ny().is_multiple_of(sy) {
            return Err(Error::Configuration(format!(
                "sparse spacing {hbar} does not divide the domain"
            )));
        }
        let cells = (mesh.nx() / sx, mesh.ny() / sy);
        let nl = (cells.0 + 1) * (cells.1 + 1);
        let lattice_vertex = |li: usize, lj: usize| mesh.vertex_index(li * sx, lj * sy);
        let mut points = Vec::with_capacity(nl);
        for lj in 0..=cells.1 {
            for li in 0..=cells.0 {
                points.push(mesh.vertex(lattice_vertex(li, lj)));
            }
        }

        let gamma_t = match kind {
            FunctionalKind::PointValue => (0..nl)
                .map(|l| (l, lattice_vertex(l % (cells.0 + 1), l / (cells.0 + 1)), 1.0))
                .collect(),
            FunctionalKind::CellAverage => cell_average_rows(mesh, &points, hbar),
        };
        let gamma = SparseMatrix::from_triplets(nl, mesh.n_vertices(), gamma_t)?;

        let mut phi_t = Vec::with_capacity(4 * mesh.n_vertices());
        for v in 0..mesh.n_vertices() {
            let (i, j) = mesh.vertex_ij(v);
            let ci = (i / sx).min(cells.0 - 1);
            let cj = (j / sy).min(cells.1 - 1);
            let xi = (i - ci * sx) as f64 / sx as f64;
            let eta = (j - cj * sy) as f64 / sy as f64;
            let w = crate::fields::shape(xi, eta);
            let c = [
                cj * (cells.0 + 1) + ci,
                cj * (cells.0 + 1) + ci + 1,
                (cj + 1) * (cells.0 + 1) + ci + 1,
                (cj + 1) * (cells.0 + 1) + ci,
            ];
            for k in 0..4 {
                if w[k] != 0.0 {
                    phi_t.push((v, c[k], w[k]));
                }
            }
        }
        let phi = SparseMatrix::from_triplets(mesh.n_vertices(), nl, phi_t)?;
        let projector = phi.matmul(&gamma)?;
        Ok(Self {
            kind,
            hbar,
            stride: (sx, sy),
            cells,
            points,
            gamma,
            phi,
            projector,
        })
    }

    pub fn kind(&self) -> FunctionalKind {
        self.kind
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Mesh cells per lattice cell along each axis.
    pub fn stride(&self) -> (usize, usize) {
        self.stride
    }

    /// Number of lattice cells along each axis.
    pub fn cells(&self) -> (usize, usize) {
        self.cells
    }

    /// Number of measurement points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// `Γ`: measurement functionals as rows over fine vertex values.
    pub fn functionals(&self) -> &SparseMatrix {
        &self.gamma
    }

    /// `Φ`: coarse basis functions sampled at fine vertices.
    pub fn interpolation(&self) -> &SparseMatrix {
        &self.phi
    }

    /// `Φ Γ`, the matrix of `u ↦ P_ħ u` on fine vertex values.
    pub fn projector(&self) -> &SparseMatrix {
        &self.projector
    }

    fn check(&self, len: usize) -> Result<()> {
        if len == self.phi.n_rows() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.phi.n_rows(),
                got: len,
            })
        }
    }

    /// Measurement vector `γ(u)`.
    pub fn sample(&self, u: &NodalField) -> Result<Vec<f64>> {
        self.check(u.len())?;
        Ok(self.gamma.matvec(&u.values))
    }

    /// Measurement vector of an analytic field.
    pub fn sample_fn(&self, mesh: &StructuredMesh, f: &dyn Fn(Point) -> f64) -> Result<Vec<f64>> {
        self.check(mesh.n_vertices())?;
        Ok(match self.kind {
            FunctionalKind::PointValue => self.points.iter().map(|&p| f(p)).collect(),
            FunctionalKind::CellAverage => self
                .points
                .iter()
                .map(|&p| {
                    let (elems, area) = cell_pieces(mesh, p, self.hbar);
                    elems.iter().map(|&(e, c)| subquadrant_integral(mesh, e, c, f)).sum::<f64>() / area
                })
                .collect(),
        })
    }

    /// Coarse bilinear reconstruction of a measurement vector at fine vertices.
    pub fn reconstruct(&self, gamma: &[f64]) -> Result<NodalField> {
        if gamma.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: gamma.len(),
            });
        }
        Ok(NodalField {
            values: self.phi.matvec(gamma),
        })
    }

    /// `P_ħ u` on the fine mesh.
    pub fn apply_ph(&self, u: &NodalField) -> Result<NodalField> {
        self.reconstruct(&self.sample(u)?)
    }
}

/// Empirical `c₀` in `‖P_ħu − u‖ ≤ c₀ħ²|u|₂` from `u = sin(πx/L₁)sin(πy/L₂)`:
/// geometric mean of `‖P_ħu − u‖ / (ħ²|u|₂)` over the admissible spacings.
pub fn interpolation_constant(mesh: &StructuredMesh, kind: FunctionalKind, hbars: &[f64]) -> Result<f64> {
    let (lx, ly) = (mesh.lx(), mesh.ly());
    let pi = math::PI;
    let u = move |p: Point| math::sin(pi * p.x / lx) * math::sin(pi * p.y / ly);
    let nodal = NodalField::from_fn(mesh, u);
    let norm = crate::fields::l2_norm_fn(mesh, &u);
    let (a, b) = ((pi / lx) * (pi / lx), (pi / ly) * (pi / ly));
    let semi = math::sqrt(a * a + 2.0 * a * b + b * b) * norm;
    let mut logs = Vec::new();
    for &h in hbars {
        let Ok(grid) = SparseGrid::new(mesh, h, kind) else {
            continue;
        };
        let err = crate::fields::l2_distance_fn(mesh, &grid.apply_ph(&nodal)?, &u);
        logs.push(math::ln(err / (h * h * semi)));
    }
    if logs.is_empty() {
        return Err(Error::Configuration("no admissible sparse spacing".into()));
    }
    Ok(math::exp(logs.iter().sum::<f64>() / logs.len() as f64))
}

/// Fine subquadrants `(element, corner)` that tile the lattice cell around
/// `p`, and the cell area.
fn cell_pieces(mesh: &StructuredMesh, p: Point, hbar: f64) -> (Vec<(usize, usize)>, f64) {
    let x0 = (p.x - 0.5 * hbar).max(0.0);
    let x1 = (p.x + 0.5 * hbar).min(mesh.lx());
    let y0 = (p.y - 0.5 * hbar).max(0.0);
    let y1 = (p.y + 0.5 * hbar).min(mesh.ly());
    let i0 = math::floor(x0 / mesh.hx() + 1e-9) as usize;
    let i1 = ((math::floor(x1 / mesh.hx() - 1e-9) as usize) + 1).min(mesh.nx());
    let j0 = math::floor(y0 / mesh.hy() + 1e-9) as usize;
    let j1 = ((math::floor(y1 / mesh.hy() - 1e-9) as usize) + 1).min(mesh.ny());
    let mut pieces = Vec::new();
    for j in j0..j1 {
        for i in i0..i1 {
            let e = mesh.element_index(i, j);
            let o = mesh.element_origin(e);
            for c in 0..4 {
                let (a0, a1, b0, b1) = crate::mesh::subquadrant_local(c);
                let cx = o.x + 0.5 * (a0 + a1) * mesh.hx();
                let cy = o.y + 0.5 * (b0 + b1) * mesh.hy();
                if cx > x0 && cx < x1 && cy > y0 && cy < y1 {
                    pieces.push((e, c));
                }
            }
        }
    }
    (pieces, (x1 - x0) * (y1 - y0))
}

fn cell_average_rows(mesh: &StructuredMesh, points: &[Point], hbar: f64) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    for (l, &p) in points.iter().enumerate() {
        let (pieces, area) = cell_pieces(mesh, p, hbar);
        for (e, c) in pieces {
            let m = subquadrant_moments(mesh, e, c, &|_| 1.0);
            for (k, v) in mesh.element_corners(e).into_iter().enumerate() {
                t.push((l, v, m[k] / area));
            }
        }
    }
    t
}

/// Measurements at coarse times, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationStream {
    width: Option<usize>,
    records: Vec<(f64, Vec<f64>)>,
}

impl ObservationStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, gamma: Vec<f64>) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::invalid("observation time must be finite"));
        }
        if let Some((last, _)) = self.records.last() {
            if t <= *last {
                return Err(Error::invalid(format!("observation time {t} does not increase")));
            }
        }
        match self.width {
            Some(w) if w != gamma.len() => {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    got: gamma.len(),
                })
            }
            _ => self.width = Some(gamma.len()),
        }
        self.records.push((t, gamma));
        Ok(())
    }

    pub fn records(&self) -> &[(f64, Vec<f64>)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Componentwise linear interpolation between the bracketing records.
    pub fn interpolate_in_time(&self, s: f64) -> Result<Vec<f64>> {
        let (first, last) = match (self.records.first(), self.records.last()) {
            (Some(f), Some(l)) => (f.0, l.0),
            _ => return Err(Error::ObservationGap { time: s }),
        };
        let tol = 1e-12 * (1.0f64).max(math::abs(first)).max(math::abs(last));
        if s < first - tol || s > last + tol {
            return Err(Error::ObservationGap { time: s });
        }
        let k = self.records.partition_point(|(t, _)| *t < s);
        if k < self.records.len() && math::abs(self.records[k].0 - s) <= tol {
            return Ok(self.records[k].1.clone());
        }
        if k == 0 {
            return Ok(self.records[0].1.clone());
        }
        if k == self.records.len() {
            return Ok(self.records[k - 1].1.clone());
        }
        if k > 0 && math::abs(self.records[k - 1].0 - s) <= tol {
            return Ok(self.records[k - 1].1.clone());
        }
        let (t0, g0) = &self.records[k - 1];
        let (t1, g1) = &self.records[k];
        let w = (s - t0) / (t1 - t0);
        Ok(g0.iter().zip(g1).map(|(a, b)| (1.0 - w) * a + w * b).collect())
    }
}
