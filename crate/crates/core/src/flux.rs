//! Element-local postprocessing of the pressure into a discontinuous
//! bilinear potential `Ψ` whose normal flux `−κ∇Ψ·n` balances the source on
//! every free control volume.
//!
//! On each element the four test functions are the discontinuous corner
//! basis functions. Row `c` of the local system reads
//!
//! ```text
//! −Σ_{s ∋ c} |s| κ(m_s) ∇Ψ(m_s)·n_{s,c}
//!     = ⟨{κ∇p}·n, 1_c − φ_c⟩_∂τ + ∫_{Q_c} g − ∫_τ g φ_c + ∫_τ κ∇p·∇φ_c
//! ```
//!
//! where `s` runs over the two interior segments bounding subquadrant `Q_c`
//! and `m_s` is the segment midpoint. Rows and right-hand side each sum to
//! zero, so the system is singular with the constants as kernel; the last row
//! is replaced by `mean(Ψ) = mean(p)`. Summing row `ζ` over the elements
//! around a free vertex, the edge terms cancel pairwise (and vanish on `Γ_N`),
//! and the stiffness and load terms reduce to the global pressure equation,
//! leaving `∮_{∂ω_ζ} −κ∇Ψ·n = ∫_{ω_ζ} g` up to the pressure solve residual.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fields::{shape, shape_grad, subquadrant_integral, DgField, NodalField};
use crate::linalg::solve_dense;
use crate::mesh::{BoundaryTag, Point, StructuredMesh, EDGES, SEGMENTS};
use crate::pressure::PressureProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct ConservativeFlux {
    pub psi: DgField,
    /// `∫_s −κ∇Ψ·n` over interior segment `k` of each element, `n` pointing
    /// from `SEGMENTS[k].from` to `SEGMENTS[k].to`.
    pub segment_flux: Vec<[f64; 4]>,
    /// Outflow minus enclosed source per control volume; `None` on Dirichlet
    /// vertices, whose boundary flux is not part of the construction.
    pub cv_residual: Vec<Option<f64>>,
}

impl ConservativeFlux {
    /// Normal velocity on segment `k` of element `e`.
    pub fn face_velocity(&self, mesh: &StructuredMesh, e: usize, k: usize) -> f64 {
        let (_, len) = mesh.segment_geometry(e, k);
        self.segment_flux[e][k] / len
    }

    /// Normal velocities on all segments.
    pub fn face_velocities(&self, mesh: &StructuredMesh) -> Vec<[f64; 4]> {
        (0..mesh.n_elements())
            .map(|e| core::array::from_fn(|k| self.face_velocity(mesh, e, k)))
            .collect()
    }

    pub fn max_residual(&self) -> f64 {
        max_abs(&self.cv_residual)
    }
}

pub(crate) fn max_abs(r: &[Option<f64>]) -> f64 {
    r.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Same point as `(xi, eta)` of element `e`, in the reference coordinates of
/// neighbouring element `nb`.
fn local_in(mesh: &StructuredMesh, e: usize, xi: f64, eta: f64, nb: usize) -> (f64, f64) {
    let p = mesh.local_to_global(e, xi, eta);
    let o = mesh.element_origin(nb);
    ((p.x - o.x) / mesh.hx(), (p.y - o.y) / mesh.hy())
}

fn grad_of(mesh: &StructuredMesh, vals: [f64; 4], xi: f64, eta: f64) -> Point {
    let g = shape_grad(xi, eta, mesh.hx(), mesh.hy());
    let mut out = Point::default();
    for k in 0..4 {
        out.x += vals[k] * g[k].x;
        out.y += vals[k] * g[k].y;
    }
    out
}

/// `∫_s −κ∇u·n` on the four interior segments of `e` for corner values `u`.
fn segment_fluxes(
    problem: &PressureProblem,
    theta: &NodalField,
    e: usize,
    u: [f64; 4],
) -> Result<[f64; 4]> {
    let mesh = problem.mesh;
    let mut out = [0.0; 4];
    for (k, seg) in SEGMENTS.iter().enumerate() {
        let (xi, eta) = seg.local_mid;
        let (_, len) = mesh.segment_geometry(e, k);
        let kap = problem.kappa_at(theta, e, xi, eta)?;
        out[k] = -len * kap * grad_of(mesh, u, xi, eta).dot(seg.normal);
    }
    Ok(out)
}

/// Right-hand side of the local system on element `e`.
fn local_rhs(problem: &PressureProblem, theta: &NodalField, p: &NodalField, e: usize) -> Result<[f64; 4]> {
    let mesh = problem.mesh;
    let pe = p.corners(mesh, e);
    let k = problem.element_stiffness(theta, e)?;
    let f = problem.element_load(e);
    let mut rhs = [0.0; 4];
    for c in 0..4 {
        let kp: f64 = (0..4).map(|b| k[c][b] * pe[b]).sum();
        rhs[c] = subquadrant_integral(mesh, e, c, problem.source) - f[c] + kp;
    }
    for (ke, edge) in EDGES.iter().enumerate() {
        let neighbour = mesh.across_edge(e, ke);
        if let Err(side) = neighbour {
            if mesh.boundary().tag(side) == BoundaryTag::Neumann {
                continue;
            }
        }
        let half = if edge.vertical { 0.5 * mesh.hy() } else { 0.5 * mesh.hx() };
        for &(adj, (xi, eta)) in &edge.halves {
            let kap = problem.kappa_at(theta, e, xi, eta)?;
            let mut g = grad_of(mesh, pe, xi, eta);
            if let Ok(nb) = neighbour {
                let (nxi, neta) = local_in(mesh, e, xi, eta, nb);
                let gn = grad_of(mesh, p.corners(mesh, nb), nxi, neta);
                g = Point::new(0.5 * (g.x + gn.x), 0.5 * (g.y + gn.y));
            }
            let flux = half * kap * g.dot(edge.normal);
            let phi = shape(xi, eta);
            for c in 0..4 {
                let indicator = if c == adj { 1.0 } else { 0.0 };
                rhs[c] += flux * (indicator - phi[c]);
            }
        }
    }
    Ok(rhs)
}

/// Solves the local problems on every element and records the control-volume
/// balance of the resulting flux.
pub fn postprocess_flux(problem: &PressureProblem, pressure: &NodalField, theta: &NodalField) -> Result<ConservativeFlux> {
    let mesh = problem.mesh;
    pressure.check(mesh)?;
    theta.check(mesh)?;
    let mut psi = DgField::zeros(mesh);
    let mut segment_flux = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        // columns: flux contributions of unit corner values
        let mut a = [0.0; 16];
        for col in 0..4 {
            let mut unit = [0.0; 4];
            unit[col] = 1.0;
            let fl = segment_fluxes(problem, theta, e, unit)?;
            for (k, seg) in SEGMENTS.iter().enumerate() {
                a[seg.from * 4 + col] += fl[k];
                a[seg.to * 4 + col] -= fl[k];
            }
        }
        let mut b = local_rhs(problem, theta, pressure, e)?;
        let pe = pressure.corners(mesh, e);
        for col in 0..4 {
            a[12 + col] = 0.25;
        }
        b[3] = 0.25 * pe.iter().sum::<f64>();
        if !solve_dense(&mut a, &mut b, 4, 1e-13) {
            return Err(Error::ElementSingular { element: e });
        }
        psi.values[e] = b;
        segment_flux.push(segment_fluxes(problem, theta, e, b)?);
    }
    let cv_residual = cv_residuals(mesh, &segment_flux, problem.source);
    Ok(ConservativeFlux {
        psi,
        segment_flux,
        cv_residual,
    })
}

/// Outflow through the interior faces minus `∫_ω g`, per free control volume.
/// Faces on `Γ_N` carry zero flux.
pub fn cv_residuals(mesh: &StructuredMesh, segment_flux: &[[f64; 4]], g: &dyn Fn(Point) -> f64) -> Vec<Option<f64>> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for (e, fl) in segment_flux.iter().enumerate() {
        let c = mesh.element_corners(e);
        for (k, seg) in SEGMENTS.iter().enumerate() {
            out[c[seg.from]] += fl[k];
            out[c[seg.to]] -= fl[k];
        }
        for (corner, v) in c.into_iter().enumerate() {
            out[v] -= subquadrant_integral(mesh, e, corner, g);
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(v, r)| (!mesh.is_dirichlet(v)).then_some(r))
        .collect()
}

/// Control-volume residuals of the unprocessed finite element flux `−κ∇p·n`.
pub fn raw_fem_residuals(problem: &PressureProblem, pressure: &NodalField, theta: &NodalField) -> Result<Vec<Option<f64>>> {
    let mesh = problem.mesh;
    let fl = (0..mesh.n_elements())
        .map(|e| segment_fluxes(problem, theta, e, pressure.corners(mesh, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(cv_residuals(mesh, &fl, problem.source))
}

/// Largest `|residual|` over free control volumes.
pub fn max_residual(residuals: &[Option<f64>]) -> f64 {
    max_abs(residuals)
}
