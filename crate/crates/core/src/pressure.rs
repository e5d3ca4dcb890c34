//! Global pressure problem `⟨κ(θ̂)∇p, ∇φ⟩ = ⟨g, φ⟩` on the continuous bilinear
//! space, with Dirichlet values on `Γ_D` and zero flux on `Γ_N`.
//!
//! The element stiffness and load defined here are reused verbatim by the flux
//! postprocess; local conservation depends on both sides using the same
//! quadrature.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fields::{shape_grad, subquadrant_moments, NodalField, Quadrature};
use crate::linalg::{constrain_dirichlet, solve, SolveStats, SolverConfig, SparseMatrix};
use crate::mesh::{Point, StructuredMesh};

/// Mobility `κ(x, θ)`.
pub type MobilityFn<'a> = &'a dyn Fn(Point, f64) -> f64;
pub type SpaceFn<'a> = &'a dyn Fn(Point) -> f64;

#[derive(Clone, Copy)]
pub struct PressureProblem<'a> {
    pub mesh: &'a StructuredMesh,
    pub mobility: MobilityFn<'a>,
    /// Source `g`.
    pub source: SpaceFn<'a>,
    /// Pressure prescribed on `Γ_D`.
    pub boundary: SpaceFn<'a>,
}

impl<'a> PressureProblem<'a> {
    /// `κ` at reference point `(xi, eta)` of element `e`, with `θ̂` clamped to
    /// `[0, 1]` before the closure is applied.
    pub fn kappa_at(&self, theta: &NodalField, e: usize, xi: f64, eta: f64) -> Result<f64> {
        let th = theta.eval_local(self.mesh, e, xi, eta).clamp(0.0, 1.0);
        let p = self.mesh.local_to_global(e, xi, eta);
        let k = (self.mobility)(p, th);
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Coefficient(format!(
                "mobility {k} at ({}, {}) is not positive and finite",
                p.x, p.y
            )));
        }
        Ok(k)
    }

    /// `K[a][b] = ∫_τ κ ∇φ_a·∇φ_b` by 2x2 Gauss, `κ` sampled at the Gauss points.
    pub fn element_stiffness(&self, theta: &NodalField, e: usize) -> Result<[[f64; 4]; 4]> {
        let m = self.mesh;
        let area = m.element_area();
        let mut k = [[0.0; 4]; 4];
        for ((xi, eta), w) in Quadrature::gauss2().iter() {
            let kap = self.kappa_at(theta, e, xi, eta)?;
            let g = shape_grad(xi, eta, m.hx(), m.hy());
            let s = kap * w * area;
            for a in 0..4 {
                for b in 0..4 {
                    k[a][b] += s * g[a].dot(g[b]);
                }
            }
        }
        Ok(k)
    }

    /// `F[a] = ∫_τ g φ_a` by 2x2 Gauss on each subquadrant, the same points
    /// that give the control-volume source integrals.
    pub fn element_load(&self, e: usize) -> [f64; 4] {
        let mut f = [0.0; 4];
        for c in 0..4 {
            let m = subquadrant_moments(self.mesh, e, c, self.source);
            for a in 0..4 {
                f[a] += m[a];
            }
        }
        f
    }

    /// Unconstrained stiffness matrix and load vector.
    pub fn assemble_raw(&self, theta: &NodalField) -> Result<(SparseMatrix, Vec<f64>)> {
        theta.check(self.mesh)?;
        let m = self.mesh;
        let n = m.n_vertices();
        let mut t = Vec::with_capacity(16 * m.n_elements());
        let mut rhs = vec![0.0; n];
        for e in 0..m.n_elements() {
            let c = m.element_corners(e);
            let k = self.element_stiffness(theta, e)?;
            let f = self.element_load(e);
            for a in 0..4 {
                rhs[c[a]] += f[a];
                for b in 0..4 {
                    t.push((c[a], c[b], k[a][b]));
                }
            }
        }
        Ok((SparseMatrix::from_triplets(n, n, t)?, rhs))
    }

    /// Prescribed values on Dirichlet vertices (zero elsewhere) and the mask.
    pub fn dirichlet_data(&self) -> (Vec<bool>, Vec<f64>) {
        let m = self.mesh;
        let fixed: Vec<bool> = (0..m.n_vertices()).map(|v| m.is_dirichlet(v)).collect();
        let values = (0..m.n_vertices())
            .map(|v| if fixed[v] { (self.boundary)(m.vertex(v)) } else { 0.0 })
            .collect();
        (fixed, values)
    }
}

/// Assembled system with Dirichlet rows eliminated (the lifting of the
/// prescribed values moves into the right-hand side). SPD whenever `Γ_D` is
/// nonempty.
pub fn assemble_pressure(problem: &PressureProblem, theta: &NodalField) -> Result<(SparseMatrix, Vec<f64>)> {
    let (a, mut rhs) = problem.assemble_raw(theta)?;
    let (fixed, values) = problem.dirichlet_data();
    let a = constrain_dirichlet(&a, &mut rhs, &fixed, &values)?;
    Ok((a, rhs))
}

pub fn solve_pressure(
    problem: &PressureProblem,
    theta: &NodalField,
    cfg: &SolverConfig,
) -> Result<(NodalField, SolveStats)> {
    if !problem.mesh.boundary().has_dirichlet() {
        return Err(Error::invalid("pressure problem needs a Dirichlet boundary part"));
    }
    let (a, rhs) = assemble_pressure(problem, theta)?;
    let (fixed, values) = problem.dirichlet_data();
    let mut x = values.clone();
    let stats = solve(&a, &rhs, &mut x, cfg)?;
    // elimination already pins these rows; copy to remove solver round-off
    for v in 0..x.len() {
        if fixed[v] {
            x[v] = values[v];
        }
    }
    Ok((NodalField { values: x }, stats))
}

/// `∫ κ |∇p|²`, the discrete energy of a pressure field.
pub fn energy(problem: &PressureProblem, theta: &NodalField, p: &NodalField) -> Result<f64> {
    let mut total = 0.0;
    for e in 0..problem.mesh.n_elements() {
        let k = problem.element_stiffness(theta, e)?;
        let c = p.corners(problem.mesh, e);
        for a in 0..4 {
            for b in 0..4 {
                total += c[a] * k[a][b] * c[b];
            }
        }
    }
    Ok(total)
}
