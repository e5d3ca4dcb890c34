//! One fine time step of the concentration equation by the finite volume
//! element method: trapezoidal in time, bilinear-gradient diffusive fluxes and
//! upwinded advective fluxes on the interior control-volume faces, reaction,
//! source, and the nudging term `−μ P_ħ(θ̂ − θ)`.
//!
//! With `A = K + Q + μ M P` (face fluxes, reaction, implicit part of the
//! nudging) the step reads
//!
//! ```text
//! (M + Δt/2 A) θⁿ = (M − Δt/2 A) θⁿ⁻¹ + Δt/2 (Fⁿ⁻¹ + Fⁿ) + Δt/2 μ M Φ (γⁿ⁻¹ + γⁿ)
//! ```
//!
//! where `M[ζ][k] = ∫_{ω_ζ} φ_k`, `Fⁿ[ζ] = ∫_{ω_ζ} f(·, sⁿ)`, `P = Φ Γ` and `γ`
//! are the measurements interpolated in time. Rows of Dirichlet vertices are
//! replaced by the boundary data. The nudging block is applied matrix-free
//! since `M Φ Γ` is dense-ish for cell-average functionals.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fields::{cv_integrals, cv_mass_matrix, shape_grad, NodalField};
use crate::linalg::{bicgstab, constrain_dirichlet, LinearOperator, SolveStats, SolverConfig, SparseMatrix};
use crate::mesh::{Point, StructuredMesh, SEGMENTS};
use crate::observation::{ObservationStream, SparseGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    /// `∫_{ω_ζ} φ_k`, the mass matrix implied by the scheme.
    #[default]
    Consistent,
    /// Row sums on the diagonal.
    Lumped,
}

#[derive(Clone, Copy)]
pub struct TransportCoefficients<'a> {
    /// `D(x)`.
    pub diffusion: &'a dyn Fn(Point) -> f64,
    /// `q(x)`.
    pub reaction: &'a dyn Fn(Point) -> f64,
    /// `f(x, t)`.
    pub source: &'a dyn Fn(Point, f64) -> f64,
    /// `θ` on `Γ_D`.
    pub boundary: &'a dyn Fn(Point, f64) -> f64,
    pub mu: f64,
    pub mass: MassKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportStep {
    pub s_prev: f64,
    pub s_next: f64,
}

impl TransportStep {
    pub fn new(s_prev: f64, s_next: f64) -> Result<Self> {
        if !(s_next > s_prev) {
            return Err(Error::invalid(format!("fine step [{s_prev}, {s_next}] is empty")));
        }
        Ok(Self { s_prev, s_next })
    }

    pub fn dt(&self) -> f64 {
        self.s_next - self.s_prev
    }
}

/// Normal velocity on each interior segment of each element, oriented from
/// `SEGMENTS[k].from` to `SEGMENTS[k].to`.
pub type FaceVelocities = Vec<[f64; 4]>;

/// Face velocities of a prescribed velocity field sampled at segment midpoints.
pub fn prescribed_face_velocities(mesh: &StructuredMesh, v: &dyn Fn(Point) -> Point) -> FaceVelocities {
    (0..mesh.n_elements())
        .map(|e| {
            core::array::from_fn(|k| {
                let (mid, _) = mesh.segment_geometry(e, k);
                v(mid).dot(SEGMENTS[k].normal)
            })
        })
        .collect()
}

/// Parts of the step that do not depend on the velocity or the time step.
pub struct Transport<'a> {
    mesh: &'a StructuredMesh,
    coeffs: TransportCoefficients<'a>,
    grid: Option<&'a SparseGrid>,
    mass: SparseMatrix,
    reaction: SparseMatrix,
    /// Diffusion plus reaction.
    base: SparseMatrix,
    /// Diffusive outflow coefficients per element and segment, over the
    /// element's corner values.
    diffusion_faces: Vec<[[f64; 4]; 4]>,
    /// `diag(M Φ Γ)`.
    nudge_diag: Vec<f64>,
    fixed: Vec<bool>,
}

impl<'a> Transport<'a> {
    pub fn new(mesh: &'a StructuredMesh, coeffs: TransportCoefficients<'a>, grid: Option<&'a SparseGrid>) -> Result<Self> {
        if !(coeffs.mu >= 0.0 && coeffs.mu.is_finite()) {
            return Err(Error::Coefficient(format!("relaxation parameter {} must be >= 0", coeffs.mu)));
        }
        if coeffs.mu > 0.0 && grid.is_none() {
            return Err(Error::invalid("nudging requires a sparse grid"));
        }
        if let Some(g) = grid {
            if g.interpolation().n_rows() != mesh.n_vertices() {
                return Err(Error::DimensionMismatch {
                    expected: mesh.n_vertices(),
                    got: g.interpolation().n_rows(),
                });
            }
        }
        let lumped = coeffs.mass == MassKind::Lumped;
        let mass = cv_mass_matrix(mesh, &|_| 1.0, lumped);
        let reaction = cv_mass_matrix(mesh, coeffs.reaction, lumped);

        let mut diffusion_faces = Vec::with_capacity(mesh.n_elements());
        let mut t = Vec::with_capacity(32 * mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let c = mesh.element_corners(e);
            let mut faces = [[0.0; 4]; 4];
            for (k, seg) in SEGMENTS.iter().enumerate() {
                let (mid, len) = mesh.segment_geometry(e, k);
                let d = (coeffs.diffusion)(mid);
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::Coefficient(format!(
                        "diffusion {d} at ({}, {}) is not positive",
                        mid.x, mid.y
                    )));
                }
                let g = shape_grad(seg.local_mid.0, seg.local_mid.1, mesh.hx(), mesh.hy());
                for j in 0..4 {
                    faces[k][j] = -len * d * g[j].dot(seg.normal);
                    t.push((c[seg.from], c[j], faces[k][j]));
                    t.push((c[seg.to], c[j], -faces[k][j]));
                }
            }
            diffusion_faces.push(faces);
        }
        let diffusion = SparseMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), t)?;
        let base = diffusion.add_scaled(1.0, &reaction, 1.0)?;

        let nudge_diag = match grid {
            Some(g) if coeffs.mu > 0.0 => {
                let (phi, gamma) = (g.interpolation(), g.functionals());
                (0..mesh.n_vertices())
                    .map(|i| {
                        mass.row(i)
                            .map(|(k, m)| m * phi.row(k).map(|(l, w)| w * gamma.get(l, i)).sum::<f64>())
                            .sum()
                    })
                    .collect()
            }
            _ => vec![0.0; mesh.n_vertices()],
        };
        let fixed = (0..mesh.n_vertices()).map(|v| mesh.is_dirichlet(v)).collect();
        Ok(Self {
            mesh,
            coeffs,
            grid,
            mass,
            reaction,
            base,
            diffusion_faces,
            nudge_diag,
            fixed,
        })
    }

    pub fn mesh(&self) -> &StructuredMesh {
        self.mesh
    }

    pub fn mass_matrix(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn mu(&self) -> f64 {
        self.coeffs.mu
    }

    pub fn nudging(&self) -> bool {
        self.coeffs.mu > 0.0
    }

    /// `∫_{ω_ζ} f(·, s)` for every control volume.
    pub fn source_integrals(&self, s: f64) -> Vec<f64> {
        cv_integrals(self.mesh, &|p| (self.coeffs.source)(p, s))
    }

    /// Operator for a fixed velocity and step length.
    pub fn operator(&self, velocity: &[[f64; 4]], dt: f64) -> Result<StepOperator<'_, 'a>> {
        if velocity.len() != self.mesh.n_elements() {
            return Err(Error::DimensionMismatch {
                expected: self.mesh.n_elements(),
                got: velocity.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step {dt} must be positive")));
        }
        let mesh = self.mesh;
        let mut t = Vec::with_capacity(8 * mesh.n_elements());
        for (e, vel) in velocity.iter().enumerate() {
            let c = mesh.element_corners(e);
            for (k, seg) in SEGMENTS.iter().enumerate() {
                let (_, len) = mesh.segment_geometry(e, k);
                for (corner, w) in upwind_weights(vel[k]) {
                    let col = c[if corner == 0 { seg.from } else { seg.to }];
                    let a = len * vel[k] * w;
                    t.push((c[seg.from], col, a));
                    t.push((c[seg.to], col, -a));
                }
            }
        }
        let advection = SparseMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), t)?;
        let a = self.base.add_scaled(1.0, &advection, 1.0)?;
        Ok(StepOperator {
            transport: self,
            velocity: velocity.to_vec(),
            dt,
            implicit: self.mass.add_scaled(1.0, &a, 0.5 * dt)?,
            explicit: self.mass.add_scaled(1.0, &a, -0.5 * dt)?,
        })
    }

    /// `M Φ Γ x`.
    fn nudge_apply(&self, x: &[f64]) -> Vec<f64> {
        let g = self.grid.expect("nudging requires a grid");
        let gx = g.functionals().matvec(x);
        self.mass.matvec(&g.interpolation().matvec(&gx))
    }

    /// `M Φ γ`.
    fn data_apply(&self, gamma: &[f64]) -> Vec<f64> {
        let g = self.grid.expect("nudging requires a grid");
        self.mass.matvec(&g.interpolation().matvec(gamma))
    }
}

/// `(corner, weight)` pairs of the upwind value: corner 0 is the segment's
/// `from` side, 1 its `to` side. Zero velocity averages both sides.
fn upwind_weights(v: f64) -> impl Iterator<Item = (usize, f64)> {
    let w = if v > 0.0 {
        [(0, 1.0), (1, 0.0)]
    } else if v < 0.0 {
        [(0, 0.0), (1, 1.0)]
    } else {
        [(0, 0.5), (1, 0.5)]
    };
    w.into_iter().filter(|&(_, w)| w != 0.0)
}

/// Data needed by one step besides the old state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInputs {
    pub step: TransportStep,
    /// `∫_{ω_ζ} f` at both ends of the step.
    pub source_prev: Vec<f64>,
    pub source_next: Vec<f64>,
    /// Measurements at both ends of the step (ignored when `μ = 0`).
    pub gamma_prev: Vec<f64>,
    pub gamma_next: Vec<f64>,
}

impl StepInputs {
    pub fn gather(transport: &Transport, step: TransportStep, observations: Option<&ObservationStream>) -> Result<Self> {
        let (gamma_prev, gamma_next) = if transport.nudging() {
            let obs = observations.ok_or(Error::ObservationGap { time: step.s_prev })?;
            (obs.interpolate_in_time(step.s_prev)?, obs.interpolate_in_time(step.s_next)?)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            step,
            source_prev: transport.source_integrals(step.s_prev),
            source_next: transport.source_integrals(step.s_next),
            gamma_prev,
            gamma_next,
        })
    }
}

/// Terms of the discrete mass balance of one step over the free control
/// volumes. `residual = accumulation − (inflow + sources − reaction − nudging)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MassAudit {
    pub accumulation: f64,
    /// Net flux into the free control volumes across their faces with
    /// Dirichlet control volumes, integrated over the step.
    pub inflow: f64,
    pub sources: f64,
    pub reaction: f64,
    pub nudging: f64,
    /// `Σ |∫_{ω_ζ} θⁿ|` over the free control volumes.
    pub mass: f64,
    pub residual: f64,
}

impl MassAudit {
    /// `|residual|` relative to the largest term or the mass present.
    pub fn relative(&self) -> f64 {
        let scale = [self.accumulation, self.inflow, self.sources, self.reaction, self.nudging, self.mass]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / scale
        }
    }
}

/// Step matrices for a frozen velocity and step length.
pub struct StepOperator<'t, 'a> {
    transport: &'t Transport<'a>,
    velocity: FaceVelocities,
    dt: f64,
    /// `M + Δt/2 (K + Q)`.
    implicit: SparseMatrix,
    /// `M − Δt/2 (K + Q)`.
    explicit: SparseMatrix,
}

struct Constrained<'o, 't, 'a> {
    op: &'o StepOperator<'t, 'a>,
}

impl LinearOperator for Constrained<'_, '_, '_> {
    fn rows(&self) -> usize {
        self.op.implicit.n_rows()
    }

    fn cols(&self) -> usize {
        self.op.implicit.n_cols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let fixed = &self.op.transport.fixed;
        let free: Vec<f64> = x.iter().zip(fixed).map(|(&v, &f)| if f { 0.0 } else { v }).collect();
        let full = self.op.apply_implicit(&free);
        for i in 0..y.len() {
            y[i] = if fixed[i] { x[i] } else { full[i] };
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let t = self.op.transport;
        let c = self.op.nudge_coefficient();
        self.op
            .implicit
            .diag()
            .into_iter()
            .enumerate()
            .map(|(i, d)| if t.fixed[i] { 1.0 } else { d + c * t.nudge_diag[i] })
            .collect()
    }
}

impl<'t, 'a> StepOperator<'t, 'a> {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn velocity(&self) -> &[[f64; 4]] {
        &self.velocity
    }

    fn nudge_coefficient(&self) -> f64 {
        0.5 * self.dt * self.transport.coeffs.mu
    }

    /// Unconstrained `(M + Δt/2 A) x`.
    fn apply_implicit(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.implicit.matvec(x);
        if self.transport.nudging() {
            let c = self.nudge_coefficient();
            for (yi, ni) in y.iter_mut().zip(self.transport.nudge_apply(x)) {
                *yi += c * ni;
            }
        }
        y
    }

    fn check_inputs(&self, theta_old: &NodalField, inputs: &StepInputs) -> Result<()> {
        let t = self.transport;
        theta_old.check(t.mesh)?;
        if (inputs.step.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::invalid(format!(
                "step length {} does not match operator step {}",
                inputs.step.dt(),
                self.dt
            )));
        }
        for v in [&inputs.source_prev, &inputs.source_next] {
            if v.len() != t.mesh.n_vertices() {
                return Err(Error::DimensionMismatch {
                    expected: t.mesh.n_vertices(),
                    got: v.len(),
                });
            }
        }
        if t.nudging() {
            let n = t.grid.map_or(0, |g| g.len());
            for v in [&inputs.gamma_prev, &inputs.gamma_next] {
                if v.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: v.len() });
                }
            }
        }
        Ok(())
    }

    /// Right-hand side before the Dirichlet rows are imposed.
    fn raw_rhs(&self, theta_old: &NodalField, inputs: &StepInputs) -> Vec<f64> {
        let t = self.transport;
        let mut b = self.explicit.matvec(&theta_old.values);
        let h = 0.5 * self.dt;
        for i in 0..b.len() {
            b[i] += h * (inputs.source_prev[i] + inputs.source_next[i]);
        }
        if t.nudging() {
            let c = self.nudge_coefficient();
            let old = t.nudge_apply(&theta_old.values);
            let gsum: Vec<f64> = inputs.gamma_prev.iter().zip(&inputs.gamma_next).map(|(a, b)| a + b).collect();
            let data = t.data_apply(&gsum);
            for i in 0..b.len() {
                b[i] += c * (data[i] - old[i]);
            }
        }
        b
    }

    fn boundary_values(&self, s: f64) -> Vec<f64> {
        let t = self.transport;
        (0..t.mesh.n_vertices())
            .map(|v| if t.fixed[v] { (t.coeffs.boundary)(t.mesh.vertex(v), s) } else { 0.0 })
            .collect()
    }

    /// Explicit step matrix and right-hand side with Dirichlet rows
    /// eliminated. Forms `M Φ Γ` explicitly; meant for small meshes and
    /// cross-checks. [`StepOperator::step`] solves the same system matrix-free.
    pub fn assemble(&self, theta_old: &NodalField, inputs: &StepInputs) -> Result<(SparseMatrix, Vec<f64>)> {
        self.check_inputs(theta_old, inputs)?;
        let t = self.transport;
        let mut a = self.implicit.clone();
        if t.nudging() {
            let g = t.grid.expect("checked");
            let mp = t.mass.matmul(g.projector())?;
            a = a.add_scaled(1.0, &mp, self.nudge_coefficient())?;
        }
        let mut b = self.raw_rhs(theta_old, inputs);
        let g = self.boundary_values(inputs.step.s_next);
        let a = constrain_dirichlet(&a, &mut b, &t.fixed, &g)?;
        Ok((a, b))
    }

    pub fn step(&self, theta_old: &NodalField, inputs: &StepInputs, cfg: &SolverConfig) -> Result<(NodalField, SolveStats)> {
        self.check_inputs(theta_old, inputs)?;
        let t = self.transport;
        let mut b = self.raw_rhs(theta_old, inputs);
        let g = self.boundary_values(inputs.step.s_next);
        if t.fixed.iter().any(|&f| f) {
            let lift = self.apply_implicit(&g);
            for i in 0..b.len() {
                b[i] = if t.fixed[i] { g[i] } else { b[i] - lift[i] };
            }
        }
        let mut x = theta_old.values.clone();
        for i in 0..x.len() {
            if t.fixed[i] {
                x[i] = g[i];
            }
        }
        let stats = bicgstab(&Constrained { op: self }, &b, &mut x, cfg)?;
        for i in 0..x.len() {
            if t.fixed[i] {
                x[i] = g[i];
            }
        }
        Ok((NodalField { values: x }, stats))
    }

    /// Mass balance of a completed step.
    pub fn audit(&self, theta_old: &NodalField, theta_new: &NodalField, inputs: &StepInputs) -> Result<MassAudit> {
        self.check_inputs(theta_old, inputs)?;
        theta_new.check(self.transport.mesh)?;
        let t = self.transport;
        let mesh = t.mesh;
        let n = mesh.n_vertices();
        let avg: Vec<f64> = theta_old.values.iter().zip(&theta_new.values).map(|(a, b)| 0.5 * (a + b)).collect();
        let diff: Vec<f64> = theta_new.values.iter().zip(&theta_old.values).map(|(a, b)| a - b).collect();
        let free_sum = |v: &[f64]| (0..n).filter(|&i| !t.fixed[i]).map(|i| v[i]).sum::<f64>();

        let accumulation = free_sum(&t.mass.matvec(&diff));
        let mass = free_sum(&t.mass.matvec(&theta_new.values).iter().map(|v| v.abs()).collect::<Vec<_>>());
        let mut outflow = 0.0;
        for e in 0..mesh.n_elements() {
            let c = mesh.element_corners(e);
            for (k, seg) in SEGMENTS.iter().enumerate() {
                let (a, b) = (c[seg.from], c[seg.to]);
                if t.fixed[a] == t.fixed[b] {
                    continue;
                }
                let (_, len) = mesh.segment_geometry(e, k);
                let mut flux: f64 = (0..4).map(|j| t.diffusion_faces[e][k][j] * avg[c[j]]).sum();
                for (corner, w) in upwind_weights(self.velocity[e][k]) {
                    flux += len * self.velocity[e][k] * w * avg[if corner == 0 { a } else { b }];
                }
                outflow += if t.fixed[a] { -flux } else { flux };
            }
        }
        let inflow = -self.dt * outflow;
        let sources = 0.5 * self.dt * (free_sum(&inputs.source_prev) + free_sum(&inputs.source_next));
        let reaction = self.dt * free_sum(&t.reaction.matvec(&avg));
        let nudging = if t.nudging() {
            let gmid: Vec<f64> = inputs.gamma_prev.iter().zip(&inputs.gamma_next).map(|(a, b)| 0.5 * (a + b)).collect();
            let model = t.nudge_apply(&avg);
            let data = t.data_apply(&gmid);
            let d: Vec<f64> = model.iter().zip(&data).map(|(m, d)| m - d).collect();
            self.dt * t.coeffs.mu * free_sum(&d)
        } else {
            0.0
        };
        let residual = accumulation - (inflow + sources - reaction - nudging);
        Ok(MassAudit {
            accumulation,
            inflow,
            sources,
            reaction,
            nudging,
            mass,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundarySpec, BoundaryTag};
    use crate::observation::FunctionalKind;

    fn zero(_: Point) -> f64 {
        0.0
    }

    #[test]
    fn scalar_decay_matches_trapezoidal_factor() {
        // all-Neumann single element, no diffusion gradients on a constant
        let m = StructuredMesh::new(1, 1, 1.0, 1.0, BoundarySpec::uniform(BoundaryTag::Neumann)).unwrap();
        let q = 3.0;
        let coeffs = TransportCoefficients {
            diffusion: &|_| 1e-300,
            reaction: &|_| q,
            source: &|_, _| 0.0,
            boundary: &|_, _| 0.0,
            mu: 0.0,
            mass: MassKind::Consistent,
        };
        let tr = Transport::new(&m, coeffs, None).unwrap();
        let vel = vec![[0.0; 4]; 1];
        let dt = 0.1;
        let op = tr.operator(&vel, dt).unwrap();
        let step = TransportStep::new(0.0, dt).unwrap();
        let inputs = StepInputs::gather(&tr, step, None).unwrap();
        let theta = NodalField::constant(&m, 0.7);
        let cfg = SolverConfig {
            rel_tol: 1e-14,
            ..SolverConfig::bicgstab()
        };
        let (next, _) = op.step(&theta, &inputs, &cfg).unwrap();
        let expect = 0.7 * (1.0 - q * dt / 2.0) / (1.0 + q * dt / 2.0);
        for v in next.values {
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_free_matches_assembled() {
        let m = StructuredMesh::new(6, 6, 1.0, 1.0, BoundarySpec::all_dirichlet()).unwrap();
        let grid = SparseGrid::new(&m, 1.0 / 3.0, FunctionalKind::CellAverage).unwrap();
        let coeffs = TransportCoefficients {
            diffusion: &|p| 0.1 + p.x,
            reaction: &|p| p.y,
            source: &|p, t| p.x * t,
            boundary: &|p, t| p.x * t,
            mu: 20.0,
            mass: MassKind::Consistent,
        };
        let tr = Transport::new(&m, coeffs, Some(&grid)).unwrap();
        let vel = prescribed_face_velocities(&m, &|p| Point::new(1.0 - p.y, p.x - 0.5));
        let op = tr.operator(&vel, 0.05).unwrap();
        let mut obs = ObservationStream::new();
        obs.push(0.0, vec![0.3; grid.len()]).unwrap();
        obs.push(0.1, vec![0.5; grid.len()]).unwrap();
        let step = TransportStep::new(0.0, 0.05).unwrap();
        let inputs = StepInputs::gather(&tr, step, Some(&obs)).unwrap();
        let theta = NodalField::from_fn(&m, |p| p.x * (1.0 - p.y));
        let cfg = SolverConfig {
            rel_tol: 1e-14,
            abs_tol: 1e-16,
            ..SolverConfig::bicgstab()
        };
        let (x, _) = op.step(&theta, &inputs, &cfg).unwrap();
        let (a, b) = op.assemble(&theta, &inputs).unwrap();
        let r: Vec<f64> = a.matvec(&x.values).iter().zip(&b).map(|(ax, b)| ax - b).collect();
        assert!(crate::math::norm2(&r) < 1e-12);
        let audit = op.audit(&theta, &x, &inputs).unwrap();
        assert!(audit.relative() < 1e-10, "{audit:?}");
    }

    #[test]
    fn exact_observations_cancel_nudging() {
        let m = StructuredMesh::new(4, 4, 1.0, 1.0, BoundarySpec::all_dirichlet()).unwrap();
        let grid = SparseGrid::new(&m, 0.5, FunctionalKind::PointValue).unwrap();
        let make = |mu: f64| TransportCoefficients {
            diffusion: &|_| 0.5,
            reaction: &zero,
            source: &|_, _| 0.0,
            boundary: &|_, _| 0.0,
            mu,
            mass: MassKind::Consistent,
        };
        let theta = NodalField::from_fn(&m, |p| p.x * (1.0 - p.x) * p.y * (1.0 - p.y));
        let gamma = grid.sample(&theta).unwrap();
        let mut obs = ObservationStream::new();
        obs.push(0.0, gamma.clone()).unwrap();
        obs.push(1.0, gamma).unwrap();
        let vel = vec![[0.0; 4]; m.n_elements()];
        let step = TransportStep::new(0.0, 0.01).unwrap();
        let cfg = SolverConfig::bicgstab();
        // a state equal to the truth at the measurement points: nudging only
        // sees P(θ̂ − θ) = 0 at the start of the step
        let t0 = Transport::new(&m, make(0.0), None).unwrap();
        let t1 = Transport::new(&m, make(1000.0), Some(&grid)).unwrap();
        let i0 = StepInputs::gather(&t0, step, None).unwrap();
        let i1 = StepInputs::gather(&t1, step, Some(&obs)).unwrap();
        let o0 = t0.operator(&vel, 0.01).unwrap();
        let o1 = t1.operator(&vel, 0.01).unwrap();
        let b0 = o0.raw_rhs(&theta, &i0);
        let b1 = o1.raw_rhs(&theta, &i1);
        // explicit halves agree exactly: the nudging contributions cancel
        let nudged_part: Vec<f64> = b1.iter().zip(&b0).map(|(a, b)| a - b).collect();
        let model = t1.nudge_apply(&theta.values);
        for (d, m) in nudged_part.iter().zip(&model) {
            assert!((d - 0.5 * 0.01 * 1000.0 * m).abs() < 1e-12);
        }
        let (x0, _) = o0.step(&theta, &i0, &cfg).unwrap();
        let (x1, _) = o1.step(&theta, &i1, &cfg).unwrap();
        assert!(x0.values.iter().chain(&x1.values).all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = StructuredMesh::new(2, 2, 1.0, 1.0, BoundarySpec::all_dirichlet()).unwrap();
        let coeffs = TransportCoefficients {
            diffusion: &|_| 0.0,
            reaction: &zero,
            source: &|_, _| 0.0,
            boundary: &|_, _| 0.0,
            mu: 0.0,
            mass: MassKind::Consistent,
        };
        assert!(matches!(Transport::new(&m, coeffs, None), Err(Error::Coefficient(_))));
        let coeffs = TransportCoefficients {
            diffusion: &|_| 1.0,
            mu: 5.0,
            ..coeffs
        };
        assert!(Transport::new(&m, coeffs, None).is_err());
        assert!(TransportStep::new(1.0, 1.0).is_err());
    }
}
