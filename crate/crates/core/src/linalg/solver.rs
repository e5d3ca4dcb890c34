use alloc::vec;
use alloc::vec::Vec;

use super::SparseMatrix;
use crate::error::{Error, Result};
use crate::math::{dot, norm2};

/// Anything that can multiply a vector; the solvers only need `y = A x` and
/// the diagonal (for Jacobi).
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for SparseMatrix {
    fn rows(&self) -> usize {
        self.n_rows()
    }

    fn cols(&self) -> usize {
        self.n_cols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y)
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Cg,
    BiCgStab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
}

/// Stopping rule: `‖b - A x‖ <= max(rel_tol · ‖b‖, abs_tol)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `None` means `10 · n`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Cg,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_iter: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolverConfig {
    pub fn bicgstab() -> Self {
        Self {
            method: Method::BiCgStab,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("solver tolerances must be positive"));
        }
        if self.max_iter == Some(0) {
            return Err(Error::invalid("max_iter must be positive"));
        }
        Ok(())
    }

    fn limit(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }

    fn target(&self, bnorm: f64) -> f64 {
        (self.rel_tol * bnorm).max(self.abs_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn inverse_diagonal<A: LinearOperator + ?Sized>(a: &A, p: Preconditioner) -> Vec<f64> {
    match p {
        Preconditioner::None => vec![1.0; a.rows()],
        Preconditioner::Jacobi => a
            .diagonal()
            .into_iter()
            .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
            .collect(),
    }
}

fn check_square<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64]) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    for len in [b.len(), x.len()] {
        if len != a.rows() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                got: len,
            });
        }
    }
    Ok(())
}

fn residual<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm2(r)
}

struct Best {
    x: Vec<f64>,
    res: f64,
}

impl Best {
    fn offer(&mut self, x: &[f64], res: f64) {
        if res < self.res {
            self.res = res;
            self.x.copy_from_slice(x);
        }
    }

    fn fail(self, iterations: usize) -> Error {
        Error::NoConvergence {
            iterations,
            residual: self.res,
            best: self.x,
        }
    }
}

/// Counts true-residual checks that fail to halve the previous one. Once the
/// recursive residual keeps reaching the target while the true one sits on a
/// roundoff floor, further iterations are wasted.
struct Drift {
    last: f64,
    strikes: u32,
}

impl Drift {
    const LIMIT: u32 = 3;

    fn new() -> Self {
        Self {
            last: f64::INFINITY,
            strikes: 0,
        }
    }

    fn stalled(&mut self, true_rn: f64) -> bool {
        if true_rn > 0.5 * self.last {
            self.strikes += 1;
        } else {
            self.strikes = 0;
        }
        self.last = self.last.min(true_rn);
        self.strikes >= Self::LIMIT
    }
}

/// Dispatches on `cfg.method`.
pub fn solve<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &mut [f64], cfg: &SolverConfig) -> Result<SolveStats> {
    match cfg.method {
        Method::Cg => cg(a, b, x, cfg),
        Method::BiCgStab => bicgstab(a, b, x, cfg),
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite `a`.
/// `x` holds the initial guess on entry and the solution on success.
pub fn cg<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &mut [f64], cfg: &SolverConfig) -> Result<SolveStats> {
    cg_observed(a, b, x, cfg, &mut |_| {})
}

/// [`cg`] with `observe` called on every iterate.
pub fn cg_observed<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    cfg: &SolverConfig,
    observe: &mut dyn FnMut(&[f64]),
) -> Result<SolveStats> {
    cfg.validate()?;
    check_square(a, b, x)?;
    let n = b.len();
    let target = cfg.target(norm2(b));
    let minv = inverse_diagonal(a, cfg.preconditioner);
    let mut r = vec![0.0; n];
    let mut rn = residual(a, b, x, &mut r);
    if rn <= target {
        return Ok(SolveStats {
            iterations: 0,
            residual: rn,
        });
    }
    let mut best = Best { x: x.to_vec(), res: rn };
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut drift = Drift::new();
    for it in 1..=cfg.limit(n) {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(best.fail(it));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        observe(x);
        rn = norm2(&r);
        if rn <= target {
            // guard against drift of the recursive residual
            let true_rn = residual(a, b, x, &mut r);
            if true_rn <= target {
                return Ok(SolveStats {
                    iterations: it,
                    residual: true_rn,
                });
            }
            rn = true_rn;
            best.offer(x, rn);
            if drift.stalled(true_rn) {
                return Err(best.fail(it));
            }
        }
        best.offer(x, rn);
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(best.fail(cfg.limit(n)))
}

/// Right-preconditioned BiCGStab for general nonsingular `a`.
pub fn bicgstab<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &mut [f64], cfg: &SolverConfig) -> Result<SolveStats> {
    cfg.validate()?;
    check_square(a, b, x)?;
    let n = b.len();
    let target = cfg.target(norm2(b));
    let minv = inverse_diagonal(a, cfg.preconditioner);
    let mut r = vec![0.0; n];
    let mut rn = residual(a, b, x, &mut r);
    if rn <= target {
        return Ok(SolveStats {
            iterations: 0,
            residual: rn,
        });
    }
    let mut best = Best { x: x.to_vec(), res: rn };
    let mut r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zs = vec![0.0; n];
    let mut t = vec![0.0; n];
    let limit = cfg.limit(n);
    let mut drift = Drift::new();
    let mut it = 0;
    while it < limit {
        it += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            // breakdown: restart from the current iterate
            rn = residual(a, b, x, &mut r);
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            if dot(&r_hat, &r) == 0.0 {
                break;
            }
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * minv[i];
        }
        a.apply(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            break;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let sn = norm2(&s);
        if sn <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            let true_rn = residual(a, b, x, &mut r);
            if true_rn <= target {
                return Ok(SolveStats {
                    iterations: it,
                    residual: true_rn,
                });
            }
            rn = true_rn;
            best.offer(x, rn);
            if drift.stalled(true_rn) {
                return Err(best.fail(it));
            }
            continue;
        }
        for i in 0..n {
            zs[i] = s[i] * minv[i];
        }
        a.apply(&zs, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zs[i];
            r[i] = s[i] - omega * t[i];
        }
        rn = norm2(&r);
        if rn <= target {
            let true_rn = residual(a, b, x, &mut r);
            if true_rn <= target {
                return Ok(SolveStats {
                    iterations: it,
                    residual: true_rn,
                });
            }
            rn = true_rn;
            best.offer(x, rn);
            if drift.stalled(true_rn) {
                return Err(best.fail(it));
            }
        }
        best.offer(x, rn);
        if omega == 0.0 {
            break;
        }
    }
    let _ = rn;
    Err(best.fail(it))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, t).unwrap()
    }

    #[test]
    fn cg_solves_spd() {
        let a = laplace_1d(50);
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&xs);
        let mut x = vec![0.0; 50];
        let st = cg(&a, &b, &mut x, &SolverConfig::default()).unwrap();
        assert!(st.iterations <= 50);
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn bicgstab_solves_nonsymmetric() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 {
                t.push((i, i - 1, -2.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
        let b = a.matvec(&xs);
        for p in [Preconditioner::None, Preconditioner::Jacobi] {
            let mut x = vec![0.0; n];
            let cfg = SolverConfig {
                preconditioner: p,
                ..SolverConfig::default()
            };
            bicgstab(&a, &b, &mut x, &cfg).unwrap();
            for (u, v) in x.iter().zip(&xs) {
                assert!((u - v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn no_convergence_carries_best_iterate() {
        let a = laplace_1d(100);
        let b = vec![1.0; 100];
        let mut x = vec![0.0; 100];
        let cfg = SolverConfig {
            max_iter: Some(3),
            ..SolverConfig::default()
        };
        match cg(&a, &b, &mut x, &cfg) {
            Err(Error::NoConvergence { best, residual, .. }) => {
                assert_eq!(best.len(), 100);
                assert!(residual <= norm2(&b));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_and_two_by_two() {
        let i = SparseMatrix::identity(4);
        let b = [1.0, -2.0, 3.0, 0.5];
        let mut x = vec![0.0; 4];
        let st = solve(&i, &b, &mut x, &SolverConfig::default()).unwrap();
        assert!(st.iterations <= 1);
        assert_eq!(x, b);
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let mut x = vec![0.0; 2];
        solve(&a, &[2.0, 1.0], &mut x, &SolverConfig::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn cg_error_decreases_in_energy_norm() {
        let n = 60;
        let a = laplace_1d(n);
        let xs: Vec<f64> = (0..n).map(|i| ((i * i) % 7) as f64).collect();
        let b = a.matvec(&xs);
        let mut x = vec![0.0; n];
        let mut energies = Vec::new();
        let energy = |x: &[f64]| {
            let e: Vec<f64> = x.iter().zip(&xs).map(|(u, v)| u - v).collect();
            dot(&e, &a.matvec(&e))
        };
        let cfg = SolverConfig {
            preconditioner: Preconditioner::None,
            ..SolverConfig::default()
        };
        cg_observed(&a, &b, &mut x, &cfg, &mut |it| energies.push(energy(it))).unwrap();
        assert!(energies.len() > 5);
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-20);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let a = laplace_1d(3);
        let mut x = vec![0.0; 3];
        let cfg = SolverConfig {
            rel_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(cg(&a, &[1.0; 3], &mut x, &cfg).is_err());
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let a = laplace_1d(5);
        let mut x = vec![0.0; 5];
        let st = cg(&a, &[0.0; 5], &mut x, &SolverConfig::default()).unwrap();
        assert_eq!(st.iterations, 0);
    }
}
