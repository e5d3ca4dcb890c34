//! Dense brute-force assembly of one coarse step on a 4x4 mesh, written from
//! global hat functions, compared entrywise with the solver's matrices.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nudgeflow_core::driver::{first_step_matrices, observe, DriverConfig, InitialGuess, Setup, TimePartition, Truth, VelocityUpdate};
use nudgeflow_core::linalg::SolverConfig;
use nudgeflow_core::observation::FunctionalKind;
use nudgeflow_core::scenarios::{Flow, Scenario};
use nudgeflow_core::transport::MassKind;
use nudgeflow_core::{BoundarySpec, NodalField, Point};

const NX: usize = 4;
const NY: usize = 4;
const LX: f64 = 1.0;
const LY: f64 = 2.0;
const HBAR: f64 = 0.5;
const MU: f64 = 3.0;

fn kappa(p: Point, th: f64) -> f64 {
    (1.0 + p.x + 0.5 * p.y) * (1.0 + th) * (1.0 + th)
}
fn g_src(p: Point) -> f64 {
    2.0 + (3.0 * p.x).sin() * p.y
}
fn p_bc(p: Point) -> f64 {
    1.0 - p.x + 0.1 * p.y
}
fn diff(p: Point) -> f64 {
    0.1 + 0.05 * p.x * p.y
}
fn react(p: Point) -> f64 {
    0.3 + 0.1 * p.x
}
fn forcing(p: Point, t: f64) -> f64 {
    (1.0 + t) * (p.x + p.y)
}
fn theta_bc(p: Point, t: f64) -> f64 {
    0.2 * p.x + 0.1 * t + 0.05 * p.y
}
fn theta0(p: Point) -> f64 {
    0.3 + 0.2 * p.x.sin() * p.y.cos()
}
fn truth(p: Point, t: f64) -> f64 {
    0.4 + 0.1 * p.x - 0.05 * p.y + 0.2 * t
}

fn scenario(mass: MassKind) -> Scenario {
    Scenario {
        name: "oracle".into(),
        nx: NX,
        ny: NY,
        lx: LX,
        ly: LY,
        boundary: BoundarySpec::dirichlet_left_right(),
        diffusion: Arc::new(diff),
        reaction: Arc::new(react),
        forcing: Arc::new(forcing),
        theta_boundary: Arc::new(theta_bc),
        flow: Flow::Darcy {
            mobility: Arc::new(kappa),
            source: Arc::new(g_src),
            pressure_boundary: Arc::new(p_bc),
        },
        theta0: Arc::new(theta0),
        exact: None,
        partition: TimePartition::uniform(0.0, 0.1, 1, 2).unwrap(),
        velocity_update: VelocityUpdate::EveryCoarseStep,
        mu: MU,
        hbar: HBAR,
        initial_guess: InitialGuess::Exact,
        mass,
    }
}

struct Dense {
    hx: f64,
    hy: f64,
}

impl Dense {
    fn new() -> Self {
        Self {
            hx: LX / NX as f64,
            hy: LY / NY as f64,
        }
    }
    fn nv(&self) -> usize {
        (NX + 1) * (NY + 1)
    }
    fn vid(&self, i: usize, j: usize) -> usize {
        j * (NX + 1) + i
    }
    fn coord(&self, v: usize) -> Point {
        Point::new((v % (NX + 1)) as f64 * self.hx, (v / (NX + 1)) as f64 * self.hy)
    }
    fn fixed(&self, v: usize) -> bool {
        let i = v % (NX + 1);
        i == 0 || i == NX
    }
    /// SW, SE, NE, NW.
    fn corners(&self, ei: usize, ej: usize) -> [usize; 4] {
        [self.vid(ei, ej), self.vid(ei + 1, ej), self.vid(ei + 1, ej + 1), self.vid(ei, ej + 1)]
    }
    fn origin(&self, ei: usize, ej: usize) -> Point {
        Point::new(ei as f64 * self.hx, ej as f64 * self.hy)
    }
    fn hat(&self, v: usize, p: Point) -> f64 {
        let a = self.coord(v);
        (1.0 - (p.x - a.x).abs() / self.hx).max(0.0) * (1.0 - (p.y - a.y).abs() / self.hy).max(0.0)
    }
    /// Gradient of the hat of corner `v` restricted to the element at `o`.
    fn hat_grad(&self, v: usize, o: Point, p: Point) -> Point {
        let a = self.coord(v);
        let sx = if a.x > o.x + 0.5 * self.hx { 1.0 } else { -1.0 };
        let sy = if a.y > o.y + 0.5 * self.hy { 1.0 } else { -1.0 };
        Point::new(
            sx / self.hx * (1.0 - (p.y - a.y).abs() / self.hy),
            sy / self.hy * (1.0 - (p.x - a.x).abs() / self.hx),
        )
    }
    fn value(&self, u: &[f64], c: &[usize; 4], p: Point) -> f64 {
        c.iter().map(|&v| u[v] * self.hat(v, p)).sum()
    }
    fn grad(&self, u: &[f64], c: &[usize; 4], o: Point, p: Point) -> Point {
        let mut g = Point::new(0.0, 0.0);
        for &v in c {
            let h = self.hat_grad(v, o, p);
            g.x += u[v] * h.x;
            g.y += u[v] * h.y;
        }
        g
    }
    fn kap(&self, theta: &[f64], c: &[usize; 4], p: Point) -> f64 {
        kappa(p, self.value(theta, c, p).clamp(0.0, 1.0))
    }
}

/// 2x2 Gauss points and weights on `[x0,x1] x [y0,y1]`.
fn gauss(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<(Point, f64)> {
    let a = 0.5 / 3f64.sqrt();
    let mut out = Vec::new();
    for ty in [0.5 - a, 0.5 + a] {
        for tx in [0.5 - a, 0.5 + a] {
            out.push((Point::new(x0 + (x1 - x0) * tx, y0 + (y1 - y0) * ty), 0.25 * (x1 - x0) * (y1 - y0)));
        }
    }
    out
}

/// Subquadrant box of corner `k` of the element at `o`.
fn quadrant(d: &Dense, o: Point, k: usize) -> (f64, f64, f64, f64) {
    let (hx2, hy2) = (0.5 * d.hx, 0.5 * d.hy);
    let (ox, oy) = match k {
        0 => (0.0, 0.0),
        1 => (hx2, 0.0),
        2 => (hx2, hy2),
        _ => (0.0, hy2),
    };
    (o.x + ox, o.x + ox + hx2, o.y + oy, o.y + oy + hy2)
}

/// `(from, to, midpoint offset, normal, length)` of the interior segments.
fn segments(d: &Dense) -> [(usize, usize, Point, Point, f64); 4] {
    let (hx, hy) = (d.hx, d.hy);
    [
        (0, 1, Point::new(0.5 * hx, 0.25 * hy), Point::new(1.0, 0.0), 0.5 * hy),
        (1, 2, Point::new(0.75 * hx, 0.5 * hy), Point::new(0.0, 1.0), 0.5 * hx),
        (3, 2, Point::new(0.5 * hx, 0.75 * hy), Point::new(1.0, 0.0), 0.5 * hy),
        (0, 3, Point::new(0.25 * hx, 0.5 * hy), Point::new(0.0, 1.0), 0.5 * hx),
    ]
}

fn elements() -> impl Iterator<Item = (usize, usize, usize)> {
    (0..NY).flat_map(|ej| (0..NX).map(move |ei| (ej * NX + ei, ei, ej)))
}

fn eliminate(d: &Dense, a: &DMatrix<f64>, b: &DVector<f64>, values: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = d.nv();
    let mut a2 = DMatrix::zeros(n, n);
    let mut b2 = b.clone();
    for i in 0..n {
        if d.fixed(i) {
            a2[(i, i)] = 1.0;
            b2[i] = values[i];
            continue;
        }
        for j in 0..n {
            if d.fixed(j) {
                b2[i] -= a[(i, j)] * values[j];
            } else {
                a2[(i, j)] = a[(i, j)];
            }
        }
    }
    (a2, b2)
}

fn element_stiffness(d: &Dense, theta: &[f64], c: &[usize; 4], o: Point) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    for (p, w) in gauss(o.x, o.x + d.hx, o.y, o.y + d.hy) {
        let kp = d.kap(theta, c, p);
        for a in 0..4 {
            for b in 0..4 {
                k[a][b] += w * kp * d.hat_grad(c[a], o, p).dot(d.hat_grad(c[b], o, p));
            }
        }
    }
    k
}

fn pressure_system(d: &Dense, theta: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = d.nv();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for (_, ei, ej) in elements() {
        let c = d.corners(ei, ej);
        let o = d.origin(ei, ej);
        let k = element_stiffness(d, theta, &c, o);
        for i in 0..4 {
            for j in 0..4 {
                a[(c[i], c[j])] += k[i][j];
            }
        }
        for q in 0..4 {
            let (x0, x1, y0, y1) = quadrant(d, o, q);
            for (p, w) in gauss(x0, x1, y0, y1) {
                for i in 0..4 {
                    b[c[i]] += w * g_src(p) * d.hat(c[i], p);
                }
            }
        }
    }
    let pd: Vec<f64> = (0..n).map(|v| if d.fixed(v) { p_bc(d.coord(v)) } else { 0.0 }).collect();
    eliminate(d, &a, &b, &pd)
}

fn local_flux(d: &Dense, theta: &[f64], p: &[f64]) -> Vec<[f64; 4]> {
    let segs = segments(d);
    let mut out = Vec::new();
    for (_, ei, ej) in elements() {
        let c = d.corners(ei, ej);
        let o = d.origin(ei, ej);
        let seg_flux = |u: &[f64]| -> [f64; 4] {
            core::array::from_fn(|s| {
                let (_, _, off, n, len) = segs[s];
                let m = Point::new(o.x + off.x, o.y + off.y);
                -len * d.kap(theta, &c, m) * d.grad(u, &c, o, m).dot(n)
            })
        };
        let mut a = DMatrix::zeros(4, 4);
        for col in 0..4 {
            let mut unit = vec![0.0; d.nv()];
            unit[c[col]] = 1.0;
            let f = seg_flux(&unit);
            for (s, &(from, to, ..)) in segs.iter().enumerate() {
                a[(from, col)] += f[s];
                a[(to, col)] -= f[s];
            }
        }
        let k = element_stiffness(d, theta, &c, o);
        let mut b = DVector::zeros(4);
        for q in 0..4 {
            let (x0, x1, y0, y1) = quadrant(d, o, q);
            for (pt, w) in gauss(x0, x1, y0, y1) {
                b[q] += w * g_src(pt);
                for i in 0..4 {
                    b[i] -= w * g_src(pt) * d.hat(c[i], pt);
                }
            }
        }
        for i in 0..4 {
            b[i] += (0..4).map(|j| k[i][j] * p[c[j]]).sum::<f64>();
        }
        // (normal, neighbour element, [(adjacent corner, point)]), half-edge length
        let (hx, hy) = (d.hx, d.hy);
        let edges: [(Point, Option<(usize, usize)>, bool, [(usize, Point); 2], f64); 4] = [
            (
                Point::new(0.0, -1.0),
                (ej > 0).then(|| (ei, ej - 1)),
                false,
                [(0, Point::new(o.x + 0.25 * hx, o.y)), (1, Point::new(o.x + 0.75 * hx, o.y))],
                0.5 * hx,
            ),
            (
                Point::new(1.0, 0.0),
                (ei + 1 < NX).then(|| (ei + 1, ej)),
                true,
                [(1, Point::new(o.x + hx, o.y + 0.25 * hy)), (2, Point::new(o.x + hx, o.y + 0.75 * hy))],
                0.5 * hy,
            ),
            (
                Point::new(0.0, 1.0),
                (ej + 1 < NY).then(|| (ei, ej + 1)),
                false,
                [(2, Point::new(o.x + 0.75 * hx, o.y + hy)), (3, Point::new(o.x + 0.25 * hx, o.y + hy))],
                0.5 * hx,
            ),
            (
                Point::new(-1.0, 0.0),
                (ei > 0).then(|| (ei - 1, ej)),
                true,
                [(3, Point::new(o.x, o.y + 0.75 * hy)), (0, Point::new(o.x, o.y + 0.25 * hy))],
                0.5 * hy,
            ),
        ];
        for (n, nb, vertical, halves, half) in edges {
            // horizontal boundary edges are the Neumann sides
            if nb.is_none() && !vertical {
                continue;
            }
            for (adj, pt) in halves {
                let mut g = d.grad(p, &c, o, pt);
                if let Some((ni, nj)) = nb {
                    let gn = d.grad(p, &d.corners(ni, nj), d.origin(ni, nj), pt);
                    g = Point::new(0.5 * (g.x + gn.x), 0.5 * (g.y + gn.y));
                }
                let flux = half * d.kap(theta, &c, pt) * g.dot(n);
                for i in 0..4 {
                    let ind = if i == adj { 1.0 } else { 0.0 };
                    b[i] += flux * (ind - d.hat(c[i], pt));
                }
            }
        }
        for col in 0..4 {
            a[(3, col)] = 0.25;
        }
        b[3] = 0.25 * c.iter().map(|&v| p[v]).sum::<f64>();
        let psi_local = a.lu().solve(&b).expect("local system is regular");
        let mut psi = vec![0.0; d.nv()];
        for i in 0..4 {
            psi[c[i]] = psi_local[i];
        }
        out.push(seg_flux(&psi));
    }
    out
}

fn cv_matrix(d: &Dense, w: &dyn Fn(Point) -> f64, lumped: bool) -> DMatrix<f64> {
    let n = d.nv();
    let mut m = DMatrix::zeros(n, n);
    for (_, ei, ej) in elements() {
        let c = d.corners(ei, ej);
        let o = d.origin(ei, ej);
        for q in 0..4 {
            let (x0, x1, y0, y1) = quadrant(d, o, q);
            for (p, wt) in gauss(x0, x1, y0, y1) {
                for k in 0..4 {
                    let v = wt * w(p) * d.hat(c[k], p);
                    if lumped {
                        m[(c[q], c[q])] += v;
                    } else {
                        m[(c[q], c[k])] += v;
                    }
                }
            }
        }
    }
    m
}

fn cv_source(d: &Dense, s: f64) -> DVector<f64> {
    let mut f = DVector::zeros(d.nv());
    for (_, ei, ej) in elements() {
        let c = d.corners(ei, ej);
        for q in 0..4 {
            let (x0, x1, y0, y1) = quadrant(d, d.origin(ei, ej), q);
            for (p, w) in gauss(x0, x1, y0, y1) {
                f[c[q]] += w * forcing(p, s);
            }
        }
    }
    f
}

fn transport_system(
    d: &Dense,
    theta: &[f64],
    seg_flux: &[[f64; 4]],
    mass: MassKind,
    part: &TimePartition,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = d.nv();
    let lumped = mass == MassKind::Lumped;
    let m = cv_matrix(d, &|_| 1.0, lumped);
    let r = cv_matrix(d, &react, lumped);
    let segs = segments(d);
    let mut kd = DMatrix::zeros(n, n);
    let mut adv = DMatrix::zeros(n, n);
    for (e, ei, ej) in elements() {
        let c = d.corners(ei, ej);
        let o = d.origin(ei, ej);
        for (s, &(from, to, off, nrm, len)) in segs.iter().enumerate() {
            let mid = Point::new(o.x + off.x, o.y + off.y);
            for j in 0..4 {
                let cj = -len * diff(mid) * d.hat_grad(c[j], o, mid).dot(nrm);
                kd[(c[from], c[j])] += cj;
                kd[(c[to], c[j])] -= cj;
            }
            let u = seg_flux[e][s] / len;
            let ups: Vec<(usize, f64)> = if u > 0.0 {
                vec![(c[from], 1.0)]
            } else if u < 0.0 {
                vec![(c[to], 1.0)]
            } else {
                vec![(c[from], 0.5), (c[to], 0.5)]
            };
            for (col, w) in ups {
                adv[(c[from], col)] += len * u * w;
                adv[(c[to], col)] -= len * u * w;
            }
        }
    }
    // point-value lattice and its coarse bilinear reconstruction
    let cells = ((LX / HBAR).round() as usize, (LY / HBAR).round() as usize);
    let lattice: Vec<Point> = (0..=cells.1)
        .flat_map(|lj| (0..=cells.0).map(move |li| Point::new(li as f64 * HBAR, lj as f64 * HBAR)))
        .collect();
    let nl = lattice.len();
    let mut gamma = DMatrix::zeros(nl, n);
    let mut phi = DMatrix::zeros(n, nl);
    for (l, q) in lattice.iter().enumerate() {
        for v in 0..n {
            let x = d.coord(v);
            if (x.x - q.x).abs() < 1e-12 && (x.y - q.y).abs() < 1e-12 {
                gamma[(l, v)] = 1.0;
            }
            phi[(v, l)] = (1.0 - (x.x - q.x).abs() / HBAR).max(0.0) * (1.0 - (x.y - q.y).abs() / HBAR).max(0.0);
        }
    }
    let t0 = part.coarse_time(0);
    let t1 = part.coarse_time(1);
    let data = |s: f64| -> DVector<f64> {
        let w = (s - t0) / (t1 - t0);
        DVector::from_iterator(nl, lattice.iter().map(|&q| (1.0 - w) * truth(q, t0) + w * truth(q, t1)))
    };
    let (s0, s1) = (part.fine_time(1, 0), part.fine_time(1, 1));
    let dt = s1 - s0;
    let a = &kd + &adv + &r;
    let nudge = &m * &phi * &gamma;
    let implicit = &m + (&a + &nudge * MU) * (0.5 * dt);
    let th = DVector::from_column_slice(theta);
    let mut rhs = (&m - &a * (0.5 * dt)) * &th - (&nudge * &th) * (0.5 * dt * MU);
    rhs += (cv_source(d, s0) + cv_source(d, s1)) * (0.5 * dt);
    rhs += &m * &phi * (data(s0) + data(s1)) * (0.5 * dt * MU);
    let gb: Vec<f64> = (0..n).map(|v| if d.fixed(v) { theta_bc(d.coord(v), s1) } else { 0.0 }).collect();
    eliminate(d, &implicit, &rhs, &gb)
}

fn assert_matrix(name: &str, got: &[Vec<f64>], want: &DMatrix<f64>) {
    let scale = want.amax().max(1.0);
    for i in 0..want.nrows() {
        for j in 0..want.ncols() {
            let diff = (got[i][j] - want[(i, j)]).abs();
            assert!(diff <= 1e-12 * scale, "{name}[{i}][{j}]: {} vs {}", got[i][j], want[(i, j)]);
        }
    }
}

fn assert_vector(name: &str, got: &[f64], want: &[f64], tol: f64) {
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= tol * scale, "{name}[{i}]: {g} vs {w}");
    }
}

pub fn check(mass: MassKind) {
    let scn = scenario(mass);
    let setup = Setup::with_hbar(&scn, HBAR, FunctionalKind::PointValue).unwrap();
    let obs = observe(&scn, &setup, Truth::Analytic(&truth)).unwrap();
    let theta = NodalField::from_fn(&setup.mesh, theta0);
    let mut cfg = DriverConfig::default();
    cfg.pressure = SolverConfig {
        rel_tol: 1e-15,
        abs_tol: 1e-300,
        ..SolverConfig::default()
    };
    let got = first_step_matrices(&scn, &setup, MU, &theta, Some(&obs), &cfg).unwrap();
    let d = Dense::new();

    let (pa, pb) = pressure_system(&d, &theta.values);
    assert_matrix("pressure", &got.pressure.0.to_dense(), &pa);
    assert_vector("pressure rhs", &got.pressure.1, pb.as_slice(), 1e-12);
    let p = pa.clone().lu().solve(&pb).unwrap();
    assert_vector("pressure solution", &got.pressure_solution.values, p.as_slice(), 1e-10);

    let flux = local_flux(&d, &theta.values, &got.pressure_solution.values);
    for (e, (g, w)) in got.segment_flux.iter().zip(&flux).enumerate() {
        assert_vector(&format!("segment flux of element {e}"), g, w, 1e-12);
    }

    let (ta, tb) = transport_system(&d, &theta.values, &flux, mass, &scn.partition);
    assert_matrix("transport", &got.transport.0.to_dense(), &ta);
    assert_vector("transport rhs", &got.transport.1, tb.as_slice(), 1e-12);
}
