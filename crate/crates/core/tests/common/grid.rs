//! Nested-grid brute force for two-dimensional max-of-quadratics.

use dirdyk::MaxOfQuadratics;

/// Plain-array copy of a two-dimensional max of quadratics.
pub struct Plain {
    a: [[f64; 2]; 2],
    b: [[f64; 2]; 2],
    c: [f64; 2],
}

impl Plain {
    pub fn new(q: &MaxOfQuadratics) -> Self {
        let a = q.a();
        let (b1, c1) = q.first();
        let (b2, c2) = q.second();
        Self {
            a: [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]],
            b: [[b1[0], b1[1]], [b2[0], b2[1]]],
            c: [c1, c2],
        }
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        let quad = 0.5
            * (self.a[0][0] * x[0] * x[0]
                + 2.0 * self.a[0][1] * x[0] * x[1]
                + self.a[1][1] * x[1] * x[1]);
        let p = |k: usize| quad + self.b[k][0] * x[0] + self.b[k][1] * x[1] + self.c[k];
        p(0).max(p(1))
    }

    /// Eigenvalues of `A + shift·I`, ascending.
    fn eigen(&self, shift: f64) -> (f64, f64) {
        let (p, q, r) = (self.a[0][0] + shift, self.a[0][1], self.a[1][1] + shift);
        let mid = 0.5 * (p + r);
        let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        (mid - rad, mid + rad)
    }

    /// Solves `(A + shift·I) x = rhs` by Cramer's rule.
    fn solve(&self, shift: f64, rhs: [f64; 2]) -> [f64; 2] {
        let (p, q, r) = (self.a[0][0] + shift, self.a[0][1], self.a[1][1] + shift);
        let det = p * r - q * q;
        [
            (r * rhs[0] - q * rhs[1]) / det,
            (p * rhs[1] - q * rhs[0]) / det,
        ]
    }

    fn offset(&self) -> ([f64; 2], f64) {
        let d = [self.b[0][0] - self.b[1][0], self.b[0][1] - self.b[1][1]];
        (d, (d[0] * d[0] + d[1] * d[1]).sqrt())
    }
}

/// Nested-grid minimizer of a strongly convex function of two variables.
///
/// The lattice is laid out in coordinates across (`u`) and along (`w`) the
/// line where the two pieces meet, with `u = 0` on that line, so the kink
/// is always sampled exactly. `kappa` is the condition number used to size
/// the next window around the best lattice point.
fn grid_min(
    f: impl Fn([f64; 2]) -> f64,
    normal: [f64; 2],
    kink_u: f64,
    center: [f64; 2],
    radius: f64,
    kappa: f64,
) -> [f64; 2] {
    const POINTS: i64 = 101;
    let tangent = [-normal[1], normal[0]];
    let to_x = |u: f64, w: f64| {
        [
            u * normal[0] + w * tangent[0],
            u * normal[1] + w * tangent[1],
        ]
    };
    let mut uc = center[0] * normal[0] + center[1] * normal[1];
    let mut wc = center[0] * tangent[0] + center[1] * tangent[1];
    let mut r = radius;
    loop {
        let h = 2.0 * r / (POINTS - 1) as f64;
        let k_lo = ((uc - r - kink_u) / h).floor() as i64;
        let k_hi = ((uc + r - kink_u) / h).ceil() as i64;
        let mut best = (f64::INFINITY, uc, wc);
        for ku in k_lo..=k_hi {
            let u = kink_u + ku as f64 * h;
            for kw in 0..POINTS {
                let w = wc - r + kw as f64 * h;
                let v = f(to_x(u, w));
                if v < best.0 {
                    best = (v, u, w);
                }
            }
        }
        uc = best.1;
        wc = best.2;
        if h < 1e-10 {
            return to_x(uc, wc);
        }
        r = (kappa.sqrt() + 2.0) * h;
    }
}

pub fn brute_prox(p: &Plain, s: f64, t: [f64; 2]) -> [f64; 2] {
    let (d, dn) = p.offset();
    let normal = [d[0] / dn, d[1] / dn];
    let kink_u = -(p.c[0] - p.c[1]) / dn;
    let bm = [0.5 * (p.b[0][0] + p.b[1][0]), 0.5 * (p.b[0][1] + p.b[1][1])];
    let center = p.solve(s, [s * t[0] - bm[0], s * t[1] - bm[1]]);
    let (lo, hi) = p.eigen(s);
    let radius = 1.5 * dn / (2.0 * lo) + 1e-3;
    let obj = |x: [f64; 2]| p.eval(x) + 0.5 * s * ((x[0] - t[0]).powi(2) + (x[1] - t[1]).powi(2));
    grid_min(obj, normal, kink_u, center, radius, hi / lo)
}

pub fn brute_conjugate(p: &Plain, z: [f64; 2]) -> f64 {
    let (d, dn) = p.offset();
    let normal = [d[0] / dn, d[1] / dn];
    let kink_u = -(p.c[0] - p.c[1]) / dn;
    let bm = [0.5 * (p.b[0][0] + p.b[1][0]), 0.5 * (p.b[0][1] + p.b[1][1])];
    let center = p.solve(0.0, [z[0] - bm[0], z[1] - bm[1]]);
    let (lo, hi) = p.eigen(0.0);
    let radius = 1.5 * dn / (2.0 * lo) + 1e-3;
    let obj = |x: [f64; 2]| p.eval(x) - z[0] * x[0] - z[1] * x[1];
    let x = grid_min(obj, normal, kink_u, center, radius, hi / lo);
    -obj(x)
}
