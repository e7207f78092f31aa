//! Convex function oracles: value, proximal map and Fenchel conjugate.
//!
//! Three families are supported: the zero function, a strongly convex
//! quadratic `½xᵀAx + bᵀx + c`, and the pointwise maximum of two such
//! quadratics that share the same Hessian `A`. Because the Hessian is shared,
//! the difference of the two pieces is affine in `x`, which makes both the
//! proximal map and the conjugate closed-form.
//!
//! Conjugate values that are `+∞` (only possible for the zero function at a
//! nonzero argument) are returned as [`f64::INFINITY`] and propagate through
//! sums.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::ModelError;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative tolerance for the symmetry check on Hessians.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Fenchel–Young gaps in `[-FY_CLAMP, 0)` are reported as zero.
pub const FY_CLAMP: f64 = 1e-10;

/// Below this slope the two pieces of a max-of-quadratics are treated as
/// differing by a constant.
const DEGENERATE_SLOPE: f64 = 1e-14;

fn check_dim(expected: usize, v: &Vector) -> Result<(), ModelError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch {
            expected,
            actual: v.len(),
        })
    }
}

/// Checks symmetry and positive definiteness and returns the Cholesky factor.
fn factor_spd(a: &Matrix) -> Result<Cholesky<f64, Dyn>, ModelError> {
    if !a.is_square() {
        return Err(ModelError::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(ModelError::NotSymmetric(asym));
    }
    let sym = (a + a.transpose()) * 0.5;
    let min_eig = sym
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        return Err(ModelError::NotPositiveDefinite(min_eig));
    }
    Cholesky::new(sym).ok_or(ModelError::NotPositiveDefinite(min_eig))
}

fn shifted_factor(a: &Matrix, s: f64) -> Cholesky<f64, Dyn> {
    let n = a.nrows();
    let m = a + Matrix::identity(n, n) * s;
    // A is SPD and s > 0, so A + sI is SPD.
    Cholesky::new(m).expect("A + sI is positive definite")
}

/// `x ↦ ½xᵀAx + bᵀx + c` with `A` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    a: Matrix,
    b: Vector,
    c: f64,
    chol: Cholesky<f64, Dyn>,
}

impl QuadraticForm {
    pub fn new(a: Matrix, b: Vector, c: f64) -> Result<Self, ModelError> {
        let chol = factor_spd(&a)?;
        check_dim(a.nrows(), &b)?;
        Ok(Self { a, b, c, chol })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x) + self.c
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.a * x + &self.b
    }
}

impl PartialEq for QuadraticForm {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b && self.c == other.c
    }
}

/// `max{½xᵀAx + b₁ᵀx + c₁, ½xᵀAx + b₂ᵀx + c₂}` with a shared SPD Hessian.
#[derive(Debug, Clone)]
pub struct MaxOfQuadratics {
    a: Matrix,
    b1: Vector,
    c1: f64,
    b2: Vector,
    c2: f64,
    chol: Cholesky<f64, Dyn>,
}

impl MaxOfQuadratics {
    pub fn new(a: Matrix, b1: Vector, c1: f64, b2: Vector, c2: f64) -> Result<Self, ModelError> {
        let chol = factor_spd(&a)?;
        check_dim(a.nrows(), &b1)?;
        check_dim(a.nrows(), &b2)?;
        Ok(Self {
            a,
            b1,
            c1,
            b2,
            c2,
            chol,
        })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn first(&self) -> (&Vector, f64) {
        (&self.b1, self.c1)
    }

    pub fn second(&self) -> (&Vector, f64) {
        (&self.b2, self.c2)
    }

    pub fn dim(&self) -> usize {
        self.b1.len()
    }

    /// Values of the two pieces at `x`.
    pub fn piece_values(&self, x: &Vector) -> (f64, f64) {
        let quad = 0.5 * x.dot(&(&self.a * x));
        (
            quad + self.b1.dot(x) + self.c1,
            quad + self.b2.dot(x) + self.c2,
        )
    }

    /// Gradients of the two pieces at `x`.
    pub fn piece_gradients(&self, x: &Vector) -> (Vector, Vector) {
        let ax = &self.a * x;
        (&ax + &self.b1, ax + &self.b2)
    }

    fn prox(&self, s: f64, x_temp: &Vector) -> Vector {
        let shifted = shifted_factor(&self.a, s);
        let sx = x_temp * s;
        let x1 = shifted.solve(&(&sx - &self.b1));
        let x2 = shifted.solve(&(&sx - &self.b2));
        let d = &self.b1 - &self.b2;
        let dc = self.c1 - self.c2;
        // g(λ) = f₁(x(λ)) − f₂(x(λ)) with x(λ) = λx₁ + (1−λ)x₂; affine, nonincreasing.
        let g1 = d.dot(&x1) + dc;
        let g0 = d.dot(&x2) + dc;
        let lambda = if (g0 - g1).abs() < DEGENERATE_SLOPE {
            let g_half = 0.5 * (g0 + g1);
            if g_half >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else if g1 >= 0.0 {
            1.0
        } else if g0 <= 0.0 {
            0.0
        } else {
            g0 / (g0 - g1)
        };
        if lambda == 1.0 {
            x1
        } else if lambda == 0.0 {
            x2
        } else {
            x1 * lambda + x2 * (1.0 - lambda)
        }
    }

    fn conjugate(&self, z: &Vector) -> f64 {
        let u = z - &self.b2;
        let d = &self.b1 - &self.b2;
        let dc = self.c1 - self.c2;
        let w = self.chol.solve(&u);
        let q = self.chol.solve(&d);
        let curvature = d.dot(&q);
        let h = |lambda: f64| {
            let r = &u - &d * lambda;
            0.5 * r.dot(&self.chol.solve(&r)) - (self.c2 + lambda * dc)
        };
        if curvature <= f64::MIN_POSITIVE {
            return h(0.0).min(h(1.0));
        }
        let lambda = ((d.dot(&w) + dc) / curvature).clamp(0.0, 1.0);
        h(lambda)
    }
}

impl PartialEq for MaxOfQuadratics {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
            && self.b1 == other.b1
            && self.c1 == other.c1
            && self.b2 == other.b2
            && self.c2 == other.c2
    }
}

/// A closed convex function with a cheap proximal map.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexFunction {
    Zero,
    Quadratic(QuadraticForm),
    MaxTwoQuadratics(MaxOfQuadratics),
}

impl ConvexFunction {
    /// Dimension of the domain, or `None` for the zero function.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Zero => None,
            Self::Quadratic(q) => Some(q.dim()),
            Self::MaxTwoQuadratics(q) => Some(q.dim()),
        }
    }

    fn check(&self, v: &Vector) -> Result<(), ModelError> {
        match self.dim() {
            Some(m) => check_dim(m, v),
            None => Ok(()),
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<f64, ModelError> {
        self.check(x)?;
        Ok(match self {
            Self::Zero => 0.0,
            Self::Quadratic(q) => q.value(x),
            Self::MaxTwoQuadratics(q) => {
                let (f1, f2) = q.piece_values(x);
                f1.max(f2)
            }
        })
    }

    /// Returns `(x, z)` with `x = argmin (s/2)‖x_temp − x‖² + f(x)` and
    /// `z = s(x_temp − x) ∈ ∂f(x)`.
    pub fn prox(&self, s: f64, x_temp: &Vector) -> Result<(Vector, Vector), ModelError> {
        if !(s > 0.0) {
            return Err(ModelError::NonPositiveWeight(s));
        }
        self.check(x_temp)?;
        let x = match self {
            Self::Zero => x_temp.clone(),
            Self::Quadratic(q) => shifted_factor(&q.a, s).solve(&(x_temp * s - &q.b)),
            Self::MaxTwoQuadratics(q) => q.prox(s, x_temp),
        };
        let z = (x_temp - &x) * s;
        Ok((x, z))
    }

    /// `f*(z) = sup_x ⟨z, x⟩ − f(x)`; `+∞` for the zero function at `z ≠ 0`.
    pub fn conjugate(&self, z: &Vector) -> Result<f64, ModelError> {
        self.check(z)?;
        Ok(match self {
            Self::Zero => {
                if z.iter().all(|&v| v == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Quadratic(q) => {
                let r = z - &q.b;
                0.5 * r.dot(&q.chol.solve(&r)) - q.c
            }
            Self::MaxTwoQuadratics(q) => q.conjugate(z),
        })
    }

    /// `f(x) + f*(z) − ⟨x, z⟩`, which is nonnegative and vanishes iff `z ∈ ∂f(x)`.
    pub fn fenchel_young_gap(&self, x: &Vector, z: &Vector) -> Result<f64, ModelError> {
        check_dim(x.len(), z)?;
        let conj = self.conjugate(z)?;
        if conj.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let gap = self.eval(x)? + conj - x.dot(z);
        Ok(if (-FY_CLAMP..0.0).contains(&gap) {
            0.0
        } else {
            gap
        })
    }
}
