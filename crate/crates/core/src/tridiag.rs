//! Symmetric tridiagonal matrices: direct solves, products, and Sturm-sequence
//! eigenvalue bisection.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored as its main diagonal and the single
/// off-diagonal (`off[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::invalid("diag", "matrix must have at least one row"));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::invalid(
                "off",
                format!("off-diagonal has {} entries, expected {}", off.len(), diag.len() - 1),
            ));
        }
        Ok(Self { diag, off })
    }

    /// The Dirichlet second-difference operator `(-1, 2, -1) / dt^2` plus an
    /// optional diagonal potential.
    pub fn dirichlet_laplacian(n: usize, dt: f64, potential: Option<&[f64]>) -> Self {
        let inv_dt2 = 1.0 / (dt * dt);
        let mut diag = vec![2.0 * inv_dt2; n];
        if let Some(q) = potential {
            for (d, qi) in diag.iter_mut().zip(q) {
                *d += qi;
            }
        }
        let off = vec![-inv_dt2; n.saturating_sub(1)];
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        debug_assert_eq!(x.len(), n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y.push(acc);
        }
        y
    }

    /// Solves `A u = rhs` by Gaussian elimination without pivoting (Thomas).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        if rhs.len() != n {
            return Err(Error::LengthMismatch {
                len: rhs.len(),
                n_interior: n,
            });
        }
        let scale = self.diag.iter().chain(&self.off).fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);

        let mut upper = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pivot = self.diag[0];
        if !(pivot.abs() > tiny) {
            return Err(Error::SingularPivot { node: 0 });
        }
        y[0] = rhs[0] / pivot;
        for i in 1..n {
            upper[i - 1] = self.off[i - 1] / pivot;
            pivot = self.diag[i] - self.off[i - 1] * upper[i - 1];
            if !(pivot.abs() > tiny) {
                return Err(Error::SingularPivot { node: i });
            }
            y[i] = (rhs[i] - self.off[i - 1] * y[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            y[i] -= upper[i] * y[i + 1];
        }
        Ok(y)
    }

    /// Gershgorin interval `[lo, hi]` containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `lambda`.
    ///
    /// Counts the negative pivots of the LDLᵀ factorization of `A - lambda I`,
    /// which by Sylvester's law of inertia is the number of sign disagreements
    /// in the Sturm sequence of leading principal minors.
    pub fn sturm_count(&self, lambda: f64) -> usize {
        let n = self.diag.len();
        let (lo, hi) = self.gershgorin();
        let guard = f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let mut count = 0;
        let mut q = self.diag[0] - lambda;
        for i in 0..n {
            if i > 0 {
                let e = self.off[i - 1];
                q = (self.diag[i] - lambda) - e * e / q;
            }
            if q.abs() < guard {
                q = -guard;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k` smallest eigenvalues in ascending order, each bisected until its
    /// bracket is no wider than `rel_width` times the Gershgorin magnitude.
    pub fn smallest_eigenvalues(&self, k: usize, rel_width: f64) -> Result<Vec<f64>> {
        let n = self.diag.len();
        if k == 0 || k > n {
            return Err(Error::invalid(
                "k",
                format!("requested {k} eigenvalues of a {n}x{n} matrix"),
            ));
        }
        let (lo, hi) = self.gershgorin();
        let span = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let width = rel_width * span;
        let lo = lo - width;
        let hi = hi + width;

        let mut eigenvalues = Vec::with_capacity(k);
        let mut floor = lo;
        for index in 0..k {
            // The eigenvalue with ascending index `index` is the smallest
            // lambda with sturm_count(lambda) > index.
            let mut a = floor;
            let mut b = hi;
            while b - a > width {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if self.sturm_count(mid) > index {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let value = 0.5 * (a + b);
            eigenvalues.push(value);
            floor = a;
        }
        Ok(eigenvalues)
    }
}
