//! Lawson–Hanson active-set solver for `min ‖A x − b‖₂ subject to x ≥ 0`.
//!
//! The passive-set least-squares subproblem is solved through a QR
//! factorisation of the passive columns that is extended by one column on
//! every addition (classical Gram–Schmidt with reorthogonalisation) and
//! rebuilt whenever variables leave the passive set.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Columns whose orthogonalised norm falls below this fraction of their
/// original norm are treated as dependent on the passive set.
const DEPENDENCE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Array1<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotConverged {
    pub max_iter: usize,
}

/// Reusable solver for a fixed matrix.
#[derive(Debug, Clone)]
pub struct Nnls {
    /// Columns of A stored as rows, n × m.
    columns: Array2<f64>,
    column_norms: Vec<f64>,
    max_iter: usize,
    tol: f64,
}

/// Thin QR of the passive columns.
struct PassiveQr {
    /// Orthonormal columns of Q, each of length m.
    q: Vec<Vec<f64>>,
    /// Columns of R (column j has j + 1 entries).
    r: Vec<Vec<f64>>,
}

impl PassiveQr {
    fn new() -> Self {
        Self {
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    /// Appends column `a`; returns false (and leaves the factorisation
    /// untouched) when `a` is numerically dependent on the current columns.
    fn push(&mut self, a: ArrayView1<f64>, a_norm: f64) -> bool {
        let mut v: Vec<f64> = a.to_vec();
        let mut coeffs = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (c, q) in coeffs.iter_mut().zip(&self.q) {
                let d = dot(q, &v);
                *c += d;
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= d * qi;
                }
            }
        }
        let rho = dot(&v, &v).sqrt();
        if !(rho > DEPENDENCE_RTOL * a_norm) {
            return false;
        }
        for vi in &mut v {
            *vi /= rho;
        }
        coeffs.push(rho);
        self.q.push(v);
        self.r.push(coeffs);
        true
    }

    /// Least-squares coefficients for `b` on the passive columns.
    fn solve(&self, b: ArrayView1<f64>) -> Vec<f64> {
        let p = self.len();
        let mut z: Vec<f64> = self
            .q
            .iter()
            .map(|q| q.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
            .collect();
        for j in (0..p).rev() {
            z[j] /= self.r[j][j];
            let zj = z[j];
            for (i, zi) in z.iter_mut().enumerate().take(j) {
                *zi -= self.r[j][i] * zj;
            }
        }
        z
    }

    fn clear(&mut self) {
        self.q.clear();
        self.r.clear();
    }

    fn pop(&mut self) {
        self.q.pop();
        self.r.pop();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Nnls {
    pub fn new(a: ArrayView2<f64>, max_iter: usize, tol: f64) -> Self {
        let columns = a.t().as_standard_layout().to_owned();
        let column_norms = columns.rows().into_iter().map(|c| c.dot(&c).sqrt()).collect();
        Self {
            columns,
            column_norms,
            max_iter,
            tol,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.columns.nrows()
    }

    /// Gradient of `½‖A x − b‖²` at `x`, i.e. `Aᵀ (A x − b)`.
    pub fn gradient(&self, x: ArrayView1<f64>, b: ArrayView1<f64>) -> Array1<f64> {
        let r = self.residual(x, b);
        -self.columns.dot(&r)
    }

    /// `b − A x`
    fn residual(&self, x: ArrayView1<f64>, b: ArrayView1<f64>) -> Array1<f64> {
        let mut r = b.to_owned();
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                r.scaled_add(-xj, &self.columns.row(j));
            }
        }
        r
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Result<NnlsSolution, NotConverged> {
        let n = self.n_vars();
        let m = b.len();
        assert_eq!(m, self.columns.ncols(), "rhs length must match rows of A");

        let mut x = Array1::<f64>::zeros(n);
        let mut passive: Vec<usize> = Vec::new();
        let mut in_passive = vec![false; n];
        let mut qr = PassiveQr::new();
        let mut iterations = 0;

        loop {
            let r = self.residual(x.view(), b);
            // Dual vector w = Aᵀ r; at x = argmin it is ≤ tol off the passive set.
            let w = self.columns.dot(&r);
            let mut rejected = vec![false; n];

            let entered = loop {
                let candidate = (0..n)
                    .filter(|&j| !in_passive[j] && !rejected[j] && w[j] > self.tol)
                    .max_by(|&a, &b| w[a].total_cmp(&w[b]));
                let Some(j) = candidate else { break None };
                if qr.push(self.columns.row(j), self.column_norms[j]) {
                    // Roundoff guard: the entering variable must come out positive.
                    let z = qr.solve(b);
                    if z[qr.len() - 1] > 0.0 {
                        break Some(j);
                    }
                    qr.pop();
                }
                rejected[j] = true;
            };
            let Some(j) = entered else {
                break;
            };
            iterations += 1;
            if iterations > self.max_iter {
                return Err(NotConverged {
                    max_iter: self.max_iter,
                });
            }
            passive.push(j);
            in_passive[j] = true;

            // Inner loop: restore feasibility of the passive solution.
            loop {
                let z = qr.solve(b);
                if z.iter().all(|&v| v > 0.0) {
                    for (&idx, &v) in passive.iter().zip(&z) {
                        x[idx] = v;
                    }
                    break;
                }
                let mut alpha = f64::INFINITY;
                let mut blocking = passive[0];
                for (&idx, &v) in passive.iter().zip(&z) {
                    if v <= 0.0 {
                        let step = x[idx] / (x[idx] - v);
                        if step < alpha {
                            alpha = step;
                            blocking = idx;
                        }
                    }
                }
                for (&idx, &v) in passive.iter().zip(&z) {
                    x[idx] += alpha * (v - x[idx]);
                }
                x[blocking] = 0.0;
                let zero_below = 16.0 * f64::EPSILON * x.iter().cloned().fold(0.0, f64::max);
                let mut kept = Vec::with_capacity(passive.len());
                for &idx in &passive {
                    if x[idx] <= zero_below {
                        x[idx] = 0.0;
                        in_passive[idx] = false;
                    } else {
                        kept.push(idx);
                    }
                }
                passive = kept;
                qr.clear();
                let mut still: Vec<usize> = Vec::with_capacity(passive.len());
                for &idx in &passive {
                    if qr.push(self.columns.row(idx), self.column_norms[idx]) {
                        still.push(idx);
                    } else {
                        x[idx] = 0.0;
                        in_passive[idx] = false;
                    }
                }
                passive = still;
                if passive.is_empty() {
                    break;
                }
            }
        }

        let r = self.residual(x.view(), b);
        Ok(NnlsSolution {
            residual_norm: r.dot(&r).sqrt(),
            x,
            iterations,
        })
    }
}

/// Convenience wrapper around [`Nnls`].
pub fn nnls(
    a: ArrayView2<f64>,
    b: ArrayView1<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<NnlsSolution, NotConverged> {
    Nnls::new(a, max_iter, tol).solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive oracle: enumerate every support set, solve the
    /// unconstrained least-squares problem on it, keep feasible candidates,
    /// and return the best objective.
    fn brute_force(a: &Array2<f64>, b: &Array1<f64>) -> (Array1<f64>, f64) {
        let n = a.ncols();
        let mut best = (Array1::zeros(n), b.dot(b).sqrt());
        for mask in 1u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
            let sub = Array2::from_shape_fn((a.nrows(), support.len()), |(i, k)| a[[i, support[k]]]);
            let sol = crate::linalg::svd(sub.view()).pinv(1e-12).dot(b);
            if sol.iter().any(|&v| v < -1e-14) {
                continue;
            }
            let mut x = Array1::zeros(n);
            for (k, &j) in support.iter().enumerate() {
                x[j] = sol[k].max(0.0);
            }
            let r = b - &a.dot(&x);
            let obj = r.dot(&r).sqrt();
            if obj < best.1 - 1e-15 {
                best = (x, obj);
            }
        }
        best
    }

    #[test]
    fn toy_system_matches_enumeration() {
        let a = array![[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]];
        let b = array![2.0, -1.0];
        let sol = nnls(a.view(), b.view(), 100, 1e-12).unwrap();
        let (bx, bobj) = brute_force(&a, &b);
        assert_eq!(sol.x, array![2.0, 0.0, 0.0]);
        assert_eq!(sol.x, bx);
        assert!((sol.residual_norm - bobj).abs() < 1e-15);
        assert_eq!(sol.residual_norm, 1.0);
    }

    #[test]
    fn random_small_systems_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (rows, cols) in [(2, 3), (3, 2), (4, 4), (3, 5)] {
            for _ in 0..200 {
                let a = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
                let b = Array1::from_shape_fn(rows, |_| rng.random_range(-2.0..2.0));
                let sol = nnls(a.view(), b.view(), 100, 1e-12).unwrap();
                let (_, bobj) = brute_force(&a, &b);
                assert!((sol.residual_norm - bobj).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn kkt_conditions_at_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Array2::from_shape_fn((20, 60), |_| rng.random_range(0.0..1.0));
        let solver = Nnls::new(a.view(), 500, 1e-10);
        for _ in 0..50 {
            let b = Array1::from_shape_fn(20, |_| rng.random_range(-1.0..3.0));
            let sol = solver.solve(b.view()).unwrap();
            let g = solver.gradient(sol.x.view(), b.view());
            for (j, (&xj, &gj)) in sol.x.iter().zip(g.iter()).enumerate() {
                assert!(xj >= 0.0);
                if xj > 0.0 {
                    assert!(gj.abs() < 1e-9, "free {j}: {gj}");
                } else {
                    assert!(gj > -1e-9, "active {j}: {gj}");
                }
            }
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let a = array![[1.0, 0.5], [0.2, 1.0]];
        let b = array![1.0, 1.0];
        assert_eq!(nnls(a.view(), b.view(), 1, 1e-12), Err(NotConverged { max_iter: 1 }));
    }

    #[test]
    fn all_negative_target_gives_zero() {
        let a = array![[1.0, 2.0], [0.5, 1.0]];
        let b = array![-1.0, -3.0];
        let sol = nnls(a.view(), b.view(), 10, 1e-12).unwrap();
        assert_eq!(sol.x, array![0.0, 0.0]);
        assert_eq!(sol.iterations, 0);
    }
}
