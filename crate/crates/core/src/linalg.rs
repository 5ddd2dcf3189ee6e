//! Singular value decomposition by one-sided Jacobi rotations, and the
//! pseudo-inverse / minimum-norm least-squares solves built on it.

use ndarray::{Array1, Array2, ArrayView2, Axis};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U · diag(s) · Vᵀ` with singular values sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    /// rows(A) × k
    pub u: Array2<f64>,
    /// k = min(rows, cols)
    pub s: Array1<f64>,
    /// cols(A) × k
    pub v: Array2<f64>,
}

impl Svd {
    /// Singular values below `rcond · σ_max` are treated as zero.
    pub fn rank(&self, rcond: f64) -> usize {
        let cutoff = self.cutoff(rcond);
        self.s.iter().filter(|&&s| s > cutoff).count()
    }

    fn cutoff(&self, rcond: f64) -> f64 {
        rcond * self.s.iter().cloned().fold(0.0, f64::max)
    }

    fn inverse_singular_values(&self, rcond: f64) -> Array1<f64> {
        let cutoff = self.cutoff(rcond);
        self.s.mapv(|s| if s > cutoff { 1.0 / s } else { 0.0 })
    }

    /// Moore–Penrose pseudo-inverse `V · diag(1/s) · Uᵀ`.
    pub fn pinv(&self, rcond: f64) -> Array2<f64> {
        let inv = self.inverse_singular_values(rcond);
        let scaled = &self.v * &inv.view().insert_axis(Axis(0));
        scaled.dot(&self.u.t())
    }

    /// Minimum-norm least-squares solutions for a batch of right-hand sides
    /// stored as rows of `b` (each row has `rows(A)` entries). Returns one
    /// solution per row.
    pub fn solve_rows(&self, b: ArrayView2<f64>, rcond: f64) -> Array2<f64> {
        let inv = self.inverse_singular_values(rcond);
        let mut coeffs = b.dot(&self.u);
        coeffs *= &inv.view().insert_axis(Axis(0));
        coeffs.dot(&self.v.t())
    }
}

/// Computes the thin SVD of an arbitrary dense matrix.
pub fn svd(a: ArrayView2<f64>) -> Svd {
    let (rows, cols) = a.dim();
    if rows >= cols {
        // Columns of A are rows of Aᵀ.
        let (s, right, left) = jacobi(a.t().as_standard_layout().into_owned());
        Svd { u: left, s, v: right }
    } else {
        let (s, right, left) = jacobi(a.as_standard_layout().into_owned());
        // Factorised Aᵀ = left · s · rightᵀ, so A = right · s · leftᵀ.
        Svd { u: right, s, v: left }
    }
}

/// One-sided Jacobi on the columns of `B = wᵀ` (w holds those columns as
/// rows, so updates stay contiguous). Returns `(s, V, U)` with
/// `B = U · diag(s) · Vᵀ`, where `U` has `w.ncols()` rows.
fn jacobi(mut w: Array2<f64>) -> (Array1<f64>, Array2<f64>, Array2<f64>) {
    let (k, n) = w.dim();
    let mut v = Array2::<f64>::eye(k);
    let eps = f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let (alpha, beta, gamma) = {
                    let wp = w.row(p);
                    let wq = w.row(q);
                    (wp.dot(&wp), wq.dot(&wq), wp.dot(&wq))
                };
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut s = Array1::zeros(k);
    let mut right = Array2::zeros((k, k));
    let mut left = Array2::zeros((n, k));
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        // v stores Jᵀ row-wise because rows were rotated, so V = vᵀ.
        right.column_mut(dst).assign(&v.row(src));
        if norms[src] > 0.0 {
            left.column_mut(dst).assign(&(&w.row(src) / norms[src]));
        }
    }
    (s, right, left)
}

fn rotate_rows(m: &mut Array2<f64>, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.ncols();
    let data = m.as_slice_mut().expect("standard layout");
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Frobenius norm.
pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative Frobenius residuals of the four Penrose conditions for the pair
/// `(a, a_pinv)`, in the order `A A⁺ A = A`, `A⁺ A A⁺ = A⁺`, `(A A⁺)ᵀ = A A⁺`,
/// `(A⁺ A)ᵀ = A⁺ A`.
pub fn penrose_residuals(a: ArrayView2<f64>, a_pinv: ArrayView2<f64>) -> [f64; 4] {
    let aap = a.dot(&a_pinv);
    let apa = a_pinv.dot(&a);
    let rel = |x: Array2<f64>, reference: f64| frobenius(x.view()) / reference.max(f64::MIN_POSITIVE);
    [
        rel(&aap.dot(&a) - &a, frobenius(a)),
        rel(&apa.dot(&a_pinv) - &a_pinv, frobenius(a_pinv)),
        rel(&aap.t() - &aap, frobenius(aap.view())),
        rel(&apa.t() - &apa, frobenius(apa.view())),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    fn reconstruct(svd: &Svd) -> Array2<f64> {
        (&svd.u * &svd.s.view().insert_axis(Axis(0))).dot(&svd.v.t())
    }

    #[test]
    fn reconstructs_tall_and_wide() {
        for (r, c) in [(7, 4), (4, 7), (5, 5), (1, 3)] {
            let a = random(r, c, (r * 10 + c) as u64);
            let d = svd(a.view());
            assert_eq!(d.u.dim(), (r, r.min(c)));
            assert_eq!(d.v.dim(), (c, r.min(c)));
            let err = frobenius((&reconstruct(&d) - &a).view());
            assert!(err < 1e-12, "{r}x{c}: {err}");
            assert!(d.s.windows(2).into_iter().all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn known_singular_values() {
        let a = array![[3.0, 0.0], [0.0, -2.0], [0.0, 0.0]];
        let d = svd(a.view());
        assert!((d.s[0] - 3.0).abs() < 1e-15);
        assert!((d.s[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pinv_of_identity_is_identity() {
        let eye = Array2::<f64>::eye(6);
        let p = svd(eye.view()).pinv(1e-10);
        assert!(frobenius((&p - &eye).view()) < 1e-15);
    }

    #[test]
    fn rank_deficient_pinv_satisfies_penrose() {
        // rank 2 matrix, 5 x 8
        let a = random(5, 2, 1).dot(&random(2, 8, 2));
        let d = svd(a.view());
        assert_eq!(d.rank(1e-10), 2);
        let p = d.pinv(1e-10);
        for r in penrose_residuals(a.view(), p.view()) {
            assert!(r < 1e-10, "{r}");
        }
    }

    #[test]
    fn solve_rows_is_min_norm() {
        let a = random(3, 6, 9);
        let d = svd(a.view());
        let b = random(4, 3, 10);
        let x = d.solve_rows(b.view(), 1e-10);
        // Exact fit for a full-row-rank system.
        let fit = x.dot(&a.t());
        assert!(frobenius((&fit - &b).view()) < 1e-12);
        // Minimum norm: solution lies in the row space of A.
        let p = d.pinv(1e-10);
        let projected = x.dot(&p.dot(&a).t());
        assert!(frobenius((&projected - &x).view()) < 1e-12);
    }
}
