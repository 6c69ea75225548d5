//! Small dense positive-definite matrix bookkeeping.
//!
//! A [`PrecisionState`] is one weighted ridge regressor: it tracks
//! `sigma = lambda*I + sum_i w_i x_i x_i^T`, its inverse, its log-determinant
//! and the weighted response accumulator `b = sum_i w_i y_i x_i`. Rank-one
//! updates keep the inverse current via the Sherman-Morrison identity in
//! O(d^2); a periodic dense re-factorization caps floating-point drift over
//! long runs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// How many rank-one updates are applied between dense re-factorizations,
/// as a multiple of the dimension.
const REFACTOR_INTERVAL_PER_DIM: usize = 10;

/// Cholesky factorization of a symmetric positive-definite matrix stored
/// row-major. Returns the lower factor `L` with `A = L L^T`, or `None` if a
/// pivot is not strictly positive.
pub fn cholesky_lower(dim: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    Some(l)
}

/// Solves `L L^T x = rhs` given the lower Cholesky factor.
pub fn cholesky_solve(dim: usize, l: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut y = rhs.to_vec();
    for i in 0..dim {
        for k in 0..i {
            y[i] -= l[i * dim + k] * y[k];
        }
        y[i] /= l[i * dim + i];
    }
    for i in (0..dim).rev() {
        for k in (i + 1)..dim {
            y[i] -= l[k * dim + i] * y[k];
        }
        y[i] /= l[i * dim + i];
    }
    y
}

/// Solves the upper-triangular system `L^T x = rhs` given the lower factor.
pub fn solve_transposed_lower(dim: usize, l: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut x = rhs.to_vec();
    for i in (0..dim).rev() {
        for k in (i + 1)..dim {
            x[i] -= l[k * dim + i] * x[k];
        }
        x[i] /= l[i * dim + i];
    }
    x
}

/// One weighted ridge regressor's sufficient statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecisionState {
    dim: usize,
    lambda: f64,
    /// `lambda*I + sum w_i x_i x_i^T`, row-major symmetric.
    sigma: Vec<f64>,
    /// Inverse of `sigma`, maintained incrementally.
    sigma_inv: Vec<f64>,
    /// `log det(sigma)`, maintained incrementally.
    logdet: f64,
    /// Weighted response accumulator `sum w_i y_i x_i`.
    b: Vec<f64>,
    updates_since_refactor: usize,
}

impl PrecisionState {
    /// Fresh regressor: `sigma = lambda*I`, `b = 0`.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("precision dimension must be >= 1"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!(
                "ridge parameter must be positive, got {lambda}"
            )));
        }
        let mut sigma = vec![0.0; dim * dim];
        let mut sigma_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            sigma[i * dim + i] = lambda;
            sigma_inv[i * dim + i] = 1.0 / lambda;
        }
        Ok(Self {
            dim,
            lambda,
            sigma,
            sigma_inv,
            logdet: dim as f64 * lambda.ln(),
            b: vec![0.0; dim],
            updates_since_refactor: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &[f64] {
        &self.sigma_inv
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `sigma += weight * x x^T`, `b += weight * y * x`; the inverse and the
    /// log-determinant follow by the rank-one identities.
    pub fn rank_one_update(&mut self, x: &[f64], weight: f64, y: f64) -> Result<()> {
        let d = self.dim;
        if x.len() != d {
            return Err(invalid(format!("feature length {} != dim {}", x.len(), d)));
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(invalid(format!(
                "update weight must be positive, got {weight}"
            )));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite update input"));
        }

        // v = sigma_inv * x, quad = x^T sigma_inv x
        let mut v = vec![0.0; d];
        for i in 0..d {
            let row = &self.sigma_inv[i * d..(i + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                s += row[j] * x[j];
            }
            v[i] = s;
        }
        let mut quad = 0.0;
        for i in 0..d {
            quad += x[i] * v[i];
        }
        let denom = 1.0 + weight * quad.max(0.0);

        for i in 0..d {
            let wxi = weight * x[i];
            let row = &mut self.sigma[i * d..(i + 1) * d];
            for j in 0..d {
                row[j] += wxi * x[j];
            }
            self.b[i] += weight * y * x[i];
        }
        let scale = weight / denom;
        for i in 0..d {
            let svi = scale * v[i];
            let row = &mut self.sigma_inv[i * d..(i + 1) * d];
            for j in 0..d {
                row[j] -= svi * v[j];
            }
        }
        self.logdet += denom.ln();

        self.updates_since_refactor += 1;
        if self.updates_since_refactor >= REFACTOR_INTERVAL_PER_DIM * d {
            self.refactorize()?;
        }
        Ok(())
    }

    /// Recomputes `sigma_inv` and `logdet` from `sigma` by dense Cholesky.
    pub fn refactorize(&mut self) -> Result<()> {
        let d = self.dim;
        let l = cholesky_lower(d, &self.sigma)
            .ok_or_else(|| invalid("sigma lost positive definiteness"))?;
        let mut inv = vec![0.0; d * d];
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = cholesky_solve(d, &l, &e);
            for i in 0..d {
                inv[i * d + j] = col[i];
            }
            e[j] = 0.0;
        }
        // symmetrize to remove forward/back substitution asymmetry
        for i in 0..d {
            for j in 0..i {
                let s = 0.5 * (inv[i * d + j] + inv[j * d + i]);
                inv[i * d + j] = s;
                inv[j * d + i] = s;
            }
        }
        self.sigma_inv = inv;
        self.logdet = 2.0 * (0..d).map(|i| l[i * d + i].ln()).sum::<f64>();
        self.updates_since_refactor = 0;
        Ok(())
    }

    /// `sqrt(x^T sigma_inv x)` — the feature norm in the inverse metric.
    /// Zero iff `x = 0`; non-finite inputs propagate.
    pub fn inv_norm(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        let mut quad = 0.0;
        for i in 0..d {
            let row = &self.sigma_inv[i * d..(i + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                s += row[j] * x[j];
            }
            quad += x[i] * s;
        }
        quad.max(0.0).sqrt()
    }

    /// `sqrt((x-c)^T sigma (x-c))` — distance from `c` in the forward metric,
    /// as used by ellipsoid membership tests.
    pub fn sigma_norm_from(&self, center: &[f64], x: &[f64]) -> f64 {
        let d = self.dim;
        let mut quad = 0.0;
        for i in 0..d {
            let di = x[i] - center[i];
            let row = &self.sigma[i * d..(i + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                s += row[j] * (x[j] - center[j]);
            }
            quad += di * s;
        }
        quad.max(0.0).sqrt()
    }

    /// The ridge solution `sigma_inv * b`.
    pub fn solve_estimate(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let row = &self.sigma_inv[i * d..(i + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                s += row[j] * self.b[j];
            }
            out[i] = s;
        }
        out
    }

    /// Flat checkpoint record: `[dim, lambda, sigma row-major, b]`.
    pub fn to_record(&self) -> Vec<f64> {
        let mut rec = Vec::with_capacity(2 + self.dim * self.dim + self.dim);
        rec.push(self.dim as f64);
        rec.push(self.lambda);
        rec.extend_from_slice(&self.sigma);
        rec.extend_from_slice(&self.b);
        rec
    }

    /// Rebuilds a state from [`Self::to_record`] output; the inverse and the
    /// log-determinant are recomputed by dense factorization.
    pub fn from_record(rec: &[f64]) -> Result<Self> {
        if rec.len() < 2 {
            return Err(invalid("record too short"));
        }
        let dim = rec[0] as usize;
        if dim == 0 || rec[0].fract() != 0.0 {
            return Err(invalid("record dim field is not a positive integer"));
        }
        let lambda = rec[1];
        let expect = 2 + dim * dim + dim;
        if rec.len() != expect {
            return Err(invalid(format!(
                "record length {} != expected {expect}",
                rec.len()
            )));
        }
        let mut state = Self::new(dim, lambda)?;
        state.sigma.copy_from_slice(&rec[2..2 + dim * dim]);
        state.b.copy_from_slice(&rec[2 + dim * dim..]);
        state.refactorize()?;
        Ok(state)
    }
}

/// True iff `det(sigma_current) / det(sigma_snapshot) <= threshold^2`, i.e.
/// `exp((logdet_cur - logdet_snap)/2) <= threshold`. The caller guarantees
/// that `current` descends from `snapshot` by rank-one updates.
pub fn det_ratio_within(
    snapshot: &PrecisionState,
    current: &PrecisionState,
    threshold: f64,
) -> Result<bool> {
    if snapshot.dim != current.dim {
        return Err(invalid(format!(
            "dimension mismatch: snapshot {} vs current {}",
            snapshot.dim, current.dim
        )));
    }
    if snapshot.lambda != current.lambda {
        return Err(invalid(
            "ridge parameter mismatch between snapshot and current",
        ));
    }
    Ok(((current.logdet - snapshot.logdet) / 2.0).exp() <= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent dense inversion by Gauss-Jordan with partial pivoting.
    /// Kept deliberately separate from the Cholesky path under test.
    fn gauss_jordan_inverse(dim: usize, a: &[f64]) -> Vec<f64> {
        let mut aug = vec![0.0; dim * 2 * dim];
        for i in 0..dim {
            for j in 0..dim {
                aug[i * 2 * dim + j] = a[i * dim + j];
            }
            aug[i * 2 * dim + dim + i] = 1.0;
        }
        for col in 0..dim {
            let mut piv = col;
            for r in col + 1..dim {
                if aug[r * 2 * dim + col].abs() > aug[piv * 2 * dim + col].abs() {
                    piv = r;
                }
            }
            if piv != col {
                for j in 0..2 * dim {
                    aug.swap(col * 2 * dim + j, piv * 2 * dim + j);
                }
            }
            let p = aug[col * 2 * dim + col];
            for j in 0..2 * dim {
                aug[col * 2 * dim + j] /= p;
            }
            for r in 0..dim {
                if r != col {
                    let f = aug[r * 2 * dim + col];
                    for j in 0..2 * dim {
                        aug[r * 2 * dim + j] -= f * aug[col * 2 * dim + j];
                    }
                }
            }
        }
        let mut inv = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                inv[i * dim + j] = aug[i * 2 * dim + dim + j];
            }
        }
        inv
    }

    /// Determinant by LU with partial pivoting, independent of logdet tracking.
    fn dense_det(dim: usize, a: &[f64]) -> f64 {
        let mut m = a.to_vec();
        let mut det = 1.0;
        for col in 0..dim {
            let mut piv = col;
            for r in col + 1..dim {
                if m[r * dim + col].abs() > m[piv * dim + col].abs() {
                    piv = r;
                }
            }
            if piv != col {
                for j in 0..dim {
                    m.swap(col * dim + j, piv * dim + j);
                }
                det = -det;
            }
            let p = m[col * dim + col];
            det *= p;
            for r in col + 1..dim {
                let f = m[r * dim + col] / p;
                for j in col..dim {
                    m[r * dim + j] -= f * m[col * dim + j];
                }
            }
        }
        det
    }

    fn random_updates(
        state: &mut PrecisionState,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<(Vec<f64>, f64, f64)> {
        let d = state.dim();
        let mut log = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w = rng.gen_range(0.1..10.0);
            let y = rng.gen_range(-1.0..1.0);
            state.rank_one_update(&x, w, y).unwrap();
            log.push((x, w, y));
        }
        log
    }

    #[test]
    fn init_identity_case() {
        let s = PrecisionState::new(2, 1.0).unwrap();
        assert_eq!(s.sigma(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.sigma_inv(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.logdet(), 0.0);
        assert_eq!(s.b(), &[0.0, 0.0]);
    }

    #[test]
    fn init_diagonal_logdet() {
        let s = PrecisionState::new(3, 4.0).unwrap();
        assert!((s.logdet() - 3.0 * 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn init_scalar_case() {
        let s = PrecisionState::new(1, 0.5).unwrap();
        assert_eq!(s.sigma(), &[0.5]);
        assert_eq!(s.sigma_inv(), &[2.0]);
    }

    #[test]
    fn init_rejects_bad_args() {
        assert!(PrecisionState::new(0, 1.0).is_err());
        assert!(PrecisionState::new(2, 0.0).is_err());
        assert!(PrecisionState::new(2, -1.0).is_err());
    }

    #[test]
    fn axis_aligned_update() {
        let mut s = PrecisionState::new(2, 1.0).unwrap();
        s.rank_one_update(&[1.0, 0.0], 1.0, 0.5).unwrap();
        assert_eq!(s.sigma(), &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.sigma_inv(), &[0.5, 0.0, 0.0, 1.0]);
        assert_eq!(s.b(), &[0.5, 0.0]);
        assert!((s.logdet() - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_feature_is_noop() {
        let mut s = PrecisionState::new(3, 2.0).unwrap();
        let before = s.clone();
        s.rank_one_update(&[0.0, 0.0, 0.0], 1.5, 0.7).unwrap();
        assert_eq!(s.sigma(), before.sigma());
        assert_eq!(s.sigma_inv(), before.sigma_inv());
        assert_eq!(s.logdet(), before.logdet());
        assert_eq!(s.b(), before.b());
    }

    #[test]
    fn update_rejects_non_finite() {
        let mut s = PrecisionState::new(2, 1.0).unwrap();
        assert!(s.rank_one_update(&[f64::NAN, 0.0], 1.0, 0.0).is_err());
        assert!(s.rank_one_update(&[1.0, 0.0], 0.0, 0.0).is_err());
        assert!(s.rank_one_update(&[1.0, 0.0], 1.0, f64::INFINITY).is_err());
        assert!(s.rank_one_update(&[1.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn incremental_inverse_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = PrecisionState::new(4, 1.3).unwrap();
        random_updates(&mut s, 20, &mut rng);
        let direct = gauss_jordan_inverse(4, s.sigma());
        for (a, b) in s.sigma_inv().iter().zip(direct.iter()) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn inv_norm_euclidean_under_identity() {
        let s = PrecisionState::new(2, 1.0).unwrap();
        assert!((s.inv_norm(&[3.0, 4.0]) - 5.0).abs() < 1e-12);
        assert_eq!(s.inv_norm(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn inv_norm_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = PrecisionState::new(3, 0.7).unwrap();
        random_updates(&mut s, 10, &mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let inv = gauss_jordan_inverse(3, s.sigma());
        let mut quad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                quad += x[i] * inv[i * 3 + j] * x[j];
            }
        }
        let expect = quad.sqrt();
        assert!((s.inv_norm(&x) - expect).abs() <= 1e-9 * expect.max(1.0));
    }

    #[test]
    fn solve_estimate_fresh_is_zero() {
        let s = PrecisionState::new(4, 2.0).unwrap();
        assert_eq!(s.solve_estimate(), vec![0.0; 4]);
    }

    #[test]
    fn solve_estimate_single_update_closed_form() {
        let mut s = PrecisionState::new(2, 1.0).unwrap();
        s.rank_one_update(&[1.0, 0.0], 1.0, 2.0).unwrap();
        let est = s.solve_estimate();
        assert!((est[0] - 1.0).abs() < 1e-12);
        assert!(est[1].abs() < 1e-12);
    }

    #[test]
    fn solve_estimate_matches_batch_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let d = 5;
        let lambda = 0.9;
        let mut s = PrecisionState::new(d, lambda).unwrap();
        let log = random_updates(&mut s, 30, &mut rng);

        // batch oracle: (lambda*I + sum w x x^T)^{-1} (sum w y x)
        let mut gram = vec![0.0; d * d];
        for i in 0..d {
            gram[i * d + i] = lambda;
        }
        let mut rhs = vec![0.0; d];
        for (x, w, y) in &log {
            for i in 0..d {
                for j in 0..d {
                    gram[i * d + j] += w * x[i] * x[j];
                }
                rhs[i] += w * y * x[i];
            }
        }
        let inv = gauss_jordan_inverse(d, &gram);
        let mut expect = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                expect[i] += inv[i * d + j] * rhs[j];
            }
        }
        let est = s.solve_estimate();
        for i in 0..d {
            assert!(
                (est[i] - expect[i]).abs() <= 1e-8 * expect[i].abs().max(1.0),
                "component {i}: {} vs {}",
                est[i],
                expect[i]
            );
        }
    }

    #[test]
    fn det_ratio_trivial_cases() {
        let s = PrecisionState::new(3, 1.0).unwrap();
        assert!(det_ratio_within(&s, &s, 1.0).unwrap());
        assert!(det_ratio_within(&s, &s, 4.0).unwrap());
    }

    #[test]
    fn det_ratio_after_large_gain() {
        let snap = PrecisionState::new(1, 1.0).unwrap();
        let mut cur = snap.clone();
        // single scalar update with 1 + w*x^2 = 20
        cur.rank_one_update(&[1.0], 19.0, 0.0).unwrap();
        assert!((cur.logdet() - 20.0f64.ln()).abs() < 1e-12);
        assert!(!det_ratio_within(&snap, &cur, 4.0).unwrap());
        assert!(det_ratio_within(&snap, &cur, 20.0f64.sqrt() + 1e-9).unwrap());
    }

    #[test]
    fn det_ratio_matches_dense_determinants() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut snap = PrecisionState::new(3, 1.1).unwrap();
        random_updates(&mut snap, 5, &mut rng);
        let mut cur = snap.clone();
        random_updates(&mut cur, 12, &mut rng);
        let ratio = (dense_det(3, cur.sigma()) / dense_det(3, snap.sigma())).sqrt();
        for thr in [1.0, 1.5, 2.0, 4.0, 8.0] {
            assert_eq!(det_ratio_within(&snap, &cur, thr).unwrap(), ratio <= thr);
        }
    }

    #[test]
    fn det_ratio_dimension_mismatch() {
        let a = PrecisionState::new(2, 1.0).unwrap();
        let b = PrecisionState::new(3, 1.0).unwrap();
        assert!(det_ratio_within(&a, &b, 4.0).is_err());
    }

    #[test]
    fn record_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut s = PrecisionState::new(4, 0.6).unwrap();
        random_updates(&mut s, 17, &mut rng);
        let rec = s.to_record();
        let back = PrecisionState::from_record(&rec).unwrap();
        assert_eq!(back.sigma(), s.sigma());
        assert_eq!(back.b(), s.b());
        assert!((back.logdet() - s.logdet()).abs() < 1e-9);
        for (a, b) in back.sigma_inv().iter().zip(s.sigma_inv().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn long_run_stays_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 4;
        let mut s = PrecisionState::new(d, 1.0).unwrap();
        random_updates(&mut s, 100, &mut rng);
        // sigma * sigma_inv ~= I
        let mut max_err: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += s.sigma()[i * d + k] * s.sigma_inv()[k * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                max_err = max_err.max((acc - target).abs());
            }
        }
        assert!(max_err <= 1e-8, "drift {max_err}");
        let det = dense_det(d, s.sigma());
        assert!((s.logdet() - det.ln()).abs() <= 1e-6);
    }
}
