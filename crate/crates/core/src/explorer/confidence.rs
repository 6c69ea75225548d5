//! Accumulated ellipsoid constraints with membership, projection and
//! boundary sampling.
//!
//! Episode boundaries append, per moment level and per series, a constraint
//! `||theta - center||_Sigma <= radius` on the frozen snapshot covariance.
//! The set always carries the parameter-norm ball `||theta||_2 <= B`; the
//! first episode's set is the ball alone. Constraints are stored
//! struct-of-arrays so membership scans stay contiguous.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numkit::{cholesky_lower, solve_transposed_lower};

/// Which regression series produced a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Series {
    /// Trajectory-uncertainty series.
    Hat,
    /// Pseudo-value series.
    Tilde,
}

/// Provenance of one stored constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintMeta {
    /// Episode whose optimization this constraint first restricts.
    pub episode: usize,
    pub series: Series,
    pub level: usize,
}

/// Inward shrink applied by projection so projected points pass the exact
/// membership test despite rounding.
const PROJECTION_SHRINK: f64 = 1e-9;
const PROJECTION_MAX_SWEEPS: usize = 100;
const BOUNDARY_DRAW_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceSet {
    dim: usize,
    ball_bound: f64,
    /// Keep only constraints from the most recent `window` episodes when set.
    window: Option<usize>,
    meta: Vec<ConstraintMeta>,
    /// `count x d` centers.
    centers: Vec<f64>,
    /// `count x d^2` frozen forward metrics.
    sigmas: Vec<f64>,
    radii: Vec<f64>,
}

impl ConfidenceSet {
    pub fn new(dim: usize, ball_bound: f64, window: Option<usize>) -> Self {
        Self {
            dim,
            ball_bound,
            window,
            meta: Vec::new(),
            centers: Vec::new(),
            sigmas: Vec::new(),
            radii: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ball_bound(&self) -> f64 {
        self.ball_bound
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn meta(&self, idx: usize) -> ConstraintMeta {
        self.meta[idx]
    }

    pub fn center(&self, idx: usize) -> &[f64] {
        &self.centers[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn sigma(&self, idx: usize) -> &[f64] {
        &self.sigmas[idx * self.dim * self.dim..(idx + 1) * self.dim * self.dim]
    }

    pub fn radius(&self, idx: usize) -> f64 {
        self.radii[idx]
    }

    pub fn push(&mut self, meta: ConstraintMeta, center: &[f64], sigma: &[f64], radius: f64) {
        debug_assert_eq!(center.len(), self.dim);
        debug_assert_eq!(sigma.len(), self.dim * self.dim);
        self.meta.push(meta);
        self.centers.extend_from_slice(center);
        self.sigmas.extend_from_slice(sigma);
        self.radii.push(radius);
        if let Some(w) = self.window {
            let cutoff = meta.episode.saturating_sub(w);
            let keep_from = self
                .meta
                .iter()
                .position(|m| m.episode > cutoff)
                .unwrap_or(0);
            if keep_from > 0 {
                self.meta.drain(..keep_from);
                self.centers.drain(..keep_from * self.dim);
                self.sigmas.drain(..keep_from * self.dim * self.dim);
                self.radii.drain(..keep_from);
            }
        }
    }

    /// `||theta - center||_Sigma` for constraint `idx`.
    pub fn distance(&self, idx: usize, theta: &[f64]) -> f64 {
        let d = self.dim;
        let c = self.center(idx);
        let m = self.sigma(idx);
        let mut quad = 0.0;
        for i in 0..d {
            let di = theta[i] - c[i];
            let row = &m[i * d..(i + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                s += row[j] * (theta[j] - c[j]);
            }
            quad += di * s;
        }
        quad.max(0.0).sqrt()
    }

    fn euclid_norm(theta: &[f64]) -> f64 {
        theta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Conjunction of the ball test and every stored ellipsoid; scanned
    /// newest-first so infeasible points exit quickly.
    pub fn contains(&self, theta: &[f64]) -> bool {
        if Self::euclid_norm(theta) > self.ball_bound {
            return false;
        }
        for idx in (0..self.len()).rev() {
            if self.distance(idx, theta) > self.radii[idx] {
                return false;
            }
        }
        true
    }

    /// Index of the first violated constraint (`None` = member; the ball is
    /// reported as `usize::MAX`).
    pub fn first_violation(&self, theta: &[f64]) -> Option<usize> {
        if Self::euclid_norm(theta) > self.ball_bound {
            return Some(usize::MAX);
        }
        (0..self.len()).find(|&idx| self.distance(idx, theta) > self.radii[idx])
    }

    /// Alternating radial projection sweeps until membership; each violated
    /// constraint pulls the point to just inside its boundary in its own
    /// metric. Returns `None` after the sweep cap.
    pub fn project(&self, start: &[f64]) -> Option<Vec<f64>> {
        let d = self.dim;
        let mut theta = start.to_vec();
        for _ in 0..PROJECTION_MAX_SWEEPS {
            let mut moved = false;
            let norm = Self::euclid_norm(&theta);
            if norm > self.ball_bound {
                let scale = self.ball_bound * (1.0 - PROJECTION_SHRINK) / norm;
                for t in &mut theta {
                    *t *= scale;
                }
                moved = true;
            }
            for idx in 0..self.len() {
                let dist = self.distance(idx, &theta);
                if dist > self.radii[idx] {
                    let scale = self.radii[idx] * (1.0 - PROJECTION_SHRINK) / dist;
                    let c = &self.centers[idx * d..(idx + 1) * d];
                    for i in 0..d {
                        theta[i] = c[i] + scale * (theta[i] - c[i]);
                    }
                    moved = true;
                }
            }
            if !moved {
                return Some(theta);
            }
        }
        if self.contains(&theta) {
            Some(theta)
        } else {
            None
        }
    }

    /// Draws up to `count` members from the boundary of the newest
    /// tilde level-0 ellipsoid (the ball boundary before any constraints
    /// exist), rejecting points outside the full set. Shares one global
    /// draw budget.
    pub fn sample_boundary_members(&self, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        let d = self.dim;
        let mut out = Vec::new();
        if count == 0 {
            return out;
        }

        let newest = (0..self.len())
            .rev()
            .find(|&i| self.meta[i].series == Series::Tilde && self.meta[i].level == 0)
            .or_else(|| self.len().checked_sub(1));
        let chol = newest.and_then(|idx| cholesky_lower(d, self.sigma(idx)));

        let mut draws = 0;
        let mut dir = vec![0.0; d];
        while out.len() < count && draws < BOUNDARY_DRAW_BUDGET {
            draws += 1;
            gaussian_direction(&mut dir, rng);
            let cand = match (newest, &chol) {
                (Some(idx), Some(l)) => {
                    // x = center + radius * L^{-T} u has ||x - c||_Sigma = radius
                    let offset = solve_transposed_lower(d, l, &dir);
                    let c = self.center(idx);
                    let r = self.radii[idx] * (1.0 - PROJECTION_SHRINK);
                    (0..d).map(|i| c[i] + r * offset[i]).collect::<Vec<f64>>()
                }
                _ => {
                    let r = self.ball_bound * (1.0 - PROJECTION_SHRINK);
                    dir.iter().map(|&u| r * u).collect()
                }
            };
            if self.contains(&cand) {
                out.push(cand);
            }
        }
        out
    }
}

/// Unit direction via Box-Muller pairs, deterministic from the RNG stream.
fn gaussian_direction(out: &mut [f64], rng: &mut impl Rng) {
    loop {
        let mut i = 0;
        while i < out.len() {
            let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.gen();
            let mag = (-2.0 * u1.ln()).sqrt();
            out[i] = mag * (std::f64::consts::TAU * u2).cos();
            if i + 1 < out.len() {
                out[i + 1] = mag * (std::f64::consts::TAU * u2).sin();
            }
            i += 2;
        }
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in out.iter_mut() {
                *x /= norm;
            }
            return;
        }
    }
}

/// Convenience for explorer internals: validates shared dimensions.
pub fn check_dim(set: &ConfidenceSet, theta: &[f64]) -> Result<()> {
    if theta.len() != set.dim() {
        return Err(invalid("theta length != confidence set dimension"));
    }
    Ok(())
}
