//! Small statistics helpers shared by the experiment kinds.

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

pub fn aggregate(xs: &[f64]) -> Aggregate {
    let n = xs.len();
    if n == 0 {
        return Aggregate {
            n: 0,
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Aggregate {
            n,
            mean,
            stderr: 0.0,
        };
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    Aggregate {
        n,
        mean,
        stderr: (var / n as f64).sqrt(),
    }
}

/// Measurement floor below which scaling points are excluded from the fit;
/// gaps at the floor flatten the slope spuriously.
pub const SLOPE_FLOOR: f64 = 1e-6;

/// Ordinary least squares slope of `log2(y)` against `log2(x)`, skipping
/// points with `y < SLOPE_FLOOR`. `None` with fewer than two usable points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y >= SLOPE_FLOOR)
        .map(|(x, y)| (x.log2(), y.log2()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|p| p.0).sum();
    let sy: f64 = usable.iter().map(|p| p.1).sum();
    let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Stable per-replication seed derivation.
pub fn replication_seed(base_seed: u64, rep: usize) -> u64 {
    base_seed.wrapping_add(rep as u64)
}
