//! Gaussian kernel density estimates of score distributions and the
//! percent overlap between two of them.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::format_real;
use crate::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    samples: Vec<f64>,
}

impl KdeEstimate {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .samples
            .iter()
            .map(|&s| {
                let u = (x - s) / h;
                (-0.5 * u * u).exp()
            })
            .sum();
        sum * INV_SQRT_2PI / (self.samples.len() as f64 * h)
    }

    pub fn evaluate_on(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.evaluate(x)).collect()
    }

    /// Trapezoidal mass of the density over its own grid.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Rule-of-thumb bandwidth `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`. Falls back
/// to the standard deviation when the IQR is zero.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Insufficient("KDE needs at least two scores".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if samples.iter().all(|&s| s == samples[0]) || !(sd > 0.0) {
        return Err(Error::InvalidData("KDE input has zero variance".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * n.powf(-0.2))
}

/// Gaussian KDE evaluated on `grid_size` points spanning
/// `[min - 3h, max + 3h]`.
pub fn kde(scores: &[f64], grid_size: usize) -> Result<KdeEstimate> {
    if grid_size < 2 {
        return Err(Error::param("KDE grid needs at least 2 points"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidData("non-finite score".into()));
    }
    let h = silverman_bandwidth(scores)?;
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let mut est = KdeEstimate {
        grid: linspace(lo, hi, grid_size),
        density: Vec::new(),
        bandwidth: h,
        samples: scores.to_vec(),
    };
    est.density = est.evaluate_on(&est.grid);
    Ok(est)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect()
}

/// Grid covering both estimates' spans, with the larger of the two sizes.
pub fn shared_grid(a: &KdeEstimate, b: &KdeEstimate) -> Vec<f64> {
    let lo = a.grid[0].min(b.grid[0]);
    let hi = a.grid[a.grid.len() - 1].max(b.grid[b.grid.len() - 1]);
    linspace(lo, hi, a.grid.len().max(b.grid.len()))
}

/// `100 * integral of min(f_a, f_b)` on the shared grid, in `[0, 100]`.
pub fn overlap_percent(a: &KdeEstimate, b: &KdeEstimate) -> f64 {
    let grid = shared_grid(a, b);
    let fa = a.evaluate_on(&grid);
    let fb = b.evaluate_on(&grid);
    let lower: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x.min(*y)).collect();
    (100.0 * trapezoid(&grid, &lower)).clamp(0.0, 100.0)
}

/// Writes `x,density_g1,density_g2` on the shared grid of the two estimates.
pub fn write_kde_pair_csv(g1: &KdeEstimate, g2: &KdeEstimate, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let grid = shared_grid(g1, g2);
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "x,density_g1,density_g2").map_err(io)?;
    for &x in &grid {
        writeln!(
            w,
            "{},{},{}",
            format_real(x),
            format_real(g1.evaluate(x)),
            format_real(g2.evaluate(x))
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_sample(n: usize, mean: f64, seed: u64) -> Vec<f64> {
        let mut r = rng::seeded(seed, 0);
        (0..n)
            .map(|_| mean + Distribution::<f64>::sample(&StandardNormal, &mut r))
            .collect()
    }

    #[test]
    fn standard_normal_peak() {
        let s = normal_sample(1000, 0.0, 1);
        let est = kde(&s, 512).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((est.evaluate(mean) - 0.3989).abs() < 0.05);
        assert!(est.mass() >= 0.95 && est.mass() <= 1.0 + 1e-9);
    }

    #[test]
    fn constant_input_rejected() {
        assert!(kde(&[0.3; 10], 64).is_err());
        assert!(kde(&[0.3], 64).is_err());
    }

    #[test]
    fn deterministic_and_self_overlap() {
        let s = normal_sample(500, 0.2, 2);
        let a = kde(&s, 256).unwrap();
        let b = kde(&s, 256).unwrap();
        assert_eq!(a, b);
        assert!((overlap_percent(&a, &b) - 100.0).abs() <= 0.5);
    }

    #[test]
    fn disjoint_supports_do_not_overlap() {
        let a = kde(&normal_sample(300, 0.0, 3), 256).unwrap();
        let b = kde(&normal_sample(300, 50.0, 4), 256).unwrap();
        assert!(overlap_percent(&a, &b) < 1.0);
    }

    #[test]
    fn two_normals_overlap_matches_closed_form() {
        // overlap of N(0,1) and N(2,1) is 2 * Phi(-1)
        use statrs::distribution::{ContinuousCDF, Normal};
        let expected = 200.0 * Normal::new(0.0, 1.0).unwrap().cdf(-1.0);
        let a = kde(&normal_sample(10_000, 0.0, 5), 512).unwrap();
        let b = kde(&normal_sample(10_000, 2.0, 6), 512).unwrap();
        let o = overlap_percent(&a, &b);
        assert!((o - expected).abs() < 3.0, "overlap {o} vs {expected}");
        assert_eq!(o, overlap_percent(&b, &a));
    }

    #[test]
    fn iqr_zero_falls_back_to_sd() {
        let mut s = vec![0.0; 20];
        s.push(1.0);
        assert!(silverman_bandwidth(&s).unwrap() > 0.0);
    }
}
