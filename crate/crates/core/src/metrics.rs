//! Threshold-sweep error rates, EER and the fairness discrepancy rate.
//!
//! A trial is accepted iff its score is `>= tau`. Operating points are
//! chosen on the pooled (group-agnostic) impostor scores; the per-group
//! rates are then read off at that shared threshold. For two groups the
//! fairness discrepancy rate is
//!
//! ```text
//! FaDR(tau) = 1 - (omega * |FAR_g1 - FAR_g2| + (1 - omega) * |FRR_g1 - FRR_g2|)
//! ```
//!
//! and auFaDR-FAR is the trapezoidal area under `100 * FaDR` plotted against
//! the pooled FAR in percent. Over the default 1%..10% grid a perfectly fair
//! system scores 900.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::format_real;
use crate::scoring::ScorePartition;
use crate::{Error, Result};

/// Fraction of `impostor` scores accepted at `tau`. Input must be sorted.
pub fn far_at(impostor: &[f64], tau: f64) -> Result<f64> {
    if impostor.is_empty() {
        return Err(Error::Empty("impostor scores"));
    }
    Ok(accepted(impostor, tau) as f64 / impostor.len() as f64)
}

/// Fraction of `genuine` scores rejected at `tau`. Input must be sorted.
pub fn frr_at(genuine: &[f64], tau: f64) -> Result<f64> {
    if genuine.is_empty() {
        return Err(Error::Empty("genuine scores"));
    }
    Ok(rejected(genuine, tau) as f64 / genuine.len() as f64)
}

fn rejected(sorted: &[f64], tau: f64) -> usize {
    sorted.partition_point(|&s| s < tau)
}

fn accepted(sorted: &[f64], tau: f64) -> usize {
    sorted.len() - rejected(sorted, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub tau: f64,
    pub pooled_far: f64,
}

/// Smallest threshold among the pooled impostor scores and `+inf` whose
/// pooled FAR does not exceed `target_far`.
pub fn threshold_for_pooled_far(partition: &ScorePartition, target_far: f64) -> Result<OperatingPoint> {
    if !(target_far > 0.0 && target_far <= 1.0) {
        return Err(Error::param(format!("target FAR {target_far} outside (0, 1]")));
    }
    let n = partition.pooled_impostor.len();
    threshold_with_budget(&partition.pooled_impostor, target_far * n as f64)
}

/// Same search with the target given in percent. The accepted-count budget
/// is `percent * n / 100`, which is exact for grid values on a 0.25 step.
fn threshold_for_far_percent(pooled_impostor: &[f64], percent: f64) -> Result<OperatingPoint> {
    let n = pooled_impostor.len();
    threshold_with_budget(pooled_impostor, percent * n as f64 / 100.0)
}

fn threshold_with_budget(pooled_impostor: &[f64], budget: f64) -> Result<OperatingPoint> {
    let n = pooled_impostor.len();
    if n == 0 {
        return Err(Error::Empty("pooled impostor scores"));
    }
    // Accepted counts only shrink as tau rises, so the first distinct value
    // within budget is the smallest admissible threshold.
    let mut i = 0;
    while i < n {
        let v = pooled_impostor[i];
        if (n - i) as f64 <= budget {
            return Ok(OperatingPoint {
                tau: v,
                pooled_far: (n - i) as f64 / n as f64,
            });
        }
        while i < n && pooled_impostor[i] == v {
            i += 1;
        }
    }
    Ok(OperatingPoint {
        tau: f64::INFINITY,
        pooled_far: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupErrorRates {
    pub far_g1: f64,
    pub far_g2: f64,
    pub frr_g1: f64,
    pub frr_g2: f64,
}

impl GroupErrorRates {
    pub fn at(partition: &ScorePartition, tau: f64) -> Result<Self> {
        Ok(Self {
            far_g1: far_at(&partition.impostor_g1, tau)?,
            far_g2: far_at(&partition.impostor_g2, tau)?,
            frr_g1: frr_at(&partition.genuine_g1, tau)?,
            frr_g2: frr_at(&partition.genuine_g2, tau)?,
        })
    }

    pub fn swapped(&self) -> Self {
        Self {
            far_g1: self.far_g2,
            far_g2: self.far_g1,
            frr_g1: self.frr_g2,
            frr_g2: self.frr_g1,
        }
    }
}

/// Weight of the FAR discrepancy in FaDR; the FRR discrepancy gets
/// `1 - omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadrParams {
    omega: f64,
}

impl FadrParams {
    pub fn new(omega: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::param(format!("omega {omega} outside [0, 1]")));
        }
        Ok(Self { omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

/// The omega values reported by default, FAR-only first.
pub const DEFAULT_OMEGAS: [f64; 5] = [1.0, 0.75, 0.5, 0.25, 0.0];

pub fn fadr(rates: &GroupErrorRates, params: FadrParams) -> f64 {
    let w = params.omega;
    let far_gap = (rates.far_g1 - rates.far_g2).abs();
    let frr_gap = (rates.frr_g1 - rates.frr_g2).abs();
    1.0 - (w * far_gap + (1.0 - w) * frr_gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadrPoint {
    /// Requested pooled FAR (grid value), percent.
    pub far_percent: f64,
    pub fadr_percent: f64,
    pub tau: f64,
    /// Pooled FAR actually reached at `tau`, as a fraction.
    pub achieved_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadrCurve {
    pub points: Vec<FadrPoint>,
}

/// Pooled FAR grid in percent from `min` to `max` inclusive.
pub fn far_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min > 0.0 && max <= 100.0 && min <= max && step > 0.0) {
        return Err(Error::param(format!(
            "FAR grid needs 0 < min <= max <= 100 and step > 0 (got {min}, {max}, {step})"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| min + step * k as f64).collect())
}

/// 1% to 10% in 0.25% steps (37 points).
pub fn default_far_grid() -> Vec<f64> {
    far_grid(1.0, 10.0, 0.25).expect("static grid")
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("FAR grid"));
    }
    if grid.iter().any(|&p| !(p > 0.0 && p <= 100.0)) {
        return Err(Error::param("FAR grid values must lie in (0, 100]"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("FAR grid must be strictly increasing"));
    }
    Ok(())
}

pub fn fadr_curve(partition: &ScorePartition, params: FadrParams, far_grid_percent: &[f64]) -> Result<FadrCurve> {
    check_grid(far_grid_percent)?;
    let points = far_grid_percent
        .iter()
        .map(|&pct| {
            let op = threshold_for_far_percent(&partition.pooled_impostor, pct)?;
            let rates = GroupErrorRates::at(partition, op.tau)?;
            Ok(FadrPoint {
                far_percent: pct,
                fadr_percent: 100.0 * fadr(&rates, params),
                tau: op.tau,
                achieved_far: op.pooled_far,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FadrCurve { points })
}

/// Trapezoidal area under the FaDR curve (percent x percent).
pub fn au_fadr(curve: &FadrCurve) -> Result<f64> {
    let pts = &curve.points;
    if pts.len() < 2 {
        return Err(Error::Insufficient(format!(
            "auFaDR needs at least 2 curve points, got {}",
            pts.len()
        )));
    }
    Ok(pts
        .windows(2)
        .map(|w| 0.5 * (w[1].far_percent - w[0].far_percent) * (w[0].fadr_percent + w[1].fadr_percent))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerPoint {
    pub eer: f64,
    pub tau: f64,
    pub far: f64,
    pub frr: f64,
}

/// Equal error rate over all distinct scores and the `-inf`/`+inf`
/// sentinels.
///
/// The chosen threshold minimizes `|FAR - FRR|`; ties prefer the smaller
/// `(FAR + FRR) / 2`, then the smaller threshold. The reported EER is that
/// midpoint.
pub fn eer(genuine: &[f64], impostor: &[f64]) -> Result<EerPoint> {
    if genuine.is_empty() {
        return Err(Error::Empty("genuine scores"));
    }
    if impostor.is_empty() {
        return Err(Error::Empty("impostor scores"));
    }
    let mut gen = genuine.to_vec();
    let mut imp = impostor.to_vec();
    gen.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);
    let (ng, ni) = (gen.len() as f64, imp.len() as f64);

    let mut best: Option<(f64, EerPoint)> = None;
    let mut consider = |tau: f64, rejected_gen: usize, rejected_imp: usize| {
        let far = (imp.len() - rejected_imp) as f64 / ni;
        let frr = rejected_gen as f64 / ng;
        let gap = (far - frr).abs();
        let point = EerPoint {
            eer: 0.5 * (far + frr),
            tau,
            far,
            frr,
        };
        let better = match &best {
            None => true,
            Some((g, p)) => gap < *g || (gap == *g && point.eer < p.eer),
        };
        if better {
            best = Some((gap, point));
        }
    };

    // Ascending sweep: at threshold v, everything strictly below v is
    // rejected. Candidates come in increasing order, so keeping the first of
    // equal candidates implements the smaller-tau tie break.
    consider(f64::NEG_INFINITY, 0, 0);
    let (mut i, mut j) = (0, 0);
    while i < gen.len() || j < imp.len() {
        let v = match (gen.get(i), imp.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        consider(v, i, j);
        while i < gen.len() && gen[i] == v {
            i += 1;
        }
        while j < imp.len() && imp[j] == v {
            j += 1;
        }
    }
    consider(f64::INFINITY, gen.len(), imp.len());
    Ok(best.expect("at least the sentinels were considered").1)
}

/// Per-group FAR and FRR (percent) at each pooled-FAR operating point.
/// Signed, so the direction of a discrepancy is visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCurvePoint {
    pub far_percent: f64,
    pub far_g1: f64,
    pub far_g2: f64,
    pub frr_g1: f64,
    pub frr_g2: f64,
}

pub fn group_error_curves(partition: &ScorePartition, far_grid_percent: &[f64]) -> Result<Vec<GroupCurvePoint>> {
    check_grid(far_grid_percent)?;
    far_grid_percent
        .iter()
        .map(|&pct| {
            let op = threshold_for_far_percent(&partition.pooled_impostor, pct)?;
            let r = GroupErrorRates::at(partition, op.tau)?;
            Ok(GroupCurvePoint {
                far_percent: pct,
                far_g1: 100.0 * r.far_g1,
                far_g2: 100.0 * r.far_g2,
                frr_g1: 100.0 * r.frr_g1,
                frr_g2: 100.0 * r.frr_g2,
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

/// Writes `far_percent,fadr_percent`.
pub fn write_fadr_curve_csv(curve: &FadrCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "far_percent,fadr_percent").map_err(io)?;
    for p in &curve.points {
        writeln!(w, "{},{}", format_real(p.far_percent), format_real(p.fadr_percent)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes `far_percent,far_g1,far_g2,frr_g1,frr_g2`.
pub fn write_group_curves_csv(points: &[GroupCurvePoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "far_percent,far_g1,far_g2,frr_g1,frr_g2").map_err(io)?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_real(p.far_percent),
            format_real(p.far_g1),
            format_real(p.far_g2),
            format_real(p.frr_g1),
            format_real(p.frr_g2)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
