//! Multiscale covariance scanning.
//!
//! Every seeded interval `(a, b]` is scanned with the detector
//! `T(s, k, e) = sqrt((k - s)(e - k) / (e - s)) |gamma(k, e) - gamma(s, k)|_inf`
//! and change points are selected by the narrowest-over-threshold rule:
//! among the surviving intervals whose peak exceeds the threshold, the
//! shortest one (then the larger peak, then the smaller left bound) fires,
//! its peak location is recorded, and every interval containing it is
//! discarded.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::data::{mad_standardize, CrossProductSums, RegressionDataset, MAD_CONSISTENCY};
use crate::error::{Error, Result};
use crate::seeded::{IntervalSet, SeededInterval};

/// Threshold constant used with `pi = c_pi sqrt(log(n p))` on standardised data.
pub const DEFAULT_C_PI: f64 = 1.9;

/// `c_pi sqrt(log(n p))`.
pub fn default_threshold(n: f64, p: f64, c_pi: f64) -> f64 {
    c_pi * (n * p).ln().max(0.0).sqrt()
}

/// `2 log(n p)`.
pub fn default_trimming(n: f64, p: f64) -> f64 {
    2.0 * (n * p).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trimming {
    /// `2 log(n p)`.
    Default,
    Value(f64),
}

impl Trimming {
    pub fn resolve(self, n: usize, p: usize) -> f64 {
        match self {
            Trimming::Default => default_trimming(n as f64, p as f64).max(0.0),
            Trimming::Value(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdKind {
    Fixed(f64),
    /// `c_pi sqrt(log(n p))`.
    DefaultFixed { c_pi: f64 },
    /// Elbow of the solution path.
    Automatic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    pub kind: ThresholdKind,
    pub trim: Trimming,
}

impl ThresholdPolicy {
    pub fn fixed(pi: f64) -> Self {
        Self {
            kind: ThresholdKind::Fixed(pi),
            trim: Trimming::Default,
        }
    }

    pub fn default_fixed() -> Self {
        Self {
            kind: ThresholdKind::DefaultFixed { c_pi: DEFAULT_C_PI },
            trim: Trimming::Default,
        }
    }

    pub fn automatic() -> Self {
        Self {
            kind: ThresholdKind::Automatic,
            trim: Trimming::Default,
        }
    }

    pub fn with_trim(mut self, trim: Trimming) -> Self {
        self.trim = trim;
        self
    }

    fn validate(&self) -> Result<()> {
        let pi = match self.kind {
            ThresholdKind::Fixed(pi) => pi,
            ThresholdKind::DefaultFixed { c_pi } => c_pi,
            ThresholdKind::Automatic => 0.0,
        };
        if !(pi >= 0.0) {
            return Err(Error::domain(format!("threshold must be nonnegative, got {pi}")));
        }
        if let Trimming::Value(v) = self.trim {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("trimming must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Maximum of the detector over the trimmed scan range of one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorPeak {
    pub interval: SeededInterval,
    pub k_star: usize,
    pub t_star: f64,
    /// Coordinate attaining the sup-norm at `k_star`.
    pub argmax_coord: usize,
}

/// `T(s, k, e)` for `0 <= s < k < e <= n`.
pub fn detector(sums: &CrossProductSums, s: usize, k: usize, e: usize) -> Result<f64> {
    if !(s < k && k < e && e <= sums.n()) {
        return Err(Error::domain(format!(
            "detector needs 0 <= s < k < e <= n, got ({s}, {k}, {e}) with n = {}",
            sums.n()
        )));
    }
    Ok(statistic(sums, s, k, e).0)
}

#[inline]
fn statistic(sums: &CrossProductSums, s: usize, k: usize, e: usize) -> (f64, usize) {
    let (left, right) = ((k - s) as f64, (e - k) as f64);
    let scale = (left * right / (e - s) as f64).sqrt();
    let (ss, sk, se) = (sums.row(s), sums.row(k), sums.row(e));
    let mut best = 0.0;
    let mut coord = 0;
    for i in 0..sums.p() {
        let v = ((se[i] - sk[i]) / right - (sk[i] - ss[i]) / left).abs();
        if v > best {
            best = v;
            coord = i;
        }
    }
    (scale * best, coord)
}

/// Scans `k` over `a + w + 1 ..= b - w - 1` with `w = floor(trim)`; `None`
/// when `b - a <= 2w` or the range is empty. Ties go to the smallest `k`.
pub fn scan_interval(
    sums: &CrossProductSums,
    interval: &SeededInterval,
    trim: f64,
) -> Option<DetectorPeak> {
    let (a, b) = (interval.a, interval.b);
    let w = trim.max(0.0).floor() as usize;
    if b > sums.n() || b - a <= 2 * w {
        return None;
    }
    let (lo, hi) = (a + w + 1, b - w - 1);
    if lo > hi {
        return None;
    }
    let mut peak = DetectorPeak {
        interval: *interval,
        k_star: lo,
        t_star: f64::NEG_INFINITY,
        argmax_coord: 0,
    };
    for k in lo..=hi {
        let (t, coord) = statistic(sums, a, k, b);
        if t > peak.t_star {
            peak.t_star = t;
            peak.k_star = k;
            peak.argmax_coord = coord;
        }
    }
    Some(peak)
}

/// Peaks of every interval that survives trimming, in interval-set order.
pub fn peak_table(sums: &CrossProductSums, intervals: &IntervalSet, trim: f64) -> Vec<DetectorPeak> {
    intervals
        .as_slice()
        .par_iter()
        .filter_map(|iv| scan_interval(sums, iv, trim))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// Strictly increasing estimates in `(0, n)`.
    pub change_points: Vec<usize>,
    /// Detecting interval and peak for each change point, in the same order.
    pub peaks: Vec<DetectorPeak>,
    /// For fixed thresholds the `pi` used; for automatic selection the lowest
    /// threshold reproducing the chosen solution; 0 in single-change mode.
    pub threshold_used: f64,
    pub trimming: f64,
    pub standardized: bool,
    /// Per-regressor MAD scales (all 1 when not standardised).
    pub scales: Vec<f64>,
    pub mad_constant: Option<f64>,
}

struct Prepared {
    sums: CrossProductSums,
    standardized: bool,
    scales: Vec<f64>,
}

fn prepare(data: &RegressionDataset, standardize: bool) -> Prepared {
    if standardize {
        let st = mad_standardize(data);
        Prepared {
            sums: CrossProductSums::new(&st.data),
            standardized: true,
            scales: st.scales,
        }
    } else {
        Prepared {
            sums: CrossProductSums::new(data),
            standardized: false,
            scales: vec![1.0; data.p()],
        }
    }
}

/// NOT processing order: shorter first, then larger peak, then smaller `a`.
fn not_order(peaks: &[DetectorPeak]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&i, &j| {
        let (pi, pj) = (&peaks[i], &peaks[j]);
        pi.interval
            .len()
            .cmp(&pj.interval.len())
            .then(pj.t_star.total_cmp(&pi.t_star))
            .then(pi.interval.a.cmp(&pj.interval.a))
    });
    order
}

/// Runs the selection loop over peaks pre-sorted in NOT order; `fires`
/// decides whether a peak exceeds the threshold. Returns the indices of the
/// selected peaks in selection order.
fn not_select(peaks: &[DetectorPeak], order: &[usize], fires: impl Fn(f64) -> bool) -> Vec<usize> {
    let mut selected = Vec::new();
    let mut cps: Vec<usize> = Vec::new();
    for &idx in order {
        let peak = &peaks[idx];
        if !fires(peak.t_star) {
            continue;
        }
        // first selected point > a must exceed b for the interval to survive
        let pos = cps.partition_point(|&c| c <= peak.interval.a);
        if pos < cps.len() && cps[pos] <= peak.interval.b {
            continue;
        }
        cps.insert(pos, peak.k_star);
        selected.push(idx);
    }
    selected
}

fn sorted_selection(peaks: &[DetectorPeak], selected: &[usize]) -> (Vec<usize>, Vec<DetectorPeak>) {
    let mut chosen: Vec<DetectorPeak> = selected.iter().map(|&i| peaks[i]).collect();
    chosen.sort_by_key(|pk| pk.k_star);
    (chosen.iter().map(|pk| pk.k_star).collect(), chosen)
}

/// Detects change points with a fixed or automatically chosen threshold.
pub fn detect(
    data: &RegressionDataset,
    policy: &ThresholdPolicy,
    standardize: bool,
) -> Result<SegmentationResult> {
    policy.validate()?;
    let (n, p) = (data.n(), data.p());
    let trim = policy.trim.resolve(n, p);
    let pi = match policy.kind {
        ThresholdKind::Fixed(pi) => pi,
        ThresholdKind::DefaultFixed { c_pi } => default_threshold(n as f64, p as f64, c_pi),
        ThresholdKind::Automatic => {
            let path = solution_path(data, trim, standardize)?;
            return auto_select(&path);
        }
    };
    let prep = prepare(data, standardize);
    let peaks = peak_table(&prep.sums, &IntervalSet::generate(n), trim);
    let order = not_order(&peaks);
    let selected = not_select(&peaks, &order, |t| t > pi);
    let (change_points, peaks) = sorted_selection(&peaks, &selected);
    Ok(SegmentationResult {
        change_points,
        peaks,
        threshold_used: pi,
        trimming: trim,
        standardized: prep.standardized,
        scales: prep.scales,
        mad_constant: prep.standardized.then_some(MAD_CONSISTENCY),
    })
}

/// Single change point mode: the argmax of `T(0, k, n)` over the trimmed range.
pub fn detect_single(
    data: &RegressionDataset,
    trim: Trimming,
    standardize: bool,
) -> Result<SegmentationResult> {
    let (n, p) = (data.n(), data.p());
    let trim = trim.resolve(n, p);
    let prep = prepare(data, standardize);
    let whole = SeededInterval { a: 0, b: n, level: 0 };
    let peak = scan_interval(&prep.sums, &whole, trim).ok_or_else(|| {
        Error::domain(format!("trimming {trim} leaves no candidate location in (0, {n}]"))
    })?;
    Ok(SegmentationResult {
        change_points: vec![peak.k_star],
        peaks: vec![peak],
        threshold_used: 0.0,
        trimming: trim,
        standardized: prep.standardized,
        scales: prep.scales,
        mad_constant: prep.standardized.then_some(MAD_CONSISTENCY),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    /// The solution is produced by every threshold `pi` with
    /// `threshold_low <= pi < threshold_high` (peaks fire when `T > pi`).
    pub threshold_low: f64,
    pub threshold_high: f64,
    pub change_points: Vec<usize>,
    pub peaks: Vec<DetectorPeak>,
    /// Largest peak over the intervals whose interior `(a, b)` holds none of
    /// this solution's change points; 0 if there is none.
    pub score: f64,
}

impl PathEntry {
    pub fn num_cps(&self) -> usize {
        self.change_points.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    /// Ordered by number of change points, then by decreasing threshold.
    pub entries: Vec<PathEntry>,
    pub trimming: f64,
    pub standardized: bool,
    pub scales: Vec<f64>,
}

fn score_of(peaks: &[DetectorPeak], cps: &[usize]) -> f64 {
    peaks
        .iter()
        .filter(|pk| {
            let pos = cps.partition_point(|&c| c <= pk.interval.a);
            !(pos < cps.len() && cps[pos] < pk.interval.b)
        })
        .map(|pk| pk.t_star)
        .fold(0.0, f64::max)
}

/// All distinct NOT solutions obtained as the threshold sweeps down through
/// the distinct positive peak values.
pub fn solution_path(data: &RegressionDataset, trim: f64, standardize: bool) -> Result<SolutionPath> {
    if !(trim >= 0.0) || !trim.is_finite() {
        return Err(Error::domain(format!("trimming must be finite and nonnegative, got {trim}")));
    }
    let prep = prepare(data, standardize);
    let peaks = peak_table(&prep.sums, &IntervalSet::generate(data.n()), trim);
    let order = not_order(&peaks);

    let mut levels: Vec<f64> = peaks.iter().map(|pk| pk.t_star).filter(|&t| t > 0.0).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();

    let max_t = levels.first().copied().unwrap_or(0.0);
    let mut entries = vec![PathEntry {
        threshold_low: max_t,
        threshold_high: f64::INFINITY,
        change_points: Vec::new(),
        peaks: Vec::new(),
        score: score_of(&peaks, &[]),
    }];
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    index.insert(Vec::new(), 0);

    for (j, &tau) in levels.iter().enumerate() {
        let low = levels.get(j + 1).copied().unwrap_or(0.0);
        let selected = not_select(&peaks, &order, |t| t >= tau);
        let (cps, chosen) = sorted_selection(&peaks, &selected);
        match index.get(&cps) {
            Some(&i) => {
                let e = &mut entries[i];
                e.threshold_low = e.threshold_low.min(low);
                e.threshold_high = e.threshold_high.max(tau);
            }
            None => {
                index.insert(cps.clone(), entries.len());
                entries.push(PathEntry {
                    threshold_low: low,
                    threshold_high: tau,
                    score: score_of(&peaks, &cps),
                    change_points: cps,
                    peaks: chosen,
                });
            }
        }
    }
    entries.sort_by(|x, y| {
        x.num_cps()
            .cmp(&y.num_cps())
            .then(y.threshold_high.total_cmp(&x.threshold_high))
    });
    Ok(SolutionPath {
        entries,
        trimming: trim,
        standardized: prep.standardized,
        scales: prep.scales,
    })
}

/// Index of the elbow in a score sequence: the first `i >= 1` where the
/// averaged slope `|s_i|` drops below `|s_{i-1}|`, else the last index.
pub fn elbow_index(scores: &[f64]) -> usize {
    let m = scores.len();
    if m <= 1 {
        return 0;
    }
    let slope = |i: usize| -> f64 {
        if i == 0 {
            scores[1] - scores[0]
        } else if i == m - 1 {
            scores[m - 1] - scores[m - 2]
        } else {
            0.5 * (scores[i + 1] - scores[i - 1])
        }
    };
    (1..m)
        .find(|&i| slope(i).abs() < slope(i - 1).abs())
        .unwrap_or(m - 1)
}

/// Picks the elbow of the solution path, keeping one solution (the one with
/// the smallest score) per number of change points.
pub fn auto_select(path: &SolutionPath) -> Result<SegmentationResult> {
    if path.entries.is_empty() {
        return Err(Error::invalid("empty solution path"));
    }
    let mut collapsed: Vec<&PathEntry> = Vec::new();
    for entry in &path.entries {
        match collapsed.last_mut() {
            Some(last) if last.num_cps() == entry.num_cps() => {
                if entry.score < last.score {
                    *last = entry;
                }
            }
            _ => collapsed.push(entry),
        }
    }
    let scores: Vec<f64> = collapsed.iter().map(|e| e.score).collect();
    let chosen = collapsed[elbow_index(&scores)];
    Ok(SegmentationResult {
        change_points: chosen.change_points.clone(),
        peaks: chosen.peaks.clone(),
        threshold_used: chosen.threshold_low,
        trimming: path.trimming,
        standardized: path.standardized,
        scales: path.scales.clone(),
        mad_constant: path.standardized.then_some(MAD_CONSISTENCY),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn univariate(y: Vec<f64>) -> RegressionDataset {
        let n = y.len();
        RegressionDataset::new(vec![1.0; n], y, 1).unwrap()
    }

    fn step(n: usize, at: usize, level: f64) -> RegressionDataset {
        univariate((0..n).map(|t| if t < at { 0.0 } else { level }).collect())
    }

    #[test]
    fn detector_by_hand() {
        let sums = CrossProductSums::new(&univariate(vec![0.0, 2.0]));
        let t = detector(&sums, 0, 1, 2).unwrap();
        assert!((t - 2f64.sqrt()).abs() < 1e-15);
        assert!(detector(&sums, 1, 1, 2).is_err());
        assert!(detector(&sums, 0, 2, 2).is_err());
        assert!(detector(&sums, 0, 1, 3).is_err());
    }

    #[test]
    fn constant_segments_give_zero() {
        let sums = CrossProductSums::new(&univariate(vec![3.0; 10]));
        for k in 1..10 {
            assert_eq!(detector(&sums, 0, k, 10).unwrap(), 0.0);
        }
    }

    #[test]
    fn cusum_peak_at_true_change() {
        let sums = CrossProductSums::new(&step(100, 50, 10.0));
        let best = (1..100)
            .max_by(|&i, &j| {
                detector(&sums, 0, i, 100)
                    .unwrap()
                    .total_cmp(&detector(&sums, 0, j, 100).unwrap())
            })
            .unwrap();
        assert_eq!(best, 50);
    }

    #[test]
    fn scan_ranges() {
        let sums = CrossProductSums::new(&univariate(vec![1.0, 5.0, 2.0, 7.0]));
        let iv = |a, b| SeededInterval { a, b, level: 1 };
        assert_eq!(scan_interval(&sums, &iv(0, 2), 0.0).unwrap().k_star, 1);
        assert_eq!(scan_interval(&sums, &iv(0, 4), 1.5).unwrap().k_star, 2);
        assert!(scan_interval(&sums, &iv(0, 3), 2.0).is_none());
        assert!(scan_interval(&sums, &iv(0, 3), 1.0).is_none());
    }

    #[test]
    fn threshold_arithmetic() {
        // 1.9 * sqrt(ln 60000) = 6.302188542621...
        assert!((default_threshold(300.0, 200.0, 1.9) - 6.302188542621309).abs() < 1e-12);
        assert_eq!(default_threshold(300.0, 200.0, 0.0), 0.0);
        assert!((default_threshold(1.0, 2.0, 1.0) - 0.8326).abs() < 1e-4);
        assert!((default_trimming(300.0, 200.0) - 22.004).abs() < 1e-3);
        assert_eq!(default_trimming(1.0, 1.0), 0.0);
        assert!((default_trimming(std::f64::consts::E, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn high_threshold_detects_nothing() {
        let d = step(100, 50, 10.0);
        let r = detect(&d, &ThresholdPolicy::fixed(1e6).with_trim(Trimming::Value(0.0)), false).unwrap();
        assert!(r.change_points.is_empty());
    }

    #[test]
    fn single_step_found() {
        let d = step(100, 50, 10.0);
        let sums = CrossProductSums::new(&d);
        let t = detector(&sums, 0, 50, 100).unwrap();
        let r = detect(&d, &ThresholdPolicy::fixed(t / 2.0).with_trim(Trimming::Value(0.0)), false)
            .unwrap();
        assert_eq!(r.change_points, vec![50]);
        let peak = r.peaks[0];
        assert!(peak.interval.a < 50 && 50 < peak.interval.b);
    }

    #[test]
    fn two_steps_each_from_own_interval() {
        let y = (0..64)
            .map(|t| if (16..48).contains(&t) { 5.0 } else { 0.0 })
            .collect();
        let r = detect(&univariate(y), &ThresholdPolicy::fixed(2.0).with_trim(Trimming::Value(0.0)), false)
            .unwrap();
        assert_eq!(r.change_points, vec![16, 48]);
        for (pk, other) in r.peaks.iter().zip([48, 16]) {
            assert!(!pk.interval.contains(other) || pk.interval.b == other);
        }
    }

    #[test]
    fn single_mode_returns_argmax() {
        let r = detect_single(&step(100, 50, 10.0), Trimming::Value(0.0), false).unwrap();
        assert_eq!(r.change_points, vec![50]);
    }

    #[test]
    fn elbow_examples() {
        assert_eq!(elbow_index(&[10.0, 9.5, 2.0, 1.9, 1.85]), 2);
        let geo: Vec<f64> = (0..6).map(|i| 0.5f64.powi(i)).collect();
        assert_eq!(elbow_index(&geo), 1);
        assert_eq!(elbow_index(&[3.0]), 0);
        assert_eq!(elbow_index(&[3.0, 1.0]), 1);
    }

    #[test]
    fn path_on_single_step() {
        let mut y: Vec<f64> = (0..64).map(|t| if t < 32 { 0.0 } else { 4.0 }).collect();
        // a little deterministic wiggle so peaks are distinct
        for (t, v) in y.iter_mut().enumerate() {
            *v += 0.1 * ((t * 7919) % 13) as f64 / 13.0;
        }
        let path = solution_path(&univariate(y), 0.0, false).unwrap();
        let first = &path.entries[0];
        assert!(first.change_points.is_empty());
        let max_t = path.entries.iter().flat_map(|e| e.peaks.iter()).map(|p| p.t_star).fold(0.0, f64::max);
        assert!(first.score >= max_t);
        let one = path.entries.iter().find(|e| e.num_cps() == 1).unwrap();
        assert_eq!(one.change_points, vec![32]);
        assert!(one.score < 0.25 * first.score);
        let counts: Vec<usize> = path.entries.iter().map(PathEntry::num_cps).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn auto_select_single_entry() {
        let path = solution_path(&univariate(vec![1.0; 16]), 0.0, false).unwrap();
        assert_eq!(path.entries.len(), 1);
        assert!(auto_select(&path).unwrap().change_points.is_empty());
    }
}
