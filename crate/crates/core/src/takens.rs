//! Delay embedding and correlation dimension.
//!
//! The correlation dimension is the Grassberger-Procaccia estimate: the
//! slope of `log C(r)` against `log r`, where `C(r)` is the fraction of
//! point pairs (more than a Theiler window apart in time) closer than `r`.
//! A Lorenz integrator provides series with a known attractor for
//! calibration.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum TakensError {
    #[error("series of length {len} is too short for m={m}, tau={tau}")]
    InsufficientLength { len: usize, m: usize, tau: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("embedding parameters must be positive (m={m}, tau={tau})")]
    InvalidParameters { m: usize, tau: usize },
    #[error("point cloud has {points} points, at least {required} needed")]
    TooFewPoints { points: usize, required: usize },
    #[error("degenerate point cloud: all points coincide")]
    Degenerate,
    #[error("no scaling region found ({0})")]
    NoScalingRegion(String),
    #[error("integration blew up at step {step}")]
    BlowUp { step: usize },
    #[error("{0}")]
    Parse(String),
}

/// A scalar observable sampled at unit time steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySeries {
    values: Vec<f64>,
    label: String,
}

impl DelaySeries {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self, TakensError> {
        if values.is_empty() {
            return Err(TakensError::InvalidSeries("empty series".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TakensError::InvalidSeries(format!("non-finite value at index {i}")));
        }
        Ok(DelaySeries {
            values,
            label: label.into(),
        })
    }

    pub(crate) fn new_unchecked(values: Vec<f64>, label: String) -> Self {
        DelaySeries { values, label }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> DelaySeries {
        DelaySeries {
            values: self.values.iter().map(|v| v * factor).collect(),
            label: self.label.clone(),
        }
    }

    /// Single-column CSV with a `value` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value\n");
        for v in &self.values {
            writeln!(out, "{v}").unwrap();
        }
        out
    }

    /// Reads a single-column CSV. `#` comments and a non-numeric header
    /// line are skipped; extra columns after a comma are ignored.
    pub fn from_csv(text: &str, label: impl Into<String>) -> Result<Self, TakensError> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let field = line.split(',').next().unwrap_or("").trim();
            match field.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if values.is_empty() && lineno == 0 => continue,
                Err(e) => {
                    return Err(TakensError::Parse(format!("line {}: {e}", lineno + 1)));
                }
            }
        }
        DelaySeries::new(values, label)
    }
}

/// Points `[s(p), s(p+τ), …, s(p+(m−1)τ)]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    m: usize,
    tau: usize,
}

impl PointCloud {
    /// Cloud from explicit points of dimension `m` (e.g. a full state
    /// trajectory). `tau` is recorded as 1.
    pub fn from_points(points: &[Vec<f64>]) -> Self {
        let m = points.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(points.len() * m);
        for p in points {
            assert_eq!(p.len(), m, "points must share a dimension");
            data.extend_from_slice(p);
        }
        PointCloud { data, m, tau: 1 }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.m).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, p: usize) -> &[f64] {
        &self.data[p * self.m..(p + 1) * self.m]
    }
}

pub fn delay_embed(series: &DelaySeries, m: usize, tau: usize) -> Result<PointCloud, TakensError> {
    if m == 0 || tau == 0 {
        return Err(TakensError::InvalidParameters { m, tau });
    }
    let len = series.len();
    let span = (m - 1) * tau;
    if len <= span {
        return Err(TakensError::InsufficientLength { len, m, tau });
    }
    let count = len - span;
    let mut data = Vec::with_capacity(count * m);
    for p in 0..count {
        data.extend((0..m).map(|c| series.values[p + c * tau]));
    }
    Ok(PointCloud { data, m, tau })
}

/// Estimator settings. Radii are log-spaced between two percentiles of the
/// pairwise-distance distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub r_count: usize,
    pub lower_percentile: f64,
    pub upper_percentile: f64,
    /// Every local slope in the scaling region lies within this fraction
    /// of the region's median slope.
    pub slope_tolerance: f64,
    /// Minimum number of local slopes in a scaling region.
    pub min_window: usize,
    /// Exact pair enumeration up to this many points, sampling beyond.
    pub exact_limit: usize,
    pub sampled_pairs: usize,
    /// Pairs sampled to locate the percentiles.
    pub percentile_pairs: usize,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            r_count: 32,
            lower_percentile: 0.1,
            upper_percentile: 10.0,
            slope_tolerance: 0.15,
            min_window: 4,
            exact_limit: 20_000,
            sampled_pairs: 20_000_000,
            percentile_pairs: 200_000,
            seed: 0x6770,
        }
    }
}

pub const MIN_CLOUD_POINTS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub d2: f64,
    /// Radius range of the fitted scaling region.
    pub r_min: f64,
    pub r_max: f64,
    pub r_squared: f64,
    pub radii: Vec<f64>,
    /// `C(r)` at each radius.
    pub correlation_sums: Vec<f64>,
    /// Indices into `radii` of the fitted region (inclusive).
    pub fit_range: (usize, usize),
    pub pairs: u64,
}

/// Correlation dimension with default settings and `r_count` radii.
pub fn correlation_dimension(
    cloud: &PointCloud,
    theiler_window: usize,
    r_count: usize,
) -> Result<DimensionEstimate, TakensError> {
    let config = GpConfig {
        r_count,
        ..GpConfig::default()
    };
    correlation_dimension_with(cloud, theiler_window, &config)
}

pub fn correlation_dimension_with(
    cloud: &PointCloud,
    theiler_window: usize,
    config: &GpConfig,
) -> Result<DimensionEstimate, TakensError> {
    let n = cloud.len();
    if n < MIN_CLOUD_POINTS {
        return Err(TakensError::TooFewPoints {
            points: n,
            required: MIN_CLOUD_POINTS,
        });
    }
    if theiler_window + 1 >= n {
        return Err(TakensError::TooFewPoints {
            points: n,
            required: theiler_window + 2,
        });
    }
    let radii = percentile_radii(cloud, theiler_window, config)?;
    let (sums, pairs) = correlation_sums(cloud, theiler_window, &radii, config);
    fit_scaling_region(radii, sums, pairs, config)
}

/// Radii log-spaced between the configured percentiles of sampled
/// pairwise distances.
pub fn percentile_radii(
    cloud: &PointCloud,
    theiler_window: usize,
    config: &GpConfig,
) -> Result<Vec<f64>, TakensError> {
    let n = cloud.len();
    let eligible = eligible_pairs(n, theiler_window);
    let mut dists: Vec<f64> = if eligible <= config.percentile_pairs as u64 {
        let mut all = Vec::with_capacity(eligible as usize);
        for p in 0..n {
            for q in (p + theiler_window + 1)..n {
                all.push(sq_dist(cloud.point(p), cloud.point(q)));
            }
        }
        all
    } else {
        let mut rng = stream_rng(config.seed, 1);
        (0..config.percentile_pairs)
            .map(|_| {
                let (p, q) = sample_pair(&mut rng, n, theiler_window);
                sq_dist(cloud.point(p), cloud.point(q))
            })
            .collect()
    };
    dists.sort_by(f64::total_cmp);
    let max = *dists.last().unwrap_or(&0.0);
    if max == 0.0 {
        return Err(TakensError::Degenerate);
    }
    let at = |pct: f64| {
        let idx = ((pct / 100.0) * (dists.len() - 1) as f64).round() as usize;
        dists[idx.min(dists.len() - 1)].sqrt()
    };
    let mut lo = at(config.lower_percentile);
    let hi = at(config.upper_percentile);
    if lo == 0.0 {
        lo = dists.iter().find(|&&d| d > 0.0).map_or(0.0, |d| d.sqrt());
    }
    if hi <= lo {
        return Err(TakensError::NoScalingRegion(format!(
            "percentile radii collapse (lo={lo}, hi={hi})"
        )));
    }
    let count = config.r_count.max(2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

fn eligible_pairs(n: usize, w: usize) -> u64 {
    // pairs (p, q), q - p > w
    if n <= w + 1 {
        return 0;
    }
    let k = (n - w - 1) as u64;
    k * (k + 1) / 2
}

fn sample_pair<R: Rng>(rng: &mut R, n: usize, w: usize) -> (usize, usize) {
    loop {
        let p = rng.random_range(0..n);
        let q = rng.random_range(0..n);
        if p.abs_diff(q) > w {
            return (p.min(q), p.max(q));
        }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `C(r)` for each radius (strictly closer than `r`), plus the number of
/// pairs examined.
pub fn correlation_sums(
    cloud: &PointCloud,
    theiler_window: usize,
    radii: &[f64],
    config: &GpConfig,
) -> (Vec<f64>, u64) {
    let n = cloud.len();
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let r2_max = *r2.last().unwrap_or(&0.0);
    let bins = r2.len();
    let bin_of = |d2: f64| r2.partition_point(|&x| x <= d2);

    let (hist, pairs) = if n <= config.exact_limit {
        const BLOCK: usize = 64;
        let blocks: Vec<usize> = (0..n).step_by(BLOCK).collect();
        let partials: Vec<Vec<u64>> = blocks
            .par_iter()
            .map(|&start| {
                let mut h = vec![0u64; bins + 1];
                for p in start..(start + BLOCK).min(n) {
                    let a = cloud.point(p);
                    for q in (p + theiler_window + 1)..n {
                        let b = cloud.point(q);
                        let mut d2 = 0.0;
                        let mut far = false;
                        for (x, y) in a.iter().zip(b) {
                            d2 += (x - y) * (x - y);
                            if d2 >= r2_max {
                                far = true;
                                break;
                            }
                        }
                        if far {
                            h[bins] += 1;
                        } else {
                            h[bin_of(d2)] += 1;
                        }
                    }
                }
                h
            })
            .collect();
        (sum_histograms(partials, bins), eligible_pairs(n, theiler_window))
    } else {
        const CHUNK: usize = 1 << 16;
        let chunks = config.sampled_pairs.div_ceil(CHUNK);
        let partials: Vec<Vec<u64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream_rng(config.seed, 1000 + c as u64);
                let mut h = vec![0u64; bins + 1];
                let todo = CHUNK.min(config.sampled_pairs - c * CHUNK);
                for _ in 0..todo {
                    let (p, q) = sample_pair(&mut rng, n, theiler_window);
                    h[bin_of(sq_dist(cloud.point(p), cloud.point(q)))] += 1;
                }
                h
            })
            .collect();
        (sum_histograms(partials, bins), config.sampled_pairs as u64)
    };

    let mut cumulative = 0u64;
    let sums = hist[..bins]
        .iter()
        .map(|&h| {
            cumulative += h;
            cumulative as f64 / pairs as f64
        })
        .collect();
    (sums, pairs)
}

fn sum_histograms(partials: Vec<Vec<u64>>, bins: usize) -> Vec<u64> {
    let mut total = vec![0u64; bins + 1];
    for h in partials {
        for (t, x) in total.iter_mut().zip(h) {
            *t += x;
        }
    }
    total
}

/// Picks the longest run of consecutive local slopes that all lie within
/// `slope_tolerance` of the run's median (earliest run on ties) and fits
/// `log C` against `log r` over it.
pub fn fit_scaling_region(
    radii: Vec<f64>,
    sums: Vec<f64>,
    pairs: u64,
    config: &GpConfig,
) -> Result<DimensionEstimate, TakensError> {
    let logs: Vec<Option<(f64, f64)>> = radii
        .iter()
        .zip(&sums)
        .map(|(&r, &c)| (c > 0.0).then(|| (r.ln(), c.ln())))
        .collect();
    let slopes: Vec<Option<f64>> = logs
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some((x0, y0)), Some((x1, y1))) => Some((y1 - y0) / (x1 - x0)),
            _ => None,
        })
        .collect();

    let mut best: Option<(usize, usize)> = None;
    for a in 0..slopes.len() {
        for b in a..slopes.len() {
            let window: Option<Vec<f64>> = slopes[a..=b].iter().copied().collect();
            let Some(window) = window else { break };
            let len = b - a + 1;
            if len < config.min_window.max(1) {
                continue;
            }
            let med = median(&window);
            if med <= 0.0 {
                continue;
            }
            if window
                .iter()
                .all(|s| (s - med).abs() <= config.slope_tolerance * med)
                && best.is_none_or(|(ba, bb)| len > bb - ba + 1)
            {
                best = Some((a, b));
            }
        }
    }
    let Some((a, b)) = best else {
        return Err(TakensError::NoScalingRegion(format!(
            "no {} consecutive slopes within {:.0}% of their median; C(r) = {:?}",
            config.min_window,
            config.slope_tolerance * 100.0,
            sums
        )));
    };
    let points: Vec<(f64, f64)> = logs[a..=b + 1].iter().map(|p| p.unwrap()).collect();
    let (slope, r_squared) = linear_fit(&points);
    Ok(DimensionEstimate {
        d2: slope.max(0.0),
        r_min: radii[a],
        r_max: radii[b + 1],
        r_squared,
        radii,
        correlation_sums: sums,
        fit_range: (a, b + 1),
        pairs,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope and R².
fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

/// First lag at which the sample autocorrelation drops to zero or below;
/// falls back to the first lag below `1/e`, then to 1.
pub fn acf_first_zero(series: &DelaySeries) -> usize {
    let v = series.values();
    let n = v.len();
    if n < 3 {
        return 1;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let var: f64 = centered.iter().map(|x| x * x).sum();
    if var == 0.0 {
        return 1;
    }
    let acf = |lag: usize| {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / var
    };
    let max_lag = n / 2;
    let mut below_e = None;
    for lag in 1..=max_lag {
        let r = acf(lag);
        if r <= 0.0 {
            return lag;
        }
        if below_e.is_none() && r < (-1.0f64).exp() {
            below_e = Some(lag);
        }
    }
    below_e.unwrap_or(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionPoint {
    pub m: usize,
    pub d2: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_squared: f64,
}

/// Correlation dimension as a function of embedding dimension.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DimensionCurve {
    pub tau: usize,
    pub points: Vec<DimensionPoint>,
}

impl DimensionCurve {
    pub fn d2_at(&self, m: usize) -> Option<f64> {
        self.points.iter().find(|p| p.m == m).map(|p| p.d2)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,d2,r_min,r_max,r_squared\n");
        for p in &self.points {
            writeln!(out, "{},{},{},{},{}", p.m, p.d2, p.r_min, p.r_max, p.r_squared).unwrap();
        }
        out
    }
}

/// Runs the estimator for each `m`, with Theiler window `m·tau` and the
/// same radius construction at every `m`. `tau = None` uses the first
/// autocorrelation zero.
pub fn dimension_sweep(
    series: &DelaySeries,
    m_range: RangeInclusive<usize>,
    tau: Option<usize>,
    config: &GpConfig,
) -> Result<DimensionCurve, TakensError> {
    let tau = tau.unwrap_or_else(|| acf_first_zero(series));
    let mut points = Vec::new();
    for m in m_range {
        let cloud = delay_embed(series, m, tau)?;
        let est = correlation_dimension_with(&cloud, m * tau, config)?;
        points.push(DimensionPoint {
            m,
            d2: est.d2,
            r_min: est.r_min,
            r_max: est.r_max,
            r_squared: est.r_squared,
        });
    }
    Ok(DimensionCurve { tau, points })
}

/// Seeded uniform permutation of the values.
pub fn shuffle_series(series: &DelaySeries, seed: u64) -> DelaySeries {
    let mut values = series.values.clone();
    values.shuffle(&mut stream_rng(seed, 0));
    DelaySeries {
        values,
        label: format!("{} (shuffled)", series.label),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub initial: [f64; 3],
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            initial: [1.0, 1.0, 1.0],
        }
    }
}

impl LorenzParams {
    fn derivative(&self, s: [f64; 3]) -> [f64; 3] {
        [
            self.sigma * (s[1] - s[0]),
            s[0] * (self.rho - s[2]) - s[1],
            s[0] * s[1] - self.beta * s[2],
        ]
    }

    fn rk4_step(&self, s: [f64; 3], dt: f64) -> [f64; 3] {
        let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
        let k1 = self.derivative(s);
        let k2 = self.derivative(add(s, k1, dt / 2.0));
        let k3 = self.derivative(add(s, k2, dt / 2.0));
        let k4 = self.derivative(add(s, k3, dt));
        [
            s[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            s[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ]
    }
}

/// Fixed-step RK4 trajectory. Sample `s` is the state after `s + 1` steps;
/// the first `transient` samples are dropped, leaving `steps − transient`.
pub fn lorenz_series(
    params: &LorenzParams,
    dt: f64,
    steps: usize,
    transient: usize,
) -> Result<(DelaySeries, DelaySeries, DelaySeries), TakensError> {
    if !(dt > 0.0) || steps <= transient {
        return Err(TakensError::InvalidSeries(format!(
            "need dt > 0 and steps > transient (dt={dt}, steps={steps}, transient={transient})"
        )));
    }
    let keep = steps - transient;
    let (mut x, mut y, mut z) = (
        Vec::with_capacity(keep),
        Vec::with_capacity(keep),
        Vec::with_capacity(keep),
    );
    let mut state = params.initial;
    for step in 0..steps {
        state = params.rk4_step(state, dt);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(TakensError::BlowUp { step });
        }
        if step >= transient {
            x.push(state[0]);
            y.push(state[1]);
            z.push(state[2]);
        }
    }
    Ok((
        DelaySeries::new_unchecked(x, "lorenz-x".into()),
        DelaySeries::new_unchecked(y, "lorenz-y".into()),
        DelaySeries::new_unchecked(z, "lorenz-z".into()),
    ))
}

/// Full-state Lorenz trajectory as a 3-D cloud.
pub fn state_cloud(x: &DelaySeries, y: &DelaySeries, z: &DelaySeries) -> PointCloud {
    let points: Vec<Vec<f64>> = (0..x.len())
        .map(|i| vec![x.values[i], y.values[i], z.values[i]])
        .collect();
    PointCloud::from_points(&points)
}
