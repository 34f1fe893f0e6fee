//! Taper construction and log-spectrum estimation on the Fourier grid
//! `λ_m = m/N`, `m = 0..N-1`.
//!
//! Three estimators are provided:
//!
//! * multitaper: log of the average of `R` sine-tapered periodograms,
//! * direct: log of the first sine-tapered periodogram,
//! * smoothed: log of the first tapered periodogram after circular
//!   modified-Daniell smoothing, with the span optionally chosen by
//!   generalized cross-validation.
//!
//! Periodograms use orthonormal tapers without an additional `N^{-1/2}`
//! factor, so a tapered periodogram of white noise with variance `σ²` has
//! expectation `σ²`. [`PeriodogramScale::Literal`] restores the extra factor,
//! which shifts every log-spectrum by `-log N`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest series accepted as an epoch.
pub const MIN_EPOCH_LEN: usize = 8;

/// One real-valued series with an optional group label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesEpoch {
    pub id: String,
    /// Zero-based group index.
    pub group: Option<usize>,
    values: Vec<f64>,
}

impl TimeSeriesEpoch {
    pub fn new(id: impl Into<String>, group: Option<usize>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if values.len() < MIN_EPOCH_LEN {
            return Err(Error::invalid(format!(
                "epoch '{id}' has length {}, need at least {MIN_EPOCH_LEN}",
                values.len()
            )));
        }
        if let Some(t) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "epoch '{id}' has a non-finite value at t={}",
                t + 1
            )));
        }
        Ok(Self { id, group, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `R` orthonormal data tapers of length `N`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TaperBank {
    len: usize,
    tapers: Vec<Vec<f64>>,
}

impl TaperBank {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count(&self) -> usize {
        self.tapers.len()
    }

    /// Taper `r`, zero-based.
    pub fn taper(&self, r: usize) -> &[f64] {
        &self.tapers[r]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.tapers.iter().map(Vec::as_slice)
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (r, a) in self.tapers.iter().enumerate() {
            for (s, b) in self.tapers.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let target = if r == s { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Sine tapers `h_r(t) = sqrt(2/(N+1)) sin(π t r / (N+1))`, `t = 1..N`,
/// `r = 1..R`.
pub fn sine_tapers(len: usize, count: usize) -> Result<TaperBank> {
    if len < 1 {
        return Err(Error::invalid("taper length must be at least 1"));
    }
    if count < 1 || count > len {
        return Err(Error::invalid(format!("taper count {count} must lie in 1..={len}")));
    }
    let scale = (2.0 / (len as f64 + 1.0)).sqrt();
    let denom = len as f64 + 1.0;
    let tapers = (1..=count)
        .map(|r| (1..=len).map(|t| scale * (PI * (t * r) as f64 / denom).sin()).collect())
        .collect();
    Ok(TaperBank { len, tapers })
}

/// Normalization applied to tapered periodograms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodogramScale {
    /// `|Σ_t h_t X_t e^{-2πiλt}|²`.
    #[default]
    Orthonormal,
    /// The same quantity divided by `N`.
    Literal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub scale: PeriodogramScale,
    /// Added to every (averaged or smoothed) periodogram ordinate before the
    /// logarithm. `None` means zero-power bins are an error.
    pub jitter: Option<f64>,
}

/// Computes tapered periodograms of a fixed length with a cached FFT plan.
pub struct Periodogram {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    scale: PeriodogramScale,
}

impl Periodogram {
    pub fn new(len: usize, scale: PeriodogramScale) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        Self { len, fft, scale }
    }

    /// `I_m`, `m = 0..N-1`, for one taper.
    pub fn compute(&self, values: &[f64], taper: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len];
        self.accumulate(values, taper, &mut out)?;
        Ok(out)
    }

    /// Adds `I_m` for one taper onto `acc`.
    fn accumulate(&self, values: &[f64], taper: &[f64], acc: &mut [f64]) -> Result<()> {
        if values.len() != self.len || taper.len() != self.len {
            return Err(Error::invalid(format!(
                "periodogram length mismatch: series {}, taper {}, expected {}",
                values.len(),
                taper.len(),
                self.len
            )));
        }
        let mut buf: Vec<Complex<f64>> = values
            .iter()
            .zip(taper)
            .map(|(x, h)| Complex::new(x * h, 0.0))
            .collect();
        // Summation index starts at t = 1; the phase shift does not change
        // the modulus.
        self.fft.process(&mut buf);
        let norm = match self.scale {
            PeriodogramScale::Orthonormal => 1.0,
            PeriodogramScale::Literal => 1.0 / self.len as f64,
        };
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr() * norm;
        }
        Ok(())
    }
}

/// Tapered periodogram `I_m = |Σ_t h_t X_t e^{-2πi λ_m t}|²`.
pub fn tapered_periodogram(epoch: &TimeSeriesEpoch, taper: &[f64]) -> Result<Vec<f64>> {
    Periodogram::new(epoch.len(), PeriodogramScale::Orthonormal).compute(epoch.values(), taper)
}

/// O(N²) evaluation of the tapered periodogram, kept as a reference for the
/// FFT path.
pub fn tapered_periodogram_reference(values: &[f64], taper: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if taper.len() != n {
        return Err(Error::invalid("taper and series lengths differ"));
    }
    Ok((0..n)
        .map(|m| {
            let mut re = 0.0;
            let mut im = 0.0;
            for t in 1..=n {
                let phase = -2.0 * PI * ((m * t) % n) as f64 / n as f64;
                let v = taper[t - 1] * values[t - 1];
                re += v * phase.cos();
                im += v * phase.sin();
            }
            re * re + im * im
        })
        .collect())
}

/// Smoother span: a fixed odd width or one chosen by GCV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Span {
    Fixed(usize),
    Auto,
}

/// Log-spectrum estimator configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Estimator {
    Multitaper { tapers: usize },
    Direct,
    Smoothed { span: Span },
}

impl Estimator {
    pub fn estimate(&self, epoch: &TimeSeriesEpoch, opts: &SpectralOptions) -> Result<LogSpectrumEstimate> {
        match *self {
            Estimator::Multitaper { tapers } => multitaper_log_spectrum_with(epoch, tapers, opts),
            Estimator::Direct => direct_log_spectrum_with(epoch, opts),
            Estimator::Smoothed { span } => smoothed_log_spectrum_with(epoch, span, opts),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Estimator::Multitaper { tapers } => write!(f, "multitaper(R={tapers})"),
            Estimator::Direct => write!(f, "direct"),
            Estimator::Smoothed { span: Span::Auto } => write!(f, "smoothed(span=gcv)"),
            Estimator::Smoothed { span: Span::Fixed(s) } => write!(f, "smoothed(span={s})"),
        }
    }
}

/// An estimator together with the periodogram options it runs under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub estimator: Estimator,
    #[serde(default)]
    pub options: SpectralOptions,
}

impl EstimatorConfig {
    pub fn new(estimator: Estimator) -> Self {
        Self {
            estimator,
            options: SpectralOptions::default(),
        }
    }

    pub fn estimate(&self, epoch: &TimeSeriesEpoch) -> Result<LogSpectrumEstimate> {
        self.estimator.estimate(epoch, &self.options)
    }
}

impl From<Estimator> for EstimatorConfig {
    fn from(estimator: Estimator) -> Self {
        Self::new(estimator)
    }
}

/// Which estimator produced a [`LogSpectrumEstimate`]; smoothed spans are
/// always resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorTag {
    Multitaper(usize),
    Direct,
    Smoothed(usize),
}

/// Estimated log-spectrum `γ̂_m` on `λ_m = m/N`, `m = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSpectrumEstimate {
    values: Vec<f64>,
    estimator: EstimatorTag,
}

impl LogSpectrumEstimate {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Length of the source series.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn estimator(&self) -> EstimatorTag {
        self.estimator
    }

    /// Wraps log-spectrum values computed elsewhere (e.g. an exact
    /// log-spectrum evaluated on the grid).
    pub fn from_values(values: Vec<f64>, estimator: EstimatorTag) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("log-spectrum is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("log-spectrum has non-finite values"));
        }
        Ok(Self { values, estimator })
    }
}

fn log_of(power: Vec<f64>, opts: &SpectralOptions, tag: EstimatorTag) -> Result<LogSpectrumEstimate> {
    let jitter = opts.jitter.unwrap_or(0.0);
    let values = power
        .into_iter()
        .enumerate()
        .map(|(m, p)| {
            let p = p + jitter;
            if p > 0.0 && p.is_finite() {
                Ok(p.ln())
            } else {
                Err(Error::DegenerateSpectrum { bin: m })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LogSpectrumEstimate { values, estimator: tag })
}

/// Average of the first `count` sine-tapered periodograms.
pub fn multitaper_periodogram(values: &[f64], count: usize, scale: PeriodogramScale) -> Result<Vec<f64>> {
    let bank = sine_tapers(values.len(), count)?;
    let pg = Periodogram::new(values.len(), scale);
    let mut acc = vec![0.0; values.len()];
    for taper in bank.iter() {
        pg.accumulate(values, taper, &mut acc)?;
    }
    let inv = 1.0 / count as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(acc)
}

/// `γ̂_m = log(R^{-1} Σ_r I_{rm})`.
pub fn multitaper_log_spectrum(epoch: &TimeSeriesEpoch, tapers: usize) -> Result<LogSpectrumEstimate> {
    multitaper_log_spectrum_with(epoch, tapers, &SpectralOptions::default())
}

pub fn multitaper_log_spectrum_with(
    epoch: &TimeSeriesEpoch,
    tapers: usize,
    opts: &SpectralOptions,
) -> Result<LogSpectrumEstimate> {
    let power = multitaper_periodogram(epoch.values(), tapers, opts.scale)?;
    log_of(power, opts, EstimatorTag::Multitaper(tapers))
}

/// Log of the first sine-tapered periodogram.
pub fn direct_log_spectrum(epoch: &TimeSeriesEpoch) -> Result<LogSpectrumEstimate> {
    direct_log_spectrum_with(epoch, &SpectralOptions::default())
}

pub fn direct_log_spectrum_with(epoch: &TimeSeriesEpoch, opts: &SpectralOptions) -> Result<LogSpectrumEstimate> {
    let power = multitaper_periodogram(epoch.values(), 1, opts.scale)?;
    log_of(power, opts, EstimatorTag::Direct)
}

/// Modified Daniell kernel of odd width `span`: equal interior weights and
/// half-weight endpoints, summing to one. `span = 1` is the identity.
pub fn modified_daniell_weights(span: usize) -> Result<Vec<f64>> {
    if span == 0 || span.is_multiple_of(2) {
        return Err(Error::invalid(format!("span {span} must be odd and positive")));
    }
    if span == 1 {
        return Ok(vec![1.0]);
    }
    let half = (span - 1) / 2;
    let w = 1.0 / (2 * half) as f64;
    let mut weights = vec![w; span];
    weights[0] = w / 2.0;
    weights[span - 1] = w / 2.0;
    Ok(weights)
}

/// Circular modified-Daniell smoothing over the full grid.
pub fn smooth_circular(values: &[f64], span: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if span > n {
        return Err(Error::invalid(format!("span {span} exceeds series length {n}")));
    }
    let weights = modified_daniell_weights(span)?;
    let half = (span / 2) as isize;
    Ok((0..n as isize)
        .map(|m| {
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * values[(m + i as isize - half).rem_euclid(n as isize) as usize])
                .sum()
        })
        .collect())
}

/// First tapered periodogram after circular modified-Daniell smoothing.
/// Returns the smoothed ordinates on the full grid and the span used.
pub fn smoothed_periodogram(values: &[f64], span: Span, scale: PeriodogramScale) -> Result<(Vec<f64>, usize)> {
    let raw = multitaper_periodogram(values, 1, scale)?;
    let span = match span {
        Span::Fixed(s) => {
            if s == 0 || s % 2 == 0 || s > values.len() {
                return Err(Error::invalid(format!(
                    "span {s} must be odd and in 1..={}",
                    values.len()
                )));
            }
            s
        }
        Span::Auto => gcv_span_for_periodogram(&raw)?,
    };
    Ok((smooth_circular(&raw, span)?, span))
}

pub fn smoothed_log_spectrum(epoch: &TimeSeriesEpoch, span: Span) -> Result<LogSpectrumEstimate> {
    smoothed_log_spectrum_with(epoch, span, &SpectralOptions::default())
}

pub fn smoothed_log_spectrum_with(
    epoch: &TimeSeriesEpoch,
    span: Span,
    opts: &SpectralOptions,
) -> Result<LogSpectrumEstimate> {
    let (power, span) = smoothed_periodogram(epoch.values(), span, opts.scale)?;
    log_of(power, opts, EstimatorTag::Smoothed(span))
}

/// Odd spans `3, 5, ..., 2⌊√N⌋+1` searched by [`gcv_span`].
pub fn gcv_candidates(len: usize) -> Vec<usize> {
    let top = 2 * (len as f64).sqrt().floor() as usize + 1;
    (3..=top.min(len)).step_by(2).collect()
}

/// Maps a full-grid index onto the nonredundant half grid `0..=N/2`.
fn fold(index: isize, n: usize) -> usize {
    let r = index.rem_euclid(n as isize) as usize;
    if r > n / 2 {
        n - r
    } else {
        r
    }
}

/// `RSS / (1 - tr(S)/M)²` for the smoother acting on the `M = ⌊N/2⌋+1`
/// nonredundant ordinates of an even-symmetric periodogram.
pub fn gcv_score(periodogram: &[f64], span: usize) -> Result<f64> {
    let n = periodogram.len();
    let m_count = n / 2 + 1;
    let weights = modified_daniell_weights(span)?;
    if span > n {
        return Err(Error::invalid(format!("span {span} exceeds length {n}")));
    }
    let half = (span / 2) as isize;
    let mut rss = 0.0;
    let mut trace = 0.0;
    for m in 0..m_count {
        let mut fit = 0.0;
        for (i, w) in weights.iter().enumerate() {
            let j = fold(m as isize + i as isize - half, n);
            fit += w * periodogram[j];
            if j == m {
                trace += w;
            }
        }
        let r = periodogram[m] - fit;
        rss += r * r;
    }
    let denom = 1.0 - trace / m_count as f64;
    Ok(rss / (denom * denom))
}

/// GCV-selected span for the first tapered periodogram of `epoch`.
pub fn gcv_span(epoch: &TimeSeriesEpoch) -> Result<usize> {
    let raw = multitaper_periodogram(epoch.values(), 1, PeriodogramScale::Orthonormal)?;
    gcv_span_for_periodogram(&raw)
}

/// Minimizer of [`gcv_score`] over [`gcv_candidates`]; ties go to the
/// smaller span.
pub fn gcv_span_for_periodogram(periodogram: &[f64]) -> Result<usize> {
    let n = periodogram.len();
    if n < 16 {
        return Err(Error::invalid(format!("GCV span selection needs N >= 16, got {n}")));
    }
    let mut best = (f64::INFINITY, 3);
    for span in gcv_candidates(n) {
        let score = gcv_score(periodogram, span)?;
        if score < best.0 {
            best = (score, span);
        }
    }
    Ok(best.1)
}
