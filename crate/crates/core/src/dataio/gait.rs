//! Stride-interval records and their conversion to evenly sampled series.
//!
//! Raw records are whitespace-separated text, one stride per line: column 1
//! is the elapsed time in seconds at the end of the stride, column 2 the
//! stride interval in seconds. Further columns are ignored, so the 13-column
//! `.ts` files of the PhysioNet gait database are read as-is (left-foot
//! stride interval). Blank lines and lines starting with `#` are skipped.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::Corpus;
use crate::error::{Error, Result};
use crate::spectral::TimeSeriesEpoch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GaitGroup {
    Control,
    Als,
    Huntington,
}

impl GaitGroup {
    pub const ALL: [GaitGroup; 3] = [GaitGroup::Control, GaitGroup::Als, GaitGroup::Huntington];

    /// One-letter label used for group names in gait corpora.
    pub fn code(self) -> &'static str {
        match self {
            GaitGroup::Control => "C",
            GaitGroup::Als => "A",
            GaitGroup::Huntington => "H",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Group implied by a PhysioNet file name (`control*`, `als*`, `hunt*`).
    pub fn from_file_name(name: &str) -> Option<Self> {
        let name = name.to_ascii_lowercase();
        if name.starts_with("control") {
            Some(GaitGroup::Control)
        } else if name.starts_with("als") {
            Some(GaitGroup::Als)
        } else if name.starts_with("hunt") {
            Some(GaitGroup::Huntington)
        } else {
            None
        }
    }
}

/// Stride end times and stride intervals of one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct StrideRecord {
    pub id: String,
    pub group: Option<GaitGroup>,
    times: Vec<f64>,
    intervals: Vec<f64>,
}

impl StrideRecord {
    pub fn new(id: impl Into<String>, group: Option<GaitGroup>, times: Vec<f64>, intervals: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if times.len() != intervals.len() {
            return Err(Error::invalid(format!(
                "record '{id}': {} times but {} intervals",
                times.len(),
                intervals.len()
            )));
        }
        if times.iter().chain(&intervals).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("record '{id}' has non-finite values")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "record '{id}': event times not strictly increasing at stride {}",
                i + 2
            )));
        }
        if let Some(i) = intervals.iter().position(|&v| v <= 0.0) {
            return Err(Error::invalid(format!(
                "record '{id}': stride {} has non-positive interval",
                i + 1
            )));
        }
        Ok(Self {
            id,
            group,
            times,
            intervals,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Parses the raw text layout described in the module docs.
    pub fn parse(id: impl Into<String>, group: Option<GaitGroup>, reader: impl Read) -> Result<Self> {
        let (mut times, mut intervals) = (Vec::new(), Vec::new());
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                let field = fields.next().ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: format!("missing {what} column"),
                })?;
                field.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("{what} {field:?} is not a number"),
                })
            };
            times.push(next("time")?);
            intervals.push(next("interval")?);
        }
        Self::new(id, group, times, intervals)
    }
}

/// Reads one raw record; the id is the file stem and the group comes from
/// the file name prefix.
pub fn read_stride_file(path: &Path) -> Result<StrideRecord> {
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let group = GaitGroup::from_file_name(&stem);
    StrideRecord::parse(stem, group, file)
}

/// Reads every `control*`, `als*` and `hunt*` file in `dir` (other files
/// are ignored), ordered by group, then by the number in the file name.
pub fn read_gait_dir(dir: &Path) -> Result<Vec<StrideRecord>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::file(dir, e))? {
        let path = entry?.path();
        let Some(name) = path.file_name().map(|n| n.to_string_lossy().into_owned()) else {
            continue;
        };
        let is_data = path.extension().is_none_or(|e| e == "ts" || e == "txt");
        if let (Some(group), true, true) = (GaitGroup::from_file_name(&name), path.is_file(), is_data) {
            let number: u64 = name
                .chars()
                .skip_while(|c| !c.is_ascii_digit())
                .take_while(|c| c.is_ascii_digit())
                .collect::<String>()
                .parse()
                .unwrap_or(0);
            paths.push((group, number, name, path));
        }
    }
    paths.sort();
    paths.iter().map(|(.., p)| read_stride_file(p)).collect()
}

/// Settings for [`gait_preprocess`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaitOptions {
    /// Seconds discarded at the start of each walk.
    pub start: f64,
    /// Seconds kept after `start`.
    pub duration: f64,
    /// Output sampling rate in Hz.
    pub rate: f64,
    /// Running-median window (odd).
    pub median_window: usize,
    /// Replacement threshold in sample standard deviations.
    pub outlier_sds: f64,
    /// Fixed spline smoothing parameter; `None` selects it by GCV.
    pub smoothing: Option<f64>,
}

impl Default for GaitOptions {
    fn default() -> Self {
        Self {
            start: 20.0,
            duration: 210.0,
            rate: 2.0,
            median_window: 11,
            outlier_sds: 3.0,
            smoothing: None,
        }
    }
}

impl GaitOptions {
    /// Number of output samples.
    pub fn output_len(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(self.start >= 0.0 && positive(self.duration) && positive(self.rate)) {
            return Err(Error::invalid("start must be >= 0; duration and rate must be positive"));
        }
        if self.median_window.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "median window must be odd, got {}",
                self.median_window
            )));
        }
        if !positive(self.outlier_sds) {
            return Err(Error::invalid("outlier threshold must be positive"));
        }
        if self.smoothing.is_some_and(|l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid("smoothing parameter must be >= 0"));
        }
        Ok(())
    }
}

/// Turns a stride record into an evenly sampled, linearly detrended series:
/// drop the start-up period, replace outliers by the running median, fit a
/// cubic smoothing spline to interval against time, sample it, detrend.
pub fn gait_preprocess(record: &StrideRecord, opts: &GaitOptions) -> Result<TimeSeriesEpoch> {
    opts.validate()?;
    let end = opts.start + opts.duration;
    let available = record.times.last().copied().unwrap_or(0.0);
    if available < end {
        return Err(Error::invalid(format!(
            "record '{}' spans {available:.1} s, need {end:.1} s ({:.1} s start-up + {:.1} s)",
            record.id, opts.start, opts.duration
        )));
    }
    // Keep strides from `start` through the first one ending at or after `end`.
    let first = record.times.partition_point(|&t| t < opts.start);
    let last = record.times.partition_point(|&t| t < end);
    let (times, raw) = (&record.times[first..=last], &record.intervals[first..=last]);
    if times.len() < 4 {
        return Err(Error::invalid(format!(
            "record '{}' has {} strides in the analysis window, need at least 4",
            record.id,
            times.len()
        )));
    }

    let cleaned = replace_outliers(raw, opts.median_window, opts.outlier_sds);
    let spline = match opts.smoothing {
        Some(lambda) => SmoothingSpline::fit(times, &cleaned, lambda)?,
        None => SmoothingSpline::fit_gcv(times, &cleaned)?,
    };
    let n = opts.output_len();
    let sampled: Vec<f64> = (0..n)
        .map(|k| spline.evaluate(opts.start + k as f64 / opts.rate))
        .collect();
    let group = record.group.map(GaitGroup::index);
    TimeSeriesEpoch::new(record.id.clone(), group, detrend(&sampled))
}

/// Preprocesses every record into a corpus with groups `C`, `A`, `H`.
pub fn gait_corpus(records: &[StrideRecord], opts: &GaitOptions) -> Result<Corpus> {
    let epochs = records
        .iter()
        .map(|r| gait_preprocess(r, opts))
        .collect::<Result<Vec<_>>>()?;
    let names = GaitGroup::ALL.iter().map(|g| g.code().to_string()).collect();
    Corpus::new(epochs, names)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Centered running median; the window shrinks symmetrically at the ends.
pub fn running_median(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    let mut buf = Vec::with_capacity(window);
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            buf.clear();
            buf.extend_from_slice(&values[i - h..=i + h]);
            median(&mut buf)
        })
        .collect()
}

/// Replaces values further than `k` sample standard deviations from the
/// running median by that median.
pub fn replace_outliers(values: &[f64], window: usize, k: f64) -> Vec<f64> {
    let n = values.len() as f64;
    if values.len() < 2 {
        return values.to_vec();
    }
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let med = running_median(values, window);
    values
        .iter()
        .zip(&med)
        .map(|(&v, &m)| if (v - m).abs() > k * sd { m } else { v })
        .collect()
}

/// Residuals from the least-squares line through `(k, y_k)`.
pub fn detrend(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let xbar = (n - 1.0) / 2.0;
    let ybar = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in values.iter().enumerate() {
        let dx = k as f64 - xbar;
        sxy += dx * (y - ybar);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    values
        .iter()
        .enumerate()
        .map(|(k, y)| y - ybar - slope * (k as f64 - xbar))
        .collect()
}

/// Natural cubic smoothing spline minimizing
/// `Σ (y_i - g(t_i))² + λ ∫ g''(t)² dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingSpline {
    knots: Vec<f64>,
    fitted: Vec<f64>,
    /// Second derivatives at the knots (zero at both ends).
    second: Vec<f64>,
    lambda: f64,
}

/// Penalty matrix `K = Q R⁻¹ Qᵀ` and `R⁻¹ Qᵀ` for the knots `t`.
struct Penalty {
    k: DMatrix<f64>,
    r_inv_qt: DMatrix<f64>,
}

impl Penalty {
    fn new(t: &[f64]) -> Result<Self> {
        let n = t.len();
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let m = n - 2;
        let mut q = DMatrix::zeros(n, m);
        let mut r = DMatrix::zeros(m, m);
        for j in 0..m {
            q[(j, j)] = 1.0 / h[j];
            q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
            q[(j + 2, j)] = 1.0 / h[j + 1];
            r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
            if j + 1 < m {
                r[(j, j + 1)] = h[j + 1] / 6.0;
                r[(j + 1, j)] = h[j + 1] / 6.0;
            }
        }
        let chol = r
            .cholesky()
            .ok_or_else(|| Error::invalid("spline band matrix is not positive definite"))?;
        let r_inv_qt = chol.solve(&q.transpose());
        let k = &q * &r_inv_qt;
        Ok(Self { k, r_inv_qt })
    }
}

impl SmoothingSpline {
    fn check(t: &[f64], y: &[f64]) -> Result<()> {
        if t.len() != y.len() || t.len() < 3 {
            return Err(Error::invalid(format!(
                "spline needs at least 3 matching points, got {} knots and {} values",
                t.len(),
                y.len()
            )));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) || t.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("spline knots must be finite and strictly increasing"));
        }
        Ok(())
    }

    pub fn fit(t: &[f64], y: &[f64], lambda: f64) -> Result<Self> {
        Self::check(t, y)?;
        let p = Penalty::new(t)?;
        let n = t.len();
        let a = DMatrix::identity(n, n) + &p.k * lambda;
        let fitted = a
            .cholesky()
            .ok_or_else(|| Error::invalid("spline system is not positive definite"))?
            .solve(&DVector::from_column_slice(y));
        Ok(Self::from_fit(t, fitted, &p, lambda))
    }

    /// Fit with `λ` minimizing `GCV(λ) = n RSS(λ) / (n - tr A(λ))²` over a
    /// log-spaced grid spanning the penalty's spectrum. Ties go to the
    /// larger `λ`.
    pub fn fit_gcv(t: &[f64], y: &[f64]) -> Result<Self> {
        Self::check(t, y)?;
        let p = Penalty::new(t)?;
        let n = t.len();
        let eig = SymmetricEigen::new(p.k.clone());
        let z = eig.eigenvectors.transpose() * DVector::from_column_slice(y);
        let d: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        let dmax = d.iter().copied().fold(0.0, f64::max);
        if dmax <= 0.0 {
            return Err(Error::invalid("spline penalty is zero"));
        }
        // From near interpolation (λ·d_max = 1e6) to a straight line
        // (λ·d_min⁺ ≈ 1e-6 relative); 20 points per decade.
        let dmin = d.iter().copied().filter(|&v| v > 1e-12 * dmax).fold(dmax, f64::min);
        let lo = (1e-6 / dmax).log10();
        let hi = (1e6 / dmin).log10();
        let steps = ((hi - lo) * 20.0).ceil().max(1.0) as usize;
        let gcv = |lambda: f64| {
            let (mut rss, mut trace) = (0.0, 0.0);
            for (di, zi) in d.iter().zip(z.iter()) {
                let s = 1.0 / (1.0 + lambda * di);
                trace += s;
                rss += ((1.0 - s) * zi).powi(2);
            }
            n as f64 * rss / (n as f64 - trace).powi(2)
        };
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=steps {
            let lambda = 10f64.powf(lo + (hi - lo) * i as f64 / steps as f64);
            let score = gcv(lambda);
            if score <= best.0 {
                best = (score, lambda);
            }
        }
        let lambda = best.1;
        let shrink = DVector::from_iterator(n, d.iter().map(|di| 1.0 / (1.0 + lambda * di)));
        let fitted = &eig.eigenvectors * z.component_mul(&shrink);
        Ok(Self::from_fit(t, fitted, &p, lambda))
    }

    fn from_fit(t: &[f64], fitted: DVector<f64>, p: &Penalty, lambda: f64) -> Self {
        let gamma = &p.r_inv_qt * &fitted;
        let mut second = vec![0.0; t.len()];
        second[1..t.len() - 1].copy_from_slice(gamma.as_slice());
        Self {
            knots: t.to_vec(),
            fitted: fitted.as_slice().to_vec(),
            second,
            lambda,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Fitted values at the knots.
    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    /// Value at `x`; linear beyond the end knots.
    pub fn evaluate(&self, x: f64) -> f64 {
        let (t, g, s) = (&self.knots, &self.fitted, &self.second);
        let n = t.len();
        if x <= t[0] {
            let h = t[1] - t[0];
            let slope = (g[1] - g[0]) / h - h * s[1] / 6.0;
            return g[0] + slope * (x - t[0]);
        }
        if x >= t[n - 1] {
            let h = t[n - 1] - t[n - 2];
            let slope = (g[n - 1] - g[n - 2]) / h + h * s[n - 2] / 6.0;
            return g[n - 1] + slope * (x - t[n - 1]);
        }
        let i = t.partition_point(|&k| k <= x) - 1;
        let h = t[i + 1] - t[i];
        let (a, b) = (x - t[i], t[i + 1] - x);
        (a * g[i + 1] + b * g[i]) / h - a * b / 6.0 * ((1.0 + a / h) * s[i + 1] + (1.0 + b / h) * s[i])
    }
}
