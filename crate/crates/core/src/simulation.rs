//! Conditional MA(1) and AR(2) populations, their closed-form spectra and
//! cepstra, and a seeded Monte Carlo runner comparing classifiers.
//!
//! In a conditional population every replicate draws its own coefficients
//! (and innovation variance) before its series is generated, so replicate
//! spectra vary within a group.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::baselines::{classify_information, group_templates, tune_chernoff_alpha_spectra, Measure, SpectrumEstimate};
use crate::cepstral::{cepstrum_of_values, CepstralVector, LabeledCepstralCorpus};
use crate::discriminant::{fit, select_l_cv_cepstra};
use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{multitaper_periodogram, smoothed_periodogram, PeriodogramScale, Span, TimeSeriesEpoch};

/// Samples discarded before an AR(2) series is recorded.
pub const AR2_BURN_IN: usize = 500;

/// Closed interval `[lo, hi]` for a uniform draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::invalid(format!(
                "{what} range [{}, {}] is not a finite interval",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            Uniform::new_inclusive(self.lo, self.hi)
                .expect("validated interval")
                .sample(rng)
        }
    }
}

/// AR(2) stationarity triangle.
pub fn ar2_is_stationary(phi1: f64, phi2: f64) -> bool {
    phi2 + phi1 < 1.0 && phi2 - phi1 < 1.0 && phi2.abs() < 1.0
}

/// Uniform ranges for the AR coefficients and innovation variance of one
/// group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar2GroupSpec {
    pub phi1: Range,
    pub phi2: Range,
    pub sigma2: Range,
}

impl Ar2GroupSpec {
    pub fn validate(&self) -> Result<()> {
        self.phi1.validate("phi1")?;
        self.phi2.validate("phi2")?;
        self.sigma2.validate("sigma2")?;
        if self.sigma2.lo <= 0.0 {
            return Err(Error::invalid("innovation variance must be positive"));
        }
        // The triangle is convex, so checking the box corners suffices.
        for p1 in [self.phi1.lo, self.phi1.hi] {
            for p2 in [self.phi2.lo, self.phi2.hi] {
                if !ar2_is_stationary(p1, p2) {
                    return Err(Error::invalid(format!("AR(2) corner ({p1}, {p2}) is not stationary")));
                }
            }
        }
        Ok(())
    }
}

/// The three AR(2) groups of the reference simulation design with a shared
/// innovation-variance range.
pub fn reference_groups(sigma2: Range) -> Vec<Ar2GroupSpec> {
    [
        (Range::new(0.05, 0.7), Range::new(-0.12, -0.06)),
        (Range::new(0.01, 1.2), Range::new(-0.36, -0.25)),
        (Range::new(0.12, 1.5), Range::new(-0.75, -0.56)),
    ]
    .into_iter()
    .map(|(phi1, phi2)| Ar2GroupSpec { phi1, phi2, sigma2 })
    .collect()
}

/// Innovation-variance ranges of the reference design.
pub const REFERENCE_SIGMA2_RANGES: [Range; 3] = [Range::new(0.1, 10.0), Range::new(0.3, 3.0), Range::new(0.9, 1.1)];

fn epoch_id(kind: &str, group: Option<usize>, k: usize) -> String {
    match group {
        Some(g) => format!("{kind}-g{g}-{k}"),
        None => format!("{kind}-{k}"),
    }
}

fn normal(sigma2: f64) -> Normal<f64> {
    Normal::new(0.0, sigma2.sqrt()).expect("positive variance")
}

/// `n` epochs of length `len` from `X_t = ε_t + θ ε_{t-1}`, with `θ` drawn
/// per epoch from `theta` and `ε ~ N(0, σ²)`.
pub fn gen_conditional_ma1<R: Rng + ?Sized>(
    sigma2: f64,
    theta: Range,
    n: usize,
    len: usize,
    group: Option<usize>,
    rng: &mut R,
) -> Result<Vec<TimeSeriesEpoch>> {
    theta.validate("theta")?;
    if theta.lo < 0.0 || theta.hi > 1.0 {
        return Err(Error::invalid(format!(
            "theta range [{}, {}] must lie within [0, 1]",
            theta.lo, theta.hi
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("innovation variance must be positive"));
    }
    let noise = normal(sigma2);
    (0..n)
        .map(|k| {
            let th = theta.sample(rng);
            let eps: Vec<f64> = (0..=len).map(|_| noise.sample(rng)).collect();
            let values = eps.windows(2).map(|w| w[1] + th * w[0]).collect();
            TimeSeriesEpoch::new(epoch_id("ma1", group, k), group, values)
        })
        .collect()
}

/// `n` epochs from a conditional AR(2) group, each simulated from zero
/// initial conditions with [`AR2_BURN_IN`] discarded samples.
pub fn gen_conditional_ar2<R: Rng + ?Sized>(
    spec: &Ar2GroupSpec,
    n: usize,
    len: usize,
    group: Option<usize>,
    rng: &mut R,
) -> Result<Vec<TimeSeriesEpoch>> {
    spec.validate()?;
    (0..n)
        .map(|k| {
            let phi1 = spec.phi1.sample(rng);
            let phi2 = spec.phi2.sample(rng);
            let sigma2 = spec.sigma2.sample(rng);
            let noise = normal(sigma2);
            let (mut x1, mut x2) = (0.0, 0.0);
            let mut values = Vec::with_capacity(len);
            for t in 0..AR2_BURN_IN + len {
                let x = phi1 * x1 + phi2 * x2 + noise.sample(rng);
                x2 = x1;
                x1 = x;
                if t >= AR2_BURN_IN {
                    values.push(x);
                }
            }
            TimeSeriesEpoch::new(epoch_id("ar2", group, k), group, values)
        })
        .collect()
}

/// `log f(λ_g) = log σ² - log|1 - φ₁e^{-2πiλ} - φ₂e^{-4πiλ}|²` on `λ_g = g/G`.
pub fn ar2_log_spectrum(phi1: f64, phi2: f64, sigma2: f64, grid: usize) -> Result<Vec<f64>> {
    if !ar2_is_stationary(phi1, phi2) {
        return Err(Error::invalid(format!(
            "AR(2) coefficients ({phi1}, {phi2}) are not stationary"
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("innovation variance must be positive"));
    }
    Ok((0..grid)
        .map(|g| {
            let w = 2.0 * PI * g as f64 / grid as f64;
            let re = 1.0 - phi1 * w.cos() - phi2 * (2.0 * w).cos();
            let im = phi1 * w.sin() + phi2 * (2.0 * w).sin();
            sigma2.ln() - (re * re + im * im).ln()
        })
        .collect())
}

/// `log{σ²(1 + θ² + 2θ cos 2πλ)}` on `λ_g = g/G`.
pub fn ma1_log_spectrum(theta: f64, sigma2: f64, grid: usize) -> Vec<f64> {
    (0..grid)
        .map(|g| {
            let lam = g as f64 / grid as f64;
            (sigma2 * (1.0 + theta * theta + 2.0 * theta * (2.0 * PI * lam).cos())).ln()
        })
        .collect()
}

/// Closed-form MA(1) cepstrum: `c_0 = log σ²`, `c_ℓ = (-1)^{ℓ+1} √2 θ^ℓ / ℓ`.
pub fn analytic_ma1_cepstrum(theta: f64, sigma2: f64, l: usize) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::invalid(format!(
            "theta {theta} must lie in [0, 1) for an invertible MA(1)"
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("innovation variance must be positive"));
    }
    Ok((0..l)
        .map(|ell| {
            if ell == 0 {
                sigma2.ln()
            } else {
                alternating(ell) * SQRT_2 * theta.powi(ell as i32) / ell as f64
            }
        })
        .collect())
}

fn alternating(ell: usize) -> f64 {
    if ell % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Group mean cepstrum and cepstral covariance of a conditional MA(1)
/// population.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstralMoments {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

/// Moments for `θ ~ Uni(0, 1)`:
/// `a_ℓ = (-1)^{ℓ+1}√2 / {ℓ(ℓ+1)}` and
/// `Γ(ℓ,m) = 2(-1)^{ℓ+m} / {(ℓ+m+1)(ℓ+1)(m+1)}`, with row and column 0 zero.
pub fn analytic_ma1_group_moments(sigma2: f64, l: usize) -> Result<CepstralMoments> {
    if l < 1 {
        return Err(Error::invalid("truncation must be at least 1"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("innovation variance must be positive"));
    }
    let mean = (0..l)
        .map(|ell| {
            if ell == 0 {
                sigma2.ln()
            } else {
                alternating(ell) * SQRT_2 / (ell * (ell + 1)) as f64
            }
        })
        .collect();
    let covariance = DMatrix::from_fn(l, l, |a, b| {
        if a == 0 || b == 0 {
            0.0
        } else {
            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * sign / ((a + b + 1) * (a + 1) * (b + 1)) as f64
        }
    });
    Ok(CepstralMoments { mean, covariance })
}

/// Moments for `θ ~ Uni(lo, hi)`, `0 ≤ lo < hi ≤ 1`, from the raw moments
/// `E θ^k = (hi^{k+1} - lo^{k+1}) / {(k+1)(hi - lo)}`.
pub fn analytic_ma1_moments_uniform(theta: Range, sigma2: f64, l: usize) -> Result<CepstralMoments> {
    theta.validate("theta")?;
    if theta.lo < 0.0 || theta.hi > 1.0 || theta.lo >= theta.hi {
        return Err(Error::invalid("theta range must satisfy 0 <= lo < hi <= 1"));
    }
    if l < 1 || !(sigma2 > 0.0) {
        return Err(Error::invalid("need L >= 1 and positive variance"));
    }
    let raw = |k: usize| {
        let k1 = (k + 1) as i32;
        (theta.hi.powi(k1) - theta.lo.powi(k1)) / ((k + 1) as f64 * (theta.hi - theta.lo))
    };
    let mean = (0..l)
        .map(|ell| {
            if ell == 0 {
                sigma2.ln()
            } else {
                alternating(ell) * SQRT_2 * raw(ell) / ell as f64
            }
        })
        .collect();
    let covariance = DMatrix::from_fn(l, l, |a, b| {
        if a == 0 || b == 0 {
            0.0
        } else {
            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * sign * (raw(a + b) - raw(a) * raw(b)) / (a * b) as f64
        }
    });
    Ok(CepstralMoments { mean, covariance })
}

/// Population first discriminant weight for two conditional MA(1) groups
/// with a common innovation variance and equal priors, restricted to
/// coefficients `1..L` (coefficient 0 has no within-group variance and gets
/// weight 0). Returns the weight and the pooled covariance it is normalized
/// against.
pub fn ma1_two_group_oracle_weight(theta_a: Range, theta_b: Range, l: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if l < 2 {
        return Err(Error::invalid("oracle weight needs L >= 2"));
    }
    let a = analytic_ma1_moments_uniform(theta_a, 1.0, l)?;
    let b = analytic_ma1_moments_uniform(theta_b, 1.0, l)?;
    let pooled = (&a.covariance + &b.covariance) * 0.5;
    let k = l - 1;
    let sub = pooled.view((1, 1), (k, k)).into_owned();
    let diff = DVector::from_fn(k, |i, _| a.mean[i + 1] - b.mean[i + 1]);
    let chol = sub
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("population covariance is not positive definite"))?;
    let y = chol.solve(&diff);
    let norm = (y.transpose() * &sub * &y)[(0, 0)].sqrt();
    let mut weight = vec![0.0; l];
    for i in 0..k {
        weight[i + 1] = y[i] / norm;
    }
    Ok((weight, pooled))
}

/// Classifiers compared by [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CepstralMultitaper,
    CepstralDirect,
    CepstralSmoothed,
    Chernoff,
    Kl,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::CepstralMultitaper,
        Method::CepstralDirect,
        Method::CepstralSmoothed,
        Method::Chernoff,
        Method::Kl,
    ];

    pub fn is_cepstral(&self) -> bool {
        matches!(
            self,
            Method::CepstralMultitaper | Method::CepstralDirect | Method::CepstralSmoothed
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::CepstralMultitaper => "cepstral-multitaper",
            Method::CepstralDirect => "cepstral-direct",
            Method::CepstralSmoothed => "cepstral-smoothed",
            Method::Chernoff => "chernoff",
            Method::Kl => "kl",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub groups: Vec<Ar2GroupSpec>,
    pub train_per_group: usize,
    pub test_per_group: usize,
    pub len: usize,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Multitaper taper count `R`.
    pub tapers: usize,
    /// Truncations searched by leave-one-out CV for the cepstral methods.
    pub l_candidates: Vec<usize>,
    /// Chernoff `α` grid searched by leave-one-out CV.
    pub alpha_grid: Vec<f64>,
}

impl ExperimentConfig {
    /// One cell of the reference design: three AR(2) groups, 50 test series
    /// per group, `R = 7`, `L ∈ {2..8}` and `α ∈ {0.1..0.9}`.
    pub fn reference(sigma2: Range, train_per_group: usize, len: usize, reps: usize, seed: u64) -> Self {
        Self {
            groups: reference_groups(sigma2),
            train_per_group,
            test_per_group: 50,
            len,
            reps,
            seed,
            methods: Method::ALL.to_vec(),
            tapers: 7,
            l_candidates: (2..=8).collect(),
            alpha_grid: crate::baselines::default_alpha_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.len() < 2 {
            return Err(Error::invalid("need at least two groups"));
        }
        for g in &self.groups {
            g.validate()?;
        }
        if self.reps < 1 || self.train_per_group < 3 || self.test_per_group < 1 {
            return Err(Error::invalid(
                "need reps >= 1, at least 3 training and 1 test series per group",
            ));
        }
        if self.len < 16 {
            return Err(Error::invalid("series length must be at least 16"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods selected"));
        }
        if self.tapers < 1 || self.tapers > self.len {
            return Err(Error::invalid("taper count out of range"));
        }
        let n = self.train_per_group * self.groups.len();
        let limit = (self.len / 2 + 1).min(n.saturating_sub(self.groups.len() + 1));
        if self.l_candidates.is_empty() || self.l_candidates.iter().any(|&l| l < 1 || l > limit) {
            return Err(Error::invalid(format!("truncation candidates must lie in 1..={limit}")));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::invalid("alpha grid must be nonempty and inside (0, 1)"));
        }
        Ok(())
    }
}

/// Summary of one method over all replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Mean percent correct over successful replicates.
    pub mean: f64,
    /// Sample standard deviation of the percent correct.
    pub sd: f64,
    /// Percent correct per replicate; `None` where the fit failed.
    pub rates: Vec<Option<f64>>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub methods: Vec<MethodSummary>,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }
}

/// Generator for replicate `rep`: the seed picks the key, the replicate
/// picks the stream, so replicates are independent of execution order.
pub fn replicate_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Runs every replicate and aggregates percent-correct rates per method.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let reps: Vec<usize> = (0..config.reps).collect();
    let outcomes = par::map(&reps, |&rep| run_replicate(config, rep));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let rates: Vec<Option<f64>> = outcomes.iter().map(|o| o[k]).collect();
            let ok: Vec<f64> = rates.iter().flatten().copied().collect();
            let mean = if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().sum::<f64>() / ok.len() as f64
            };
            let sd = if ok.len() < 2 {
                0.0
            } else {
                (ok.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
            };
            MethodSummary {
                method,
                mean,
                sd,
                failures: rates.len() - ok.len(),
                rates,
            }
        })
        .collect();
    Ok(ExperimentReport {
        config: config.clone(),
        methods,
    })
}

struct Sample {
    epochs: Vec<TimeSeriesEpoch>,
    labels: Vec<usize>,
}

fn draw<R: Rng + ?Sized>(config: &ExperimentConfig, per_group: usize, rng: &mut R) -> Result<Sample> {
    let mut epochs = Vec::with_capacity(per_group * config.groups.len());
    for (g, spec) in config.groups.iter().enumerate() {
        epochs.extend(gen_conditional_ar2(spec, per_group, config.len, Some(g), rng)?);
    }
    let labels = epochs.iter().map(|e| e.group.expect("generated with labels")).collect();
    Ok(Sample { epochs, labels })
}

/// Percent correct per configured method for one replicate; `None` marks a
/// failed fit. Errors are reserved for generation failures.
fn run_replicate(config: &ExperimentConfig, rep: usize) -> Result<Vec<Option<f64>>> {
    let mut rng = replicate_rng(config.seed, rep);
    let train = draw(config, config.train_per_group, &mut rng)?;
    let test = draw(config, config.test_per_group, &mut rng)?;

    let needs_smoothed = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::CepstralSmoothed | Method::Chernoff | Method::Kl));
    let smoothed = |s: &Sample| -> Option<Vec<Vec<f64>>> {
        s.epochs
            .iter()
            .map(|e| {
                smoothed_periodogram(e.values(), Span::Auto, PeriodogramScale::Orthonormal)
                    .ok()
                    .map(|(v, _)| v)
            })
            .collect()
    };
    let (train_smoothed, test_smoothed) = if needs_smoothed {
        (smoothed(&train), smoothed(&test))
    } else {
        (None, None)
    };

    Ok(config
        .methods
        .iter()
        .map(|method| match method {
            Method::CepstralMultitaper => {
                let power = |s: &Sample| -> Option<Vec<Vec<f64>>> {
                    s.epochs
                        .iter()
                        .map(|e| multitaper_periodogram(e.values(), config.tapers, PeriodogramScale::Orthonormal).ok())
                        .collect()
                };
                cepstral_rate(config, &train, &test, power(&train), power(&test))
            }
            Method::CepstralDirect => {
                let power = |s: &Sample| -> Option<Vec<Vec<f64>>> {
                    s.epochs
                        .iter()
                        .map(|e| multitaper_periodogram(e.values(), 1, PeriodogramScale::Orthonormal).ok())
                        .collect()
                };
                cepstral_rate(config, &train, &test, power(&train), power(&test))
            }
            Method::CepstralSmoothed => {
                cepstral_rate(config, &train, &test, train_smoothed.clone(), test_smoothed.clone())
            }
            Method::Chernoff | Method::Kl => information_rate(
                config,
                *method,
                &train,
                &test,
                train_smoothed.as_deref(),
                test_smoothed.as_deref(),
            ),
        })
        .collect())
}

fn percent(correct: usize, total: usize) -> f64 {
    100.0 * correct as f64 / total as f64
}

fn cepstra_of_power(power: &[Vec<f64>], labels: &[usize], l: usize) -> Option<Vec<CepstralVector>> {
    power
        .iter()
        .zip(labels)
        .map(|(p, &g)| {
            if p.iter().any(|&v| !(v > 0.0)) {
                return None;
            }
            let log: Vec<f64> = p.iter().map(|v| v.ln()).collect();
            let c = cepstrum_of_values(&log, l).ok()?;
            CepstralVector::new(c, p.len(), Some(g)).ok()
        })
        .collect()
}

fn cepstral_rate(
    config: &ExperimentConfig,
    train: &Sample,
    test: &Sample,
    train_power: Option<Vec<Vec<f64>>>,
    test_power: Option<Vec<Vec<f64>>>,
) -> Option<f64> {
    let top = *config.l_candidates.iter().max()?;
    let train_c = cepstra_of_power(&train_power?, &train.labels, top)?;
    let test_c = cepstra_of_power(&test_power?, &test.labels, top)?;
    let corpus = LabeledCepstralCorpus::new(train_c).ok()?;
    let curve = select_l_cv_cepstra(&corpus, &config.l_candidates).ok()?;
    let model = fit(&corpus.truncated(curve.selected).ok()?, None).ok()?;
    let mut correct = 0;
    for v in &test_c {
        let r = model.classify(&v.truncated(curve.selected).ok()?).ok()?;
        correct += usize::from(Some(r.predicted_group) == v.group);
    }
    Some(percent(correct, test_c.len()))
}

fn information_rate(
    config: &ExperimentConfig,
    method: Method,
    train: &Sample,
    test: &Sample,
    train_smoothed: Option<&[Vec<f64>]>,
    test_smoothed: Option<&[Vec<f64>]>,
) -> Option<f64> {
    let to_spectra = |v: &[Vec<f64>]| -> Option<Vec<SpectrumEstimate>> {
        v.iter().map(|s| SpectrumEstimate::new(s.clone()).ok()).collect()
    };
    let train_s = to_spectra(train_smoothed?)?;
    let test_s = to_spectra(test_smoothed?)?;
    let measure = match method {
        Method::Kl => Measure::Kl,
        _ => {
            let tuned = tune_chernoff_alpha_spectra(&train_s, &train.labels, &config.alpha_grid).ok()?;
            Measure::Chernoff { alpha: tuned.selected }
        }
    };
    let templates = group_templates(&train_s, &train.labels).ok()?;
    let mut correct = 0;
    for (s, &g) in test_s.iter().zip(&test.labels) {
        correct += usize::from(classify_information(s, &templates, measure).ok()? == g);
    }
    Some(percent(correct, test_s.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lag_autocorrelation(x: &[f64], h: usize) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let ch: f64 = (0..n - h).map(|t| (x[t] - mean) * (x[t + h] - mean)).sum();
        ch / c0
    }

    fn mean_autocorrelation(epochs: &[TimeSeriesEpoch], h: usize) -> f64 {
        epochs.iter().map(|e| lag_autocorrelation(e.values(), h)).sum::<f64>() / epochs.len() as f64
    }

    #[test]
    fn ma1_white_noise_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = gen_conditional_ma1(1.0, Range::point(0.0), 500, 256, None, &mut rng).unwrap();
        assert!(mean_autocorrelation(&e, 1).abs() < 0.02);
    }

    #[test]
    fn ma1_fixed_theta_autocorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = gen_conditional_ma1(1.0, Range::point(0.5), 500, 256, None, &mut rng).unwrap();
        assert!((mean_autocorrelation(&e, 1) - 0.4).abs() < 0.02);
        for h in 2..5 {
            assert!(mean_autocorrelation(&e, h).abs() < 0.02, "lag {h}");
        }
    }

    #[test]
    fn ma1_marginal_lags_vanish_beyond_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = gen_conditional_ma1(2.0, Range::new(0.0, 1.0), 500, 256, None, &mut rng).unwrap();
        for h in 2..6 {
            assert!(mean_autocorrelation(&e, h).abs() < 0.02, "lag {h}");
        }
    }

    #[test]
    fn ma1_argument_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gen_conditional_ma1(1.0, Range::new(0.5, 0.2), 1, 16, None, &mut rng).is_err());
        assert!(gen_conditional_ma1(1.0, Range::new(-0.1, 0.2), 1, 16, None, &mut rng).is_err());
        assert!(gen_conditional_ma1(1.0, Range::new(0.1, 1.2), 1, 16, None, &mut rng).is_err());
        assert!(gen_conditional_ma1(0.0, Range::new(0.1, 0.2), 1, 16, None, &mut rng).is_err());
    }

    #[test]
    fn reference_groups_are_stationary() {
        for sigma2 in REFERENCE_SIGMA2_RANGES {
            for g in reference_groups(sigma2) {
                g.validate().unwrap();
            }
        }
        // 1.5 - 0.56 = 0.94 < 1 at the tightest corner of group 3.
        assert!(ar2_is_stationary(1.5, -0.56));
        let bad = Ar2GroupSpec {
            phi1: Range::new(0.5, 1.2),
            phi2: Range::new(-0.1, 0.0),
            sigma2: Range::point(1.0),
        };
        assert!(bad.validate().is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gen_conditional_ar2(&bad, 1, 32, None, &mut rng).is_err());
    }

    #[test]
    fn ar2_degenerate_is_white_noise() {
        let spec = Ar2GroupSpec {
            phi1: Range::point(0.0),
            phi2: Range::point(0.0),
            sigma2: Range::point(2.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = gen_conditional_ar2(&spec, 200, 500, None, &mut rng).unwrap();
        let var = e.iter().flat_map(|e| e.values().iter()).map(|v| v * v).sum::<f64>() / (200.0 * 500.0);
        assert!((var / 2.0 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn ar2_log_spectrum_values() {
        assert!(ar2_log_spectrum(0.0, 0.0, 1.0, 16).unwrap().iter().all(|&v| v == 0.0));
        assert_abs_diff_eq!(
            ar2_log_spectrum(0.5, 0.0, 1.0, 8).unwrap()[0],
            4f64.ln(),
            epsilon = 1e-12
        );
        assert!(ar2_log_spectrum(0.6, 0.5, 1.0, 8).is_err());
    }

    #[test]
    fn ar2_spectrum_integrates_to_sample_variance() {
        let (phi1, phi2, sigma2) = (0.9, -0.5, 1.5);
        let grid = 4096;
        let integral: f64 = ar2_log_spectrum(phi1, phi2, sigma2, grid)
            .unwrap()
            .iter()
            .map(|v| v.exp())
            .sum::<f64>()
            / grid as f64;
        let spec = Ar2GroupSpec {
            phi1: Range::point(phi1),
            phi2: Range::point(phi2),
            sigma2: Range::point(sigma2),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = gen_conditional_ar2(&spec, 40, 5000, None, &mut rng).unwrap();
        let var = e.iter().flat_map(|e| e.values().iter()).map(|v| v * v).sum::<f64>() / (40.0 * 5000.0);
        assert!((var / integral - 1.0).abs() < 0.02, "{var} vs {integral}");
    }

    #[test]
    fn ma1_cepstrum_closed_form() {
        assert_eq!(analytic_ma1_cepstrum(0.0, 1.0, 4).unwrap(), vec![0.0; 4]);
        let c = analytic_ma1_cepstrum(0.5, 1.0, 3).unwrap();
        assert_abs_diff_eq!(c[1], SQRT_2 * 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c[2], -SQRT_2 * 0.125, epsilon = 1e-15);
        assert!(analytic_ma1_cepstrum(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn ma1_cepstrum_matches_dense_grid() {
        for theta in [0.2, 0.5, 0.8] {
            let grid = cepstrum_of_values(&ma1_log_spectrum(theta, 2.0, 8192), 13).unwrap();
            let exact = analytic_ma1_cepstrum(theta, 2.0, 13).unwrap();
            for (a, b) in grid.iter().zip(&exact) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn group_moments_closed_form() {
        let m = analytic_ma1_group_moments(1.0, 5).unwrap();
        assert_abs_diff_eq!(m.mean[1], SQRT_2 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.covariance[(1, 1)], 1.0 / 6.0, epsilon = 1e-15);
        // Independent route: E[2θ²] - (E[√2θ])² = 2/3 - 1/2.
        assert_abs_diff_eq!(m.covariance[(1, 1)], 2.0 / 3.0 - 0.5, epsilon = 1e-15);
        assert_eq!(m.covariance[(0, 3)], 0.0);
        let u = analytic_ma1_moments_uniform(Range::new(0.0, 1.0), 1.0, 5).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(m.mean[i], u.mean[i], epsilon = 1e-14);
            for j in 0..5 {
                assert_abs_diff_eq!(m.covariance[(i, j)], u.covariance[(i, j)], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    fn small_config(seed: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::reference(Range::new(0.3, 3.0), 8, 128, 3, seed);
        c.test_per_group = 5;
        c.l_candidates = vec![2, 3, 4];
        c
    }

    #[test]
    fn experiment_is_deterministic() {
        let a = run_experiment(&small_config(7)).unwrap();
        let b = run_experiment(&small_config(7)).unwrap();
        assert_eq!(a, b);
        for s in &a.methods {
            assert_eq!(s.rates.len(), 3);
            for r in s.rates.iter().flatten() {
                assert!((0.0..=100.0).contains(r));
            }
            assert!(s.sd >= 0.0);
        }
        let c = run_experiment(&small_config(8)).unwrap();
        assert_ne!(a.methods[0].rates, c.methods[0].rates);
    }

    #[test]
    fn experiment_config_validation() {
        let mut c = small_config(1);
        c.l_candidates = vec![30];
        assert!(run_experiment(&c).is_err());
        let mut c = small_config(1);
        c.reps = 0;
        assert!(run_experiment(&c).is_err());
        let mut c = small_config(1);
        c.methods.clear();
        assert!(run_experiment(&c).is_err());
    }
}
