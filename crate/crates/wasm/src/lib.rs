//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function is a thin wrapper over a plain Rust function
//! returning [`cepfda::Result`], so the logic is testable natively.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use cepfda::cepstral::{cepstral_coefficients, corpus_from_epochs, max_truncation};
use cepfda::discriminant::fit;
use cepfda::simulation::Ar2GroupSpec;
use cepfda::simulation::{
    analytic_ma1_cepstrum, ar2_log_spectrum, gen_conditional_ar2, gen_conditional_ma1, reference_groups, Range,
};
use cepfda::spectral::{direct_log_spectrum, multitaper_log_spectrum, Estimator, EstimatorConfig, TimeSeriesEpoch};
use cepfda::Result;

fn js(e: cepfda::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn rng(seed: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(u64::from(seed))
}

/// Log-spectra of one simulated AR(2) series on `m/N`, `m = 0..=N/2`,
/// concatenated as `[true, direct, multitaper]`.
pub fn ar2_spectra(phi1: f64, phi2: f64, sigma2: f64, len: usize, tapers: usize, seed: u32) -> Result<Vec<f64>> {
    let truth = ar2_log_spectrum(phi1, phi2, sigma2, len)?;
    let spec = Ar2GroupSpec {
        phi1: Range::new(phi1, phi1),
        phi2: Range::new(phi2, phi2),
        sigma2: Range::new(sigma2, sigma2),
    };
    let epoch = gen_conditional_ar2(&spec, 1, len, None, &mut rng(seed))?.remove(0);
    let direct = direct_log_spectrum(&epoch)?;
    let mt = multitaper_log_spectrum(&epoch, tapers)?;
    let half = len / 2 + 1;
    Ok([&truth[..], direct.values(), mt.values()]
        .iter()
        .flat_map(|v| v[..half].iter().copied())
        .collect())
}

/// Closed-form MA(1) cepstrum `c_0..c_{L-1}` followed by the average
/// multitaper estimate over `reps` simulated series.
pub fn ma1_cepstra(theta: f64, sigma2: f64, len: usize, l: usize, reps: usize, seed: u32) -> Result<Vec<f64>> {
    if l < 1 || l > max_truncation(len) || reps == 0 {
        return Err(cepfda::Error::InvalidArgument(format!(
            "need 1 <= L <= {} and at least one replicate",
            max_truncation(len)
        )));
    }
    let mut out = analytic_ma1_cepstrum(theta, sigma2, l)?;
    let epochs = gen_conditional_ma1(sigma2, Range::new(theta, theta), reps, len, None, &mut rng(seed))?;
    let mut mean = vec![0.0; l];
    for e in &epochs {
        let c = cepstral_coefficients(&multitaper_log_spectrum(e, 7)?, l)?;
        for (m, x) in mean.iter_mut().zip(c.coefficients()) {
            *m += x / reps as f64;
        }
    }
    out.extend(mean);
    Ok(out)
}

/// A discriminant fitted to the three simulated AR(2) reference groups.
#[wasm_bindgen]
pub struct ThreeGroupFit {
    eigenvalues: Vec<f64>,
    weight_functions: Vec<f64>,
    scores: Vec<f64>,
    groups: Vec<u32>,
    correct: usize,
}

#[wasm_bindgen]
impl ThreeGroupFit {
    /// Number of discriminants Q.
    #[wasm_bindgen(getter)]
    pub fn q(&self) -> usize {
        self.eigenvalues.len()
    }

    #[wasm_bindgen(getter)]
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.clone()
    }

    /// `Q` rows of `grid` values, row-major.
    #[wasm_bindgen(getter, js_name = weightFunctions)]
    pub fn weight_functions(&self) -> Vec<f64> {
        self.weight_functions.clone()
    }

    /// One row of `Q` discriminant scores per training series.
    #[wasm_bindgen(getter)]
    pub fn scores(&self) -> Vec<f64> {
        self.scores.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn groups(&self) -> Vec<u32> {
        self.groups.clone()
    }

    /// Training series classified correctly by resubstitution.
    #[wasm_bindgen(getter)]
    pub fn correct(&self) -> usize {
        self.correct
    }
}

pub fn three_group_fit(
    per_group: usize,
    len: usize,
    l: usize,
    sigma2_hi: f64,
    grid: usize,
    seed: u32,
) -> Result<ThreeGroupFit> {
    let mut rng = rng(seed);
    let mut epochs: Vec<TimeSeriesEpoch> = Vec::new();
    for (g, spec) in reference_groups(Range::new(0.3, sigma2_hi)).iter().enumerate() {
        epochs.extend(gen_conditional_ar2(spec, per_group, len, Some(g), &mut rng)?);
    }
    let corpus = corpus_from_epochs(&epochs, &EstimatorConfig::new(Estimator::Multitaper { tapers: 7 }), l)?;
    let model = fit(&corpus, None)?;
    let q = model.discriminant_count();
    let mut weight_functions = Vec::with_capacity(q * grid);
    for k in 1..=q {
        weight_functions.extend(model.weight_function(k, grid)?);
    }
    let mut scores = Vec::with_capacity(q * corpus.len());
    let mut correct = 0;
    for v in corpus.vectors() {
        let r = model.classify(v)?;
        correct += usize::from(Some(r.predicted_group) == v.group);
        scores.extend(r.scores);
    }
    Ok(ThreeGroupFit {
        eigenvalues: model.eigenvalues().to_vec(),
        weight_functions,
        scores,
        groups: epochs.iter().map(|e| e.group.unwrap_or_default() as u32).collect(),
        correct,
    })
}

#[wasm_bindgen(js_name = ar2Spectra)]
pub fn ar2_spectra_js(
    phi1: f64,
    phi2: f64,
    sigma2: f64,
    len: usize,
    tapers: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    ar2_spectra(phi1, phi2, sigma2, len, tapers, seed).map_err(js)
}

#[wasm_bindgen(js_name = ma1Cepstra)]
pub fn ma1_cepstra_js(
    theta: f64,
    sigma2: f64,
    len: usize,
    l: usize,
    reps: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    ma1_cepstra(theta, sigma2, len, l, reps, seed).map_err(js)
}

#[wasm_bindgen(js_name = threeGroupFit)]
pub fn three_group_fit_js(
    per_group: usize,
    len: usize,
    l: usize,
    sigma2_hi: f64,
    grid: usize,
    seed: u32,
) -> std::result::Result<ThreeGroupFit, JsError> {
    three_group_fit(per_group, len, l, sigma2_hi, grid, seed).map_err(js)
}
