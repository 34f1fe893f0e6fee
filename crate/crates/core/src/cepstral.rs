//! Truncated cepstral coefficients of estimated log-spectra.
//!
//! For a log-spectrum `γ̂_m` on the full grid `λ_m = m/N`,
//!
//! ```text
//! ĉ_0 = N⁻¹ Σ_m γ̂_m,    ĉ_ℓ = N⁻¹ Σ_m γ̂_m √2 cos(2π λ_m ℓ),  ℓ ≥ 1.
//! ```

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{EstimatorConfig, LogSpectrumEstimate, TimeSeriesEpoch};

/// First `L` cepstral coefficients of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CepstralVector {
    coefficients: Vec<f64>,
    source_len: usize,
    pub group: Option<usize>,
}

impl CepstralVector {
    pub fn new(coefficients: Vec<f64>, source_len: usize, group: Option<usize>) -> Result<Self> {
        let l = coefficients.len();
        if l < 1 || l > max_truncation(source_len) {
            return Err(Error::invalid(format!(
                "truncation {l} outside 1..={} for series length {source_len}",
                max_truncation(source_len)
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("cepstral coefficients must be finite"));
        }
        Ok(Self {
            coefficients,
            source_len,
            group,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Truncation level `L`.
    pub fn truncation(&self) -> usize {
        self.coefficients.len()
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// Keeps the first `l` coefficients.
    pub fn truncated(&self, l: usize) -> Result<Self> {
        if l < 1 || l > self.truncation() {
            return Err(Error::invalid(format!(
                "cannot truncate {} coefficients to {l}",
                self.truncation()
            )));
        }
        Ok(Self {
            coefficients: self.coefficients[..l].to_vec(),
            source_len: self.source_len,
            group: self.group,
        })
    }
}

/// Largest admissible truncation `⌊N/2⌋ + 1`.
pub fn max_truncation(len: usize) -> usize {
    len / 2 + 1
}

/// Cosine-series coefficients of raw log-spectrum values on the full grid.
pub fn cepstrum_of_values(log_spectrum: &[f64], l: usize) -> Result<Vec<f64>> {
    let n = log_spectrum.len();
    if n == 0 || l < 1 || l > max_truncation(n) {
        return Err(Error::invalid(format!(
            "truncation {l} outside 1..={} for grid size {n}",
            max_truncation(n)
        )));
    }
    let inv_n = 1.0 / n as f64;
    let cos_table: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
    let mut out = Vec::with_capacity(l);
    out.push(log_spectrum.iter().sum::<f64>() * inv_n);
    for ell in 1..l {
        let s: f64 = log_spectrum
            .iter()
            .enumerate()
            .map(|(m, g)| g * cos_table[(m * ell) % n])
            .sum();
        out.push(SQRT_2 * s * inv_n);
    }
    Ok(out)
}

/// Cepstral coefficients `ĉ_0..ĉ_{L-1}` of an estimated log-spectrum.
pub fn cepstral_coefficients(spec: &LogSpectrumEstimate, l: usize) -> Result<CepstralVector> {
    let coefficients = cepstrum_of_values(spec.values(), l)?;
    CepstralVector::new(coefficients, spec.len(), None)
}

/// Labeled cepstra with every group `0..J` present at least twice.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCepstralCorpus {
    vectors: Vec<CepstralVector>,
    counts: Vec<usize>,
}

impl LabeledCepstralCorpus {
    pub fn new(vectors: Vec<CepstralVector>) -> Result<Self> {
        let first = vectors.first().ok_or_else(|| Error::invalid("corpus is empty"))?;
        let l = first.truncation();
        let mut counts: Vec<usize> = Vec::new();
        for (i, v) in vectors.iter().enumerate() {
            if v.truncation() != l {
                return Err(Error::invalid(format!(
                    "vector {i} has L={}, expected {l}",
                    v.truncation()
                )));
            }
            let g = v
                .group
                .ok_or_else(|| Error::invalid(format!("vector {i} is unlabeled")))?;
            if g >= counts.len() {
                counts.resize(g + 1, 0);
            }
            counts[g] += 1;
        }
        if counts.len() < 2 {
            return Err(Error::invalid("corpus needs at least two groups"));
        }
        if let Some((g, &c)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(Error::invalid(format!(
                "group {g} has {c} members; every group needs at least 2"
            )));
        }
        Ok(Self { vectors, counts })
    }

    pub fn vectors(&self) -> &[CepstralVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of groups `J`.
    pub fn group_count(&self) -> usize {
        self.counts.len()
    }

    /// `n_j` per group.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn truncation(&self) -> usize {
        self.vectors[0].truncation()
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.vectors[i].group.expect("corpus vectors are labeled")
    }

    pub fn truncated(&self, l: usize) -> Result<Self> {
        let vectors = self
            .vectors
            .iter()
            .map(|v| v.truncated(l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            vectors,
            counts: self.counts.clone(),
        })
    }
}

/// Shared length of a nonempty set of epochs.
pub(crate) fn common_len(epochs: &[TimeSeriesEpoch]) -> Result<usize> {
    let first = epochs.first().ok_or_else(|| Error::invalid("no epochs supplied"))?;
    let n = first.len();
    if let Some(e) = epochs.iter().find(|e| e.len() != n) {
        return Err(Error::invalid(format!(
            "epoch '{}' has length {}, expected {n}",
            e.id,
            e.len()
        )));
    }
    Ok(n)
}

/// Cepstra of arbitrary epochs (labels carried over when present), in input
/// order.
pub fn cepstra_from_epochs(
    epochs: &[TimeSeriesEpoch],
    config: &EstimatorConfig,
    l: usize,
) -> Result<Vec<CepstralVector>> {
    let n = common_len(epochs)?;
    if l < 1 || l > max_truncation(n) {
        return Err(Error::invalid(format!(
            "truncation {l} outside 1..={}",
            max_truncation(n)
        )));
    }
    par::map(epochs, |e| {
        let spec = config.estimate(e)?;
        let mut v = cepstral_coefficients(&spec, l)?;
        v.group = e.group;
        Ok(v)
    })
    .into_iter()
    .collect()
}

/// Estimates a log-spectrum and `L` cepstral coefficients for every labeled
/// epoch.
pub fn corpus_from_epochs(
    epochs: &[TimeSeriesEpoch],
    config: &EstimatorConfig,
    l: usize,
) -> Result<LabeledCepstralCorpus> {
    if let Some(e) = epochs.iter().find(|e| e.group.is_none()) {
        return Err(Error::invalid(format!("epoch '{}' is unlabeled", e.id)));
    }
    LabeledCepstralCorpus::new(cepstra_from_epochs(epochs, config, l)?)
}
