//! Fisher's discriminant analysis of truncated cepstra.
//!
//! Weights `ŷ_q` are the ordered generalized eigenvectors of the between
//! matrix `Λ̂` relative to the pooled within matrix `Γ̂`, i.e. eigenvectors of
//! `Γ̂⁻¹Λ̂`. They are computed by symmetric reduction: with `Γ̂ = CCᵀ`, the
//! eigenvectors `v` of `C⁻¹Λ̂C⁻ᵀ` map back to `ŷ = C⁻ᵀv`, which satisfy
//! `ŷᵀΓ̂ŷ = 1` and are mutually `Γ̂`-orthogonal.
//!
//! A new cepstrum `ĉ` is assigned to
//!
//! ```text
//! argmin_j  Σ_q ((ĉ - â_j)ᵀ ŷ_q)² - 2 log π̂_j
//! ```

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cepstral::{cepstra_from_epochs, common_len, max_truncation, CepstralVector, LabeledCepstralCorpus};
use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{EstimatorConfig, TimeSeriesEpoch};

/// Relative eigenvalue threshold for counting discriminants and for
/// rejecting a singular `Γ̂`.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Discriminant eigenvalues below this are treated as zero regardless of
/// `τ̂_1`.
const ABSOLUTE_EIGEN_FLOOR: f64 = 1e-14;

/// A fitted cepstral discriminant model. Group indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantModel {
    truncation: usize,
    priors: Vec<f64>,
    group_means: Vec<Vec<f64>>,
    pooled_within: Vec<Vec<f64>>,
    between: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    group_mean_scores: Vec<Vec<f64>>,
}

/// Outcome of classifying one cepstral vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub predicted_group: usize,
    /// `Σ_q (d̂_q - μ̂_{jq})² - 2 log π̂_j` for every group.
    pub objectives: Vec<f64>,
    pub scores: Vec<f64>,
    /// Another group attained exactly the same minimum objective.
    pub tie: bool,
    /// The model has no discriminants; the decision used priors alone.
    pub priors_only: bool,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate_priors(priors: &[f64], groups: usize) -> Result<Vec<f64>> {
    if priors.len() != groups {
        return Err(Error::invalid(format!(
            "{} priors given for {groups} groups",
            priors.len()
        )));
    }
    if priors.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::invalid("priors must be positive and finite"));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("priors sum to {total}, expected 1")));
    }
    Ok(priors.to_vec())
}

/// Fits the discriminant model. Priors default to the sample proportions
/// `n_j / n`.
pub fn fit(corpus: &LabeledCepstralCorpus, priors: Option<&[f64]>) -> Result<DiscriminantModel> {
    let l = corpus.truncation();
    let groups = corpus.group_count();
    let counts = corpus.counts();
    let n = corpus.len() as f64;
    let priors = match priors {
        Some(p) => validate_priors(p, groups)?,
        None => counts.iter().map(|&c| c as f64 / n).collect(),
    };

    let mut means = vec![DVector::<f64>::zeros(l); groups];
    for (i, v) in corpus.vectors().iter().enumerate() {
        means[corpus.group_of(i)] += DVector::from_column_slice(v.coefficients());
    }
    for (m, &c) in means.iter_mut().zip(counts) {
        *m /= c as f64;
    }

    let mut within_by_group = vec![DMatrix::<f64>::zeros(l, l); groups];
    for (i, v) in corpus.vectors().iter().enumerate() {
        let g = corpus.group_of(i);
        let dev = DVector::from_column_slice(v.coefficients()) - &means[g];
        within_by_group[g] += &dev * dev.transpose();
    }
    let mut within = DMatrix::<f64>::zeros(l, l);
    for ((w, &c), &p) in within_by_group.iter().zip(counts).zip(&priors) {
        within += w * (p / (c as f64 - 1.0));
    }

    let overall = means
        .iter()
        .zip(&priors)
        .fold(DVector::<f64>::zeros(l), |acc, (m, &p)| acc + m * p);
    let mut between = DMatrix::<f64>::zeros(l, l);
    for (m, &p) in means.iter().zip(&priors) {
        let dev = m - &overall;
        between += (&dev * dev.transpose()) * p;
    }

    let (weights, eigenvalues) = generalized_eigen(&within, &between, groups - 1)?;

    let group_means: Vec<Vec<f64>> = means.iter().map(|m| m.iter().copied().collect()).collect();
    let group_mean_scores = group_means
        .iter()
        .map(|a| weights.iter().map(|y| dot(y, a)).collect())
        .collect();

    Ok(DiscriminantModel {
        truncation: l,
        priors,
        group_means,
        pooled_within: to_rows(&within),
        between: to_rows(&between),
        weights,
        eigenvalues,
        group_mean_scores,
    })
}

/// Solves `Λ y = τ Γ y` by Cholesky reduction, returning up to `max_rank`
/// `Γ`-orthonormal eigenvectors with eigenvalues above the rank threshold.
fn generalized_eigen(
    within: &DMatrix<f64>,
    between: &DMatrix<f64>,
    max_rank: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let spectrum = SymmetricEigen::new(within.clone()).eigenvalues;
    let largest = spectrum.max();
    let smallest = spectrum.min();
    if !(largest > 0.0) || smallest <= RANK_TOLERANCE * largest {
        return Err(Error::IllConditioned {
            ratio: if largest > 0.0 { smallest / largest } else { 0.0 },
            smallest,
            largest,
        });
    }
    let chol = within.clone().cholesky().ok_or(Error::IllConditioned {
        ratio: smallest / largest,
        smallest,
        largest,
    })?;
    let lower = chol.l();
    // C⁻¹ Λ C⁻ᵀ = C⁻¹ (C⁻¹ Λ)ᵀ for symmetric Λ.
    let half = lower
        .solve_lower_triangular(between)
        .expect("Cholesky factor has a positive diagonal");
    let reduced = lower
        .solve_lower_triangular(&half.transpose())
        .expect("Cholesky factor has a positive diagonal");
    let reduced = (&reduced + reduced.transpose()) * 0.5;

    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
    let threshold = (RANK_TOLERANCE * top).max(ABSOLUTE_EIGEN_FLOOR);
    let mut weights = Vec::new();
    let mut eigenvalues = Vec::new();
    for &i in order.iter().take(max_rank) {
        let tau = eig.eigenvalues[i];
        if tau <= threshold {
            break;
        }
        let v = eig.eigenvectors.column(i).into_owned();
        let mut y = lower
            .tr_solve_lower_triangular(&v)
            .expect("Cholesky factor has a positive diagonal");
        let norm = (y.transpose() * within * &y)[(0, 0)].sqrt();
        y /= norm;
        let pivot = y
            .iter()
            .enumerate()
            .fold(0, |best, (k, val)| if val.abs() > y[best].abs() { k } else { best });
        if y[pivot] < 0.0 {
            y = -y;
        }
        weights.push(y.iter().copied().collect());
        eigenvalues.push(tau);
    }
    Ok((weights, eigenvalues))
}

impl DiscriminantModel {
    /// Truncation level `L`.
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn group_count(&self) -> usize {
        self.priors.len()
    }

    /// Number of discriminants `Q`.
    pub fn discriminant_count(&self) -> usize {
        self.weights.len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn group_means(&self) -> &[Vec<f64>] {
        &self.group_means
    }

    pub fn pooled_within(&self) -> &[Vec<f64>] {
        &self.pooled_within
    }

    pub fn between(&self) -> &[Vec<f64>] {
        &self.between
    }

    /// Cepstral weight vectors `ŷ_1..ŷ_Q`.
    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `μ̂_{jq} = ŷ_qᵀ â_j`, indexed `[j][q]`.
    pub fn group_mean_scores(&self) -> &[Vec<f64>] {
        &self.group_mean_scores
    }

    pub fn pooled_within_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.pooled_within)
    }

    pub fn between_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.between)
    }

    /// `ŷ_qᵀ Γ̂ ŷ_r`.
    pub fn within_inner(&self, q: usize, r: usize) -> f64 {
        let g = self.pooled_within_matrix();
        let a = DVector::from_column_slice(&self.weights[q]);
        let b = DVector::from_column_slice(&self.weights[r]);
        (a.transpose() * g * b)[(0, 0)]
    }

    /// Checks that every stored array agrees with `L`, `J` and `Q`. Used on
    /// models that did not come out of [`fit`].
    pub fn check_consistency(&self) -> Result<()> {
        let (l, j, q) = (self.truncation, self.priors.len(), self.weights.len());
        let bad = |what: &str| {
            Err(Error::Schema(format!(
                "model {what} inconsistent with L={l}, J={j}, Q={q}"
            )))
        };
        if l == 0 || j < 2 || q > j - 1 || q > l {
            return bad("dimensions");
        }
        validate_priors(&self.priors, j).map_err(|e| Error::Schema(e.to_string()))?;
        let square = |m: &[Vec<f64>]| m.len() == l && m.iter().all(|r| r.len() == l);
        if self.group_means.len() != j || self.group_means.iter().any(|r| r.len() != l) {
            return bad("group means");
        }
        if !square(&self.pooled_within) || !square(&self.between) {
            return bad("covariance matrices");
        }
        if self.weights.iter().any(|r| r.len() != l) || self.eigenvalues.len() != q {
            return bad("weights");
        }
        if self.group_mean_scores.len() != j || self.group_mean_scores.iter().any(|r| r.len() != q) {
            return bad("group mean scores");
        }
        let finite = self
            .group_means
            .iter()
            .chain(&self.pooled_within)
            .chain(&self.between)
            .chain(&self.weights)
            .chain(&self.group_mean_scores)
            .flatten()
            .chain(&self.eigenvalues)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Schema("model contains non-finite values".into()));
        }
        Ok(())
    }

    fn check_dimension(&self, vector: &CepstralVector) -> Result<()> {
        if vector.truncation() != self.truncation {
            return Err(Error::invalid(format!(
                "vector has L={}, model expects L={}",
                vector.truncation(),
                self.truncation
            )));
        }
        Ok(())
    }

    /// Discriminant scores `d̂_q = ŷ_qᵀ ĉ`.
    pub fn scores(&self, vector: &CepstralVector) -> Result<Vec<f64>> {
        self.check_dimension(vector)?;
        Ok(self.weights.iter().map(|y| dot(y, vector.coefficients())).collect())
    }

    /// Log-spectral weight function `ξ̂_q(λ_g)` on `λ_g = g/G`; `q` is
    /// one-based.
    pub fn weight_function(&self, q: usize, grid: usize) -> Result<Vec<f64>> {
        if q < 1 || q > self.discriminant_count() {
            return Err(Error::invalid(format!(
                "discriminant {q} outside 1..={}",
                self.discriminant_count()
            )));
        }
        if grid == 0 {
            return Err(Error::invalid("grid size must be positive"));
        }
        Ok(weight_function_values(&self.weights[q - 1], grid))
    }

    pub fn classify(&self, vector: &CepstralVector) -> Result<ClassificationResult> {
        let scores = self.scores(vector)?;
        let objectives: Vec<f64> = self
            .group_mean_scores
            .iter()
            .zip(&self.priors)
            .map(|(mu, &p)| {
                let quad: f64 = scores.iter().zip(mu).map(|(d, m)| (d - m).powi(2)).sum();
                quad - 2.0 * p.ln()
            })
            .collect();
        let predicted_group = objectives
            .iter()
            .enumerate()
            .fold(0, |best, (j, &o)| if o < objectives[best] { j } else { best });
        let tie = objectives
            .iter()
            .enumerate()
            .any(|(j, &o)| j != predicted_group && o == objectives[predicted_group]);
        Ok(ClassificationResult {
            predicted_group,
            objectives,
            scores,
            tie,
            priors_only: self.weights.is_empty(),
        })
    }
}

/// `ξ(λ) = y_0 + Σ_{ℓ≥1} y_ℓ √2 cos(2πλℓ)` on the grid `g/G`.
pub fn weight_function_values(weights: &[f64], grid: usize) -> Vec<f64> {
    (0..grid)
        .map(|g| {
            let lam = g as f64 / grid as f64;
            weights.first().copied().unwrap_or(0.0)
                + weights
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(ell, y)| y * SQRT_2 * (2.0 * PI * lam * ell as f64).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Leave-one-out misclassification counts per candidate truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCurve {
    pub candidates: Vec<usize>,
    /// `None` where some held-out fit failed numerically.
    pub errors: Vec<Option<usize>>,
    pub selected: usize,
}

/// Selects `L` by leave-one-out cross-validation after estimating cepstra
/// once at the largest candidate.
pub fn select_l_cv(epochs: &[TimeSeriesEpoch], config: &EstimatorConfig, candidates: &[usize]) -> Result<CvCurve> {
    let n = common_len(epochs)?;
    let top = candidates
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::invalid("no candidate truncations"))?;
    if top > max_truncation(n) {
        return Err(Error::invalid(format!(
            "candidate L={top} exceeds {} for series length {n}",
            max_truncation(n)
        )));
    }
    if let Some(e) = epochs.iter().find(|e| e.group.is_none()) {
        return Err(Error::invalid(format!("epoch '{}' is unlabeled", e.id)));
    }
    let vectors = cepstra_from_epochs(epochs, config, top)?;
    select_l_cv_cepstra(&LabeledCepstralCorpus::new(vectors)?, candidates)
}

/// Leave-one-out selection of `L` on precomputed cepstra truncated at (at
/// least) the largest candidate. Ties go to the smaller `L`.
pub fn select_l_cv_cepstra(corpus: &LabeledCepstralCorpus, candidates: &[usize]) -> Result<CvCurve> {
    let n = corpus.len();
    let groups = corpus.group_count();
    if let Some((g, &c)) = corpus.counts().iter().enumerate().find(|(_, &c)| c < 3) {
        return Err(Error::invalid(format!(
            "group {g} has {c} members; leave-one-out needs at least 3"
        )));
    }
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate truncations"));
    }
    let limit = corpus
        .truncation()
        .min(max_truncation(corpus.vectors()[0].source_len()))
        .min(n.saturating_sub(groups + 1));
    if let Some(&bad) = candidates.iter().find(|&&l| l < 1 || l > limit) {
        return Err(Error::invalid(format!(
            "candidate L={bad} outside 1..={limit} (n={n}, J={groups})"
        )));
    }

    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..n).map(move |i| (c, i)))
        .collect();
    let outcomes = par::map(&jobs, |&(c, i)| {
        held_out_prediction(corpus, candidates[c], i).map(|g| g == corpus.group_of(i))
    });

    let mut errors = vec![Some(0usize); candidates.len()];
    for (&(c, _), outcome) in jobs.iter().zip(outcomes) {
        errors[c] = match (errors[c], outcome) {
            (Some(e), Some(correct)) => Some(e + usize::from(!correct)),
            _ => None,
        };
    }
    let mut best: Option<(usize, usize)> = None;
    for (&l, e) in candidates.iter().zip(&errors) {
        if let Some(e) = *e {
            let better = match best {
                None => true,
                Some((be, bl)) => e < be || (e == be && l < bl),
            };
            if better {
                best = Some((e, l));
            }
        }
    }
    let (_, selected) =
        best.ok_or_else(|| Error::invalid("every candidate truncation produced a singular held-out fit"))?;
    Ok(CvCurve {
        candidates: candidates.to_vec(),
        errors,
        selected,
    })
}

/// Leave-one-out predictions at truncation `l`: entry `i` is the group
/// assigned to vector `i` by the model fitted without it, `None` where that
/// fit failed numerically.
pub fn loo_predictions(corpus: &LabeledCepstralCorpus, l: usize) -> Result<Vec<Option<usize>>> {
    if let Some((g, &c)) = corpus.counts().iter().enumerate().find(|(_, &c)| c < 3) {
        return Err(Error::invalid(format!(
            "group {g} has {c} members; leave-one-out needs at least 3"
        )));
    }
    if l < 1 || l > corpus.truncation() {
        return Err(Error::invalid(format!("L={l} outside 1..={}", corpus.truncation())));
    }
    let idx: Vec<usize> = (0..corpus.len()).collect();
    Ok(par::map(&idx, |&i| held_out_prediction(corpus, l, i)))
}

/// Fits without vector `held_out` at truncation `l` and classifies it;
/// `None` on a numerical failure.
fn held_out_prediction(corpus: &LabeledCepstralCorpus, l: usize, held_out: usize) -> Option<usize> {
    let training: Vec<CepstralVector> = corpus
        .vectors()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != held_out)
        .map(|(_, v)| v.truncated(l))
        .collect::<Result<_>>()
        .ok()?;
    let model = fit(&LabeledCepstralCorpus::new(training).ok()?, None).ok()?;
    let test = corpus.vectors()[held_out].truncated(l).ok()?;
    Some(model.classify(&test).ok()?.predicted_group)
}
