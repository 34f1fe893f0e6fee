//! Nearest-template classifiers built on spectral information measures.
//!
//! Each series is summarized by its GCV-smoothed first tapered periodogram.
//! A group template is the arithmetic mean of its members' smoothed
//! periodograms, and a test series goes to the template at the smallest
//! disparity. Both disparities are averaged over the nonredundant grid
//! `m = 0..⌊N/2⌋`:
//!
//! ```text
//! KL:        J(f;g)   = mean{ f/g - log(f/g) - 1 }
//! Chernoff:  B_α(f;g) = mean{ log(α f/g + 1 - α) - α log(f/g) }
//! ```

use serde::{Deserialize, Serialize};

use crate::cepstral::common_len;
use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{smoothed_periodogram, PeriodogramScale, Span, TimeSeriesEpoch};

/// Default Chernoff tuning grid `0.1, 0.2, ..., 0.9`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// Positive spectrum estimate on the full Fourier grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    values: Vec<f64>,
}

fn check_positive(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("spectrum is empty"));
    }
    if let Some(m) = values.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!("spectrum value at bin {m} is not positive")));
    }
    Ok(())
}

impl SpectrumEstimate {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_positive(&values)?;
        Ok(Self { values })
    }

    /// GCV-smoothed first tapered periodogram of `epoch`.
    pub fn smoothed(epoch: &TimeSeriesEpoch) -> Result<Self> {
        Self::smoothed_with_span(epoch, Span::Auto)
    }

    pub fn smoothed_with_span(epoch: &TimeSeriesEpoch, span: Span) -> Result<Self> {
        let (values, _) = smoothed_periodogram(epoch.values(), span, PeriodogramScale::Orthonormal)?;
        if let Some(bin) = values.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::DegenerateSpectrum { bin });
        }
        Self::new(values)
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

    /// Multiplies every ordinate by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * c).collect())
    }
}

/// Pointwise mean of a group's smoothed spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpectrumTemplate {
    pub group: usize,
    values: Vec<f64>,
}

impl GroupSpectrumTemplate {
    pub fn new(group: usize, values: Vec<f64>) -> Result<Self> {
        check_positive(&values)?;
        Ok(Self { group, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.group, self.values.iter().map(|v| v * c).collect())
    }
}

/// Builds one template per group `0..J` from labeled spectra.
pub fn group_templates(spectra: &[SpectrumEstimate], labels: &[usize]) -> Result<Vec<GroupSpectrumTemplate>> {
    if spectra.len() != labels.len() || spectra.is_empty() {
        return Err(Error::invalid("need one label per spectrum and at least one spectrum"));
    }
    let len = spectra[0].len();
    if spectra.iter().any(|s| s.len() != len) {
        return Err(Error::invalid("spectra have different grid sizes"));
    }
    let groups = labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![vec![0.0; len]; groups];
    let mut counts = vec![0usize; groups];
    for (s, &g) in spectra.iter().zip(labels) {
        counts[g] += 1;
        for (a, v) in sums[g].iter_mut().zip(s.values()) {
            *a += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .enumerate()
        .map(|(g, (sum, c))| {
            if c == 0 {
                return Err(Error::invalid(format!("group {g} has no training spectra")));
            }
            GroupSpectrumTemplate::new(g, sum.into_iter().map(|v| v / c as f64).collect())
        })
        .collect()
}

fn half_grid<'a>(f: &'a [f64], g: &'a [f64]) -> Result<impl Iterator<Item = f64> + 'a> {
    if f.len() != g.len() {
        return Err(Error::invalid(format!("grid mismatch: {} vs {}", f.len(), g.len())));
    }
    let m = f.len() / 2 + 1;
    Ok(f[..m].iter().zip(&g[..m]).map(|(a, b)| a / b))
}

/// Kullback-Leibler spectral disparity `J(f;g)`.
pub fn kl_measure(f: &SpectrumEstimate, g: &GroupSpectrumTemplate) -> Result<f64> {
    kl_values(f.values(), g.values())
}

fn kl_values(f: &[f64], g: &[f64]) -> Result<f64> {
    let m = (f.len() / 2 + 1) as f64;
    Ok(half_grid(f, g)?.map(|r| r - r.ln() - 1.0).sum::<f64>() / m)
}

/// Chernoff spectral disparity `B_α(f;g)`, `0 < α < 1`.
pub fn chernoff_measure(f: &SpectrumEstimate, g: &GroupSpectrumTemplate, alpha: f64) -> Result<f64> {
    chernoff_values(f.values(), g.values(), alpha)
}

fn chernoff_values(f: &[f64], g: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("Chernoff alpha {alpha} outside (0, 1)")));
    }
    let m = (f.len() / 2 + 1) as f64;
    Ok(half_grid(f, g)?
        .map(|r| (alpha * (r - 1.0)).ln_1p() - alpha * r.ln())
        .sum::<f64>()
        / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "measure")]
pub enum Measure {
    Kl,
    Chernoff { alpha: f64 },
}

impl Measure {
    fn evaluate(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        match *self {
            Measure::Kl => kl_values(f, g),
            Measure::Chernoff { alpha } => chernoff_values(f, g, alpha),
        }
    }
}

/// Group of the template nearest to `test`; ties go to the smaller group.
pub fn classify_information(
    test: &SpectrumEstimate,
    templates: &[GroupSpectrumTemplate],
    measure: Measure,
) -> Result<usize> {
    nearest(test.values(), templates.iter().map(|t| (t.group, t.values())), measure)
}

fn nearest<'a>(test: &[f64], templates: impl Iterator<Item = (usize, &'a [f64])>, measure: Measure) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (group, values) in templates {
        let d = measure.evaluate(test, values)?;
        best = match best {
            Some((bd, bg)) if bd < d || (bd == d && bg < group) => Some((bd, bg)),
            _ => Some((d, group)),
        };
    }
    best.map(|(_, g)| g)
        .ok_or_else(|| Error::invalid("no templates supplied"))
}

/// Leave-one-out error counts of the Chernoff classifier per `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaTuning {
    pub alphas: Vec<f64>,
    pub errors: Vec<usize>,
    pub selected: f64,
}

/// Tunes the Chernoff `α` by leave-one-out cross-validation on smoothed
/// spectra of labeled epochs.
pub fn tune_chernoff_alpha(epochs: &[TimeSeriesEpoch], grid: &[f64]) -> Result<AlphaTuning> {
    common_len(epochs)?;
    let labels = epochs
        .iter()
        .map(|e| {
            e.group
                .ok_or_else(|| Error::invalid(format!("epoch '{}' is unlabeled", e.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let spectra = par::map(epochs, SpectrumEstimate::smoothed)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    tune_chernoff_alpha_spectra(&spectra, &labels, grid)
}

/// As [`tune_chernoff_alpha`] on precomputed spectra. The held-out series is
/// removed from its group's template; minimizers are resolved toward
/// `α = 0.5`, then toward the smaller `α`.
pub fn tune_chernoff_alpha_spectra(
    spectra: &[SpectrumEstimate],
    labels: &[usize],
    grid: &[f64],
) -> Result<AlphaTuning> {
    if grid.is_empty() {
        return Err(Error::invalid("empty alpha grid"));
    }
    if let Some(a) = grid.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::invalid(format!("alpha {a} outside (0, 1)")));
    }
    let templates = group_templates(spectra, labels)?;
    let mut counts = vec![0usize; templates.len()];
    for &g in labels {
        counts[g] += 1;
    }
    if let Some(g) = counts.iter().position(|&c| c < 2) {
        return Err(Error::invalid(format!(
            "group {g} needs at least two series for leave-one-out tuning"
        )));
    }

    let indices: Vec<usize> = (0..spectra.len()).collect();
    let per_series: Vec<Result<Vec<bool>>> = par::map(&indices, |&i| {
        let own = labels[i];
        let nj = counts[own] as f64;
        let reduced: Vec<f64> = templates[own]
            .values()
            .iter()
            .zip(spectra[i].values())
            .map(|(t, f)| ((nj * t - f) / (nj - 1.0)).max(f64::MIN_POSITIVE))
            .collect();
        grid.iter()
            .map(|&alpha| {
                let candidates = templates.iter().map(|t| {
                    if t.group == own {
                        (t.group, reduced.as_slice())
                    } else {
                        (t.group, t.values())
                    }
                });
                let predicted = nearest(spectra[i].values(), candidates, Measure::Chernoff { alpha })?;
                Ok(predicted != own)
            })
            .collect()
    });

    let mut errors = vec![0usize; grid.len()];
    for wrong in per_series {
        for (e, w) in errors.iter_mut().zip(wrong?) {
            *e += usize::from(w);
        }
    }
    let best = errors.iter().copied().min().unwrap_or(0);
    let selected = grid
        .iter()
        .zip(&errors)
        .filter(|&(_, &e)| e == best)
        .map(|(&a, _)| a)
        .min_by(|a, b| {
            let (da, db) = ((a - 0.5).abs(), (b - 0.5).abs());
            if (da - db).abs() <= 1e-12 {
                a.total_cmp(b)
            } else {
                da.total_cmp(&db)
            }
        })
        .expect("grid is nonempty");
    Ok(AlphaTuning {
        alphas: grid.to_vec(),
        errors,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn flat(v: f64, n: usize) -> SpectrumEstimate {
        SpectrumEstimate::new(vec![v; n]).unwrap()
    }

    fn template(g: usize, v: f64, n: usize) -> GroupSpectrumTemplate {
        GroupSpectrumTemplate::new(g, vec![v; n]).unwrap()
    }

    #[test]
    fn kl_constant_pairs() {
        assert_eq!(kl_measure(&flat(2.0, 16), &template(0, 2.0, 16)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            kl_measure(&flat(2.0, 16), &template(0, 1.0, 16)).unwrap(),
            1.0 - 2f64.ln(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            kl_measure(&flat(1.0, 16), &template(0, 2.0, 16)).unwrap(),
            2f64.ln() - 0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn chernoff_constant_pairs() {
        for a in [0.1, 0.5, 0.9] {
            assert_eq!(chernoff_measure(&flat(3.0, 8), &template(0, 3.0, 8), a).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(
            chernoff_measure(&flat(2.0, 8), &template(0, 1.0, 8), 0.5).unwrap(),
            1.5f64.ln() - 0.5 * 2f64.ln(),
            epsilon = 1e-14
        );
        assert!(chernoff_measure(&flat(2.0, 8), &template(0, 1.0, 8), 1e-6).unwrap() < 1e-4);
        assert!(chernoff_measure(&flat(2.0, 8), &template(0, 1.0, 8), 0.0).is_err());
        assert!(chernoff_measure(&flat(2.0, 8), &template(0, 1.0, 8), 1.0).is_err());
    }

    #[test]
    fn measures_use_the_half_grid() {
        // Bins above N/2 are ignored.
        let f = SpectrumEstimate::new(vec![1.0, 1.0, 1.0, 9.0]).unwrap();
        assert_eq!(kl_measure(&f, &template(0, 1.0, 4)).unwrap(), 0.0);
    }

    #[test]
    fn nonpositive_and_mismatched_inputs() {
        assert!(SpectrumEstimate::new(vec![1.0, 0.0]).is_err());
        assert!(GroupSpectrumTemplate::new(0, vec![-1.0]).is_err());
        assert!(kl_measure(&flat(1.0, 8), &template(0, 1.0, 6)).is_err());
        assert!(classify_information(&flat(1.0, 8), &[template(0, 1.0, 6)], Measure::Kl).is_err());
    }

    #[test]
    fn classify_constant_templates() {
        let t = [template(0, 1.0, 16), template(1, 4.0, 16)];
        assert_eq!(classify_information(&flat(1.0, 16), &t, Measure::Kl).unwrap(), 0);
        assert_eq!(classify_information(&flat(4.0, 16), &t, Measure::Kl).unwrap(), 1);
        // f/g = 0.5 against the template at 4 costs 0.193, f/g = 2 against
        // the template at 1 costs 0.307.
        assert_eq!(classify_information(&flat(2.0, 16), &t, Measure::Kl).unwrap(), 1);
    }

    #[test]
    fn classify_three_templates_chernoff() {
        let t = [template(0, 1.0, 10), template(1, 3.0, 10), template(2, 9.0, 10)];
        let test = flat(3.5, 10);
        let measure = Measure::Chernoff { alpha: 0.5 };
        let brute: Vec<f64> = t.iter().map(|g| chernoff_measure(&test, g, 0.5).unwrap()).collect();
        let argmin = (0..3).min_by(|&a, &b| brute[a].total_cmp(&brute[b])).unwrap();
        assert_eq!(argmin, 1);
        assert_eq!(classify_information(&test, &t, measure).unwrap(), argmin);
    }

    #[test]
    fn ties_go_to_smaller_group() {
        let t = [template(0, 2.0, 8), template(1, 2.0, 8)];
        assert_eq!(classify_information(&flat(5.0, 8), &t, Measure::Kl).unwrap(), 0);
    }

    #[test]
    fn templates_are_arithmetic_means() {
        let s = vec![flat(1.0, 4), flat(3.0, 4), flat(10.0, 4), flat(20.0, 4)];
        let t = group_templates(&s, &[0, 0, 1, 1]).unwrap();
        assert_eq!(t[0].values(), &[2.0; 4]);
        assert_eq!(t[1].values(), &[15.0; 4]);
        assert!(group_templates(&s, &[0, 0, 2, 2]).is_err());
    }

    #[test]
    fn alpha_tuning_ties_and_singletons() {
        let s: Vec<SpectrumEstimate> = [1.0, 1.1, 0.9, 50.0, 55.0, 45.0].iter().map(|&v| flat(v, 16)).collect();
        let labels = [0, 0, 0, 1, 1, 1];
        let tuned = tune_chernoff_alpha_spectra(&s, &labels, &default_alpha_grid()).unwrap();
        assert!(tuned.errors.iter().all(|&e| e == 0));
        assert_eq!(tuned.selected, 0.5);
        let single = tune_chernoff_alpha_spectra(&s, &labels, &[0.3]).unwrap();
        assert_eq!(single.selected, 0.3);
        assert!(tune_chernoff_alpha_spectra(&s, &labels, &[1.2]).is_err());
        assert!(tune_chernoff_alpha_spectra(&s, &labels, &[]).is_err());
    }

    #[test]
    fn alpha_tie_break_prefers_half_then_smaller() {
        let s: Vec<SpectrumEstimate> = [1.0, 1.1, 0.9, 50.0, 55.0, 45.0].iter().map(|&v| flat(v, 16)).collect();
        let tuned = tune_chernoff_alpha_spectra(&s, &[0, 0, 0, 1, 1, 1], &[0.7, 0.3, 0.9]).unwrap();
        assert_eq!(tuned.selected, 0.3);
    }

    proptest! {
        #[test]
        fn measures_nonnegative(
            f in prop::collection::vec(0.01f64..100.0, 12),
            g in prop::collection::vec(0.01f64..100.0, 12),
            alpha in 0.01f64..0.99,
        ) {
            let fs = SpectrumEstimate::new(f.clone()).unwrap();
            let gt = GroupSpectrumTemplate::new(0, g).unwrap();
            prop_assert!(kl_measure(&fs, &gt).unwrap() >= -1e-15);
            prop_assert!(chernoff_measure(&fs, &gt, alpha).unwrap() >= -1e-15);
            let same = GroupSpectrumTemplate::new(0, f).unwrap();
            prop_assert_eq!(kl_measure(&fs, &same).unwrap(), 0.0);
            prop_assert_eq!(chernoff_measure(&fs, &same, alpha).unwrap(), 0.0);
        }

        #[test]
        fn classification_is_scale_invariant(
            f in prop::collection::vec(0.1f64..10.0, 10),
            t0 in prop::collection::vec(0.1f64..10.0, 10),
            t1 in prop::collection::vec(0.1f64..10.0, 10),
            c in prop::sample::select(vec![0.25, 0.5, 2.0, 4.0, 8.0]),
        ) {
            let test = SpectrumEstimate::new(f).unwrap();
            let templates = vec![
                GroupSpectrumTemplate::new(0, t0).unwrap(),
                GroupSpectrumTemplate::new(1, t1).unwrap(),
            ];
            let scaled: Vec<_> = templates.iter().map(|t| t.scaled(c).unwrap()).collect();
            for measure in [Measure::Kl, Measure::Chernoff { alpha: 0.3 }] {
                prop_assert_eq!(
                    classify_information(&test, &templates, measure).unwrap(),
                    classify_information(&test.scaled(c).unwrap(), &scaled, measure).unwrap()
                );
            }
        }
    }
}
