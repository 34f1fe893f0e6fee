use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::cepstral::CepstralVector;
use crate::discriminant::{CvCurve, DiscriminantModel};
use crate::error::{Error, Result};
use crate::spectral::LogSpectrumEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    WeightFunctions,
    DiscriminantScatter,
    LogSpectra,
    CvCurve,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::WeightFunctions,
        PlotKind::DiscriminantScatter,
        PlotKind::LogSpectra,
        PlotKind::CvCurve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::WeightFunctions => "weight-functions",
            PlotKind::DiscriminantScatter => "discriminant-scatter",
            PlotKind::LogSpectra => "log-spectra",
            PlotKind::CvCurve => "cv-curve",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown plot kind {s:?}")))
    }
}

/// A tab-separated table with one header line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Non-fatal notes about what was left out.
    pub warnings: Vec<String>,
}

impl PlotTable {
    pub fn to_tsv(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for row in &self.rows {
            out += &row.join("\t");
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, self.to_tsv().as_bytes())
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

/// `λ, ξ̂_1(λ), …, ξ̂_Q(λ)` on `λ = g/G`, `g = 0..G-1`.
pub fn weight_function_table(model: &DiscriminantModel, grid: usize) -> Result<PlotTable> {
    let q = model.discriminant_count();
    if q == 0 {
        return Err(Error::invalid("model has no discriminants; nothing to plot"));
    }
    let curves = (1..=q)
        .map(|i| model.weight_function(i, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["lambda".to_string()];
    header.extend((1..=q).map(|i| format!("xi{i}")));
    let rows = (0..grid)
        .map(|g| {
            let mut row = vec![num(g as f64 / grid as f64)];
            row.extend(curves.iter().map(|c| num(c[g])));
            row
        })
        .collect();
    Ok(PlotTable {
        header,
        rows,
        warnings: Vec::new(),
    })
}

/// `group, d̂_1, d̂_2` per vector; only `d̂_1` (with a warning) when `Q = 1`.
/// Unlabeled vectors get an empty group field.
pub fn scatter_table(
    model: &DiscriminantModel,
    cepstra: &[CepstralVector],
    group_names: &[String],
) -> Result<PlotTable> {
    let q = model.discriminant_count();
    if q == 0 {
        return Err(Error::invalid("model has no discriminants; nothing to plot"));
    }
    let cols = q.min(2);
    let mut warnings = Vec::new();
    if q == 1 {
        warnings.push("model has a single discriminant; scatter has d1 only".to_string());
    }
    let mut header = vec!["group".to_string()];
    header.extend((1..=cols).map(|i| format!("d{i}")));
    let mut rows = Vec::with_capacity(cepstra.len());
    for v in cepstra {
        let scores = model.scores(v)?;
        let label = match v.group {
            Some(g) => group_names
                .get(g)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("no name for group {g}")))?,
            None => String::new(),
        };
        let mut row = vec![label];
        row.extend(scores[..cols].iter().copied().map(num));
        rows.push(row);
    }
    Ok(PlotTable { header, rows, warnings })
}

/// `λ_m` for `m = 0..⌊N/2⌋` and one column per estimate.
pub fn log_spectra_table(ids: &[String], spectra: &[LogSpectrumEstimate]) -> Result<PlotTable> {
    if ids.len() != spectra.len() {
        return Err(Error::invalid(format!(
            "{} ids for {} spectra",
            ids.len(),
            spectra.len()
        )));
    }
    let n = spectra
        .first()
        .ok_or_else(|| Error::invalid("no spectra to plot"))?
        .len();
    if spectra.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("spectra have different lengths"));
    }
    let mut header = vec!["lambda".to_string()];
    header.extend(ids.iter().cloned());
    let rows = (0..=n / 2)
        .map(|m| {
            let mut row = vec![num(m as f64 / n as f64)];
            row.extend(spectra.iter().map(|s| num(s.values()[m])));
            row
        })
        .collect();
    Ok(PlotTable {
        header,
        rows,
        warnings: Vec::new(),
    })
}

/// `L, errors, selected`; `NA` where a candidate could not be fitted.
pub fn cv_curve_table(curve: &CvCurve) -> PlotTable {
    let rows = curve
        .candidates
        .iter()
        .zip(&curve.errors)
        .map(|(&l, e)| {
            vec![
                l.to_string(),
                e.map_or_else(|| "NA".to_string(), |e| e.to_string()),
                u8::from(l == curve.selected).to_string(),
            ]
        })
        .collect();
    PlotTable {
        header: vec!["L".into(), "errors".into(), "selected".into()],
        rows,
        warnings: Vec::new(),
    }
}

/// Inputs for [`emit_plot_data`].
#[derive(Debug, Clone, Copy)]
pub enum PlotSource<'a> {
    Model {
        model: &'a DiscriminantModel,
        cepstra: &'a [CepstralVector],
        group_names: &'a [String],
        grid: usize,
    },
    Spectra {
        ids: &'a [String],
        spectra: &'a [LogSpectrumEstimate],
    },
    Cv(&'a CvCurve),
}

/// Builds the table of the requested kind and writes it to `path`.
pub fn emit_plot_data(kind: PlotKind, source: PlotSource<'_>, path: &Path) -> Result<PlotTable> {
    let table = match (kind, source) {
        (PlotKind::WeightFunctions, PlotSource::Model { model, grid, .. }) => weight_function_table(model, grid)?,
        (
            PlotKind::DiscriminantScatter,
            PlotSource::Model {
                model,
                cepstra,
                group_names,
                ..
            },
        ) => scatter_table(model, cepstra, group_names)?,
        (PlotKind::LogSpectra, PlotSource::Spectra { ids, spectra }) => log_spectra_table(ids, spectra)?,
        (PlotKind::CvCurve, PlotSource::Cv(curve)) => cv_curve_table(curve),
        (kind, _) => {
            return Err(Error::invalid(format!(
                "plot kind {kind} does not match the supplied data"
            )));
        }
    };
    table.write(path)?;
    Ok(table)
}
