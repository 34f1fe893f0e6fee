use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discriminant::{CvCurve, DiscriminantModel};
use crate::error::{Error, Result};
use crate::spectral::EstimatorConfig;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Everything needed to classify new series with a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub estimator: EstimatorConfig,
    /// Length `N` of the training series.
    pub series_len: usize,
    pub group_names: Vec<String>,
    pub model: DiscriminantModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvCurve>,
}

impl ModelFile {
    pub fn new(
        model: DiscriminantModel,
        estimator: EstimatorConfig,
        series_len: usize,
        group_names: Vec<String>,
    ) -> Result<Self> {
        let file = Self {
            format_version: MODEL_FORMAT_VERSION,
            estimator,
            series_len,
            group_names,
            model,
            cv: None,
        };
        file.check()?;
        Ok(file)
    }

    fn check(&self) -> Result<()> {
        self.model.check_consistency()?;
        if self.group_names.len() != self.model.group_count() {
            return Err(Error::Schema(format!(
                "{} group names for a {}-group model",
                self.group_names.len(),
                self.model.group_count()
            )));
        }
        if self.model.truncation() > crate::cepstral::max_truncation(self.series_len) {
            return Err(Error::Schema(format!(
                "L={} too large for series length {}",
                self.model.truncation(),
                self.series_len
            )));
        }
        Ok(())
    }
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(file).map_err(|e| Error::Schema(e.to_string()))?;
    text.push('\n');
    super::write_atomic(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    load_model_from_str(&text)
}

/// Parses a model file. The version is checked before the body so that
/// files from other versions fail with [`Error::UnsupportedVersion`].
pub fn load_model_from_str(text: &str) -> Result<ModelFile> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let version = value
        .get("format_version")
        .ok_or_else(|| Error::Schema("missing format_version".into()))?;
    let found = version
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| Error::Schema(format!("format_version {version} is not an integer")))?;
    if found != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    file.check()?;
    Ok(file)
}
