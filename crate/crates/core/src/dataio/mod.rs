//! Files in and out: epoch corpora, fitted models, gait stride records and
//! plot tables.

mod corpus;
pub mod gait;
mod model;
mod plot;

pub use corpus::{read_corpus, read_corpus_from, write_corpus, write_corpus_to, Corpus};
pub use gait::{gait_corpus, gait_preprocess, read_gait_dir, read_stride_file, GaitGroup, GaitOptions, StrideRecord};
pub use model::{load_model, load_model_from_str, save_model, ModelFile, MODEL_FORMAT_VERSION};
pub use plot::{
    cv_curve_table, emit_plot_data, log_spectra_table, scatter_table, weight_function_table, PlotKind, PlotSource,
    PlotTable,
};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so
/// readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp_name = format!(
        ".{name}.tmp-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    );
    let tmp: PathBuf = match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(tmp_name),
        _ => PathBuf::from(tmp_name),
    };
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::file(path, e))
}
