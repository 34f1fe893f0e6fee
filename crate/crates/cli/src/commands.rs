use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cepfda::baselines::{
    classify_information, default_alpha_grid, group_templates, tune_chernoff_alpha_spectra, Measure, SpectrumEstimate,
};
use cepfda::cepstral::{cepstra_from_epochs, max_truncation, CepstralVector, LabeledCepstralCorpus};
use cepfda::dataio::{
    emit_plot_data, gait_preprocess, load_model, read_corpus, read_gait_dir, save_model, write_atomic, write_corpus,
    Corpus, GaitGroup, GaitOptions, ModelFile, PlotKind, PlotSource,
};
use cepfda::discriminant::{fit, loo_predictions, select_l_cv_cepstra};
use cepfda::simulation::{gen_conditional_ar2, reference_groups, run_experiment, ExperimentConfig, Method, Range};
use cepfda::spectral::EstimatorConfig;
use cepfda::Error;

use crate::{Command, MeasureKind};

/// A failed command: exit status plus a message naming the stage.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

trait Stage<T> {
    fn stage(self, what: &str) -> Outcome<T>;
}

impl<T> Stage<T> for cepfda::Result<T> {
    fn stage(self, what: &str) -> Outcome<T> {
        self.map_err(|e| Failure {
            code: if e.is_numerical() { 1 } else { 2 },
            message: format!("{what}: {e}"),
        })
    }
}

pub fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected \"lo,hi\", got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound {hi:?}"))?;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(format!("need 0 < lo <= hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// Candidate truncation points.
#[derive(Debug, Clone)]
pub struct Grid(pub Vec<usize>);

/// `"a..b"` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let bad = |p: &str| format!("bad grid entry {p:?} in {s:?}");
    let grid: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad(a))?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| bad(b))?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad(p)))
            .collect::<std::result::Result<_, _>>()?
    };
    if grid.is_empty() || grid.contains(&0) {
        return Err(format!("grid {s:?} must be nonempty and positive"));
    }
    Ok(Grid(grid))
}

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Generate {
            per_group,
            len,
            sigma2,
            seed,
            out,
        } => generate(per_group, len, sigma2, seed, &out),
        Command::Train {
            corpus,
            estimator,
            l,
            cv_grid,
            priors,
            out,
        } => train(&corpus, estimator.config(), l, cv_grid.map(|g| g.0), priors, &out),
        Command::Classify {
            model,
            corpus,
            out,
            loo,
        } => classify(&model, &corpus, out.as_deref(), loo),
        Command::Simulate {
            sigma2,
            per_group,
            test_per_group,
            len,
            reps,
            seed,
            methods,
            l_grid,
            tapers,
            out,
        } => {
            let mut config = ExperimentConfig::reference(Range::new(sigma2.0, sigma2.1), per_group, len, reps, seed);
            config.test_per_group = test_per_group;
            config.l_candidates = l_grid.0;
            config.tapers = tapers;
            if let Some(names) = methods {
                config.methods = names
                    .iter()
                    .map(|m| m.parse::<Method>())
                    .collect::<cepfda::Result<_>>()
                    .stage("parsing --methods")?;
            }
            simulate(&config, out.as_deref())
        }
        Command::Baseline {
            train,
            test,
            measure,
            alpha,
            tune,
            out,
        } => baseline(&train, &test, measure, alpha, tune, out.as_deref()),
        Command::Gait {
            dir,
            out,
            start,
            duration,
            rate,
            median_window,
            outlier_sds,
            smoothing,
            strict,
        } => {
            let opts = GaitOptions {
                start,
                duration,
                rate,
                median_window,
                outlier_sds,
                smoothing,
            };
            gait(&dir, &out, &opts, strict)
        }
        Command::Plot {
            kind,
            model,
            corpus,
            estimator,
            grid,
            out,
        } => plot(&kind, model, corpus, estimator.config(), grid, &out),
    }
}

fn load_corpus(path: &Path) -> Outcome<Corpus> {
    read_corpus(path).stage(&format!("reading corpus {}", path.display()))
}

fn require_labeled(corpus: &Corpus, path: &Path) -> Outcome {
    if corpus.is_empty() {
        return Err(usage(format!("corpus {} is empty", path.display())));
    }
    if !corpus.is_labeled() {
        return Err(usage(format!("corpus {} has unlabeled series", path.display())));
    }
    Ok(())
}

fn generate(per_group: usize, len: usize, sigma2: (f64, f64), seed: u64, out: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut epochs = Vec::new();
    for (g, spec) in reference_groups(Range::new(sigma2.0, sigma2.1)).iter().enumerate() {
        epochs.extend(gen_conditional_ar2(spec, per_group, len, Some(g), &mut rng).stage("simulating")?);
    }
    let corpus = Corpus::new(epochs, vec!["g1".into(), "g2".into(), "g3".into()]).stage("building corpus")?;
    write_corpus(&corpus, out).stage("writing corpus")?;
    println!("wrote {} series of length {len} to {}", corpus.len(), out.display());
    Ok(())
}

fn train(
    path: &Path,
    config: EstimatorConfig,
    l: Option<usize>,
    cv_grid: Option<Vec<usize>>,
    priors: Option<Vec<f64>>,
    out: &Path,
) -> Outcome {
    let corpus = load_corpus(path)?;
    require_labeled(&corpus, path)?;
    let n = corpus.series_len().unwrap_or(0);
    let top = match (&l, &cv_grid) {
        (Some(l), _) => *l,
        (None, Some(grid)) => *grid.iter().max().expect("nonempty grid"),
        (None, None) => unreachable!("clap requires --L or --cv-grid"),
    };
    if top < 1 || top > max_truncation(n) {
        return Err(usage(format!(
            "L={top} outside 1..={} for series length {n}",
            max_truncation(n)
        )));
    }
    let vectors = cepstra_from_epochs(&corpus.epochs, &config, top).stage("estimating cepstra")?;
    let full = LabeledCepstralCorpus::new(vectors).stage("building cepstral corpus")?;

    let (chosen, cv) = match cv_grid {
        Some(grid) => {
            let curve = select_l_cv_cepstra(&full, &grid).stage("cross-validating L")?;
            (curve.selected, Some(curve))
        }
        None => (top, None),
    };
    let model = fit(&full.truncated(chosen).stage("truncating")?, priors.as_deref()).stage("fitting model")?;

    let mut file = ModelFile::new(model, config, n, corpus.group_names.clone()).stage("assembling model")?;
    file.cv = cv;
    save_model(&file, out).stage("writing model")?;

    if let Some(curve) = &file.cv {
        let errs: Vec<String> = curve
            .candidates
            .iter()
            .zip(&curve.errors)
            .map(|(l, e)| format!("L={l}:{}", e.map_or("NA".into(), |e| e.to_string())))
            .collect();
        println!("leave-one-out errors: {}", errs.join(" "));
    }
    println!("L* = {chosen}");
    let counts: Vec<String> = corpus
        .group_names
        .iter()
        .zip(full.counts())
        .map(|(name, c)| format!("{name}={c}"))
        .collect();
    println!("groups: {}", counts.join(" "));
    let eig: Vec<String> = file.model.eigenvalues().iter().map(|t| format!("{t:.6}")).collect();
    println!("eigenvalues (Q={}): {}", file.model.discriminant_count(), eig.join(" "));
    println!("wrote model to {}", out.display());
    Ok(())
}

/// Maps each epoch's group to the model's group order by name.
fn relabel(corpus: &Corpus, names: &[String]) -> Outcome<Vec<Option<usize>>> {
    corpus
        .epochs
        .iter()
        .map(|e| match e.group {
            None => Ok(None),
            Some(g) => {
                let name = &corpus.group_names[g];
                names.iter().position(|n| n == name).map(Some).ok_or_else(|| {
                    usage(format!(
                        "group {name:?} of epoch '{}' is not one of the model groups {names:?}",
                        e.id
                    ))
                })
            }
        })
        .collect()
}

fn model_cepstra(file: &ModelFile, corpus: &Corpus, path: &Path) -> Outcome<Vec<CepstralVector>> {
    let l = file.model.truncation();
    let n = corpus.series_len().unwrap_or(0);
    if l > max_truncation(n) {
        return Err(usage(format!(
            "model L={l} exceeds the {} coefficients available for series length {n} in {}",
            max_truncation(n),
            path.display()
        )));
    }
    if n != file.series_len {
        eprintln!(
            "warning: corpus series length {n} differs from the training length {}",
            file.series_len
        );
    }
    cepstra_from_epochs(&corpus.epochs, &file.estimator, l).stage("estimating cepstra")
}

fn confusion(names: &[String], truth: &[Option<usize>], predicted: &[Option<usize>]) -> String {
    let j = names.len();
    let mut table = vec![vec![0usize; j]; j];
    let (mut correct, mut total, mut failed) = (0, 0, 0);
    for (t, p) in truth.iter().zip(predicted) {
        match (t, p) {
            (Some(t), Some(p)) => {
                table[*t][*p] += 1;
                total += 1;
                correct += usize::from(t == p);
            }
            (Some(_), None) => failed += 1,
            _ => {}
        }
    }
    let width = names.iter().map(|n| n.len()).max().unwrap_or(1).max(5);
    let mut out = String::from("confusion (rows: true group, columns: predicted)\n");
    let _ = write!(out, "{:width$}", "");
    for n in names {
        let _ = write!(out, " {n:>width$}");
    }
    out.push('\n');
    for (name, row) in names.iter().zip(&table) {
        let _ = write!(out, "{name:width$}");
        for c in row {
            let _ = write!(out, " {c:>width$}");
        }
        out.push('\n');
    }
    let pct = if total > 0 {
        100.0 * correct as f64 / total as f64
    } else {
        0.0
    };
    let _ = write!(out, "correct: {correct}/{total} ({pct:.1}%)");
    if failed > 0 {
        let _ = write!(out, "; {failed} held-out fits failed");
    }
    out
}

fn emit(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()).stage("writing predictions"),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn classify(model_path: &Path, corpus_path: &Path, out: Option<&Path>, loo: bool) -> Outcome {
    let file = load_model(model_path).stage(&format!("reading model {}", model_path.display()))?;
    let corpus = load_corpus(corpus_path)?;
    if corpus.is_empty() {
        return Err(usage(format!("corpus {} is empty", corpus_path.display())));
    }
    // Summaries go to stderr when predictions go to stdout.
    let say = |s: &str| {
        if out.is_some() {
            println!("{s}");
        } else {
            eprintln!("{s}");
        }
    };

    if loo {
        require_labeled(&corpus, corpus_path)?;
        let vectors = model_cepstra(&file, &corpus, corpus_path)?;
        let labeled = LabeledCepstralCorpus::new(vectors).stage("building cepstral corpus")?;
        let predicted = loo_predictions(&labeled, file.model.truncation()).stage("leave-one-out")?;
        let names = &corpus.group_names;
        let mut text = String::from("epoch_id\tgroup\tpredicted\n");
        for (e, p) in corpus.epochs.iter().zip(&predicted) {
            let _ = writeln!(
                text,
                "{}\t{}\t{}",
                e.id,
                names[e.group.expect("labeled")],
                p.map_or("NA", |p| names[p].as_str())
            );
        }
        emit(&text, out)?;
        let truth: Vec<Option<usize>> = corpus.epochs.iter().map(|e| e.group).collect();
        say(&format!("leave-one-out at L={}", file.model.truncation()));
        say(&confusion(names, &truth, &predicted));
        return Ok(());
    }

    let truth = relabel(&corpus, &file.group_names)?;
    let vectors = model_cepstra(&file, &corpus, corpus_path)?;
    let names = &file.group_names;
    let q = file.model.discriminant_count();
    let mut text = String::from("epoch_id\tgroup\tpredicted");
    for i in 1..=q {
        let _ = write!(text, "\td{i}");
    }
    for n in names {
        let _ = write!(text, "\tobjective_{n}");
    }
    text.push('\n');
    let mut predicted = Vec::with_capacity(vectors.len());
    let mut ties = 0;
    for ((e, v), t) in corpus.epochs.iter().zip(&vectors).zip(&truth) {
        let r = file.model.classify(v).stage("classifying")?;
        ties += usize::from(r.tie);
        let _ = write!(
            text,
            "{}\t{}\t{}",
            e.id,
            t.map_or("", |t| names[t].as_str()),
            names[r.predicted_group]
        );
        for x in r.scores.iter().chain(&r.objectives) {
            let _ = write!(text, "\t{x}");
        }
        text.push('\n');
        predicted.push(Some(r.predicted_group));
    }
    emit(&text, out)?;
    if q == 0 {
        say("model has no discriminants; predictions use the priors only");
    }
    if ties > 0 {
        say(&format!("{ties} tied decisions resolved toward the first group"));
    }
    if truth.iter().any(Option::is_some) {
        say(&confusion(names, &truth, &predicted));
    }
    Ok(())
}

fn simulate(config: &ExperimentConfig, out: Option<&Path>) -> Outcome {
    let report = run_experiment(config).stage("running experiment")?;
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(&report).map_err(|e| usage(e.to_string()))?;
        write_atomic(path, text.as_bytes()).stage("writing report")?;
    }
    let sigma2 = config.groups[0].sigma2;
    let mut head = format!("{:<12} {:>4} {:>6}", "sigma2", "n_j", "N");
    let mut row = format!(
        "{:<12} {:>4} {:>6}",
        format!("[{}, {}]", sigma2.lo, sigma2.hi),
        config.train_per_group,
        config.len
    );
    for s in &report.methods {
        let name = s.method.to_string();
        let cell = format!("{:.1} ({:.1})", s.mean, s.sd);
        let w = name.len().max(cell.len());
        let _ = write!(head, "  {name:>w$}");
        let _ = write!(row, "  {cell:>w$}");
    }
    println!("{head}\n{row}");
    for s in report.methods.iter().filter(|s| s.failures > 0) {
        eprintln!(
            "warning: {} failed numerically in {} of {} replicates",
            s.method, s.failures, config.reps
        );
    }
    Ok(())
}

fn baseline(
    train: &Path,
    test: &Path,
    measure: MeasureKind,
    alpha: Option<f64>,
    tune: bool,
    out: Option<&Path>,
) -> Outcome {
    if measure == MeasureKind::Kl && (alpha.is_some() || tune) {
        return Err(usage("--alpha and --tune apply to --measure chernoff only"));
    }
    let train_corpus = load_corpus(train)?;
    require_labeled(&train_corpus, train)?;
    let test_corpus = load_corpus(test)?;
    if test_corpus.is_empty() {
        return Err(usage(format!("corpus {} is empty", test.display())));
    }
    if train_corpus.series_len() != test_corpus.series_len() {
        return Err(usage("training and test series lengths differ"));
    }
    let smooth = |c: &Corpus| -> Outcome<Vec<SpectrumEstimate>> {
        c.epochs
            .iter()
            .map(SpectrumEstimate::smoothed)
            .collect::<cepfda::Result<_>>()
            .stage("smoothing periodograms")
    };
    let labels: Vec<usize> = train_corpus.epochs.iter().map(|e| e.group.expect("labeled")).collect();
    let spectra = smooth(&train_corpus)?;
    let measure = match measure {
        MeasureKind::Kl => Measure::Kl,
        MeasureKind::Chernoff if tune => {
            let t = tune_chernoff_alpha_spectra(&spectra, &labels, &default_alpha_grid()).stage("tuning alpha")?;
            let errs: Vec<String> = t
                .alphas
                .iter()
                .zip(&t.errors)
                .map(|(a, e)| format!("{a}:{e}"))
                .collect();
            println!("leave-one-out errors per alpha: {}", errs.join(" "));
            println!("alpha* = {}", t.selected);
            Measure::Chernoff { alpha: t.selected }
        }
        MeasureKind::Chernoff => Measure::Chernoff {
            alpha: alpha.unwrap_or(0.5),
        },
    };
    let templates = group_templates(&spectra, &labels).stage("building templates")?;
    let truth = relabel(&test_corpus, &train_corpus.group_names)?;
    let names = &train_corpus.group_names;
    let mut text = String::from("epoch_id\tgroup\tpredicted\n");
    let mut predicted = Vec::new();
    for (e, t) in test_corpus.epochs.iter().zip(&truth) {
        let s = SpectrumEstimate::smoothed(e).stage("smoothing periodograms")?;
        let p = classify_information(&s, &templates, measure).stage("classifying")?;
        let _ = writeln!(text, "{}\t{}\t{}", e.id, t.map_or("", |t| names[t].as_str()), names[p]);
        predicted.push(Some(p));
    }
    if let Some(path) = out {
        write_atomic(path, text.as_bytes()).stage("writing predictions")?;
    }
    println!("measure: {measure:?}");
    if truth.iter().any(Option::is_some) {
        println!("{}", confusion(names, &truth, &predicted));
    } else if out.is_none() {
        print!("{text}");
    }
    Ok(())
}

fn gait(dir: &Path, out: &Path, opts: &GaitOptions, strict: bool) -> Outcome {
    let records = read_gait_dir(dir).stage(&format!("reading gait records in {}", dir.display()))?;
    if records.is_empty() {
        return Err(usage(format!("no control*, als* or hunt* files in {}", dir.display())));
    }
    let mut epochs = Vec::new();
    for r in &records {
        match gait_preprocess(r, opts) {
            Ok(e) => epochs.push(e),
            Err(e) if !strict && matches!(e, Error::InvalidArgument(_)) => {
                eprintln!("warning: skipping {}: {e}", r.id)
            }
            Err(e) => return Err(e).stage(&format!("preprocessing {}", r.id)),
        }
    }
    let names = GaitGroup::ALL.iter().map(|g| g.code().to_string()).collect();
    let corpus = Corpus::new(epochs, names).stage("building corpus")?;
    write_corpus(&corpus, out).stage("writing corpus")?;
    let counts: Vec<String> = GaitGroup::ALL
        .iter()
        .map(|g| {
            let c = corpus.epochs.iter().filter(|e| e.group == Some(g.index())).count();
            format!("{}={c}", g.code())
        })
        .collect();
    println!(
        "wrote {} series of length {} to {} ({})",
        corpus.len(),
        opts.output_len(),
        out.display(),
        counts.join(" ")
    );
    Ok(())
}

fn plot(
    kind: &str,
    model: Option<PathBuf>,
    corpus: Option<PathBuf>,
    config: EstimatorConfig,
    grid: usize,
    out: &Path,
) -> Outcome {
    let kind: PlotKind = kind.parse().stage("parsing --kind")?;
    let need = |p: Option<PathBuf>, flag: &str| p.ok_or_else(|| usage(format!("--kind {kind} needs --{flag}")));
    let table = match kind {
        PlotKind::WeightFunctions | PlotKind::DiscriminantScatter | PlotKind::CvCurve => {
            let path = need(model, "model")?;
            let file = load_model(&path).stage(&format!("reading model {}", path.display()))?;
            match kind {
                PlotKind::CvCurve => {
                    let curve = file
                        .cv
                        .as_ref()
                        .ok_or_else(|| usage("model was trained without --cv-grid; no CV curve stored"))?;
                    emit_plot_data(kind, PlotSource::Cv(curve), out)
                }
                PlotKind::DiscriminantScatter => {
                    let cpath = need(corpus, "corpus")?;
                    let c = load_corpus(&cpath)?;
                    let truth = relabel(&c, &file.group_names)?;
                    let mut vectors = model_cepstra(&file, &c, &cpath)?;
                    for (v, t) in vectors.iter_mut().zip(truth) {
                        v.group = t;
                    }
                    emit_plot_data(
                        kind,
                        PlotSource::Model {
                            model: &file.model,
                            cepstra: &vectors,
                            group_names: &file.group_names,
                            grid,
                        },
                        out,
                    )
                }
                _ => emit_plot_data(
                    kind,
                    PlotSource::Model {
                        model: &file.model,
                        cepstra: &[],
                        group_names: &file.group_names,
                        grid,
                    },
                    out,
                ),
            }
        }
        PlotKind::LogSpectra => {
            let cpath = need(corpus, "corpus")?;
            let c = load_corpus(&cpath)?;
            let spectra = c
                .epochs
                .iter()
                .map(|e| config.estimate(e))
                .collect::<cepfda::Result<Vec<_>>>()
                .stage("estimating log-spectra")?;
            let ids: Vec<String> = c.epochs.iter().map(|e| e.id.clone()).collect();
            emit_plot_data(
                kind,
                PlotSource::Spectra {
                    ids: &ids,
                    spectra: &spectra,
                },
                out,
            )
        }
    }
    .stage(&format!("writing {kind} table"))?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} rows to {}", table.rows.len(), out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("2..5").unwrap().0, [2, 3, 4, 5]);
        assert_eq!(parse_grid("2..=3").unwrap().0, [2, 3]);
        assert_eq!(parse_grid("1, 4,6").unwrap().0, [1, 4, 6]);
        assert!(parse_grid("0..3").is_err());
        assert!(parse_grid("5..2").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0.3,3").unwrap(), (0.3, 3.0));
        assert!(parse_range("3,0.3").is_err());
        assert!(parse_range("0,1").is_err());
        assert!(parse_range("1").is_err());
    }

    #[test]
    fn confusion_counts() {
        let names = vec!["a".to_string(), "b".to_string()];
        let text = confusion(&names, &[Some(0), Some(1), Some(1)], &[Some(0), Some(0), None]);
        assert!(text.contains("correct: 1/2 (50.0%)"));
        assert!(text.contains("1 held-out fits failed"));
    }
}
