use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    AgreementArgs, CliError, Command, ConsensusArgs, CurveArgs, EdfCommand, EvalArgs, GrayArgs, ModeArg, PoolingArg,
    PreprocessArgs, ServeArgs, StageArgs, SynthArgs, TrainArgs, UncertaintyArgs,
};
use crate::consensus::{exclusion_mask, known_uncertainty_split, majority_score};
use crate::dsp::{preprocess, PreprocConfig};
use crate::edf::{header_for, parse_edf, write_edf, ChannelSignal};
use crate::eval::{agreement, capture_curve, confusion, exclusion_curve, gray_agreement_cohort};
use crate::hypno::{argmax_hypnogram, ensemble_average, EpochGrid, Hypnodensity, Hypnogram, ScorerPanel, EPOCH_SECONDS};
use crate::reportio::{
    capture_curves_svg, emit_hypnodensity_svg, exclusion_curves_svg, read_hypnodensity_csv, read_hypnogram_csv,
    read_mask_csv, read_model, read_panel, read_text, write_atomic, write_hypnodensity_csv, write_hypnogram_csv,
    write_mask_csv, write_model, write_panel, write_report, write_uncertainty_csv, ConsensusSummary, CurveBundle,
    ReportBody,
};
use crate::review::{load_dataset, serve, ReviewStore};
use crate::stager::{apply, extract_features, train, EpochFeatures, LabeledRecording, SoftmaxModel, TrainConfig};
use crate::synth::{generate, SynthConfig, SynthDataset};
use crate::uncertainty::{compute_uncertainty, select_gray_rank, select_gray_threshold, RankPooling, UncertaintyMetric};

/// Settings shared by `preprocess`, `train` and `stage`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub channels: Option<Vec<String>>,
    pub preprocess: PreprocConfig,
    pub train: TrainConfig,
}

pub(super) fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Edf(EdfCommand::Info { file }) => edf_info(&file),
        Command::Preprocess(a) => preprocess_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Stage(a) => stage_cmd(a),
        Command::Uncertainty(a) => uncertainty_cmd(a),
        Command::Gray(a) => gray_cmd(a),
        Command::Consensus(a) => consensus_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Curve(a) => curve_cmd(a),
        Command::Agreement(a) => agreement_cmd(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn load_toml<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    Ok(write_atomic(path, text.as_bytes())?)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn stem(path: &Path) -> String {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    name.split('.').next().filter(|s| !s.is_empty()).unwrap_or("recording").to_string()
}

/// Recording ids for a list of inputs: file stems when they are distinct,
/// otherwise parent directory names (the `<dir>/<recording>/model.csv` layout).
fn recording_ids(paths: &[PathBuf]) -> Result<Vec<String>, CliError> {
    let distinct = |ids: &[String]| ids.iter().collect::<std::collections::BTreeSet<_>>().len() == ids.len();
    let stems: Vec<String> = paths.iter().map(|p| stem(p)).collect();
    if distinct(&stems) {
        return Ok(stems);
    }
    let parents: Vec<String> = paths
        .iter()
        .map(|p| p.parent().and_then(|d| d.file_name()).map(|d| d.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    if parents.iter().all(|d| !d.is_empty()) && distinct(&parents) {
        return Ok(parents);
    }
    Err(CliError::Usage("inputs do not have distinct file or directory names".into()))
}

fn safe_label(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn read_edf_file(path: &Path) -> Result<Vec<ChannelSignal>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(parse_edf(&bytes)?.1)
}

fn select_channels(signals: Vec<ChannelSignal>, wanted: &[String]) -> Result<Vec<ChannelSignal>, CliError> {
    if wanted.is_empty() {
        return Ok(signals);
    }
    wanted
        .iter()
        .map(|w| {
            signals.iter().find(|s| s.label.trim() == w.trim()).cloned().ok_or_else(|| {
                let available: Vec<&str> = signals.iter().map(|s| s.label.as_str()).collect();
                CliError::Data(format!("channel {w:?} not found; available: {available:?}"))
            })
        })
        .collect()
}

fn channel_list(cli: &[String], cfg: &PipelineConfig) -> Vec<String> {
    if cli.is_empty() {
        cfg.channels.clone().unwrap_or_default()
    } else {
        cli.to_vec()
    }
}

fn edf_info(file: &Path) -> Result<(), CliError> {
    let bytes = std::fs::read(file).map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?;
    let (h, _) = parse_edf(&bytes)?;
    println!("file: {}", file.display());
    println!("patient: {}", h.patient_id.trim());
    println!("recording: {}", h.recording_id.trim());
    println!("start: {}", h.start);
    println!("records: {} x {} s ({} s total)", h.n_records, h.record_duration_s, h.n_records as f64 * h.record_duration_s);
    println!("signals: {}", h.signals.len());
    for s in &h.signals {
        let fs = s.samples_per_record as f64 / h.record_duration_s;
        println!(
            "  {:<16} {:>8.3} Hz  {:<4} phys [{}, {}]  dig [{}, {}]  {}",
            s.label.trim(),
            fs,
            s.physical_dim.trim(),
            s.physical_min,
            s.physical_max,
            s.digital_min,
            s.digital_max,
            s.prefiltering.trim()
        );
    }
    Ok(())
}

fn preprocess_cmd(a: PreprocessArgs) -> Result<(), CliError> {
    let cfg: PipelineConfig = load_toml(a.config.as_deref())?;
    cfg.preprocess.validate()?;
    let id = a.recording_id.clone().unwrap_or_else(|| stem(&a.edf));
    let channels = select_channels(read_edf_file(&a.edf)?, &channel_list(&a.channels, &cfg))?;
    create_dir(&a.output)?;
    let results: Vec<_> = channels
        .par_iter()
        .map(|c| -> Result<(), CliError> {
            let epoched = preprocess(c, &cfg.preprocess, &id)?;
            let base = safe_label(&c.label);
            let json = serde_json::to_string(&epoched).expect("epochs serialize");
            write_file(&a.output.join(format!("{base}.epochs.json")), &json)?;
            if a.features {
                let f = extract_features(&epoched);
                let json = serde_json::to_string(&f).expect("features serialize");
                write_file(&a.output.join(format!("{base}.features.json")), &json)?;
            }
            println!("{}: {} epochs", c.label, epoched.epoch_count());
            Ok(())
        })
        .collect();
    results.into_iter().collect()
}

fn truncate_features(f: &EpochFeatures, n: usize) -> Result<EpochFeatures, CliError> {
    let values = f.rows().take(n).flatten().copied().collect();
    Ok(EpochFeatures::new(f.channel.clone(), EpochGrid::new(f.grid.recording_id(), n)?, f.dim, values)?)
}

fn truncate_hypnogram(h: &Hypnogram, n: usize) -> Result<Hypnogram, CliError> {
    let grid = EpochGrid::new(h.grid().recording_id(), n)?;
    Ok(Hypnogram::new(grid, h.stages()[..n].to_vec(), h.uncertain()[..n].to_vec())?)
}

fn reference_path(dir: &Path) -> Option<PathBuf> {
    ["reference.csv", "truth.csv"].iter().map(|f| dir.join(f)).find(|p| p.is_file())
}

fn subdirs(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(root).map_err(|e| CliError::Data(format!("{}: {e}", root.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn labeled_recording(dir: &Path, cfg: &PipelineConfig) -> Result<LabeledRecording, CliError> {
    let id = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let labels_path =
        reference_path(dir).ok_or_else(|| CliError::Data(format!("{}: no reference.csv or truth.csv", dir.display())))?;
    let labels = read_hypnogram_csv(&read_text(&labels_path)?, &id)?;
    let signals = select_channels(read_edf_file(&dir.join("signals.edf"))?, &channel_list(&[], cfg))?;
    let mut channels = Vec::with_capacity(signals.len());
    for s in &signals {
        channels.push(extract_features(&preprocess(s, &cfg.preprocess, &id)?));
    }
    let n = channels.iter().map(EpochFeatures::epoch_count).chain([labels.len()]).min().unwrap_or(0);
    if channels.iter().any(|c| c.epoch_count() != n) || labels.len() != n {
        log::warn!("{id}: trimming signals and labels to {n} common epochs");
    }
    Ok(LabeledRecording {
        recording_id: id,
        channels: channels.iter().map(|c| truncate_features(c, n)).collect::<Result<_, _>>()?,
        labels: truncate_hypnogram(&labels, n)?,
    })
}

fn train_cmd(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg: PipelineConfig = load_toml(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    cfg.preprocess.validate()?;
    cfg.train.validate()?;
    let dirs: Vec<PathBuf> = subdirs(&a.data)?.into_iter().filter(|d| d.join("signals.edf").is_file()).collect();
    if dirs.is_empty() {
        return Err(CliError::Data(format!("{}: no recording directories with signals.edf", a.data.display())));
    }
    let recs = dirs.par_iter().map(|d| labeled_recording(d, &cfg)).collect::<Result<Vec<_>, _>>()?;
    let model = train(&recs, None, &cfg.train)?;
    write_file(&a.output, &write_model(&model))?;
    println!(
        "trained on {} recordings; validation accuracy {:.4} at epoch {}",
        recs.len(),
        model.meta.best_val_accuracy,
        model.meta.best_epoch
    );
    Ok(())
}

fn regrid(h: &Hypnodensity, id: &str, n: usize) -> Result<Hypnodensity, CliError> {
    Ok(Hypnodensity::new(EpochGrid::new(id, n)?, h.rows()[..n].to_vec())?)
}

fn average_trimmed(hs: &[Hypnodensity], id: &str) -> Result<Hypnodensity, CliError> {
    let n = hs.iter().map(Hypnodensity::len).min().unwrap_or(0);
    if hs.iter().any(|h| h.len() != n) {
        log::warn!("inputs differ in length; trimming to {n} epochs");
    }
    let trimmed = hs.iter().map(|h| regrid(h, id, n)).collect::<Result<Vec<_>, _>>()?;
    Ok(ensemble_average(&trimmed)?)
}

fn stage_from_model(model: &SoftmaxModel, a: &StageArgs, id: &str) -> Result<Vec<Hypnodensity>, CliError> {
    let cfg: PipelineConfig = load_toml(a.config.as_deref())?;
    cfg.preprocess.validate()?;
    let wanted = channel_list(&a.channels, &cfg);
    let mut out = Vec::new();
    for input in &a.inputs {
        let is_edf = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("edf"));
        if is_edf {
            for s in select_channels(read_edf_file(input)?, &wanted)? {
                match preprocess(&s, &cfg.preprocess, id) {
                    Ok(e) => out.push(apply(model, &extract_features(&e))?),
                    Err(err) => log::warn!("skipping channel {:?}: {err}", s.label),
                }
            }
        } else {
            let features: EpochFeatures = read_json(input)?;
            out.push(apply(model, &features)?);
        }
    }
    Ok(out)
}

fn stage_cmd(a: StageArgs) -> Result<(), CliError> {
    let first = a.inputs.first().or(a.hypnodensity.first());
    let id = a.recording_id.clone().or_else(|| first.map(|p| stem(p))).unwrap_or_else(|| "recording".into());
    let hs = match &a.model {
        Some(model_path) => {
            if a.inputs.is_empty() {
                return Err(CliError::Usage("--model needs at least one EDF or features input".into()));
            }
            let model = read_model(&read_text(model_path)?)?;
            stage_from_model(&model, &a, &id)?
        }
        None => {
            if !a.inputs.is_empty() {
                return Err(CliError::Usage("positional inputs need --model".into()));
            }
            a.hypnodensity.iter().map(|p| Ok(read_hypnodensity_csv(&read_text(p)?, &id)?)).collect::<Result<_, CliError>>()?
        }
    };
    if hs.is_empty() {
        return Err(CliError::Data("no channel could be staged".into()));
    }
    let h = average_trimmed(&hs, &id)?;
    write_file(&a.output, &write_hypnodensity_csv(&h))?;
    println!("{id}: {} epochs from {} sources", h.len(), hs.len());
    Ok(())
}

fn uncertainty_cmd(a: UncertaintyArgs) -> Result<(), CliError> {
    let h = read_hypnodensity_csv(&read_text(&a.hypnodensity)?, &stem(&a.hypnodensity))?;
    write_file(&a.output, &write_uncertainty_csv(&compute_uncertainty(&h, a.metric)))
}

fn gray_cmd(a: GrayArgs) -> Result<(), CliError> {
    if a.svg.is_some() && a.hypnodensities.len() != 1 {
        return Err(CliError::Usage("--svg needs exactly one input".into()));
    }
    let ids = recording_ids(&a.hypnodensities)?;
    let hs = a
        .hypnodensities
        .iter()
        .zip(&ids)
        .map(|(p, id)| Ok(read_hypnodensity_csv(&read_text(p)?, id)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    let series: Vec<_> = hs.iter().map(|h| compute_uncertainty(h, a.metric)).collect();
    let selections = match a.mode {
        ModeArg::Rank => {
            let pooling = match a.pooling {
                PoolingArg::Dataset => RankPooling::Dataset,
                PoolingArg::Recording => RankPooling::PerRecording,
            };
            select_gray_rank(&series, a.value, pooling)?
        }
        ModeArg::Threshold => {
            let (lo, hi) = a.metric.range();
            if !(a.value >= lo && a.value <= hi) {
                return Err(CliError::Usage(format!("threshold {} outside the {} range [{lo}, {hi}]", a.value, a.metric.token())));
            }
            series.iter().map(|s| select_gray_threshold(s, a.value)).collect()
        }
    };
    if selections.len() == 1 {
        write_file(&a.output, &write_mask_csv(selections[0].mask()))?;
    } else {
        create_dir(&a.output)?;
        for s in &selections {
            write_file(&a.output.join(format!("{}.gray.csv", s.grid().recording_id())), &write_mask_csv(s.mask()))?;
        }
    }
    if let Some(svg) = &a.svg {
        write_file(svg, &emit_hypnodensity_svg(&hs[0], &selections[0])?)?;
    }
    for s in &selections {
        println!("{}: {} of {} epochs gray", s.grid().recording_id(), s.count(), s.mask().len());
    }
    Ok(())
}

fn consensus_cmd(a: ConsensusArgs) -> Result<(), CliError> {
    let panel = read_panel(&a.panel)?;
    let c = majority_score(&panel)?;
    if let Some(out) = &a.output {
        write_file(out, &write_hypnogram_csv(&c.hypnogram))?;
    }
    let split = known_uncertainty_split(&panel);
    let summary = ConsensusSummary {
        recording_id: panel.grid().recording_id().to_string(),
        epochs: c.hypnogram.len(),
        scorers: panel.scorer_count(),
        tie_epochs: c.tie_mask.iter().filter(|&&t| t).count(),
        tie_fraction: c.tie_fraction,
        known_uncertain_epochs: split.known.iter().filter(|&&k| k).count(),
    };
    emit(&write_report(&ReportBody::Consensus(summary)), a.report.as_deref())
}

fn read_prediction(path: &Path, id: &str) -> Result<Hypnogram, CliError> {
    let text = read_text(path)?;
    if text.trim_start().starts_with("epoch,p_wake") {
        Ok(argmax_hypnogram(&read_hypnodensity_csv(&text, id)?))
    } else {
        Ok(read_hypnogram_csv(&text, id)?)
    }
}

fn eval_cmd(a: EvalArgs) -> Result<(), CliError> {
    let id = stem(&a.reference);
    let reference = read_hypnogram_csv(&read_text(&a.reference)?, &id)?;
    let predicted = read_prediction(&a.pred, &id)?;
    let mask = a.exclude.as_deref().map(|p| read_mask_csv(&read_text(p)?)).transpose()?;
    let cm = confusion(&reference, &predicted, mask.as_deref())?;
    emit(&write_report(&ReportBody::Agreement(agreement(&cm)?)), a.output.as_deref())
}

/// Parses `start:end:step` into an inclusive grid of fractions.
pub(super) fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("grid {spec:?} must be start:end:step with 0 <= start <= end <= 1 and step > 0"));
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [start, end, step] = parts[..] else { return Err(bad()) };
    if !(0.0 <= start && start <= end && end <= 1.0 && step > 0.0) {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
}

fn curve_cmd(a: CurveArgs) -> Result<(), CliError> {
    let grid = parse_grid(&a.grid)?;
    let metrics = if a.metric.is_empty() { UncertaintyMetric::ALL.to_vec() } else { a.metric.clone() };
    let recs = load_dataset(&a.data)?;
    if recs.is_empty() {
        return Err(CliError::Data(format!("{}: no recordings", a.data.display())));
    }
    let mut hyps = Vec::with_capacity(recs.len());
    let mut refs = Vec::with_capacity(recs.len());
    for r in &recs {
        let reference = r
            .reference
            .clone()
            .ok_or_else(|| CliError::Data(format!("recording {:?} has no reference", r.recording_id)))?;
        hyps.push(r.model.clone());
        refs.push(reference);
    }
    let masks = match Option::<crate::consensus::ExclusionPolicy>::from(a.exclude) {
        None => None,
        Some(policy) => Some(
            recs.iter()
                .map(|r| Ok(exclusion_mask(&read_panel(&a.data.join(&r.recording_id).join("panel.toml"))?, policy)))
                .collect::<Result<Vec<_>, CliError>>()?,
        ),
    };
    let predicted: Vec<Hypnogram> = hyps.iter().map(argmax_hypnogram).collect();
    let results = metrics
        .par_iter()
        .map(|&m| {
            Ok((
                exclusion_curve(&hyps, &refs, m, &grid, masks.as_deref())?,
                capture_curve(&hyps, &refs, &predicted, m, &grid, masks.as_deref())?,
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let (exclusion, capture): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    create_dir(&a.output)?;
    write_file(&a.output.join("exclusion.svg"), &exclusion_curves_svg(&exclusion)?)?;
    write_file(&a.output.join("capture.svg"), &capture_curves_svg(&capture)?)?;
    for c in &exclusion {
        let first = c.points.first().map_or(f64::NAN, |p| p.report.accuracy);
        let last = c.points.last().map_or(f64::NAN, |p| p.report.accuracy);
        println!("{}: accuracy {first:.4} -> {last:.4}", c.metric.token());
    }
    write_file(&a.output.join("curves.json"), &write_report(&ReportBody::Curves(CurveBundle { exclusion, capture })))
}

fn panel_and_model(manifest: &Path, model: &Path) -> Result<(ScorerPanel, Hypnodensity), CliError> {
    let panel = read_panel(manifest)?;
    let h = read_hypnodensity_csv(&read_text(model)?, panel.grid().recording_id())?;
    Ok((panel, h))
}

fn agreement_cmd(a: AgreementArgs) -> Result<(), CliError> {
    let items = match (&a.panel, &a.model, &a.data) {
        (Some(p), Some(m), None) => vec![panel_and_model(p, m)?],
        (None, None, Some(dir)) => subdirs(dir)?
            .into_iter()
            .filter(|d| d.join("panel.toml").is_file())
            .map(|d| panel_and_model(&d.join("panel.toml"), &d.join("model.csv")))
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(CliError::Usage("give either --panel with --model, or --data".into())),
    };
    if items.is_empty() {
        return Err(CliError::Data("no recordings with panel.toml found".into()));
    }
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(CliError::Usage(format!("threshold {} outside [0, 1]", a.threshold)));
    }
    let refs: Vec<(&ScorerPanel, &Hypnodensity)> = items.iter().map(|(p, h)| (p, h)).collect();
    let report = gray_agreement_cohort(&refs, a.threshold)?;
    emit(&write_report(&ReportBody::GrayAgreement(report)), a.output.as_deref())
}

/// Writes a generated dataset as one directory per recording holding
/// `model.csv`, `truth.csv`, `panel.toml` with its scorer files and, when
/// signals were generated, `signals.edf`.
pub fn export_synth_dataset(ds: &SynthDataset, dir: &Path) -> Result<(), CliError> {
    create_dir(dir)?;
    let config = toml::to_string(&ds.config).map_err(|e| CliError::Data(e.to_string()))?;
    write_file(&dir.join("synth.toml"), &config)?;
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date");
    ds.recordings
        .par_iter()
        .map(|r| -> Result<(), CliError> {
            let rd = dir.join(&r.recording_id);
            create_dir(&rd)?;
            write_file(&rd.join("model.csv"), &write_hypnodensity_csv(&r.model))?;
            write_file(&rd.join("truth.csv"), &write_hypnogram_csv(&r.truth))?;
            write_panel(&rd, &r.panel)?;
            if !r.signals.is_empty() {
                let header = header_for(&r.signals, EPOCH_SECONDS, &r.recording_id, start)?;
                let bytes = write_edf(&header, &r.signals)?;
                write_atomic(&rd.join("signals.edf"), &bytes)?;
            }
            Ok(())
        })
        .collect()
}

fn synth_cmd(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg: SynthConfig = load_toml(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if a.signals && cfg.signals.is_none() {
        cfg.signals = Some(Default::default());
    }
    let ds = generate(&cfg)?;
    export_synth_dataset(&ds, &a.output)?;
    println!("wrote {} recordings to {}", ds.recordings.len(), a.output.display());
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<(), CliError> {
    let store = Arc::new(ReviewStore::open(&a.data)?);
    let addr = std::net::SocketAddr::new(a.bind, a.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    runtime.block_on(serve(store, addr)).map_err(|e| CliError::Data(format!("{addr}: {e}")))
}
