//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances and runtime budgets are pinned
//! below next to each check.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use somnogray::consensus::{known_uncertainty_split, majority_score};
use somnogray::dsp::{bandpass, iqr_normalize, preprocess, rational_ratio, resample, PreprocConfig};
use somnogray::edf::{header_for, parse_edf, write_edf, ChannelSignal};
use somnogray::eval::{agreement, capture_curve, confusion, exclusion_curve, gray_agreement_cohort, ConfusionMatrix};
use somnogray::hypno::{
    argmax_hypnogram, panel_to_hypnodensity, EpochGrid, Hypnodensity, Hypnogram, ScorerPanel, Stage, N_STAGES,
};
use somnogray::stager::{extract_features, loss_and_grad, stage_recording, train, LabeledRecording, TrainConfig};
use somnogray::synth::{generate, SignalConfig, SynthConfig, SynthDataset};
use somnogray::uncertainty::{compute_uncertainty, select_gray_threshold, UncertaintyMetric, RATIO_CAP};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------------------
// Metric formulas

fn metric_formulas() -> Outcome {
    use UncertaintyMetric::*;
    let one_hot = [1.0, 0.0, 0.0, 0.0, 0.0];
    let uniform = [0.2; N_STAGES];
    let endpoints = [
        (LeastConfidence, 0.0, 1.0),
        (MarginOfConfidence, 0.0, 1.0),
        (RatioOfConfidence, RATIO_CAP, 1.0),
        (Unlikeability, 0.0, 0.8),
        (Entropy, 0.0, 1.0),
    ];
    for (m, hot, uni) in endpoints {
        let (a, b) = (m.evaluate(&one_hot), m.evaluate(&uniform));
        ensure(close(a, hot, 1e-12) && close(b, uni, 1e-12), || format!("{m}: one-hot {a}, uniform {b}"))?;
    }
    // Independent values for (0.6, 0.3, 0.1, 0, 0); the entropy constant was
    // evaluated at 30 significant digits.
    let row = [0.6, 0.3, 0.1, 0.0, 0.0];
    let expected = [
        (LeastConfidence, 0.4 * 5.0 / 4.0),
        (MarginOfConfidence, 0.7),
        (RatioOfConfidence, 2.0),
        (Unlikeability, 0.54),
        (Entropy, 0.557_925_048_191_970_454_6),
    ];
    for (m, want) in expected {
        let got = m.evaluate(&row);
        ensure(close(got, want, 1e-9), || format!("{m}: {got} vs {want}"))?;
    }
    Ok("endpoints exact to 1e-12; derived row to 1e-9".into())
}

// ---------------------------------------------------------------------------
// Threshold-0.6 vote table

fn panel_from_votes(votes: &[(Stage, usize)]) -> ScorerPanel {
    let grid = EpochGrid::new("votes", 1).unwrap();
    let scorers = votes
        .iter()
        .flat_map(|&(s, k)| std::iter::repeat_n(s, k))
        .enumerate()
        .map(|(i, s)| (format!("s{i}"), Hypnogram::certain(grid.clone(), vec![s]).unwrap()))
        .collect();
    ScorerPanel::new(scorers).unwrap()
}

fn vote_table() -> Outcome {
    use Stage::*;
    let cases: [(&[(Stage, usize)], bool); 4] = [
        (&[(N1, 4), (N2, 3), (Wake, 3)], true),
        (&[(N2, 5), (N3, 5)], false),
        (&[(N2, 6), (N1, 4)], false),
        (&[(Wake, 4), (N1, 4), (N2, 2)], true),
    ];
    for (votes, gray) in cases {
        let h = panel_from_votes(votes);
        let h = panel_to_hypnodensity(&h).map_err(|e| e.to_string())?;
        let sel = select_gray_threshold(&compute_uncertainty(&h, UncertaintyMetric::Unlikeability), 0.6);
        ensure(sel.mask()[0] == gray, || format!("{votes:?}: expected gray = {gray}"))?;
    }
    Ok("4/4 patterns".into())
}

// ---------------------------------------------------------------------------
// Consensus equivalence

fn consensus_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut epochs = 0usize;
    for trial in 0..10_000 {
        let n_scorers = rng.random_range(1..=12);
        let n_epochs = rng.random_range(1..=20);
        // Few distinct stages make ties common.
        let palette = rng.random_range(1..=N_STAGES);
        let grid = EpochGrid::new(format!("p{trial}"), n_epochs).unwrap();
        let scorers = (0..n_scorers)
            .map(|s| {
                let stages = (0..n_epochs)
                    .map(|_| {
                        if s > 0 && rng.random_bool(0.1) {
                            Stage::Unscored
                        } else {
                            Stage::from_index(rng.random_range(0..palette)).unwrap()
                        }
                    })
                    .collect();
                (format!("s{s}"), Hypnogram::certain(grid.clone(), stages).unwrap())
            })
            .collect();
        let panel = ScorerPanel::new(scorers).unwrap();
        let majority = majority_score(&panel).map_err(|e| e.to_string())?;
        let argmax = argmax_hypnogram(&panel_to_hypnodensity(&panel).map_err(|e| e.to_string())?);
        ensure(majority.hypnogram.stages() == argmax.stages(), || format!("panel {trial} differs"))?;
        epochs += n_epochs;
    }
    Ok(format!("10000 panels, {epochs} epochs, 0 mismatches"))
}

// ---------------------------------------------------------------------------
// Kappa

fn kappa_oracle() -> Outcome {
    let mut counts = [[0u64; N_STAGES]; N_STAGES];
    counts[0][0] = 8;
    counts[0][1] = 2;
    counts[1][0] = 1;
    counts[1][1] = 9;
    let k = agreement(&ConfusionMatrix::from_counts(counts)).map_err(|e| e.to_string())?.cohen_kappa;
    ensure(k == 0.7, || format!("hand matrix kappa {k}"))?;

    let grid = EpochGrid::new("k", 40).unwrap();
    let reference: Vec<Stage> = (0..40).map(|e| if e % 2 == 0 { Stage::Wake } else { Stage::N2 }).collect();
    let r = Hypnogram::certain(grid.clone(), reference).unwrap();
    let p = Hypnogram::certain(grid, vec![Stage::Wake; 40]).unwrap();
    let k0 = agreement(&confusion(&r, &p, None).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.cohen_kappa;
    ensure(close(k0, 0.0, 1e-12), || format!("constant prediction kappa {k0}"))?;
    Ok(format!("hand {k}, constant {k0}"))
}

// ---------------------------------------------------------------------------
// Curves on the default synthetic dataset

fn default_dataset() -> SynthDataset {
    generate(&SynthConfig::default()).expect("default config is valid")
}

fn cohort(ds: &SynthDataset) -> (Vec<Hypnodensity>, Vec<Hypnogram>) {
    ds.recordings.iter().map(|r| (r.model.clone(), r.truth.clone())).unzip()
}

fn exclusion_phenomenon() -> Outcome {
    let ds = default_dataset();
    let (hyps, refs) = cohort(&ds);
    let grid = [0.0, 0.01, 0.05, 0.10, 0.20, 0.40, 0.60, 0.80, 0.95];
    let mut summary = Vec::new();
    for m in UncertaintyMetric::ALL {
        let curve = exclusion_curve(&hyps, &refs, m, &grid, None).map_err(|e| e.to_string())?;
        let acc: Vec<f64> = curve.points.iter().map(|p| p.report.accuracy).collect();
        ensure(close(acc[0], 0.82, 0.01), || format!("accuracy at 0% = {:.4}", acc[0]))?;
        let drops: Vec<f64> = acc.windows(2).filter(|w| w[1] <= w[0]).map(|w| w[0] - w[1]).collect();
        ensure(drops.len() <= 1 && drops.iter().all(|&d| d <= 0.005), || format!("{m}: curve {acc:?}"))?;
        ensure(acc[acc.len() - 1] > acc[0], || format!("{m}: curve does not rise"))?;
        summary.push(format!("{} {:.3}->{:.3}", m.token(), acc[0], acc[acc.len() - 1]));
    }
    Ok(summary.join(", "))
}

fn capture_phenomenon() -> Outcome {
    let ds = default_dataset();
    let (hyps, refs) = cohort(&ds);
    let predicted: Vec<Hypnogram> = hyps.iter().map(argmax_hypnogram).collect();
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let mut summary = Vec::new();
    for m in UncertaintyMetric::ALL {
        let curve = capture_curve(&hyps, &refs, &predicted, m, &grid, None).map_err(|e| e.to_string())?;
        for p in &curve.points {
            ensure(p.captured_fraction > p.pct, || format!("{m}: captured {} at {}", p.captured_fraction, p.pct))?;
        }
        let at40 = curve.points[3].captured_fraction;
        if m != UncertaintyMetric::Entropy {
            ensure(at40 >= 0.60, || format!("{m}: captured {at40:.3} at 40%"))?;
        }
        summary.push(format!("{} {:.3}", m.token(), at40));
    }
    Ok(format!("capture@40%: {}", summary.join(", ")))
}

// ---------------------------------------------------------------------------
// Gray-area agreement

fn gray_agreement_structure() -> Outcome {
    let ds = default_dataset();
    let items: Vec<(&ScorerPanel, &Hypnodensity)> = ds.recordings.iter().map(|r| (&r.panel, &r.model)).collect();
    let report = gray_agreement_cohort(&items, 0.6).map_err(|e| e.to_string())?;

    let (mut known, mut unknown) = (0u64, 0u64);
    let mut manual_pcts = Vec::new();
    let mut model_pcts = Vec::new();
    for r in &ds.recordings {
        let split = known_uncertainty_split(&r.panel);
        known += split.known.iter().filter(|&&k| k).count() as u64;
        unknown += split.unknown.iter().filter(|&&u| u).count() as u64;
        let n = r.panel.grid().epoch_count();
        let mut manual = 0usize;
        for e in 0..n {
            let votes = r.panel.votes(e);
            let total: usize = votes.iter().sum();
            let sq: f64 = votes.iter().map(|&v| (v as f64 / total as f64).powi(2)).sum();
            manual += usize::from(1.0 - sq > 0.6);
        }
        let model = r.model.rows().iter().filter(|row| 1.0 - row.iter().map(|p| p * p).sum::<f64>() > 0.6).count();
        manual_pcts.push(100.0 * manual as f64 / n as f64);
        model_pcts.push(100.0 * model as f64 / n as f64);
    }
    let total = |m: &[[u64; 2]; 2]| m.iter().flatten().sum::<u64>();
    ensure(total(&report.known.matrix) == known && report.known.epochs == known, || {
        format!("known total {} vs mask {known}", total(&report.known.matrix))
    })?;
    ensure(total(&report.unknown.matrix) == unknown && report.unknown.epochs == unknown, || {
        format!("unknown total {} vs mask {unknown}", total(&report.unknown.matrix))
    })?;
    let brute_median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    };
    let (mm, md) = (brute_median(&mut manual_pcts), brute_median(&mut model_pcts));
    ensure(close(report.median_manual_gray_pct, mm, 1e-12) && close(report.median_model_gray_pct, md, 1e-12), || {
        format!("medians {} / {} vs {mm} / {md}", report.median_manual_gray_pct, report.median_model_gray_pct)
    })?;
    let (ck, cu) = (report.known.capture.unwrap_or(0.0), report.unknown.capture.unwrap_or(0.0));
    ensure(ck >= cu, || format!("capture known {ck:.3} < unknown {cu:.3}"))?;
    Ok(format!("known {known}, unknown {unknown}, capture {ck:.3} vs {cu:.3}, medians {mm:.2}% / {md:.2}%"))
}

// ---------------------------------------------------------------------------
// DSP

fn sine(freq: f64, fs: f64, seconds: f64) -> ChannelSignal {
    let n = (fs * seconds) as usize;
    let x = (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin()).collect();
    ChannelSignal::new("sine", fs, x)
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn dsp_suite() -> Outcome {
    let cfg = PreprocConfig::default();
    let fs = 256.0;
    let mid = |x: &[f64]| x[x.len() / 4..3 * x.len() / 4].to_vec();

    let pass = bandpass(&sine(10.0, fs, 60.0), &cfg).map_err(|e| e.to_string())?;
    let gain = rms(&mid(&pass.samples)) * 2f64.sqrt();
    ensure(close(gain, 1.0, 0.01), || format!("10 Hz amplitude {gain}"))?;

    let stop = bandpass(&sine(50.0, fs, 60.0), &cfg).map_err(|e| e.to_string())?;
    let atten_db = 20.0 * (rms(&mid(&stop.samples)) / rms(&mid(&sine(50.0, fs, 60.0).samples))).log10();
    ensure(atten_db <= -20.0, || format!("50 Hz attenuation {atten_db:.1} dB"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raw: Vec<f64> = (0..10_001).map(|_| 40.0 * rng.random::<f64>() - 7.0).collect();
    let norm = iqr_normalize(&ChannelSignal::new("n", fs, raw)).map_err(|e| e.to_string())?;
    let mut sorted = norm.samples.clone();
    sorted.sort_by(f64::total_cmp);
    let med = sorted_quantile(&sorted, 0.5);
    let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
    ensure(med.abs() < 1e-9 && (iqr - 1.0).abs() < 1e-9, || format!("median {med:e}, iqr {iqr}"))?;

    let x = sine(7.0, 64.0, 30.0);
    let same = resample(&x, 64.0);
    ensure(same.samples == x.samples && same.fs == x.fs && rational_ratio(1.0) == (1, 1), || "identity resample changed data".into())?;
    Ok(format!("10 Hz gain {gain:.4}, 50 Hz {atten_db:.1} dB, median {med:.1e}, IQR-1 {:.1e}", iqr - 1.0))
}

// ---------------------------------------------------------------------------
// Gradient check

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for draw in 0..100 {
        let nf = rng.random_range(1..=10);
        let batch = rng.random_range(1..=16);
        let stride = nf + 1;
        let weights: Vec<f64> = (0..N_STAGES * stride).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..batch).map(|_| (0..nf).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..N_STAGES)).collect();
        let (_, analytic) = loss_and_grad(&weights, nf, &refs, &labels);
        let h = 1e-5;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for i in 0..weights.len() {
            let mut w = weights.clone();
            w[i] += h;
            let up = loss_and_grad(&w, nf, &refs, &labels).0;
            w[i] -= 2.0 * h;
            let down = loss_and_grad(&w, nf, &refs, &labels).0;
            let numeric = (up - down) / (2.0 * h);
            diff += (analytic[i] - numeric).powi(2);
            norm += (analytic[i].abs() + numeric.abs()).powi(2);
        }
        let rel = if norm == 0.0 { 0.0 } else { diff.sqrt() / norm.sqrt() };
        ensure(rel < 1e-5, || format!("draw {draw}: relative error {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("100 draws, worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// End to end

struct PipelineRun {
    edf_bytes: Vec<Vec<u8>>,
    weights: Vec<f64>,
    held_out: Vec<Hypnodensity>,
    accuracy: f64,
}

fn pipeline_once() -> Result<PipelineRun, String> {
    let cfg = SynthConfig {
        seed: 2024,
        n_recordings: 16,
        epochs_per_recording: 240,
        signals: Some(SignalConfig::default()),
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).map_err(|e| e.to_string())?;
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap().and_hms_opt(22, 0, 0).unwrap();
    let pre = PreprocConfig::default();
    let mut edf_bytes = Vec::new();
    let mut parsed = Vec::new();
    for r in &ds.recordings {
        let header = header_for(&r.signals, 30.0, &r.recording_id, start).map_err(|e| e.to_string())?;
        let bytes = write_edf(&header, &r.signals).map_err(|e| e.to_string())?;
        parsed.push(parse_edf(&bytes).map_err(|e| e.to_string())?.1);
        edf_bytes.push(bytes);
    }
    let n_train = 12;
    let mut train_set = Vec::new();
    for (r, signals) in ds.recordings.iter().zip(&parsed).take(n_train) {
        let channels = signals
            .iter()
            .map(|s| preprocess(s, &pre, &r.recording_id).map(|e| extract_features(&e)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        train_set.push(LabeledRecording { recording_id: r.recording_id.clone(), channels, labels: r.truth.clone() });
    }
    let model = train(&train_set, None, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let mut held_out = Vec::new();
    let (mut correct, mut total) = (0usize, 0usize);
    for (r, signals) in ds.recordings.iter().zip(&parsed).skip(n_train) {
        let h = stage_recording(&model, signals, &pre, &r.recording_id).map_err(|e| e.to_string())?;
        let pred = argmax_hypnogram(&h);
        for (p, t) in pred.stages().iter().zip(r.truth.stages()) {
            correct += usize::from(p == t);
            total += 1;
        }
        held_out.push(h);
    }
    Ok(PipelineRun { edf_bytes, weights: model.weights.clone(), held_out, accuracy: correct as f64 / total as f64 })
}

fn end_to_end() -> Outcome {
    let a = pipeline_once()?;
    let b = pipeline_once()?;
    ensure(a.edf_bytes == b.edf_bytes && a.weights == b.weights && a.held_out == b.held_out, || {
        "two runs with the same seed differ".into()
    })?;
    ensure(a.accuracy >= 0.70, || format!("held-out accuracy {:.4}", a.accuracy))?;
    Ok(format!("held-out accuracy {:.4}, two runs identical", a.accuracy))
}

// ---------------------------------------------------------------------------
// EDF round trip

fn random_recording(rng: &mut ChaCha8Rng, i: usize) -> Vec<ChannelSignal> {
    let records = rng.random_range(1..=8);
    let n_signals = rng.random_range(1..=4);
    (0..n_signals)
        .map(|s| {
            let fs = [1.0, 16.0, 100.0, 128.0, 200.0, 256.0][rng.random_range(0..6)];
            let scale = 10f64.powf(rng.random_range(-1.0..3.0));
            let offset = rng.random_range(-1.0..1.0) * scale;
            let x = (0..records * fs as usize).map(|_| offset + scale * rng.random_range(-1.0..1.0)).collect();
            ChannelSignal::new(format!("R{i} S{s}"), fs, x)
        })
        .collect()
}

fn edf_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let start = NaiveDate::from_ymd_opt(2010, 6, 1).unwrap().and_hms_opt(8, 30, 0).unwrap();
    let mut samples = 0usize;
    let mut corpus = Vec::new();
    for i in 0..100 {
        let signals = random_recording(&mut rng, i);
        let header = header_for(&signals, 1.0, &format!("rt{i}"), start).map_err(|e| e.to_string())?;
        let bytes = write_edf(&header, &signals).map_err(|e| e.to_string())?;
        let (h, back) = parse_edf(&bytes).map_err(|e| format!("recording {i}: {e}"))?;
        ensure(back.len() == signals.len(), || format!("recording {i}: signal count"))?;
        for ((orig, got), sh) in signals.iter().zip(&back).zip(&h.signals) {
            let step = sh.quantization_step();
            ensure(orig.label == got.label && orig.fs == got.fs && orig.samples.len() == got.samples.len(), || {
                format!("recording {i}: layout of {:?}", orig.label)
            })?;
            let err = orig.samples.iter().zip(&got.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            ensure(err <= step, || format!("recording {i}: error {err} > step {step}"))?;
            samples += orig.samples.len();
        }
        corpus.push((h.header_bytes(), bytes));
    }

    let mut fuzzed = 0;
    for _ in 0..5_000 {
        let (header_len, base) = &corpus[rng.random_range(0..corpus.len())];
        let mut bytes = base.clone();
        match rng.random_range(0..3) {
            0 => {
                for _ in 0..rng.random_range(1..=8) {
                    let at = rng.random_range(0..*header_len);
                    bytes[at] = rng.random();
                }
            }
            1 => {
                let at = rng.random_range(0..*header_len);
                bytes[at] = b"0123456789-+. e"[rng.random_range(0..15)];
            }
            _ => bytes.truncate(rng.random_range(0..bytes.len())),
        }
        let outcome = catch_unwind(AssertUnwindSafe(|| parse_edf(&bytes).map(|_| ())));
        ensure(outcome.is_ok(), || "parser panicked on a fuzzed file".into())?;
        fuzzed += 1;
    }
    Ok(format!("100 recordings / {samples} samples within one step; {fuzzed} fuzzed files, no panic"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria = [
        Criterion { name: "metric formula suite", budget: Duration::from_secs(1), run: metric_formulas },
        Criterion { name: "threshold-0.6 vote table", budget: Duration::from_secs(1), run: vote_table },
        Criterion { name: "consensus equivalence", budget: Duration::from_secs(10), run: consensus_equivalence },
        Criterion { name: "kappa oracle", budget: Duration::from_secs(1), run: kappa_oracle },
        Criterion { name: "exclusion-curve phenomenon", budget: Duration::from_secs(60), run: exclusion_phenomenon },
        Criterion { name: "capture-curve phenomenon", budget: Duration::from_secs(60), run: capture_phenomenon },
        Criterion { name: "gray-agreement report", budget: Duration::from_secs(30), run: gray_agreement_structure },
        Criterion { name: "dsp suite", budget: Duration::from_secs(10), run: dsp_suite },
        Criterion { name: "gradient check", budget: Duration::from_secs(10), run: gradient_check },
        Criterion { name: "end-to-end pipeline", budget: Duration::from_secs(300), run: end_to_end },
        Criterion { name: "edf round trip", budget: Duration::from_secs(60), run: edf_round_trip },
    ];
    // The hook would print panics from the fuzz loop's catch_unwind.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let t0 = Instant::now();
        let result = catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = t0.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, budget {:?}", c.budget))
            }
        });
        match result {
            Ok(detail) => println!("PASS  {:<28} {detail} ({elapsed:.2?})", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<28} {why} ({elapsed:.2?})", c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
