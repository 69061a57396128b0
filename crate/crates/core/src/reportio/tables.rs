use csv::{ReaderBuilder, StringRecord};

use super::ReportioError;
use crate::hypno::{validate_row, EpochGrid, HypnoError, Hypnodensity, Hypnogram, Stage, N_STAGES};
use crate::uncertainty::UncertaintySeries;

pub const HYPNODENSITY_HEADER: [&str; 6] = ["epoch", "p_wake", "p_n1", "p_n2", "p_n3", "p_rem"];
pub const HYPNOGRAM_HEADER: [&str; 3] = ["epoch", "stage", "uncertain"];
pub const MASK_HEADER: [&str; 2] = ["epoch", "gray"];

/// Reads a headed CSV strictly: the header must match byte for byte and
/// every row must have the header's width. Returns `(line, record)` pairs.
fn read_table(text: &str, header: &[&str]) -> Result<Vec<(usize, StringRecord)>, ReportioError> {
    let mut reader = ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r.map_err(|e| ReportioError::Schema(e.to_string()))?,
        None => return Err(ReportioError::Schema("empty file".into())),
    };
    if first.iter().ne(header.iter().copied()) {
        return Err(ReportioError::Schema(format!("header {:?}, expected {:?}", first.iter().collect::<Vec<_>>(), header)));
    }
    let mut out = Vec::new();
    for r in records {
        let r = r.map_err(|e| ReportioError::Schema(e.to_string()))?;
        let line = r.position().map_or(0, |p| p.line() as usize);
        if r.len() != header.len() {
            return Err(ReportioError::Schema(format!("line {line}: {} fields, expected {}", r.len(), header.len())));
        }
        out.push((line, r));
    }
    if out.is_empty() {
        return Err(ReportioError::Schema("no data rows".into()));
    }
    Ok(out)
}

fn check_epoch(field: &str, expected: usize) -> Result<(), ReportioError> {
    match field.parse::<usize>() {
        Ok(v) if v == expected && field == v.to_string() => Ok(()),
        _ => Err(ReportioError::NonContiguousEpochs { expected, found: field.to_string() }),
    }
}

fn join(header: &[&str]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    s
}

/// One row per epoch; probabilities in shortest round-trip decimal form.
pub fn write_hypnodensity_csv(h: &Hypnodensity) -> String {
    let mut out = join(&HYPNODENSITY_HEADER);
    for (e, row) in h.rows().iter().enumerate() {
        out.push_str(&e.to_string());
        for p in row {
            out.push_str(&format!(",{p:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_hypnodensity_csv(text: &str, recording_id: &str) -> Result<Hypnodensity, ReportioError> {
    let records = read_table(text, &HYPNODENSITY_HEADER)?;
    let mut rows = Vec::with_capacity(records.len());
    for (e, (line, r)) in records.iter().enumerate() {
        check_epoch(&r[0], e)?;
        let mut row = [0.0; N_STAGES];
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = r[k + 1]
                .parse()
                .map_err(|_| ReportioError::Schema(format!("line {line}: bad probability {:?}", &r[k + 1])))?;
        }
        validate_row(e, &row).map_err(|_| ReportioError::SimplexViolation { epoch: e })?;
        rows.push(row);
    }
    Ok(Hypnodensity::new(EpochGrid::new(recording_id, rows.len())?, rows)?)
}

pub fn write_hypnogram_csv(h: &Hypnogram) -> String {
    let mut out = join(&HYPNOGRAM_HEADER);
    for (e, (s, &u)) in h.stages().iter().zip(h.uncertain()).enumerate() {
        out.push_str(&format!("{e},{},{}\n", s.token(), u8::from(u)));
    }
    out
}

pub fn read_hypnogram_csv(text: &str, recording_id: &str) -> Result<Hypnogram, ReportioError> {
    let records = read_table(text, &HYPNOGRAM_HEADER)?;
    let mut stages = Vec::with_capacity(records.len());
    let mut uncertain = Vec::with_capacity(records.len());
    for (e, (line, r)) in records.iter().enumerate() {
        check_epoch(&r[0], e)?;
        let stage = Stage::from_token(&r[1])
            .ok_or_else(|| ReportioError::UnknownStageToken { line: *line, token: r[1].to_string() })?;
        let flag = match &r[2] {
            "0" => false,
            "1" => true,
            other => return Err(ReportioError::Schema(format!("line {line}: uncertain must be 0 or 1, got {other:?}"))),
        };
        stages.push(stage);
        uncertain.push(flag);
    }
    let grid = EpochGrid::new(recording_id, stages.len())?;
    Hypnogram::new(grid, stages, uncertain).map_err(|e| match e {
        HypnoError::UncertainUnscored { epoch } => {
            ReportioError::Schema(format!("epoch {epoch}: uncertain flag on an unscored epoch"))
        }
        other => other.into(),
    })
}

pub fn write_mask_csv(mask: &[bool]) -> String {
    let mut out = join(&MASK_HEADER);
    for (e, &g) in mask.iter().enumerate() {
        out.push_str(&format!("{e},{}\n", u8::from(g)));
    }
    out
}

pub fn read_mask_csv(text: &str) -> Result<Vec<bool>, ReportioError> {
    read_table(text, &MASK_HEADER)?
        .iter()
        .enumerate()
        .map(|(e, (line, r))| {
            check_epoch(&r[0], e)?;
            match &r[1] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(ReportioError::Schema(format!("line {line}: gray must be 0 or 1, got {other:?}"))),
            }
        })
        .collect()
}

/// `epoch,<metric token>` with one value per epoch.
pub fn write_uncertainty_csv(series: &UncertaintySeries) -> String {
    let mut out = format!("epoch,{}\n", series.metric().token());
    for (e, v) in series.values().iter().enumerate() {
        out.push_str(&format!("{e},{v:?}\n"));
    }
    out
}
