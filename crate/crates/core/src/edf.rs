//! Continuous EDF reading and writing.
//!
//! Layout reference: <https://www.edfplus.info/specs/edf.html>. A 256-byte
//! fixed header is followed by 256 bytes per signal, stored field-by-field
//! across signals, then `n_records` data records of interleaved 16-bit
//! little-endian samples. EDF+ annotation signals are skipped and
//! discontinuous (EDF+D) files are rejected.

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const FIXED_HEADER: usize = 256;
const SIGNAL_HEADER: usize = 256;
const ANNOTATION_LABEL: &str = "EDF Annotations";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdfError {
    #[error("file truncated: need {needed} bytes, have {available}")]
    TruncatedFile { needed: usize, available: usize },
    #[error("malformed header field {field}: {reason}")]
    MalformedHeader { field: &'static str, reason: String },
    #[error("signal {signal}: degenerate calibration (min equals max)")]
    DegenerateCalibration { signal: usize },
    #[error("signal {signal}: value {value} maps outside the digital range")]
    RangeOverflow { signal: usize, value: f64 },
    #[error("discontinuous EDF+ recordings are not supported")]
    Discontinuous,
}

fn malformed(field: &'static str, reason: impl Into<String>) -> EdfError {
    EdfError::MalformedHeader { field, reason: reason.into() }
}

/// One signal's calibration and layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dim: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub reserved: String,
}

impl SignalHeader {
    /// A signal using the full 16-bit digital range.
    pub fn new(
        label: impl Into<String>,
        physical_dim: impl Into<String>,
        physical_min: f64,
        physical_max: f64,
        samples_per_record: usize,
    ) -> Self {
        SignalHeader {
            label: label.into(),
            transducer: String::new(),
            physical_dim: physical_dim.into(),
            physical_min,
            physical_max,
            digital_min: i16::MIN as i32,
            digital_max: i16::MAX as i32,
            prefiltering: String::new(),
            samples_per_record,
            reserved: String::new(),
        }
    }

    pub fn is_annotation(&self) -> bool {
        self.label == ANNOTATION_LABEL
    }

    /// Physical units per digital step.
    pub fn quantization_step(&self) -> f64 {
        ((self.physical_max - self.physical_min) / (self.digital_max - self.digital_min) as f64).abs()
    }

    fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min) as f64
    }

    fn to_physical(&self, digital: i16) -> f64 {
        self.physical_min + (digital as f64 - self.digital_min as f64) * self.gain()
    }

    fn to_digital(&self, signal: usize, value: f64) -> Result<i16, EdfError> {
        let d = ((value - self.physical_min) / self.gain() + self.digital_min as f64).round();
        let (lo, hi) = (self.digital_min.min(self.digital_max), self.digital_min.max(self.digital_max));
        if !d.is_finite() || d < lo as f64 || d > hi as f64 {
            return Err(EdfError::RangeOverflow { signal, value });
        }
        Ok(d as i16)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start: NaiveDateTime,
    pub reserved: String,
    pub n_records: usize,
    pub record_duration_s: f64,
    pub signals: Vec<SignalHeader>,
}

impl EdfHeader {
    pub fn header_bytes(&self) -> usize {
        FIXED_HEADER + SIGNAL_HEADER * self.signals.len()
    }

    fn record_bytes(&self) -> Option<usize> {
        self.signals.iter().try_fold(0usize, |acc, s| acc.checked_add(s.samples_per_record.checked_mul(2)?))
    }
}

/// A calibrated channel in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSignal {
    pub label: String,
    pub fs: f64,
    pub samples: Vec<f64>,
}

impl ChannelSignal {
    pub fn new(label: impl Into<String>, fs: f64, samples: Vec<f64>) -> Self {
        ChannelSignal { label: label.into(), fs, samples }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn field(&mut self, width: usize, name: &'static str) -> Result<&'a str, EdfError> {
        let end = self.pos + width;
        let raw = self
            .bytes
            .get(self.pos..end)
            .ok_or(EdfError::TruncatedFile { needed: end, available: self.bytes.len() })?;
        self.pos = end;
        if !raw.iter().all(|b| (0x20..=0x7e).contains(b)) {
            return Err(malformed(name, "non-printable ASCII"));
        }
        // Printable ASCII is valid UTF-8.
        Ok(std::str::from_utf8(raw).expect("ascii").trim_end())
    }

    fn number<T: std::str::FromStr>(&mut self, width: usize, name: &'static str) -> Result<T, EdfError> {
        let text = self.field(width, name)?.trim();
        if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) {
            return Err(malformed(name, format!("not a number: {text:?}")));
        }
        text.parse().map_err(|_| malformed(name, format!("not a number: {text:?}")))
    }
}

fn parse_start(date: &str, time: &str) -> Result<NaiveDateTime, EdfError> {
    let parts = |s: &str, field| -> Result<[u32; 3], EdfError> {
        let v: Vec<&str> = s.split('.').collect();
        if v.len() != 3 || v.iter().any(|p| p.len() != 2 || !p.bytes().all(|b| b.is_ascii_digit())) {
            return Err(malformed(field, format!("expected nn.nn.nn, got {s:?}")));
        }
        Ok([v[0].parse().unwrap(), v[1].parse().unwrap(), v[2].parse().unwrap()])
    };
    let [d, m, y] = parts(date, "startdate")?;
    let [hh, mm, ss] = parts(time, "starttime")?;
    let year = if y >= 85 { 1900 + y } else { 2000 + y };
    NaiveDate::from_ymd_opt(year as i32, m, d)
        .and_then(|date| date.and_hms_opt(hh, mm, ss))
        .ok_or_else(|| malformed("startdate", format!("invalid date/time {date} {time}")))
}

/// Parses a complete EDF file held in memory.
pub fn parse_edf(bytes: &[u8]) -> Result<(EdfHeader, Vec<ChannelSignal>), EdfError> {
    if bytes.len() < FIXED_HEADER {
        return Err(EdfError::TruncatedFile { needed: FIXED_HEADER, available: bytes.len() });
    }
    let mut cur = Cursor { bytes, pos: 0 };
    let version = cur.field(8, "version")?.to_string();
    let patient_id = cur.field(80, "patient")?.to_string();
    let recording_id = cur.field(80, "recording")?.to_string();
    let date = cur.field(8, "startdate")?;
    let time = cur.field(8, "starttime")?;
    let start = parse_start(date, time)?;
    let header_len: usize = cur.number(8, "header bytes")?;
    let reserved = cur.field(44, "reserved")?.to_string();
    if reserved.starts_with("EDF+D") {
        return Err(EdfError::Discontinuous);
    }
    let n_records: i64 = cur.number(8, "number of records")?;
    if n_records < 1 {
        return Err(malformed("number of records", format!("{n_records} (must be at least 1)")));
    }
    let record_duration_s: f64 = cur.number(8, "record duration")?;
    if !(record_duration_s.is_finite() && record_duration_s > 0.0) {
        return Err(malformed("record duration", format!("{record_duration_s}")));
    }
    let ns: usize = cur.number(4, "number of signals")?;
    if ns == 0 {
        return Err(malformed("number of signals", "zero signals"));
    }
    let expected_len = ns
        .checked_mul(SIGNAL_HEADER)
        .and_then(|v| v.checked_add(FIXED_HEADER))
        .ok_or_else(|| malformed("number of signals", "too large"))?;
    if header_len != expected_len {
        return Err(malformed("header bytes", format!("{header_len}, expected {expected_len}")));
    }
    if bytes.len() < expected_len {
        return Err(EdfError::TruncatedFile { needed: expected_len, available: bytes.len() });
    }

    let texts = |cur: &mut Cursor, width, name| -> Result<Vec<String>, EdfError> {
        (0..ns).map(|_| cur.field(width, name).map(str::to_string)).collect()
    };
    let labels = texts(&mut cur, 16, "label")?;
    let transducers = texts(&mut cur, 80, "transducer")?;
    let dims = texts(&mut cur, 8, "physical dimension")?;
    let pmins: Vec<f64> = (0..ns).map(|_| cur.number(8, "physical minimum")).collect::<Result<_, _>>()?;
    let pmaxs: Vec<f64> = (0..ns).map(|_| cur.number(8, "physical maximum")).collect::<Result<_, _>>()?;
    let dmins: Vec<i32> = (0..ns).map(|_| cur.number(8, "digital minimum")).collect::<Result<_, _>>()?;
    let dmaxs: Vec<i32> = (0..ns).map(|_| cur.number(8, "digital maximum")).collect::<Result<_, _>>()?;
    let prefilters = texts(&mut cur, 80, "prefiltering")?;
    let sprs: Vec<usize> = (0..ns).map(|_| cur.number(8, "samples per record")).collect::<Result<_, _>>()?;
    let reserveds = texts(&mut cur, 32, "signal reserved")?;

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let sig = SignalHeader {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dim: dims[i].clone(),
            physical_min: pmins[i],
            physical_max: pmaxs[i],
            digital_min: dmins[i],
            digital_max: dmaxs[i],
            prefiltering: prefilters[i].clone(),
            samples_per_record: sprs[i],
            reserved: reserveds[i].clone(),
        };
        if sig.samples_per_record == 0 {
            return Err(malformed("samples per record", format!("signal {i} has zero samples")));
        }
        if !sig.is_annotation() {
            if !(sig.physical_min.is_finite() && sig.physical_max.is_finite()) {
                return Err(malformed("physical minimum", format!("signal {i} not finite")));
            }
            if sig.physical_min == sig.physical_max || sig.digital_min == sig.digital_max {
                return Err(EdfError::DegenerateCalibration { signal: i });
            }
            let i16_range = i16::MIN as i32..=i16::MAX as i32;
            if !i16_range.contains(&sig.digital_min) || !i16_range.contains(&sig.digital_max) {
                return Err(malformed("digital minimum", format!("signal {i} outside 16-bit range")));
            }
        }
        signals.push(sig);
    }

    let header = EdfHeader {
        version,
        patient_id,
        recording_id,
        start,
        reserved,
        n_records: n_records as usize,
        record_duration_s,
        signals,
    };

    let record_bytes = header.record_bytes().ok_or_else(|| malformed("samples per record", "too large"))?;
    let needed = record_bytes
        .checked_mul(header.n_records)
        .and_then(|v| v.checked_add(expected_len))
        .ok_or_else(|| malformed("number of records", "data size overflows"))?;
    if bytes.len() < needed {
        return Err(EdfError::TruncatedFile { needed, available: bytes.len() });
    }
    if bytes.len() > needed {
        log::warn!("ignoring {} trailing bytes after the last data record", bytes.len() - needed);
    }

    let mut data: Vec<Vec<f64>> = header
        .signals
        .iter()
        .map(|s| if s.is_annotation() { Vec::new() } else { Vec::with_capacity(s.samples_per_record * header.n_records) })
        .collect();
    let mut pos = expected_len;
    for _ in 0..header.n_records {
        for (sig, out) in header.signals.iter().zip(data.iter_mut()) {
            let chunk = &bytes[pos..pos + 2 * sig.samples_per_record];
            pos += chunk.len();
            if sig.is_annotation() {
                continue;
            }
            out.extend(chunk.chunks_exact(2).map(|b| sig.to_physical(i16::from_le_bytes([b[0], b[1]]))));
        }
    }

    let mut channels = Vec::with_capacity(ns);
    for (sig, samples) in header.signals.iter().zip(data) {
        if sig.is_annotation() {
            log::warn!("skipping annotation signal {:?}", sig.label);
            continue;
        }
        channels.push(ChannelSignal::new(
            sig.label.clone(),
            sig.samples_per_record as f64 / header.record_duration_s,
            samples,
        ));
    }
    Ok((header, channels))
}

fn put_text(out: &mut Vec<u8>, text: &str, width: usize, name: &'static str) -> Result<(), EdfError> {
    if text.len() > width || !text.bytes().all(|b| (0x20..=0x7e).contains(&b)) {
        return Err(malformed(name, format!("{text:?} does not fit {width} printable ASCII bytes")));
    }
    out.extend_from_slice(text.as_bytes());
    out.extend(std::iter::repeat_n(b' ', width - text.len()));
    Ok(())
}

/// Shortest decimal rendering of `value` that fits in `width` characters.
fn format_number(value: f64, width: usize, name: &'static str) -> Result<String, EdfError> {
    if !value.is_finite() {
        return Err(malformed(name, format!("{value} is not finite")));
    }
    let plain = format!("{value}");
    if plain.len() <= width {
        return Ok(plain);
    }
    for decimals in (0..width).rev() {
        let s = format!("{value:.decimals$}");
        if s.len() <= width {
            let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
            return Ok(s);
        }
    }
    Err(malformed(name, format!("{value} does not fit {width} characters")))
}

/// Header for `signals` cut into records of `record_duration_s` seconds.
/// Physical ranges are the data range widened by 1% on each side and rounded
/// outward to whole units.
pub fn header_for(
    signals: &[ChannelSignal],
    record_duration_s: f64,
    recording_id: &str,
    start: NaiveDateTime,
) -> Result<EdfHeader, EdfError> {
    let mut headers = Vec::with_capacity(signals.len());
    let mut n_records = None;
    for s in signals {
        let per_record = s.fs * record_duration_s;
        if (per_record - per_record.round()).abs() > 1e-9 || per_record < 1.0 {
            return Err(malformed("samples per record", format!("{} Hz does not fill whole samples", s.fs)));
        }
        let per_record = per_record.round() as usize;
        if s.samples.len() % per_record != 0 {
            return Err(malformed("number of records", format!("{:?} is not a whole number of records", s.label)));
        }
        let records = s.samples.len() / per_record;
        if *n_records.get_or_insert(records) != records {
            return Err(malformed("number of records", "signals differ in duration"));
        }
        let (lo, hi) = s.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let pad = ((hi - lo) * 0.01).max(1.0);
        headers.push(SignalHeader::new(s.label.clone(), "uV", (lo - pad).floor(), (hi + pad).ceil(), per_record));
    }
    Ok(EdfHeader {
        version: "0".into(),
        patient_id: "X X X X".into(),
        recording_id: format!("Startdate X X X {recording_id}"),
        start,
        reserved: String::new(),
        n_records: n_records.unwrap_or(0),
        record_duration_s,
        signals: headers,
    })
}

/// Serializes a header and its signals to EDF bytes.
pub fn write_edf(header: &EdfHeader, signals: &[ChannelSignal]) -> Result<Vec<u8>, EdfError> {
    let ns = header.signals.len();
    if ns == 0 {
        return Err(malformed("number of signals", "zero signals"));
    }
    if signals.len() != ns {
        return Err(malformed("number of signals", format!("header lists {ns}, got {} signals", signals.len())));
    }
    if header.n_records == 0 || !(header.record_duration_s > 0.0) {
        return Err(malformed("number of records", "need at least one record of positive duration"));
    }
    for (i, (sh, sig)) in header.signals.iter().zip(signals).enumerate() {
        if sh.physical_min == sh.physical_max || sh.digital_min == sh.digital_max {
            return Err(EdfError::DegenerateCalibration { signal: i });
        }
        if sig.samples.len() != sh.samples_per_record * header.n_records {
            return Err(malformed(
                "samples per record",
                format!("signal {i}: {} samples, expected {}", sig.samples.len(), sh.samples_per_record * header.n_records),
            ));
        }
    }

    let start = header.start;
    if !(1985..=2084).contains(&start.year()) {
        return Err(malformed("startdate", format!("year {} not representable", start.year())));
    }
    let mut out = Vec::with_capacity(header.header_bytes());
    put_text(&mut out, &header.version, 8, "version")?;
    put_text(&mut out, &header.patient_id, 80, "patient")?;
    put_text(&mut out, &header.recording_id, 80, "recording")?;
    let date = format!("{:02}.{:02}.{:02}", start.day(), start.month(), start.year() % 100);
    put_text(&mut out, &date, 8, "startdate")?;
    let time = format!("{:02}.{:02}.{:02}", start.hour(), start.minute(), start.second());
    put_text(&mut out, &time, 8, "starttime")?;
    put_text(&mut out, &header.header_bytes().to_string(), 8, "header bytes")?;
    put_text(&mut out, &header.reserved, 44, "reserved")?;
    put_text(&mut out, &header.n_records.to_string(), 8, "number of records")?;
    put_text(&mut out, &format_number(header.record_duration_s, 8, "record duration")?, 8, "record duration")?;
    put_text(&mut out, &ns.to_string(), 4, "number of signals")?;

    let sigs = &header.signals;
    for s in sigs {
        put_text(&mut out, &s.label, 16, "label")?;
    }
    for s in sigs {
        put_text(&mut out, &s.transducer, 80, "transducer")?;
    }
    for s in sigs {
        put_text(&mut out, &s.physical_dim, 8, "physical dimension")?;
    }
    for s in sigs {
        put_text(&mut out, &format_number(s.physical_min, 8, "physical minimum")?, 8, "physical minimum")?;
    }
    for s in sigs {
        put_text(&mut out, &format_number(s.physical_max, 8, "physical maximum")?, 8, "physical maximum")?;
    }
    for s in sigs {
        put_text(&mut out, &s.digital_min.to_string(), 8, "digital minimum")?;
    }
    for s in sigs {
        put_text(&mut out, &s.digital_max.to_string(), 8, "digital maximum")?;
    }
    for s in sigs {
        put_text(&mut out, &s.prefiltering, 80, "prefiltering")?;
    }
    for s in sigs {
        put_text(&mut out, &s.samples_per_record.to_string(), 8, "samples per record")?;
    }
    for s in sigs {
        put_text(&mut out, &s.reserved, 32, "signal reserved")?;
    }
    debug_assert_eq!(out.len(), header.header_bytes());

    for r in 0..header.n_records {
        for (i, (sh, sig)) in sigs.iter().zip(signals).enumerate() {
            let spr = sh.samples_per_record;
            for &v in &sig.samples[r * spr..(r + 1) * spr] {
                out.extend_from_slice(&sh.to_digital(i, v)?.to_le_bytes());
            }
        }
    }
    Ok(out)
}
