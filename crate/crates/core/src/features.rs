//! Per-call features: energy-threshold silence segmentation, segment
//! timelines, the four percentage features and the CSV interchange formats.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the "segments exactly partition the call" invariant.
pub const PARTITION_TOL: f64 = 1e-6;
/// Tolerance for "fractions sum to 1" on CSV ingestion.
pub const CSV_SUM_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty audio input")]
    EmptyAudio,
    #[error("audio shorter than one frame")]
    TooShort,
    #[error("non-finite sample in audio input")]
    NonFiniteSample,
    #[error("sample rate must be positive")]
    BadSampleRate,
    #[error("invalid timeline for call {call_id}: {reason}")]
    InvalidTimeline { call_id: String, reason: String },
    #[error("invalid feature vector for call {call_id}: {reason}")]
    InvalidFeature { call_id: String, reason: String },
    #[error("csv parse error at row {row}: {reason}")]
    CsvRow { row: usize, reason: String },
    #[error("csv header mismatch: expected `{expected}`")]
    CsvHeader { expected: &'static str },
    #[error("duplicate call_id {0}")]
    DuplicateCallId(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("wav error: {0}")]
    Wav(String),
    #[error("unsupported wav format: need 16-bit PCM mono, sample rate >= 8000 Hz ({0})")]
    UnsupportedWav(String),
}

/// Segment class of a homogeneous run of audio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegClass {
    Speech,
    Music,
    Noise,
    Silence,
}

impl SegClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SegClass::Speech => "speech",
            SegClass::Music => "music",
            SegClass::Noise => "noise",
            SegClass::Silence => "silence",
        }
    }

    pub fn parse(s: &str) -> Option<SegClass> {
        match s {
            "speech" => Some(SegClass::Speech),
            "music" => Some(SegClass::Music),
            "noise" => Some(SegClass::Noise),
            "silence" => Some(SegClass::Silence),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub class: SegClass,
}

/// Labeled, time-ordered homogeneous segments of one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTimeline {
    pub call_id: String,
    pub duration: f64,
    pub segments: Vec<Segment>,
}

impl SegmentTimeline {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let fail = |reason: String| FeatureError::InvalidTimeline {
            call_id: self.call_id.clone(),
            reason,
        };
        if !(self.duration > 0.0) {
            return Err(fail(format!("duration {} not positive", self.duration)));
        }
        if self.segments.is_empty() {
            return Err(fail("no segments".into()));
        }
        let first = &self.segments[0];
        if first.start.abs() > PARTITION_TOL {
            return Err(fail(format!("first segment starts at {}", first.start)));
        }
        let last = self.segments.last().unwrap();
        if (last.end - self.duration).abs() > PARTITION_TOL {
            return Err(fail(format!(
                "last segment ends at {} but duration is {}",
                last.end, self.duration
            )));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.start < seg.end) {
                return Err(fail(format!("segment {i} has start >= end")));
            }
            if i + 1 < self.segments.len() {
                let next = &self.segments[i + 1];
                if (seg.end - next.start).abs() > PARTITION_TOL {
                    return Err(fail(format!(
                        "gap/overlap between segments {i} and {}",
                        i + 1
                    )));
                }
                if seg.class == next.class {
                    return Err(fail(format!(
                        "adjacent segments {i} and {} share class {}",
                        i + 1,
                        seg.class.as_str()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The four per-call fractions, with optional label and date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub call_id: String,
    pub duration: f64,
    pub pct_speech: f64,
    pub pct_music: f64,
    pub pct_noise: f64,
    pub pct_silence: f64,
    pub label: Option<u8>,
    pub date: Option<NaiveDate>,
}

impl FeatureVector {
    pub fn fractions(&self) -> [f64; 4] {
        [
            self.pct_speech,
            self.pct_music,
            self.pct_noise,
            self.pct_silence,
        ]
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let fail = |reason: String| FeatureError::InvalidFeature {
            call_id: self.call_id.clone(),
            reason,
        };
        for (name, v) in [
            ("pct_speech", self.pct_speech),
            ("pct_music", self.pct_music),
            ("pct_noise", self.pct_noise),
            ("pct_silence", self.pct_silence),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(fail(format!("{name} = {v} outside [0,1]")));
            }
        }
        let sum: f64 = self.fractions().iter().sum();
        if (sum - 1.0).abs() > CSV_SUM_TOL {
            return Err(fail(format!("fractions sum to {sum}")));
        }
        if let Some(l) = self.label {
            if l > 1 {
                return Err(fail(format!("label {l} outside {{0,1}}")));
            }
        }
        Ok(())
    }
}

/// A collection of feature vectors with unique call ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<FeatureVector>,
    pub labeled_count: usize,
}

impl Dataset {
    pub fn new(rows: Vec<FeatureVector>) -> Result<Dataset, FeatureError> {
        let mut ids = HashSet::with_capacity(rows.len());
        for row in &rows {
            if !ids.insert(row.call_id.clone()) {
                return Err(FeatureError::DuplicateCallId(row.call_id.clone()));
            }
        }
        let labeled_count = rows.iter().filter(|r| r.label.is_some()).count();
        Ok(Dataset {
            rows,
            labeled_count,
        })
    }
}

/// Frame/threshold settings for the energy silence segmenter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilenceConfig {
    pub frame_len_s: f64,
    pub hop_s: f64,
    /// Absolute RMS floor relative to full scale (samples in [-1, 1]).
    pub absolute_floor: f64,
    /// Relative factor applied to the median frame RMS.
    pub rel_factor: f64,
    /// Runs shorter than this are merged into a neighbor.
    pub min_segment_s: f64,
}

impl Default for SilenceConfig {
    fn default() -> Self {
        SilenceConfig {
            frame_len_s: 0.025,
            hop_s: 0.010,
            absolute_floor: 1e-4,
            rel_factor: 0.1,
            min_segment_s: 0.2,
        }
    }
}

/// Two-class (silence / speech) energy segmentation.
///
/// A frame is silent iff its RMS energy is below
/// `max(absolute_floor, rel_factor * median frame RMS)`. Frame decisions
/// are smoothed by merging runs shorter than `min_segment_s` into the
/// neighbor with the longer adjacent run (ties merge left). All non-silent
/// time is labeled speech; music/noise discrimination is not attempted here.
pub fn segment_silence(
    samples: &[f64],
    sample_rate: u32,
    cfg: &SilenceConfig,
) -> Result<SegmentTimeline, FeatureError> {
    segment_silence_named(samples, sample_rate, cfg, "call")
}

pub fn segment_silence_named(
    samples: &[f64],
    sample_rate: u32,
    cfg: &SilenceConfig,
    call_id: &str,
) -> Result<SegmentTimeline, FeatureError> {
    if sample_rate == 0 {
        return Err(FeatureError::BadSampleRate);
    }
    if samples.is_empty() {
        return Err(FeatureError::EmptyAudio);
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(FeatureError::NonFiniteSample);
    }
    let frame_len = ((cfg.frame_len_s * sample_rate as f64).round() as usize).max(1);
    let hop = ((cfg.hop_s * sample_rate as f64).round() as usize).max(1);
    if samples.len() < frame_len {
        return Err(FeatureError::TooShort);
    }
    let duration = samples.len() as f64 / sample_rate as f64;

    let n_frames = (samples.len() - frame_len) / hop + 1;
    let mut rms = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let frame = &samples[i * hop..i * hop + frame_len];
        let energy: f64 = frame.iter().map(|s| s * s).sum::<f64>() / frame_len as f64;
        rms.push(energy.sqrt());
    }
    let mut sorted = rms.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = if n_frames % 2 == 1 {
        sorted[n_frames / 2]
    } else {
        0.5 * (sorted[n_frames / 2 - 1] + sorted[n_frames / 2])
    };
    let threshold = cfg.absolute_floor.max(cfg.rel_factor * median);
    let silent: Vec<bool> = rms.iter().map(|&r| r < threshold).collect();

    // Runs of identical frame decisions; run lengths counted in frames.
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &s in &silent {
        match runs.last_mut() {
            Some((cls, len)) if *cls == s => *len += 1,
            _ => runs.push((s, 1)),
        }
    }

    let min_frames = (cfg.min_segment_s / cfg.hop_s).round() as usize;
    smooth_runs(&mut runs, min_frames);

    // Frame i covers [i*hop, (i+1)*hop); the last run extends to the call end.
    let mut segments = Vec::with_capacity(runs.len());
    let hop_s = hop as f64 / sample_rate as f64;
    let mut frame_idx = 0usize;
    for (ri, &(is_silent, len)) in runs.iter().enumerate() {
        let start = frame_idx as f64 * hop_s;
        frame_idx += len;
        let end = if ri + 1 == runs.len() {
            duration
        } else {
            frame_idx as f64 * hop_s
        };
        segments.push(Segment {
            start,
            end,
            class: if is_silent {
                SegClass::Silence
            } else {
                SegClass::Speech
            },
        });
    }

    let timeline = SegmentTimeline {
        call_id: call_id.to_string(),
        duration,
        segments,
    };
    timeline.validate()?;
    Ok(timeline)
}

/// Merge runs shorter than `min_frames` into the neighbor with the longer
/// adjacent run; ties merge left. Shortest run first.
fn smooth_runs(runs: &mut Vec<(bool, usize)>, min_frames: usize) {
    loop {
        if runs.len() <= 1 {
            return;
        }
        let mut target: Option<usize> = None;
        for (i, &(_, len)) in runs.iter().enumerate() {
            if len < min_frames {
                match target {
                    Some(t) if runs[t].1 <= len => {}
                    _ => target = Some(i),
                }
            }
        }
        let Some(i) = target else { return };
        let merge_left = if i == 0 {
            false
        } else if i + 1 == runs.len() {
            true
        } else {
            runs[i - 1].1 >= runs[i + 1].1
        };
        if merge_left {
            runs[i - 1].1 += runs[i].1;
            runs.remove(i);
        } else {
            runs[i + 1].1 += runs[i].1;
            runs.remove(i);
        }
        // Coalesce any equal-class neighbors the merge created.
        let mut j = 0;
        while j + 1 < runs.len() {
            if runs[j].0 == runs[j + 1].0 {
                runs[j].1 += runs[j + 1].1;
                runs.remove(j + 1);
            } else {
                j += 1;
            }
        }
    }
}

/// Per-class time fractions of a timeline.
pub fn compute_features(timeline: &SegmentTimeline) -> Result<FeatureVector, FeatureError> {
    timeline.validate()?;
    let mut totals = [0.0f64; 4];
    for seg in &timeline.segments {
        let idx = match seg.class {
            SegClass::Speech => 0,
            SegClass::Music => 1,
            SegClass::Noise => 2,
            SegClass::Silence => 3,
        };
        totals[idx] += seg.end - seg.start;
    }
    let fv = FeatureVector {
        call_id: timeline.call_id.clone(),
        duration: timeline.duration,
        pct_speech: totals[0] / timeline.duration,
        pct_music: totals[1] / timeline.duration,
        pct_noise: totals[2] / timeline.duration,
        pct_silence: totals[3] / timeline.duration,
        label: None,
        date: None,
    };
    Ok(fv)
}

pub const FEATURE_CSV_HEADER: &str =
    "call_id,duration_s,pct_speech,pct_music,pct_noise,pct_silence,label,date";
pub const TIMELINE_CSV_HEADER: &str = "call_id,start_s,end_s,class";

pub fn write_feature_csv<W: Write>(dataset: &Dataset, mut out: W) -> Result<(), FeatureError> {
    writeln!(out, "{FEATURE_CSV_HEADER}")?;
    for row in &dataset.rows {
        let label = row.label.map(|l| l.to_string()).unwrap_or_default();
        let date = row.date.map(|d| d.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            row.call_id,
            row.duration,
            row.pct_speech,
            row.pct_music,
            row.pct_noise,
            row.pct_silence,
            label,
            date
        )?;
    }
    Ok(())
}

pub fn load_feature_csv<R: Read>(source: R) -> Result<Dataset, FeatureError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    {
        let header = reader.headers()?;
        let expected: Vec<&str> = FEATURE_CSV_HEADER.split(',').collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(FeatureError::CsvHeader {
                expected: FEATURE_CSV_HEADER,
            });
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2; // 1-based, after header
        let record = record?;
        let fail = |reason: String| FeatureError::CsvRow {
            row: row_no,
            reason,
        };
        let num = |idx: usize, name: &str| -> Result<f64, FeatureError> {
            record[idx]
                .parse::<f64>()
                .map_err(|_| fail(format!("non-numeric {name}: `{}`", &record[idx])))
        };
        let label = match &record[6] {
            "" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => return Err(fail(format!("label `{other}` not in {{0,1}}"))),
        };
        let date = match &record[7] {
            "" => None,
            s => Some(
                s.parse::<NaiveDate>()
                    .map_err(|_| fail(format!("bad date `{s}`")))?,
            ),
        };
        let fv = FeatureVector {
            call_id: record[0].to_string(),
            duration: num(1, "duration_s")?,
            pct_speech: num(2, "pct_speech")?,
            pct_music: num(3, "pct_music")?,
            pct_noise: num(4, "pct_noise")?,
            pct_silence: num(5, "pct_silence")?,
            label,
            date,
        };
        fv.validate().map_err(|e| fail(e.to_string()))?;
        rows.push(fv);
    }
    Dataset::new(rows)
}

pub fn write_timeline_csv<W: Write>(
    timelines: &[SegmentTimeline],
    mut out: W,
) -> Result<(), FeatureError> {
    writeln!(out, "{TIMELINE_CSV_HEADER}")?;
    for tl in timelines {
        for seg in &tl.segments {
            writeln!(
                out,
                "{},{:.6},{:.6},{}",
                tl.call_id,
                seg.start,
                seg.end,
                seg.class.as_str()
            )?;
        }
    }
    Ok(())
}

/// Read timelines grouped by call_id; each call's duration is its last
/// segment end. Every timeline is validated.
pub fn load_timeline_csv<R: Read>(source: R) -> Result<Vec<SegmentTimeline>, FeatureError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    {
        let header = reader.headers()?;
        let expected: Vec<&str> = TIMELINE_CSV_HEADER.split(',').collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(FeatureError::CsvHeader {
                expected: TIMELINE_CSV_HEADER,
            });
        }
    }
    let mut timelines: Vec<SegmentTimeline> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2;
        let record = record?;
        let fail = |reason: String| FeatureError::CsvRow {
            row: row_no,
            reason,
        };
        let start = record[1]
            .parse::<f64>()
            .map_err(|_| fail(format!("non-numeric start_s `{}`", &record[1])))?;
        let end = record[2]
            .parse::<f64>()
            .map_err(|_| fail(format!("non-numeric end_s `{}`", &record[2])))?;
        let class = SegClass::parse(&record[3])
            .ok_or_else(|| fail(format!("unknown class `{}`", &record[3])))?;
        let call_id = record[0].to_string();
        let seg = Segment { start, end, class };
        match timelines.last_mut() {
            Some(tl) if tl.call_id == call_id => {
                tl.segments.push(seg);
                tl.duration = end;
            }
            _ => {
                if timelines.iter().any(|tl| tl.call_id == call_id) {
                    return Err(fail(format!(
                        "segments of call {call_id} are not contiguous in the file"
                    )));
                }
                timelines.push(SegmentTimeline {
                    call_id,
                    duration: end,
                    segments: vec![seg],
                });
            }
        }
    }
    for tl in &timelines {
        tl.validate()?;
    }
    Ok(timelines)
}

/// Read a 16-bit PCM mono WAV file into [-1, 1] samples.
pub fn load_wav(path: &Path) -> Result<(Vec<f64>, u32), FeatureError> {
    let reader = hound::WavReader::open(path).map_err(|e| FeatureError::Wav(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(FeatureError::UnsupportedWav(format!(
            "{} channels",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(FeatureError::UnsupportedWav(format!(
            "{:?} {} bits",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.sample_rate < 8000 {
        return Err(FeatureError::UnsupportedWav(format!(
            "sample rate {} Hz",
            spec.sample_rate
        )));
    }
    let samples: Result<Vec<i16>, _> = reader.into_samples().collect();
    let samples = samples.map_err(|e| FeatureError::Wav(e.to_string()))?;
    let scaled = samples.iter().map(|&s| s as f64 / 32768.0).collect();
    Ok((scaled, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine(freq: f64, dur: f64, rate: u32, amp: f64) -> Vec<f64> {
        (0..(dur * rate as f64) as usize)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect()
    }

    #[test]
    fn all_zero_audio_is_one_silence_segment() {
        let samples = vec![0.0; 8000];
        let tl = segment_silence(&samples, 8000, &SilenceConfig::default()).unwrap();
        assert_eq!(tl.segments.len(), 1);
        assert_eq!(tl.segments[0].class, SegClass::Silence);
        assert_eq!(tl.segments[0].start, 0.0);
        assert!((tl.segments[0].end - 1.0).abs() < 1e-9);
    }

    #[test]
    fn half_silence_half_sine() {
        let mut samples = vec![0.0; 4000];
        samples.extend(sine(400.0, 0.5, 8000, 1.0));
        let tl = segment_silence(&samples, 8000, &SilenceConfig::default()).unwrap();
        assert_eq!(tl.segments.len(), 2);
        assert_eq!(tl.segments[0].class, SegClass::Silence);
        assert_eq!(tl.segments[1].class, SegClass::Speech);
        // boundary within one hop (10 ms) plus one frame of lookahead
        assert!((tl.segments[0].end - 0.5).abs() <= 0.035);
    }

    #[test]
    fn constant_square_wave_is_all_speech() {
        let samples: Vec<f64> = (0..8000).map(|i| if i % 20 < 10 { 1.0 } else { -1.0 }).collect();
        let tl = segment_silence(&samples, 8000, &SilenceConfig::default()).unwrap();
        assert_eq!(tl.segments.len(), 1);
        assert_eq!(tl.segments[0].class, SegClass::Speech);
    }

    #[test]
    fn empty_and_nonfinite_audio_rejected() {
        let cfg = SilenceConfig::default();
        assert!(matches!(
            segment_silence(&[], 8000, &cfg),
            Err(FeatureError::EmptyAudio)
        ));
        assert!(matches!(
            segment_silence(&[f64::NAN; 1000], 8000, &cfg),
            Err(FeatureError::NonFiniteSample)
        ));
    }

    #[test]
    fn compute_features_half_and_half() {
        let tl = SegmentTimeline {
            call_id: "c1".into(),
            duration: 120.0,
            segments: vec![
                Segment {
                    start: 0.0,
                    end: 60.0,
                    class: SegClass::Speech,
                },
                Segment {
                    start: 60.0,
                    end: 120.0,
                    class: SegClass::Silence,
                },
            ],
        };
        let fv = compute_features(&tl).unwrap();
        assert_eq!(fv.fractions(), [0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn compute_features_all_speech() {
        let tl = SegmentTimeline {
            call_id: "c1".into(),
            duration: 120.0,
            segments: vec![Segment {
                start: 0.0,
                end: 120.0,
                class: SegClass::Speech,
            }],
        };
        assert_eq!(
            compute_features(&tl).unwrap().fractions(),
            [1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn compute_features_quarters() {
        let classes = [
            SegClass::Speech,
            SegClass::Music,
            SegClass::Noise,
            SegClass::Silence,
        ];
        let segments = classes
            .iter()
            .enumerate()
            .map(|(i, &class)| Segment {
                start: 30.0 * i as f64,
                end: 30.0 * (i + 1) as f64,
                class,
            })
            .collect();
        let tl = SegmentTimeline {
            call_id: "c1".into(),
            duration: 120.0,
            segments,
        };
        assert_eq!(
            compute_features(&tl).unwrap().fractions(),
            [0.25, 0.25, 0.25, 0.25]
        );
    }

    #[test]
    fn invalid_timeline_rejected() {
        let tl = SegmentTimeline {
            call_id: "bad".into(),
            duration: 10.0,
            segments: vec![Segment {
                start: 0.0,
                end: 5.0,
                class: SegClass::Speech,
            }],
        };
        assert!(compute_features(&tl).is_err());
    }

    fn sample_row(id: &str, label: Option<u8>) -> FeatureVector {
        FeatureVector {
            call_id: id.into(),
            duration: 60.0,
            pct_speech: 0.5,
            pct_music: 0.1,
            pct_noise: 0.1,
            pct_silence: 0.3,
            label,
            date: NaiveDate::from_ymd_opt(2019, 6, 1),
        }
    }

    #[test]
    fn csv_header_only_is_empty_dataset() {
        let ds = load_feature_csv(format!("{FEATURE_CSV_HEADER}\n").as_bytes()).unwrap();
        assert!(ds.rows.is_empty());
        assert_eq!(ds.labeled_count, 0);
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::new(vec![sample_row("a", Some(1)), sample_row("b", None)]).unwrap();
        assert_eq!(ds.labeled_count, 1);
        let mut buf = Vec::new();
        write_feature_csv(&ds, &mut buf).unwrap();
        let back = load_feature_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_bad_sum_names_row() {
        let body = format!("{FEATURE_CSV_HEADER}\nc1,60.000000,0.400000,0.100000,0.100000,0.200000,,\n");
        match load_feature_csv(body.as_bytes()) {
            Err(FeatureError::CsvRow { row: 2, .. }) => {}
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn csv_bad_header_rejected() {
        let body = "call_id,duration\nc1,60\n";
        assert!(matches!(
            load_feature_csv(body.as_bytes()),
            Err(FeatureError::CsvHeader { .. })
        ));
    }

    #[test]
    fn csv_duplicate_ids_rejected() {
        let ds_err = Dataset::new(vec![sample_row("a", None), sample_row("a", None)]);
        assert!(matches!(ds_err, Err(FeatureError::DuplicateCallId(_))));
    }

    #[test]
    fn timeline_csv_round_trip() {
        let tl = SegmentTimeline {
            call_id: "c9".into(),
            duration: 2.0,
            segments: vec![
                Segment {
                    start: 0.0,
                    end: 1.25,
                    class: SegClass::Silence,
                },
                Segment {
                    start: 1.25,
                    end: 2.0,
                    class: SegClass::Speech,
                },
            ],
        };
        let mut buf = Vec::new();
        write_timeline_csv(&[tl.clone()], &mut buf).unwrap();
        let back = load_timeline_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![tl]);
    }

    proptest! {
        // Random partition of [0, duration] into class-labeled segments.
        #[test]
        fn feature_fractions_sum_to_one(
            cuts in proptest::collection::vec(0.01f64..1.0, 1..20),
            class_seed in 0u64..1000
        ) {
            let mut start = 0.0;
            let classes = [SegClass::Speech, SegClass::Music, SegClass::Noise, SegClass::Silence];
            let mut segments = Vec::new();
            let mut cls_idx = (class_seed % 4) as usize;
            for (i, len) in cuts.iter().enumerate() {
                let end = start + len;
                segments.push(Segment { start, end, class: classes[cls_idx] });
                start = end;
                // next class differs from the current one
                cls_idx = (cls_idx + 1 + ((class_seed >> (i % 60)) % 3) as usize) % 4;
            }
            let tl = SegmentTimeline {
                call_id: "p".into(),
                duration: start,
                segments,
            };
            let fv = compute_features(&tl).unwrap();
            let sum: f64 = fv.fractions().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
        }

        #[test]
        fn segmenter_output_satisfies_invariants(
            seed in 0u64..200,
            n in 800usize..8000
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) *
                if rng.gen_bool(0.3) { 0.0 } else { 1.0 }).collect();
            let tl = segment_silence(&samples, 8000, &SilenceConfig::default()).unwrap();
            tl.validate().unwrap();
        }

        #[test]
        fn relative_threshold_is_scale_free(scale in 1e-3f64..1e3, seed in 0u64..50) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<f64> = (0..4000).map(|i| {
                let on = (i / 800) % 2 == 0;
                if on { rng.gen_range(-0.5..0.5) } else { rng.gen_range(-0.001..0.001) }
            }).collect();
            let cfg = SilenceConfig { absolute_floor: 0.0, ..SilenceConfig::default() };
            let base = segment_silence(&samples, 8000, &cfg).unwrap();
            let scaled_samples: Vec<f64> = samples.iter().map(|s| s * scale).collect();
            let scaled = segment_silence(&scaled_samples, 8000, &cfg).unwrap();
            prop_assert_eq!(base.segments.len(), scaled.segments.len());
            for (a, b) in base.segments.iter().zip(&scaled.segments) {
                prop_assert_eq!(a.class, b.class);
                prop_assert!((a.start - b.start).abs() < 1e-9);
                prop_assert!((a.end - b.end).abs() < 1e-9);
            }
        }
    }
}
