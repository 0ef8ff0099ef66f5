//! ECG record ingestion, per-record preprocessing and the labeled dataset manifest.
//!
//! Records are stored either as little-endian `f64` binaries (`.f64`, `.bin`) or as
//! newline-delimited decimal text (`.txt`, `.csv`). The sampling rate travels in a
//! sidecar file named `<record file>.fs` holding a single number; when no sidecar is
//! present the caller supplies a default.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// The three cardiac-condition classes, in their fixed index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Arr,
    Nsr,
    Chf,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Arr, ClassLabel::Nsr, ClassLabel::Chf];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Arr => "ARR",
            ClassLabel::Nsr => "NSR",
            ClassLabel::Chf => "CHF",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

/// One ECG recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
    pub label: Option<ClassLabel>,
    pub record_id: String,
}

impl Signal {
    pub fn new(record_id: impl Into<String>, samples: Vec<f64>, fs: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("signal has no samples".into()));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        Ok(Signal {
            samples,
            fs,
            label: None,
            record_id: record_id.into(),
        })
    }

    pub fn with_label(mut self, label: ClassLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn with_samples(&self, samples: Vec<f64>, fs: f64) -> Signal {
        Signal {
            samples,
            fs,
            label: self.label,
            record_id: self.record_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    RawBinaryF64,
    DelimitedText,
}

impl RecordFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "f64" | "bin" => Some(RecordFormat::RawBinaryF64),
            "txt" | "csv" => Some(RecordFormat::DelimitedText),
            _ => None,
        }
    }
}

/// Path of the sampling-rate sidecar for a record file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".fs");
    PathBuf::from(name)
}

/// Reads the sampling-rate sidecar next to `path`, if any.
pub fn read_sidecar_fs(path: &Path) -> Result<Option<f64>> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let fs_hz: f64 = text.trim().parse().map_err(|e| Error::Parse {
        path: side.clone(),
        line: 1,
        detail: format!("{e}"),
    })?;
    if !(fs_hz > 0.0 && fs_hz.is_finite()) {
        return Err(Error::Parse {
            path: side,
            line: 1,
            detail: format!("sampling rate must be positive, got {fs_hz}"),
        });
    }
    Ok(Some(fs_hz))
}

fn record_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Loads a record in file order, without any normalization.
pub fn load_record(path: &Path, format: RecordFormat, fs_hz: f64) -> Result<Signal> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let samples = match format {
        RecordFormat::RawBinaryF64 => {
            if bytes.len() % 8 != 0 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    detail: format!("{} bytes is not a whole number of f64 samples", bytes.len()),
                });
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect::<Vec<_>>()
        }
        RecordFormat::DelimitedText => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                detail: e.to_string(),
            })?;
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let v: f64 = line.parse().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    detail: format!("`{line}`: {e}"),
                })?;
                out.push(v);
            }
            out
        }
    };
    if samples.is_empty() {
        return Err(Error::EmptyRecord(path.to_path_buf()));
    }
    if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: bad + 1,
            detail: "non-finite sample".into(),
        });
    }
    Signal::new(record_id_of(path), samples, fs_hz)
}

/// Writes a record, picking the encoding from `format`.
pub fn write_record(path: &Path, signal: &Signal, format: RecordFormat) -> Result<()> {
    let bytes = match format {
        RecordFormat::RawBinaryF64 => signal.samples.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>(),
        RecordFormat::DelimitedText => {
            let mut s = String::with_capacity(signal.samples.len() * 20);
            for v in &signal.samples {
                s.push_str(&format!("{v}\n"));
            }
            s.into_bytes()
        }
    };
    write_atomic(path, &bytes)
}

/// Divides every sample by the record's max-abs value; an all-zero record is returned unchanged.
pub fn normalize(s: &Signal) -> Signal {
    let peak = s.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return s.clone();
    }
    s.with_samples(s.samples.iter().map(|v| v / peak).collect(), s.fs)
}

/// Linear-interpolation resampling onto a uniform grid at `target_fs` spanning the
/// original duration `(n - 1) / fs`.
pub fn resample(s: &Signal, target_fs: f64) -> Result<Signal> {
    if !(target_fs > 0.0 && target_fs.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target sampling rate must be positive, got {target_fs}"
        )));
    }
    let n = s.samples.len();
    if target_fs == s.fs || n == 1 {
        return Ok(s.with_samples(s.samples.clone(), target_fs));
    }
    let ratio = s.fs / target_fs;
    let span = (n - 1) as f64 * target_fs / s.fs;
    let m = (span + 1e-9).floor() as usize + 1;
    let last = n - 1;
    let out = (0..m)
        .map(|k| {
            let pos = k as f64 * ratio;
            let i = (pos.floor() as usize).min(last);
            let frac = pos - i as f64;
            if i == last || frac == 0.0 {
                s.samples[i]
            } else {
                s.samples[i] + frac * (s.samples[i + 1] - s.samples[i])
            }
        })
        .collect();
    Ok(s.with_samples(out, target_fs))
}

/// Truncates or zero-pads at the tail to exactly `n` samples.
pub fn fix_length(s: &Signal, n: usize) -> Signal {
    let mut samples = s.samples.clone();
    samples.resize(n, 0.0);
    s.with_samples(samples, s.fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Original,
    Augmented,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Augmented => "augmented",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Provenance::Original),
            "augmented" => Ok(Provenance::Augmented),
            other => Err(Error::Data(format!("unknown provenance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub record_id: String,
    /// Relative to the manifest's base directory.
    pub path: PathBuf,
    pub label: ClassLabel,
    pub provenance: Provenance,
}

/// Separator between a source record id and an augmentation suffix.
pub const AUGMENT_TAG: &str = ".aug";

impl ManifestEntry {
    /// Record id of the original this entry was derived from.
    pub fn source_id(&self) -> &str {
        match self.provenance {
            Provenance::Original => &self.record_id,
            Provenance::Augmented => self
                .record_id
                .rsplit_once(AUGMENT_TAG)
                .map(|(head, _)| head)
                .unwrap_or(&self.record_id),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

const MANIFEST_HEADER: &str = "record_id,path,label,provenance";

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.record_id.as_str()) {
                return Err(Error::DuplicateRecord(e.record_id.clone()));
            }
        }
        Ok(DatasetManifest { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Per-class entry counts in `ClassLabel` index order.
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in &self.entries {
            c[e.label.index()] += 1;
        }
        c
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from(MANIFEST_HEADER);
        s.push('\n');
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{}\n",
                e.record_id,
                e.path.to_string_lossy().replace('\\', "/"),
                e.label.name(),
                e.provenance.name()
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == MANIFEST_HEADER => {}
            _ => return Err(Error::Data(format!("manifest must start with `{MANIFEST_HEADER}`"))),
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Data(format!(
                    "manifest line {}: expected 4 fields, found {}",
                    i + 2,
                    fields.len()
                )));
            }
            entries.push(ManifestEntry {
                record_id: fields[0].to_string(),
                path: PathBuf::from(fields[1]),
                label: fields[2].parse()?,
                provenance: fields[3].parse()?,
            });
        }
        Self::new(entries)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Folder-name to class mapping using the canonical class names.
pub fn default_class_map() -> BTreeMap<String, ClassLabel> {
    ClassLabel::ALL.into_iter().map(|c| (c.name().to_string(), c)).collect()
}

/// Scans `root/<class dir>/<record files>` into a manifest. Entries are ordered by
/// class directory name and then by file name so the result is reproducible.
pub fn build_manifest(root: &Path, class_map: &BTreeMap<String, ClassLabel>) -> Result<DatasetManifest> {
    let mut dirs: Vec<_> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(root, e))?
        .into_iter()
        .filter(|d| d.path().is_dir())
        .map(|d| d.file_name().to_string_lossy().into_owned())
        .collect();
    dirs.sort();

    let mut entries = Vec::new();
    for dir in dirs {
        let label = *class_map.get(&dir).ok_or_else(|| Error::UnknownClass(dir.clone()))?;
        let class_dir = root.join(&dir);
        let mut files: Vec<_> = fs::read_dir(&class_dir)
            .map_err(|e| Error::io(&class_dir, e))?
            .filter_map(|d| d.ok())
            .map(|d| d.path())
            .filter(|p| p.is_file() && RecordFormat::from_path(p).is_some())
            .collect();
        files.sort();
        for f in files {
            entries.push(ManifestEntry {
                record_id: record_id_of(&f),
                path: Path::new(&dir).join(f.file_name().expect("file name")),
                label,
                provenance: Provenance::Original,
            });
        }
    }
    DatasetManifest::new(entries)
}
