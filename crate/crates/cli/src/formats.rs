//! Versioned CSV files for detections and tracks.
//!
//! Every file starts with the line `# uatrack-v1`, followed by a fixed
//! header row. Reals are written with at most 9 significant digits, so any
//! value that already fits in 9 digits reads back bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use uatrack::metrics::TrackedObject;
use uatrack::tracker::DetectionWithCovariance;
use uatrack::{Box3D, BoxVariance, ObjectClass};

use crate::error::{FormatError, FormatResult};

pub const VERSION_LINE: &str = "# uatrack-v1";

pub const DETECTION_COLUMNS: [&str; 10] = ["frame", "class", "x", "y", "z", "w", "l", "h", "theta", "score"];
pub const VARIANCE_COLUMNS: [&str; 7] = ["var_x", "var_y", "var_z", "var_w", "var_l", "var_h", "var_theta"];
pub const TRACK_COLUMNS: [&str; 11] = ["frame", "id", "class", "x", "y", "z", "w", "l", "h", "theta", "score"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub frame: usize,
    pub bbox: Box3D,
    pub variance: Option<BoxVariance>,
}

impl DetectionRecord {
    pub fn to_detection(&self) -> DetectionWithCovariance {
        DetectionWithCovariance::new(self.bbox, self.variance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub frame: usize,
    pub object: TrackedObject,
}

/// Rounds to 9 significant digits and prints the shortest exact form.
pub fn format_real(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    rounded.to_string()
}

/// Value after a write/read cycle.
pub fn round_real(v: f64) -> f64 {
    format_real(v).parse().unwrap_or(v)
}

fn open(path: &Path) -> FormatResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn create(path: &Path) -> FormatResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Consumes and checks the version line.
fn read_version<R: BufRead>(r: &mut R) -> FormatResult<()> {
    let mut first = String::new();
    r.read_line(&mut first)?;
    let found = first.trim_end_matches(['\r', '\n']);
    if found != VERSION_LINE {
        return Err(FormatError::Version {
            expected: VERSION_LINE,
            found: found.to_string(),
        });
    }
    Ok(())
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

/// File line of a record; the version line precedes the CSV data.
fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line() + 1)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> FormatResult<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| FormatError::Parse {
        line: line_of(rec),
        msg: format!("missing column `{name}`"),
    })?;
    raw.parse().map_err(|e| FormatError::Parse {
        line: line_of(rec),
        msg: format!("column `{name}`: cannot parse `{raw}`: {e}"),
    })
}

fn class_field(rec: &csv::StringRecord, i: usize) -> FormatResult<ObjectClass> {
    field::<ObjectClass>(rec, i, "class")
}

/// Reads the seven box parameters starting at column `start`.
fn box_fields(rec: &csv::StringRecord, start: usize, class: ObjectClass) -> FormatResult<Box3D> {
    let names = ["x", "y", "z", "w", "l", "h", "theta", "score"];
    let mut v = [0.0; 8];
    for (k, name) in names.iter().enumerate() {
        v[k] = field(rec, start + k, name)?;
    }
    let b = Box3D {
        x: v[0],
        y: v[1],
        z: v[2],
        w: v[3],
        l: v[4],
        h: v[5],
        theta: v[6],
        class,
        score: v[7],
    };
    b.validate().map_err(|e| FormatError::Parse {
        line: line_of(rec),
        msg: e.to_string(),
    })?;
    Ok(b)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> FormatResult<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(FormatError::Header {
            line: 2,
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

pub fn read_detections<R: Read>(reader: R) -> FormatResult<Vec<DetectionRecord>> {
    let mut r = BufReader::new(reader);
    read_version(&mut r)?;
    let mut csv = csv_reader(r);
    let header = csv.headers()?.clone();
    let with_var: Vec<&str> = DETECTION_COLUMNS.iter().chain(&VARIANCE_COLUMNS).copied().collect();
    let has_variance = if header.len() == with_var.len() {
        check_header(&header, &with_var)?;
        true
    } else {
        check_header(&header, &DETECTION_COLUMNS)?;
        false
    };

    let mut out = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            let msg = if rec.len() == DETECTION_COLUMNS.len() || rec.len() == with_var.len() {
                "variance columns must be present on every record or on none".to_string()
            } else {
                format!("expected {} columns, found {}", header.len(), rec.len())
            };
            return Err(FormatError::Parse {
                line: line_of(&rec),
                msg,
            });
        }
        let frame = field(&rec, 0, "frame")?;
        let class = class_field(&rec, 1)?;
        let bbox = box_fields(&rec, 2, class)?;
        let variance = if has_variance {
            let mut v = [0.0; 7];
            for (k, name) in VARIANCE_COLUMNS.iter().enumerate() {
                v[k] = field(&rec, 10 + k, name)?;
            }
            Some(BoxVariance::from_array(v))
        } else {
            None
        };
        out.push(DetectionRecord { frame, bbox, variance });
    }
    Ok(out)
}

pub fn read_detections_file(path: &Path) -> FormatResult<Vec<DetectionRecord>> {
    read_detections(open(path)?)
}

fn box_strings(b: &Box3D) -> impl Iterator<Item = String> {
    b.params()
        .into_iter()
        .chain(std::iter::once(b.score))
        .map(format_real)
}

pub fn write_detections<W: Write>(mut w: W, records: &[DetectionRecord]) -> FormatResult<()> {
    let with_variance = records.first().is_some_and(|r| r.variance.is_some());
    if records.iter().any(|r| r.variance.is_some() != with_variance) {
        return Err(FormatError::MixedVariance);
    }
    writeln!(w, "{VERSION_LINE}")?;
    let mut csv = csv::Writer::from_writer(w);
    if with_variance {
        csv.write_record(DETECTION_COLUMNS.iter().chain(&VARIANCE_COLUMNS))?;
    } else {
        csv.write_record(DETECTION_COLUMNS)?;
    }
    for r in records {
        let mut row: Vec<String> = vec![r.frame.to_string(), r.bbox.class.label().to_string()];
        row.extend(box_strings(&r.bbox));
        if let Some(v) = r.variance {
            row.extend(v.to_array().into_iter().map(format_real));
        }
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_detections_file(path: &Path, records: &[DetectionRecord]) -> FormatResult<()> {
    let mut w = create(path)?;
    write_detections(&mut w, records)?;
    w.flush()?;
    Ok(())
}

pub fn read_tracks<R: Read>(reader: R) -> FormatResult<Vec<TrackRecord>> {
    let mut r = BufReader::new(reader);
    read_version(&mut r)?;
    let mut csv = csv_reader(r);
    check_header(csv.headers()?, &TRACK_COLUMNS)?;
    let mut out = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        if rec.len() != TRACK_COLUMNS.len() {
            return Err(FormatError::Parse {
                line: line_of(&rec),
                msg: format!("expected {} columns, found {}", TRACK_COLUMNS.len(), rec.len()),
            });
        }
        let frame = field(&rec, 0, "frame")?;
        let id = field(&rec, 1, "id")?;
        let class = class_field(&rec, 2)?;
        let bbox = box_fields(&rec, 3, class)?;
        out.push(TrackRecord {
            frame,
            object: TrackedObject { id, bbox },
        });
    }
    Ok(out)
}

pub fn read_tracks_file(path: &Path) -> FormatResult<Vec<TrackRecord>> {
    read_tracks(open(path)?)
}

pub fn write_tracks<W: Write>(mut w: W, records: &[TrackRecord]) -> FormatResult<()> {
    writeln!(w, "{VERSION_LINE}")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(TRACK_COLUMNS)?;
    for r in records {
        let b = &r.object.bbox;
        let mut row = vec![r.frame.to_string(), r.object.id.to_string(), b.class.label().to_string()];
        row.extend(box_strings(b));
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_tracks_file(path: &Path, records: &[TrackRecord]) -> FormatResult<()> {
    let mut w = create(path)?;
    write_tracks(&mut w, records)?;
    w.flush()?;
    Ok(())
}

/// Groups per-frame items into `n_frames` consecutive frames.
///
/// `n_frames` defaults to one past the largest frame index present.
pub fn frames_of<T: Clone>(items: &[(usize, T)], n_frames: Option<usize>) -> Vec<Vec<T>> {
    let n = n_frames.unwrap_or_else(|| items.iter().map(|(f, _)| f + 1).max().unwrap_or(0));
    let mut frames = vec![Vec::new(); n];
    for (f, item) in items {
        if *f < n {
            frames[*f].push(item.clone());
        }
    }
    frames
}

pub fn detection_frames(records: &[DetectionRecord], n_frames: Option<usize>) -> Vec<Vec<DetectionRecord>> {
    let items: Vec<(usize, DetectionRecord)> = records.iter().map(|r| (r.frame, *r)).collect();
    frames_of(&items, n_frames)
}

pub fn track_frames(records: &[TrackRecord], n_frames: Option<usize>) -> Vec<Vec<TrackedObject>> {
    let items: Vec<(usize, TrackedObject)> = records.iter().map(|r| (r.frame, r.object)).collect();
    frames_of(&items, n_frames)
}

/// Per-frame map, for callers that need sparse access.
pub fn frame_map<T: Clone>(items: &[(usize, T)]) -> BTreeMap<usize, Vec<T>> {
    let mut map: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    for (f, item) in items {
        map.entry(*f).or_default().push(item.clone());
    }
    map
}
