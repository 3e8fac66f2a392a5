//! KITTI label import.
//!
//! Object label files have 15 fields per line (16 with a score); tracking
//! label files prepend `frame` and `track_id`. Camera coordinates (x right,
//! y down, z forward, box origin at the bottom face) are converted to the
//! library frame (x forward, y left, z up, box origin at the center).

use std::collections::BTreeMap;
use std::path::Path;

use uatrack::metrics::TrackedObject;
use uatrack::{normalize_angle, Box3D, ObjectClass};

use crate::error::{FormatError, FormatResult};

/// Converts a camera-frame KITTI box to the library frame.
pub fn camera_to_box(hwl: [f64; 3], xyz_cam: [f64; 3], ry: f64) -> Box3D {
    let [h, w, l] = hwl;
    let [xc, yc, zc] = xyz_cam;
    Box3D::new([zc, -xc, -yc + 0.5 * h], [w, l, h], normalize_angle(-ry - std::f64::consts::FRAC_PI_2))
}

fn num(tok: &str, line: u64, what: &str) -> FormatResult<f64> {
    tok.parse().map_err(|_| FormatError::Parse {
        line,
        msg: format!("invalid {what} `{tok}`"),
    })
}

/// Parses KITTI labels into per-frame objects, skipping `DontCare`.
///
/// Object label files are a single frame 0 whose ids are line indices.
pub fn parse_labels(text: &str) -> FormatResult<BTreeMap<usize, Vec<TrackedObject>>> {
    let mut frames: BTreeMap<usize, Vec<TrackedObject>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let (frame, id, rest) = match toks.len() {
            15 | 16 => (0, idx as u64, &toks[..]),
            17 | 18 => {
                let frame = toks[0].parse::<usize>().map_err(|_| FormatError::Parse {
                    line,
                    msg: format!("invalid frame `{}`", toks[0]),
                })?;
                let id = toks[1].parse::<i64>().map_err(|_| FormatError::Parse {
                    line,
                    msg: format!("invalid track id `{}`", toks[1]),
                })?;
                (frame, id as u64, &toks[2..])
            }
            n => {
                return Err(FormatError::Parse {
                    line,
                    msg: format!("expected 15 to 18 fields, found {n}"),
                })
            }
        };
        if rest[0] == "DontCare" {
            continue;
        }
        let class: ObjectClass = rest[0].parse().map_err(|_| FormatError::Parse {
            line,
            msg: format!("unknown object type `{}`", rest[0]),
        })?;
        let h = num(rest[8], line, "height")?;
        let w = num(rest[9], line, "width")?;
        let l = num(rest[10], line, "length")?;
        let xyz = [
            num(rest[11], line, "x")?,
            num(rest[12], line, "y")?,
            num(rest[13], line, "z")?,
        ];
        let ry = num(rest[14], line, "rotation_y")?;
        let score = match rest.get(15) {
            Some(tok) => num(tok, line, "score")?,
            None => 1.0,
        };
        let bbox = camera_to_box([h, w, l], xyz, ry).with_class(class).with_score(score);
        bbox.validate().map_err(|e| FormatError::Parse {
            line,
            msg: e.to_string(),
        })?;
        frames.entry(frame).or_default().push(TrackedObject { id, bbox });
    }
    Ok(frames)
}

pub fn read_labels_file(path: &Path) -> FormatResult<BTreeMap<usize, Vec<TrackedObject>>> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_labels(&text)
}

/// Dense per-frame list covering frames `0..=max`.
pub fn dense(frames: &BTreeMap<usize, Vec<TrackedObject>>) -> Vec<Vec<TrackedObject>> {
    let n = frames.keys().next_back().map_or(0, |f| f + 1);
    (0..n).map(|f| frames.get(&f).cloned().unwrap_or_default()).collect()
}
