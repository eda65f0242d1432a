//! Dialog corpus serialization: JSON-lines, one dialog per line.
//!
//! Line format: `{"id": str, "duration_s": float, "segments":
//! [{"speaker": "A"|"B", "start": float, "end": float}, ...]}` with times
//! in seconds. Loading validates bounds and normalizes segment order;
//! malformed lines are reported with their line number.

use crate::timeline::{rasterize, FrameRate, TimelineError, VaSegment, VaTimeline};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: dialog {id:?}: {reason}")]
    Validation {
        path: String,
        line: usize,
        id: String,
        reason: String,
    },
    #[error("{path}:{line}: duplicate dialog id {id:?}")]
    DuplicateId {
        path: String,
        line: usize,
        id: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One two-party dialog: an id, a total duration, and voice-activity
/// segments for both speakers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dialog {
    pub id: String,
    pub duration_s: f64,
    pub segments: Vec<VaSegment>,
}

impl Dialog {
    pub fn rasterize(&self, rate: FrameRate) -> Result<VaTimeline, TimelineError> {
        rasterize(&self.segments, rate, self.duration_s)
    }

    fn check(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty dialog id".into());
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(format!("duration_s must be positive, got {}", self.duration_s));
        }
        for seg in &self.segments {
            if !seg.start_s.is_finite() || !seg.end_s.is_finite() {
                return Err("segment times must be finite".into());
            }
            if seg.end_s <= seg.start_s {
                return Err(format!(
                    "segment end {} not after start {}",
                    seg.end_s, seg.start_s
                ));
            }
            if seg.start_s < 0.0 || seg.end_s > self.duration_s {
                return Err(format!(
                    "segment [{}, {}) outside dialog span [0, {})",
                    seg.start_s, seg.end_s, self.duration_s
                ));
            }
        }
        Ok(())
    }

    /// Canonical segment order: by start time, speaker A before B on ties.
    pub(crate) fn normalize(&mut self) {
        self.segments.sort_by(|a, b| {
            a.start_s
                .total_cmp(&b.start_s)
                .then(a.speaker.index().cmp(&b.speaker.index()))
                .then(a.end_s.total_cmp(&b.end_s))
        });
    }
}

/// Read a JSONL corpus. Blank lines are ignored; an empty file yields an
/// empty corpus with a warning.
pub fn load_corpus(path: &Path) -> Result<Vec<Dialog>, CorpusError> {
    let display = path.display().to_string();
    let io_err = |source| CorpusError::Io {
        path: display.clone(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut dialogs = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut dialog: Dialog =
            serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
                path: display.clone(),
                line: line_no,
                source,
            })?;
        dialog.check().map_err(|reason| CorpusError::Validation {
            path: display.clone(),
            line: line_no,
            id: dialog.id.clone(),
            reason,
        })?;
        if !seen.insert(dialog.id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: display,
                line: line_no,
                id: dialog.id,
            });
        }
        dialog.normalize();
        dialogs.push(dialog);
    }
    if dialogs.is_empty() {
        log::warn!("{display}: empty corpus");
    }
    Ok(dialogs)
}

/// Write a JSONL corpus; output is byte-identical for identical input.
pub fn save_corpus(path: &Path, dialogs: &[Dialog]) -> Result<(), CorpusError> {
    let display = path.display().to_string();
    let io_err = |source| CorpusError::Io {
        path: display.clone(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for dialog in dialogs {
        let line = serde_json::to_string(dialog).expect("dialog serializes");
        out.write_all(line.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::Speaker;

    fn sample() -> Vec<Dialog> {
        vec![
            Dialog {
                id: "d0".into(),
                duration_s: 10.0,
                segments: vec![
                    VaSegment::new(Speaker::A, 0.0, 4.0),
                    VaSegment::new(Speaker::B, 4.5, 9.0),
                ],
            },
            Dialog {
                id: "d1".into(),
                duration_s: 5.0,
                segments: vec![VaSegment::new(Speaker::B, 1.0, 2.0)],
            },
        ]
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let dialogs = sample();
        save_corpus(&path, &dialogs).unwrap();
        let loaded = load_corpus(&path).unwrap();
        assert_eq!(loaded, dialogs);
        // Saving the loaded corpus reproduces the file byte for byte.
        let path2 = dir.path().join("again.jsonl");
        save_corpus(&path2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn empty_file_is_an_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn reversed_segment_is_rejected_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"id":"ok","duration_s":5.0,"segments":[]}"#,
                "\n",
                r#"{"id":"bad","duration_s":5.0,"segments":[{"speaker":"A","start":2.0,"end":1.0}]}"#,
                "\n",
            ),
        )
        .unwrap();
        let err = load_corpus(&path).unwrap_err();
        match err {
            CorpusError::Validation { line, id, .. } => {
                assert_eq!(line, 2);
                assert_eq!(id, "bad");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn malformed_json_cites_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"id\": \"x\"\n").unwrap();
        match load_corpus(&path).unwrap_err() {
            CorpusError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn out_of_bounds_and_duplicates_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"x","duration_s":5.0,"segments":[{"speaker":"A","start":1.0,"end":6.0}]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_corpus(&path).unwrap_err(),
            CorpusError::Validation { .. }
        ));
        std::fs::write(
            &path,
            concat!(
                r#"{"id":"x","duration_s":5.0,"segments":[]}"#,
                "\n",
                r#"{"id":"x","duration_s":5.0,"segments":[]}"#,
                "\n",
            ),
        )
        .unwrap();
        assert!(matches!(
            load_corpus(&path).unwrap_err(),
            CorpusError::DuplicateId { line: 2, .. }
        ));
    }

    #[test]
    fn loading_normalizes_segment_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("unsorted.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"x","duration_s":5.0,"segments":[{"speaker":"B","start":3.0,"end":4.0},{"speaker":"A","start":1.0,"end":2.0}]}"#,
        )
        .unwrap();
        let loaded = load_corpus(&path).unwrap();
        assert_eq!(loaded[0].segments[0].speaker, Speaker::A);
        assert_eq!(loaded[0].segments[0].start_s, 1.0);
    }

    #[test]
    fn rasterize_produces_a_timeline() {
        let dialog = &sample()[0];
        let tl = dialog.rasterize(FrameRate::new(100).unwrap()).unwrap();
        assert_eq!(tl.len(), 1000);
        assert!(tl.active(Speaker::A, 100));
        assert!(tl.active(Speaker::B, 500));
    }
}
