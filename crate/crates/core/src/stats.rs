//! Corpus statistics: per-string note counts and technique usage ratios.
//!
//! Scans MusicXML files with tablature info (or this tool's own annotated
//! JSON dumps) and counts, for every string, how many notes it carries and
//! how many of them use each technique. The ratio table has the same shape
//! as the annotator's target ratios, so a stats file can be pasted straight
//! into the configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{NoteDump, StringRatios, TechniqueKind, TECHNIQUE_KINDS};
use crate::musicxml;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no usable notes found in the corpus")]
    EmptyCorpus,
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("cannot parse stats file {path}: {message}")]
    BadStatsFile { path: PathBuf, message: String },
}

/// Raw per-string technique counts; same field layout as [`StringRatios`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StringCounts {
    pub hammer_on: u64,
    pub pull_off: u64,
    pub vibrato: u64,
    pub slide: u64,
    pub bend: u64,
}

impl StringCounts {
    pub fn get(&self, kind: TechniqueKind) -> u64 {
        match kind {
            TechniqueKind::HammerOn => self.hammer_on,
            TechniqueKind::PullOff => self.pull_off,
            TechniqueKind::Vibrato => self.vibrato,
            TechniqueKind::Slide => self.slide,
            TechniqueKind::Bend => self.bend,
        }
    }

    fn bump(&mut self, kind: TechniqueKind) {
        match kind {
            TechniqueKind::HammerOn => self.hammer_on += 1,
            TechniqueKind::PullOff => self.pull_off += 1,
            TechniqueKind::Vibrato => self.vibrato += 1,
            TechniqueKind::Slide => self.slide += 1,
            TechniqueKind::Bend => self.bend += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_notes: u64,
    /// Index 0 is string 1.
    pub notes_per_string: Vec<u64>,
    pub counts: Vec<StringCounts>,
    /// counts / notes_per_string, zero where the string carries no notes;
    /// loadable directly as annotator targets.
    pub ratios: Vec<StringRatios>,
}

impl CorpusStats {
    pub fn is_empty(&self) -> bool {
        self.total_notes == 0
    }

    /// Per-string share of all notes, in [0, 1].
    pub fn note_shares(&self) -> Vec<f64> {
        self.notes_per_string
            .iter()
            .map(|&n| n as f64 / self.total_notes.max(1) as f64)
            .collect()
    }
}

/// Order-insensitive accumulator; merging is associative and commutative.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    notes_per_string: Vec<u64>,
    counts: Vec<StringCounts>,
}

impl StatsAccumulator {
    fn grow(&mut self, strings: usize) {
        if self.notes_per_string.len() < strings {
            self.notes_per_string.resize(strings, 0);
            self.counts.resize(strings, StringCounts::default());
        }
    }

    /// Count one note on `string` carrying `kinds` (each kind at most once
    /// per note).
    pub fn add_note(&mut self, string: u8, kinds: &[TechniqueKind]) {
        if string == 0 {
            return;
        }
        self.grow(string as usize);
        let slot = string as usize - 1;
        self.notes_per_string[slot] += 1;
        let mut seen: Vec<TechniqueKind> = Vec::with_capacity(kinds.len());
        for &kind in kinds {
            if !seen.contains(&kind) {
                seen.push(kind);
                self.counts[slot].bump(kind);
            }
        }
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        self.grow(other.notes_per_string.len());
        for (i, &n) in other.notes_per_string.iter().enumerate() {
            self.notes_per_string[i] += n;
            for kind in TECHNIQUE_KINDS {
                let combined = self.counts[i].get(kind) + other.counts[i].get(kind);
                set_count(&mut self.counts[i], kind, combined);
            }
        }
    }

    pub fn finish(mut self, min_strings: usize) -> CorpusStats {
        self.grow(min_strings);
        let ratios = self
            .counts
            .iter()
            .zip(&self.notes_per_string)
            .map(|(c, &n)| {
                let ratio =
                    |kind| if n == 0 { 0.0 } else { c.get(kind) as f64 / n as f64 };
                StringRatios {
                    hammer_on: ratio(TechniqueKind::HammerOn),
                    pull_off: ratio(TechniqueKind::PullOff),
                    vibrato: ratio(TechniqueKind::Vibrato),
                    slide: ratio(TechniqueKind::Slide),
                    bend: ratio(TechniqueKind::Bend),
                }
            })
            .collect();
        CorpusStats {
            total_notes: self.notes_per_string.iter().sum(),
            notes_per_string: self.notes_per_string,
            counts: self.counts,
            ratios,
        }
    }
}

fn set_count(counts: &mut StringCounts, kind: TechniqueKind, value: u64) {
    match kind {
        TechniqueKind::HammerOn => counts.hammer_on = value,
        TechniqueKind::PullOff => counts.pull_off = value,
        TechniqueKind::Vibrato => counts.vibrato = value,
        TechniqueKind::Slide => counts.slide = value,
        TechniqueKind::Bend => counts.bend = value,
    }
}

/// Lenient view of an annotated-sequence dump: only the notes are needed.
#[derive(Deserialize)]
struct DumpFile {
    notes: Vec<NoteDump>,
}

/// Scan MusicXML files and annotated JSON dumps into corpus statistics.
///
/// Unreadable or unparseable files produce a warning and the scan
/// continues; notes without string info are skipped (the MusicXML reader
/// reports them). Zero usable notes is an error.
pub fn scan_corpus(paths: &[PathBuf]) -> Result<(CorpusStats, Vec<String>), StatsError> {
    let mut acc = StatsAccumulator::default();
    let mut warnings = Vec::new();
    for path in paths {
        match scan_file(path, &mut acc) {
            Ok(file_warnings) => warnings.extend(file_warnings),
            Err(message) => warnings.push(format!("{}: {message}", path.display())),
        }
    }
    let stats = acc.finish(6);
    if stats.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    Ok((stats, warnings))
}

fn scan_file(path: &Path, acc: &mut StatsAccumulator) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let extension = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match extension {
        "json" => {
            let dump: DumpFile = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            for note in &dump.notes {
                let kinds: Vec<TechniqueKind> =
                    note.techniques.iter().filter_map(|t| t.stat_kind()).collect();
                acc.add_note(note.string, &kinds);
            }
            Ok(Vec::new())
        }
        "musicxml" | "xml" => {
            let reparsed = musicxml::reparse(&text).map_err(|e| e.to_string())?;
            for note in &reparsed.notes {
                let kinds: Vec<TechniqueKind> =
                    note.techniques.iter().filter_map(|t| t.stat_kind()).collect();
                acc.add_note(note.string, &kinds);
            }
            Ok(reparsed
                .warnings
                .into_iter()
                .map(|w| format!("{}: {w}", path.display()))
                .collect())
        }
        other => Err(format!("unsupported file extension .{other}")),
    }
}

/// Load a previously written stats JSON file.
pub fn load_stats(path: &Path) -> Result<CorpusStats, StatsError> {
    let text = std::fs::read_to_string(path).map_err(|e| StatsError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| StatsError::BadStatsFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Per-string note-share comparison between two corpora.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionComparison {
    /// (share in a, share in b) per string, padded to equal length.
    pub shares: Vec<(f64, f64)>,
    /// L1 distance between the two share vectors, in [0, 2].
    pub l1_distance: f64,
}

pub fn compare_distributions(a: &CorpusStats, b: &CorpusStats) -> DistributionComparison {
    let mut shares_a = a.note_shares();
    let mut shares_b = b.note_shares();
    let len = shares_a.len().max(shares_b.len());
    shares_a.resize(len, 0.0);
    shares_b.resize(len, 0.0);
    let l1_distance = shares_a.iter().zip(&shares_b).map(|(x, y)| (x - y).abs()).sum();
    DistributionComparison {
        shares: shares_a.into_iter().zip(shares_b).collect(),
        l1_distance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::Technique;

    fn dump_with(notes: Vec<NoteDump>) -> String {
        serde_json::to_string(&serde_json::json!({ "notes": notes })).unwrap()
    }

    fn plain_note(index: usize, string: u8, techniques: Vec<Technique>) -> NoteDump {
        NoteDump { index, pitch: 64, string, fret: 5, finger: 1, hand_position: 5, techniques }
    }

    #[test]
    fn ratios_are_definitional() {
        let dir = tempfile::tempdir().unwrap();
        let mut notes = Vec::new();
        for i in 0..10 {
            let techniques = if i < 2 { vec![Technique::Vibrato] } else { Vec::new() };
            notes.push(plain_note(i, 1, techniques));
        }
        let path = dir.path().join("a.json");
        std::fs::write(&path, dump_with(notes)).unwrap();
        let (stats, warnings) = scan_corpus(&[path]).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(stats.total_notes, 10);
        assert_eq!(stats.notes_per_string[0], 10);
        assert!((stats.ratios[0].vibrato - 0.2).abs() < 1e-12);
        assert_eq!(stats.counts[0].vibrato, 2);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(scan_corpus(&[]), Err(StatsError::EmptyCorpus)));
    }

    #[test]
    fn unreadable_files_warn_and_scan_continues() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.json");
        std::fs::write(&good, dump_with(vec![plain_note(0, 2, vec![])])).unwrap();
        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, "{ not json").unwrap();
        let missing = dir.path().join("missing.musicxml");
        let (stats, warnings) = scan_corpus(&[bad, good, missing]).unwrap();
        assert_eq!(stats.total_notes, 1);
        assert_eq!(warnings.len(), 2);
    }

    #[test]
    fn counting_is_order_independent() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        std::fs::write(
            &a,
            dump_with(vec![
                plain_note(0, 1, vec![Technique::Vibrato]),
                plain_note(1, 3, vec![Technique::HammerOn]),
            ]),
        )
        .unwrap();
        std::fs::write(
            &b,
            dump_with(vec![plain_note(0, 1, vec![Technique::Bend { semitones: 2 }])]),
        )
        .unwrap();
        let (fwd, _) = scan_corpus(&[a.clone(), b.clone()]).unwrap();
        let (rev, _) = scan_corpus(&[b, a]).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn ratios_recompute_exactly_from_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let mut notes = Vec::new();
        for i in 0..37 {
            let t = match i % 5 {
                0 => vec![Technique::Vibrato],
                1 => vec![Technique::HammerOn, Technique::Vibrato],
                _ => Vec::new(),
            };
            notes.push(plain_note(i, 1 + (i % 6) as u8, t));
        }
        std::fs::write(&path, dump_with(notes)).unwrap();
        let (stats, _) = scan_corpus(&[path]).unwrap();
        for (i, r) in stats.ratios.iter().enumerate() {
            let n = stats.notes_per_string[i];
            for kind in TECHNIQUE_KINDS {
                let expected =
                    if n == 0 { 0.0 } else { stats.counts[i].get(kind) as f64 / n as f64 };
                assert!((r.get(kind) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn slide_stops_and_releases_are_not_counted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        std::fs::write(
            &path,
            dump_with(vec![
                plain_note(0, 1, vec![Technique::SlideStart]),
                plain_note(1, 1, vec![Technique::SlideStop]),
                plain_note(2, 1, vec![Technique::Bend { semitones: 2 }]),
                plain_note(3, 1, vec![Technique::BendRelease { semitones: 2 }]),
            ]),
        )
        .unwrap();
        let (stats, _) = scan_corpus(&[path]).unwrap();
        assert_eq!(stats.counts[0].slide, 1);
        assert_eq!(stats.counts[0].bend, 1);
        assert_eq!(stats.notes_per_string[0], 4);
    }

    #[test]
    fn identical_corpora_have_zero_distance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        std::fs::write(&path, dump_with(vec![plain_note(0, 1, vec![]), plain_note(1, 4, vec![])]))
            .unwrap();
        let (stats, _) = scan_corpus(&[path]).unwrap();
        let cmp = compare_distributions(&stats, &stats);
        assert_eq!(cmp.l1_distance, 0.0);
    }

    #[test]
    fn disjoint_support_has_distance_two() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        std::fs::write(&a, dump_with(vec![plain_note(0, 1, vec![])])).unwrap();
        std::fs::write(&b, dump_with(vec![plain_note(0, 6, vec![])])).unwrap();
        let (sa, _) = scan_corpus(&[a]).unwrap();
        let (sb, _) = scan_corpus(&[b]).unwrap();
        let cmp = compare_distributions(&sa, &sb);
        assert!((cmp.l1_distance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn musicxml_files_are_scanned_via_reparse() {
        use crate::annotate::RichNote;
        use crate::midi::{quantize, NoteEvent, TimeSignatureMap};
        use crate::musicxml::{build_score, serialize, ScoreMeta};
        use crate::solver::FingeringState;
        use crate::InstrumentSpec;

        let notes: Vec<RichNote> = (0..4)
            .map(|i| RichNote {
                event: NoteEvent {
                    index: i,
                    pitch: 64,
                    onset_ticks: i as u64 * 480,
                    duration_ticks: 480,
                    onset_s: i as f64 * 0.5,
                    duration_s: 0.5,
                    ioi_s: 0.5,
                },
                state: FingeringState::new(2, 5, 1, 5),
                techniques: if i == 1 { vec![Technique::Vibrato] } else { vec![] },
            })
            .collect();
        let events: Vec<NoteEvent> = notes.iter().map(|n| n.event.clone()).collect();
        let rhythm = quantize(&events, 480, &TimeSignatureMap::default(), 4).unwrap();
        let doc =
            build_score(&notes, &rhythm, &InstrumentSpec::standard_guitar(), ScoreMeta::default())
                .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("score.musicxml");
        std::fs::write(&path, serialize(&doc)).unwrap();
        let (stats, warnings) = scan_corpus(&[path]).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(stats.notes_per_string[1], 4);
        assert_eq!(stats.counts[1].vibrato, 1);
    }
}
