//! MusicXML 3.1 (partwise) serialization of the annotated melody.
//!
//! Every measure carries two staves in one part: standard notation on
//! staff 1 and a six-line tablature staff (string/fret/fingering plus the
//! technique notations) on staff 2, duplicated with a `backup` element.
//! Notes crossing measure boundaries or inexpressible as a single value
//! are split into tied segments. `reparse` reads the tablature fields
//! back out of any MusicXML file with technical string/fret elements, and
//! `validate_musicxml` enforces the 3.1 content model on everything this
//! exporter can emit, including per-voice measure arithmetic.

use std::fmt::Write as _;

use thiserror::Error;

mod validate;
pub use validate::validate_musicxml;

use crate::annotate::{RichNote, Technique};
use crate::fretboard::InstrumentSpec;
use crate::midi::{decompose_duration, value_units, NoteValue, QuantizedMelody, TimeSignature};

#[derive(Debug, Error)]
pub enum XmlError {
    #[error("internal error: {notes} annotated notes but {rhythm} rhythm entries")]
    MisalignedSequences { notes: usize, rhythm: usize },
    #[error("not parseable as XML: {0}")]
    Parse(String),
    #[error("not a MusicXML score-partwise document")]
    NotMusicXml,
}

/// Score-level metadata embedded in the output.
#[derive(Debug, Clone)]
pub struct ScoreMeta {
    pub part_name: String,
    pub software: String,
    /// Effective run configuration, embedded verbatim in a
    /// miscellaneous-field so every file is self-describing.
    pub config_echo: Option<String>,
    pub bpm: Option<f64>,
}

impl Default for ScoreMeta {
    fn default() -> Self {
        Self {
            part_name: "Lead Guitar".into(),
            software: "tabforge".into(),
            config_echo: None,
            bpm: None,
        }
    }
}

/// One displayed note segment (a tied part of a melody note).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNote {
    pub source_index: usize,
    pub pitch: u8,
    pub duration: u64,
    pub value: NoteValue,
    pub tie_start: bool,
    pub tie_stop: bool,
    pub string: u8,
    pub fret: u8,
    pub finger: u8,
    pub hammer_start: bool,
    pub hammer_stop: bool,
    pub pull_start: bool,
    pub pull_stop: bool,
    pub slide_start: bool,
    pub slide_stop: bool,
    /// (signed semitones, is-release); releases carry a negative alter.
    pub bend: Option<(i8, bool)>,
    pub vibrato_start: bool,
    pub vibrato_stop: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Note(ScoreNote),
    /// `value: None` renders as a whole-measure rest.
    Rest { duration: u64, value: Option<NoteValue> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub number: usize,
    /// Signature to announce in this measure's attributes.
    pub time: Option<TimeSignature>,
    pub capacity: u64,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone)]
pub struct ScoreDocument {
    pub meta: ScoreMeta,
    pub divisions: u32,
    /// Open pitches, string 1 first.
    pub tuning: Vec<u8>,
    pub measures: Vec<Measure>,
}

// ---------------------------------------------------------------------------
// Building
// ---------------------------------------------------------------------------

/// Lay the annotated notes into measures according to the quantized
/// rhythm. Gaps become rests, boundary-crossing notes become tied
/// segments, and every technique maps to its MusicXML notation with
/// start/stop pairing to the neighbor note.
pub fn build_score(
    notes: &[RichNote],
    rhythm: &QuantizedMelody,
    spec: &InstrumentSpec,
    meta: ScoreMeta,
) -> Result<ScoreDocument, XmlError> {
    if notes.len() != rhythm.notes.len() {
        return Err(XmlError::MisalignedSequences {
            notes: notes.len(),
            rhythm: rhythm.notes.len(),
        });
    }
    let divisions = rhythm.divisions;
    let measure_count = rhythm.measure_count;
    let mut starts: Vec<u64> = Vec::with_capacity(measure_count + 1);
    let mut acc = 0u64;
    for m in 0..measure_count {
        starts.push(acc);
        acc += rhythm.capacity(m);
    }
    starts.push(acc);

    let mut measures: Vec<Measure> = (0..measure_count)
        .map(|m| Measure {
            number: m + 1,
            time: rhythm
                .sig_changes
                .iter()
                .find(|&&(change_m, _)| change_m == m)
                .map(|&(_, sig)| sig),
            capacity: rhythm.capacity(m),
            items: Vec::new(),
        })
        .collect();

    let measure_of = |unit: u64| -> usize {
        match starts.binary_search(&unit) {
            Ok(k) => k.min(measure_count - 1),
            Err(k) => k - 1,
        }
    };

    let emit_rests = |measures: &mut Vec<Measure>, from: u64, to: u64| {
        let mut cursor = from;
        while cursor < to {
            let m = measure_of(cursor);
            let seg_end = to.min(starts[m + 1]);
            let units = seg_end - cursor;
            if units == measures[m].capacity {
                measures[m].items.push(Item::Rest { duration: units, value: None });
            } else {
                for value in decompose_duration(units, divisions) {
                    measures[m].items.push(Item::Rest {
                        duration: value_units(&value, divisions),
                        value: Some(value),
                    });
                }
            }
            cursor = seg_end;
        }
    };

    // (measure, item) position of every displayed segment, per note.
    let mut pieces: Vec<Vec<(usize, usize)>> = vec![Vec::new(); notes.len()];
    let mut cursor = 0u64;
    for (i, note) in notes.iter().enumerate() {
        let q = &rhythm.notes[i];
        emit_rests(&mut measures, cursor, q.onset_units);
        let end = q.onset_units + q.duration_units;
        let mut seg_start = q.onset_units;
        while seg_start < end {
            let m = measure_of(seg_start);
            let seg_end = end.min(starts[m + 1]);
            for value in decompose_duration(seg_end - seg_start, divisions) {
                measures[m].items.push(Item::Note(ScoreNote {
                    source_index: i,
                    pitch: note.event.pitch,
                    duration: value_units(&value, divisions),
                    value,
                    tie_start: false,
                    tie_stop: false,
                    string: note.state.placement.string,
                    fret: note.state.placement.fret,
                    finger: note.state.finger,
                    hammer_start: false,
                    hammer_stop: false,
                    pull_start: false,
                    pull_stop: false,
                    slide_start: false,
                    slide_stop: false,
                    bend: None,
                    vibrato_start: false,
                    vibrato_stop: false,
                }));
                pieces[i].push((m, measures[m].items.len() - 1));
            }
            seg_start = seg_end;
        }
        cursor = end;
    }
    emit_rests(&mut measures, cursor, starts[measure_count]);

    // Tie chains across the segments of each note.
    for refs in &pieces {
        for (k, &(m, idx)) in refs.iter().enumerate() {
            if let Item::Note(piece) = &mut measures[m].items[idx] {
                piece.tie_start = k + 1 < refs.len();
                piece.tie_stop = k > 0;
            }
        }
    }

    // Technique notations with start/stop pairing.
    for (i, note) in notes.iter().enumerate() {
        let first = pieces[i][0];
        let last = *pieces[i].last().unwrap();
        for technique in &note.techniques {
            match technique {
                Technique::HammerOn => {
                    set_note(&mut measures, first, |p| p.hammer_stop = true);
                    let prev_last = *pieces[i - 1].last().unwrap();
                    set_note(&mut measures, prev_last, |p| p.hammer_start = true);
                }
                Technique::PullOff => {
                    set_note(&mut measures, first, |p| p.pull_stop = true);
                    let prev_last = *pieces[i - 1].last().unwrap();
                    set_note(&mut measures, prev_last, |p| p.pull_start = true);
                }
                Technique::SlideStart => {
                    set_note(&mut measures, last, |p| p.slide_start = true);
                }
                Technique::SlideStop => {
                    set_note(&mut measures, first, |p| p.slide_stop = true);
                }
                Technique::Vibrato => {
                    set_note(&mut measures, first, |p| p.vibrato_start = true);
                    set_note(&mut measures, last, |p| p.vibrato_stop = true);
                }
                Technique::Bend { semitones } => {
                    set_note(&mut measures, first, |p| p.bend = Some((*semitones as i8, false)));
                }
                Technique::BendRelease { semitones } => {
                    set_note(&mut measures, first, |p| {
                        p.bend = Some((-(*semitones as i8), true))
                    });
                }
            }
        }
    }

    Ok(ScoreDocument { meta, divisions, tuning: spec.open_pitches.clone(), measures })
}

fn set_note(measures: &mut [Measure], at: (usize, usize), f: impl FnOnce(&mut ScoreNote)) {
    if let Item::Note(piece) = &mut measures[at.0].items[at.1] {
        f(piece);
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

const STEP_NAMES: [(&str, i8); 12] = [
    ("C", 0),
    ("C", 1),
    ("D", 0),
    ("D", 1),
    ("E", 0),
    ("F", 0),
    ("F", 1),
    ("G", 0),
    ("G", 1),
    ("A", 0),
    ("A", 1),
    ("B", 0),
];

fn type_name(denominator: u32) -> &'static str {
    match denominator {
        1 => "whole",
        2 => "half",
        4 => "quarter",
        8 => "eighth",
        16 => "16th",
        32 => "32nd",
        64 => "64th",
        128 => "128th",
        _ => "256th",
    }
}

/// Deterministic UTF-8 serialization; identical documents yield identical
/// bytes.
pub fn serialize(doc: &ScoreDocument) -> String {
    let mut out = String::with_capacity(16 * 1024);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    out.push_str(
        "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" \
         \"http://www.musicxml.org/dtds/partwise.dtd\">\n",
    );
    out.push_str("<score-partwise version=\"3.1\">\n");

    out.push_str("  <identification>\n    <encoding>\n");
    let _ = writeln!(out, "      <software>{}</software>", xml_escape(&doc.meta.software));
    out.push_str("    </encoding>\n");
    if let Some(echo) = &doc.meta.config_echo {
        out.push_str("    <miscellaneous>\n");
        let _ = writeln!(
            out,
            "      <miscellaneous-field name=\"run-config\">{}</miscellaneous-field>",
            xml_escape(echo)
        );
        out.push_str("    </miscellaneous>\n");
    }
    out.push_str("  </identification>\n");

    out.push_str("  <part-list>\n    <score-part id=\"P1\">\n");
    let _ = writeln!(out, "      <part-name>{}</part-name>", xml_escape(&doc.meta.part_name));
    out.push_str("    </score-part>\n  </part-list>\n");

    out.push_str("  <part id=\"P1\">\n");
    for (m_idx, measure) in doc.measures.iter().enumerate() {
        let _ = writeln!(out, "    <measure number=\"{}\">", measure.number);
        if m_idx == 0 || measure.time.is_some() {
            out.push_str("      <attributes>\n");
            if m_idx == 0 {
                let _ = writeln!(out, "        <divisions>{}</divisions>", doc.divisions);
                out.push_str("        <key><fifths>0</fifths></key>\n");
            }
            if let Some(sig) = measure.time {
                let _ = writeln!(
                    out,
                    "        <time><beats>{}</beats><beat-type>{}</beat-type></time>",
                    sig.numerator, sig.denominator
                );
            }
            if m_idx == 0 {
                out.push_str("        <staves>2</staves>\n");
                out.push_str("        <clef number=\"1\"><sign>G</sign><line>2</line></clef>\n");
                out.push_str("        <clef number=\"2\"><sign>TAB</sign><line>5</line></clef>\n");
                let strings = doc.tuning.len();
                let _ = writeln!(out, "        <staff-details number=\"2\">");
                let _ = writeln!(out, "          <staff-lines>{strings}</staff-lines>");
                for line in 1..=strings {
                    // Line 1 is the bottom staff line: the lowest string.
                    let pitch = doc.tuning[strings - line];
                    let (step, alter) = STEP_NAMES[(pitch % 12) as usize];
                    let octave = pitch as i16 / 12 - 1;
                    let _ = write!(out, "          <staff-tuning line=\"{line}\">");
                    let _ = write!(out, "<tuning-step>{step}</tuning-step>");
                    if alter != 0 {
                        let _ = write!(out, "<tuning-alter>{alter}</tuning-alter>");
                    }
                    let _ = writeln!(out, "<tuning-octave>{octave}</tuning-octave></staff-tuning>");
                }
                out.push_str("        </staff-details>\n");
            }
            out.push_str("      </attributes>\n");
        }
        if m_idx == 0 {
            if let Some(bpm) = doc.meta.bpm {
                let _ = writeln!(out, "      <sound tempo=\"{bpm}\"/>");
            }
        }

        for item in &measure.items {
            write_item(&mut out, item, 1, 1, false);
        }
        let _ = writeln!(out, "      <backup><duration>{}</duration></backup>", measure.capacity);
        for item in &measure.items {
            write_item(&mut out, item, 2, 2, true);
        }
        out.push_str("    </measure>\n");
    }
    out.push_str("  </part>\n</score-partwise>\n");
    out
}

fn write_item(out: &mut String, item: &Item, voice: u8, staff: u8, tab: bool) {
    match item {
        Item::Rest { duration, value } => {
            out.push_str("      <note>\n");
            if value.is_some() {
                out.push_str("        <rest/>\n");
            } else {
                out.push_str("        <rest measure=\"yes\"/>\n");
            }
            let _ = writeln!(out, "        <duration>{duration}</duration>");
            let _ = writeln!(out, "        <voice>{voice}</voice>");
            if let Some(v) = value {
                let _ = writeln!(out, "        <type>{}</type>", type_name(v.denominator));
                for _ in 0..v.dots {
                    out.push_str("        <dot/>\n");
                }
                write_time_modification(out, v);
            }
            let _ = writeln!(out, "        <staff>{staff}</staff>");
            out.push_str("      </note>\n");
        }
        Item::Note(n) => {
            out.push_str("      <note>\n");
            let (step, alter) = STEP_NAMES[(n.pitch % 12) as usize];
            let octave = n.pitch as i16 / 12 - 1;
            out.push_str("        <pitch>");
            let _ = write!(out, "<step>{step}</step>");
            if alter != 0 {
                let _ = write!(out, "<alter>{alter}</alter>");
            }
            let _ = writeln!(out, "<octave>{octave}</octave></pitch>");
            let _ = writeln!(out, "        <duration>{}</duration>", n.duration);
            if n.tie_stop {
                out.push_str("        <tie type=\"stop\"/>\n");
            }
            if n.tie_start {
                out.push_str("        <tie type=\"start\"/>\n");
            }
            let _ = writeln!(out, "        <voice>{voice}</voice>");
            let _ = writeln!(out, "        <type>{}</type>", type_name(n.value.denominator));
            for _ in 0..n.value.dots {
                out.push_str("        <dot/>\n");
            }
            if !tab && alter != 0 {
                out.push_str("        <accidental>sharp</accidental>\n");
            }
            write_time_modification(out, &n.value);
            let _ = writeln!(out, "        <staff>{staff}</staff>");

            let mut notations = String::new();
            if n.tie_stop {
                notations.push_str("          <tied type=\"stop\"/>\n");
            }
            if n.tie_start {
                notations.push_str("          <tied type=\"start\"/>\n");
            }
            if tab {
                if n.slide_stop {
                    notations.push_str(
                        "          <slide type=\"stop\" line-type=\"solid\" number=\"1\"/>\n",
                    );
                }
                if n.slide_start {
                    notations.push_str(
                        "          <slide type=\"start\" line-type=\"solid\" number=\"1\"/>\n",
                    );
                }
                if n.vibrato_start || n.vibrato_stop {
                    notations.push_str("          <ornaments>\n");
                    if n.vibrato_stop && !n.vibrato_start {
                        notations.push_str("            <wavy-line type=\"stop\"/>\n");
                    } else if n.vibrato_start && !n.vibrato_stop {
                        notations.push_str("            <wavy-line type=\"start\"/>\n");
                    } else {
                        notations.push_str("            <wavy-line type=\"start\"/>\n");
                        notations.push_str("            <wavy-line type=\"stop\"/>\n");
                    }
                    notations.push_str("          </ornaments>\n");
                }
                let mut technical = String::new();
                if n.hammer_stop {
                    technical.push_str("            <hammer-on type=\"stop\" number=\"1\"/>\n");
                }
                if n.hammer_start {
                    technical.push_str(
                        "            <hammer-on type=\"start\" number=\"1\">H</hammer-on>\n",
                    );
                }
                if n.pull_stop {
                    technical.push_str("            <pull-off type=\"stop\" number=\"1\"/>\n");
                }
                if n.pull_start {
                    technical.push_str(
                        "            <pull-off type=\"start\" number=\"1\">P</pull-off>\n",
                    );
                }
                if let Some((alter, release)) = n.bend {
                    technical.push_str("            <bend>");
                    let _ = write!(technical, "<bend-alter>{alter}</bend-alter>");
                    if release {
                        technical.push_str("<release/>");
                    }
                    technical.push_str("</bend>\n");
                }
                if n.finger >= 1 {
                    let _ = writeln!(technical, "            <fingering>{}</fingering>", n.finger);
                }
                let _ = writeln!(technical, "            <string>{}</string>", n.string);
                let _ = writeln!(technical, "            <fret>{}</fret>", n.fret);
                notations.push_str("          <technical>\n");
                notations.push_str(&technical);
                notations.push_str("          </technical>\n");
            } else if n.finger >= 1 {
                notations.push_str("          <technical>\n");
                let _ = writeln!(notations, "            <fingering>{}</fingering>", n.finger);
                notations.push_str("          </technical>\n");
            }
            if !notations.is_empty() {
                out.push_str("        <notations>\n");
                out.push_str(&notations);
                out.push_str("        </notations>\n");
            }
            out.push_str("      </note>\n");
        }
    }
}

fn write_time_modification(out: &mut String, value: &NoteValue) {
    if let Some((actual, normal)) = value.tuplet {
        let _ = writeln!(
            out,
            "        <time-modification><actual-notes>{actual}</actual-notes>\
             <normal-notes>{normal}</normal-notes></time-modification>"
        );
    }
}

// ---------------------------------------------------------------------------
// Reparse
// ---------------------------------------------------------------------------

/// Per-note tablature fields recovered from a MusicXML file.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredNote {
    pub pitch: u8,
    pub string: u8,
    pub fret: u8,
    /// 0 when no fingering element is present (open strings).
    pub finger: u8,
    pub techniques: Vec<Technique>,
}

#[derive(Debug, Clone, Default)]
pub struct Reparsed {
    pub notes: Vec<RecoveredNote>,
    pub warnings: Vec<String>,
}

/// Recovers string, fret, fingering, and technique notations from a
/// MusicXML partwise document. Tied continuations merge into their
/// opening note; notes on staves without any tablature content (the
/// standard-notation duplicates) are skipped silently; pitched notes
/// that should carry string/fret but do not produce a warning. Unknown
/// notations are ignored.
pub fn reparse(xml: &str) -> Result<Reparsed, XmlError> {
    let doc = parse_doc(xml).map_err(|e| XmlError::Parse(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "score-partwise" {
        return Err(XmlError::NotMusicXml);
    }
    let mut result = Reparsed::default();

    for part in root.children().filter(|n| n.has_tag_name("part")) {
        let all_notes: Vec<roxmltree::Node> =
            part.descendants().filter(|n| n.has_tag_name("note")).collect();
        // Staves that carry tablature info at least once.
        let mut tab_staves: Vec<u8> = all_notes
            .iter()
            .filter(|n| string_fret_of(n).is_some())
            .map(staff_of)
            .collect();
        tab_staves.sort_unstable();
        tab_staves.dedup();
        let has_tab_staff = !tab_staves.is_empty();

        let mut last_recovered: Option<usize> = None;
        for note in &all_notes {
            if note.children().any(|c| c.has_tag_name("rest")) {
                continue;
            }
            let staff = staff_of(note);
            let pitch = match pitch_of(note) {
                Some(p) => p,
                None => continue, // unpitched content is outside our scope
            };
            let info = string_fret_of(note);
            if info.is_none() {
                if !has_tab_staff || tab_staves.contains(&staff) {
                    result
                        .warnings
                        .push(format!("pitched note without string/fret skipped (pitch {pitch})"));
                }
                continue;
            }
            let (string, fret) = info.unwrap();
            let tie_stop = note
                .children()
                .any(|c| c.has_tag_name("tie") && c.attribute("type") == Some("stop"))
                || note
                    .descendants()
                    .any(|c| c.has_tag_name("tied") && c.attribute("type") == Some("stop"));

            let techniques = techniques_of(note);
            if tie_stop {
                if let Some(idx) = last_recovered {
                    for t in techniques {
                        if !result.notes[idx].techniques.contains(&t) {
                            result.notes[idx].techniques.push(t);
                        }
                    }
                    continue;
                }
            }
            let finger = note
                .descendants()
                .find(|c| c.has_tag_name("fingering"))
                .and_then(|c| c.text())
                .and_then(|t| t.trim().parse::<u8>().ok())
                .unwrap_or(0);
            result.notes.push(RecoveredNote { pitch, string, fret, finger, techniques });
            last_recovered = Some(result.notes.len() - 1);
        }
    }
    Ok(result)
}

/// MusicXML files carry a DOCTYPE, which roxmltree rejects by default.
pub(crate) fn parse_doc(xml: &str) -> Result<roxmltree::Document<'_>, roxmltree::Error> {
    roxmltree::Document::parse_with_options(
        xml,
        roxmltree::ParsingOptions { allow_dtd: true, ..Default::default() },
    )
}

fn staff_of(note: &roxmltree::Node) -> u8 {
    note.children()
        .find(|c| c.has_tag_name("staff"))
        .and_then(|c| c.text())
        .and_then(|t| t.trim().parse::<u8>().ok())
        .unwrap_or(1)
}

fn pitch_of(note: &roxmltree::Node) -> Option<u8> {
    let pitch = note.children().find(|c| c.has_tag_name("pitch"))?;
    let step = pitch.children().find(|c| c.has_tag_name("step"))?.text()?.trim().to_string();
    let alter: i32 = pitch
        .children()
        .find(|c| c.has_tag_name("alter"))
        .and_then(|c| c.text())
        .and_then(|t| t.trim().parse::<f64>().ok())
        .map(|a| a.round() as i32)
        .unwrap_or(0);
    let octave: i32 = pitch
        .children()
        .find(|c| c.has_tag_name("octave"))
        .and_then(|c| c.text())
        .and_then(|t| t.trim().parse().ok())?;
    let base = match step.as_str() {
        "C" => 0,
        "D" => 2,
        "E" => 4,
        "F" => 5,
        "G" => 7,
        "A" => 9,
        "B" => 11,
        _ => return None,
    };
    let value = (octave + 1) * 12 + base + alter;
    u8::try_from(value).ok()
}

fn string_fret_of(note: &roxmltree::Node) -> Option<(u8, u8)> {
    let technical = note.descendants().find(|c| c.has_tag_name("technical"))?;
    let string = technical
        .children()
        .find(|c| c.has_tag_name("string"))
        .and_then(|c| c.text())
        .and_then(|t| t.trim().parse().ok())?;
    let fret = technical
        .children()
        .find(|c| c.has_tag_name("fret"))
        .and_then(|c| c.text())
        .and_then(|t| t.trim().parse().ok())?;
    Some((string, fret))
}

fn techniques_of(note: &roxmltree::Node) -> Vec<Technique> {
    let mut out = Vec::new();
    for node in note.descendants() {
        match node.tag_name().name() {
            "hammer-on" if node.attribute("type") == Some("stop") => out.push(Technique::HammerOn),
            "pull-off" if node.attribute("type") == Some("stop") => out.push(Technique::PullOff),
            "slide" => match node.attribute("type") {
                Some("start") => out.push(Technique::SlideStart),
                Some("stop") => out.push(Technique::SlideStop),
                _ => {}
            },
            "wavy-line" if node.attribute("type") == Some("start") => {
                out.push(Technique::Vibrato)
            }
            "bend" => {
                let alter: f64 = node
                    .children()
                    .find(|c| c.has_tag_name("bend-alter"))
                    .and_then(|c| c.text())
                    .and_then(|t| t.trim().parse().ok())
                    .unwrap_or(0.0);
                let release = node.children().any(|c| c.has_tag_name("release"));
                let semitones = alter.abs().round() as u8;
                if semitones > 0 {
                    if release || alter < 0.0 {
                        out.push(Technique::BendRelease { semitones });
                    } else {
                        out.push(Technique::Bend { semitones });
                    }
                }
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::{quantize, NoteEvent, TimeSignatureMap};
    use crate::solver::FingeringState;

    fn rich_notes(specs: &[(u8, u64, u64, FingeringState, Vec<Technique>)]) -> Vec<RichNote> {
        specs
            .iter()
            .enumerate()
            .map(|(i, (pitch, onset, dur, state, techniques))| RichNote {
                event: NoteEvent {
                    index: i,
                    pitch: *pitch,
                    onset_ticks: *onset,
                    duration_ticks: *dur,
                    onset_s: *onset as f64 / 960.0,
                    duration_s: *dur as f64 / 960.0,
                    ioi_s: 0.5,
                },
                state: *state,
                techniques: techniques.clone(),
            })
            .collect()
    }

    fn quantized(notes: &[RichNote]) -> QuantizedMelody {
        let events: Vec<NoteEvent> = notes.iter().map(|n| n.event.clone()).collect();
        quantize(&events, 480, &TimeSignatureMap::default(), 4).unwrap()
    }

    #[test]
    fn single_note_maps_directly() {
        let notes = rich_notes(&[(60, 0, 480, FingeringState::new(5, 3, 2, 2), vec![])]);
        let rhythm = quantized(&notes);
        let doc =
            build_score(&notes, &rhythm, &InstrumentSpec::standard_guitar(), ScoreMeta::default())
                .unwrap();
        let xml = serialize(&doc);
        assert!(xml.contains("<string>5</string>"));
        assert!(xml.contains("<fret>3</fret>"));
        assert!(xml.contains("<fingering>2</fingering>"));
        assert!(xml.contains("<step>C</step>"));
        assert_eq!(doc.measures.len(), 1);

        let recovered = reparse(&xml).unwrap();
        assert!(recovered.warnings.is_empty());
        assert_eq!(
            recovered.notes,
            vec![RecoveredNote { pitch: 60, string: 5, fret: 3, finger: 2, techniques: vec![] }]
        );
    }

    #[test]
    fn hammer_on_pairs_start_and_stop() {
        let notes = rich_notes(&[
            (64, 0, 480, FingeringState::new(2, 5, 1, 5), vec![]),
            (66, 480, 480, FingeringState::new(2, 7, 3, 5), vec![Technique::HammerOn]),
        ]);
        let rhythm = quantized(&notes);
        let doc =
            build_score(&notes, &rhythm, &InstrumentSpec::standard_guitar(), ScoreMeta::default())
                .unwrap();
        let xml = serialize(&doc);
        let start = xml.find("<hammer-on type=\"start\"").unwrap();
        let stop = xml.find("<hammer-on type=\"stop\"").unwrap();
        assert!(start < stop, "start must be on the earlier note");
        let recovered = reparse(&xml).unwrap();
        assert_eq!(recovered.notes[1].techniques, vec![Technique::HammerOn]);
        assert!(recovered.notes[0].techniques.is_empty());
    }

    #[test]
    fn bend_alter_carries_semitones() {
        let notes = rich_notes(&[(
            69,
            0,
            960,
            FingeringState::new(2, 8, 3, 6),
            vec![Technique::Bend { semitones: 2 }],
        )]);
        let rhythm = quantized(&notes);
        let doc =
            build_score(&notes, &rhythm, &InstrumentSpec::standard_guitar(), ScoreMeta::default())
                .unwrap();
        let xml = serialize(&doc);
        assert!(xml.contains("<bend-alter>2</bend-alter>"));
        let recovered = reparse(&xml).unwrap();
        assert_eq!(recovered.notes[0].techniques, vec![Technique::Bend { semitones: 2 }]);
    }

    #[test]
    fn empty_melody_yields_one_rest_measure() {
        let notes: Vec<RichNote> = Vec::new();
        let rhythm = quantize(&[], 480, &TimeSignatureMap::default(), 4).unwrap();
        let doc =
            build_score(&notes, &rhythm, &InstrumentSpec::standard_guitar(), ScoreMeta::default())
                .unwrap();
        assert_eq!(doc.measures.len(), 1);
        assert_eq!(doc.measures[0].items.len(), 1);
        assert!(matches!(doc.measures[0].items[0], Item::Rest { value: None, .. }));
        let xml = serialize(&doc);
        assert!(xml.contains("<rest measure=\"yes\"/>"));
    }

    #[test]
    fn serialization_is_deterministic() {
        let notes = rich_notes(&[
            (64, 0, 480, FingeringState::new(2, 5, 1, 5), vec![Technique::Vibrato]),
            (67, 480, 1440, FingeringState::new(2, 8, 3, 6), vec![]),
        ]);
        let rhythm = quantized(&notes);
        let spec = InstrumentSpec::standard_guitar();
        let a = serialize(&build_score(&notes, &rhythm, &spec, ScoreMeta::default()).unwrap());
        let b = serialize(&build_score(&notes, &rhythm, &spec, ScoreMeta::default()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn cross_measure_notes_are_tied_and_merge_back() {
        // A note starting on beat 4 of 4/4 spills into measure 2.
        let notes = rich_notes(&[
            (64, 0, 1440, FingeringState::new(2, 5, 1, 5), vec![]),
            (67, 1440, 1920, FingeringState::new(2, 8, 3, 6), vec![Technique::Vibrato]),
        ]);
        let rhythm = quantized(&notes);
        let doc =
            build_score(&notes, &rhythm, &InstrumentSpec::standard_guitar(), ScoreMeta::default())
                .unwrap();
        let xml = serialize(&doc);
        assert!(xml.contains("<tie type=\"start\"/>"));
        assert!(xml.contains("<tie type=\"stop\"/>"));
        let recovered = reparse(&xml).unwrap();
        assert_eq!(recovered.notes.len(), 2);
        assert_eq!(recovered.notes[1].techniques, vec![Technique::Vibrato]);
        // Wavy line must close on the trailing tied segment.
        assert!(xml.contains("<wavy-line type=\"stop\"/>"));
    }

    #[test]
    fn misaligned_inputs_are_an_internal_error() {
        let notes = rich_notes(&[(60, 0, 480, FingeringState::new(5, 3, 2, 2), vec![])]);
        let rhythm = quantize(&[], 480, &TimeSignatureMap::default(), 4).unwrap();
        assert!(matches!(
            build_score(&notes, &rhythm, &InstrumentSpec::standard_guitar(), ScoreMeta::default()),
            Err(XmlError::MisalignedSequences { .. })
        ));
    }

    #[test]
    fn minimal_note_without_string_warns() {
        let xml = r#"<?xml version="1.0" encoding="UTF-8"?>
<score-partwise version="3.1">
  <part-list><score-part id="P1"><part-name>x</part-name></score-part></part-list>
  <part id="P1"><measure number="1">
    <note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration></note>
  </measure></part>
</score-partwise>"#;
        let recovered = reparse(xml).unwrap();
        assert!(recovered.notes.is_empty());
        assert_eq!(recovered.warnings.len(), 1);
    }

    #[test]
    fn non_xml_is_a_parse_error() {
        assert!(matches!(reparse("not xml at all"), Err(XmlError::Parse(_))));
        assert!(matches!(reparse("<music><note/></music>"), Err(XmlError::NotMusicXml)));
    }

    #[test]
    fn serialized_output_passes_the_structural_validator() {
        let notes = rich_notes(&[
            (
                64,
                0,
                1440,
                FingeringState::new(2, 5, 1, 5),
                vec![Technique::Vibrato, Technique::SlideStart],
            ),
            (67, 1440, 960, FingeringState::new(2, 8, 1, 8), vec![Technique::SlideStop]),
            (
                69,
                2400,
                960,
                FingeringState::new(2, 8, 1, 8),
                vec![Technique::Bend { semitones: 2 }],
            ),
            (
                67,
                3360,
                960,
                FingeringState::new(2, 8, 1, 8),
                vec![Technique::BendRelease { semitones: 2 }],
            ),
            (59, 4320, 480, FingeringState::new(2, 0, 0, 8), vec![Technique::PullOff]),
        ]);
        let rhythm = quantized(&notes);
        let meta = ScoreMeta {
            config_echo: Some("{\"seed\": 1}".into()),
            bpm: Some(120.0),
            ..ScoreMeta::default()
        };
        let doc = build_score(&notes, &rhythm, &InstrumentSpec::standard_guitar(), meta).unwrap();
        let xml = serialize(&doc);
        if let Err(errors) = validate_musicxml(&xml) {
            panic!("validator rejected serializer output:\n{}", errors.join("\n"));
        }
    }
}
