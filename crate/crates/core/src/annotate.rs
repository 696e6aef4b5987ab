//! Articulations and expressive techniques.
//!
//! Decorates the fingered melody with hammer-ons, pull-offs, vibrato,
//! slide legato, and basic upward bends. Biomechanical predicates decide
//! where a technique is possible; per-string statistical targets decide
//! how many of the possible points actually receive it, selected by a
//! seeded PRNG (vibrato instead prefers the longest notes). Bend insertion
//! recreates the classic cliché shapes and may re-fret notes, but only
//! under a full local feasibility re-check.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fretboard::InstrumentSpec;
use crate::midi::NoteEvent;
use crate::solver::{
    node_cost, transition_feasibility, validate_state, FingeringConfig, FingeringState,
};

#[derive(Debug, Error, PartialEq)]
pub enum AnnotateError {
    #[error("{events} events but {states} fingering states")]
    MismatchedLengths { events: usize, states: usize },
    #[error("invalid technique targets: {0}")]
    InvalidTargets(String),
}

/// A technique attached to one note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Technique {
    HammerOn,
    PullOff,
    Vibrato,
    SlideStart,
    SlideStop,
    Bend { semitones: u8 },
    BendRelease { semitones: u8 },
}

impl Technique {
    /// The statistics-facing kind, counting each technique once: slides on
    /// their start note, bends on the bend note (releases uncounted).
    pub fn stat_kind(&self) -> Option<TechniqueKind> {
        match self {
            Technique::HammerOn => Some(TechniqueKind::HammerOn),
            Technique::PullOff => Some(TechniqueKind::PullOff),
            Technique::Vibrato => Some(TechniqueKind::Vibrato),
            Technique::SlideStart => Some(TechniqueKind::Slide),
            Technique::SlideStop => None,
            Technique::Bend { .. } => Some(TechniqueKind::Bend),
            Technique::BendRelease { .. } => None,
        }
    }
}

/// Technique categories that carry per-string usage ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechniqueKind {
    HammerOn,
    PullOff,
    Vibrato,
    Slide,
    Bend,
}

pub const TECHNIQUE_KINDS: [TechniqueKind; 5] = [
    TechniqueKind::HammerOn,
    TechniqueKind::PullOff,
    TechniqueKind::Vibrato,
    TechniqueKind::Slide,
    TechniqueKind::Bend,
];

impl std::fmt::Display for TechniqueKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TechniqueKind::HammerOn => "hammer_on",
            TechniqueKind::PullOff => "pull_off",
            TechniqueKind::Vibrato => "vibrato",
            TechniqueKind::Slide => "slide",
            TechniqueKind::Bend => "bend",
        };
        f.write_str(name)
    }
}

/// Target fraction of notes carrying each technique, for one string.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StringRatios {
    pub hammer_on: f64,
    pub pull_off: f64,
    pub vibrato: f64,
    pub slide: f64,
    pub bend: f64,
}

impl StringRatios {
    pub fn get(&self, kind: TechniqueKind) -> f64 {
        match kind {
            TechniqueKind::HammerOn => self.hammer_on,
            TechniqueKind::PullOff => self.pull_off,
            TechniqueKind::Vibrato => self.vibrato,
            TechniqueKind::Slide => self.slide,
            TechniqueKind::Bend => self.bend,
        }
    }
}

/// Annotation policy: per-string ratios, bend limits, vibrato thresholds,
/// and the insertion switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TechniqueTargets {
    /// Index 0 is string 1 (highest-pitched). Missing strings default to
    /// all-zero ratios.
    pub ratios: Vec<StringRatios>,
    /// Maximum bend amplitude in semitones per finger 1..=4; 0 excludes
    /// the finger from bends.
    pub max_bend_per_finger: [u8; 4],
    /// Duration at which vibrato becomes possible.
    pub vibrato_possible_s: f64,
    /// Duration at which vibrato becomes highly likely.
    pub vibrato_likely_s: f64,
    /// Minimum duration of a note carrying a bend.
    pub min_bend_s: f64,
    /// Connect same-finger same-string note pairs with slides wherever
    /// possible.
    pub enable_slides: bool,
    pub insert_all_vibrato: bool,
    pub insert_all_hammer_on: bool,
    pub insert_all_pull_off: bool,
}

impl Default for TechniqueTargets {
    fn default() -> Self {
        // Placeholder ratios shaped after the usual picture of lead
        // electric guitar practice: vibrato and bends concentrate on the
        // higher strings, bends vanish on the wound strings. Meant to be
        // replaced by corpus statistics or user taste.
        let r = |hammer_on, pull_off, vibrato, slide, bend| StringRatios {
            hammer_on,
            pull_off,
            vibrato,
            slide,
            bend,
        };
        Self {
            ratios: vec![
                r(0.06, 0.05, 0.12, 0.01, 0.10),
                r(0.06, 0.05, 0.10, 0.01, 0.09),
                r(0.07, 0.04, 0.08, 0.01, 0.06),
                r(0.07, 0.03, 0.06, 0.01, 0.02),
                r(0.06, 0.02, 0.05, 0.01, 0.01),
                r(0.04, 0.02, 0.04, 0.01, 0.00),
            ],
            max_bend_per_finger: [2, 2, 2, 0],
            vibrato_possible_s: 0.5,
            vibrato_likely_s: 1.0,
            min_bend_s: 0.4,
            enable_slides: false,
            insert_all_vibrato: false,
            insert_all_hammer_on: false,
            insert_all_pull_off: false,
        }
    }
}

impl TechniqueTargets {
    pub fn validate(&self) -> Result<(), AnnotateError> {
        for (i, r) in self.ratios.iter().enumerate() {
            for kind in TECHNIQUE_KINDS {
                let v = r.get(kind);
                if !(0.0..=1.0).contains(&v) {
                    return Err(AnnotateError::InvalidTargets(format!(
                        "ratio for string {} / {kind} is {v}, outside [0, 1]",
                        i + 1
                    )));
                }
            }
        }
        if self.vibrato_possible_s > self.vibrato_likely_s {
            return Err(AnnotateError::InvalidTargets(
                "vibrato_possible_s must not exceed vibrato_likely_s".into(),
            ));
        }
        if self.min_bend_s < 0.0 || self.vibrato_possible_s < 0.0 {
            return Err(AnnotateError::InvalidTargets("durations must be non-negative".into()));
        }
        Ok(())
    }

    pub fn ratio_for(&self, string: u8, kind: TechniqueKind) -> f64 {
        self.ratios
            .get(string as usize - 1)
            .map(|r| r.get(kind))
            .unwrap_or(0.0)
    }
}

/// A note with its fingering and attached techniques. For a note carrying
/// `Bend { semitones }` the fretted placement sounds `semitones` below the
/// melody pitch; in all other cases the placement realizes the pitch
/// directly.
#[derive(Debug, Clone, PartialEq)]
pub struct RichNote {
    pub event: NoteEvent,
    pub state: FingeringState,
    pub techniques: Vec<Technique>,
}

impl RichNote {
    pub fn sounded_pitch(&self) -> u8 {
        self.event.pitch
    }

    pub fn bend_semitones(&self) -> u8 {
        self.techniques
            .iter()
            .find_map(|t| match t {
                Technique::Bend { semitones } => Some(*semitones),
                _ => None,
            })
            .unwrap_or(0)
    }

    pub fn has(&self, technique: &Technique) -> bool {
        self.techniques.contains(technique)
    }

    fn has_kind(&self, probe: fn(&Technique) -> bool) -> bool {
        self.techniques.iter().any(probe)
    }

    fn has_any_slide(&self) -> bool {
        self.has_kind(|t| matches!(t, Technique::SlideStart | Technique::SlideStop))
    }

    fn has_bend_or_release(&self) -> bool {
        self.has_kind(|t| matches!(t, Technique::Bend { .. } | Technique::BendRelease { .. }))
    }
}

/// One entry of the annotated-sequence JSON dump; the wire format consumed
/// by the exporter, the stats scanner, and test harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteDump {
    pub index: usize,
    pub pitch: u8,
    pub string: u8,
    pub fret: u8,
    pub finger: u8,
    pub hand_position: u8,
    pub techniques: Vec<Technique>,
}

impl NoteDump {
    pub fn from_rich(note: &RichNote) -> Self {
        Self {
            index: note.event.index,
            pitch: note.event.pitch,
            string: note.state.placement.string,
            fret: note.state.placement.fret,
            finger: note.state.finger,
            hand_position: note.state.hand_position,
            techniques: note.techniques.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Biomechanical predicates
// ---------------------------------------------------------------------------

/// Hammer-on onto `cur`: preceded on the same string by a lower-pitched
/// note that is open or played with a lower finger.
pub fn can_hammer_on(prev: &RichNote, cur: &RichNote) -> bool {
    prev.state.placement.string == cur.state.placement.string
        && prev.event.pitch < cur.event.pitch
        && (prev.state.is_open() || prev.state.finger < cur.state.finger)
}

/// Pull-off onto `cur`: preceded on the same string by a higher-pitched
/// note; always possible down to an open string, otherwise the previous
/// finger must be higher.
pub fn can_pull_off(prev: &RichNote, cur: &RichNote) -> bool {
    prev.state.placement.string == cur.state.placement.string
        && prev.event.pitch > cur.event.pitch
        && (cur.state.is_open() || prev.state.finger > cur.state.finger)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VibratoLevel {
    None,
    Possible,
    Likely,
}

/// Vibrato is never allowed on open strings; two duration thresholds
/// grade fretted notes as possible or highly likely carriers.
pub fn vibrato_level(note: &RichNote, targets: &TechniqueTargets) -> VibratoLevel {
    if note.state.is_open() || note.event.duration_s < targets.vibrato_possible_s {
        VibratoLevel::None
    } else if note.event.duration_s < targets.vibrato_likely_s {
        VibratoLevel::Possible
    } else {
        VibratoLevel::Likely
    }
}

/// Slide from `cur` into `next`: same string, different fret, same
/// fretting finger.
pub fn can_slide(cur: &RichNote, next: &RichNote) -> bool {
    cur.state.placement.string == next.state.placement.string
        && cur.state.placement.fret != next.state.placement.fret
        && cur.state.finger >= 1
        && cur.state.finger == next.state.finger
}

// ---------------------------------------------------------------------------
// Bend opportunities
// ---------------------------------------------------------------------------

/// A proposed cliché rewrite. `rewrites` lists the notes whose fingering
/// changes; `span` is the full range of notes the pattern reads, so that
/// proposals never overlap or invalidate each other.
#[derive(Debug, Clone, PartialEq)]
pub struct BendRewrite {
    pub span: (usize, usize),
    pub rewrites: Vec<(usize, FingeringState)>,
    pub bend_note: usize,
    pub release_note: Option<usize>,
    pub semitones: u8,
    /// String the bend sounds on, for target accounting.
    pub string: u8,
}

/// Preferred bend amplitudes, whole-step first (the classic unison bend).
const BEND_AMOUNT_PREFERENCE: [u8; 4] = [2, 1, 3, 4];

/// Detects the three cliché shapes and proposes rewrites:
/// X-Y-X peaks become bend + release on X's placement; unison runs get
/// every even occurrence re-fretted on the next lower-pitched string and
/// bent up to pitch; ascending pairs within bend range are re-fretted at
/// the first note's placement. Patterns are claimed left to right
/// (peaks, then runs, then pairs) and never overlap; every proposal has
/// already passed duration, per-finger amplitude, span, and transition
/// feasibility checks. Descending X-Y-X shapes would need a pre-bend and
/// are only reported in the diagnostics.
pub fn find_bend_opportunities(
    notes: &[RichNote],
    targets: &TechniqueTargets,
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> (Vec<BendRewrite>, Vec<String>) {
    let n = notes.len();
    let mut claimed = vec![false; n];
    let mut proposals: Vec<BendRewrite> = Vec::new();
    let mut diagnostics: Vec<String> = Vec::new();

    let free = |claimed: &[bool], lo: usize, hi: usize| !claimed[lo..=hi].iter().any(|&c| c);

    // X-Y-X peaks.
    for i in 0..n.saturating_sub(2) {
        if !free(&claimed, i, i + 2) {
            continue;
        }
        let (a, b, c) = (&notes[i], &notes[i + 1], &notes[i + 2]);
        if a.event.pitch != c.event.pitch || b.event.pitch == a.event.pitch {
            continue;
        }
        if b.event.pitch < a.event.pitch {
            diagnostics.push(format!(
                "notes {}-{}-{}: descending peak needs a pre-bend, not rewritten",
                i,
                i + 1,
                i + 2
            ));
            continue;
        }
        let diff = b.event.pitch - a.event.pitch;
        if a.state.finger == 0
            || diff > targets.max_bend_per_finger[a.state.finger as usize - 1]
            || b.event.duration_s < targets.min_bend_s
        {
            continue;
        }
        let held = a.state;
        let next_ok = match notes.get(i + 3) {
            Some(next) => {
                transition_feasibility(&held, &next.state, c.event.ioi_s, config).is_ok()
            }
            None => true,
        };
        if next_ok
            && transition_feasibility(&a.state, &held, a.event.ioi_s, config).is_ok()
            && transition_feasibility(&held, &held, b.event.ioi_s, config).is_ok()
        {
            claimed[i..=i + 2].iter_mut().for_each(|c| *c = true);
            proposals.push(BendRewrite {
                span: (i, i + 2),
                rewrites: vec![(i + 1, held), (i + 2, held)],
                bend_note: i + 1,
                release_note: Some(i + 2),
                semitones: diff,
                string: held.placement.string,
            });
        }
    }

    // Unison runs: bend every even occurrence.
    let mut i = 0;
    while i < n {
        if claimed[i] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && !claimed[j + 1] && notes[j + 1].event.pitch == notes[i].event.pitch {
            j += 1;
        }
        if j > i {
            let mut run_proposals = Vec::new();
            for k in (i + 1..=j).step_by(2) {
                let prev = &notes[k - 1];
                let next_state = if k + 1 < n { Some(notes[k + 1].state) } else { None };
                if let Some(p) =
                    propose_unison_bend(notes, k, prev.state, next_state, targets, spec, config)
                {
                    run_proposals.push(p);
                }
            }
            if !run_proposals.is_empty() {
                claimed[i..=j].iter_mut().for_each(|c| *c = true);
                proposals.extend(run_proposals);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    // Ascending pairs playable at one placement.
    for i in 0..n.saturating_sub(1) {
        if !free(&claimed, i, i + 1) {
            continue;
        }
        let (a, b) = (&notes[i], &notes[i + 1]);
        if b.event.pitch <= a.event.pitch || a.state.finger == 0 {
            continue;
        }
        let diff = b.event.pitch - a.event.pitch;
        if diff > targets.max_bend_per_finger[a.state.finger as usize - 1]
            || b.event.duration_s < targets.min_bend_s
        {
            continue;
        }
        let held = a.state;
        let next_ok = match notes.get(i + 2) {
            Some(next) => {
                transition_feasibility(&held, &next.state, b.event.ioi_s, config).is_ok()
            }
            None => true,
        };
        if next_ok && transition_feasibility(&a.state, &held, a.event.ioi_s, config).is_ok() {
            claimed[i..=i + 1].iter_mut().for_each(|c| *c = true);
            proposals.push(BendRewrite {
                span: (i, i + 1),
                rewrites: vec![(i + 1, held)],
                bend_note: i + 1,
                release_note: None,
                semitones: diff,
                string: held.placement.string,
            });
        }
    }

    proposals.sort_by_key(|p| p.bend_note);
    (proposals, diagnostics)
}

/// Re-fret the k-th note of a unison run on the next lower-pitched string,
/// bent up to the run pitch. Candidate fingerings are tried in tie-break
/// order; whole-step bends are preferred.
fn propose_unison_bend(
    notes: &[RichNote],
    k: usize,
    prev_state: FingeringState,
    next_state: Option<FingeringState>,
    targets: &TechniqueTargets,
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> Option<BendRewrite> {
    let note = &notes[k];
    if note.event.duration_s < targets.min_bend_s {
        return None;
    }
    let string = prev_state.placement.string + 1;
    if string > spec.string_count {
        return None;
    }
    let open = spec.open_pitches[string as usize - 1];
    let hp_lo = config.hand_position_range.0.max(1);
    let hp_hi = config.hand_position_range.1.min(spec.fret_count);
    for semitones in BEND_AMOUNT_PREFERENCE {
        if note.event.pitch < open.saturating_add(semitones) {
            continue;
        }
        let fret = note.event.pitch - open - semitones;
        if fret < 1 || fret > spec.fret_count {
            continue;
        }
        for finger in 1..=4u8 {
            if targets.max_bend_per_finger[finger as usize - 1] < semitones {
                continue;
            }
            let span = config.spans[finger as usize - 1];
            for hp in hp_lo..=hp_hi {
                let offset = fret as i16 - hp as i16;
                if offset < span.min as i16 || offset > span.max as i16 {
                    continue;
                }
                let candidate = FingeringState::new(string, fret, finger, hp);
                let prev_ok = transition_feasibility(
                    &prev_state,
                    &candidate,
                    notes[k - 1].event.ioi_s,
                    config,
                )
                .is_ok();
                let next_ok = match next_state {
                    Some(next) => {
                        transition_feasibility(&candidate, &next, note.event.ioi_s, config).is_ok()
                    }
                    None => true,
                };
                if prev_ok && next_ok {
                    return Some(BendRewrite {
                        span: (k, k),
                        rewrites: vec![(k, candidate)],
                        bend_note: k,
                        release_note: None,
                        semitones,
                        string,
                    });
                }
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Target-driven insertion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedMelody {
    pub notes: Vec<RichNote>,
    pub diagnostics: Vec<String>,
}

/// Round-half-away-from-zero target count for one (string, technique).
fn target_count(ratio: f64, notes_on_string: usize) -> usize {
    (ratio * notes_on_string as f64).round() as usize
}

/// Partial Fisher-Yates: `k` distinct indices from `0..len`, in sorted
/// order, consuming the PRNG deterministically.
fn sample_indices(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..len).collect();
    let k = k.min(len);
    for i in 0..k {
        let j = i + (rng.next_u64() as usize) % (len - i);
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Annotate the fingered melody.
///
/// Passes run slides, bends, hammer-on/pull-off, vibrato, in that order:
/// the fingering-mutating bend pass runs early so later passes see final
/// placements, and every pass respects the annotations already made.
pub fn annotate(
    events: &[NoteEvent],
    states: &[FingeringState],
    spec: &InstrumentSpec,
    config: &FingeringConfig,
    targets: &TechniqueTargets,
    seed: u64,
) -> Result<AnnotatedMelody, AnnotateError> {
    if events.len() != states.len() {
        return Err(AnnotateError::MismatchedLengths {
            events: events.len(),
            states: states.len(),
        });
    }
    targets.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut notes: Vec<RichNote> = events
        .iter()
        .zip(states)
        .map(|(event, state)| RichNote {
            event: event.clone(),
            state: *state,
            techniques: Vec::new(),
        })
        .collect();

    // Slide legato: opt-in, inserted at every possible point.
    if targets.enable_slides {
        for i in 0..notes.len().saturating_sub(1) {
            if can_slide(&notes[i], &notes[i + 1]) {
                notes[i].techniques.push(Technique::SlideStart);
                notes[i + 1].techniques.push(Technique::SlideStop);
            }
        }
    }

    // Bends: detect cliché rewrites, then sample per target string.
    let (proposals, mut diagnostics) = find_bend_opportunities(&notes, targets, spec, config);
    let eligible: Vec<BendRewrite> = proposals
        .into_iter()
        .filter(|p| {
            // A rewrite would invalidate any slide touching the re-fretted
            // notes, and a slide into a bend is excluded outright.
            p.rewrites.iter().all(|&(i, _)| !notes[i].has_any_slide())
                && (p.bend_note == 0 || !notes[p.bend_note - 1].has(&Technique::SlideStart))
        })
        .collect();
    let notes_per_string = count_notes_per_string(&notes, spec.string_count);
    for string in 1..=spec.string_count {
        let pool: Vec<&BendRewrite> = eligible.iter().filter(|p| p.string == string).collect();
        if pool.is_empty() {
            continue;
        }
        let target = target_count(
            targets.ratio_for(string, TechniqueKind::Bend),
            notes_per_string[string as usize - 1],
        );
        let chosen: Vec<usize> = if pool.len() <= target {
            (0..pool.len()).collect()
        } else {
            sample_indices(&mut rng, pool.len(), target)
        };
        for idx in chosen {
            let p = pool[idx];
            for &(i, state) in &p.rewrites {
                notes[i].state = state;
            }
            notes[p.bend_note].techniques.push(Technique::Bend { semitones: p.semitones });
            if let Some(r) = p.release_note {
                notes[r].techniques.push(Technique::BendRelease { semitones: p.semitones });
            }
        }
    }

    // Hammer-ons and pull-offs: random selection toward the targets.
    for kind in [TechniqueKind::HammerOn, TechniqueKind::PullOff] {
        let insert_all = match kind {
            TechniqueKind::HammerOn => targets.insert_all_hammer_on,
            _ => targets.insert_all_pull_off,
        };
        let candidates: Vec<usize> = (1..notes.len())
            .filter(|&i| {
                let (prev, cur) = (&notes[i - 1], &notes[i]);
                if cur.has_bend_or_release() {
                    return false;
                }
                match kind {
                    TechniqueKind::HammerOn => can_hammer_on(prev, cur),
                    _ => can_pull_off(prev, cur),
                }
            })
            .collect();
        let notes_per_string = count_notes_per_string(&notes, spec.string_count);
        for string in 1..=spec.string_count {
            let pool: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&i| notes[i].state.placement.string == string)
                .collect();
            if pool.is_empty() {
                continue;
            }
            let target = if insert_all {
                pool.len()
            } else {
                target_count(
                    targets.ratio_for(string, kind),
                    notes_per_string[string as usize - 1],
                )
            };
            let chosen = if pool.len() <= target {
                (0..pool.len()).collect()
            } else {
                sample_indices(&mut rng, pool.len(), target)
            };
            let technique = match kind {
                TechniqueKind::HammerOn => Technique::HammerOn,
                _ => Technique::PullOff,
            };
            for idx in chosen {
                notes[pool[idx]].techniques.push(technique);
            }
        }
    }

    // Vibrato: longest notes first, likely tier before possible tier.
    let notes_per_string = count_notes_per_string(&notes, spec.string_count);
    for string in 1..=spec.string_count {
        let mut tiers: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, note) in notes.iter().enumerate() {
            if note.state.placement.string != string || note.has_bend_or_release() {
                continue;
            }
            match vibrato_level(note, targets) {
                VibratoLevel::Likely => tiers[0].push(i),
                VibratoLevel::Possible => tiers[1].push(i),
                VibratoLevel::None => {}
            }
        }
        for tier in &mut tiers {
            tier.sort_by(|&a, &b| {
                notes[b]
                    .event
                    .duration_s
                    .partial_cmp(&notes[a].event.duration_s)
                    .unwrap()
                    .then(a.cmp(&b))
            });
        }
        let pool: Vec<usize> = tiers[0].iter().chain(tiers[1].iter()).copied().collect();
        let take = if targets.insert_all_vibrato {
            pool.len()
        } else {
            target_count(
                targets.ratio_for(string, TechniqueKind::Vibrato),
                notes_per_string[string as usize - 1],
            )
            .min(pool.len())
        };
        for &i in pool.iter().take(take) {
            notes[i].techniques.push(Technique::Vibrato);
        }
    }

    Ok(AnnotatedMelody { notes, diagnostics })
}

fn count_notes_per_string(notes: &[RichNote], string_count: u8) -> Vec<usize> {
    let mut counts = vec![0usize; string_count as usize];
    for n in notes {
        let s = n.state.placement.string as usize;
        if s >= 1 && s <= string_count as usize {
            counts[s - 1] += 1;
        }
    }
    counts
}

// ---------------------------------------------------------------------------
// Post-hoc soundness validation
// ---------------------------------------------------------------------------

/// Re-checks every emitted annotation against the final sequence: each
/// technique's precondition, the compatibility matrix, bend limits, pitch
/// preservation, span invariants, and transition feasibility. Returns all
/// violations found.
pub fn validate_annotations(
    notes: &[RichNote],
    targets: &TechniqueTargets,
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> Result<(), Vec<String>> {
    let mut errors: Vec<String> = Vec::new();

    for (i, note) in notes.iter().enumerate() {
        let mut err = |message: String| errors.push(format!("note {i}: {message}"));
        let bend = note.bend_semitones();
        let fretted_expected = note.event.pitch as i16 - bend as i16;
        if fretted_expected < 0 {
            err(format!("bend of {bend} semitones exceeds pitch"));
            continue;
        }
        if let Err(m) = validate_state(&note.state, fretted_expected as u8, spec, config) {
            err(m);
        }

        let has_hammer = note.has(&Technique::HammerOn);
        let has_pull = note.has(&Technique::PullOff);
        let has_vibrato = note.has(&Technique::Vibrato);
        let has_bend = bend > 0;
        let has_release = note.has_kind(|t| matches!(t, Technique::BendRelease { .. }));
        let has_slide_start = note.has(&Technique::SlideStart);

        if has_hammer && has_pull {
            err("hammer-on and pull-off on the same note".into());
        }
        if has_bend && (has_hammer || has_pull || has_vibrato || has_slide_start) {
            err("bend combined with a conflicting technique".into());
        }
        if has_release && note.techniques.len() > 1 {
            err("bend release must be the only technique on its note".into());
        }
        if has_slide_start {
            if let Some(next) = notes.get(i + 1) {
                if next.bend_semitones() > 0 {
                    err("slide start into a bent note".into());
                }
            }
        }

        for technique in &note.techniques {
            match technique {
                Technique::HammerOn => {
                    if i == 0 || !can_hammer_on(&notes[i - 1], note) {
                        err("hammer-on precondition fails".into());
                    }
                }
                Technique::PullOff => {
                    if i == 0 || !can_pull_off(&notes[i - 1], note) {
                        err("pull-off precondition fails".into());
                    }
                }
                Technique::Vibrato => {
                    if vibrato_level(note, targets) == VibratoLevel::None {
                        err("vibrato on an ineligible note".into());
                    }
                }
                Technique::SlideStart => match notes.get(i + 1) {
                    Some(next) if can_slide(note, next) => {}
                    _ => err("slide start precondition fails".into()),
                },
                Technique::SlideStop => {
                    if i == 0 || !can_slide(&notes[i - 1], note) {
                        err("slide stop precondition fails".into());
                    }
                }
                Technique::Bend { semitones } => {
                    let s = *semitones;
                    if s == 0 {
                        err("bend of zero semitones".into());
                    }
                    if note.state.finger == 0 {
                        err("bend on an open string".into());
                    } else if targets.max_bend_per_finger[note.state.finger as usize - 1] < s {
                        err(format!("bend of {s} exceeds finger limit"));
                    }
                    if note.event.duration_s < targets.min_bend_s {
                        err("bent note shorter than the minimum bend duration".into());
                    }
                }
                Technique::BendRelease { semitones } => {
                    let valid = i > 0
                        && notes[i - 1].has(&Technique::Bend { semitones: *semitones })
                        && notes[i - 1].state == note.state;
                    if !valid {
                        err("bend release without a matching held bend".into());
                    }
                }
            }
        }
    }

    for i in 1..notes.len() {
        if let Err(reason) = transition_feasibility(
            &notes[i - 1].state,
            &notes[i].state,
            notes[i - 1].event.ioi_s,
            config,
        ) {
            errors.push(format!("transition {} -> {}: {reason}", i - 1, i));
        }
    }

    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Total solver cost of the (possibly rewritten) state sequence, for
/// reporting alongside the annotations.
pub fn annotated_cost(notes: &[RichNote], config: &FingeringConfig) -> f64 {
    let mut total = 0.0;
    for (i, n) in notes.iter().enumerate() {
        if i > 0 {
            total += crate::solver::transition_cost(&notes[i - 1].state, &n.state, config).total();
        }
        total += node_cost(&n.state, config).total();
    }
    total
}
