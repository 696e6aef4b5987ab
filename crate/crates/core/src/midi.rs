//! Standard MIDI File ingestion.
//!
//! Parses SMF format 0/1 byte streams into a validated monophonic note
//! sequence with onset/duration in both ticks and seconds, inter-onset
//! intervals, and the tempo / time-signature maps needed downstream.
//! Only note-on/note-off, tempo, and time-signature events are
//! interpreted; everything else is skipped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grids accepted by [`quantize`], in subdivisions per quarter note.
pub const VALID_GRIDS: [u16; 8] = [1, 2, 4, 8, 12, 16, 24, 48];

#[derive(Debug, Error)]
pub enum MidiError {
    #[error("malformed SMF at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("SMPTE time division is not supported (byte {offset})")]
    UnsupportedDivision { offset: usize },
    #[error("track {track} not found ({track_count} tracks in file)")]
    TrackNotFound { track: usize, track_count: usize },
    #[error("no notes found in the selected track")]
    EmptyMelody,
    #[error("note {index} has zero duration")]
    ZeroDurationNote { index: usize },
    #[error("melody is not monophonic: overlapping note pairs {0:?}")]
    Monophony(MonophonyReport),
    #[error("invalid quantization grid {0}; valid grids: {VALID_GRIDS:?}")]
    InvalidGrid(u16),
}

/// One melody note, fully timed.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteEvent {
    /// Ordinal position in the melody, 0-based.
    pub index: usize,
    /// MIDI note number, 0-127.
    pub pitch: u8,
    pub onset_ticks: u64,
    pub duration_ticks: u64,
    pub onset_s: f64,
    pub duration_s: f64,
    /// Seconds to the next note's onset; `f64::INFINITY` for the last note
    /// so the final transition never prunes.
    pub ioi_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSignature {
    pub numerator: u8,
    pub denominator: u16,
}

impl Default for TimeSignature {
    fn default() -> Self {
        Self { numerator: 4, denominator: 4 }
    }
}

/// Tempo changes as (tick, microseconds per quarter), sorted by tick.
#[derive(Debug, Clone)]
pub struct TempoMap {
    pub ppq: u32,
    changes: Vec<(u64, u32)>,
}

pub const DEFAULT_US_PER_QUARTER: u32 = 500_000; // 120 BPM

impl TempoMap {
    pub fn new(ppq: u32, mut changes: Vec<(u64, u32)>) -> Self {
        changes.sort_by_key(|&(tick, _)| tick);
        changes.dedup_by_key(|&mut (tick, _)| tick);
        Self { ppq, changes }
    }

    /// Absolute time of `tick`, integrating over tempo segments.
    /// A default of 120 BPM applies before the first change.
    pub fn seconds_at(&self, tick: u64) -> f64 {
        let mut seconds = 0.0;
        let mut cur_tick = 0u64;
        let mut cur_tempo = DEFAULT_US_PER_QUARTER;
        for &(change_tick, tempo) in &self.changes {
            if change_tick >= tick {
                break;
            }
            seconds += (change_tick - cur_tick) as f64 * cur_tempo as f64
                / (self.ppq as f64 * 1e6);
            cur_tick = change_tick;
            cur_tempo = tempo;
        }
        seconds + (tick - cur_tick) as f64 * cur_tempo as f64 / (self.ppq as f64 * 1e6)
    }

    pub fn changes(&self) -> &[(u64, u32)] {
        &self.changes
    }

    /// Tempo in effect at tick 0, in beats per minute.
    pub fn initial_bpm(&self) -> f64 {
        let us = match self.changes.first() {
            Some(&(0, tempo)) => tempo,
            _ => DEFAULT_US_PER_QUARTER,
        };
        60e6 / us as f64
    }
}

/// Time-signature changes as (tick, signature), sorted by tick.
/// 4/4 applies before the first change.
#[derive(Debug, Clone)]
#[derive(Default)]
pub struct TimeSignatureMap {
    changes: Vec<(u64, TimeSignature)>,
}

impl TimeSignatureMap {
    pub fn new(mut changes: Vec<(u64, TimeSignature)>) -> Self {
        changes.sort_by_key(|&(tick, _)| tick);
        changes.dedup_by_key(|&mut (tick, _)| tick);
        Self { changes }
    }

    pub fn changes(&self) -> &[(u64, TimeSignature)] {
        &self.changes
    }
}


/// How to treat overlapping notes in the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    /// Reject the file with a [`MonophonyReport`].
    #[default]
    Error,
    /// Truncate the earlier note to the later note's onset.
    /// Notes with equal onsets are still rejected.
    ClipToNextOnset,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Absolute track index; `None` selects the first track containing notes.
    pub track: Option<usize>,
    pub overlap_policy: OverlapPolicy,
}

#[derive(Debug, Clone)]
pub struct ParsedMelody {
    pub events: Vec<NoteEvent>,
    pub tempo: TempoMap,
    pub time_signatures: TimeSignatureMap,
    /// Index of the track the melody was read from.
    pub track_index: usize,
}

/// Offending index pairs (i, j) with i < j where note j starts inside
/// note i's interval or both start at the same tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonophonyReport {
    pub pairs: Vec<(usize, usize)>,
}

impl std::fmt::Display for MonophonyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.pairs)
    }
}

// ---------------------------------------------------------------------------
// SMF byte-level parsing
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn err(&self, message: impl Into<String>) -> MidiError {
        MidiError::Malformed { offset: self.pos, message: message.into() }
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of data"))?;
        self.pos += 1;
        Ok(b)
    }

    fn peek(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        Ok(u16::from_be_bytes([self.u8()?, self.u8()?]))
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        Ok(u32::from_be_bytes([self.u8()?, self.u8()?, self.u8()?, self.u8()?]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.pos + n > self.data.len() {
            return Err(self.err(format!("need {n} bytes, stream truncated")));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Variable-length quantity, at most 4 bytes per the SMF spec.
    fn vlq(&mut self) -> Result<u32, MidiError> {
        let mut value: u32 = 0;
        for i in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7F) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
            if i == 3 {
                break;
            }
        }
        Err(self.err("variable-length quantity longer than 4 bytes"))
    }
}

#[derive(Debug, Clone, Copy)]
struct RawNote {
    pitch: u8,
    onset_ticks: u64,
    duration_ticks: u64,
}

#[derive(Debug, Default)]
struct RawTrack {
    notes: Vec<RawNote>,
    tempo_changes: Vec<(u64, u32)>,
    sig_changes: Vec<(u64, TimeSignature)>,
}

fn parse_track(cursor: &mut Cursor<'_>) -> Result<RawTrack, MidiError> {
    let tag = cursor.take(4)?;
    if tag != b"MTrk" {
        cursor.pos -= 4;
        return Err(cursor.err(format!("expected MTrk chunk, found {tag:?}")));
    }
    let length = cursor.u32()? as usize;
    let end = cursor.pos + length;
    if end > cursor.data.len() {
        return Err(cursor.err("track chunk length exceeds file size"));
    }

    let mut track = RawTrack::default();
    let mut tick: u64 = 0;
    let mut running_status: Option<u8> = None;
    // Active note-ons per pitch, FIFO so retriggers pair in order.
    let mut active: Vec<(u8, u64)> = Vec::new();

    while cursor.pos < end {
        tick += cursor.vlq()? as u64;
        let first = cursor
            .peek()
            .ok_or_else(|| cursor.err("unexpected end of track data"))?;
        let status = if first & 0x80 != 0 {
            cursor.pos += 1;
            if first < 0xF0 {
                running_status = Some(first);
            }
            first
        } else {
            running_status.ok_or_else(|| cursor.err("data byte without running status"))?
        };

        match status {
            0xFF => {
                let meta_type = cursor.u8()?;
                let len = cursor.vlq()? as usize;
                let data = cursor.take(len)?;
                match meta_type {
                    0x51 => {
                        if data.len() != 3 {
                            return Err(cursor.err("tempo meta event must carry 3 bytes"));
                        }
                        let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        track.tempo_changes.push((tick, us));
                    }
                    0x58 => {
                        if data.len() < 2 {
                            return Err(cursor.err("time-signature meta event too short"));
                        }
                        if data[0] == 0 || data[1] > 7 {
                            return Err(cursor.err("invalid time signature"));
                        }
                        track.sig_changes.push((
                            tick,
                            TimeSignature {
                                numerator: data[0],
                                denominator: 1u16 << data[1],
                            },
                        ));
                    }
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                let len = cursor.vlq()? as usize;
                cursor.take(len)?;
            }
            0x80..=0xEF => {
                let kind = status & 0xF0;
                let d1 = cursor.u8()?;
                let d2 = match kind {
                    0xC0 | 0xD0 => 0,
                    _ => cursor.u8()?,
                };
                match kind {
                    0x90 if d2 > 0 => active.push((d1 & 0x7F, tick)),
                    0x80 | 0x90 => {
                        let pitch = d1 & 0x7F;
                        match active.iter().position(|&(p, _)| p == pitch) {
                            Some(i) => {
                                let (_, onset) = active.remove(i);
                                track.notes.push(RawNote {
                                    pitch,
                                    onset_ticks: onset,
                                    duration_ticks: tick.saturating_sub(onset),
                                });
                            }
                            None => {
                                return Err(cursor.err(format!(
                                    "note-off for pitch {pitch} without matching note-on"
                                )))
                            }
                        }
                    }
                    _ => {}
                }
            }
            _ => return Err(cursor.err(format!("unexpected status byte 0x{status:02X}"))),
        }
    }
    if cursor.pos != end {
        return Err(cursor.err("event data ran past declared track length"));
    }
    if let Some(&(pitch, _)) = active.first() {
        return Err(cursor.err(format!("note-on for pitch {pitch} never closed")));
    }
    track.notes.sort_by_key(|n| n.onset_ticks);
    Ok(track)
}

/// Parse an SMF byte stream into a monophonic melody.
///
/// Note-ons with velocity 0 are treated as note-offs. The tempo map is
/// merged from every track (format 1 keeps it in the conductor track) and
/// applied to derive seconds. Overlapping notes are handled per
/// [`OverlapPolicy`].
pub fn parse_midi(bytes: &[u8], options: &ParseOptions) -> Result<ParsedMelody, MidiError> {
    let mut cursor = Cursor::new(bytes);
    let tag = cursor.take(4)?;
    if tag != b"MThd" {
        cursor.pos = 0;
        return Err(cursor.err("missing MThd header"));
    }
    let header_len = cursor.u32()?;
    if header_len != 6 {
        return Err(cursor.err(format!("header chunk length {header_len}, expected 6")));
    }
    let format = cursor.u16()?;
    if format > 1 {
        return Err(cursor.err(format!("SMF format {format} not supported (only 0 and 1)")));
    }
    let track_count = cursor.u16()? as usize;
    let division_offset = cursor.pos;
    let division = cursor.u16()?;
    if division & 0x8000 != 0 {
        return Err(MidiError::UnsupportedDivision { offset: division_offset });
    }
    if division == 0 {
        return Err(cursor.err("division of zero ticks per quarter"));
    }
    let ppq = division as u32;

    let mut tracks = Vec::with_capacity(track_count);
    for _ in 0..track_count {
        tracks.push(parse_track(&mut cursor)?);
    }

    let tempo_changes: Vec<(u64, u32)> =
        tracks.iter().flat_map(|t| t.tempo_changes.iter().copied()).collect();
    let sig_changes: Vec<(u64, TimeSignature)> =
        tracks.iter().flat_map(|t| t.sig_changes.iter().copied()).collect();
    let tempo = TempoMap::new(ppq, tempo_changes);
    let time_signatures = TimeSignatureMap::new(sig_changes);

    let track_index = match options.track {
        Some(i) if i >= tracks.len() => {
            return Err(MidiError::TrackNotFound { track: i, track_count: tracks.len() })
        }
        Some(i) => i,
        None => tracks
            .iter()
            .position(|t| !t.notes.is_empty())
            .ok_or(MidiError::EmptyMelody)?,
    };
    let mut notes = std::mem::take(&mut tracks[track_index].notes);
    if notes.is_empty() {
        return Err(MidiError::EmptyMelody);
    }

    match options.overlap_policy {
        OverlapPolicy::Error => {
            let report = overlap_report(&notes);
            if !report.pairs.is_empty() {
                return Err(MidiError::Monophony(report));
            }
        }
        OverlapPolicy::ClipToNextOnset => {
            clip_overlaps(&mut notes)?;
        }
    }
    for (index, n) in notes.iter().enumerate() {
        if n.duration_ticks == 0 {
            return Err(MidiError::ZeroDurationNote { index });
        }
    }

    let events = build_events(&notes, &tempo);
    Ok(ParsedMelody { events, tempo, time_signatures, track_index })
}

fn overlap_report(notes: &[RawNote]) -> MonophonyReport {
    let mut pairs = Vec::new();
    for i in 0..notes.len() {
        for j in i + 1..notes.len() {
            if notes[j].onset_ticks >= notes[i].onset_ticks + notes[i].duration_ticks
                && notes[j].onset_ticks != notes[i].onset_ticks
            {
                break; // sorted by onset, no later note can violate i
            }
            pairs.push((i, j));
        }
    }
    MonophonyReport { pairs }
}

fn clip_overlaps(notes: &mut [RawNote]) -> Result<(), MidiError> {
    // Equal onsets cannot be repaired by truncation.
    let equal: Vec<(usize, usize)> = notes
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].onset_ticks == w[1].onset_ticks)
        .map(|(i, _)| (i, i + 1))
        .collect();
    if !equal.is_empty() {
        return Err(MidiError::Monophony(MonophonyReport { pairs: equal }));
    }
    for i in 0..notes.len().saturating_sub(1) {
        let next_onset = notes[i + 1].onset_ticks;
        if notes[i].onset_ticks + notes[i].duration_ticks > next_onset {
            notes[i].duration_ticks = next_onset - notes[i].onset_ticks;
        }
    }
    Ok(())
}

fn build_events(notes: &[RawNote], tempo: &TempoMap) -> Vec<NoteEvent> {
    let mut events: Vec<NoteEvent> = notes
        .iter()
        .enumerate()
        .map(|(index, n)| {
            let onset_s = tempo.seconds_at(n.onset_ticks);
            let end_s = tempo.seconds_at(n.onset_ticks + n.duration_ticks);
            NoteEvent {
                index,
                pitch: n.pitch,
                onset_ticks: n.onset_ticks,
                duration_ticks: n.duration_ticks,
                onset_s,
                duration_s: end_s - onset_s,
                ioi_s: f64::INFINITY,
            }
        })
        .collect();
    for i in 0..events.len().saturating_sub(1) {
        events[i].ioi_s = events[i + 1].onset_s - events[i].onset_s;
    }
    events
}

/// Check the monophony invariant on already-built events.
/// Ok iff no note's `[onset, onset+duration)` contains another note's onset
/// and no two notes share an onset.
pub fn validate_monophony(events: &[NoteEvent]) -> Result<(), MonophonyReport> {
    let raw: Vec<RawNote> = events
        .iter()
        .map(|e| RawNote {
            pitch: e.pitch,
            onset_ticks: e.onset_ticks,
            duration_ticks: e.duration_ticks,
        })
        .collect();
    let report = overlap_report(&raw);
    if report.pairs.is_empty() {
        Ok(())
    } else {
        Err(report)
    }
}

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

/// Reduced fraction; used for positions within a measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0);
        let g = gcd(num, den);
        Self { num: num / g, den: den / g }
    }
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// A displayable note value: `numerator/denominator` of a whole note,
/// plus dots and an optional tuplet ratio (actual:normal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteValue {
    pub numerator: u32,
    pub denominator: u32,
    pub dots: u8,
    pub tuplet: Option<(u8, u8)>,
}

/// One note after snapping to the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedRhythm {
    /// 0-based measure index.
    pub measure: usize,
    /// Position within the measure, in beats of the current time signature.
    pub beat_offset: Fraction,
    /// Onset from the start of the piece, in `divisions` units.
    pub onset_units: u64,
    /// Duration in `divisions` units (may cross measure boundaries; the
    /// exporter splits and ties).
    pub duration_units: u64,
    /// Primary displayed value (first segment when ties are needed).
    pub value: NoteValue,
}

#[derive(Debug, Clone)]
pub struct QuantizedMelody {
    pub notes: Vec<QuantizedRhythm>,
    /// Units per quarter note used by `onset_units`/`duration_units`.
    pub divisions: u32,
    /// Time signature per measure-change point: (measure index, signature).
    /// Always contains an entry for measure 0.
    pub sig_changes: Vec<(usize, TimeSignature)>,
    /// Total measures needed to hold the melody (at least 1).
    pub measure_count: usize,
}

impl QuantizedMelody {
    /// Signature in effect at `measure`.
    pub fn signature_at(&self, measure: usize) -> TimeSignature {
        let mut sig = self.sig_changes[0].1;
        for &(m, s) in &self.sig_changes {
            if m > measure {
                break;
            }
            sig = s;
        }
        sig
    }

    /// Measure capacity in units.
    pub fn capacity(&self, measure: usize) -> u64 {
        let sig = self.signature_at(measure);
        sig.numerator as u64 * 4 * self.divisions as u64 / sig.denominator as u64
    }

    /// Unit position of the start of `measure`.
    pub fn measure_start(&self, measure: usize) -> u64 {
        (0..measure).map(|m| self.capacity(m)).sum()
    }
}

/// Round p/q to the nearest integer, ties snapping downward.
fn round_half_down(p: u64, q: u64) -> u64 {
    (2 * p + q - 1) / (2 * q)
}

/// Divisions per quarter that keep every measure capacity integral.
fn compute_divisions(grid: u16, sigs: &TimeSignatureMap) -> u32 {
    let mut d = grid as u64;
    let mut denoms: Vec<u64> = sigs.changes().iter().map(|&(_, s)| s.denominator as u64).collect();
    denoms.push(4);
    for q in denoms {
        let need = q / gcd(4, q);
        d = lcm(d, need);
    }
    d as u32
}

/// Snap onsets and durations to `grid` subdivisions per quarter.
///
/// Onsets snap to the nearest grid point (ties downward); the duration
/// floor is one grid unit and onset order is preserved: onsets that would
/// collapse onto an earlier note are pushed forward one unit, and
/// durations are clipped to the next note's onset so the single voice
/// never overlaps itself.
pub fn quantize(
    events: &[NoteEvent],
    ppq: u32,
    sigs: &TimeSignatureMap,
    grid: u16,
) -> Result<QuantizedMelody, MidiError> {
    if !VALID_GRIDS.contains(&grid) {
        return Err(MidiError::InvalidGrid(grid));
    }
    let divisions = compute_divisions(grid, sigs);
    let scale = (divisions / grid as u32) as u64; // grid units -> divisions units

    // Snap to the grid, then enforce strictly increasing onsets.
    let mut onsets: Vec<u64> = Vec::with_capacity(events.len());
    let mut durations: Vec<u64> = Vec::with_capacity(events.len());
    for e in events {
        let mut on = round_half_down(e.onset_ticks * grid as u64, ppq as u64);
        if let Some(&prev) = onsets.last() {
            if on <= prev {
                on = prev + 1;
            }
        }
        let dur = round_half_down(e.duration_ticks * grid as u64, ppq as u64).max(1);
        onsets.push(on);
        durations.push(dur);
    }
    for i in 0..events.len().saturating_sub(1) {
        durations[i] = durations[i].min(onsets[i + 1] - onsets[i]);
    }

    // Measure plan from the time-signature map. Signature changes landing
    // inside a measure take effect at the next measure boundary.
    let mut sig_points: Vec<(u64, TimeSignature)> = vec![(0, TimeSignature::default())];
    for &(tick, sig) in sigs.changes() {
        let unit = round_half_down(tick * grid as u64, ppq as u64) * scale;
        if unit == 0 {
            sig_points[0].1 = sig;
        } else {
            sig_points.push((unit, sig));
        }
    }

    let end_unit = onsets
        .last()
        .map(|&on| (on + durations[events.len() - 1]) * scale)
        .unwrap_or(0);

    let mut sig_changes: Vec<(usize, TimeSignature)> = Vec::new();
    let mut measure_starts: Vec<u64> = vec![0];
    let mut cur_sig = sig_points[0].1;
    let mut next_sig_idx = 1;
    let mut pos = 0u64;
    let mut measure = 0usize;
    loop {
        while next_sig_idx < sig_points.len() && sig_points[next_sig_idx].0 <= pos {
            cur_sig = sig_points[next_sig_idx].1;
            next_sig_idx += 1;
        }
        if sig_changes.last().map(|&(_, s)| s) != Some(cur_sig) {
            sig_changes.push((measure, cur_sig));
        }
        let cap = cur_sig.numerator as u64 * 4 * divisions as u64 / cur_sig.denominator as u64;
        pos += cap;
        measure += 1;
        if pos >= end_unit || measure > 1_000_000 {
            break;
        }
        measure_starts.push(pos);
    }

    let mut melody = QuantizedMelody {
        notes: Vec::with_capacity(events.len()),
        divisions,
        sig_changes,
        measure_count: measure.max(1),
    };

    for (i, _) in events.iter().enumerate() {
        let onset_units = onsets[i] * scale;
        let duration_units = durations[i] * scale;
        let m = match measure_starts.binary_search(&onset_units) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        let sig = melody.signature_at(m);
        let units_per_beat = 4 * divisions as u64 / sig.denominator as u64;
        let within = onset_units - measure_starts[m];
        melody.notes.push(QuantizedRhythm {
            measure: m,
            beat_offset: Fraction::new(within, units_per_beat),
            onset_units,
            duration_units,
            value: decompose_duration(duration_units, divisions)[0],
        });
    }
    Ok(melody)
}

// ---------------------------------------------------------------------------
// Note-value decomposition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub(crate) struct ValueCandidate {
    pub units: u64,
    pub value: NoteValue,
}

/// All displayable sizes at the given divisions, largest first. Plain
/// values are preferred over dotted, dotted over tuplet at equal size.
pub(crate) fn value_candidates(divisions: u32) -> Vec<ValueCandidate> {
    let whole = 4 * divisions as u64;
    let mut out: Vec<(u64, u8, ValueCandidate)> = Vec::new();
    for (rank, tuplet) in [(0u8, None), (2u8, Some((3u8, 2u8)))] {
        for exp in 0..=8u32 {
            let den = 1u32 << exp; // 1, 2, 4, ... 256
            let base_num = whole * 2; // track halves to keep integers
            if !base_num.is_multiple_of(den as u64) {
                continue;
            }
            for dots in 0..=2u8 {
                // size = whole/den * (2^(dots+1) - 1) / 2^dots, in half-units
                let factor_num = (1u64 << (dots + 1)) - 1;
                let factor_den = 1u64 << dots;
                let mut num = base_num / den as u64 * factor_num;
                let mut d = 2 * factor_den;
                if tuplet.is_some() {
                    num *= 2;
                    d *= 3;
                }
                if !num.is_multiple_of(d) {
                    continue;
                }
                let units = num / d;
                if units == 0 {
                    continue;
                }
                out.push((
                    units,
                    rank + dots,
                    ValueCandidate {
                        units,
                        value: NoteValue { numerator: 1, denominator: den, dots, tuplet },
                    },
                ));
            }
        }
    }
    out.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    out.dedup_by_key(|entry| entry.0);
    out.into_iter().map(|(_, _, c)| c).collect()
}

/// Duration in `divisions` units implied by a displayable value.
pub(crate) fn value_units(value: &NoteValue, divisions: u32) -> u64 {
    let whole2 = 2 * 4 * divisions as u64 * value.numerator as u64;
    let mut num = whole2 / value.denominator as u64 * ((1u64 << (value.dots + 1)) - 1);
    let mut den = 2 * (1u64 << value.dots);
    if let Some((actual, normal)) = value.tuplet {
        num *= normal as u64;
        den *= actual as u64;
    }
    num / den
}

/// Greedy split of a duration into displayable values; the result is a
/// sequence to be tied together. Always non-empty for `units >= 1`.
pub(crate) fn decompose_duration(units: u64, divisions: u32) -> Vec<NoteValue> {
    let candidates = value_candidates(divisions);
    let mut out = Vec::new();
    let mut remaining = units;
    while remaining > 0 {
        let c = candidates
            .iter()
            .find(|c| c.units <= remaining)
            .expect("one division unit is always displayable");
        out.push(c.value);
        remaining -= c.units;
    }
    out
}
