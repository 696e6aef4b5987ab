//! Fixture and test-data helpers: a minimal SMF writer and seeded melody
//! generators. Shared by unit tests, integration tests, and benches.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::midi::NoteEvent;

const NOTE_ON_VELOCITY: u8 = 96;

#[derive(Debug, Clone)]
struct TrackData {
    // (tick, priority, sequence, message); note-offs sort before note-ons.
    structured: Vec<(u64, u8, usize, Vec<u8>)>,
    // (delta, message-or-data) appended verbatim after structured events.
    raw: Vec<(u64, Vec<u8>)>,
}

/// Builds Standard MIDI Files (format 0 or 1) for tests and fixtures.
///
/// Structured events (`note`, `tempo`, `time_signature`) take absolute
/// ticks and are sorted at build time; `raw_event`/`raw_data` take delta
/// ticks and are emitted verbatim, for exercising parser edge cases.
#[derive(Debug, Clone)]
pub struct SmfBuilder {
    ppq: u16,
    tracks: Vec<TrackData>,
}

impl SmfBuilder {
    pub fn new(ppq: u16) -> Self {
        Self {
            ppq,
            tracks: vec![TrackData { structured: Vec::new(), raw: Vec::new() }],
        }
    }

    /// Opens a new track; subsequent events go there.
    pub fn start_track(&mut self) -> &mut Self {
        self.tracks.push(TrackData { structured: Vec::new(), raw: Vec::new() });
        self
    }

    fn push(&mut self, tick: u64, priority: u8, message: Vec<u8>) {
        let track = self.tracks.last_mut().unwrap();
        let seq = track.structured.len();
        track.structured.push((tick, priority, seq, message));
    }

    pub fn note(&mut self, pitch: u8, onset: u64, duration: u64) -> &mut Self {
        self.push(onset, 1, vec![0x90, pitch, NOTE_ON_VELOCITY]);
        self.push(onset + duration, 0, vec![0x80, pitch, 0]);
        self
    }

    pub fn tempo(&mut self, tick: u64, us_per_quarter: u32) -> &mut Self {
        let b = us_per_quarter.to_be_bytes();
        self.push(tick, 0, vec![0xFF, 0x51, 0x03, b[1], b[2], b[3]]);
        self
    }

    pub fn time_signature(&mut self, tick: u64, numerator: u8, denom_pow2: u8) -> &mut Self {
        self.push(tick, 0, vec![0xFF, 0x58, 0x04, numerator, denom_pow2, 24, 8]);
        self
    }

    /// Appends a complete message (status byte included) at `delta` ticks
    /// after the previous raw event.
    pub fn raw_event(&mut self, delta: u64, message: &[u8]) -> &mut Self {
        self.tracks.last_mut().unwrap().raw.push((delta, message.to_vec()));
        self
    }

    /// Appends bare data bytes (running status) at `delta` ticks.
    pub fn raw_data(&mut self, delta: u64, data: &[u8]) -> &mut Self {
        self.tracks.last_mut().unwrap().raw.push((delta, data.to_vec()));
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let format: u16 = if self.tracks.len() > 1 { 1 } else { 0 };
        let mut out = Vec::new();
        out.extend_from_slice(b"MThd");
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&format.to_be_bytes());
        out.extend_from_slice(&(self.tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.ppq.to_be_bytes());

        for track in &self.tracks {
            let mut events = track.structured.clone();
            events.sort_by_key(|&(tick, pri, seq, _)| (tick, pri, seq));

            let mut body = Vec::new();
            let mut cursor = 0u64;
            for (tick, _, _, message) in events {
                write_vlq(&mut body, tick - cursor);
                body.extend_from_slice(&message);
                cursor = tick;
            }
            for (delta, message) in &track.raw {
                write_vlq(&mut body, *delta);
                body.extend_from_slice(message);
            }
            // end of track
            write_vlq(&mut body, 0);
            body.extend_from_slice(&[0xFF, 0x2F, 0x00]);

            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(body.len() as u32).to_be_bytes());
            out.extend_from_slice(&body);
        }
        out
    }
}

fn write_vlq(out: &mut Vec<u8>, mut value: u64) {
    let mut stack = [0u8; 8];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7F) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let mut b = stack[i];
        if i > 0 {
            b |= 0x80;
        }
        out.push(b);
    }
}

/// Deterministic RNG for test-data generation.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer in `[lo, hi]`.
pub fn rand_in(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> u64 {
    lo + rng.next_u64() % (hi - lo + 1)
}

/// Uniform float in `[lo, hi)`.
pub fn rand_f64(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * (hi - lo)
}

/// Synthesizes note events directly (no MIDI bytes): uniform random
/// pitches and inter-onset intervals.
pub fn random_melody(
    seed: u64,
    len: usize,
    pitch_range: (u8, u8),
    ioi_range: (f64, f64),
) -> Vec<NoteEvent> {
    let mut r = rng(seed);
    let mut events = Vec::with_capacity(len);
    let mut onset = 0.0f64;
    for index in 0..len {
        let pitch = rand_in(&mut r, pitch_range.0 as u64, pitch_range.1 as u64) as u8;
        let ioi = rand_f64(&mut r, ioi_range.0, ioi_range.1);
        events.push(NoteEvent {
            index,
            pitch,
            onset_ticks: (onset * 960.0) as u64,
            duration_ticks: (ioi * 960.0 * 0.9) as u64,
            onset_s: onset,
            duration_s: ioi * 0.9,
            ioi_s: ioi,
        });
        onset += ioi;
    }
    if let Some(last) = events.last_mut() {
        last.ioi_s = f64::INFINITY;
        last.duration_s = 0.5;
        last.duration_ticks = 480;
    }
    events
}

/// Random-walk melody: each step moves at most `max_step` semitones,
/// reflecting at the pitch bounds. Closer to real lead lines than uniform
/// sampling, and keeps every transition reachable.
pub fn random_walk_melody(
    seed: u64,
    len: usize,
    pitch_range: (u8, u8),
    max_step: u8,
    ioi_range: (f64, f64),
) -> Vec<NoteEvent> {
    let mut r = rng(seed);
    let (lo, hi) = (pitch_range.0 as i32, pitch_range.1 as i32);
    let mut pitch = rand_in(&mut r, lo as u64, hi as u64) as i32;
    let mut events = Vec::with_capacity(len);
    let mut onset = 0.0f64;
    for index in 0..len {
        let ioi = rand_f64(&mut r, ioi_range.0, ioi_range.1);
        events.push(NoteEvent {
            index,
            pitch: pitch as u8,
            onset_ticks: (onset * 960.0) as u64,
            duration_ticks: (ioi * 960.0 * 0.9).max(1.0) as u64,
            onset_s: onset,
            duration_s: ioi * 0.9,
            ioi_s: ioi,
        });
        onset += ioi;
        let step = rand_in(&mut r, 0, 2 * max_step as u64) as i32 - max_step as i32;
        pitch += step;
        if pitch < lo {
            pitch = 2 * lo - pitch;
        }
        if pitch > hi {
            pitch = 2 * hi - pitch;
        }
        pitch = pitch.clamp(lo, hi);
    }
    if let Some(last) = events.last_mut() {
        last.ioi_s = f64::INFINITY;
    }
    events
}

/// The demo lead part: twelve bars of blues in A, 4/4 at 120 BPM,
/// written on a 16th grid (PPQ 480). Returns (pitch, onset, duration)
/// in ticks.
pub fn blues_demo_notes() -> Vec<(u8, u64, u64)> {
    // (pitch, length, rest-after) in 16th units per bar; bars sum to 16.
    const BARS: &[&[(u8, u8, u8)]] = &[
        // A7
        &[(57, 2, 0), (60, 2, 0), (62, 2, 0), (64, 2, 0), (67, 2, 0), (64, 2, 0), (69, 4, 0)],
        // G4-A4-G4 bend cliche on quarters
        &[(67, 4, 0), (69, 4, 0), (67, 4, 0), (64, 2, 0), (62, 2, 0)],
        // unison pairs
        &[(57, 2, 0), (60, 4, 0), (60, 4, 0), (62, 2, 0), (64, 2, 0), (67, 2, 0)],
        // long note then run
        &[(69, 8, 0), (64, 2, 0), (67, 2, 0), (69, 2, 0), (72, 2, 0)],
        // D7
        &[(62, 2, 0), (65, 2, 0), (67, 2, 0), (69, 2, 0), (72, 2, 0), (69, 2, 0), (67, 4, 0)],
        &[(74, 4, 0), (72, 2, 0), (69, 2, 0), (67, 2, 0), (69, 2, 0), (65, 2, 0), (62, 2, 0)],
        // A7 with chromatic 16ths
        &[
            (57, 2, 0),
            (60, 2, 0),
            (62, 1, 0),
            (63, 1, 0),
            (64, 2, 0),
            (69, 2, 0),
            (67, 2, 0),
            (64, 2, 0),
            (60, 2, 0),
        ],
        // upper box
        &[(69, 2, 0), (72, 2, 0), (74, 4, 0), (76, 4, 0), (79, 2, 0), (76, 2, 0)],
        // E7
        &[(76, 4, 0), (74, 2, 0), (71, 2, 0), (67, 2, 0), (69, 2, 0), (71, 2, 0), (74, 2, 0)],
        // D7
        &[
            (74, 2, 0),
            (72, 2, 0),
            (69, 2, 0),
            (67, 2, 0),
            (65, 2, 0),
            (62, 2, 0),
            (65, 2, 0),
            (67, 2, 0),
        ],
        // breathing room
        &[(69, 4, 4), (64, 4, 4)],
        // turnaround
        &[(69, 4, 0), (67, 2, 0), (64, 2, 0), (62, 2, 0), (60, 2, 0), (57, 4, 0)],
    ];

    const UNIT: u64 = 120; // 16th at PPQ 480
    let mut notes = Vec::new();
    let mut cursor = 0u64;
    for bar in BARS {
        for &(pitch, len, rest) in *bar {
            notes.push((pitch, cursor, len as u64 * UNIT));
            cursor += (len + rest) as u64 * UNIT;
        }
    }
    notes
}

/// The demo melody as a complete SMF byte stream.
pub fn blues_demo_smf() -> Vec<u8> {
    let mut b = SmfBuilder::new(480);
    b.tempo(0, 500_000);
    b.time_signature(0, 4, 2);
    for (pitch, onset, dur) in blues_demo_notes() {
        b.note(pitch, onset, dur);
    }
    b.build()
}

/// Converts plain (pitch, onset, duration) tick triples to an SMF.
pub fn melody_smf(ppq: u16, notes: &[(u8, u64, u64)]) -> Vec<u8> {
    let mut b = SmfBuilder::new(ppq);
    b.tempo(0, 500_000);
    b.time_signature(0, 4, 2);
    for &(pitch, onset, dur) in notes {
        b.note(pitch, onset, dur);
    }
    b.build()
}
