//! Fixture-driven checks: the committed demo MIDI and a third-party-style
//! MusicXML export.

use tabforge_core::annotate::Technique;
use tabforge_core::midi::{parse_midi, validate_monophony, ParseOptions};
use tabforge_core::musicxml::reparse;

const BLUES: &[u8] = include_bytes!("fixtures/blues_in_a.mid");
const THIRD_PARTY: &str = include_str!("fixtures/thirdparty_sample.musicxml");

/// Minimal, self-contained SMF scan used as an independent reference for
/// the library parser: it shares no code with `tabforge_core::midi` and
/// only understands enough of the format to time note-ons/offs.
mod reference {
    pub struct RefNote {
        pub pitch: u8,
        pub onset_ticks: u64,
        pub end_ticks: u64,
    }

    pub struct RefDump {
        pub ppq: u32,
        pub notes: Vec<RefNote>,
        pub tempo_changes: Vec<(u64, u32)>,
    }

    pub fn dump(bytes: &[u8]) -> RefDump {
        let ppq = u16::from_be_bytes([bytes[12], bytes[13]]) as u32;
        let track_count = u16::from_be_bytes([bytes[10], bytes[11]]) as usize;
        let mut pos = 14usize;
        let mut notes = Vec::new();
        let mut tempo_changes = Vec::new();
        for _ in 0..track_count {
            assert_eq!(&bytes[pos..pos + 4], b"MTrk");
            let len = u32::from_be_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
            let end = pos + 8 + len;
            let mut p = pos + 8;
            let mut tick = 0u64;
            let mut running = 0u8;
            let mut active: Vec<(u8, u64)> = Vec::new();
            while p < end {
                let (delta, next) = vlq(bytes, p);
                p = next;
                tick += delta;
                let mut status = bytes[p];
                if status & 0x80 != 0 {
                    p += 1;
                    if status < 0xF0 {
                        running = status;
                    }
                } else {
                    status = running;
                }
                match status {
                    0xFF => {
                        let meta = bytes[p];
                        p += 1;
                        let (len, next) = vlq(bytes, p);
                        p = next;
                        if meta == 0x51 {
                            let us = u32::from_be_bytes([
                                0,
                                bytes[p],
                                bytes[p + 1],
                                bytes[p + 2],
                            ]);
                            tempo_changes.push((tick, us));
                        }
                        p += len as usize;
                    }
                    0xF0 | 0xF7 => {
                        let (len, next) = vlq(bytes, p);
                        p = next + len as usize;
                    }
                    _ => {
                        let kind = status & 0xF0;
                        let d1 = bytes[p];
                        p += 1;
                        let d2 = if matches!(kind, 0xC0 | 0xD0) {
                            0
                        } else {
                            let v = bytes[p];
                            p += 1;
                            v
                        };
                        if kind == 0x90 && d2 > 0 {
                            active.push((d1, tick));
                        } else if matches!(kind, 0x80 | 0x90) {
                            let at = active.iter().position(|&(n, _)| n == d1).unwrap();
                            let (pitch, onset) = active.remove(at);
                            notes.push(RefNote { pitch, onset_ticks: onset, end_ticks: tick });
                        }
                    }
                }
            }
            pos = end;
        }
        notes.sort_by_key(|n| n.onset_ticks);
        tempo_changes.sort_by_key(|&(t, _)| t);
        RefDump { ppq, notes, tempo_changes }
    }

    fn vlq(bytes: &[u8], mut p: usize) -> (u64, usize) {
        let mut v = 0u64;
        loop {
            let b = bytes[p];
            p += 1;
            v = (v << 7) | (b & 0x7F) as u64;
            if b & 0x80 == 0 {
                return (v, p);
            }
        }
    }

    /// Independent tick-to-seconds conversion over the tempo map.
    pub fn seconds_at(dump: &RefDump, tick: u64) -> f64 {
        let mut seconds = 0.0;
        let mut at = 0u64;
        let mut tempo = 500_000u32;
        for &(change_tick, us) in &dump.tempo_changes {
            if change_tick >= tick {
                break;
            }
            seconds += (change_tick - at) as f64 / dump.ppq as f64 * tempo as f64 * 1e-6;
            at = change_tick;
            tempo = us;
        }
        seconds + (tick - at) as f64 / dump.ppq as f64 * tempo as f64 * 1e-6
    }
}

#[test]
fn demo_fixture_has_expected_shape() {
    let parsed = parse_midi(BLUES, &ParseOptions::default()).unwrap();
    let n = parsed.events.len();
    assert!((40..=80).contains(&n), "demo melody has {n} events");
    assert!(parsed
        .events
        .windows(2)
        .all(|w| w[0].onset_ticks < w[1].onset_ticks));
    assert!(validate_monophony(&parsed.events).is_ok());
}

#[test]
fn demo_fixture_matches_the_independent_reference() {
    let parsed = parse_midi(BLUES, &ParseOptions::default()).unwrap();
    let reference = reference::dump(BLUES);
    assert_eq!(parsed.events.len(), reference.notes.len());
    for (event, reference_note) in parsed.events.iter().zip(&reference.notes) {
        assert_eq!(event.pitch, reference_note.pitch);
        assert_eq!(event.onset_ticks, reference_note.onset_ticks);
        let want_onset = reference::seconds_at(&reference, reference_note.onset_ticks);
        let want_end = reference::seconds_at(&reference, reference_note.end_ticks);
        assert!(
            (event.onset_s - want_onset).abs() < 1e-6,
            "note {}: onset {} vs reference {}",
            event.index,
            event.onset_s,
            want_onset
        );
        assert!(
            (event.onset_s + event.duration_s - want_end).abs() < 1e-6,
            "note {}: end mismatch",
            event.index
        );
    }
}

#[test]
fn demo_fixture_seconds_survive_a_tempo_map() {
    // Same melody re-timed with mid-piece tempo changes; the reference
    // and the parser must agree on the piecewise integration.
    let mut builder = tabforge_core::testing::SmfBuilder::new(480);
    builder.tempo(0, 500_000);
    builder.tempo(1920, 400_000);
    builder.tempo(5760, 666_667);
    for (pitch, onset, dur) in tabforge_core::testing::blues_demo_notes() {
        builder.note(pitch, onset, dur);
    }
    let bytes = builder.build();
    let parsed = parse_midi(&bytes, &ParseOptions::default()).unwrap();
    let reference = reference::dump(&bytes);
    for (event, reference_note) in parsed.events.iter().zip(&reference.notes) {
        let want = reference::seconds_at(&reference, reference_note.onset_ticks);
        assert!((event.onset_s - want).abs() < 1e-6, "note {}", event.index);
    }
}

#[test]
fn third_party_export_reparses() {
    let recovered = reparse(THIRD_PARTY).unwrap();
    // Four of the five pitched notes carry string/fret; one warns.
    assert_eq!(recovered.notes.len(), 4);
    assert_eq!(recovered.warnings.len(), 1);
    assert_eq!(
        recovered.notes.iter().map(|n| (n.string, n.fret)).collect::<Vec<_>>(),
        vec![(4, 7), (4, 9), (4, 10), (2, 8)]
    );
    // Fingering read where present, unknown notations ignored.
    assert_eq!(recovered.notes[0].finger, 1);
    assert_eq!(recovered.notes[1].techniques, vec![Technique::HammerOn]);
    assert_eq!(recovered.notes[2].techniques, Vec::new());
    assert_eq!(recovered.notes[3].techniques, vec![Technique::Bend { semitones: 2 }]);
    assert_eq!(recovered.notes[0].pitch, 57);
    assert_eq!(recovered.notes[1].pitch, 61); // C#4 via the alter element
}
