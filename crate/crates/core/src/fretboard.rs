//! Instrument model: strings, frets, tuning, and the mapping between
//! fretboard placements and MIDI pitches.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest MIDI note number.
pub const MAX_MIDI_PITCH: u8 = 127;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FretboardError {
    #[error("string {string} out of range 1..={string_count}")]
    StringOutOfRange { string: u8, string_count: u8 },
    #[error("fret {fret} out of range 0..={fret_count}")]
    FretOutOfRange { fret: u8, fret_count: u8 },
    #[error("invalid instrument: {0}")]
    InvalidSpec(String),
}

/// A physical realization of a pitch: which string, which fret.
/// Fret 0 is the open string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Placement {
    /// 1 = highest-pitched string, `string_count` = lowest.
    pub string: u8,
    pub fret: u8,
}

impl Placement {
    pub fn new(string: u8, fret: u8) -> Self {
        Self { string, fret }
    }

    pub fn is_open(&self) -> bool {
        self.fret == 0
    }
}

/// Tuning and geometry of the instrument.
///
/// `open_pitches[0]` is the open pitch of string 1 (the highest-pitched
/// string), `open_pitches[string_count - 1]` that of the lowest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSpec {
    pub string_count: u8,
    pub open_pitches: Vec<u8>,
    pub fret_count: u8,
}

impl Default for InstrumentSpec {
    fn default() -> Self {
        Self::standard_guitar()
    }
}

impl InstrumentSpec {
    /// Six strings in standard tuning (e4 B3 G3 D3 A2 E2), 22 frets.
    pub fn standard_guitar() -> Self {
        Self {
            string_count: 6,
            open_pitches: vec![64, 59, 55, 50, 45, 40],
            fret_count: 22,
        }
    }

    /// Checks internal consistency; call after deserializing a user config.
    pub fn validate(&self) -> Result<(), FretboardError> {
        if self.string_count == 0 {
            return Err(FretboardError::InvalidSpec("string_count must be >= 1".into()));
        }
        if self.open_pitches.len() != self.string_count as usize {
            return Err(FretboardError::InvalidSpec(format!(
                "open_pitches has {} entries, expected {}",
                self.open_pitches.len(),
                self.string_count
            )));
        }
        if self.fret_count == 0 {
            return Err(FretboardError::InvalidSpec("fret_count must be >= 1".into()));
        }
        for (i, &open) in self.open_pitches.iter().enumerate() {
            let top = open as u16 + self.fret_count as u16;
            if top > MAX_MIDI_PITCH as u16 {
                return Err(FretboardError::InvalidSpec(format!(
                    "string {} reaches pitch {} beyond MIDI range",
                    i + 1,
                    top
                )));
            }
        }
        Ok(())
    }

    /// MIDI note number sounded by `string`/`fret` (fret 0 = open string).
    pub fn pitch_at(&self, string: u8, fret: u8) -> Result<u8, FretboardError> {
        if string == 0 || string > self.string_count {
            return Err(FretboardError::StringOutOfRange {
                string,
                string_count: self.string_count,
            });
        }
        if fret > self.fret_count {
            return Err(FretboardError::FretOutOfRange {
                fret,
                fret_count: self.fret_count,
            });
        }
        Ok(self.open_pitches[string as usize - 1] + fret)
    }

    /// Pitch of a placement that is already known to be in range.
    pub fn pitch_of(&self, placement: Placement) -> u8 {
        self.open_pitches[placement.string as usize - 1] + placement.fret
    }

    /// All placements sounding `pitch`, ordered by string number.
    /// Empty when the pitch is unplayable on this instrument.
    pub fn candidates_for_pitch(&self, pitch: u8) -> Vec<Placement> {
        let mut out = Vec::new();
        for string in 1..=self.string_count {
            let open = self.open_pitches[string as usize - 1];
            if pitch >= open && pitch - open <= self.fret_count {
                out.push(Placement::new(string, pitch - open));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pitch_at_standard_tuning() {
        let spec = InstrumentSpec::standard_guitar();
        assert_eq!(spec.pitch_at(6, 0).unwrap(), 40);
        assert_eq!(spec.pitch_at(2, 5).unwrap(), 64);
        assert_eq!(spec.pitch_at(1, 22).unwrap(), 86);
    }

    #[test]
    fn pitch_at_rejects_out_of_range() {
        let spec = InstrumentSpec::standard_guitar();
        assert!(matches!(
            spec.pitch_at(0, 3),
            Err(FretboardError::StringOutOfRange { .. })
        ));
        assert!(matches!(
            spec.pitch_at(7, 3),
            Err(FretboardError::StringOutOfRange { .. })
        ));
        assert!(matches!(
            spec.pitch_at(1, 23),
            Err(FretboardError::FretOutOfRange { .. })
        ));
    }

    #[test]
    fn candidates_for_e4() {
        let spec = InstrumentSpec::standard_guitar();
        let got = spec.candidates_for_pitch(64);
        let want = vec![
            Placement::new(1, 0),
            Placement::new(2, 5),
            Placement::new(3, 9),
            Placement::new(4, 14),
            Placement::new(5, 19),
        ];
        // (6, 24) is excluded by the 22-fret limit.
        assert_eq!(got, want);
    }

    #[test]
    fn candidates_below_range_is_empty() {
        let spec = InstrumentSpec::standard_guitar();
        assert!(spec.candidates_for_pitch(39).is_empty());
    }

    #[test]
    fn candidates_low_e_is_unique() {
        let spec = InstrumentSpec::standard_guitar();
        assert_eq!(spec.candidates_for_pitch(40), vec![Placement::new(6, 0)]);
    }

    #[test]
    fn every_candidate_realizes_its_pitch() {
        let spec = InstrumentSpec::standard_guitar();
        for pitch in 0..=MAX_MIDI_PITCH {
            let candidates = spec.candidates_for_pitch(pitch);
            assert!(candidates.len() <= spec.string_count as usize);
            for p in candidates {
                assert_eq!(spec.pitch_of(p), pitch);
                assert_eq!(spec.pitch_at(p.string, p.fret).unwrap(), pitch);
            }
        }
    }

    #[test]
    fn adjacent_semitones_shift_by_one_fret() {
        let spec = InstrumentSpec::standard_guitar();
        for pitch in 0..MAX_MIDI_PITCH {
            let lo = spec.candidates_for_pitch(pitch);
            let hi = spec.candidates_for_pitch(pitch + 1);
            for p in &lo {
                // Every non-top-fret placement shifts up by one fret.
                if p.fret < spec.fret_count {
                    assert!(hi.contains(&Placement::new(p.string, p.fret + 1)));
                }
            }
            for p in &hi {
                if p.fret > 0 {
                    assert!(lo.contains(&Placement::new(p.string, p.fret - 1)));
                }
            }
        }
    }

    #[test]
    fn validate_catches_bad_specs() {
        let mut spec = InstrumentSpec::standard_guitar();
        spec.open_pitches.pop();
        assert!(spec.validate().is_err());

        let spec = InstrumentSpec {
            string_count: 1,
            open_pitches: vec![120],
            fret_count: 22,
        };
        assert!(spec.validate().is_err());

        assert!(InstrumentSpec::standard_guitar().validate().is_ok());
    }
}
