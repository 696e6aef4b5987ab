//! Property tests for the module invariants.

use proptest::prelude::*;

use tabforge_core::midi::{quantize, validate_monophony, NoteEvent, TimeSignatureMap};
use tabforge_core::solver::{solve, validate_solution, FingeringConfig};
use tabforge_core::InstrumentSpec;

fn events_from(intervals: &[(u64, u64)]) -> Vec<NoteEvent> {
    intervals
        .iter()
        .enumerate()
        .map(|(index, &(onset, dur))| NoteEvent {
            index,
            pitch: 60,
            onset_ticks: onset,
            duration_ticks: dur,
            onset_s: onset as f64 / 960.0,
            duration_s: dur as f64 / 960.0,
            ioi_s: 0.5,
        })
        .collect()
}

proptest! {
    /// Monophony validation accepts exactly the sequences whose intervals
    /// are pairwise disjoint with distinct onsets.
    #[test]
    fn monophony_matches_pairwise_disjointness(
        raw in prop::collection::vec((0u64..2000, 1u64..400), 1..12)
    ) {
        let mut intervals = raw;
        intervals.sort_by_key(|&(onset, _)| onset);
        let events = events_from(&intervals);

        let mut expect_violation = false;
        for i in 0..intervals.len() {
            for j in 0..intervals.len() {
                if i == j {
                    continue;
                }
                let (onset_i, dur_i) = intervals[i];
                let onset_j = intervals[j].0;
                if onset_j == onset_i && j > i {
                    expect_violation = true;
                }
                if onset_j > onset_i && onset_j < onset_i + dur_i {
                    expect_violation = true;
                }
            }
        }
        prop_assert_eq!(validate_monophony(&events).is_err(), expect_violation);
    }

    /// Quantization is idempotent: re-snapping an already snapped melody
    /// changes nothing.
    #[test]
    fn quantization_is_idempotent(
        raw in prop::collection::vec((0u64..8000, 1u64..900), 1..16),
        grid_idx in 0usize..8
    ) {
        let grid = tabforge_core::midi::VALID_GRIDS[grid_idx];
        let mut intervals = raw;
        intervals.sort_by_key(|&(onset, _)| onset);
        intervals.dedup_by_key(|&mut (onset, _)| onset);
        let events = events_from(&intervals);
        let sigs = TimeSignatureMap::default();

        let first = quantize(&events, 480, &sigs, grid).unwrap();
        let unit_ticks = 480 * (first.divisions / grid as u32) as u64 / first.divisions as u64;
        prop_assume!(unit_ticks > 0);
        let re: Vec<NoteEvent> = first
            .notes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let scale = 480.0 / first.divisions as f64;
                NoteEvent {
                    index: i,
                    pitch: 60,
                    onset_ticks: (n.onset_units as f64 * scale) as u64,
                    duration_ticks: ((n.duration_units as f64 * scale) as u64).max(1),
                    onset_s: 0.0,
                    duration_s: 0.0,
                    ioi_s: 0.5,
                }
            })
            .collect();
        let second = quantize(&re, 480, &sigs, grid).unwrap();
        prop_assert_eq!(first.notes, second.notes);
    }

    /// On any playable random tuning, candidate placements realize their
    /// pitch and never exceed one per string.
    #[test]
    fn candidates_realize_pitch_on_any_tuning(
        opens in prop::collection::vec(30u8..80, 3..8),
        fret_count in 10u8..24,
        pitch in 0u8..128
    ) {
        let spec = InstrumentSpec {
            string_count: opens.len() as u8,
            open_pitches: opens,
            fret_count,
        };
        prop_assume!(spec.validate().is_ok());
        let candidates = spec.candidates_for_pitch(pitch);
        prop_assert!(candidates.len() <= spec.string_count as usize);
        for p in candidates {
            prop_assert_eq!(spec.pitch_of(p), pitch);
        }
    }

    /// Whatever the weights, the solver's output always satisfies the
    /// feasibility invariants and its cost ledger sums to the objective.
    #[test]
    fn solver_output_is_always_feasible(
        seed in 0u64..5000,
        len in 2usize..20,
        w_pc in 0.0f64..8.0,
        w_sc in 0.0f64..8.0,
        w_hs in 0.0f64..8.0,
        w_open in 0.0f64..8.0,
        w_zone in 0.0f64..8.0,
    ) {
        let spec = InstrumentSpec::standard_guitar();
        let config = FingeringConfig { w_pc, w_sc, w_hs, w_open, w_zone, ..Default::default() };
        let events =
            tabforge_core::testing::random_walk_melody(seed, len, (42, 84), 6, (0.25, 0.9));
        let solution = solve(&events, &spec, &config).unwrap();
        validate_solution(&events, &solution.states, &spec, &config)
            .map_err(TestCaseError::fail)?;
        let total: f64 = solution.per_note.iter().map(|c| c.total()).sum();
        prop_assert!((total - solution.objective).abs() < 1e-6);
    }
}
