//! Globally optimal fingering assignment.
//!
//! Each note of the melody forms one layer of states; a state fixes the
//! placement (string/fret), the fretting finger, and the hand position
//! (the fret under the index finger). Node costs capture discomfort and
//! timbre penalties, arc costs capture hand movement, and transitions
//! whose movement time exceeds the inter-onset interval are discarded.
//! An exact layer-by-layer dynamic program returns the minimum-cost state
//! sequence; `brute_force_solve` enumerates every feasible sequence and
//! serves as the optimality oracle on small instances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::fretboard::{InstrumentSpec, Placement};
use crate::midi::NoteEvent;

/// Finger number for open strings.
pub const OPEN_FINGER: u8 = 0;

/// Ceiling on the state-sequence product accepted by [`brute_force_solve`].
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("note {index} (pitch {pitch}) has no admissible fingering state")]
    UnplayableNote { index: usize, pitch: u8 },
    #[error(
        "no feasible path: frontier empty at note {layer} (IOI or span settings too tight)"
    )]
    NoFeasiblePath { layer: usize },
    #[error("instance too large for exhaustive enumeration ({size_product} sequences)")]
    InstanceTooLarge { size_product: u128 },
    #[error("invalid fingering configuration: {0}")]
    InvalidConfig(String),
}

/// Why a transition was discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfeasibilityReason {
    /// Hand movement needs more time than the inter-onset interval allows.
    MovementTime { required_s: f64, available_s: f64 },
    /// Consecutive use of the same finger violates the configured policy.
    SameFinger,
}

impl std::fmt::Display for InfeasibilityReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MovementTime { required_s, available_s } => write!(
                f,
                "movement needs {required_s:.3}s but only {available_s:.3}s available"
            ),
            Self::SameFinger => write!(f, "same finger on consecutive notes"),
        }
    }
}

/// One fingering of one note. Ordering is the solver's deterministic
/// tie-break key: (string, fret, finger, hand position).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct FingeringState {
    pub placement: Placement,
    /// 0 = open string, 1 = index, 2 = middle, 3 = ring, 4 = little.
    pub finger: u8,
    /// Fret at which the index finger rests.
    pub hand_position: u8,
}

impl FingeringState {
    pub fn new(string: u8, fret: u8, finger: u8, hand_position: u8) -> Self {
        Self { placement: Placement::new(string, fret), finger, hand_position }
    }

    pub fn is_open(&self) -> bool {
        self.finger == OPEN_FINGER
    }
}

/// Allowed fret offset of a finger relative to the index finger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanWindow {
    pub min: i8,
    pub max: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SameFingerPolicy {
    /// Never reuse a finger on consecutive notes.
    Forbid,
    /// Reuse allowed at the same fret (barre) or on the same string (slide).
    #[default]
    AllowSameFretOrSameString,
    AllowAll,
}

/// All solver knobs: attribute weights, span windows, movement-time model,
/// comfort zone, and finger-reuse policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FingeringConfig {
    /// Weight per fret of hand-position change.
    pub w_pc: f64,
    /// Weight per string crossed.
    pub w_sc: f64,
    /// Weight per fret of stretch beyond the one-finger-per-fret posture.
    pub w_hs: f64,
    /// Flat penalty for sounding an open string.
    pub w_open: f64,
    /// Weight per fret of hand position outside the comfort zone.
    pub w_zone: f64,
    /// Comfortable hand-position interval [lo, hi].
    pub comfort_zone: (u8, u8),
    /// Span windows for fingers 1..=4 (index window is [0, 0] by definition).
    pub spans: [SpanWindow; 4],
    /// Seconds per fret of longitudinal hand movement.
    pub t_long: f64,
    /// Seconds per string of vertical hand movement.
    pub t_vert: f64,
    pub same_finger_policy: SameFingerPolicy,
    /// Valid index-finger frets [lo, hi]; clamped to the instrument.
    pub hand_position_range: (u8, u8),
}

impl Default for FingeringConfig {
    fn default() -> Self {
        Self {
            w_pc: 4.0,
            w_sc: 1.0,
            w_hs: 2.0,
            w_open: 1.0,
            w_zone: 1.0,
            comfort_zone: (5, 12),
            spans: [
                SpanWindow { min: 0, max: 0 },
                SpanWindow { min: 1, max: 2 },
                SpanWindow { min: 2, max: 4 },
                SpanWindow { min: 3, max: 5 },
            ],
            t_long: 0.03,
            t_vert: 0.02,
            same_finger_policy: SameFingerPolicy::default(),
            hand_position_range: (1, 22),
        }
    }
}

impl FingeringConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let weights =
            [self.w_pc, self.w_sc, self.w_hs, self.w_open, self.w_zone, self.t_long, self.t_vert];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SolveError::InvalidConfig(
                "weights and movement times must be finite and non-negative".into(),
            ));
        }
        for (i, s) in self.spans.iter().enumerate() {
            if s.min > s.max {
                return Err(SolveError::InvalidConfig(format!(
                    "span window for finger {} has min > max",
                    i + 1
                )));
            }
        }
        if self.comfort_zone.0 > self.comfort_zone.1 {
            return Err(SolveError::InvalidConfig("comfort zone has lo > hi".into()));
        }
        if self.hand_position_range.0 < 1 || self.hand_position_range.0 > self.hand_position_range.1
        {
            return Err(SolveError::InvalidConfig(
                "hand position range must satisfy 1 <= lo <= hi".into(),
            ));
        }
        Ok(())
    }

    fn span(&self, finger: u8) -> SpanWindow {
        self.spans[finger as usize - 1]
    }
}

/// Cost of one node or arc, split by attribute. Every field is already
/// weight-multiplied, so the total is the plain sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub pc: f64,
    pub sc: f64,
    pub hs: f64,
    pub open: f64,
    pub zone: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.pc + self.sc + self.hs + self.open + self.zone
    }

    pub fn merged(&self, other: &CostBreakdown) -> CostBreakdown {
        CostBreakdown {
            pc: self.pc + other.pc,
            sc: self.sc + other.sc,
            hs: self.hs + other.hs,
            open: self.open + other.open,
            zone: self.zone + other.zone,
        }
    }
}

/// The optimal assignment: one state per note plus the cost ledger.
/// `per_note[i]` is the cost of entering note i (its node cost merged with
/// the arc cost from note i-1), so the totals sum to `objective`.
#[derive(Debug, Clone, PartialEq)]
pub struct FingeringSolution {
    pub states: Vec<FingeringState>,
    pub objective: f64,
    pub per_note: Vec<CostBreakdown>,
}

impl FingeringSolution {
    fn from_path(states: Vec<FingeringState>, objective: f64, config: &FingeringConfig) -> Self {
        let mut per_note = Vec::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            let mut c = node_cost(s, config);
            if i > 0 {
                c = c.merged(&transition_cost(&states[i - 1], s, config));
            }
            per_note.push(c);
        }
        Self { states, objective, per_note }
    }

    pub fn summed_position_change(&self) -> u64 {
        self.states
            .windows(2)
            .map(|w| (w[0].hand_position as i64 - w[1].hand_position as i64).unsigned_abs())
            .sum()
    }

    pub fn summed_string_change(&self) -> u64 {
        self.states
            .windows(2)
            .map(|w| (w[0].placement.string as i64 - w[1].placement.string as i64).unsigned_abs())
            .sum()
    }

    pub fn open_string_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_open()).count()
    }
}

/// All admissible fingering states for one note, sorted by the tie-break
/// key. For fretted placements these are the (finger, hand position)
/// pairs satisfying the span window; open strings carry finger 0 with
/// every hand position in range, so the hand position persists as
/// tracked state through open-string notes.
pub fn enumerate_states(
    note: &NoteEvent,
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> Result<Vec<FingeringState>, SolveError> {
    let hp_lo = config.hand_position_range.0.max(1);
    let hp_hi = config.hand_position_range.1.min(spec.fret_count);
    let mut states = Vec::new();
    for placement in spec.candidates_for_pitch(note.pitch) {
        if placement.is_open() {
            for hp in hp_lo..=hp_hi {
                states.push(FingeringState { placement, finger: OPEN_FINGER, hand_position: hp });
            }
        } else {
            for finger in 1..=4u8 {
                let span = config.span(finger);
                for hp in hp_lo..=hp_hi {
                    let offset = placement.fret as i16 - hp as i16;
                    if offset >= span.min as i16 && offset <= span.max as i16 {
                        states.push(FingeringState { placement, finger, hand_position: hp });
                    }
                }
            }
        }
    }
    if states.is_empty() {
        return Err(SolveError::UnplayableNote { index: note.index, pitch: note.pitch });
    }
    Ok(states)
}

/// Per-note cost: open-string penalty, comfort-zone distance of the hand
/// position, and hand spread relative to the one-finger-per-fret posture.
pub fn node_cost(state: &FingeringState, config: &FingeringConfig) -> CostBreakdown {
    let mut cost = CostBreakdown::default();
    if state.is_open() {
        cost.open = config.w_open;
    } else {
        let natural = state.finger as i16 - 1;
        let offset = state.placement.fret as i16 - state.hand_position as i16;
        cost.hs = config.w_hs * (offset - natural).abs() as f64;
    }
    let (lo, hi) = config.comfort_zone;
    let hp = state.hand_position;
    let dist = if hp < lo { lo - hp } else { hp.saturating_sub(hi) };
    cost.zone = config.w_zone * dist as f64;
    cost
}

/// Arc cost between consecutive notes: position change and string change.
pub fn transition_cost(
    prev: &FingeringState,
    next: &FingeringState,
    config: &FingeringConfig,
) -> CostBreakdown {
    CostBreakdown {
        pc: config.w_pc * (next.hand_position as i16 - prev.hand_position as i16).abs() as f64,
        sc: config.w_sc
            * (next.placement.string as i16 - prev.placement.string as i16).abs() as f64,
        ..Default::default()
    }
}

/// A transition is kept only when the hand can cover it within the IOI
/// and the same-finger policy holds.
pub fn transition_feasibility(
    prev: &FingeringState,
    next: &FingeringState,
    ioi_s: f64,
    config: &FingeringConfig,
) -> Result<(), InfeasibilityReason> {
    let frets = (next.hand_position as i16 - prev.hand_position as i16).abs() as f64;
    let strings = (next.placement.string as i16 - prev.placement.string as i16).abs() as f64;
    let required = config.t_long * frets + config.t_vert * strings;
    if required > ioi_s {
        return Err(InfeasibilityReason::MovementTime { required_s: required, available_s: ioi_s });
    }
    if prev.finger == next.finger && prev.finger >= 1 {
        let violated = match config.same_finger_policy {
            SameFingerPolicy::Forbid => true,
            SameFingerPolicy::AllowAll => false,
            SameFingerPolicy::AllowSameFretOrSameString => {
                prev.placement.fret != next.placement.fret
                    && prev.placement.string != next.placement.string
            }
        };
        if violated {
            return Err(InfeasibilityReason::SameFinger);
        }
    }
    Ok(())
}

pub fn feasible(
    prev: &FingeringState,
    next: &FingeringState,
    ioi_s: f64,
    config: &FingeringConfig,
) -> bool {
    transition_feasibility(prev, next, ioi_s, config).is_ok()
}

/// Minimum predecessor-pair evaluations in one layer before the parallel
/// build spreads the layer across threads. Below this the fork/join
/// overhead costs more than the layer itself; standard guitar instances
/// sit well under it and run sequentially even with the `parallel`
/// feature on, while large custom instruments (wide hand-position
/// ranges, many strings) cross it.
pub const PARALLEL_WORK_THRESHOLD: usize = 1 << 16;

/// Minimum-cost fingering for the whole melody.
///
/// Ties are broken deterministically: at every DP step the predecessor
/// with the smaller (string, fret, finger, hand position) key wins, and
/// the final state is chosen the same way, so the result is a pure
/// function of the inputs. With the `parallel` feature, layers whose
/// work exceeds [`PARALLEL_WORK_THRESHOLD`] are evaluated concurrently;
/// results are identical either way.
pub fn solve(
    events: &[NoteEvent],
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> Result<FingeringSolution, SolveError> {
    if cfg!(feature = "parallel") {
        solve_impl(events, spec, config, PARALLEL_WORK_THRESHOLD)
    } else {
        solve_impl(events, spec, config, usize::MAX)
    }
}

/// Sequential-only variant of [`solve`]; kept callable with the
/// `parallel` feature on so the two paths can be compared and benched.
pub fn solve_sequential(
    events: &[NoteEvent],
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> Result<FingeringSolution, SolveError> {
    solve_impl(events, spec, config, usize::MAX)
}

/// [`solve`] with an explicit parallel work threshold (0 forces every
/// layer onto the thread pool). Used by the bench suite to measure the
/// dispatch policy; results never depend on the threshold.
#[doc(hidden)]
pub fn solve_with_threshold(
    events: &[NoteEvent],
    spec: &InstrumentSpec,
    config: &FingeringConfig,
    parallel_work_threshold: usize,
) -> Result<FingeringSolution, SolveError> {
    solve_impl(events, spec, config, parallel_work_threshold)
}

fn solve_impl(
    events: &[NoteEvent],
    spec: &InstrumentSpec,
    config: &FingeringConfig,
    parallel_work_threshold: usize,
) -> Result<FingeringSolution, SolveError> {
    config.validate()?;
    if events.is_empty() {
        return Ok(FingeringSolution { states: Vec::new(), objective: 0.0, per_note: Vec::new() });
    }
    let layers = enumerate_layers(events, spec, config)?;

    let mut costs: Vec<f64> =
        layers[0].iter().map(|s| node_cost(s, config).total()).collect();
    let mut backs: Vec<Vec<usize>> = Vec::with_capacity(events.len());

    for i in 1..events.len() {
        let ioi = events[i - 1].ioi_s;
        let prev_states = &layers[i - 1];
        let prev_costs = &costs;
        let step = |next: &FingeringState| -> Option<(f64, usize)> {
            let mut best: Option<(f64, usize)> = None;
            for (k, prev) in prev_states.iter().enumerate() {
                if !prev_costs[k].is_finite() {
                    continue;
                }
                if transition_feasibility(prev, next, ioi, config).is_err() {
                    continue;
                }
                let c = prev_costs[k] + transition_cost(prev, next, config).total();
                // Strict < keeps the lowest predecessor index on ties, and
                // states are enumerated in tie-break key order.
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, k));
                }
            }
            best.map(|(c, k)| (c + node_cost(next, config).total(), k))
        };

        let work = prev_states.len().saturating_mul(layers[i].len());
        let results: Vec<Option<(f64, usize)>> = if work >= parallel_work_threshold {
            #[cfg(feature = "parallel")]
            {
                layers[i].par_iter().map(step).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                layers[i].iter().map(step).collect()
            }
        } else {
            layers[i].iter().map(step).collect()
        };

        if results.iter().all(|r| r.is_none()) {
            return Err(SolveError::NoFeasiblePath { layer: i });
        }
        let mut next_costs = Vec::with_capacity(results.len());
        let mut next_backs = Vec::with_capacity(results.len());
        for r in results {
            match r {
                Some((c, k)) => {
                    next_costs.push(c);
                    next_backs.push(k);
                }
                None => {
                    next_costs.push(f64::INFINITY);
                    next_backs.push(usize::MAX);
                }
            }
        }
        costs = next_costs;
        backs.push(next_backs);
    }

    let mut best_idx = 0;
    for (j, &c) in costs.iter().enumerate() {
        if c < costs[best_idx] {
            best_idx = j;
        }
    }
    let objective = costs[best_idx];
    if !objective.is_finite() {
        // Single-note melodies with no feasible state are caught by
        // enumerate_states; this guards the impossible case.
        return Err(SolveError::NoFeasiblePath { layer: events.len() - 1 });
    }

    let mut indices = vec![0usize; events.len()];
    indices[events.len() - 1] = best_idx;
    for i in (1..events.len()).rev() {
        indices[i - 1] = backs[i - 1][indices[i]];
    }
    let states: Vec<FingeringState> =
        indices.iter().enumerate().map(|(i, &j)| layers[i][j]).collect();
    Ok(FingeringSolution::from_path(states, objective, config))
}

/// Exhaustive enumeration of all feasible state sequences; the test
/// oracle for [`solve`]. Same tie-break: among equal-cost sequences the
/// one whose states compare smaller from the last layer backward wins.
pub fn brute_force_solve(
    events: &[NoteEvent],
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> Result<FingeringSolution, SolveError> {
    config.validate()?;
    if events.is_empty() {
        return Ok(FingeringSolution { states: Vec::new(), objective: 0.0, per_note: Vec::new() });
    }
    let layers = enumerate_layers(events, spec, config)?;
    let size_product = layers
        .iter()
        .fold(1u128, |acc, l| acc.saturating_mul(l.len() as u128));
    if size_product > BRUTE_FORCE_LIMIT {
        return Err(SolveError::InstanceTooLarge { size_product });
    }

    struct Search<'a> {
        layers: &'a [Vec<FingeringState>],
        events: &'a [NoteEvent],
        config: &'a FingeringConfig,
        best: Option<(f64, Vec<usize>)>,
        path: Vec<usize>,
    }

    impl Search<'_> {
        fn dfs(&mut self, layer: usize, cost: f64) {
            if let Some((best_cost, _)) = &self.best {
                if cost > *best_cost {
                    return; // future costs are non-negative
                }
            }
            if layer == self.layers.len() {
                let replace = match &self.best {
                    None => true,
                    Some((best_cost, best_path)) => {
                        cost < *best_cost
                            || (cost == *best_cost
                                && reversed_lex_smaller(&self.path, best_path))
                    }
                };
                if replace {
                    self.best = Some((cost, self.path.clone()));
                }
                return;
            }
            for (j, state) in self.layers[layer].iter().enumerate() {
                let mut c = cost;
                if layer > 0 {
                    let prev = &self.layers[layer - 1][self.path[layer - 1]];
                    let ioi = self.events[layer - 1].ioi_s;
                    if transition_feasibility(prev, state, ioi, self.config).is_err() {
                        continue;
                    }
                    c += transition_cost(prev, state, self.config).total();
                }
                c += node_cost(state, self.config).total();
                self.path.push(j);
                self.dfs(layer + 1, c);
                self.path.pop();
            }
        }
    }

    let mut search = Search { layers: &layers, events, config, best: None, path: Vec::new() };
    search.dfs(0, 0.0);
    let (objective, indices) = search.best.ok_or_else(|| SolveError::NoFeasiblePath {
        layer: first_empty_frontier(&layers, events, config),
    })?;
    let states: Vec<FingeringState> =
        indices.iter().enumerate().map(|(i, &j)| layers[i][j]).collect();
    Ok(FingeringSolution::from_path(states, objective, config))
}

/// Smaller means: reading from the last element backward, the first
/// differing position holds a smaller per-layer state index. Within a
/// layer, index order equals (string, fret, finger, hand position) order.
fn reversed_lex_smaller(a: &[usize], b: &[usize]) -> bool {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return x < y;
        }
    }
    false
}

fn enumerate_layers(
    events: &[NoteEvent],
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> Result<Vec<Vec<FingeringState>>, SolveError> {
    events.iter().map(|e| enumerate_states(e, spec, config)).collect()
}

/// Forward reachability scan used only to name the first empty layer in
/// brute-force error reports.
fn first_empty_frontier(
    layers: &[Vec<FingeringState>],
    events: &[NoteEvent],
    config: &FingeringConfig,
) -> usize {
    let mut frontier: Vec<bool> = vec![true; layers[0].len()];
    for i in 1..layers.len() {
        let next: Vec<bool> = layers[i]
            .iter()
            .map(|s| {
                layers[i - 1].iter().enumerate().any(|(k, p)| {
                    frontier[k]
                        && transition_feasibility(p, s, events[i - 1].ioi_s, config).is_ok()
                })
            })
            .collect();
        if next.iter().all(|&r| !r) {
            return i;
        }
        frontier = next;
    }
    layers.len() - 1
}

/// Re-checks a solved sequence against every invariant: each state
/// realizes its note's pitch, satisfies its span window, and every
/// consecutive pair passes the feasibility test.
pub fn validate_solution(
    events: &[NoteEvent],
    states: &[FingeringState],
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> Result<(), String> {
    if events.len() != states.len() {
        return Err(format!("{} events but {} states", events.len(), states.len()));
    }
    for (e, s) in events.iter().zip(states) {
        validate_state(s, e.pitch, spec, config).map_err(|m| format!("note {}: {m}", e.index))?;
    }
    for i in 1..states.len() {
        transition_feasibility(&states[i - 1], &states[i], events[i - 1].ioi_s, config)
            .map_err(|r| format!("transition {} -> {}: {r}", i - 1, i))?;
    }
    Ok(())
}

/// Span/pitch invariants for a single state sounding `pitch`.
pub fn validate_state(
    state: &FingeringState,
    pitch: u8,
    spec: &InstrumentSpec,
    config: &FingeringConfig,
) -> Result<(), String> {
    let sounded = spec
        .pitch_at(state.placement.string, state.placement.fret)
        .map_err(|e| e.to_string())?;
    if sounded != pitch {
        return Err(format!("state sounds pitch {sounded}, expected {pitch}"));
    }
    if state.is_open() != state.placement.is_open() {
        return Err("finger 0 must coincide with fret 0".into());
    }
    let hp_lo = config.hand_position_range.0.max(1);
    let hp_hi = config.hand_position_range.1.min(spec.fret_count);
    if state.hand_position < hp_lo || state.hand_position > hp_hi {
        return Err(format!("hand position {} out of range", state.hand_position));
    }
    if !state.is_open() {
        let span = config.span(state.finger);
        let offset = state.placement.fret as i16 - state.hand_position as i16;
        if offset < span.min as i16 || offset > span.max as i16 {
            return Err(format!(
                "finger {} at offset {offset} violates span [{}, {}]",
                state.finger, span.min, span.max
            ));
        }
    }
    Ok(())
}
