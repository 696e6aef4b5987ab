//! End-to-end pipeline: MIDI bytes in, MusicXML and JSON dumps out.
//!
//! Every stage failure is tagged with the stage name so the command line
//! can report where a melody failed and map the error onto its exit code
//! class (input error, infeasibility, internal).

use serde::Serialize;
use thiserror::Error;

use crate::annotate::{annotate, AnnotateError, NoteDump};
use crate::config::{ConfigError, RunConfig};
use crate::midi::{parse_midi, quantize, MidiError, OverlapPolicy, ParseOptions};
use crate::musicxml::{build_score, serialize, ScoreMeta, XmlError};
use crate::solver::{solve, CostBreakdown, SolveError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("parse: {0}")]
    Parse(#[from] MidiError),
    #[error("solve: {0}")]
    Solve(#[from] SolveError),
    #[error("annotate: {0}")]
    Annotate(#[from] AnnotateError),
    #[error("export: {0}")]
    Export(#[from] XmlError),
}

impl PipelineError {
    /// Exit-code class: 1 input error, 2 infeasibility, 3 internal error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Solve(SolveError::NoFeasiblePath { .. }) => 2,
            PipelineError::Solve(SolveError::InstanceTooLarge { .. }) => 3,
            PipelineError::Annotate(AnnotateError::MismatchedLengths { .. }) => 3,
            PipelineError::Export(_) => 3,
            _ => 1,
        }
    }
}

/// Per-run switches that come from command-line flags rather than the
/// configuration file.
#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub track: Option<usize>,
    pub clip_overlaps: bool,
    pub dump_solution: bool,
    pub dump_annotations: bool,
}

#[derive(Debug, Clone)]
pub struct GenerateOutput {
    pub musicxml: String,
    pub solution_json: Option<String>,
    pub annotations_json: Option<String>,
    pub note_count: usize,
    pub measure_count: usize,
    pub objective: f64,
    pub diagnostics: Vec<String>,
}

#[derive(Serialize)]
struct SolutionNoteDump {
    index: usize,
    pitch: u8,
    string: u8,
    fret: u8,
    finger: u8,
    hand_position: u8,
    cost_breakdown: CostDump,
}

#[derive(Serialize)]
struct CostDump {
    pc: f64,
    sc: f64,
    hs: f64,
    open: f64,
    zone: f64,
    total: f64,
}

impl From<&CostBreakdown> for CostDump {
    fn from(c: &CostBreakdown) -> Self {
        Self { pc: c.pc, sc: c.sc, hs: c.hs, open: c.open, zone: c.zone, total: c.total() }
    }
}

#[derive(Serialize)]
struct SolutionDump<'a> {
    seed: u64,
    objective: f64,
    config: &'a RunConfig,
    notes: Vec<SolutionNoteDump>,
}

#[derive(Serialize)]
struct AnnotationsDump<'a> {
    seed: u64,
    config: &'a RunConfig,
    diagnostics: &'a [String],
    notes: Vec<NoteDump>,
}

/// Run the full pipeline on SMF bytes. Deterministic: identical bytes,
/// configuration, and seed produce byte-identical outputs.
pub fn generate(
    midi_bytes: &[u8],
    config: &RunConfig,
    options: &GenerateOptions,
) -> Result<GenerateOutput, PipelineError> {
    config.validate()?;

    let parse_options = ParseOptions {
        track: options.track,
        overlap_policy: if options.clip_overlaps {
            OverlapPolicy::ClipToNextOnset
        } else {
            OverlapPolicy::Error
        },
    };
    let parsed = parse_midi(midi_bytes, &parse_options)?;
    let rhythm = quantize(
        &parsed.events,
        parsed.tempo.ppq,
        &parsed.time_signatures,
        config.quantize_grid,
    )?;
    let solution = solve(&parsed.events, &config.instrument, &config.fingering)?;
    let melody = annotate(
        &parsed.events,
        &solution.states,
        &config.instrument,
        &config.fingering,
        &config.techniques,
        config.seed,
    )?;

    let config_echo = serde_json::to_string(config).expect("config serializes");
    let meta = ScoreMeta {
        config_echo: Some(config_echo),
        bpm: Some(parsed.tempo.initial_bpm()),
        ..ScoreMeta::default()
    };
    let doc = build_score(&melody.notes, &rhythm, &config.instrument, meta)?;
    let musicxml = serialize(&doc);

    let solution_json = options.dump_solution.then(|| {
        let dump = SolutionDump {
            seed: config.seed,
            objective: solution.objective,
            config,
            notes: solution
                .states
                .iter()
                .zip(&solution.per_note)
                .enumerate()
                .map(|(index, (state, cost))| SolutionNoteDump {
                    index,
                    pitch: parsed.events[index].pitch,
                    string: state.placement.string,
                    fret: state.placement.fret,
                    finger: state.finger,
                    hand_position: state.hand_position,
                    cost_breakdown: cost.into(),
                })
                .collect(),
        };
        to_pretty_json(&dump)
    });
    let annotations_json = options.dump_annotations.then(|| {
        let dump = AnnotationsDump {
            seed: config.seed,
            config,
            diagnostics: &melody.diagnostics,
            notes: melody.notes.iter().map(NoteDump::from_rich).collect(),
        };
        to_pretty_json(&dump)
    });

    Ok(GenerateOutput {
        musicxml,
        solution_json,
        annotations_json,
        note_count: melody.notes.len(),
        measure_count: doc.measures.len(),
        objective: solution.objective,
        diagnostics: melody.diagnostics,
    })
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("dump serializes");
    text.push('\n');
    text
}
