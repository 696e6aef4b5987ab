//! Command-line interface: compile MIDI melodies to enriched tablature,
//! extract corpus statistics, and manage configuration files.
//!
//! Exit codes: 0 success, 1 input error, 2 infeasibility, 3 internal
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use walkdir::WalkDir;

use tabforge_core::pipeline::{generate, GenerateOptions, PipelineError};
use tabforge_core::stats::{compare_distributions, load_stats, scan_corpus, CorpusStats};
use tabforge_core::RunConfig;

#[derive(Parser)]
#[command(
    name = "tabforge",
    version,
    about = "Compile MIDI melodies into enriched guitar tablature"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a monophonic MIDI file into a MusicXML tablature
    Generate {
        /// Input Standard MIDI File (format 0 or 1)
        midi: Option<PathBuf>,
        /// Configuration file (JSON); defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output .musicxml path (default: input path with .musicxml)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the configuration seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the quantization grid (subdivisions per quarter)
        #[arg(long)]
        grid: Option<u16>,
        /// Read this track instead of the first track with notes
        #[arg(long)]
        track: Option<usize>,
        /// Truncate overlapping notes instead of rejecting the file
        #[arg(long)]
        clip_overlaps: bool,
        /// Also write <output stem>.solution.json
        #[arg(long)]
        dump_solution: bool,
        /// Also write <output stem>.annotations.json
        #[arg(long)]
        dump_annotations: bool,
    },
    /// Per-string technique statistics over MusicXML files or JSON dumps
    Stats {
        /// Files or directories to scan (or two stats files with --compare)
        paths: Vec<PathBuf>,
        /// Write the stats JSON here
        #[arg(long)]
        output: Option<PathBuf>,
        /// Compare two previously written stats files instead of scanning
        #[arg(long)]
        compare: bool,
    },
    /// Configuration helpers
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Write a configuration file with all defaults filled in
    Init {
        /// Destination (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate {
            midi,
            config,
            output,
            seed,
            grid,
            track,
            clip_overlaps,
            dump_solution,
            dump_annotations,
        } => cmd_generate(
            midi,
            config,
            output,
            seed,
            grid,
            GenerateOptions { track, clip_overlaps, dump_solution, dump_annotations },
        ),
        Command::Stats { paths, output, compare } => cmd_stats(&paths, output, compare),
        Command::Config { action: ConfigAction::Init { output } } => cmd_config_init(output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            let code = error
                .downcast_ref::<PipelineError>()
                .map(PipelineError::exit_code)
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            let config =
                RunConfig::from_json(&text).with_context(|| format!("in config {}", p.display()))?;
            Ok(config)
        }
    }
}

fn cmd_generate(
    midi: Option<PathBuf>,
    config_path: Option<PathBuf>,
    output: Option<PathBuf>,
    seed: Option<u64>,
    grid: Option<u16>,
    options: GenerateOptions,
) -> Result<()> {
    let mut config = load_config(config_path.as_deref())?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(grid) = grid {
        config.quantize_grid = grid;
    }
    let midi_path = match midi.or_else(|| config.input.clone()) {
        Some(p) => p,
        None => bail!("no input file: pass a MIDI path or set \"input\" in the config"),
    };
    let output_path = output
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| midi_path.with_extension("musicxml"));

    let bytes =
        std::fs::read(&midi_path).with_context(|| format!("cannot read {}", midi_path.display()))?;
    let result = generate(&bytes, &config, &options)?;

    std::fs::write(&output_path, &result.musicxml)
        .with_context(|| format!("cannot write {}", output_path.display()))?;
    if let Some(json) = &result.solution_json {
        let path = sibling(&output_path, "solution.json");
        std::fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(json) = &result.annotations_json {
        let path = sibling(&output_path, "annotations.json");
        std::fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if config.verbosity > 0 {
        eprintln!(
            "{} -> {}: {} notes, {} measures, objective {}",
            midi_path.display(),
            output_path.display(),
            result.note_count,
            result.measure_count,
            result.objective,
        );
        for line in &result.diagnostics {
            eprintln!("note: {line}");
        }
    }
    Ok(())
}

fn sibling(output: &Path, suffix: &str) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    output.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_stats(paths: &[PathBuf], output: Option<PathBuf>, compare: bool) -> Result<()> {
    if compare {
        if paths.len() != 2 {
            bail!("--compare needs exactly two stats files");
        }
        let a = load_stats(&paths[0])?;
        let b = load_stats(&paths[1])?;
        print_comparison(&a, &b);
        return Ok(());
    }

    let files = collect_files(paths)?;
    if files.is_empty() {
        bail!("no .musicxml/.xml/.json files found under the given paths");
    }
    let (stats, warnings) = scan_corpus(&files)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    print_stats_table(&stats);
    if let Some(path) = output {
        let mut json = serde_json::to_string_pretty(&stats)?;
        json.push('\n');
        std::fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))?;
        eprintln!("stats written to {}", path.display());
    }
    Ok(())
}

fn collect_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            for entry in WalkDir::new(path).sort_by_file_name() {
                let entry = entry?;
                if entry.file_type().is_file() && has_scannable_extension(entry.path()) {
                    files.push(entry.into_path());
                }
            }
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

fn has_scannable_extension(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("musicxml") | Some("xml") | Some("json")
    )
}

fn print_stats_table(stats: &CorpusStats) {
    println!("string   notes  hammer_on  pull_off   vibrato     slide      bend");
    for (i, ratios) in stats.ratios.iter().enumerate() {
        println!(
            "{:>6}  {:>6}  {:>9.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}",
            i + 1,
            stats.notes_per_string[i],
            ratios.hammer_on,
            ratios.pull_off,
            ratios.vibrato,
            ratios.slide,
            ratios.bend,
        );
    }
    println!("total   {:>6}", stats.total_notes);
}

fn print_comparison(a: &CorpusStats, b: &CorpusStats) {
    let cmp = compare_distributions(a, b);
    println!("string   share A   share B");
    for (i, (sa, sb)) in cmp.shares.iter().enumerate() {
        println!("{:>6}  {:>8.4}  {:>8.4}", i + 1, sa, sb);
    }
    println!("L1 distance: {:.4}", cmp.l1_distance);
}

fn cmd_config_init(output: Option<PathBuf>) -> Result<()> {
    let text = RunConfig::default().to_json_pretty();
    match output {
        Some(path) => {
            std::fs::write(&path, text)
                .with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("default configuration written to {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
