//! End-to-end tests of the `tabforge` binary: subcommands, flags, exit
//! codes, and output determinism.

use std::path::Path;
use std::process::{Command, Output};

use tabforge_core::musicxml::validate_musicxml;
use tabforge_core::testing::{blues_demo_smf, melody_smf};

fn tabforge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabforge"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_demo(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("demo.mid");
    std::fs::write(&path, blues_demo_smf()).unwrap();
    path
}

#[test]
fn generate_produces_valid_musicxml_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    write_demo(dir.path());
    let out = tabforge(
        &["generate", "demo.mid", "--dump-solution", "--dump-annotations"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let xml = std::fs::read_to_string(dir.path().join("demo.musicxml")).unwrap();
    validate_musicxml(&xml).unwrap();
    let solution: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("demo.solution.json")).unwrap())
            .unwrap();
    assert_eq!(solution["notes"].as_array().unwrap().len(), 75);
    assert!(solution["config"]["fingering"]["w_pc"].is_number());
    let annotations: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("demo.annotations.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(annotations["notes"].as_array().unwrap().len(), 75);
}

#[test]
fn unplayable_note_exits_one_and_names_the_note() {
    let dir = tempfile::tempdir().unwrap();
    // Seven playable notes, then pitch 30 (below the low E).
    let mut notes: Vec<(u8, u64, u64)> = (0..7).map(|i| (60 + i, i as u64 * 480, 480)).collect();
    notes.push((30, 7 * 480, 480));
    std::fs::write(dir.path().join("bad.mid"), melody_smf(480, &notes)).unwrap();
    let out = tabforge(&["generate", "bad.mid"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("note 7"), "stderr: {stderr}");
    assert!(stderr.contains("pitch 30"), "stderr: {stderr}");
}

#[test]
fn infeasible_movement_model_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("jump.mid"),
        melody_smf(480, &[(41, 0, 120), (85, 120, 120)]),
    )
    .unwrap();
    let config = r#"{ "fingering": { "t_long": 50.0, "t_vert": 50.0 } }"#;
    std::fs::write(dir.path().join("tight.json"), config).unwrap();
    let out = tabforge(&["generate", "jump.mid", "--config", "tight.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("frontier empty at note 1"), "stderr: {stderr}");
}

#[test]
fn unknown_config_keys_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    write_demo(dir.path());
    std::fs::write(dir.path().join("typo.json"), r#"{ "sead": 4 }"#).unwrap();
    let out = tabforge(&["generate", "demo.mid", "--config", "typo.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_init_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = tabforge(&["config", "init", "--output", "config.json"], dir.path());
    assert!(out.status.success());
    write_demo(dir.path());
    let out = tabforge(&["generate", "demo.mid", "--config", "config.json"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_demo(dir.path());
    let args = [
        "generate",
        "demo.mid",
        "--seed",
        "9",
        "--dump-solution",
        "--dump-annotations",
        "--output",
        "a.musicxml",
    ];
    assert!(tabforge(&args, dir.path()).status.success());
    let mut args2 = args;
    args2[7] = "b.musicxml";
    assert!(tabforge(&args2, dir.path()).status.success());
    for (a, b) in [
        ("a.musicxml", "b.musicxml"),
        ("a.solution.json", "b.solution.json"),
        ("a.annotations.json", "b.annotations.json"),
    ] {
        let left = std::fs::read(dir.path().join(a)).unwrap();
        let right = std::fs::read(dir.path().join(b)).unwrap();
        assert_eq!(left, right, "{a} and {b} differ");
    }
}

#[test]
fn clip_overlaps_flag_rescues_legato_input() {
    let dir = tempfile::tempdir().unwrap();
    // Second note starts before the first ends.
    let notes = [(60u8, 0u64, 700u64), (64, 480, 480)];
    std::fs::write(dir.path().join("legato.mid"), melody_smf(480, &notes)).unwrap();
    let strict = tabforge(&["generate", "legato.mid"], dir.path());
    assert_eq!(strict.status.code(), Some(1));
    let clipped = tabforge(&["generate", "legato.mid", "--clip-overlaps"], dir.path());
    assert!(clipped.status.success());
}

#[test]
fn stats_scans_generated_outputs_and_compares() {
    let dir = tempfile::tempdir().unwrap();
    write_demo(dir.path());
    std::fs::create_dir(dir.path().join("corpus")).unwrap();
    for seed in ["1", "2", "3"] {
        let out = tabforge(
            &[
                "generate",
                "demo.mid",
                "--seed",
                seed,
                "--output",
                &format!("corpus/take{seed}.musicxml"),
            ],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let out = tabforge(&["stats", "corpus", "--output", "stats.json"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("string"), "stdout: {stdout}");
    assert!(stdout.contains("total"), "stdout: {stdout}");
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats["total_notes"].as_u64().unwrap(), 3 * 75);
    // The ratios table is loadable as annotator targets.
    let ratios = stats["ratios"].clone();
    let config = serde_json::json!({ "techniques": { "ratios": ratios } });
    std::fs::write(dir.path().join("from_stats.json"), config.to_string()).unwrap();
    let out = tabforge(
        &["generate", "demo.mid", "--config", "from_stats.json", "--output", "again.musicxml"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // Comparing a stats file against itself reports zero distance.
    let out = tabforge(&["stats", "--compare", "stats.json", "stats.json"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("L1 distance: 0.0000"), "stdout: {stdout}");
}

#[test]
fn empty_corpus_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = tabforge(&["stats", "empty"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn explicit_track_selection_works() {
    let dir = tempfile::tempdir().unwrap();
    let mut builder = tabforge_core::testing::SmfBuilder::new(480);
    builder.tempo(0, 500_000);
    builder.start_track();
    builder.note(64, 0, 480);
    builder.start_track();
    builder.note(72, 0, 480);
    std::fs::write(dir.path().join("multi.mid"), builder.build()).unwrap();

    let out = tabforge(&["generate", "multi.mid", "--track", "2"], dir.path());
    assert!(out.status.success());
    let xml = std::fs::read_to_string(dir.path().join("multi.musicxml")).unwrap();
    assert!(xml.contains("<octave>5</octave>"), "track 2 holds C5");

    let out = tabforge(&["generate", "multi.mid", "--track", "7"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
