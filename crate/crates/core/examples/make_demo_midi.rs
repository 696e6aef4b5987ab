//! Regenerates the demo MIDI fixture (a 12-bar blues lead in A).
//!
//! Run with: `cargo run -p tabforge-core --example make_demo_midi [path]`

use tabforge_core::testing::blues_demo_smf;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/tests/fixtures/blues_in_a.mid".into());
    let bytes = blues_demo_smf();
    std::fs::write(&path, &bytes).expect("write fixture");
    println!("wrote {} bytes to {path}", bytes.len());
}
