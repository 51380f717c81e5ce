//! Round trip of a simulated stream through the binary and CSV formats.

use cascade_tomo::sim::{export_stream, import_stream, simulate_autocorrelation_run, EmitterConfig, Species, CHANNEL_A};

fn main() -> cascade_tomo::Result<()> {
    let cfg = EmitterConfig::default();
    let (a, _) = simulate_autocorrelation_run(&cfg, Species::X, 1_000_000, 1)?;
    let dir = std::env::temp_dir().join(format!("cascade-tomo-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| cascade_tomo::Error::Io { path: dir.clone(), source: e })?;
    for name in ["stream.ctts", "stream.csv"] {
        let path = dir.join(name);
        export_stream(&a, &path, true)?;
        let back = import_stream(&path)?;
        let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        println!(
            "{name}: {} events, {size} bytes, timestamps equal {}, warnings {:?}",
            back.stream.len(),
            back.stream.timestamps(CHANNEL_A) == a.timestamps(CHANNEL_A),
            back.warnings
        );
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
