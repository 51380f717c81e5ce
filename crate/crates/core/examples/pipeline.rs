//! The command-line workflow as library calls: configure, simulate all
//! projections to disk, reconstruct per delay bin, and summarise.

use cascade_tomo::pipeline::{cmd_report, cmd_simulate, cmd_tomo, RunConfig, TomoSource};

fn main() -> cascade_tomo::Result<()> {
    let out = std::env::temp_dir().join(format!("cascade-tomo-pipeline-{}", std::process::id()));
    let overrides = [
        r#"simulation={"n_pulses":300000,"seed":2024}"#.to_string(),
        "emitter.setup_efficiency=1".to_string(),
        "emitter.detector_efficiency=1".to_string(),
        "tomography.max_delay_ps=6000".to_string(),
        format!("io.output_dir={}", out.display()),
    ];
    let config = RunConfig::load(None, &overrides, None)?;

    let (manifest_path, manifest) = cmd_simulate(&config)?;
    println!("{} stream pairs listed in {}", manifest.entries.len(), manifest_path.display());

    let (report_path, report) = cmd_tomo(&TomoSource::Manifest(manifest_path), &config)?;
    print!("{}", cmd_report(&report_path)?);
    if let Some(fit) = report.fit("fidelity_oscillation") {
        println!("derived: {:?}", fit.derived);
    }
    let _ = std::fs::remove_dir_all(&out);
    Ok(())
}
