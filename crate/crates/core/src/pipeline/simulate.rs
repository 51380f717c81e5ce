use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sha256_file, to_stable_json, write_text, RunConfig, TOOLKIT_VERSION};
use crate::error::{Error, Result};
use crate::optics::{tomography_bases, BasisPair};
use crate::sim::{derive_seed, export_stream, import_stream, simulate_projection_run, StreamFormat, TimestampStream};

pub const MANIFEST_NAME: &str = "manifest.json";

/// One stream file, with its path relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamFile {
    pub path: PathBuf,
    pub records: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub basis: BasisPair,
    pub seed: u64,
    pub duration_ps: u64,
    /// XX arm, channel 0.
    pub xx: StreamFile,
    /// X arm, channel 1.
    pub x: StreamFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub config: RunConfig,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            index: e.line(),
            message: e.to_string(),
        })
    }

    /// Checks every listed file against its hash; `dir` is the manifest
    /// directory.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for e in &self.entries {
            for f in [&e.xx, &e.x] {
                let path = dir.join(&f.path);
                let digest = sha256_file(&path)?;
                if digest != f.sha256 {
                    return Err(Error::validation(format!(
                        "{} does not match its manifest hash",
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Both streams for `basis`, read back from `dir`.
    pub fn load_pair(&self, dir: &Path, basis: BasisPair) -> Result<(TimestampStream, TimestampStream)> {
        let entry = self
            .entries
            .iter()
            .find(|e| e.basis == basis)
            .ok_or_else(|| Error::validation(format!("manifest has no streams for basis pair {basis}")))?;
        let xx = import_stream(&dir.join(&entry.xx.path))?.stream;
        let x = import_stream(&dir.join(&entry.x.path))?.stream;
        Ok((xx, x))
    }
}

/// Simulates one projection run per basis pair and writes both arms plus a
/// manifest to `io.output_dir`. Projection `i` is seeded with
/// `derive_seed(seed, i)`. Returns the manifest path and contents.
pub fn cmd_simulate(config: &RunConfig) -> Result<(PathBuf, Manifest)> {
    config.validate()?;
    let sim = config
        .simulation
        .ok_or_else(|| Error::validation("simulate needs a simulation block with n_pulses and seed"))?;
    let out = &config.io.output_dir;
    let stream_dir = out.join("streams");
    std::fs::create_dir_all(&stream_dir).map_err(|e| Error::io(&stream_dir, e))?;
    let ext = match config.io.formats.streams {
        StreamFormat::Binary => "ctts",
        StreamFormat::Csv => "csv",
    };
    let bases = tomography_bases(config.tomography.basis_count)?;

    // Generation runs in parallel a batch at a time; files are written in
    // order afterwards so memory stays bounded by one batch.
    let batch = rayon::current_num_threads().max(1);
    let mut entries = Vec::with_capacity(bases.len());
    for (chunk_index, chunk) in bases.chunks(batch).enumerate() {
        let runs: Vec<(BasisPair, u64, TimestampStream, TimestampStream)> = chunk
            .par_iter()
            .enumerate()
            .map(|(j, &basis)| {
                let index = (chunk_index * batch + j) as u64;
                let seed = derive_seed(sim.seed, index);
                let (xx, x) = simulate_projection_run(
                    &config.emitter,
                    basis.vectors(config.tomography.convention),
                    sim.n_pulses,
                    seed,
                )?;
                Ok((basis, seed, xx, x))
            })
            .collect::<Result<_>>()?;
        for (basis, seed, xx, x) in runs {
            let write = |arm: &str, stream: &TimestampStream| -> Result<StreamFile> {
                let rel = PathBuf::from("streams").join(format!("{basis}_{arm}.{ext}"));
                let path = out.join(&rel);
                export_stream(stream, &path, false)?;
                Ok(StreamFile {
                    path: rel,
                    records: stream.len(),
                    sha256: sha256_file(&path)?,
                })
            };
            entries.push(ManifestEntry {
                basis,
                seed,
                duration_ps: xx.duration,
                xx: write("xx", &xx)?,
                x: write("x", &x)?,
            });
        }
    }
    let manifest = Manifest {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        config: config.clone(),
        entries,
    };
    let path = out.join(MANIFEST_NAME);
    write_text(&path, &to_stable_json(&manifest)?)?;
    Ok((path, manifest))
}
