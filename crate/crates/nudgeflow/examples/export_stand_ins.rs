//! Writes the seeded stand-in rasters used when a config names no input
//! files, so they can be inspected or edited and fed back in.
//!
//! `cargo run -p nudgeflow --example export_stand_ins -- [dir]` (default `data`).

use std::path::PathBuf;

use anyhow::Result;
use nudgeflow::io::write_raster_file;
use nudgeflow_core::scenarios::{Example3Data, Example4Data, Raster};

/// Seed used by the bundled configs.
const SEED: u64 = 1;
const EX3_CELLS: usize = 64;
const EX4_CELLS: usize = 48;

fn main() -> Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));

    let dir = root.join("example3");
    std::fs::create_dir_all(&dir)?;
    let e3 = Example3Data::stand_in(SEED, EX3_CELLS)?;
    write_raster_file(&dir.join("permeability.raster"), &e3.permeability)?;
    let (source, initial) = (e3.source.clone(), e3.initial.clone());
    write_raster_file(&dir.join("source.raster"), &Raster::from_fn(EX3_CELLS, EX3_CELLS, 1.0, 1.0, |p| source(p))?)?;
    write_raster_file(&dir.join("initial.raster"), &Raster::from_fn(EX3_CELLS, EX3_CELLS, 1.0, 1.0, |p| initial(p))?)?;

    let dir = root.join("example4");
    std::fs::create_dir_all(&dir)?;
    let e4 = Example4Data::stand_in(SEED, EX4_CELLS)?;
    let side = e4.params.side;
    write_raster_file(&dir.join("permeability.raster"), &e4.permeability)?;
    let initial = e4.initial.clone();
    write_raster_file(&dir.join("initial.raster"), &Raster::from_fn(EX4_CELLS, EX4_CELLS, side, side, |p| initial(p))?)?;
    println!("wrote stand-in rasters under {}", root.display());
    Ok(())
}
