//! Writes a checkerboard sample in both file formats, reads it back, and
//! exports the mesh listing and the stiffness matrix for inspection with
//! other tools.
//!
//! cargo run --example field_io -- [dir]

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use homog::assembly::assemble;
use homog::coeff::{analytic_abar, sample_checkerboard, CheckerboardField};
use homog::mesh::build_mesh;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "field_io".into()));
    std::fs::create_dir_all(&dir)?;

    let field = sample_checkerboard(8, 42, 1.0, 9.0)?;
    field.write_text(BufWriter::new(File::create(dir.join("field.txt"))?))?;
    field.write_binary(BufWriter::new(File::create(dir.join("field.bin"))?))?;
    let from_text = CheckerboardField::read_text(BufReader::new(File::open(dir.join("field.txt"))?))?;
    let from_binary = CheckerboardField::read_binary(BufReader::new(File::open(dir.join("field.bin"))?))?;
    assert_eq!(from_text.values(), field.values());
    assert_eq!(from_binary.values(), field.values());
    // The same seed always reproduces the same field.
    assert_eq!(sample_checkerboard(8, 42, 1.0, 9.0)?.values(), field.values());

    let mesh = build_mesh(8, 1)?;
    mesh.write_listing(BufWriter::new(File::create(dir.join("mesh.txt"))?))?;
    let system = assemble(&mesh, &field, &analytic_abar(1.0, 9.0)?, 1.0)?;
    system.a_het.write_coordinate(BufWriter::new(File::create(dir.join("stiffness.mtx"))?))?;
    println!("wrote field, mesh and {}x{} stiffness to {}", system.n_dofs(), system.n_dofs(), dir.display());
    Ok(())
}
