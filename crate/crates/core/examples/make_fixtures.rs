//! Writes the synthetic fixture sets: `cargo run --example make_fixtures -- <dir>`.

use std::path::PathBuf;

fn main() -> ndvi_core::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures".into())
        .into();
    let set = ndvi_core::fixtures::write_sentinel2_fixtures(dir.join("sentinel2"))?;
    let l8 = ndvi_core::fixtures::write_landsat8_fixtures(dir.join("landsat8"))?;
    println!("{}", set.manifest.display());
    println!("{}", l8.display());
    Ok(())
}
