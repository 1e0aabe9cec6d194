//! Write sample paths to the binary column format and read them back.

use cltlab::models::pathfile::{read_paths, write_paths, PATH_HEADER_LEN};
use cltlab::models::{Family, Model, ModelSpec, SigmaRule};

fn main() -> cltlab::Result<()> {
    let spec = ModelSpec::new(32, 3.0, Family::GaussianIid { sigma: SigmaRule::default() });
    let model = Model::compile(&spec)?;
    let dir = std::env::temp_dir().join("cltlab-path-example");
    std::fs::create_dir_all(&dir).map_err(|e| cltlab::Error::Io { path: dir.clone(), source: e })?;
    let file = dir.join("paths.bin");
    write_paths(&model, 5, 100, &file)?;

    let size = std::fs::metadata(&file).map(|m| m.len()).unwrap_or(0);
    println!("{} bytes = {PATH_HEADER_LEN} + 8 * 32 * 100", size);
    let (header, rows) = read_paths(&file, Some(&spec))?;
    println!("seed {} n {} replicates {}", header.master_seed, header.n, header.replicates);
    let s0: f64 = rows[0].iter().sum();
    println!("S_n of replicate 0: {s0}");
    Ok(())
}
