//! Rewrites the generated files under the data directory.

use distortion_core::{data, lexicon::Lexicon, synthetic};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = data::data_dir();
    let lexicon = Lexicon::load(data::lexicon_path())?;
    for (rel, body) in synthetic::bundled_files(&lexicon)? {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, body)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
