//! Regenerates `assets/humanoid.fftm` from the procedural generator.

fn main() -> std::io::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/humanoid.fftm");
    let template = flowfit::body::humanoid::procedural_humanoid();
    std::fs::write(path, template.to_bytes())?;
    println!("wrote {path} ({} vertices)", template.num_vertices());
    Ok(())
}
