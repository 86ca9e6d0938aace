//! Regeneration anchors read off a sample alone, compared with the hidden
//! regeneration times that need the uniforms.

use vlmc_cftp::analysis::{hidden_regeneration, visible_regeneration};
use vlmc_cftp::cftp::PerfectSampler;
use vlmc_cftp::dsl::parse_model;
use vlmc_cftp::random::IndexedUniformSource;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for file in ["renewal", "binary_tree"] {
        let text = std::fs::read_to_string(format!("{}/models/{file}.vlmc", env!("CARGO_MANIFEST_DIR")))?;
        let model = parse_model(&text)?;
        let source = IndexedUniformSource::counter(5);
        let sample = PerfectSampler::new(&model)?.sample_stationary(&source, 0, 59)?;
        let v = visible_regeneration(sample.window(), 0, 59, &model)?;
        println!("{file}: sample {}", model.alphabet().render(sample.window()));
        println!("  sigma = {}, theta_x = {:?}, anchors {:?}", v.sigma, v.theta_x, v.anchors);
        let blocks: Vec<String> = v.blocks.iter().map(|b| model.alphabet().render(&b.symbols)).collect();
        println!("  blocks {}", blocks.join(" | "));
        let hidden = hidden_regeneration(&source, 0, 59, 40, &model)?;
        println!("  hidden regeneration times (horizon 40): {:?}", hidden.times);
    }
    Ok(())
}
