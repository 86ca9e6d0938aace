//! Runs both CFTP algorithms on a hand-written uniform trace and shows where
//! each symbol of the output came from.

use std::collections::BTreeMap;

use vlmc_cftp::cftp::{PerfectSampler, Provenance};
use vlmc_cftp::dsl::parse_model;
use vlmc_cftp::random::IndexedUniformSource;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = parse_model(include_str!("../models/renewal.vlmc"))?;
    // U_{-3}, ..., U_1
    let trace: BTreeMap<i64, f64> = (-3..=1).zip([0.1, 0.9, 0.3, 0.7, 0.5]).collect();
    let source = IndexedUniformSource::fixed_trace(trace)?;
    let sampler = PerfectSampler::new(&model)?;

    for k in [-2, -3] {
        println!("constructible from {k}: {:?}", sampler.constructible(&source, k, 1)?);
    }
    let r1 = sampler.algorithm1(&source, 0, 1)?;
    let r2 = sampler.algorithm2(&source, 0, 1)?;
    assert_eq!(r1.sample, r2.sample);
    println!("theta[0,1] = {}", r2.theta);
    println!("steps: algorithm1 {}, algorithm2 {}", r1.steps, r2.steps);
    for (i, (s, p)) in r2.sample.iter().zip(&r2.provenance).enumerate() {
        let how = match p {
            Provenance::Spontaneous => "spontaneous".to_string(),
            Provenance::Context(len) => format!("context of length {len}"),
        };
        println!("X_{:<3} = {}  ({how})", r2.theta + i as i64, model.alphabet().char_of(*s));
    }

    let binary_tree = parse_model(include_str!("../models/binary_tree.vlmc"))?;
    let sampler = PerfectSampler::new(&binary_tree)?;
    let r = sampler.algorithm2(&IndexedUniformSource::counter(42), 0, 9)?;
    println!("\nbinary_tree seed 42: theta = {}, steps = {}, X_0..X_9 = {}", r.theta, r.steps, binary_tree.alphabet().render(r.window()));
    Ok(())
}
