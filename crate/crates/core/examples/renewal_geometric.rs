//! On the renewal model only the symbol 2 is spontaneous, so -θ[0,0] is
//! geometric with parameter ε. Checks this with a chi-square test.

use rayon::prelude::*;
use vlmc_cftp::cftp::PerfectSampler;
use vlmc_cftp::dsl::parse_model;
use vlmc_cftp::oracle::geometric_test;
use vlmc_cftp::random::IndexedUniformSource;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = parse_model(include_str!("../models/renewal.vlmc"))?;
    let sampler = PerfectSampler::new(&model)?;
    let runs = 100_000u64;
    let depths = (0..runs)
        .into_par_iter()
        .map(|s| sampler.algorithm2(&IndexedUniformSource::counter(s), 0, 0).map(|r| (-r.theta) as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = depths.iter().sum::<u64>() as f64 / runs as f64;
    println!("mean -theta = {mean:.4} (geometric mean {:.4})", (1.0 - model.epsilon()) / model.epsilon());
    let report = geometric_test(&depths, model.epsilon(), 0.99)?;
    println!(
        "chi-square {:.2} on {} dof, critical {:.2}, p-value {:.3}: {}",
        report.statistic,
        report.dof,
        report.critical,
        report.p_value,
        if report.pass { "pass" } else { "fail" }
    );
    Ok(())
}
