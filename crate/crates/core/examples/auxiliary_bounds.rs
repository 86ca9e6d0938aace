//! The block trace Z̄, the dominating processes D^(n) and the block-level
//! regeneration bound, on the tabulated three-letter model.

use vlmc_cftp::analysis::{
    coalescence_violations, d_process, ellbar, block_bound_check, monotonicity_violations, sigma, theta_bar_in,
    theta_from_lengths, RescaledTrace,
};
use vlmc_cftp::dsl::parse_model;
use vlmc_cftp::random::IndexedUniformSource;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = parse_model(include_str!("../models/table_abc.vlmc"))?;
    let bars: Vec<u64> = (0..6).map(|i| ellbar(&model, i)).collect();
    println!("ellbar(0..6) = {bars:?}, sigma = {}", sigma(&model));

    // A block pattern on blocks -12..=2: 1 marks a block that reads w spontaneously.
    let zbar: Vec<bool> = "11*1**11***1***".chars().map(|c| c == '1').collect();
    let trace = RescaledTrace::from_zbar(&model, -12, zbar);
    let tb = theta_bar_in(&trace, 2).expect("pattern has a regeneration");
    println!("theta_bar[0,2] = {tb} (literal search: {:?})", theta_from_lengths(2, 12, |b| trace.lbar_at(b)));
    println!("so theta[0,6] >= {}", 3 * (tb - 1) + 1);

    let source = IndexedUniformSource::counter(11);
    let ds: Vec<_> = [-13, -11, -8].iter().map(|&o| d_process(&source, o, 50, &model)).collect::<Result<_, _>>()?;
    for d in &ds {
        let head: Vec<u64> = (d.origin..d.origin + 15).map(|i| d.at(i)).collect();
        println!("D^({}) from its origin: {head:?}", d.origin);
    }
    println!(
        "monotonicity violations: {}, coalescence violations: {}",
        monotonicity_violations(&ds[0], &ds[1]).len() + monotonicity_violations(&ds[1], &ds[2]).len(),
        coalescence_violations(&ds[0], &ds[1]).len() + coalescence_violations(&ds[1], &ds[2]).len()
    );

    let identity = parse_model(include_str!("../models/identity.vlmc"))?;
    for seed in 0..5 {
        let outcome = block_bound_check(&IndexedUniformSource::counter(seed), 4, &identity, 1_000_000)?;
        println!("seed {seed}: {outcome:?}");
    }
    Ok(())
}
