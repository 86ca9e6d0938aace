//! Compares sampler output with independent reference laws: the renewal
//! marginal 1/E[T], the enumerated window law and the exact finite-memory law.

use vlmc_cftp::cftp::DEFAULT_MAX_BACK;
use vlmc_cftp::dsl::parse_model;
use vlmc_cftp::oracle::{
    brute_force_window_law, empirical_window_law, finite_memory_window_law, renewal_stationary_marginal,
    total_variation, RenewalSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alternating = parse_model(include_str!("../models/alternating.vlmc"))?;
    let spec = RenewalSpec::from_model(&alternating)?;
    let marginal = renewal_stationary_marginal(&spec, 10_000)?;
    let counts = empirical_window_law(&alternating, 1, 50_000, 0, DEFAULT_MAX_BACK)?;
    let twos = counts.get(&alternating.alphabet().parse_time_order("2")?).copied().unwrap_or(0);
    println!("alternating renewal: P(X_0 = 2) = {:.5}, sampled {:.5}", marginal.value, twos as f64 / 50_000.0);

    let binary_tree = parse_model(include_str!("../models/binary_tree.vlmc"))?;
    let law = brute_force_window_law(&binary_tree, 2, 20, 1e-7)?;
    let exact = finite_memory_window_law(&binary_tree, 7, 2)?;
    let counts = empirical_window_law(&binary_tree, 2, 100_000, 0, DEFAULT_MAX_BACK)?;
    println!("binary_tree pair law (grid resolution {}):", law.resolution);
    for (word, &c) in &counts {
        println!(
            "  {}  sampled {:.4}  enumerated {:.4}  finite-memory {:.4}",
            binary_tree.alphabet().render(word),
            c as f64 / 100_000.0,
            law.probability(word),
            exact[word]
        );
    }
    let tv = total_variation(&counts, &law);
    println!("TV {:.4}, stderr {:.4}, unresolved {:.4}", tv.distance, tv.stderr, tv.unresolved);
    Ok(())
}
