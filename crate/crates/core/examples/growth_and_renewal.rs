//! The growth condition on ℓ, the summability diagnostic, and the renewal
//! equation u_k = Σ f_i u_{k-i} for the zeros of the dominating process.

use vlmc_cftp::analysis::{summability_diagnostic, u_f_statistics};
use vlmc_cftp::dsl::parse_model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for ell in ["zero", "identity", "power 2 1.5", "exp 0.1", "exp 0.5", "table [0, 1, 3] tail linear"] {
        let doc = format!("alphabet = 2 1\nregular = 2\nepsilon = 0.3\nw = \"2\"\nell = {ell}\ndefault = [0.3, 0.7]\n");
        let model = parse_model(&doc)?;
        let g = model.check_growth_condition(200);
        println!("ell = {ell:<28} C_eps = {:.4}  limsup = {:?}  verdict {:?}", g.c_epsilon, g.limsup, g.verdict);
    }

    let model = parse_model(include_str!("../models/identity.vlmc"))?;
    let s = summability_diagnostic(&model, 200);
    println!("\nsummability partial sum {:.4}, tail ratio {:?}", s.partial_sum, s.tail_ratio);

    let stats = u_f_statistics(&model, 20_000, 20, 0)?;
    println!("{:>3} {:>8} {:>8} {:>10}", "k", "u_k", "f_k", "residual");
    for k in 1..=10 {
        println!("{k:>3} {:>8.4} {:>8.4} {:>10.5}", stats.u[k], stats.f[k], stats.residual[k]);
    }
    println!("max standardized residual {:.2}", stats.max_standardized_residual());
    Ok(())
}
