//! Mean |θ[0]| as the reference probability ε grows, with an SVG chart.

use vlmc_cftp::cftp::DEFAULT_MAX_BACK;
use vlmc_cftp::dsl::parse_model;
use vlmc_cftp::experiment::{run_epsilon_sweep, svg_line_chart};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let template = parse_model(include_str!("../models/identity.vlmc"))?;
    let grid: Vec<f64> = (2..=10).map(|k| k as f64 / 10.0).collect();
    let rows = run_epsilon_sweep(&template, &grid, 10_000, 0, DEFAULT_MAX_BACK)?;
    println!("{:>5} {:>12} {:>9} {:>10}", "eps", "mean |theta|", "stderr", "mean N");
    for r in &rows {
        println!("{:>5} {:>12.4} {:>9.4} {:>10.4}", r.epsilon, r.mean_abs_theta, r.stderr, r.mean_steps);
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.mean_abs_theta)).collect();
    let path = std::env::temp_dir().join("eps_sweep.svg");
    std::fs::write(&path, svg_line_chart(&points, "epsilon", "mean |theta[0]|"))?;
    println!("chart written to {}", path.display());
    Ok(())
}
