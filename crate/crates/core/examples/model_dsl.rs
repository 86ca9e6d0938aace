//! Parsing, printing and validating model documents.

use vlmc_cftp::dsl::{parse_model, print_model, ParseError};
use vlmc_cftp::partition::build_partition;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = parse_model(include_str!("../models/binary_tree.vlmc"))?;
    let canonical = print_model(&model);
    print!("{canonical}");
    assert_eq!(parse_model(&canonical)?, model);

    let past = model.alphabet().parse_time_order("1121")?;
    let context = model.context_of(&past)?.expect("context fits in the past");
    println!("\ncontext of past 1121 is {}", model.alphabet().render_display(context.symbols));
    for (a, iv) in build_partition(&model, Some(context))?.intervals() {
        println!("  {} <- [{:.3}, {:.3})", model.alphabet().char_of(a), iv.lo, iv.hi);
    }

    let broken = "alphabet = 1 2\nepsilon = 0.2\nw = \"2\"\nell = identity\n\"2\" = [0.15, 0.85]\n";
    match parse_model(broken) {
        Err(ParseError::Semantic(v)) => v.iter().for_each(|v| println!("violation: {v}")),
        other => println!("unexpected: {other:?}"),
    }
    if let Err(e) = parse_model("alphabet = 1 2\nell = square\n") {
        println!("{e}");
    }
    Ok(())
}
