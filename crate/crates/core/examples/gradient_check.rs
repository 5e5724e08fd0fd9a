//! Finite-difference check of every analytic gradient, plus the same run
//! with one gradient's sign flipped to show the check catches it.

use gcl::cli::grad_suite::{format_table, run_suite, Component, SuiteOptions};

fn main() -> gcl::Result<()> {
    let results = run_suite(&SuiteOptions::default())?;
    print!("{}", format_table(&results, 1e-5));

    println!("\nwith the cosine head gradient negated:");
    let broken = run_suite(&SuiteOptions {
        sign_flip: Some(Component::CosineHead),
        ..SuiteOptions::default()
    })?;
    print!("{}", format_table(&broken, 1e-5));
    Ok(())
}
