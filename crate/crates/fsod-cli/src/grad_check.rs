//! `grad-check`: analytic vs finite-difference gradients of the attention
//! core. Exits non-zero when the tolerance is violated.

use anyhow::{bail, Result};
use clap::Args;

use fsod_core::xqsa::gradient_check;

use crate::{write_json, Ctx};

#[derive(Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 25)]
    trials: usize,

    /// Maximum admissible relative error.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,

    /// Central finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
}

pub fn run(ctx: &Ctx, args: GradCheckArgs) -> Result<()> {
    let report = gradient_check(args.trials, ctx.seed, args.epsilon)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    write_json(ctx, "grad_check.json", &report)?;
    println!(
        "max relative error {:.3e} over {} trials (tolerance {:.1e})",
        report.max_relative_error, report.trials, args.tolerance
    );
    if report.max_relative_error > args.tolerance {
        bail!(
            "gradient check failed: {:.3e} > {:.1e}",
            report.max_relative_error,
            args.tolerance
        );
    }
    println!("gradient check passed");
    Ok(())
}
