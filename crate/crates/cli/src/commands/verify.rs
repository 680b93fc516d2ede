//! `verify`: run the invariant suite and print a table.

use std::io::Write;

use spinsim::spincore::PhysicalConstants;
use spinsim::verify::{run_suite, Check, SuiteOptions};

use crate::config::CliError;
use crate::VerifyArgs;

pub fn print_table(checks: &[Check], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{:<26} {:>12} {:>10} {:>8}  status", "property", "worst", "tolerance", "samples")?;
    for ch in checks {
        let status = match (ch.informational, ch.passed()) {
            (true, _) => "info",
            (false, true) => "pass",
            (false, false) => "FAIL",
        };
        let tol = if ch.tolerance.is_finite() { format!("{:.0e}", ch.tolerance) } else { "-".into() };
        writeln!(out, "{:<26} {:>12.3e} {:>10} {:>8}  {status}", ch.name, ch.worst, tol, ch.samples)?;
    }
    Ok(())
}

pub fn execute(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let opts = SuiteOptions { seed: args.seed, inject_fault: args.inject_fault.clone() };
    let checks = run_suite(&opts, &PhysicalConstants::default()).map_err(|e| CliError::Config(e.to_string()))?;
    print_table(&checks, out)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}
