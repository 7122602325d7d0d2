//! `hmono`: command-line front end for the hmono toolkit.
//!
//! Exit codes: 0 when every check passes, 1 on a violation witness or a
//! failed computation, 2 on usage or configuration errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod report;

use clap::Parser;

fn main() {
    let cli = args::Cli::parse();
    let code = match commands::run(&cli.command) {
        Ok((report, output)) => match report.emit(output) {
            Ok(()) => i32::from(!report.ok),
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
