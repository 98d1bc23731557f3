//! Command-line driver: fit, score, bench, toy and grid.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;

use clap::Parser;

use args::{Cli, Command};
use config::Settings;
use error::CliResult;

fn dispatch(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Fit(a) => {
            let mut flags = vec![
                ("data", a.data),
                ("label-col", a.label_col),
                ("split", a.split),
                ("k", a.k),
                ("seed", a.seed),
                ("out", a.out),
            ];
            flags.extend(a.train.pairs());
            commands::fit(&Settings::resolve(&commands::FIT_KEYS, a.config.as_deref(), &flags)?)
        }
        Command::Score(a) => {
            let flags = [("model", a.model), ("data", a.data), ("label-col", a.label_col), ("out", a.out)];
            commands::score(&Settings::resolve(&commands::SCORE_KEYS, a.config.as_deref(), &flags)?)
        }
        Command::Bench(a) => {
            let mut flags = vec![
                ("data", a.data),
                ("label-col", a.label_col),
                ("name", a.name),
                ("detector", a.detector),
                ("k", a.k),
                ("seeds", a.seeds),
                ("eps", a.eps),
                ("min-pts", a.min_pts),
                ("out", a.out),
                ("resume", a.resume.then(|| "true".to_string())),
            ];
            flags.extend(a.train.pairs());
            commands::bench(&Settings::resolve(&commands::BENCH_KEYS, a.config.as_deref(), &flags)?)
        }
        Command::Toy(a) => {
            let flags = [
                ("seed", a.seed),
                ("sigma", a.sigma),
                ("per-cluster", a.per_cluster),
                ("n-uniform", a.n_uniform),
                ("out", a.out),
            ];
            commands::toy(&Settings::resolve(&commands::TOY_KEYS, a.config.as_deref(), &flags)?)
        }
        Command::Grid(a) => {
            let flags = [
                ("model", a.model),
                ("detector", a.detector),
                ("data", a.data),
                ("label-col", a.label_col),
                ("k", a.k),
                ("eps", a.eps),
                ("min-pts", a.min_pts),
                ("resolution", a.resolution),
                ("x-min", a.x_min),
                ("x-max", a.x_max),
                ("y-min", a.y_min),
                ("y-max", a.y_max),
                ("out", a.out),
            ];
            commands::grid(&Settings::resolve(&commands::GRID_KEYS, a.config.as_deref(), &flags)?)
        }
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
