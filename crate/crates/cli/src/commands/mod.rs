//! Subcommand surface. Exit codes: 0 success, 1 usage error, 2 data
//! error. Every random choice is driven by an explicit `--seed` flag or
//! config field, never the clock.

mod analyze;
mod data;
mod model;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "dualview",
    about = "Dual-view mammogram synthesis with a difference-guided diffusion model",
    version
)]
pub struct Cli {
    /// Worker threads for parallel sections (results are identical for
    /// any thread count).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Generate a procedural dual-view phantom dataset.
    Phantom(data::PhantomArgs),
    /// Normalize, orient, histogram-match and resize a paired dataset.
    Preprocess(data::PreprocessArgs),
    /// Pack view pairs into three-channel triple containers.
    Encode(data::EncodeArgs),
    /// Train the denoiser on encoded triples.
    Train(model::TrainArgs),
    /// Draw triples from a trained checkpoint.
    Sample(model::SampleArgs),
    /// Percentile-clip triple containers.
    Postprocess(analyze::PostprocessArgs),
    /// Otsu masks for every view.
    Segment(analyze::SegmentArgs),
    /// Per-pair IoU/DSC metrics as CSV.
    Evaluate(analyze::EvaluateArgs),
    /// Descriptive statistics, KS/EMD tests and violin data.
    Stats(analyze::StatsArgs),
    /// Dump a noise schedule as CSV for audit.
    ScheduleDump(model::ScheduleDumpArgs),
}

pub fn run(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Phantom(args) => data::phantom(args),
        Cmd::Preprocess(args) => data::preprocess(args),
        Cmd::Encode(args) => data::encode(args),
        Cmd::Train(args) => model::train(args),
        Cmd::Sample(args) => model::sample(args),
        Cmd::Postprocess(args) => analyze::postprocess(args),
        Cmd::Segment(args) => analyze::segment(args),
        Cmd::Evaluate(args) => analyze::evaluate(args),
        Cmd::Stats(args) => analyze::stats(args),
        Cmd::ScheduleDump(args) => model::schedule_dump(args),
    }
}

/// Parse, set up the thread pool, dispatch, map errors to exit codes.
pub fn main_entry<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                0
            } else {
                1
            };
        }
    };
    if let Some(n) = cli.threads {
        // a second initialization in-process is harmless; results do not
        // depend on the pool size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
