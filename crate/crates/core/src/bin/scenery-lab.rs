use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use scenery_lab::cli::{load_config, run_to_dir, Experiment};
use scenery_lab::ifs::{preset, preset_names};
use scenery_lab::output;

/// Run a scenery-lab experiment from a JSON config, or list the presets.
#[derive(Parser, Debug)]
#[command(name = "scenery-lab", version)]
struct Args {
    /// check, dim, subsystem, scenery, distances, project, gibbs-verify, or presets
    experiment: String,
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output`, then out/<experiment>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raise a cap, e.g. `points=5000000`; keys are words, points, pairs.
    #[arg(long = "cap-override", value_name = "K=V")]
    cap_override: Vec<String>,
}

fn presets() -> ExitCode {
    print!("{}", output::row(["preset", "oracle_dimension", "description"]));
    for name in preset_names() {
        // the parametrized family is listed at c = 0
        let key = if name.contains("(c)") { "julia_quad(0)" } else { name };
        match preset(key) {
            Ok(p) => {
                let oracle = p.oracle_dimension.map_or("unknown".to_string(), output::num);
                print!("{}", output::row([key.to_string(), oracle, output::quote(p.description)]));
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        }
    }
    ExitCode::SUCCESS
}

fn fail(msg: impl std::fmt::Display, code: i32) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.experiment == "presets" {
        return presets();
    }
    let Some(experiment) = Experiment::from_name(&args.experiment) else {
        return fail(format!("unknown experiment '{}'", args.experiment), 1);
    };
    let Some(path) = &args.config else {
        return fail("--config is required", 1);
    };
    let mut cfg = match load_config(path) {
        Ok(c) => c,
        Err(e) => return fail(e, 1),
    };
    if cfg.experiment != experiment {
        return fail(format!("config describes experiment '{}', not '{experiment}'", cfg.experiment), 1);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    for spec in &args.cap_override {
        if let Err(e) = cfg.override_cap(spec) {
            return fail(e, 1);
        }
    }
    match run_to_dir(&cfg, args.out.as_deref()) {
        Ok((dir, artifacts)) => {
            println!("{} files written to {} (config hash {})", artifacts.files.len(), dir.display(), cfg.hash());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, e.exit_code()),
    }
}
