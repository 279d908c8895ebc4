//! Configuration-driven experiment runner for `hypokit`.
//!
//! `hypokit run <config.toml>` executes one experiment and writes `results.csv`,
//! `summary.json` and `manifest.json` into the configured output directory.
//! Exit codes: 0 all tolerances pass, 1 a tolerance fails (or the computation
//! fails), 2 configuration error, 3 memory guard.

pub mod catalog;
pub mod compare;
pub mod config;
pub mod experiments;
pub mod output;

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use catalog::Experiment;
pub use config::{ConfigError, ExperimentConfig, ResolvedConfig};
pub use experiments::{execute, Check, Outcome, RunError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MEMORY: i32 = 3;

/// Run the config at `path`, write the artifacts and return the exit code.
/// Diagnostics go to `log`.
pub fn run_path(path: &Path, log: &mut dyn std::io::Write) -> i32 {
    let cfg = match ExperimentConfig::load(path).and_then(|c| c.resolve()) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(log, "config error: {e}");
            return EXIT_CONFIG;
        }
    };
    run_resolved(&cfg, &path.display().to_string(), log)
}

/// Run a resolved config, write the artifacts and return the exit code.
pub fn run_resolved(cfg: &ResolvedConfig, config_path: &str, log: &mut dyn std::io::Write) -> i32 {
    let dir = &cfg.output_dir;
    if let Err(e) = std::fs::create_dir_all(dir) {
        let _ = writeln!(log, "config error: cannot create output_dir {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let result = execute(cfg);
    let wall = clock.elapsed().as_secs_f64();
    let (code, status, error) = match &result {
        Ok(o) if o.passed() => (EXIT_OK, "pass".to_string(), None),
        Ok(o) => {
            for c in o.checks.iter().filter(|c| !c.pass) {
                let _ = writeln!(log, "tolerance {} failed: {} = {:e} (bound {:e})", c.tolerance, c.metric, c.value, c.bound);
            }
            (EXIT_TOLERANCE, "fail".to_string(), None)
        }
        Err(e) => {
            let _ = writeln!(log, "{e}");
            (e.exit_code(), "error".to_string(), Some(e.to_string()))
        }
    };
    let mut code = code;
    if let Ok(o) = &result {
        let written = std::fs::File::create(dir.join(output::RESULTS))
            .map_err(csv::Error::from)
            .and_then(|f| output::write_results(&o.rows, std::io::BufWriter::new(f)))
            .map_err(|e| e.to_string())
            .and_then(|_| {
                output::write_json(&dir.join(output::SUMMARY), &output::summary_json(cfg, o)).map_err(|e| e.to_string())
            });
        if let Err(e) = written {
            let _ = writeln!(log, "cannot write results: {e}");
            code = EXIT_CONFIG;
        }
    }
    let manifest = output::Manifest {
        tool: "hypokit",
        version: env!("CARGO_PKG_VERSION"),
        core_version: hypokit_core::VERSION,
        config_path: config_path.to_string(),
        config: cfg,
        rng: "ChaCha8 (rand_chacha), field i on stream i",
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        started_unix_seconds: started,
        wall_clock_seconds: wall,
        exit_code: code,
        status,
        error,
    };
    if let Err(e) = output::write_json(&dir.join(output::MANIFEST), &manifest) {
        let _ = writeln!(log, "cannot write manifest: {e}");
        return EXIT_CONFIG;
    }
    let _ = writeln!(log, "{}: exit {code}, {:.2}s, artifacts in {}", cfg.experiment, wall, dir.display());
    code
}
