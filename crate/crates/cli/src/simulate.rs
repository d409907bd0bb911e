use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use twophase::simulation::{run_grid, write_replications_jsonl, write_summary_csv};
use twophase::{KappaMode, LearnerSpec, ScenarioConfig};

use crate::manifest::RunManifest;
use crate::usage;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Phase-one sample size; repeat for a grid.
    #[arg(long = "n")]
    pub n: Vec<usize>,
    /// Expected validation fraction E[R]; repeat for a grid.
    #[arg(long = "rho", allow_negative_numbers = true)]
    pub rho: Vec<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// known, known_refit or estimated.
    #[arg(long)]
    pub kappa_mode: Option<KappaMode>,
    /// Ensemble regulariser.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Cross-fitting folds; 1 fits and predicts on the full sample.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub clip_eps: Option<f64>,
    #[arg(long)]
    pub ci_level: Option<f64>,
    /// Learner for continuous nuisances, e.g. `lin` or `sl:lin,lin_int`.
    #[arg(long)]
    pub continuous_learner: Option<LearnerSpec>,
    /// Learner for binary nuisances, e.g. `logit` or `sl:logit,logit_int`.
    #[arg(long)]
    pub binary_learner: Option<LearnerSpec>,
    /// JSON scenario file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write per-replication estimates as JSON lines.
    #[arg(long)]
    pub raw: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Defaults, then the config file, then flags. Returns one scenario per
/// (n, rho) cell.
fn resolve(a: &SimulateArgs) -> anyhow::Result<Vec<ScenarioConfig>> {
    let mut base = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<ScenarioConfig>(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(v) = a.reps {
        base.reps = v;
    }
    if let Some(v) = a.seed {
        base.master_seed = v;
    }
    if let Some(v) = a.kappa_mode {
        base.kappa_mode = v;
    }
    if let Some(v) = a.delta {
        base.delta = v;
    }
    if let Some(v) = a.folds {
        base.folds = v;
    }
    if let Some(v) = a.clip_eps {
        base.clip_eps = v;
    }
    if let Some(v) = a.ci_level {
        base.ci_level = v;
    }
    if let Some(v) = &a.continuous_learner {
        base.learner_menu.continuous = v.clone();
    }
    if let Some(v) = &a.binary_learner {
        base.learner_menu.binary = v.clone();
    }
    let ns = if a.n.is_empty() { vec![base.n] } else { a.n.clone() };
    let rhos = if a.rho.is_empty() { vec![base.rho] } else { a.rho.clone() };
    let mut cells = Vec::new();
    for &n in &ns {
        for &rho in &rhos {
            let c = ScenarioConfig { n, rho, ..base.clone() };
            c.validate().map_err(usage)?;
            cells.push(c);
        }
    }
    Ok(cells)
}

pub fn run(a: SimulateArgs) -> anyhow::Result<()> {
    let started = chrono::Utc::now();
    let cells = resolve(&a)?;
    if a.jobs == Some(0) {
        return Err(usage("jobs must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs.unwrap_or(0)).build()?;
    let (summary, raw) = pool.install(|| run_grid(&cells));

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut manifest = RunManifest::new("simulate", serde_json::to_value(&cells)?, cells[0].master_seed, started);
    let summary_path = a.out.join("summary.csv");
    write_summary_csv(&summary, BufWriter::new(File::create(&summary_path)?))?;
    manifest.artifacts.push(summary_path);
    if a.raw {
        let raw_path = a.out.join("replications.jsonl");
        write_replications_jsonl(&raw, BufWriter::new(File::create(&raw_path)?))?;
        manifest.artifacts.push(raw_path);
    }
    for s in &summary {
        if s.reps_completed < cells[0].reps {
            log::warn!("{} at n={} rho={}: {} of {} replications succeeded", s.method, s.n, s.rho, s.reps_completed, cells[0].reps);
        }
    }
    manifest.write(&a.out.join("manifest.json"))
}
