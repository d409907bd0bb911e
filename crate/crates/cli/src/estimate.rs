use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use twophase::estimators::{estimate_methods, EstimateOptions};
use twophase::io::read_csv_path;
use twophase::nuisance::NuisanceOptions;
use twophase::{DataError, KappaMode, LearnerMenu, LearnerSpec, MethodTag};

use crate::manifest::RunManifest;
use crate::usage;

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV with columns x1..xp, a_star, y_star, r, a, y, kappa.
    #[arg(long)]
    pub data: PathBuf,
    /// Estimator to run; repeat for several. Defaults to every method the
    /// data supports.
    #[arg(long = "method")]
    pub methods: Vec<MethodTag>,
    /// Defaults to `known` when every row has kappa, else `estimated`.
    #[arg(long)]
    pub kappa_mode: Option<KappaMode>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub ci_level: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub clip_eps: f64,
    #[arg(long)]
    pub continuous_learner: Option<LearnerSpec>,
    #[arg(long)]
    pub binary_learner: Option<LearnerSpec>,
    /// Output JSON file; a `<stem>.manifest.json` is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "estimate".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

/// Structural problems with the input file are usage errors; a dataset
/// that parses but cannot support estimation is a runtime error.
fn classify(e: DataError) -> anyhow::Error {
    match e {
        DataError::EmptyArm { .. } | DataError::NoValidatedRows | DataError::Io(_) => anyhow::Error::new(e),
        other => usage(other.to_string()),
    }
}

pub fn run(a: EstimateArgs) -> anyhow::Result<()> {
    let started = chrono::Utc::now();
    if !(a.ci_level > 0.0 && a.ci_level < 1.0) {
        return Err(usage("ci_level must lie in (0,1)"));
    }
    if !(a.clip_eps > 0.0 && a.clip_eps < 0.5) {
        return Err(usage("clip_eps must lie in (0,0.5)"));
    }
    if !(a.delta > 0.0) {
        return Err(usage("delta must be positive"));
    }
    if a.folds == 0 {
        return Err(usage("folds must be positive"));
    }
    let d = read_csv_path(&a.data).map_err(classify)?;
    twophase::validate_dataset(&d).map_err(classify)?;

    let kappa_mode = a.kappa_mode.unwrap_or(if d.has_kappa() { KappaMode::Known } else { KappaMode::Estimated });
    if kappa_mode != KappaMode::Estimated && !d.has_kappa() {
        return Err(usage(format!("kappa mode {kappa_mode} requires a kappa value on every row")));
    }
    let mut menu = LearnerMenu::default();
    if let Some(v) = &a.continuous_learner {
        menu.continuous = v.clone();
    }
    if let Some(v) = &a.binary_learner {
        menu.binary = v.clone();
    }
    menu.validate().map_err(|e| usage(e.to_string()))?;
    let methods: Vec<MethodTag> = if a.methods.is_empty() {
        MethodTag::ALL.into_iter().filter(|&m| m != MethodTag::OracleAipw || d.fully_validated()).collect()
    } else {
        a.methods.clone()
    };
    let opts = EstimateOptions {
        nuisance: NuisanceOptions { folds: a.folds, clip_eps: a.clip_eps, kappa_mode, menu, seed: a.seed },
        delta: a.delta,
        ci_level: a.ci_level,
    };

    let mut out = Vec::new();
    let mut failures = Vec::new();
    for (m, r) in estimate_methods(&d, None, &methods, &opts) {
        match r {
            Ok(rs) => out.extend(rs.iter().map(|e| e.to_json())),
            Err(e) => {
                out.push(serde_json::json!({ "method": m.as_str(), "error": e.to_string() }));
                failures.push((m, e));
            }
        }
    }
    std::fs::write(&a.out, serde_json::to_string_pretty(&out)? + "\n").with_context(|| format!("writing {}", a.out.display()))?;

    let config = serde_json::json!({
        "data": a.data,
        "methods": methods.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "kappa_mode": kappa_mode,
        "folds": a.folds,
        "ci_level": a.ci_level,
        "delta": a.delta,
        "clip_eps": a.clip_eps,
        "learner_menu": opts.nuisance.menu,
    });
    let mut manifest = RunManifest::new("estimate", config, a.seed, started);
    manifest.artifacts.push(a.out.clone());
    manifest.write(&manifest_path(&a.out))?;

    if let Some((m, e)) = failures.first() {
        anyhow::bail!("{} of {} methods failed; first: {m}: {e}", failures.len(), methods.len());
    }
    Ok(())
}
