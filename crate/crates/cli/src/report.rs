use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use twophase::simulation::{read_summary_csv, MonteCarloSummary};
use twophase::MethodTag;

use crate::manifest::RunManifest;
use crate::svg::{render_panels, Series};
use crate::usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// summary.csv written by `simulate`.
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy)]
pub enum Metric {
    Bias,
    Rmse,
    Coverage,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Bias, Metric::Rmse, Metric::Coverage];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bias => "bias",
            Metric::Rmse => "rmse",
            Metric::Coverage => "coverage",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Bias => "percent bias",
            Metric::Rmse => "RMSE",
            Metric::Coverage => "95% CI coverage",
        }
    }

    pub fn of(self, s: &MonteCarloSummary) -> f64 {
        match self {
            Metric::Bias => s.pct_bias,
            Metric::Rmse => s.rmse,
            Metric::Coverage => s.coverage,
        }
    }

    /// Horizontal guide line: zero bias, nominal coverage.
    pub fn reference(self) -> Option<f64> {
        match self {
            Metric::Bias => Some(0.0),
            Metric::Rmse => None,
            Metric::Coverage => Some(0.95),
        }
    }
}

/// Methods and (n, rho) cells in order of first appearance.
pub struct Layout {
    pub methods: Vec<MethodTag>,
    pub cells: Vec<(usize, f64)>,
}

impl Layout {
    pub fn of(rows: &[MonteCarloSummary]) -> Self {
        let mut methods = Vec::new();
        let mut cells = Vec::new();
        for r in rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
            if !cells.contains(&(r.n, r.rho)) {
                cells.push((r.n, r.rho));
            }
        }
        Self { methods, cells }
    }

    pub fn value(&self, rows: &[MonteCarloSummary], m: MethodTag, cell: (usize, f64), metric: Metric) -> Option<f64> {
        rows.iter().find(|r| r.method == m && (r.n, r.rho) == cell).map(|r| metric.of(r))
    }
}

fn write_table(rows: &[MonteCarloSummary], layout: &Layout, metric: Metric, path: &PathBuf) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["method".to_string()];
    header.extend(layout.cells.iter().map(|(n, rho)| format!("n={n} rho={rho}")));
    w.write_record(&header)?;
    for &m in &layout.methods {
        let mut rec = vec![m.as_str().to_string()];
        rec.extend(layout.cells.iter().map(|&c| layout.value(rows, m, c, metric).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One panel per n, with rho on the x axis and one series per method.
fn write_svg(rows: &[MonteCarloSummary], layout: &Layout, metric: Metric, path: &PathBuf) -> anyhow::Result<()> {
    let mut ns: Vec<usize> = layout.cells.iter().map(|c| c.0).collect();
    ns.dedup();
    ns.sort_unstable();
    ns.dedup();
    let panels: Vec<(String, Vec<Series>)> = ns
        .iter()
        .map(|&n| {
            let series = layout
                .methods
                .iter()
                .map(|&m| {
                    let mut pts: Vec<(f64, f64)> = rows
                        .iter()
                        .filter(|r| r.method == m && r.n == n)
                        .map(|r| (r.rho, metric.of(r)))
                        .filter(|p| p.1.is_finite())
                        .collect();
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    Series { name: m.as_str().to_string(), points: pts }
                })
                .collect();
            (format!("n = {n}"), series)
        })
        .collect();
    let text = render_panels(&panels, "rho", metric.label(), metric.reference());
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(a: ReportArgs) -> anyhow::Result<()> {
    let started = chrono::Utc::now();
    let file = File::open(&a.summary).with_context(|| format!("opening {}", a.summary.display()))?;
    let rows = read_summary_csv(file).map_err(|e| usage(format!("{}: {e}", a.summary.display())))?;
    if rows.is_empty() {
        return Err(usage(format!("{}: summary has no rows", a.summary.display())));
    }
    let layout = Layout::of(&rows);
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let config = serde_json::json!({ "summary": a.summary, "format": format!("{:?}", a.format).to_lowercase() });
    let mut manifest = RunManifest::new("report", config, 0, started);
    for metric in Metric::ALL {
        let path = match a.format {
            Format::Csv => {
                let p = a.out.join(format!("{}.csv", metric.name()));
                write_table(&rows, &layout, metric, &p)?;
                p
            }
            Format::Svg => {
                let p = a.out.join(format!("{}.svg", metric.name()));
                write_svg(&rows, &layout, metric, &p)?;
                p
            }
        };
        manifest.artifacts.push(path);
    }
    manifest.write(&a.out.join("manifest.json"))
}
