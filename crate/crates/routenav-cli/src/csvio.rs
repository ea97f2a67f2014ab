//! CSV schemas and readers/writers.
//!
//! Numbers are written with Rust's default float formatting (decimal point,
//! no separators, locale-independent), so identical rows always serialize to
//! identical bytes.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub const METRICS_HEADER: &str = "run_id,trial,seed,condition,dim,episode,mean_reward,mean_steps,success_rate,policy_loss,value_loss,entropy,wall_clock_s";
pub const VPR_HEADER: &str = "run_id,seed,condition,dim,tolerance,frames,auc";
pub const DEPLOY_HEADER: &str =
    "run_id,seed,condition,dim,episodes,completed_pct,failed_pct,mean_steps";

/// One metrics row (the TrainingLog schema plus run identity).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub trial: usize,
    pub seed: u64,
    pub condition: String,
    pub dim: usize,
    pub episode: u64,
    pub mean_reward: f64,
    pub mean_steps: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub wall_clock_s: f64,
}

impl MetricsRow {
    fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.run_id,
            self.trial,
            self.seed,
            self.condition,
            self.dim,
            self.episode,
            self.mean_reward,
            self.mean_steps,
            self.success_rate,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.wall_clock_s
        )
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_line());
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    check_header(header, METRICS_HEADER)?;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            bail!(
                "schema error in {} line {}: expected 13 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            );
        }
        let parse_f =
            |s: &str| -> Result<f64> { s.parse().with_context(|| format!("bad float {s:?}")) };
        rows.push(MetricsRow {
            run_id: fields[0].to_string(),
            trial: fields[1].parse().with_context(|| format!("bad trial {:?}", fields[1]))?,
            seed: fields[2].parse().with_context(|| format!("bad seed {:?}", fields[2]))?,
            condition: fields[3].to_string(),
            dim: fields[4].parse().with_context(|| format!("bad dim {:?}", fields[4]))?,
            episode: fields[5].parse().with_context(|| format!("bad episode {:?}", fields[5]))?,
            mean_reward: parse_f(fields[6])?,
            mean_steps: parse_f(fields[7])?,
            success_rate: parse_f(fields[8])?,
            policy_loss: parse_f(fields[9])?,
            value_loss: parse_f(fields[10])?,
            entropy: parse_f(fields[11])?,
            wall_clock_s: parse_f(fields[12])?,
        });
    }
    Ok(rows)
}

fn check_header(found: &str, expect: &str) -> Result<()> {
    if found != expect {
        let found_cols: Vec<&str> = found.split(',').collect();
        let missing: Vec<&str> =
            expect.split(',').filter(|c| !found_cols.contains(c)).collect();
        bail!("schema error: missing columns {missing:?}");
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct VprRow {
    pub run_id: String,
    pub seed: u64,
    pub condition: String,
    pub dim: usize,
    pub tolerance: usize,
    pub frames: usize,
    pub auc: f64,
}

pub fn write_vpr(path: &Path, rows: &[VprRow]) -> Result<()> {
    let mut text = String::from(VPR_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.run_id, r.seed, r.condition, r.dim, r.tolerance, r.frames, r.auc
        ));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone)]
pub struct DeployRow {
    pub run_id: String,
    pub seed: u64,
    pub condition: String,
    pub dim: usize,
    pub episodes: usize,
    pub completed_pct: f64,
    pub failed_pct: f64,
    pub mean_steps: f64,
}

pub fn write_deploy(path: &Path, rows: &[DeployRow]) -> Result<()> {
    let mut text = String::from(DEPLOY_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.run_id,
            r.seed,
            r.condition,
            r.dim,
            r.episodes,
            r.completed_pct,
            r.failed_pct,
            r.mean_steps
        ));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
