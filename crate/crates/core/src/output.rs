//! Result files. Every file carries a provenance object holding the resolved
//! run configuration, the study plan and the master seed. CSV files carry it
//! on a leading `# provenance: <json>` line. Wall-clock timings go to
//! `metadata.json` only, so the other files are byte-identical across reruns.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::study::{DiagnosticsReport, FluctuationSummary, RateFit, StudyPlan, StudyRecord};
use crate::Result;

pub const SWEEP_FILE: &str = "sweep.csv";
pub const FIT_FILE: &str = "fit.json";
pub const FLUCT_FILE: &str = "fluct.csv";
pub const DIAG_FILE: &str = "diag.json";
pub const METADATA_FILE: &str = "metadata.json";

pub const SWEEP_HEADER: &str =
    "t,k,n,a_hat,ahom_direction,systematic_error,ci_halfwidth,ahom_ci_halfwidth,rng_draws,seed";
pub const FLUCT_HEADER: &str = "t,n,m,bin,bin_lo,bin_hi,count,pooled_mean,mean,variance,skewness,excess_kurtosis,clt_scale,below,above,seed";

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub plan: StudyPlan,
}

impl Provenance {
    pub fn new(plan: &StudyPlan, config: serde_json::Value) -> Self {
        Self { master_seed: plan.master_seed, config, plan: plan.clone() }
    }

    fn comment_line(&self) -> Result<String> {
        Ok(format!("# provenance: {}\n", serde_json::to_string(self)?))
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sweep_csv(prov: &Provenance, records: &[StudyRecord]) -> Result<String> {
    let mut s = prov.comment_line()?;
    s.push_str(SWEEP_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            r.k,
            r.n,
            r.a_hat,
            r.ahom_direction,
            opt(r.systematic_error),
            r.ci_halfwidth,
            r.ahom_ci_halfwidth,
            r.rng_draws,
            prov.master_seed
        ));
    }
    Ok(s)
}

pub fn fluct_csv(prov: &Provenance, summaries: &[FluctuationSummary]) -> Result<String> {
    let mut s = prov.comment_line()?;
    s.push_str(FLUCT_HEADER);
    s.push('\n');
    for f in summaries {
        let h = &f.histogram;
        for (i, c) in h.counts.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                f.t,
                f.n,
                f.repetitions,
                i,
                h.edges[i],
                h.edges[i + 1],
                c,
                f.pooled_mean,
                f.moments.mean,
                f.moments.variance,
                f.moments.skewness,
                f.moments.excess_kurtosis,
                f.clt_scale,
                h.below,
                h.above,
                prov.master_seed
            ));
        }
    }
    Ok(s)
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub fn to_json<T: Serialize>(prov: &Provenance, body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Wrapped { provenance: prov, body })?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct FitBody<'a> {
    fit: &'a RateFit,
    horizons: Vec<u64>,
}

pub fn fit_json(prov: &Provenance, fit: &RateFit, records: &[StudyRecord]) -> Result<String> {
    to_json(prov, &FitBody { fit, horizons: records.iter().map(|r| r.t).collect() })
}

pub fn diag_json(prov: &Provenance, report: &DiagnosticsReport) -> Result<String> {
    to_json(prov, report)
}

/// Timing facts excluded from the reproducible outputs.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunMetadata {
    pub started_unix_seconds: u64,
    pub total_wall_seconds: f64,
    /// `(t, seconds)` per horizon when available.
    pub wall_seconds: Vec<(u64, f64)>,
    pub workers: usize,
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = fs::File::create(&path)?;
    f.write_all(contents.as_bytes())?;
    Ok(path)
}
