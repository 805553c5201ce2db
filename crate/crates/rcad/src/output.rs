//! Run manifests, CSV/JSON writers and human-readable number formatting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rcad_core::optimizer::{Evaluation, SweepRow};
use serde::Serialize;

/// Formats with six significant digits for terminal output.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        format!("{:.*}", (5 - e).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

/// Everything needed to rerun a command, plus its outputs and timing.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Collects outputs of one command and writes its manifest last.
pub struct RunRecorder {
    dir: Option<PathBuf>,
    command: String,
    parameters: serde_json::Value,
    seed: Option<u64>,
    outputs: Vec<String>,
    started: Instant,
}

impl RunRecorder {
    pub fn new(
        dir: Option<&Path>,
        command: &str,
        parameters: serde_json::Value,
        seed: Option<u64>,
    ) -> std::io::Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(RunRecorder {
            dir: dir.map(Path::to_path_buf),
            command: command.to_string(),
            parameters,
            seed,
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Writes `{"manifest": ..., "result": value}` as pretty JSON.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let doc = serde_json::json!({ "manifest": self.manifest_name(), "result": value });
        fs::write(dir.join(name), to_json(&doc)?)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes a CSV whose first line is a `# manifest:` comment and returns its
    /// text (also when there is no output directory).
    pub fn write_csv<T: Serialize>(&mut self, name: &str, records: &[T]) -> anyhow::Result<String> {
        let text = csv_string(&self.manifest_name(), records)?;
        if let Some(dir) = &self.dir {
            fs::write(dir.join(name), &text)?;
            self.outputs.push(name.to_string());
        }
        Ok(text)
    }

    pub fn finish(self) -> anyhow::Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command.clone(),
            parameters: self.parameters.clone(),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs.clone(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        if let Some(dir) = &self.dir {
            fs::write(dir.join(self.manifest_name()), to_json(&manifest)?)?;
        }
        Ok(manifest)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn csv_string<T: Serialize>(manifest: &str, records: &[T]) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    writeln!(buf, "# manifest: {manifest}")?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in records {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(buf)?)
}

/// Column order of landscape and optimizer grid CSVs.
pub const GRID_COLUMNS: [&str; 8] = ["alpha", "gamma", "sigma_x2", "n", "p_ta", "p_fa", "ser", "skr"];

/// Column order of sweep CSVs.
pub const SWEEP_COLUMNS: [&str; 12] = [
    "distance_km",
    "transmission",
    "skr",
    "plob",
    "max_dw",
    "alpha",
    "gamma",
    "sigma_x2",
    "n",
    "p_ta",
    "p_fa",
    "ser",
];

/// The header line of a CSV produced by [`csv_string`].
pub fn csv_header(text: &str) -> Vec<&str> {
    text.lines()
        .find(|l| !l.starts_with('#'))
        .map(|l| l.split(',').collect())
        .unwrap_or_default()
}

/// One landscape cell or grid point.
#[derive(Debug, Clone, Serialize)]
pub struct GridRecord {
    pub alpha: f64,
    pub gamma: f64,
    pub sigma_x2: f64,
    pub n: usize,
    pub p_ta: f64,
    pub p_fa: f64,
    pub ser: f64,
    pub skr: f64,
}

impl From<&Evaluation> for GridRecord {
    fn from(e: &Evaluation) -> Self {
        GridRecord {
            alpha: e.candidate.alpha,
            gamma: e.candidate.gamma,
            sigma_x2: e.candidate.sigma_x2,
            n: e.prediction.n,
            p_ta: e.prediction.p_ta_av,
            p_fa: e.prediction.p_fa_av,
            ser: e.prediction.ser_av,
            skr: e.prediction.skr,
        }
    }
}

/// One distance of a sweep with its optimum and reference bounds.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub distance_km: f64,
    pub transmission: f64,
    pub skr: f64,
    pub plob: f64,
    pub max_dw: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub sigma_x2: f64,
    pub n: usize,
    pub p_ta: f64,
    pub p_fa: f64,
    pub ser: f64,
}

impl From<&SweepRow> for SweepRecord {
    fn from(r: &SweepRow) -> Self {
        let g = GridRecord::from(&r.optimum.best);
        SweepRecord {
            distance_km: r.distance_km,
            transmission: r.transmission,
            skr: g.skr,
            plob: r.plob,
            max_dw: r.max_dw,
            alpha: g.alpha,
            gamma: g.gamma,
            sigma_x2: g.sigma_x2,
            n: g.n,
            p_ta: g.p_ta,
            p_fa: g.p_fa,
            ser: g.ser,
        }
    }
}
