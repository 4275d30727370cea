use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Every run parameter. JSON keys are the snake_case field names; each has a
/// kebab-case flag of the same name. Flags override values from `--config`.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `euclidean`, `lp:P`, `ellipse:R` or a JSON norm object.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
    /// Boundary samples.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_minus: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_plus: Option<f64>,
    /// Resolution of the entropy LP; absent means explicit formula when valid.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_resolution: Option<usize>,
    /// Base angles and widths per axis of the pair grid.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_width: Option<f64>,
    /// Rows of the gamma table.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Profile ODE tolerance.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Initial field for `minimize`: vortex, jump or constant.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    /// ε/h for the vortex study.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_ratio: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    /// Mollification widths for the Heaviside entropy check.
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map_err(|e| format!("malformed config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let s = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Values set in `other` replace ours.
    pub fn overlay(&mut self, other: &ExperimentConfig) {
        let s = self;
        overlay!(s, other; norm, resolution, theta_minus, theta_plus, lp_resolution, grid, min_width, samples,
            tol, field, cells, eps, eps_list, h_ratio, max_iter, rel_tol, delta_list, seed, out, jobs);
    }

    pub fn hashed(&self) -> ExperimentConfig {
        ExperimentConfig {
            out: None,
            jobs: None,
            ..self.clone()
        }
    }

    /// Hash of the settings that determine the numbers: everything except
    /// the output location and the thread count.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.hashed().to_json().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Fills in the defaults a command uses so the printed config is complete.
pub fn resolve(command: &str, mut c: ExperimentConfig) -> ExperimentConfig {
    c.norm.get_or_insert_with(|| "euclidean".into());
    c.seed.get_or_insert(0);
    match command {
        "gamma-table" => {
            c.samples.get_or_insert(256);
        }
        "cost" => {
            c.theta_minus.get_or_insert(0.0);
            c.theta_plus.get_or_insert(1.0);
        }
        "cost-scan" | "verify-bounds" => {
            // fine enough that the narrowest default width spans several samples
            c.resolution.get_or_insert(16384);
            c.grid.get_or_insert(64);
            c.min_width.get_or_insert(1e-3);
            c.lp_resolution.get_or_insert(512);
        }
        "profile" => {
            c.theta_minus.get_or_insert(0.0);
            c.theta_plus.get_or_insert(1.0);
            c.tol.get_or_insert(1e-9);
        }
        "minimize" => {
            c.field.get_or_insert_with(|| "jump".into());
            c.cells.get_or_insert(64);
            c.eps.get_or_insert(0.1);
            c.max_iter.get_or_insert(400);
            c.rel_tol.get_or_insert(1e-10);
            c.theta_minus.get_or_insert(-1.0);
            c.theta_plus.get_or_insert(1.0);
        }
        "vortex-study" => {
            c.eps_list.get_or_insert_with(|| vec![0.1, 0.05, 0.025]);
            c.h_ratio.get_or_insert(8.0);
        }
        "entropy-check" => {
            c.theta_minus.get_or_insert(0.0);
            c.theta_plus.get_or_insert(1.0);
            c.delta_list.get_or_insert_with(|| vec![0.2, 0.1, 0.05, 0.025]);
            c.lp_resolution.get_or_insert(512);
            c.samples.get_or_insert(100);
        }
        _ => {}
    }
    c.resolution.get_or_insert(1024);
    c
}
