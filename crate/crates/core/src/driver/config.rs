use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoxSpec, BridgeSpec, CantileverSpec, CaseSpec};
use crate::newmark::DampingSpec;
use crate::osdca::OsdcaConfig;
use crate::simp::OptConfig;

/// Dynamic solver used in the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    FullNewmark,
    Osdca,
}

/// How the static load cases are produced from the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EslMode {
    /// One load `K·d_i` per time interval.
    Exact,
    /// One load `K·φ_j` per retained POD mode.
    Pod,
    /// No transient analysis: the load program frozen at its peak.
    PeakStatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewmarkSection {
    pub alpha: f64,
    pub beta: f64,
    pub damping: DampingSpec,
}

impl Default for NewmarkSection {
    fn default() -> Self {
        NewmarkSection {
            alpha: 0.25,
            beta: 0.5,
            damping: DampingSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodSection {
    /// Energy ratio for the retained mode count.
    pub eps: f64,
    /// Measure energy with squared singular values.
    pub squared_energy: bool,
    /// Scale each load `K·φ_j` by `S_j / S_1`.
    pub weighted: bool,
}

impl Default for PodSection {
    fn default() -> Self {
        PodSection {
            eps: 0.9,
            squared_energy: false,
            weighted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub solver: SolverMode,
    pub esl: EslMode,
    /// Outer convergence tolerance on the largest density change.
    pub tol_dy: f64,
    pub max_iter: usize,
    /// Only accept convergence once the penalization schedule has reached
    /// its last stage.
    pub require_final_stage: bool,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Record wall-clock times; when false every time is written as zero.
    pub timings: bool,
    /// Write a density snapshot every this many outer iterations (0: final
    /// only).
    pub log_every: usize,
    /// Compute the first natural frequency at every outer iteration.
    pub track_frequency: bool,
    /// Evaluate dynamic compliance and frequency of the initial and final
    /// designs after the loop.
    pub evaluate: bool,
    /// Plain-text density grid to start from instead of the uniform field.
    pub initial_density: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            solver: SolverMode::Osdca,
            esl: EslMode::Pod,
            tol_dy: 0.01,
            max_iter: 60,
            require_final_stage: true,
            seed: 0,
            output_dir: None,
            timings: true,
            log_every: 0,
            track_frequency: false,
            evaluate: true,
            initial_density: None,
        }
    }
}

/// Everything a run needs, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: CaseSpec,
    #[serde(default)]
    pub newmark: NewmarkSection,
    #[serde(default)]
    pub osdca: OsdcaConfig,
    #[serde(default)]
    pub pod: PodSection,
    #[serde(default)]
    pub opt: OptConfig,
    #[serde(default)]
    pub run: RunSection,
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 3] = ["cantilever_hole", "bridge", "box3d"];

/// Default configuration of a named case.
pub fn preset(name: &str) -> Result<RunConfig> {
    let (case, eps, s) = match name {
        "cantilever_hole" | "cantilever" => (CaseSpec::CantileverHole(CantileverSpec::default()), 0.9, 3),
        "bridge" => (CaseSpec::Bridge(BridgeSpec::default()), 0.9, 6),
        "box3d" | "box" => (CaseSpec::Box3d(BoxSpec::default()), 0.95, 3),
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(RunConfig {
        case,
        newmark: NewmarkSection::default(),
        osdca: OsdcaConfig {
            s,
            ..OsdcaConfig::default()
        },
        pod: PodSection {
            eps,
            ..PodSection::default()
        },
        opt: OptConfig::default(),
        run: RunSection::default(),
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            what: "run config".into(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { msg, .. } => Error::Parse {
                what: path.display().to_string(),
                msg,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.run.tol_dy > 0.0) {
            return Err(Error::Config(format!("run.tol_dy = {} must be > 0", self.run.tol_dy)));
        }
        if self.run.max_iter == 0 {
            return Err(Error::Config("run.max_iter must be >= 1".into()));
        }
        if !(self.pod.eps > 0.0 && self.pod.eps <= 1.0) {
            return Err(Error::Config(format!("pod.eps = {} outside (0, 1]", self.pod.eps)));
        }
        if !(self.newmark.alpha > 0.0 && self.newmark.beta >= 0.0) {
            return Err(Error::Config("newmark: need alpha > 0 and beta >= 0".into()));
        }
        self.osdca.validate()?;
        self.opt.validate()
    }

    /// Applies `key=value` overrides, where `key` is a dotted path such as
    /// `osdca.tol_f` or `case.nelx`. Values are parsed as TOML.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml()?).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
            let value = parse_value(raw.trim());
            set_path(&mut doc, key.trim(), value)?;
        }
        let text = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_toml(&text)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct V {
        v: toml::Value,
    }
    toml::from_str::<V>(&format!("v = {raw}"))
        .map(|w| w.v)
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}

fn set_path(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, head) = parts
        .split_last()
        .filter(|(l, _)| !l.is_empty())
        .ok_or_else(|| Error::Config(format!("empty override key '{key}'")))?;
    let mut table = doc;
    for p in head {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key '{key}': '{p}' is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg, "{name}");
        }
        assert!(preset("hook").is_err());
    }

    #[test]
    fn preset_values() {
        let c = preset("cantilever_hole").unwrap();
        assert_eq!((c.osdca.s, c.pod.eps, c.osdca.tol_rb), (3, 0.9, 0.01));
        assert_eq!(preset("bridge").unwrap().osdca.s, 6);
        assert_eq!(preset("box3d").unwrap().pod.eps, 0.95);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = preset("cantilever_hole")
            .unwrap()
            .with_overrides(&[
                "case.nelx=20",
                "case.nely = 10",
                "run.solver=full_newmark",
                "osdca.tol_f=0.2",
            ])
            .unwrap();
        let CaseSpec::CantileverHole(s) = &cfg.case else {
            panic!()
        };
        assert_eq!((s.nelx, s.nely), (20, 10));
        assert_eq!(cfg.run.solver, SolverMode::FullNewmark);
        assert_eq!(cfg.osdca.tol_f, 0.2);
        assert!(preset("bridge").unwrap().with_overrides(&["run.nonsense=1"]).is_err());
        assert!(preset("bridge").unwrap().with_overrides(&["run.tol_dy=0"]).is_err());
        assert!(preset("bridge").unwrap().with_overrides(&["novalue"]).is_err());
    }

    #[test]
    fn minimal_file() {
        let cfg = RunConfig::from_toml("[case]\npreset = \"bridge\"\n[run]\nmax_iter = 3\n").unwrap();
        assert_eq!(cfg.run.max_iter, 3);
        assert_eq!(cfg.case, CaseSpec::Bridge(BridgeSpec::default()));
        assert!(RunConfig::from_toml("[case]\npreset = \"hook\"\n").is_err());
    }
}
