//! Run configuration: a TOML file with sections, overridden by command-line flags.

use dualpde::dual_solver::SolverConfig;
use dualpde::models::pressure::PressureLaw;
use dualpde::series::{parse_components, TrigSeries};
use dualpde::{Error, Model, Result, SpaceTimeGrid, WeightProfile};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Consistency,
    BurgersSubstitute,
    Dafermos,
    VerifyModel,
    GapStudy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Burgers,
    Barotropic,
    Qhd,
    Korteweg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Candidate {
    Strong,
    Inflated,
    Solver,
}

/// `"adapt"` or a non-negative rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Value(f64),
    Keyword(String),
}

impl std::str::FromStr for GammaSpec {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.parse::<f64>() {
            Ok(v) => Ok(GammaSpec::Value(v)),
            Err(_) if s == "adapt" => Ok(GammaSpec::Keyword(s.into())),
            Err(_) => Err(format!("weight must be 'adapt' or a number, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: Option<ModelName>,
    /// `log`, `gamma:<g>` or `power:<coef>:<exp>` (barotropic and QHD).
    pub pressure: Option<String>,
    /// Capillarity exponent (Korteweg).
    pub s: Option<f64>,
    pub rho_min: Option<f64>,
    /// Additive constant of the internal energy.
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Burgers datum, e.g. `sin:1`.
    pub v0: Option<String>,
    /// Fluid components, e.g. `q=sin:1:0.1;rho=const:1+cos:1:0.1`.
    pub components: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    pub gamma: Option<GammaSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub max_iterations: Option<usize>,
    pub gap_rel: Option<f64>,
    pub feas_abs: Option<f64>,
    pub record_every: Option<usize>,
    pub order: Option<usize>,
    pub restarts: Option<bool>,
    pub primal_weight: Option<f64>,
    pub power_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub deterministic: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DafermosSection {
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub candidate: Option<Candidate>,
    pub inflate: Option<f64>,
    pub residual_tol: Option<f64>,
    pub delta_rel: Option<f64>,
    pub gamma_cap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstituteSection {
    pub samples: Option<usize>,
    pub snapshots: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub weight: WeightSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub dafermos: DafermosSection,
    #[serde(default)]
    pub substitute: SubstituteSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub study: StudySection,
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

macro_rules! overlay {
    ($dst:expr, $src:expr; $($f:ident),*) => { $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )* };
}

impl RunConfig {
    /// Fields set in `over` replace those of `self`.
    pub fn overlay(mut self, over: &RunConfig) -> RunConfig {
        if over.command.is_some() {
            self.command = over.command;
        }
        overlay!(self.model, over.model; name, pressure, s, rho_min, offset);
        overlay!(self.data, over.data; v0, components);
        overlay!(self.grid, over.grid; nx, nt, t);
        overlay!(self.weight, over.weight; gamma);
        overlay!(self.solver, over.solver; max_iterations, gap_rel, feas_abs, record_every, order, restarts, primal_weight, power_iterations);
        overlay!(self.run, over.run; out, seed, threads, deterministic);
        overlay!(self.dafermos, over.dafermos; t0, t1, candidate, inflate, residual_tol, delta_rel, gamma_cap);
        overlay!(self.substitute, over.substitute; samples, snapshots);
        overlay!(self.verify, over.verify; trials);
        overlay!(self.study, over.study; sizes);
        self
    }

    /// Fills defaults so the recorded configuration is complete.
    pub fn with_defaults(mut self) -> RunConfig {
        let d = SolverConfig::default();
        let s = &mut self.solver;
        s.max_iterations.get_or_insert(d.max_iterations);
        s.gap_rel.get_or_insert(d.gap_rel);
        s.feas_abs.get_or_insert(d.feas_abs);
        s.record_every.get_or_insert(d.record_every);
        s.order.get_or_insert(d.order);
        s.restarts.get_or_insert(d.restarts);
        s.primal_weight.get_or_insert(d.primal_weight);
        s.power_iterations.get_or_insert(d.power_iterations);
        self.model.name.get_or_insert(ModelName::Burgers);
        self.model.rho_min.get_or_insert(1e-3);
        if self.model.name != Some(ModelName::Burgers) && self.model.name != Some(ModelName::Korteweg) {
            self.model.pressure.get_or_insert_with(|| "log".into());
        }
        if self.model.name == Some(ModelName::Korteweg) {
            self.model.s.get_or_insert(-0.5);
        }
        self.weight.gamma.get_or_insert(GammaSpec::Keyword("adapt".into()));
        self.run.seed.get_or_insert(0);
        self.run.deterministic.get_or_insert(false);
        self
    }

    pub fn command(&self) -> Result<Command> {
        self.command.ok_or_else(|| Error::Config("no command given".into()))
    }

    pub fn model(&self) -> Result<Model> {
        let rho_min = self.model.rho_min.unwrap_or(1e-3);
        let pressure = || -> Result<PressureLaw> {
            let spec = self.model.pressure.as_deref().unwrap_or("log");
            let parts: Vec<&str> = spec.split(':').collect();
            let num = |p: &str| p.parse::<f64>().map_err(|_| Error::Config(format!("model.pressure: bad number '{p}' in '{spec}'")));
            let law = match parts.as_slice() {
                ["log"] => PressureLaw::log(),
                ["gamma", g] => PressureLaw::gamma_law(num(g)?)?,
                ["power", c, e] => PressureLaw::power(num(c)?, num(e)?)?,
                _ => return Err(Error::Config(format!("model.pressure: expected log, gamma:<g> or power:<c>:<e>, got '{spec}'"))),
            };
            Ok(match self.model.offset {
                Some(o) => law.with_offset(o),
                None => law,
            })
        };
        let name = self.model.name.unwrap_or(ModelName::Burgers);
        if name != ModelName::Burgers && name != ModelName::Korteweg && self.model.s.is_some() {
            return Err(Error::Config("model.s applies to korteweg only".into()));
        }
        match name {
            ModelName::Burgers => {
                if self.model.pressure.is_some() || self.model.s.is_some() {
                    return Err(Error::Config("burgers takes no pressure law or capillarity exponent".into()));
                }
                Ok(Model::burgers())
            }
            ModelName::Barotropic => Model::barotropic(pressure()?, rho_min),
            ModelName::Qhd => Model::qhd(pressure()?, rho_min),
            ModelName::Korteweg => {
                if self.model.pressure.is_some() {
                    return Err(Error::Config("korteweg fixes its pressure through model.s".into()));
                }
                Model::korteweg(self.model.s.unwrap_or(-0.5), rho_min, self.model.offset)
            }
        }
    }

    pub fn v0_series(&self) -> Result<TrigSeries> {
        let text = self.data.v0.as_deref().ok_or_else(|| Error::Config("data.v0 (--v0) is required".into()))?;
        TrigSeries::parse(text)
    }

    pub fn components(&self) -> Result<Vec<(String, TrigSeries)>> {
        let text = self
            .data
            .components
            .as_deref()
            .ok_or_else(|| Error::Config("data.components (--data) is required for fluid models".into()))?;
        parse_components(text)
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        let nx = self.grid.nx.ok_or_else(|| Error::Config("grid.nx (--Nx) is required".into()))?;
        let t = self.grid.t.ok_or_else(|| Error::Config("grid.t (--T) is required".into()))?;
        SpaceTimeGrid::new(nx, self.grid.nt.unwrap_or(nx), t)
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let s = &self.solver;
        let cfg = SolverConfig {
            max_iterations: s.max_iterations.unwrap_or(d.max_iterations),
            gap_rel: s.gap_rel.unwrap_or(d.gap_rel),
            feas_abs: s.feas_abs.unwrap_or(d.feas_abs),
            record_every: s.record_every.unwrap_or(d.record_every),
            order: s.order.unwrap_or(d.order),
            restarts: s.restarts.unwrap_or(d.restarts),
            primal_weight: s.primal_weight.unwrap_or(d.primal_weight),
            power_iterations: s.power_iterations.unwrap_or(d.power_iterations),
            seed: self.run.seed.unwrap_or(0),
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `None` means adapt to the strong solution.
    pub fn fixed_gamma(&self) -> Result<Option<f64>> {
        match &self.weight.gamma {
            None => Ok(None),
            Some(GammaSpec::Keyword(k)) if k == "adapt" => Ok(None),
            Some(GammaSpec::Keyword(k)) => Err(Error::Config(format!("weight.gamma: expected 'adapt' or a number, got '{k}'"))),
            Some(GammaSpec::Value(g)) => {
                WeightProfile::new(*g, 1.0)?;
                Ok(Some(*g))
            }
        }
    }
}
