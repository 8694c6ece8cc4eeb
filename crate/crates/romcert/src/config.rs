//! Experiment configuration: a single TOML file with strict keys.
//!
//! All randomness in an experiment (training/test split, network
//! initialization, power-iteration start vectors) flows from the one `seed`
//! at the top level, so identical files reproduce identical runs. Unknown
//! keys are rejected rather than ignored. The hash of the effective
//! configuration, after command-line overrides, stamps every CSV artifact.
//!
//! Units: `time` values are in the simulated system's time unit, parameter
//! values in the units of the model's admissible domain (diffusion or
//! conduction coefficients for the built-in models), and tolerances are
//! dimensionless relative quantities.

use crate::closure::{FnnHyper, SurrogateKind};
use crate::error::{Error, Result};
use crate::estimator::EstimatorVariant;
use crate::models::{AxisScale, ModelId, ParamDomain, TimeGrid};
use crate::timestepping::{ImexScheme, SolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for every random choice in the experiment.
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    pub time: TimeSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub greedy: GreedySection,
    #[serde(default)]
    pub closure: ClosureSection,
    #[serde(default)]
    pub fnn: FnnSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<DemoSection>,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub id: ModelId,
    /// Spatial resolution handed to the model constructor (grid cells for
    /// the PDE models, nodes per variable for the two-variable system).
    pub n_cells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl TimeSection {
    pub fn to_grid(&self) -> Result<TimeGrid> {
        TimeGrid::from_span(self.t0, self.t_end, self.dt)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let cfg = SolverConfig::default();
        Self {
            rtol: cfg.rtol,
            atol: cfg.atol,
            max_steps: cfg.max_steps,
        }
    }
}

impl SolverSection {
    pub fn to_solver_config(&self) -> SolverConfig {
        SolverConfig {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub kind: ImexScheme,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            kind: ImexScheme::Order1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    /// Sample counts per parameter axis; the full set is their product.
    pub grid: Vec<usize>,
    /// Share of the shuffled samples used for training; the rest is the
    /// test set.
    pub train_fraction: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            grid: vec![20],
            train_fraction: 0.8,
        }
    }
}

/// How the closure-free greedy driver produces trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Blackbox,
    March,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreedySection {
    pub tol: f64,
    pub r_c: usize,
    pub max_iters: usize,
    /// 1 = closure-free driver, 2 = closure-aware driver.
    pub alg: u8,
    /// Trajectory route for the closure-free driver.
    pub source: SourceKind,
}

impl Default for GreedySection {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            r_c: 1,
            max_iters: 30,
            alg: 2,
            source: SourceKind::Blackbox,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClosureSection {
    /// Number of training-set parameters sampled for defect extraction.
    pub d_s: usize,
    pub tol_svd_t: f64,
    pub tol_svd_p: f64,
    /// "rbf" or "fnn".
    pub surrogate: String,
    pub update_defect: bool,
}

impl Default for ClosureSection {
    fn default() -> Self {
        Self {
            d_s: 16,
            tol_svd_t: 1e-8,
            tol_svd_p: 1e-8,
            surrogate: "rbf".into(),
            update_defect: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FnnSection {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for FnnSection {
    fn default() -> Self {
        let h = FnnHyper::default();
        Self {
            hidden: h.hidden,
            epochs: h.epochs,
            learning_rate: h.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Parameter at which the full model is integrated.
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoSection {
    /// Conduction coefficient of the demonstration run.
    pub mu: f64,
    /// Reduced dimension of the projection basis.
    pub n_modes: usize,
}

impl Default for DemoSection {
    fn default() -> Self {
        Self {
            mu: 0.06,
            n_modes: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    /// Output-estimate variant: "a" carries the correction-gap term, "b"
    /// avoids any further adaptive solves.
    pub variant: String,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self { variant: "b".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl ExperimentConfig {
    /// Parse and validate a configuration file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.time.to_grid()?;
        if self.params.grid.is_empty() || self.params.grid.contains(&0) {
            return Err(Error::Config(
                "params.grid needs a positive sample count per axis".into(),
            ));
        }
        if !(self.params.train_fraction > 0.0 && self.params.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "params.train_fraction must lie in (0, 1], got {}",
                self.params.train_fraction
            )));
        }
        if !(self.greedy.tol > 0.0) || self.greedy.r_c == 0 || self.greedy.max_iters == 0 {
            return Err(Error::Config(
                "greedy needs tol > 0, r_c >= 1 and max_iters >= 1".into(),
            ));
        }
        if !matches!(self.greedy.alg, 1 | 2) {
            return Err(Error::Config(format!(
                "greedy.alg must be 1 or 2, got {}",
                self.greedy.alg
            )));
        }
        if self.closure.d_s == 0 {
            return Err(Error::Config("closure.d_s must be at least 1".into()));
        }
        for (name, tol) in [
            ("closure.tol_svd_t", self.closure.tol_svd_t),
            ("closure.tol_svd_p", self.closure.tol_svd_p),
        ] {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {tol}")));
            }
        }
        if !matches!(self.closure.surrogate.as_str(), "rbf" | "fnn") {
            return Err(Error::Config(format!(
                "closure.surrogate must be \"rbf\" or \"fnn\", got {:?}",
                self.closure.surrogate
            )));
        }
        self.estimate_variant()?;
        if !(self.solver.rtol > 0.0 && self.solver.atol > 0.0) || self.solver.max_steps == 0 {
            return Err(Error::Config(
                "solver needs positive tolerances and max_steps".into(),
            ));
        }
        if self.fnn.hidden.is_empty()
            || self.fnn.hidden.contains(&0)
            || !(self.fnn.learning_rate > 0.0)
            || self.fnn.epochs == 0
        {
            return Err(Error::Config(
                "fnn needs nonempty positive hidden widths, epochs >= 1 and a positive learning rate".into(),
            ));
        }
        Ok(())
    }

    /// Command-line overrides folded into the effective configuration.
    pub fn apply_overrides(
        &mut self,
        alg: Option<u8>,
        surrogate: Option<&str>,
        seed: Option<u64>,
        out: Option<&str>,
    ) -> Result<()> {
        if let Some(a) = alg {
            self.greedy.alg = a;
        }
        if let Some(s) = surrogate {
            self.closure.surrogate = s.to_string();
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.output.dir = o.to_string();
        }
        self.validate()
    }

    /// Hash of the effective configuration in its canonical TOML form.
    pub fn sha256(&self) -> Result<String> {
        let canonical =
            toml::to_string(self).map_err(|e| Error::Config(format!("serialization: {e}")))?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }

    pub fn surrogate_kind(&self) -> Result<SurrogateKind> {
        match self.closure.surrogate.as_str() {
            "rbf" => Ok(SurrogateKind::Rbf),
            "fnn" => Ok(SurrogateKind::Fnn(FnnHyper {
                hidden: self.fnn.hidden.clone(),
                epochs: self.fnn.epochs,
                learning_rate: self.fnn.learning_rate,
                seed: self.seed,
            })),
            other => Err(Error::Config(format!("unknown surrogate {other:?}"))),
        }
    }

    pub fn estimate_variant(&self) -> Result<EstimatorVariant> {
        self.estimate.variant.parse()
    }
}

/// Tensor-product parameter sample over the admissible box: per axis the
/// requested number of points, evenly spaced in the axis scale (so
/// logarithmically for log axes), single counts collapsing to the middle.
/// The first axis varies slowest.
pub fn parameter_grid(domain: &ParamDomain, counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    if counts.len() != domain.dim() {
        return Err(Error::Config(format!(
            "params.grid lists {} axes for a {}-dimensional domain",
            counts.len(),
            domain.dim()
        )));
    }
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(counts.len());
    for (i, &count) in counts.iter().enumerate() {
        let (lo, hi) = (domain.lo[i], domain.hi[i]);
        let axis: Vec<f64> = if count == 1 {
            match domain.scales[i] {
                AxisScale::Linear => vec![0.5 * (lo + hi)],
                AxisScale::Log => vec![(lo * hi).sqrt()],
            }
        } else {
            (0..count)
                .map(|j| {
                    let s = j as f64 / (count - 1) as f64;
                    match domain.scales[i] {
                        AxisScale::Linear => lo + s * (hi - lo),
                        AxisScale::Log => (lo.ln() + s * (hi.ln() - lo.ln())).exp(),
                    }
                })
                .collect()
        };
        axes.push(axis);
    }
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(points.len() * axis.len());
        for point in &points {
            for &v in axis {
                let mut grown = point.clone();
                grown.push(v);
                next.push(grown);
            }
        }
        points = next;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::assemble;

    const MINIMAL: &str = r#"
        [model]
        id = "heat"
        n_cells = 32

        [time]
        t_end = 1.0
        dt = 0.01
    "#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.greedy.alg, 2);
        assert_eq!(cfg.closure.surrogate, "rbf");
        assert_eq!(cfg.params.train_fraction, 0.8);
        assert_eq!(cfg.time.to_grid().unwrap().steps, 100);
        assert!(matches!(cfg.surrogate_kind().unwrap(), SurrogateKind::Rbf));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}\n[greedy]\ntolerance = 1e-4\n");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");

        let bad = format!("{MINIMAL}\nextra_top_level = 1\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for patch in [
            "[params]\ntrain_fraction = 1.5\n",
            "[params]\ngrid = [0]\n",
            "[greedy]\nalg = 3\n",
            "[greedy]\ntol = 0.0\n",
            "[closure]\nsurrogate = \"spline\"\n",
            "[closure]\ntol_svd_t = 2.0\n",
            "[estimate]\nvariant = \"c\"\n",
            "[fnn]\nhidden = []\n",
        ] {
            let text = format!("{MINIMAL}\n{patch}");
            assert!(
                ExperimentConfig::from_toml(&text).is_err(),
                "accepted: {patch}"
            );
        }
    }

    #[test]
    fn hash_reflects_overrides() {
        let mut a = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let b = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(a.sha256().unwrap(), b.sha256().unwrap());
        a.apply_overrides(Some(1), None, Some(9), None).unwrap();
        assert_ne!(a.sha256().unwrap(), b.sha256().unwrap());
    }

    #[test]
    fn parameter_grid_respects_axis_scales() {
        let heat = assemble(ModelId::Heat, &[0.05], 8).unwrap();
        let lin = parameter_grid(heat.param_domain(), &[5]).unwrap();
        assert_eq!(lin.len(), 5);
        assert!((lin[0][0] - 0.01).abs() < 1e-15);
        assert!((lin[4][0] - 0.1).abs() < 1e-15);
        let gap_a = lin[1][0] - lin[0][0];
        let gap_b = lin[4][0] - lin[3][0];
        assert!((gap_a - gap_b).abs() < 1e-12);

        let burgers = assemble(ModelId::Burgers, &[0.1], 8).unwrap();
        let log = parameter_grid(burgers.param_domain(), &[5]).unwrap();
        let ratio_a = log[1][0] / log[0][0];
        let ratio_b = log[4][0] / log[3][0];
        assert!((ratio_a - ratio_b).abs() < 1e-10);

        let fhn = assemble(ModelId::Fhn, &[0.02, 0.05], 8).unwrap();
        let grid2 = parameter_grid(fhn.param_domain(), &[3, 4]).unwrap();
        assert_eq!(grid2.len(), 12);
        // First axis varies slowest.
        assert_eq!(grid2[0][0], grid2[3][0]);
        assert!(parameter_grid(fhn.param_domain(), &[3]).is_err());
    }
}
