//! Run configuration: a single JSON document, validated before any work.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    AnalyzeSystem,
    AnalyzeOperator,
    Solve,
    LossExperiment,
    CheckSymbol,
    Sweep,
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::AnalyzeSystem => "analyze-system",
            Self::AnalyzeOperator => "analyze-operator",
            Self::Solve => "solve",
            Self::LossExperiment => "loss-experiment",
            Self::CheckSymbol => "check-symbol",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Degeneracy {
    pub l_star: u32,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
}

/// One coefficient `a_{j alpha}` of a scalar operator (constant in `t, x`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub j: usize,
    pub alpha: Vec<usize>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// A root `value * xi_hat` of the given multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootSpec {
    pub value: f64,
    #[serde(default = "one_usize")]
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Problem {
    Qi { k: f64 },
    Wave { l_star: u32 },
    Transport {
        a: f64,
        #[serde(default = "one_u32")]
        l_star: u32,
    },
    DifferentialSystem {
        #[serde(default = "one_u32")]
        l_star: u32,
    },
    /// The dissipative reduced Qi system used for energy experiments.
    ReducedQi { k: f64 },
    /// `t xi [[0,1],[1,0]]`, energy conserving.
    Hermitian,
    /// Scalar operator from a coefficient table; uses `degeneracy`.
    Operator { order: usize, terms: Vec<Term> },
    /// First-order system `A0 xi_hat`, constant `A1 = a1_re + i a1_im`; uses
    /// `degeneracy`.
    System {
        a0: Vec<Vec<f64>>,
        a1_re: Vec<Vec<f64>>,
        #[serde(default)]
        a1_im: Option<Vec<Vec<f64>>>,
        roots: Vec<RootSpec>,
    },
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Qi { .. } => "qi",
            Self::Wave { .. } => "wave",
            Self::Transport { .. } => "transport",
            Self::DifferentialSystem { .. } => "differential_system",
            Self::ReducedQi { .. } => "reduced_qi",
            Self::Hermitian => "hermitian",
            Self::Operator { .. } => "operator",
            Self::System { .. } => "system",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub x_points: usize,
    pub n_modes: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            x_points: 16,
            n_modes: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub gap_tol: f64,
    /// Relative tolerance of the time integrator.
    pub tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    pub sigma: f64,
    pub t_probe: f64,
    pub eps: f64,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            sigma: 6.0,
            t_probe: 1.0,
            eps: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// `|phi_hat| = <xi>^{-sigma-1/2}` with seeded phases.
    PowerLaw { sigma: f64 },
    /// Smooth, supported on `|xi| <= cutoff`.
    Gaussian { width: f64, cutoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSettings {
    pub times: Vec<f64>,
    pub eps: f64,
    pub data: DataSpec,
    /// Amplitude of the forcing `phi cos t` in the first component.
    pub forcing: f64,
    /// Constant `C` of the conjugation multiplier `C g^{-1} h^2`.
    pub q_scale: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            times: vec![1.0],
            eps: 0.0,
            data: DataSpec::Gaussian {
                width: 8.0,
                cutoff: 24.0,
            },
            forcing: 0.0,
            q_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolKind {
    /// `g^m h^{eta-m}`.
    WeightPower { m: f64, eta: f64 },
    /// `lambda(t) <xi>`.
    LambdaBracket,
    /// Full symbol of the Qi system.
    QiSystem { k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolCheck {
    pub symbol: SymbolKind,
    /// Declared orders `(m, eta)`; several mean a union of classes.
    pub orders: Vec<(f64, f64)>,
    #[serde(default = "default_max_orders")]
    pub max_orders: (usize, usize, usize),
    #[serde(default = "default_n_t")]
    pub n_t: usize,
    #[serde(default = "default_n_xi")]
    pub n_xi: usize,
    #[serde(default = "default_xi_max")]
    pub xi_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    K,
    Sigma,
    Eps,
    NModes,
    LStar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub command: CommandKind,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degeneracy: Option<Degeneracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<Problem>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub solve: SolveSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn one_u32() -> u32 {
    1
}

fn default_max_orders() -> (usize, usize, usize) {
    (1, 0, 2)
}

fn default_n_t() -> usize {
    96
}

fn default_n_xi() -> usize {
    64
}

fn default_xi_max() -> f64 {
    1e4
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

fn square(name: &str, rows: &[Vec<f64>], n: usize) -> Result<(), CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("{name} must be {n} x {n}")));
    }
    rows.iter().flatten().try_for_each(|&v| finite(name, v))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn problem(&self) -> Result<&Problem, CliError> {
        self.problem.as_ref().ok_or_else(|| invalid("config has no problem"))
    }

    /// Schema checks that do not depend on the command.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(d) = &self.degeneracy {
            if d.l_star == 0 || !(d.horizon > 0.0 && d.horizon.is_finite()) {
                return Err(invalid("degeneracy needs l_star >= 1 and 0 < T < inf"));
            }
        }
        if self.grids.x_points == 0 {
            return Err(invalid("grids.x_points must be positive"));
        }
        if self.grids.n_modes < 16 || self.grids.n_modes % 2 != 0 {
            return Err(invalid("grids.n_modes must be even and at least 16"));
        }
        let t = &self.tolerances;
        if !(t.gap_tol > 0.0 && t.gap_tol < 1.0) || !(t.tol > 0.0 && t.tol < 1.0) {
            return Err(invalid("tolerances must lie in (0, 1)"));
        }
        let e = &self.experiment;
        finite("experiment.sigma", e.sigma)?;
        if !(e.t_probe > 0.0 && e.t_probe.is_finite()) || !(e.eps >= 0.0 && e.eps.is_finite()) {
            return Err(invalid("experiment needs t_probe > 0 and eps >= 0"));
        }
        let s = &self.solve;
        if s.times.is_empty() || s.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("solve.times must be a nonempty list of finite times >= 0"));
        }
        if s.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("solve.times must be increasing"));
        }
        if !(s.eps >= 0.0 && s.eps.is_finite()) {
            return Err(invalid("solve.eps must be >= 0"));
        }
        finite("solve.forcing", s.forcing)?;
        finite("solve.q_scale", s.q_scale)?;
        match &s.data {
            DataSpec::PowerLaw { sigma } => finite("solve.data.sigma", *sigma)?,
            DataSpec::Gaussian { width, cutoff } => {
                if !(*width > 0.0 && *cutoff > 0.0) {
                    return Err(invalid("gaussian data needs width, cutoff > 0"));
                }
            }
        }
        if let Some(p) = &self.problem {
            self.validate_problem(p)?;
        }
        if let Some(sym) = &self.symbol {
            if sym.orders.is_empty() {
                return Err(invalid("symbol.orders must not be empty"));
            }
            if sym.n_t < 2 || sym.n_xi < 2 || !(sym.xi_max > 1.0) {
                return Err(invalid("symbol grid needs n_t, n_xi >= 2 and xi_max > 1"));
            }
        }
        Ok(())
    }

    fn validate_problem(&self, p: &Problem) -> Result<(), CliError> {
        match p {
            Problem::Qi { k } | Problem::ReducedQi { k } => finite("k", *k),
            Problem::Wave { l_star } | Problem::DifferentialSystem { l_star } => {
                if *l_star == 0 {
                    Err(invalid("l_star must be at least 1"))
                } else {
                    Ok(())
                }
            }
            Problem::Transport { a, l_star } => {
                if *l_star == 0 {
                    return Err(invalid("l_star must be at least 1"));
                }
                finite("a", *a)
            }
            Problem::Hermitian => Ok(()),
            Problem::Operator { order, terms } => {
                if self.degeneracy.is_none() {
                    return Err(invalid("operator problems need a degeneracy section"));
                }
                if *order == 0 {
                    return Err(invalid("operator order must be at least 1"));
                }
                terms.iter().try_for_each(|t| {
                    finite("term.re", t.re)?;
                    finite("term.im", t.im)
                })
            }
            Problem::System {
                a0,
                a1_re,
                a1_im,
                roots,
            } => {
                if self.degeneracy.is_none() {
                    return Err(invalid("system problems need a degeneracy section"));
                }
                let n = a0.len();
                if n == 0 {
                    return Err(invalid("system a0 must not be empty"));
                }
                square("a0", a0, n)?;
                square("a1_re", a1_re, n)?;
                if let Some(im) = a1_im {
                    square("a1_im", im, n)?;
                }
                if roots.iter().map(|r| r.multiplicity).sum::<usize>() != n {
                    return Err(invalid("root multiplicities must sum to the system size"));
                }
                roots.iter().try_for_each(|r| finite("root", r.value))
            }
        }
    }
}
