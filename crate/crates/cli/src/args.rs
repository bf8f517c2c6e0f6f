use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "calx",
    version,
    about = "Calcium-signalling ODE models: steady states, bifurcation curves, cycles and slow-fast analysis"
)]
pub struct Cli {
    /// JSON parameter file; replaces the compiled-in defaults.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,

    /// Output directory for CSV tables and the run manifest.
    #[arg(long, global = true, env = "CALX_OUT_DIR", default_value = ".")]
    pub out: PathBuf,

    /// No random numbers are drawn anywhere; accepted for scripts that pass it.
    #[arg(long, global = true)]
    pub seedless: bool,

    /// Smaller workloads: analytic subset for `verify`, fewer refinements
    /// for `sweep`.
    #[arg(long, global = true)]
    pub quick: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and summarise its long-time behaviour.
    Simulate(SimulateArgs),
    /// Hopf, fold or discriminant curves in the (mu, lambda) plane.
    Curves(CurvesArgs),
    /// Cycle measurements along a parameter grid.
    Sweep(SweepArgs),
    /// Leading-order relaxation cycle and transition-layer times.
    Gspt(GsptArgs),
    /// Steady states with their classification, plus nullclines.
    Equilibria(EquilibriaArgs),
    /// Sign changes of trace, determinant and discriminant along the planar
    /// steady-state curve.
    Ladder(LadderArgs),
    /// Run the reference checks; exits nonzero if any fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Atri,
    Mech,
    Vdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Mu,
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveChoice {
    Hopf,
    Fold,
    Discr,
    All,
}

/// Overrides applied on top of the parameter file or defaults.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ParamOverrides {
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Stress gain.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stress law: 1 for alpha c/(1 + alpha c), 2 for alpha c^2/(1 + alpha c^2).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub hill: Option<u8>,
    #[arg(long = "K1")]
    pub k1: Option<f64>,
    #[arg(long = "K2")]
    pub k2: Option<f64>,
    #[arg(long = "Gamma")]
    pub gamma: Option<f64>,
    #[arg(long = "K")]
    pub k: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "atri")]
    pub model: ModelKind,
    /// Initial state, comma separated (`c,h`, `c,theta,h` or `x,y`).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub init: Option<Vec<f64>>,
    /// Van der Pol small parameter.
    #[arg(long, default_value_t = 0.025)]
    pub epsilon: f64,
    #[command(flatten)]
    pub params: ParamOverrides,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurvesArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub kind: CurveChoice,
    #[arg(long, default_value_t = 1e-4)]
    pub c_min: f64,
    #[arg(long, default_value_t = 50.0)]
    pub c_max: f64,
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
    #[command(flatten)]
    pub params: ParamOverrides,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "atri")]
    pub model: ModelKind,
    #[arg(long, value_enum, default_value = "mu")]
    pub param: Param,
    /// `start:stop` or `start:stop:step`.
    #[arg(long)]
    pub range: String,
    /// Grid size when no step is given.
    #[arg(long, default_value_t = 49)]
    pub points: usize,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub init: Option<Vec<f64>>,
    /// Upward and downward continuation with refined onset and cycle fold.
    #[arg(long)]
    pub hysteresis: bool,
    /// Bisection steps used to refine window edges.
    #[arg(long, default_value_t = 10)]
    pub refine: usize,
    #[command(flatten)]
    pub params: ParamOverrides,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GsptArgs {
    #[arg(long, value_enum, default_value = "atri")]
    pub model: ModelKind,
    /// Small parameter; defaults to 1/K1.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub params: ParamOverrides,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EquilibriaArgs {
    #[arg(long, value_enum, default_value = "atri")]
    pub model: ModelKind,
    #[command(flatten)]
    pub params: ParamOverrides,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LadderArgs {
    #[arg(long, default_value_t = 0.0)]
    pub mu_lo: f64,
    #[arg(long, default_value_t = 0.6)]
    pub mu_hi: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub params: ParamOverrides,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Run only these checks; `6` selects both `6a` and `6b`.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
}

/// Parses `a:b` or `a:b:step` into an ascending grid.
pub fn parse_range(s: &str, points: usize) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow::anyhow!("bad range {s:?}: {e}"))?;
    let (lo, hi) = match parts[..] {
        [lo, hi] | [lo, hi, _] => (lo, hi),
        _ => anyhow::bail!("range must be start:stop or start:stop:step, got {s:?}"),
    };
    anyhow::ensure!(hi > lo, "range {s:?} must be ascending");
    let n = match parts[..] {
        [_, _, step] => {
            anyhow::ensure!(step > 0.0, "range step must be positive");
            ((hi - lo) / step + 1e-9).floor() as usize + 1
        }
        _ => points,
    };
    anyhow::ensure!(n >= 2, "range {s:?} needs at least two points");
    let step = if let [_, _, step] = parts[..] {
        step
    } else {
        (hi - lo) / (n - 1) as f64
    };
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:1", 3).unwrap(), vec![0.0, 0.5, 1.0]);
        let g = parse_range("0.28:0.52:0.005", 0).unwrap();
        assert_eq!(g.len(), 49);
        assert!((g[48] - 0.52).abs() < 1e-12);
        assert!(parse_range("1:0", 3).is_err());
        assert!(parse_range("0:1:2:3", 3).is_err());
        assert!(parse_range("a:1", 3).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
