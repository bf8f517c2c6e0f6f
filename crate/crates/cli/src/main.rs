mod args;
mod output;

use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use calx_core::curves::{
    curve_summary, default_c_grid, discr_curve, fold_curve, fold_merge, hopf_curve, hopf_extremals, hopf_morphology,
    BifurcationCurve,
};
use calx_core::equilibria::{ladder_atri, nullcline_max, nullclines_atri};
use calx_core::golden;
use calx_core::gspt::{break_curve_3d, compose_relaxation_oscillation, transition_layer_3d, turning_margin};
use calx_core::integrator::{hysteresis, integrate, measure_cycle, sweep, IntegratorConfig, Model, SweepParam};
use calx_core::io::{self, fmt_g, Table};
use calx_core::model::{ModelParams, StressKind, StressLaw};
use calx_core::roots::log_grid;
use clap::Parser;
use serde::Serialize;

use args::*;
use output::Run;

/// Checks run by `verify --quick`: everything that needs no long integration.
const QUICK_CHECKS: &[&str] = &["1", "2", "3", "4", "5", "6", "9", "10", "11a", "11b"];

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn base_params(cli: &Cli) -> Result<ModelParams> {
    match &cli.params {
        None => Ok(ModelParams::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ModelParams::from_json(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }
}

fn resolve(cli: &Cli, o: &ParamOverrides) -> Result<ModelParams> {
    let mut p = base_params(cli)?;
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut p.mu, o.mu);
    set(&mut p.lambda, o.lambda);
    set(&mut p.k1, o.k1);
    set(&mut p.k2, o.k2);
    set(&mut p.gamma, o.gamma);
    set(&mut p.k, o.k);
    set(&mut p.b, o.b);
    let kind = match o.hill {
        Some(1) => StressKind::Hill1,
        Some(2) => StressKind::Hill2,
        _ => p.stress.kind,
    };
    p.stress = StressLaw::new(kind, o.alpha.unwrap_or(p.stress.alpha));
    p.validate().context("invalid parameters")?;
    Ok(p)
}

fn solver(s: &SolverArgs) -> Result<IntegratorConfig> {
    let mut c = IntegratorConfig::default();
    c.t_end = s.t_end.unwrap_or(c.t_end);
    c.rel_tol = s.rel_tol.unwrap_or(c.rel_tol);
    c.abs_tol = s.abs_tol.unwrap_or(c.abs_tol);
    c.max_step = s.max_step.unwrap_or(c.max_step);
    c.validate().context("invalid solver settings")?;
    Ok(c)
}

fn build_model(kind: ModelKind, p: ModelParams, epsilon: f64) -> Result<Model> {
    Ok(match kind {
        ModelKind::Atri => Model::Atri(p.with_lambda(0.0)),
        ModelKind::Mech => Model::Mech(p),
        ModelKind::Vdp => {
            if epsilon.is_nan() || epsilon <= 0.0 {
                bail!("--epsilon must be positive, got {epsilon}");
            }
            Model::VanDerPol { epsilon }
        }
    })
}

fn initial_state(model: &Model, init: &Option<Vec<f64>>) -> Result<Vec<f64>> {
    let dim = match model {
        Model::Mech(_) => 3,
        _ => 2,
    };
    let v = match (init, model) {
        (Some(v), _) => v.clone(),
        (None, Model::Atri(_)) => vec![0.4, 0.5],
        (None, Model::Mech(_)) => vec![0.4, 0.0, 0.5],
        (None, Model::VanDerPol { .. }) => vec![2.0, 0.0],
    };
    if v.len() != dim {
        bail!(
            "--init needs {dim} values for the {} model, got {}",
            model.name(),
            v.len()
        );
    }
    Ok(v)
}

#[derive(Serialize)]
struct Config<'a, A: Serialize> {
    params: Option<ModelParams>,
    solver: Option<IntegratorConfig>,
    args: &'a A,
    quick: bool,
    seedless: bool,
}

fn config<'a, A: Serialize>(
    cli: &Cli,
    params: Option<ModelParams>,
    solver: Option<IntegratorConfig>,
    args: &'a A,
) -> Config<'a, A> {
    Config {
        params,
        solver,
        args,
        quick: cli.quick,
        seedless: cli.seedless,
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let mut out = Run::new(&cli.out)?;
    match &cli.command {
        Command::Simulate(a) => {
            let p = resolve(cli, &a.params)?;
            let cfg = solver(&a.solver)?;
            let model = build_model(a.model, p, a.epsilon)?;
            let init = initial_state(&model, &a.init)?;
            simulate(&mut out, &model, &init, &cfg)?;
            out.finish("simulate", &config(cli, model.params().copied(), Some(cfg), a))?;
        }
        Command::Curves(a) => {
            let p = resolve(cli, &a.params)?;
            curves(&mut out, &p, a)?;
            out.finish("curves", &config(cli, Some(p), None, a))?;
        }
        Command::Sweep(a) => {
            let p = resolve(cli, &a.params)?;
            let cfg = solver(&a.solver)?;
            if a.model == ModelKind::Vdp {
                bail!("sweeps need a chemical model");
            }
            if a.model == ModelKind::Atri && a.param == Param::Lambda {
                bail!("the planar model has no lambda; use --model mech");
            }
            let model = build_model(a.model, p, 0.0)?;
            let init = initial_state(&model, &a.init)?;
            let grid = parse_range(&a.range, a.points)?;
            let refine = if cli.quick { a.refine.min(4) } else { a.refine };
            run_sweep(&mut out, &model, a, &grid, &init, &cfg, refine)?;
            out.finish("sweep", &config(cli, model.params().copied(), Some(cfg), a))?;
        }
        Command::Gspt(a) => {
            let p = resolve(cli, &a.params)?;
            let model = build_model(a.model, p, 1.0)?;
            gspt(&mut out, &model, a.epsilon)?;
            out.finish("gspt", &config(cli, model.params().copied(), None, a))?;
        }
        Command::Equilibria(a) => {
            let p = resolve(cli, &a.params)?;
            let model = build_model(a.model, p, 1.0)?;
            equilibria(&mut out, &model)?;
            out.finish("equilibria", &config(cli, model.params().copied(), None, a))?;
        }
        Command::Ladder(a) => {
            let p = resolve(cli, &a.params)?;
            let l = ladder_atri(&p, a.mu_lo, a.mu_hi, a.tol)?;
            out.table("ladder.csv", &io::ladder_table(&l))?;
            out.put("n_events", l.events.len());
            for (i, e) in l.events.iter().enumerate() {
                out.put(
                    &format!("event{}", i + 1),
                    format!("{} {}", fmt_g(e.mu), e.kind.label()),
                );
            }
            out.finish("ladder", &config(cli, Some(p), None, a))?;
        }
        Command::Verify(a) => {
            base_params(cli)?.validate().context("invalid parameters")?;
            let mut filter = a.only.clone();
            if cli.quick && filter.is_empty() {
                filter = QUICK_CHECKS.iter().map(|s| s.to_string()).collect();
            }
            let results = golden::run_checks(&filter);
            let mut t = Table::new(&["id", "passed", "budget_s", "title"]);
            for r in &results {
                eprintln!("{}", r.line());
                if !r.passed {
                    for d in &r.details {
                        eprintln!("        {d}");
                    }
                }
                t.rows.push(vec![
                    r.id.into(),
                    r.passed.to_string(),
                    fmt_g(r.budget_s),
                    r.title.into(),
                ]);
            }
            out.table("verify.csv", &t)?;
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
            out.put("checks", results.len());
            out.put("passed", results.len() - failed.len());
            out.put("failed", failed.join(","));
            out.finish("verify", &config(cli, None, None, a))?;
            if !failed.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(out: &mut Run, model: &Model, init: &[f64], cfg: &IntegratorConfig) -> Result<()> {
    let traj = integrate(model, init, cfg)?;
    out.table("trajectory.csv", &io::trajectory_table(model, &traj))?;
    let s = measure_cycle(model, init, cfg)?;
    out.put("model", model.name());
    out.put("oscillating", s.oscillating);
    out.put("status", format!("{:?}", s.status));
    out.put("c_min", fmt_g(s.c_min));
    out.put("c_max", fmt_g(s.c_max));
    out.put("period", fmt_g(s.period));
    out.put("frequency", fmt_g(s.frequency));
    out.put("cycles_measured", s.n_cycles_measured);
    out.put("t_end", fmt_g(s.t_end));
    Ok(())
}

fn curves(out: &mut Run, p: &ModelParams, a: &CurvesArgs) -> Result<()> {
    if !(a.c_min > 0.0 && a.c_max > a.c_min) || a.points < 2 {
        bail!("curve grid needs 0 < c_min < c_max and at least two points");
    }
    let grid = if (a.c_min, a.c_max, a.points) == (1e-4, 50.0, 2000) {
        default_c_grid()
    } else {
        log_grid(a.c_min, a.c_max, a.points)
    };
    let mut curves: Vec<BifurcationCurve> = Vec::new();
    if matches!(a.kind, CurveChoice::Hopf | CurveChoice::All) {
        curves.push(hopf_curve(p, &grid)?);
        match hopf_extremals(p, &grid) {
            Ok(e) => {
                out.put("lambda_max", fmt_g(e.lambda_max));
                out.put("mu_at_lambda_max", fmt_g(e.mu_at_max));
                out.put("mu_min", fmt_g(e.mu_min));
                out.put("lambda_at_mu_min", fmt_g(e.lambda_at_mu_min));
            }
            Err(e) => out.put("extremals", format!("unavailable: {e}")),
        }
        let m = hopf_morphology(p, p.stress.kind, p.stress.alpha)?;
        out.put("morphology", format!("{m:?}"));
    }
    if matches!(a.kind, CurveChoice::Fold | CurveChoice::All) {
        let f = fold_curve(p, &grid)?;
        match fold_merge(p, &grid) {
            Ok(m) => {
                let arms = [f.samples.iter().any(|s| s.c < m.c), f.samples.iter().any(|s| s.c > m.c)];
                out.put("fold_branches", arms.iter().filter(|&&x| x).count());
                out.put("merge_lambda", fmt_g(m.lambda));
                out.put("merge_mu", fmt_g(m.mu));
            }
            Err(e) => out.put("merge", format!("unavailable: {e}")),
        }
        curves.push(f);
    }
    if matches!(a.kind, CurveChoice::Discr | CurveChoice::All) {
        curves.push(discr_curve(p, &grid)?);
    }
    if a.kind == CurveChoice::All {
        let s = curve_summary(p)?;
        out.put("summary_morphology", format!("{:?}", s.morphology));
    }
    for c in &curves {
        out.put(&format!("{}_samples", c.kind.label()), c.samples.len());
        out.put(&format!("{}_skipped", c.kind.label()), c.skipped + c.discarded);
    }
    let refs: Vec<&BifurcationCurve> = curves.iter().collect();
    let name = match a.kind {
        CurveChoice::Hopf => "curves_hopf.csv",
        CurveChoice::Fold => "curves_fold.csv",
        CurveChoice::Discr => "curves_discr.csv",
        CurveChoice::All => "curves.csv",
    };
    out.table(name, &io::curves_table(&refs))?;
    Ok(())
}

fn oscillation_window(values: &[(f64, bool)]) -> Option<(f64, f64)> {
    let osc: Vec<f64> = values.iter().filter(|v| v.1).map(|v| v.0).collect();
    Some((*osc.first()?, *osc.last()?))
}

fn run_sweep(
    out: &mut Run,
    model: &Model,
    a: &SweepArgs,
    grid: &[f64],
    init: &[f64],
    cfg: &IntegratorConfig,
    refine: usize,
) -> Result<()> {
    let param = match a.param {
        Param::Mu => SweepParam::Mu,
        Param::Lambda => SweepParam::Lambda,
    };
    out.put("param", param.label());
    out.put("points", grid.len());
    if a.hysteresis {
        let h = hysteresis(model, param, grid, init, cfg, refine)?;
        out.table("sweep_up.csv", &io::sweep_table(&h.up, true))?;
        out.table("sweep_down.csv", &io::sweep_table(&h.down, true))?;
        out.table("sweep.csv", &io::sweep_table(&h.up, false))?;
        let opt = |v: Option<f64>| v.map_or("none".to_string(), fmt_g);
        out.put("onset", opt(h.onset));
        out.put("cycle_fold", opt(h.cycle_fold));
        out.put("down_onset", opt(h.down_onset));
        out.put(
            "bistable",
            h.bistable
                .map_or("none".to_string(), |(lo, hi)| format!("{}:{}", fmt_g(lo), fmt_g(hi))),
        );
        out.put("n_oscillating", h.up.iter().filter(|p| p.fixed_oscillating()).count());
    } else {
        let pts = sweep(model, param, grid, init, cfg, false)?;
        out.table("sweep.csv", &io::sweep_table(&pts, false))?;
        let flags: Vec<(f64, bool)> = pts.iter().map(|p| (p.value, p.fixed_oscillating())).collect();
        out.put("n_oscillating", flags.iter().filter(|f| f.1).count());
        out.put(
            "window",
            oscillation_window(&flags).map_or("none".to_string(), |(lo, hi)| format!("{}:{}", fmt_g(lo), fmt_g(hi))),
        );
    }
    Ok(())
}

fn gspt(out: &mut Run, model: &Model, epsilon: Option<f64>) -> Result<()> {
    let p = *model.params().context("gspt needs a chemical model")?;
    let eps = epsilon.unwrap_or(1.0 / p.k1);
    if eps.is_nan() || eps <= 0.0 {
        bail!("--epsilon must be positive");
    }
    out.put("epsilon", fmt_g(eps));
    if let Model::Mech(_) = model {
        if p.lambda > 0.0 {
            let grid = log_grid(1e-4, 50.0, 400);
            out.table("break_curve.csv", &io::break_curve_table(&break_curve_3d(&p, &grid)?))?;
            let escaping = grid.iter().any(|&c| {
                turning_margin(&p, c) <= 0.0 || transition_layer_3d(&p, c, eps).map_or(true, |l| l.escaping())
            });
            out.put("turning", !escaping);
            if escaping {
                out.put("escaping", true);
                return Ok(());
            }
        }
    } else if let Ok(m) = nullcline_max(&p) {
        out.put("c_break", fmt_g(m.c_m));
        out.put("h_break", fmt_g(m.h_m));
        let n = nullclines_atri(&p, &log_grid(1e-3, 10.0, 400))?;
        out.table("nullclines.csv", &io::nullclines_table(&n))?;
    }
    let g = compose_relaxation_oscillation(model, eps)?;
    out.table("gspt.csv", &io::gspt_table(&g))?;
    let opt = |v: Option<f64>| v.map_or("none".to_string(), fmt_g);
    out.put("escaping", g.layer.escaping());
    out.put("t_turning", opt(g.layer.t_turning));
    out.put("t_back", opt(g.layer.t_back));
    out.put("c_peak", opt(g.layer.c_peak));
    out.put("period", fmt_g(g.period));
    out.put("c_max", fmt_g(g.c_max()));
    out.put("matching_error", fmt_g(g.matching_error));
    out.put("iterations", g.iterations);
    Ok(())
}

fn equilibria(out: &mut Run, model: &Model) -> Result<()> {
    let p = model.params().context("equilibria need a chemical model")?;
    let eqs = model.equilibria();
    let mut t = Table::new(&["c", "theta", "h", "trace", "det", "discr", "class", "residual"]);
    for e in &eqs {
        let mut row: Vec<String> = [
            e.c_star,
            e.theta_star.unwrap_or(f64::NAN),
            e.h_star,
            e.trace,
            e.det,
            e.discr,
        ]
        .iter()
        .map(|&v| fmt_g(v))
        .collect();
        row.push(e.klass.label().into());
        row.push(fmt_g(e.residual));
        t.rows.push(row);
    }
    out.table("equilibria.csv", &t)?;
    out.put("n_equilibria", eqs.len());
    for (i, e) in eqs.iter().enumerate() {
        out.put(
            &format!("equilibrium{}", i + 1),
            format!("c={} {}", fmt_g(e.c_star), e.klass.label()),
        );
    }
    if p.mu > 0.0 {
        let n = nullclines_atri(p, &log_grid(1e-3, 10.0, 400))?;
        out.table("nullclines.csv", &io::nullclines_table(&n))?;
        if let Ok(m) = nullcline_max(p) {
            out.put("c_M", fmt_g(m.c_m));
            out.put("h_M", fmt_g(m.h_m));
        }
    }
    Ok(())
}
