//! CSV tables for trajectories, sweeps, curves and composite cycles.
//!
//! Floats are written with nine significant digits in the shortest of fixed
//! and exponent notation; NaN is written as `nan`.

use std::io::Write;

use crate::curves::BifurcationCurve;
use crate::equilibria::{BifurcationLadder, Nullclines};
use crate::gspt::{BreakCurve, GsptTrajectory};
use crate::integrator::{Model, SweepPoint, Trajectory};

/// `%.9g`-style formatting.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x))
    } else {
        format!(
            "{}e{}{:02}",
            strip_zeros(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// An in-memory CSV table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&v| fmt_g(v)).collect());
    }

    pub fn write_to<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn write_path(&self, path: &std::path::Path) -> csv::Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }
}

pub fn trajectory_table(model: &Model, traj: &Trajectory) -> Table {
    let header: &[&str] = match model {
        Model::Atri(_) => &["t", "c", "h"],
        Model::Mech(_) => &["t", "c", "theta", "h"],
        Model::VanDerPol { .. } => &["t", "x", "y"],
    };
    let mut t = Table::new(header);
    for i in 0..traj.len() {
        let mut row = vec![traj.times[i]];
        row.extend_from_slice(traj.state(i));
        t.push_floats(&row);
    }
    t
}

/// Sweep results from the fixed-init runs, or from the continuation when
/// `continued` is set.
pub fn sweep_table(points: &[SweepPoint], continued: bool) -> Table {
    let mut t = Table::new(&[
        "param",
        "c_min",
        "c_max",
        "period",
        "frequency",
        "oscillating",
        "n_equilibria",
    ]);
    for p in points {
        let run = if continued {
            p.continued.as_ref()
        } else {
            Some(&p.fixed)
        };
        let mut row = vec![fmt_g(p.value)];
        match run {
            Some(Ok(s)) => {
                row.extend([s.c_min, s.c_max, s.period, s.frequency].iter().map(|&v| fmt_g(v)));
                row.push(s.oscillating.to_string());
            }
            _ => {
                row.extend(std::iter::repeat_n("nan".to_string(), 4));
                row.push("error".into());
            }
        }
        row.push(p.equilibria.len().to_string());
        t.rows.push(row);
    }
    t
}

pub fn curves_table(curves: &[&BifurcationCurve]) -> Table {
    let mut t = Table::new(&["c", "mu", "lambda", "kind"]);
    for c in curves {
        for s in &c.samples {
            let kind = if c.samples.iter().any(|x| x.branch == 1) {
                format!("{}{}", c.kind.label(), s.branch)
            } else {
                c.kind.label().to_string()
            };
            t.rows.push(vec![fmt_g(s.c), fmt_g(s.mu), fmt_g(s.lambda), kind]);
        }
    }
    t
}

pub fn ladder_table(ladder: &BifurcationLadder) -> Table {
    let mut t = Table::new(&["mu", "kind", "branch_c"]);
    for e in &ladder.events {
        t.rows.push(vec![fmt_g(e.mu), e.kind.label().into(), fmt_g(e.branch_c)]);
    }
    t
}

pub fn nullclines_table(n: &Nullclines) -> Table {
    let mut t = Table::new(&["c", "h_F", "h_G"]);
    for i in 0..n.c.len() {
        t.push_floats(&[n.c[i], n.h_f[i], n.h_g[i]]);
    }
    t
}

pub fn gspt_table(g: &GsptTrajectory) -> Table {
    let mut t = Table::new(&["phase", "t", "c", "theta", "h"]);
    for s in &g.segments {
        for i in 0..s.times.len() {
            let theta = s.theta.get(i).copied().unwrap_or(f64::NAN);
            t.rows.push(vec![
                s.phase.label().into(),
                fmt_g(s.times[i]),
                fmt_g(s.c[i]),
                fmt_g(theta),
                fmt_g(s.h[i]),
            ]);
        }
    }
    t
}

pub fn break_curve_table(b: &BreakCurve) -> Table {
    let mut t = Table::new(&["c", "theta_F", "h_F"]);
    for i in 0..b.c.len() {
        t.push_floats(&[b.c[i], b.theta_f[i], b.h_f[i]]);
    }
    t
}
