//! The five analysis subcommands, each producing a result table.

use crate::config::{resolve, set_param, Scenario, ScenarioFile};
use crate::output::{Cell, Table};
use anyhow::{anyhow, bail, Result};
use cowsim_core::feasibility::{partial_attack_analysis, scan_mu, MuScanSpec};
use cowsim_core::mc::{simulate_attacked, McReport};
use cowsim_core::metrics::{expected_metrics, MetricsReport};
use cowsim_core::model::{ConstraintSet, Sequence};
use cowsim_core::usd::usd_statistics;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    Linear,
    Log,
}

/// An inclusive evaluation grid.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub scale: Scale,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 {
            bail!("grid needs at least 2 points");
        }
        if !(self.from < self.to) {
            bail!("grid requires from < to");
        }
        if self.scale == Scale::Log && self.from <= 0.0 {
            bail!("log scale requires from > 0");
        }
        let n = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| {
                let t = i as f64 / n;
                match self.scale {
                    Scale::Linear => self.from + (self.to - self.from) * t,
                    Scale::Log => self.from * ((self.to / self.from).ln() * t).exp(),
                }
            })
            .collect())
    }
}

fn closed_report(s: &Scenario) -> MetricsReport {
    let u = usd_statistics(&s.eve, s.protocol.mu);
    expected_metrics(&s.protocol, &s.eve, &u)
}

fn metric_cells(m: &MetricsReport) -> Vec<Cell> {
    let mut cells = vec![Cell::Float(m.gain), Cell::opt(m.qber)];
    for s in Sequence::ALL {
        cells.push(Cell::opt(m.vis[s.index()]));
    }
    cells.push(Cell::opt(m.vis_ave));
    cells
}

pub const METRIC_COLUMNS: [&str; 8] = ["gain", "qber", "v2", "v01", "v02", "v21", "v22", "v_ave"];

pub fn metrics_table(s: &Scenario) -> Table {
    let mut table = Table::new(vec![
        "scheme", "mu", "f", "epsilon", "gain", "qber", "v2", "v01", "v02", "v21", "v22",
        "v_ave",
    ]);
    let m = closed_report(s);
    let mut row = vec![
        Cell::Str(s.eve.scheme.to_string()),
        Cell::Float(s.protocol.mu),
        Cell::Float(s.protocol.f),
        Cell::Float(s.epsilon()),
    ];
    row.extend(metric_cells(&m));
    table.push(row);
    table
}

fn mc_metric_rows(mc: &McReport, closed: &MetricsReport) -> Vec<(&'static str, Option<(f64, f64)>, Option<f64>, u64)> {
    let mut rows: Vec<(&'static str, Option<(f64, f64)>, Option<f64>, u64)> = vec![
        (
            "gain",
            Some((mc.gain.value, mc.gain.std_err)),
            Some(closed.gain),
            mc.tallies.data_clicks,
        ),
        (
            "qber",
            mc.qber.map(|e| (e.value, e.std_err)),
            closed.qber,
            mc.tallies.key_bits,
        ),
    ];
    for s in Sequence::ALL {
        let idx = s.index();
        let events = mc.tallies.m1_clicks[idx] + mc.tallies.m2_clicks[idx];
        rows.push((
            METRIC_COLUMNS[2 + idx],
            mc.vis[idx].map(|e| (e.value, e.std_err)),
            closed.vis[idx],
            events,
        ));
    }
    let total = mc.tallies.m1_clicks.iter().sum::<u64>() + mc.tallies.m2_clicks.iter().sum::<u64>();
    rows.push((
        "v_ave",
        mc.vis_ave.map(|e| (e.value, e.std_err)),
        closed.vis_ave,
        total,
    ));
    rows
}

pub fn simulate_table(s: &Scenario, rounds: u64, seed: u64) -> Table {
    let u = usd_statistics(&s.eve, s.protocol.mu);
    let closed = expected_metrics(&s.protocol, &s.eve, &u);
    let mc = simulate_attacked(&s.protocol, &u, &s.eve, rounds, seed);
    let mut table = Table::new(vec![
        "scheme",
        "rounds",
        "seed",
        "metric",
        "estimate",
        "std_err",
        "closed_form",
        "z",
        "events",
    ]);
    for (name, estimate, closed_value, events) in mc_metric_rows(&mc, &closed) {
        let z = match (estimate, closed_value) {
            (Some((value, se)), Some(reference)) if se > 0.0 => {
                Cell::Float((value - reference) / se)
            }
            _ => Cell::Missing,
        };
        table.push(vec![
            Cell::Str(s.eve.scheme.to_string()),
            Cell::Int(mc.rounds),
            Cell::Int(seed),
            Cell::Str(name.to_string()),
            Cell::opt(estimate.map(|e| e.0)),
            Cell::opt(estimate.map(|e| e.1)),
            Cell::opt(closed_value),
            z,
            Cell::Int(events),
        ]);
    }
    table
}

/// One closed-form evaluation per grid point; an `eve.m_max` sweep also
/// reports each metric's relative difference against a long-cap reference.
pub fn sweep_table(
    base: &ScenarioFile,
    param: &str,
    grid: &GridSpec,
    m_ref: u64,
) -> Result<Table> {
    let values = grid.values()?;
    let with_reference = param == "eve.m_max";
    let reference = if with_reference {
        let mut file = base.clone();
        file.eve.m_max = Some(m_ref);
        let s = resolve(&file).map_err(violations_error)?;
        Some(closed_report(&s))
    } else {
        None
    };

    let rows: Vec<Result<Vec<Cell>>> = values
        .par_iter()
        .map(|&value| {
            let mut file = base.clone();
            set_param(&mut file, param, value)?;
            let s = resolve(&file).map_err(violations_error)?;
            let m = closed_report(&s);
            let mut row = vec![Cell::Str(param.to_string()), Cell::Float(value)];
            row.extend(metric_cells(&m));
            if let Some(reference) = &reference {
                for (a, b) in metric_pairs(&m, reference) {
                    row.push(match (a, b) {
                        (Some(a), Some(b)) if b != 0.0 => Cell::Float((a - b) / b),
                        _ => Cell::Missing,
                    });
                }
            }
            Ok(row)
        })
        .collect();

    let mut columns = vec!["param", "value"];
    columns.extend(METRIC_COLUMNS);
    if with_reference {
        columns.extend([
            "d_gain", "d_qber", "d_v2", "d_v01", "d_v02", "d_v21", "d_v22", "d_v_ave",
        ]);
    }
    let mut table = Table::new(columns);
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

fn metric_pairs(a: &MetricsReport, b: &MetricsReport) -> Vec<(Option<f64>, Option<f64>)> {
    let mut pairs = vec![(Some(a.gain), Some(b.gain)), (a.qber, b.qber)];
    for idx in 0..5 {
        pairs.push((a.vis[idx], b.vis[idx]));
    }
    pairs.push((a.vis_ave, b.vis_ave));
    pairs
}

pub fn violations_error(v: Vec<cowsim_core::model::Violation>) -> anyhow::Error {
    let lines: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    anyhow!("invalid configuration:\n  {}", lines.join("\n  "))
}

/// Intensity-threshold and key-rate-bound rows over a channel grid.
pub fn feasibility_table(s: &Scenario, grid: &GridSpec) -> Result<Table> {
    let etas = grid.values()?;
    let th = s.thresholds(ConstraintSet::full_attack());
    let rows: Vec<Vec<Cell>> = etas
        .par_iter()
        .map(|&eta| {
            let r = scan_mu(&s.protocol, &s.eve, eta, &th, &MuScanSpec::default());
            vec![
                Cell::Float(eta),
                Cell::Float(r.mu_max),
                Cell::Float(r.k_max),
            ]
        })
        .collect();
    let mut table = Table::new(vec!["eta_ch", "mu_max", "k_max"]);
    for row in rows {
        table.push(row);
    }
    Ok(table)
}

/// Partial-attack rows over a parameter grid: the largest attackable
/// fraction and the key ratio extracted at that point.
pub fn partial_table(base: &ScenarioFile, param: &str, grid: &GridSpec) -> Result<Table> {
    let values = grid.values()?;
    let rows: Vec<Result<Vec<Cell>>> = values
        .par_iter()
        .map(|&value| {
            let mut file = base.clone();
            set_param(&mut file, param, value)?;
            let s = resolve(&file).map_err(violations_error)?;
            let th = s.thresholds(ConstraintSet::partial_attack());
            let r = partial_attack_analysis(&s.protocol, &s.eve, s.channel.eta_ch, &th);
            Ok(vec![
                Cell::Str(param.to_string()),
                Cell::Float(value),
                Cell::Float(r.tau_a),
                Cell::opt(r.ext_k),
            ])
        })
        .collect();
    let mut table = Table::new(vec!["param", "value", "tau_a", "ext_k"]);
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}
