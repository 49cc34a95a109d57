use std::fmt::Write;

use super::{run, PatternMetrics, SimConfig};
use crate::error::Result;
use crate::stability::{classify_regime, Regime};

/// Grid over the diffusion ratios and, optionally, the reaction scale
/// (applied to both bulk and surface). An empty `gamma` keeps the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanGrid {
    pub d_bulk: Vec<f64>,
    pub d_surf: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub d_bulk: f64,
    pub d_surf: f64,
    pub gamma_bulk: f64,
    pub gamma_surf: f64,
    /// Prediction from the surface kinetics without exchange terms.
    pub predicted: Regime,
    /// Prediction with the exchange terms in the surface Jacobian.
    pub predicted_coupled: Regime,
    pub observed: Option<PatternMetrics>,
}

impl ScanRow {
    pub fn agrees(&self) -> Option<bool> {
        self.observed.map(|m| m.verdict == self.predicted)
    }
}

fn grid_configs(base: &SimConfig, grid: &ScanGrid) -> Vec<SimConfig> {
    let gammas: Vec<Option<f64>> = if grid.gamma.is_empty() {
        vec![None]
    } else {
        grid.gamma.iter().copied().map(Some).collect()
    };
    let mut out = Vec::new();
    for &g in &gammas {
        for &db in &grid.d_bulk {
            for &ds in &grid.d_surf {
                let mut cfg = base.clone();
                cfg.params.diffusion.d_bulk = db;
                cfg.params.diffusion.d_surf = ds;
                if let Some(g) = g {
                    cfg.params.kinetics.gamma_bulk = g;
                    cfg.params.kinetics.gamma_surf = g;
                }
                out.push(cfg);
            }
        }
    }
    out
}

/// Stability prediction for every grid point and, with `simulate`, the
/// observed verdict of a run. Runs are spread over worker threads; each has
/// its own output subdirectory `point_NNN` when the base config has one.
pub fn parameter_scan(base: &SimConfig, grid: &ScanGrid, simulate: bool) -> Result<Vec<ScanRow>> {
    let configs: Vec<SimConfig> = grid_configs(base, grid)
        .into_iter()
        .enumerate()
        .map(|(i, mut c)| {
            c.output_dir = c.output_dir.map(|d| d.join(format!("point_{i:03}")));
            c
        })
        .collect();
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let report = classify_regime(&cfg.params)?;
        let k = &cfg.params;
        rows.push(ScanRow {
            d_bulk: k.diffusion.d_bulk,
            d_surf: k.diffusion.d_surf,
            gamma_bulk: k.kinetics.gamma_bulk,
            gamma_surf: k.kinetics.gamma_surf,
            predicted: report.regime_uncoupled,
            predicted_coupled: report.regime,
            observed: None,
        });
    }
    if !simulate || configs.is_empty() {
        return Ok(rows);
    }
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(configs.len());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Vec<(usize, Result<PatternMetrics>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= configs.len() {
                            break;
                        }
                        done.push((i, run(&configs[i]).map(|o| o.metrics)));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scan worker panicked"))
            .collect()
    });
    let mut flat: Vec<(usize, Result<PatternMetrics>)> = results.into_iter().flatten().collect();
    flat.sort_by_key(|(i, _)| *i);
    for (i, m) in flat {
        rows[i].observed = Some(m?);
    }
    Ok(rows)
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from(
        "d_bulk,d_surf,gamma_bulk,gamma_surf,predicted,predicted_coupled,\
         observed,rel_dev_bulk,rel_dev_surf,amp_shell_outer,amp_shell_inner,boundary_layer,agrees\n",
    );
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.d_bulk, r.d_surf, r.gamma_bulk, r.gamma_surf, r.predicted, r.predicted_coupled
        );
        match &r.observed {
            Some(m) => {
                let _ = writeln!(
                    out,
                    ",{},{:.6e},{:.6e},{:.6e},{:.6e},{},{}",
                    m.verdict,
                    m.rel_dev_bulk,
                    m.rel_dev_surf,
                    m.amp_shell_outer,
                    m.amp_shell_inner,
                    m.boundary_layer,
                    r.agrees().unwrap_or(false)
                );
            }
            None => out.push_str(",,,,,,,\n"),
        }
    }
    out
}
