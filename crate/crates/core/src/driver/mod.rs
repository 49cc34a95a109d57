//! Simulation runs: initial data, the time loop, snapshots and pattern metrics.

mod config;
mod scan;

pub use config::{config_keys, parse_config, parse_number, parse_override, resolve_key, ConfigKey, KEYS};
pub use scan::{parameter_scan, scan_csv, ScanGrid, ScanRow};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_finite, check_positive, Error, Result};
use crate::fem::{assemble_operators_with, CoupledSystemOperators, MassKind};
use crate::kinetics::{ensure_compatible, ModelParams, SteadyState};
use crate::mesh::{generate_ball_mesh, write_vtk_surface, write_vtk_volume, BulkSurfaceMesh};
use crate::stability::Regime;
use crate::timestep::{CoupledSystem, KineticsMode, SchemeConfig, SystemState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictRule {
    /// Relative L² deviation at or above which a field counts as patterned.
    pub threshold: f64,
    /// Outer-to-inner shell amplitude ratio that marks a boundary layer.
    pub layer_ratio: f64,
    /// With a patterned bulk, the surface counts as patterned in its own right
    /// only above `threshold * surface_ratio`.
    pub surface_ratio: f64,
    /// Radius outside which bulk vertices belong to the outer shell.
    pub outer_radius: f64,
    /// Radius inside which bulk vertices belong to the inner core.
    pub inner_radius: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            layer_ratio: 5.0,
            surface_ratio: 5.0,
            outer_radius: 0.8,
            inner_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub level: usize,
    pub scheme: SchemeConfig,
    pub mass: MassKind,
    pub kinetics: KineticsMode,
    pub t_end: f64,
    /// Time between snapshots; zero disables them.
    pub snapshot_interval: f64,
    pub seed: u64,
    pub epsilon_ic: f64,
    pub output_dir: Option<PathBuf>,
    /// Early stop once every metric changes by less than this (relative)
    /// over `early_stop_window` steps; zero disables it.
    pub early_stop_tol: f64,
    pub early_stop_window: usize,
    pub verdict: VerdictRule,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::reference(1.0, 1.0),
            level: 3,
            scheme: SchemeConfig::default(),
            mass: MassKind::Consistent,
            kinetics: KineticsMode::Full,
            t_end: 2.0,
            snapshot_interval: 0.0,
            seed: 1,
            epsilon_ic: 0.01,
            output_dir: None,
            early_stop_tol: 1e-6,
            early_stop_window: 100,
            verdict: VerdictRule::default(),
        }
    }
}

impl SimConfig {
    pub fn reference(d_bulk: f64, d_surf: f64) -> Self {
        Self {
            params: ModelParams::reference(d_bulk, d_surf),
            ..Self::default()
        }
    }

    /// Checks every field and returns the uniform steady state.
    pub fn validate(&self) -> Result<SteadyState> {
        self.params.validate()?;
        self.scheme.validate()?;
        check_positive("t_end", self.t_end)?;
        check_finite("epsilon_ic", self.epsilon_ic)?;
        check_finite("snapshot_interval", self.snapshot_interval)?;
        check_finite("early_stop_tol", self.early_stop_tol)?;
        for (name, v) in [
            ("epsilon_ic", self.epsilon_ic),
            ("snapshot_interval", self.snapshot_interval),
            ("early_stop_tol", self.early_stop_tol),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        let v = &self.verdict;
        check_positive("threshold", v.threshold)?;
        check_positive("layer_ratio", v.layer_ratio)?;
        check_positive("surface_ratio", v.surface_ratio)?;
        if !(0.0 < v.inner_radius && v.inner_radius < v.outer_radius && v.outer_radius < 1.0) {
            return Err(Error::InvalidParameter {
                name: "shell radii",
                reason: format!(
                    "need 0 < inner < outer < 1, got {} and {}",
                    v.inner_radius, v.outer_radius
                ),
            });
        }
        if self.level > crate::mesh::MAX_REFINEMENT {
            return Err(Error::RefinementTooDeep {
                level: self.level,
                max: crate::mesh::MAX_REFINEMENT,
            });
        }
        ensure_compatible(&self.params)
    }
}

/// Steady state times `1 + ε ξ` with independent `ξ ~ U[-1, 1]` per node and
/// field, drawn in the order u, v, r, s.
pub fn make_initial_condition(
    n_bulk: usize,
    n_surf: usize,
    steady: &SteadyState,
    epsilon: f64,
    seed: u64,
) -> SystemState {
    let mut st = SystemState::steady(n_bulk, n_surf, steady);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for field in [&mut st.u, &mut st.v, &mut st.r, &mut st.s] {
        for x in field.iter_mut() {
            let xi: f64 = rng.random_range(-1.0..=1.0);
            *x *= 1.0 + epsilon * xi;
        }
    }
    st
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternMetrics {
    pub rel_dev_bulk: f64,
    pub rel_dev_surf: f64,
    pub amp_shell_outer: f64,
    pub amp_shell_inner: f64,
    pub boundary_layer: bool,
    pub verdict: Regime,
}

impl PatternMetrics {
    fn as_array(&self) -> [f64; 4] {
        [
            self.rel_dev_bulk,
            self.rel_dev_surf,
            self.amp_shell_outer,
            self.amp_shell_inner,
        ]
    }
}

/// Regime from the four metrics.
///
/// A field is patterned when its relative deviation reaches the threshold.
/// A patterned bulk whose deviation sits in the outer shell is a boundary
/// layer and does not count as bulk patterning once the surface is patterned.
/// Alongside a patterned bulk the surface counts only when its deviation is at
/// least `threshold * surface_ratio`, since a bulk pattern always imprints a
/// weaker response on the surface through the exchange terms.
pub fn verdict(
    rel_dev_bulk: f64,
    rel_dev_surf: f64,
    outer: f64,
    inner: f64,
    rule: &VerdictRule,
) -> (Regime, bool) {
    let layer = outer >= rule.layer_ratio * inner && outer > 0.0;
    let bulk = rel_dev_bulk >= rule.threshold;
    let surf = rel_dev_surf >= rule.threshold;
    let regime = match (bulk, surf) {
        (false, false) => Regime::NoPattern,
        (false, true) => Regime::SurfaceOnly,
        (true, false) => Regime::BulkOnly,
        (true, true) if layer => Regime::SurfaceOnly,
        (true, true) if rel_dev_surf >= rule.threshold * rule.surface_ratio => Regime::Both,
        (true, true) => Regime::BulkOnly,
    };
    (regime, layer)
}

/// Mesh-dependent data for computing metrics.
#[derive(Debug, Clone)]
pub struct MetricContext {
    m_bulk: crate::fem::SparseOperator,
    m_surf: crate::fem::SparseOperator,
    outer: Vec<usize>,
    inner: Vec<usize>,
    steady: SteadyState,
    rule: VerdictRule,
}

impl MetricContext {
    pub fn new(
        mesh: &BulkSurfaceMesh,
        ops: &CoupledSystemOperators,
        steady: SteadyState,
        rule: VerdictRule,
    ) -> Self {
        let radius = |k: usize| crate::mesh::norm(&mesh.vertices[k]);
        Self {
            m_bulk: ops.m_bulk.clone(),
            m_surf: ops.m_surf.clone(),
            outer: (0..mesh.n_vertices())
                .filter(|&k| radius(k) > rule.outer_radius)
                .collect(),
            inner: (0..mesh.n_vertices())
                .filter(|&k| radius(k) < rule.inner_radius)
                .collect(),
            steady,
            rule,
        }
    }

    fn rel_l2(m: &crate::fem::SparseOperator, x: &[f64], target: f64) -> f64 {
        let dev: Vec<f64> = x.iter().map(|xi| xi - target).collect();
        let md = m.mul_vec(&dev).expect("sizes");
        let num: f64 = dev.iter().zip(&md).map(|(a, b)| a * b).sum();
        let den: f64 = m.total() * target * target;
        (num.max(0.0) / den).sqrt()
    }

    fn rms(ids: &[usize], u: &[f64], target: f64) -> f64 {
        if ids.is_empty() {
            return 0.0;
        }
        let s: f64 = ids.iter().map(|&k| (u[k] - target).powi(2)).sum();
        (s / ids.len() as f64).sqrt()
    }

    pub fn metrics(&self, st: &SystemState) -> PatternMetrics {
        let rel_dev_bulk = Self::rel_l2(&self.m_bulk, &st.u, self.steady.u_star);
        let rel_dev_surf = Self::rel_l2(&self.m_surf, &st.r, self.steady.r_star);
        let amp_shell_outer = Self::rms(&self.outer, &st.u, self.steady.u_star);
        let amp_shell_inner = Self::rms(&self.inner, &st.u, self.steady.u_star);
        let (verdict, boundary_layer) = verdict(
            rel_dev_bulk,
            rel_dev_surf,
            amp_shell_outer,
            amp_shell_inner,
            &self.rule,
        );
        PatternMetrics {
            rel_dev_bulk,
            rel_dev_surf,
            amp_shell_outer,
            amp_shell_inner,
            boundary_layer,
            verdict,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SystemState,
    pub metrics: PatternMetrics,
    pub steps: usize,
    pub early_stopped: bool,
    pub max_halvings: u32,
    pub snapshots: Vec<PathBuf>,
}

fn write_snapshot(
    dir: &std::path::Path,
    index: usize,
    mesh: &BulkSurfaceMesh,
    st: &SystemState,
) -> Result<[PathBuf; 2]> {
    let bulk = dir.join(format!("bulk_{index:04}.vtk"));
    let surf = dir.join(format!("surface_{index:04}.vtk"));
    let mut w = BufWriter::new(File::create(&bulk)?);
    write_vtk_volume(mesh, &[("u", &st.u), ("v", &st.v)], &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&surf)?);
    write_vtk_surface(mesh, &[("r", &st.r), ("s", &st.s)], &mut w)?;
    w.flush()?;
    Ok([bulk, surf])
}

/// Runs one simulation on a freshly generated mesh.
pub fn run(cfg: &SimConfig) -> Result<RunOutcome> {
    let steady = cfg.validate()?;
    let mesh = generate_ball_mesh(cfg.level)?;
    let ops = assemble_operators_with(&mesh, cfg.mass)?;
    let init = make_initial_condition(
        mesh.n_vertices(),
        mesh.n_surface(),
        &steady,
        cfg.epsilon_ic,
        cfg.seed,
    );
    run_from(cfg, &mesh, &ops, init, |_, _| {})
}

/// Runs from a given state. `observe` sees every accepted state with its
/// metrics.
pub fn run_from(
    cfg: &SimConfig,
    mesh: &BulkSurfaceMesh,
    ops: &CoupledSystemOperators,
    mut state: SystemState,
    mut observe: impl FnMut(&SystemState, &PatternMetrics),
) -> Result<RunOutcome> {
    let steady = cfg.validate()?;
    let sys = CoupledSystem::new(ops, &cfg.params, cfg.kinetics)?;
    let ctx = MetricContext::new(mesh, ops, steady, cfg.verdict);

    let mut series = match &cfg.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut w = BufWriter::new(File::create(dir.join("timeseries.csv"))?);
            writeln!(
                w,
                "t,rel_dev_bulk,rel_dev_surf,amp_shell_outer,amp_shell_inner,verdict"
            )?;
            Some(w)
        }
        None => None,
    };
    let mut snapshots = Vec::new();
    let mut next_snapshot = 0.0;
    let mut snap_index = 0;

    let total_steps = (cfg.t_end / cfg.scheme.dt).round().max(1.0) as usize;
    let mut metrics = ctx.metrics(&state);
    let mut window: std::collections::VecDeque<[f64; 4]> = std::collections::VecDeque::new();
    let mut steps = 0;
    let mut early_stopped = false;
    let mut max_halvings = 0;
    loop {
        observe(&state, &metrics);
        if let Some(w) = series.as_mut() {
            writeln!(
                w,
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{}",
                state.t,
                metrics.rel_dev_bulk,
                metrics.rel_dev_surf,
                metrics.amp_shell_outer,
                metrics.amp_shell_inner,
                metrics.verdict
            )?;
        }
        if let Some(dir) = &cfg.output_dir {
            if cfg.snapshot_interval > 0.0 && state.t >= next_snapshot - 1e-12 {
                snapshots.extend(write_snapshot(dir, snap_index, mesh, &state)?);
                snap_index += 1;
                next_snapshot += cfg.snapshot_interval;
            }
        }
        if steps == total_steps || early_stopped {
            break;
        }
        let (next, report) = sys.step(&state, &cfg.scheme)?;
        if !next.is_finite() {
            return Err(Error::NewtonDiverged {
                iterations: report.newton_iterations,
                residual: f64::NAN,
            });
        }
        max_halvings = max_halvings.max(report.halvings);
        state = next;
        steps += 1;
        metrics = ctx.metrics(&state);

        if cfg.early_stop_tol > 0.0 && cfg.early_stop_window > 0 {
            let now = metrics.as_array();
            window.push_back(now);
            if window.len() > cfg.early_stop_window + 1 {
                window.pop_front();
            }
            if window.len() == cfg.early_stop_window + 1 {
                let old = window[0];
                let settled = now.iter().zip(&old).all(|(a, b)| {
                    (a - b).abs() <= cfg.early_stop_tol * a.abs().max(b.abs()).max(1e-300)
                });
                early_stopped = settled;
            }
        }
    }
    if let Some(mut w) = series {
        w.flush()?;
    }
    if let Some(dir) = &cfg.output_dir {
        if cfg.snapshot_interval > 0.0 && !snapshots.is_empty() {
            // always keep the final state
            let last_t = state.t;
            if next_snapshot - cfg.snapshot_interval < last_t - 1e-12 {
                snapshots.extend(write_snapshot(dir, snap_index, mesh, &state)?);
            }
        }
    }
    Ok(RunOutcome {
        state,
        metrics,
        steps,
        early_stopped,
        max_halvings,
        snapshots,
    })
}
