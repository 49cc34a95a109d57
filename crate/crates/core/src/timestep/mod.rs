//! Fractional-step θ time integration of the monolithic four-field system
//!
//! ```text
//! B y' = F(y) = -A y + C y + R(y)
//! ```
//!
//! with `y = (u, v, r, s)`, block-diagonal mass `B` and diffusion `A`, linear
//! exchange operator `C`, and kinetics `R` integrated by vertex quadrature.

mod linear;

pub use linear::{gmres, solve_linear, solve_spd, Ilu0};

use crate::error::{check_positive, Error, Result};
use crate::fem::{CoupledSystemOperators, SparseBuilder, SparseOperator};
use crate::kinetics::{reaction, reaction_jacobian, steady_state, ModelParams, SteadyState};

/// Discrete fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

impl SystemState {
    pub fn uniform(n_bulk: usize, n_surf: usize, values: [f64; 4]) -> Self {
        Self {
            t: 0.0,
            u: vec![values[0]; n_bulk],
            v: vec![values[1]; n_bulk],
            r: vec![values[2]; n_surf],
            s: vec![values[3]; n_surf],
        }
    }

    pub fn steady(n_bulk: usize, n_surf: usize, ss: &SteadyState) -> Self {
        Self::uniform(n_bulk, n_surf, [ss.u_star, ss.v_star, ss.r_star, ss.s_star])
    }

    pub fn check_sizes(&self, n_bulk: usize, n_surf: usize) -> Result<()> {
        for (what, got, expected) in [
            ("u", self.u.len(), n_bulk),
            ("v", self.v.len(), n_bulk),
            ("r", self.r.len(), n_surf),
            ("s", self.s.len(), n_surf),
        ] {
            if got != expected {
                return Err(Error::SizeMismatch {
                    what,
                    got,
                    expected,
                });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        [&self.u, &self.v, &self.r, &self.s]
            .iter()
            .all(|f| f.iter().all(|x| x.is_finite()))
    }

    /// Monolithic vector `(u, v, r, s)`.
    pub fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * (self.u.len() + self.r.len()));
        for f in [&self.u, &self.v, &self.r, &self.s] {
            y.extend_from_slice(f);
        }
        y
    }

    pub fn unpack(t: f64, y: &[f64], n_bulk: usize, n_surf: usize) -> Self {
        let (u, rest) = y.split_at(n_bulk);
        let (v, rest) = rest.split_at(n_bulk);
        let (r, s) = rest.split_at(n_surf);
        debug_assert_eq!(s.len(), n_surf);
        Self {
            t,
            u: u.to_vec(),
            v: v.to_vec(),
            r: r.to_vec(),
            s: s.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub dt: f64,
    pub theta: f64,
    pub alpha: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub linear_tol: f64,
    /// Maximum number of successive step halvings after Newton failure.
    pub max_halvings: u32,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        let theta = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        Self {
            dt: 1e-4,
            theta,
            alpha: (1.0 - 2.0 * theta) / (1.0 - theta),
            newton_tol: 1e-8,
            newton_max: 20,
            linear_tol: 1e-10,
            max_halvings: 10,
        }
    }
}

impl SchemeConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("dt", self.dt)?;
        check_positive("newton_tol", self.newton_tol)?;
        check_positive("linear_tol", self.linear_tol)?;
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("must lie in (0, 1/2), got {}", self.theta),
            });
        }
        if !(self.alpha > 0.5 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must lie in (1/2, 1], got {}", self.alpha),
            });
        }
        if self.newton_max == 0 {
            return Err(Error::InvalidParameter {
                name: "newton_max",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// `(fraction of dt, implicit weight, explicit weight)` of the substeps.
    pub fn substeps(&self) -> [(f64, f64, f64); 3] {
        let (th, a) = (self.theta, self.alpha);
        let b = 1.0 - a;
        let mid = 1.0 - 2.0 * th;
        [(th, a, b), (mid, b, a), (th, a, b)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KineticsMode {
    #[default]
    Full,
    /// Kinetics replaced by their linearization at the uniform steady state.
    Linearized,
    Off,
}

/// Solver statistics for one call to [`CoupledSystem::step`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub newton_iterations: usize,
    pub halvings: u32,
    /// Scaled residual history of every Newton solve, in order.
    pub residuals: Vec<Vec<f64>>,
}

/// Monolithic semi-discrete system on a fixed sparsity pattern.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    params: ModelParams,
    kinetics: KineticsMode,
    steady: SteadyState,
    n_bulk: usize,
    n_surf: usize,
    pattern: SparseOperator,
    mass: Vec<f64>,
    diffusion: Vec<f64>,
    exchange: Vec<f64>,
    /// Positions of the per-node 2×2 kinetics blocks:
    /// `[(a,a), (a,b), (b,a), (b,b)]` for each bulk then surface node.
    reaction_pos: Vec<[usize; 4]>,
    /// Lumped mass times γ for each node, bulk then surface.
    reaction_weight: Vec<f64>,
    /// Inverse lumped mass per unknown, used to scale residuals.
    inv_lumped: Vec<f64>,
}

fn scatter(
    pattern: &SparseOperator,
    target: &mut [f64],
    a: &SparseOperator,
    row_off: usize,
    col_off: usize,
    scale: f64,
) {
    for i in 0..a.rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let p = pattern
                .position(row_off + i, col_off + j)
                .expect("entry in pattern");
            target[p] += scale * v;
        }
    }
}

impl CoupledSystem {
    pub fn new(
        ops: &CoupledSystemOperators,
        params: &ModelParams,
        kinetics: KineticsMode,
    ) -> Result<Self> {
        params.validate()?;
        let steady = steady_state(&params.kinetics)?;
        let nb = ops.n_bulk();
        let ns = ops.n_surf();
        let n = 2 * nb + 2 * ns;
        let (ou, ov, or, os) = (0, nb, 2 * nb, 2 * nb + ns);

        let mut b = SparseBuilder::new(n, n);
        type Map<'a> = &'a dyn Fn(usize) -> usize;
        fn touch(b: &mut SparseBuilder, a: &SparseOperator, ro: usize, co: usize, rmap: Map, cmap: Map) {
            for i in 0..a.rows() {
                for &j in a.row(i).0 {
                    b.touch(ro + rmap(i), co + cmap(j));
                }
            }
        }
        let id = |i: usize| i;
        let tr = |i: usize| ops.trace[i];
        for (off, m, k) in [
            (ou, &ops.m_bulk, &ops.k_bulk),
            (ov, &ops.m_bulk, &ops.k_bulk),
            (or, &ops.m_surf, &ops.k_surf),
            (os, &ops.m_surf, &ops.k_surf),
        ] {
            touch(&mut b, m, off, off, &id, &id);
            touch(&mut b, k, off, off, &id, &id);
        }
        // kinetics couple (u, v) and (r, s) at each node
        let node_pairs = (0..nb)
            .map(|i| (ou + i, ov + i))
            .chain((0..ns).map(|j| (or + j, os + j)));
        let node_pairs: Vec<(usize, usize)> = node_pairs.collect();
        for &(a, c) in &node_pairs {
            b.touch(a, c);
            b.touch(c, a);
        }
        // exchange: bulk trace rows and surface rows against all four fields
        let blocks: [(usize, Map); 4] = [(ou, &tr), (ov, &tr), (or, &id), (os, &id)];
        for (ro, rm) in blocks {
            for (co, cm) in blocks {
                touch(&mut b, &ops.m_trace, ro, co, rm, cm);
            }
        }
        let pattern = b.build();

        let nnz = pattern.nnz();
        let mut mass = vec![0.0; nnz];
        let mut diffusion = vec![0.0; nnz];
        let (d_bulk, d_surf) = (params.diffusion.d_bulk, params.diffusion.d_surf);
        scatter(&pattern, &mut mass, &ops.m_bulk, ou, ou, 1.0);
        scatter(&pattern, &mut mass, &ops.m_bulk, ov, ov, 1.0);
        scatter(&pattern, &mut mass, &ops.m_surf, or, or, 1.0);
        scatter(&pattern, &mut mass, &ops.m_surf, os, os, 1.0);
        scatter(&pattern, &mut diffusion, &ops.k_bulk, ou, ou, 1.0);
        scatter(&pattern, &mut diffusion, &ops.k_bulk, ov, ov, d_bulk);
        scatter(&pattern, &mut diffusion, &ops.k_surf, or, or, 1.0);
        scatter(&pattern, &mut diffusion, &ops.k_surf, os, os, d_surf);

        let c = &params.coupling;
        let g = params.kinetics.gamma_surf;
        let mut exchange = vec![0.0; nnz];
        // h1 = α1 r - β1 u - κ1 v enters u with +γ and r with -γ; h2 likewise
        // for v and s
        let rows = [(ou, or, [-c.beta1, -c.kappa1, c.alpha1, 0.0]), (ov, os, [-c.beta2, -c.kappa2, 0.0, c.alpha2])];
        for (bulk_row, surf_row, coef) in rows {
            for j in 0..ns {
                let (cols, vals) = ops.m_trace.row(j);
                for (&m, &w) in cols.iter().zip(vals) {
                    let targets = [ou + ops.trace[m], ov + ops.trace[m], or + m, os + m];
                    for (col, k) in targets.iter().zip(coef) {
                        if k == 0.0 {
                            continue;
                        }
                        let pb = pattern.position(bulk_row + ops.trace[j], *col).expect("pattern");
                        let ps = pattern.position(surf_row + j, *col).expect("pattern");
                        exchange[pb] += g * k * w;
                        exchange[ps] -= g * k * w;
                    }
                }
            }
        }

        let reaction_pos = node_pairs
            .iter()
            .map(|&(a, c)| {
                let p = |i, j| pattern.position(i, j).expect("pattern");
                [p(a, a), p(a, c), p(c, a), p(c, c)]
            })
            .collect();
        let reaction_weight = ops
            .lumped_bulk
            .iter()
            .map(|m| m * params.kinetics.gamma_bulk)
            .chain(ops.lumped_surf.iter().map(|m| m * params.kinetics.gamma_surf))
            .collect();
        let inv_lumped = ops
            .lumped_bulk
            .iter()
            .chain(&ops.lumped_bulk)
            .chain(&ops.lumped_surf)
            .chain(&ops.lumped_surf)
            .map(|m| 1.0 / m)
            .collect();

        Ok(Self {
            params: *params,
            kinetics,
            steady,
            n_bulk: nb,
            n_surf: ns,
            pattern,
            mass,
            diffusion,
            exchange,
            reaction_pos,
            reaction_weight,
            inv_lumped,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn steady(&self) -> &SteadyState {
        &self.steady
    }

    pub fn kinetics_mode(&self) -> KineticsMode {
        self.kinetics
    }

    pub fn n_bulk(&self) -> usize {
        self.n_bulk
    }

    pub fn n_surf(&self) -> usize {
        self.n_surf
    }

    pub fn n_unknowns(&self) -> usize {
        2 * (self.n_bulk + self.n_surf)
    }

    fn pattern_mul(&self, vals: &[f64], x: &[f64], y: &mut [f64], scale: f64) {
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.pattern.row_ptr()[i]..self.pattern.row_ptr()[i + 1];
            let cols = &self.pattern.col_idx()[r.clone()];
            let s: f64 = cols.iter().zip(&vals[r]).map(|(&j, &a)| a * x[j]).sum();
            *yi += scale * s;
        }
    }

    /// Unknowns of node `k` (bulk first, then surface) in the monolithic vector.
    fn node_unknowns(&self, k: usize) -> (usize, usize) {
        if k < self.n_bulk {
            (k, self.n_bulk + k)
        } else {
            let j = k - self.n_bulk;
            (2 * self.n_bulk + j, 2 * self.n_bulk + self.n_surf + j)
        }
    }

    fn node_kinetics(&self, k: usize, a: f64, b: f64) -> ((f64, f64), [[f64; 2]; 2]) {
        let kp = &self.params.kinetics;
        let (ua, ub) = if k < self.n_bulk {
            (self.steady.u_star, self.steady.v_star)
        } else {
            (self.steady.r_star, self.steady.s_star)
        };
        match self.kinetics {
            KineticsMode::Full => (reaction(kp.a, kp.b, a, b), reaction_jacobian(a, b)),
            KineticsMode::Linearized => {
                let j = reaction_jacobian(ua, ub);
                let (f0, g0) = reaction(kp.a, kp.b, ua, ub);
                let (da, db) = (a - ua, b - ub);
                ((f0 + j[0][0] * da + j[0][1] * db, g0 + j[1][0] * da + j[1][1] * db), j)
            }
            KineticsMode::Off => ((0.0, 0.0), [[0.0; 2]; 2]),
        }
    }

    /// Right-hand side `F(y)` of `B y' = F(y)`.
    pub fn rhs(&self, y: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; y.len()];
        self.pattern_mul(&self.diffusion, y, &mut f, -1.0);
        self.pattern_mul(&self.exchange, y, &mut f, 1.0);
        if self.kinetics != KineticsMode::Off {
            for (k, &w) in self.reaction_weight.iter().enumerate() {
                let (ia, ib) = self.node_unknowns(k);
                let ((fa, fb), _) = self.node_kinetics(k, y[ia], y[ib]);
                f[ia] += w * fa;
                f[ib] += w * fb;
            }
        }
        f
    }

    /// `B x`.
    pub fn mass_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.pattern_mul(&self.mass, x, &mut y, 1.0);
        y
    }

    /// Jacobian of `B y - h F(y)`.
    pub fn implicit_jacobian(&self, y: &[f64], h: f64) -> SparseOperator {
        let mut a = self.pattern.clone();
        for (p, v) in a.values_mut().iter_mut().enumerate() {
            *v = self.mass[p] + h * (self.diffusion[p] - self.exchange[p]);
        }
        if self.kinetics != KineticsMode::Off {
            let vals = a.values_mut();
            for (k, &w) in self.reaction_weight.iter().enumerate() {
                let (ia, ib) = self.node_unknowns(k);
                let (_, j) = self.node_kinetics(k, y[ia], y[ib]);
                let pos = self.reaction_pos[k];
                vals[pos[0]] -= h * w * j[0][0];
                vals[pos[1]] -= h * w * j[0][1];
                vals[pos[2]] -= h * w * j[1][0];
                vals[pos[3]] -= h * w * j[1][1];
            }
        }
        a
    }

    fn scaled_norm(&self, r: &[f64]) -> f64 {
        r.iter()
            .zip(&self.inv_lumped)
            .fold(0.0, |m, (ri, s)| m.max((ri * s).abs()))
    }

    /// Solves `B y - h F(y) = rhs` by Newton's method from `y`, returning the
    /// scaled residual history.
    pub fn newton_solve(
        &self,
        y: &mut [f64],
        h: f64,
        rhs: &[f64],
        scheme: &SchemeConfig,
    ) -> Result<Vec<f64>> {
        let mut history = Vec::new();
        for _ in 0..=scheme.newton_max {
            let f = self.rhs(y);
            let by = self.mass_mul(y);
            let res: Vec<f64> = (0..y.len()).map(|i| by[i] - h * f[i] - rhs[i]).collect();
            let norm = self.scaled_norm(&res);
            history.push(norm);
            if !norm.is_finite() {
                break;
            }
            if norm <= scheme.newton_tol {
                return Ok(history);
            }
            if history.len() > scheme.newton_max {
                break;
            }
            let jac = self.implicit_jacobian(y, h);
            let neg: Vec<f64> = res.iter().map(|r| -r).collect();
            let delta = solve_linear(&jac, &neg, scheme.linear_tol)?;
            y.iter_mut().zip(&delta).for_each(|(yi, di)| *yi += di);
        }
        Err(Error::NewtonDiverged {
            iterations: history.len().saturating_sub(1),
            residual: history.last().copied().unwrap_or(f64::NAN),
        })
    }

    fn try_step(&self, y: &[f64], dt: f64, scheme: &SchemeConfig, report: &mut StepReport) -> Result<Vec<f64>> {
        let mut y = y.to_vec();
        for (frac, implicit, explicit) in scheme.substeps() {
            let k = frac * dt;
            let f = self.rhs(&y);
            let b = self.mass_mul(&y);
            let rhs: Vec<f64> = b.iter().zip(&f).map(|(bi, fi)| bi + explicit * k * fi).collect();
            let hist = self.newton_solve(&mut y, implicit * k, &rhs, scheme)?;
            report.newton_iterations += hist.len() - 1;
            report.residuals.push(hist);
        }
        Ok(y)
    }

    fn advance(
        &self,
        y: &[f64],
        dt: f64,
        depth: u32,
        scheme: &SchemeConfig,
        report: &mut StepReport,
    ) -> Result<Vec<f64>> {
        match self.try_step(y, dt, scheme, report) {
            Ok(next) => Ok(next),
            Err(e @ (Error::NewtonDiverged { .. } | Error::LinearSolver { .. } | Error::Breakdown(_)))
                if depth < scheme.max_halvings =>
            {
                let _ = e;
                report.halvings = report.halvings.max(depth + 1);
                let mid = self.advance(y, 0.5 * dt, depth + 1, scheme, report)?;
                self.advance(&mid, 0.5 * dt, depth + 1, scheme, report)
            }
            Err(e) => Err(e),
        }
    }

    /// One step of length `scheme.dt`, halving on solver failure.
    pub fn step(&self, state: &SystemState, scheme: &SchemeConfig) -> Result<(SystemState, StepReport)> {
        scheme.validate()?;
        state.check_sizes(self.n_bulk, self.n_surf)?;
        let mut report = StepReport::default();
        let y = self.advance(&state.pack(), scheme.dt, 0, scheme, &mut report)?;
        Ok((
            SystemState::unpack(state.t + scheme.dt, &y, self.n_bulk, self.n_surf),
            report,
        ))
    }
}

/// Convenience wrapper: one step of the full nonlinear system.
pub fn step(
    state: &SystemState,
    ops: &CoupledSystemOperators,
    params: &ModelParams,
    scheme: &SchemeConfig,
) -> Result<SystemState> {
    let sys = CoupledSystem::new(ops, params, KineticsMode::Full)?;
    Ok(sys.step(state, scheme)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{apply_coupling, assemble_operators};
    use crate::kinetics::{CouplingParams, DiffusionParams, KineticParams};
    use crate::mesh::generate_ball_mesh;

    fn setup(level: usize) -> CoupledSystemOperators {
        assemble_operators(&generate_ball_mesh(level).unwrap()).unwrap()
    }

    fn uncoupled(d_bulk: f64, d_surf: f64) -> ModelParams {
        ModelParams {
            kinetics: KineticParams::reference(),
            coupling: CouplingParams::uncoupled(),
            diffusion: DiffusionParams::new(d_bulk, d_surf).unwrap(),
        }
    }

    #[test]
    fn scheme_validation() {
        let ok = SchemeConfig::default();
        ok.validate().unwrap();
        assert!((ok.alpha - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        for bad in [
            SchemeConfig { dt: 0.0, ..ok },
            SchemeConfig { theta: 0.5, ..ok },
            SchemeConfig { alpha: 0.5, ..ok },
            SchemeConfig { newton_tol: -1.0, ..ok },
            SchemeConfig { newton_max: 0, ..ok },
        ] {
            assert!(bad.validate().is_err());
        }
        let sum: f64 = ok.substeps().iter().map(|s| s.0).sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn patch_constant_data_is_preserved() {
        let ops = setup(2);
        let sys = CoupledSystem::new(&ops, &uncoupled(3.0, 2.0), KineticsMode::Off).unwrap();
        let st = SystemState::uniform(ops.n_bulk(), ops.n_surf(), [1.3, 0.4, 2.0, 0.1]);
        let y = st.pack();
        let f = sys.rhs(&y);
        let scale: f64 = 2.0;
        assert!(f.iter().all(|x| x.abs() <= 1e-12 * scale));
        let (next, _) = sys.step(&st, &SchemeConfig::with_dt(1e-2)).unwrap();
        assert_eq!(next.pack(), y);
    }

    #[test]
    fn rhs_matches_operator_form() {
        let ops = setup(1);
        let p = ModelParams::reference(2.0, 3.0);
        let sys = CoupledSystem::new(&ops, &p, KineticsMode::Off).unwrap();
        let (nb, ns) = (ops.n_bulk(), ops.n_surf());
        let st = SystemState {
            t: 0.0,
            u: (0..nb).map(|i| (i as f64 * 0.37).sin()).collect(),
            v: (0..nb).map(|i| (i as f64 * 0.11).cos()).collect(),
            r: (0..ns).map(|i| (i as f64 * 0.53).sin()).collect(),
            s: (0..ns).map(|i| (i as f64 * 0.29).cos()).collect(),
        };
        let f = sys.rhs(&st.pack());
        let loads = apply_coupling(&ops, &p.coupling, p.kinetics.gamma_surf, &st).unwrap();
        let ku = ops.k_bulk.mul_vec(&st.u).unwrap();
        let kr = ops.k_surf.mul_vec(&st.r).unwrap();
        let ks = ops.k_surf.mul_vec(&st.s).unwrap();
        for i in 0..nb {
            assert!((f[i] - (-ku[i] + loads.u[i])).abs() < 1e-9);
        }
        for j in 0..ns {
            assert!((f[2 * nb + j] - (-kr[j] + loads.r[j])).abs() < 1e-9);
            assert!((f[2 * nb + ns + j] - (-3.0 * ks[j] + loads.s[j])).abs() < 1e-9);
        }
    }

    #[test]
    fn implicit_jacobian_matches_finite_differences() {
        let ops = setup(0);
        let p = ModelParams::reference(2.0, 3.0);
        let sys = CoupledSystem::new(&ops, &p, KineticsMode::Full).unwrap();
        let n = sys.n_unknowns();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * (i as f64).sin()).collect();
        let h = 0.01;
        let jac = sys.implicit_jacobian(&y, h).to_dense();
        let g = |y: &[f64]| -> Vec<f64> {
            let f = sys.rhs(y);
            let b = sys.mass_mul(y);
            b.iter().zip(&f).map(|(bi, fi)| bi - h * fi).collect()
        };
        let eps = 1e-6;
        for j in 0..n {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += eps;
            ym[j] -= eps;
            let (gp, gm) = (g(&yp), g(&ym));
            for i in 0..n {
                let fd = (gp[i] - gm[i]) / (2.0 * eps);
                assert!((fd - jac[(i, j)]).abs() < 1e-5 * (1.0 + fd.abs()), "({i},{j})");
            }
        }
    }

    #[test]
    fn bulk_diffusion_dissipates_energy() {
        let ops = setup(2);
        let mesh = generate_ball_mesh(2).unwrap();
        let sys = CoupledSystem::new(&ops, &uncoupled(1.0, 1.0), KineticsMode::Off).unwrap();
        let mut st = SystemState::uniform(ops.n_bulk(), ops.n_surf(), [0.0; 4]);
        // l = 2 harmonic r² P2(cos θ) ∝ 2z² - x² - y²
        for (u, p) in st.u.iter_mut().zip(&mesh.vertices) {
            *u = 2.0 * p[2] * p[2] - p[0] * p[0] - p[1] * p[1];
        }
        let energy = |u: &[f64]| {
            let mu = ops.m_bulk.mul_vec(u).unwrap();
            u.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut e = energy(&st.u);
        let scheme = SchemeConfig::with_dt(5e-3);
        for _ in 0..20 {
            st = sys.step(&st, &scheme).unwrap().0;
            let e_new = energy(&st.u);
            assert!(e_new <= e * (1.0 + 1e-12), "{e_new} > {e}");
            e = e_new;
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let ops = setup(2);
        let sys = CoupledSystem::new(&ops, &ModelParams::reference(1.0, 20.0), KineticsMode::Full)
            .unwrap();
        let ss = *sys.steady();
        let mut st = SystemState::steady(ops.n_bulk(), ops.n_surf(), &ss);
        for (i, u) in st.u.iter_mut().enumerate() {
            *u *= 1.0 + 0.3 * ((i * 7919) % 13) as f64 / 13.0;
        }
        let scheme = SchemeConfig {
            newton_tol: 1e-13,
            linear_tol: 1e-14,
            ..SchemeConfig::with_dt(2e-3)
        };
        let (_, report) = sys.step(&st, &scheme).unwrap();
        let hist = &report.residuals[0];
        assert!(hist.len() >= 3, "{hist:?}");
        let mut checked = 0;
        for w in hist.windows(2) {
            if w[0] < 1e-3 && w[1] > 1e-12 {
                assert!(w[1] <= 10.0 * w[0] * w[0], "{hist:?}");
                checked += 1;
            }
        }
        assert!(checked >= 1, "{hist:?}");
    }

    #[test]
    fn stepping_is_deterministic() {
        let ops = setup(1);
        let sys = CoupledSystem::new(&ops, &ModelParams::reference(1.0, 1.0), KineticsMode::Full)
            .unwrap();
        let mut st = SystemState::steady(ops.n_bulk(), ops.n_surf(), sys.steady());
        for (i, r) in st.r.iter_mut().enumerate() {
            *r += 0.01 * (i as f64).sin();
        }
        let scheme = SchemeConfig::with_dt(1e-3);
        let run = || {
            let mut s = st.clone();
            for _ in 0..5 {
                s = sys.step(&s, &scheme).unwrap().0;
            }
            s
        };
        let (a, b) = (run(), run());
        assert_eq!(a.pack().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                   b.pack().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn second_order_in_time() {
        // linear surface problem: r' = Δr - r + s, s' = Δs - 2 s
        let ops = setup(1);
        let mesh = generate_ball_mesh(1).unwrap();
        let sys = CoupledSystem::new(&ops, &uncoupled(1.0, 1.0), KineticsMode::Linearized)
            .unwrap();
        let ss = *sys.steady();
        let mut st0 = SystemState::steady(ops.n_bulk(), ops.n_surf(), &ss);
        for (j, &k) in mesh.surface_vertex_ids.iter().enumerate() {
            let p = mesh.vertices[k];
            st0.r[j] += 0.1 * p[2];
            st0.s[j] += 0.05 * p[0] * p[1];
        }
        let t_end = 0.02;
        let run = |dt: f64| {
            let steps = (t_end / dt).round() as usize;
            let scheme = SchemeConfig {
                newton_tol: 1e-13,
                linear_tol: 1e-14,
                ..SchemeConfig::with_dt(dt)
            };
            let mut s = st0.clone();
            for _ in 0..steps {
                s = sys.step(&s, &scheme).unwrap().0;
            }
            s.pack()
        };
        let reference = run(t_end / 512.0);
        let errs: Vec<f64> = [t_end / 8.0, t_end / 16.0, t_end / 32.0]
            .iter()
            .map(|&dt| {
                run(dt)
                    .iter()
                    .zip(&reference)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.8, "errors {errs:?}");
        }
    }
}
