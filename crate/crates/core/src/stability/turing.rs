use std::fmt;

use super::{routh_hurwitz, Condition, RouthHurwitz, Sense};
use crate::error::{Error, Result};
use crate::kinetics::{
    det2, ensure_compatible, jacobian_at, reaction_jacobian, surface_derivatives, trace2,
    CouplingParams, Mat2, ModelParams, SteadyState,
};

/// Predicted (or observed) pattern-forming outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    NoPattern,
    BulkOnly,
    SurfaceOnly,
    Both,
    /// The kinetics alone are unstable, so the diffusion-driven picture does
    /// not apply.
    HomogeneousUnstable,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::NoPattern => "no-pattern",
            Regime::BulkOnly => "bulk-only",
            Regime::SurfaceOnly => "surface-only",
            Regime::Both => "both",
            Regime::HomogeneousUnstable => "homogeneous-unstable",
        }
    }

    fn from_flags(homogeneous_stable: bool, bulk: bool, surf: bool) -> Self {
        match (homogeneous_stable, bulk, surf) {
            (false, _, _) => Regime::HomogeneousUnstable,
            (true, false, false) => Regime::NoPattern,
            (true, true, false) => Regime::BulkOnly,
            (true, false, true) => Regime::SurfaceOnly,
            (true, true, true) => Regime::Both,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Diffusion ratio above which a stable 2×2 kinetic block admits an unstable
/// band of spatial modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalDiffusion {
    Finite(f64),
    /// `d f_u + g_v` never becomes positive (or the discriminant never does),
    /// so no diffusion ratio destabilizes the block.
    Unbounded,
}

impl CriticalDiffusion {
    pub fn value(&self) -> f64 {
        match self {
            CriticalDiffusion::Finite(d) => *d,
            CriticalDiffusion::Unbounded => f64::INFINITY,
        }
    }
}

/// Larger root `d_c` of `(d f_u + g_v)² = 4 d det` with `d f_u + g_v > 0`.
///
/// `m` holds `[[f_u, f_v], [g_u, g_v]]` per unit `gamma`. The block must be
/// stable on its own (`tr < 0`, `det > 0`).
pub fn critical_diffusion(m: &Mat2) -> Result<CriticalDiffusion> {
    let (fu, gv) = (m[0][0], m[1][1]);
    let (tr, det) = (trace2(m), det2(m));
    if !(tr < 0.0 && det > 0.0) {
        return Err(Error::Precondition(format!(
            "critical diffusion needs a stable kinetic block (trace {tr} < 0, det {det} > 0)"
        )));
    }
    if fu <= 0.0 {
        return Ok(CriticalDiffusion::Unbounded);
    }
    // fu² d² + (2 fu gv - 4 det) d + gv² = 0
    let qa = fu * fu;
    let qb = 2.0 * fu * gv - 4.0 * det;
    let qc = gv * gv;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Ok(CriticalDiffusion::Unbounded);
    }
    let t = -0.5 * (qb + qb.signum() * disc.sqrt());
    let (r1, r2) = (t / qa, qc / t);
    let d = r1.max(r2);
    if d > 0.0 && d * fu + gv > 0.0 {
        Ok(CriticalDiffusion::Finite(d))
    } else {
        Ok(CriticalDiffusion::Unbounded)
    }
}

/// The two diffusion-driven instability inequalities for one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuringPair {
    pub d: f64,
    /// `d f_u + g_v > 0`
    pub linear: Condition,
    /// `(d f_u + g_v)² - 4 d det > 0`
    pub discriminant: Condition,
}

impl TuringPair {
    pub fn holds(&self) -> bool {
        self.linear.holds() && self.discriminant.holds()
    }
}

pub fn turing_pair(m: &Mat2, d: f64) -> TuringPair {
    let (fu, gv) = (m[0][0], m[1][1]);
    let lin = d * fu + gv;
    let lin_scale = (d * fu).abs() + gv.abs();
    let det_scale = (m[0][0] * m[1][1]).abs() + (m[0][1] * m[1][0]).abs();
    TuringPair {
        d,
        linear: Condition::new("turing_linear", lin, lin_scale, Sense::Positive),
        discriminant: Condition::new(
            "turing_discriminant",
            lin * lin - 4.0 * d * det2(m),
            lin_scale * lin_scale + 4.0 * d * det_scale,
            Sense::Positive,
        ),
    }
}

/// Full linear-stability verdict for one parameter point.
///
/// The regime is decided with the exchange terms included in the surface
/// Jacobian. The `*_uncoupled` fields repeat the analysis with the surface
/// kinetics alone and are informational.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub params: ModelParams,
    pub steady: SteadyState,
    pub homogeneous: RouthHurwitz,
    pub homogeneous_uncoupled: RouthHurwitz,
    /// Per-unit-gamma derivatives used for the diffusion conditions.
    pub bulk_derivatives: Mat2,
    pub surf_derivatives: Mat2,
    pub surf_derivatives_uncoupled: Mat2,
    pub turing_bulk: TuringPair,
    pub turing_surf: TuringPair,
    pub turing_surf_uncoupled: TuringPair,
    pub critical_bulk: Option<CriticalDiffusion>,
    pub critical_surf: Option<CriticalDiffusion>,
    pub critical_surf_uncoupled: Option<CriticalDiffusion>,
    pub regime: Regime,
    pub regime_uncoupled: Regime,
}

pub fn classify_regime(params: &ModelParams) -> Result<StabilityReport> {
    params.validate()?;
    let ss = ensure_compatible(params)?;
    let w = ss.concentrations();
    let homogeneous = routh_hurwitz(&jacobian_at(&params.kinetics, &params.coupling, &w));
    let homogeneous_uncoupled = routh_hurwitz(&jacobian_at(
        &params.kinetics,
        &CouplingParams::uncoupled(),
        &w,
    ));

    let bulk = reaction_jacobian(ss.u_star, ss.v_star);
    let surf = surface_derivatives(&params.coupling, ss.r_star, ss.s_star, true);
    let surf_unc = surface_derivatives(&params.coupling, ss.r_star, ss.s_star, false);
    let d = &params.diffusion;
    let turing_bulk = turing_pair(&bulk, d.d_bulk);
    let turing_surf = turing_pair(&surf, d.d_surf);
    let turing_surf_uncoupled = turing_pair(&surf_unc, d.d_surf);

    let regime = Regime::from_flags(
        homogeneous.all_hold(),
        turing_bulk.holds(),
        turing_surf.holds(),
    );
    let regime_uncoupled = Regime::from_flags(
        homogeneous_uncoupled.all_hold(),
        turing_bulk.holds(),
        turing_surf_uncoupled.holds(),
    );
    Ok(StabilityReport {
        params: *params,
        steady: ss,
        homogeneous,
        homogeneous_uncoupled,
        bulk_derivatives: bulk,
        surf_derivatives: surf,
        surf_derivatives_uncoupled: surf_unc,
        turing_bulk,
        turing_surf,
        turing_surf_uncoupled,
        critical_bulk: critical_diffusion(&bulk).ok(),
        critical_surf: critical_diffusion(&surf).ok(),
        critical_surf_uncoupled: critical_diffusion(&surf_unc).ok(),
        regime,
        regime_uncoupled,
    })
}
