//! Activator-depleted reaction kinetics with linear bulk-surface exchange.
//!
//! Bulk species `(u, v)` react with `f(u,v) = a - u + u²v`, `g(u,v) = b - u²v`
//! scaled by `gamma_bulk`. Surface species `(r, s)` use the same kinetics scaled
//! by `gamma_surf` and exchange mass with the bulk traces through
//!
//! ```text
//! h1 = alpha1 r - beta1 u - kappa1 v
//! h2 = alpha2 s - beta2 u - kappa2 v
//! ```
//!
//! The exchange functions are kept unscaled here; callers apply `gamma_surf`.

use crate::error::{check_finite, check_positive, Error, Result};

/// Dense 2×2 block, row major.
pub type Mat2 = [[f64; 2]; 2];

pub fn trace2(m: &Mat2) -> f64 {
    m[0][0] + m[1][1]
}

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticParams {
    pub a: f64,
    pub b: f64,
    pub gamma_bulk: f64,
    pub gamma_surf: f64,
}

impl KineticParams {
    pub fn new(a: f64, b: f64, gamma_bulk: f64, gamma_surf: f64) -> Result<Self> {
        check_positive("a", a)?;
        check_positive("b", b)?;
        check_positive("gamma_bulk", gamma_bulk)?;
        check_positive("gamma_surf", gamma_surf)?;
        Ok(Self {
            a,
            b,
            gamma_bulk,
            gamma_surf,
        })
    }

    /// `a = 0.1`, `b = 0.9`, both length scales 500.
    pub fn reference() -> Self {
        Self {
            a: 0.1,
            b: 0.9,
            gamma_bulk: 500.0,
            gamma_surf: 500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CouplingParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl CouplingParams {
    pub fn new(
        alpha1: f64,
        alpha2: f64,
        beta1: f64,
        beta2: f64,
        kappa1: f64,
        kappa2: f64,
    ) -> Result<Self> {
        check_finite("alpha1", alpha1)?;
        check_finite("alpha2", alpha2)?;
        check_finite("beta1", beta1)?;
        check_finite("beta2", beta2)?;
        check_finite("kappa1", kappa1)?;
        check_finite("kappa2", kappa2)?;
        Ok(Self {
            alpha1,
            alpha2,
            beta1,
            beta2,
            kappa1,
            kappa2,
        })
    }

    /// `alpha1 = beta1 = 5/12`, `alpha2 = kappa2 = 5`, `kappa1 = beta2 = 0`.
    pub fn reference() -> Self {
        Self {
            alpha1: 5.0 / 12.0,
            alpha2: 5.0,
            beta1: 5.0 / 12.0,
            beta2: 0.0,
            kappa1: 0.0,
            kappa2: 5.0,
        }
    }

    pub fn uncoupled() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        [
            self.alpha1,
            self.alpha2,
            self.beta1,
            self.beta2,
            self.kappa1,
            self.kappa2,
        ]
        .iter()
        .all(|&x| x == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    pub d_bulk: f64,
    pub d_surf: f64,
}

impl DiffusionParams {
    pub fn new(d_bulk: f64, d_surf: f64) -> Result<Self> {
        check_positive("d_bulk", d_bulk)?;
        check_positive("d_surf", d_surf)?;
        Ok(Self { d_bulk, d_surf })
    }
}

/// The full parameter point of the coupled model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kinetics: KineticParams,
    pub coupling: CouplingParams,
    pub diffusion: DiffusionParams,
}

impl ModelParams {
    pub fn reference(d_bulk: f64, d_surf: f64) -> Self {
        Self {
            kinetics: KineticParams::reference(),
            coupling: CouplingParams::reference(),
            diffusion: DiffusionParams { d_bulk, d_surf },
        }
    }

    /// Re-runs every constructor check on the stored values.
    pub fn validate(&self) -> Result<()> {
        let k = &self.kinetics;
        KineticParams::new(k.a, k.b, k.gamma_bulk, k.gamma_surf)?;
        let c = &self.coupling;
        CouplingParams::new(c.alpha1, c.alpha2, c.beta1, c.beta2, c.kappa1, c.kappa2)?;
        DiffusionParams::new(self.diffusion.d_bulk, self.diffusion.d_surf)?;
        Ok(())
    }
}

/// Point values of the four species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concentrations {
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub s: f64,
}

impl Concentrations {
    pub fn new(u: f64, v: f64, r: f64, s: f64) -> Self {
        Self { u, v, r, s }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.u, self.v, self.r, self.s]
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }
}

/// The spatially uniform steady state; bulk and surface values coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub u_star: f64,
    pub v_star: f64,
    pub r_star: f64,
    pub s_star: f64,
}

impl SteadyState {
    pub fn concentrations(&self) -> Concentrations {
        Concentrations::new(self.u_star, self.v_star, self.r_star, self.s_star)
    }
}

/// Partial derivatives of the 4-species kinetics.
///
/// `j_bulk = ∂(f1,f2)/∂(u,v)`, `j_surf = ∂(f3,f4)/∂(r,s)` and
/// `j_cross = ∂(f3,f4)/∂(u,v)`. The bulk kinetics do not depend on `(r, s)`,
/// so the assembled 4×4 Jacobian is block lower triangular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianBlocks {
    pub j_bulk: Mat2,
    pub j_surf: Mat2,
    pub j_cross: Mat2,
}

impl JacobianBlocks {
    pub fn full(&self) -> [[f64; 4]; 4] {
        let (b, s, c) = (&self.j_bulk, &self.j_surf, &self.j_cross);
        [
            [b[0][0], b[0][1], 0.0, 0.0],
            [b[1][0], b[1][1], 0.0, 0.0],
            [c[0][0], c[0][1], s[0][0], s[0][1]],
            [c[1][0], c[1][1], s[1][0], s[1][1]],
        ]
    }

    pub fn trace_bulk(&self) -> f64 {
        trace2(&self.j_bulk)
    }

    pub fn trace_surf(&self) -> f64 {
        trace2(&self.j_surf)
    }

    pub fn det_bulk(&self) -> f64 {
        det2(&self.j_bulk)
    }

    pub fn det_surf(&self) -> f64 {
        det2(&self.j_surf)
    }
}

/// Unscaled activator-depleted reaction `(f, g)` at `(x, y)`.
#[inline]
pub fn reaction(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    let x2y = x * x * y;
    (a - x + x2y, b - x2y)
}

/// Unscaled derivatives `[[f_x, f_y], [g_x, g_y]]` of the reaction at `(x, y)`.
#[inline]
pub fn reaction_jacobian(x: f64, y: f64) -> Mat2 {
    [[-1.0 + 2.0 * x * y, x * x], [-2.0 * x * y, -x * x]]
}

/// Reaction values `(f1, f2, f3, f4)`.
pub fn eval_kinetics(p: &KineticParams, c: &CouplingParams, w: &Concentrations) -> [f64; 4] {
    let (f, g) = reaction(p.a, p.b, w.u, w.v);
    let (fs, gs) = reaction(p.a, p.b, w.r, w.s);
    let (h1, h2) = eval_coupling(c, w);
    [
        p.gamma_bulk * f,
        p.gamma_bulk * g,
        p.gamma_surf * (fs - h1),
        p.gamma_surf * (gs - h2),
    ]
}

/// Exchange functions `(h1, h2)`, without the `gamma_surf` factor.
#[inline]
pub fn eval_coupling(c: &CouplingParams, w: &Concentrations) -> (f64, f64) {
    (
        c.alpha1 * w.r - c.beta1 * w.u - c.kappa1 * w.v,
        c.alpha2 * w.s - c.beta2 * w.u - c.kappa2 * w.v,
    )
}

pub fn steady_state(p: &KineticParams) -> Result<SteadyState> {
    check_finite("a", p.a)?;
    check_finite("b", p.b)?;
    let sum = p.a + p.b;
    if sum == 0.0 {
        return Err(Error::Degenerate("a + b = 0 has no steady state".into()));
    }
    let u = sum;
    let v = p.b / (sum * sum);
    Ok(SteadyState {
        u_star: u,
        v_star: v,
        r_star: u,
        s_star: v,
    })
}

/// `(beta1 - alpha1)(kappa2 - alpha2) - kappa1*beta2`; zero iff the uniform
/// steady state satisfies the exchange boundary conditions.
pub fn compatibility_residual(c: &CouplingParams) -> f64 {
    (c.beta1 - c.alpha1) * (c.kappa2 - c.alpha2) - c.kappa1 * c.beta2
}

/// Checks that a uniform steady state exists for `params`: the compatibility
/// residual vanishes and so do both exchange terms at the steady state.
pub fn ensure_compatible(params: &ModelParams) -> Result<SteadyState> {
    let c = &params.coupling;
    let residual = compatibility_residual(c);
    let scale = (c.beta1.abs() + c.alpha1.abs()) * (c.kappa2.abs() + c.alpha2.abs())
        + (c.kappa1 * c.beta2).abs();
    if residual.abs() > 1e-12 * scale {
        return Err(Error::Incompatible { residual });
    }
    let ss = steady_state(&params.kinetics)?;
    let (h1, h2) = eval_coupling(c, &ss.concentrations());
    let tol = 1e-12 * (1.0 + ss.u_star + ss.v_star);
    let s1 = (c.alpha1.abs() + c.beta1.abs() + c.kappa1.abs()) * tol;
    let s2 = (c.alpha2.abs() + c.beta2.abs() + c.kappa2.abs()) * tol;
    if h1.abs() > s1 || h2.abs() > s2 {
        return Err(Error::SteadyStateExchange { h1, h2 });
    }
    Ok(ss)
}

pub fn jacobian_at(p: &KineticParams, c: &CouplingParams, w: &Concentrations) -> JacobianBlocks {
    let gb = p.gamma_bulk;
    let gs = p.gamma_surf;
    let rb = reaction_jacobian(w.u, w.v);
    let rs = reaction_jacobian(w.r, w.s);
    JacobianBlocks {
        j_bulk: [[gb * rb[0][0], gb * rb[0][1]], [gb * rb[1][0], gb * rb[1][1]]],
        j_surf: [
            [gs * (rs[0][0] - c.alpha1), gs * rs[0][1]],
            [gs * rs[1][0], gs * (rs[1][1] - c.alpha2)],
        ],
        j_cross: [[gs * c.beta1, gs * c.kappa1], [gs * c.beta2, gs * c.kappa2]],
    }
}

/// Unscaled derivatives of the surface kinetics `(f_r, f_s, g_r, g_s)`,
/// optionally including the `-alpha` contributions of the exchange terms.
pub fn surface_derivatives(c: &CouplingParams, r: f64, s: f64, coupled: bool) -> Mat2 {
    let mut m = reaction_jacobian(r, s);
    if coupled {
        m[0][0] -= c.alpha1;
        m[1][1] -= c.alpha2;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;
    use proptest::prelude::*;

    fn reference_state() -> Concentrations {
        Concentrations::new(1.0, 0.9, 1.0, 0.9)
    }

    #[test]
    fn kinetics_vanish_at_reference_equilibrium() {
        let f = eval_kinetics(&KineticParams::reference(), &CouplingParams::reference(), &reference_state());
        for x in f {
            assert!(x.abs() < 1e-12, "{f:?}");
        }
    }

    #[test]
    fn kinetics_at_origin_are_source_terms() {
        let p = KineticParams::new(0.3, 0.7, 2.0, 5.0).unwrap();
        let c = CouplingParams::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0).unwrap();
        let f = eval_kinetics(&p, &c, &Concentrations::new(0.0, 0.0, 0.0, 0.0));
        assert_eq!(f, [0.6, 1.4, 1.5, 3.5]);
    }

    #[test]
    fn kinetics_direct_evaluation() {
        let p = KineticParams::new(0.1, 0.9, 1.0, 1.0).unwrap();
        let f = eval_kinetics(&p, &CouplingParams::uncoupled(), &Concentrations::new(2.0, 1.0, 2.0, 1.0));
        let expected = [2.1, -3.1, 2.1, -3.1];
        for (x, e) in f.iter().zip(expected) {
            assert!((x - e).abs() < 1e-14);
        }
    }

    #[test]
    fn coupling_examples() {
        let (h1, h2) = eval_coupling(&CouplingParams::reference(), &reference_state());
        assert!(h1.abs() < 1e-15 && h2.abs() < 1e-15);
        assert_eq!(eval_coupling(&CouplingParams::uncoupled(), &reference_state()), (0.0, 0.0));
        let c = CouplingParams {
            alpha1: 1.0,
            beta1: 1.0,
            kappa1: 1.0,
            ..Default::default()
        };
        let (h1, _) = eval_coupling(&c, &Concentrations::new(1.0, 1.0, 1.0, 0.0));
        assert_eq!(h1, -1.0);
    }

    #[test]
    fn steady_state_examples() {
        let ss = steady_state(&KineticParams::reference()).unwrap();
        assert_eq!((ss.u_star, ss.v_star, ss.r_star, ss.s_star), (1.0, 0.9, 1.0, 0.9));
        let ss = steady_state(&KineticParams { a: 0.0, b: 1.0, gamma_bulk: 1.0, gamma_surf: 1.0 }).unwrap();
        assert_eq!(ss.concentrations().as_array(), [1.0; 4]);
        let ss = steady_state(&KineticParams { a: 1.0, b: 1.0, gamma_bulk: 1.0, gamma_surf: 1.0 }).unwrap();
        assert_eq!(ss.concentrations().as_array(), [2.0, 0.25, 2.0, 0.25]);
        let degenerate = KineticParams { a: 0.0, b: 0.0, gamma_bulk: 1.0, gamma_surf: 1.0 };
        assert!(matches!(steady_state(&degenerate), Err(Error::Degenerate(_))));
    }

    #[test]
    fn compatibility_examples() {
        assert_eq!(compatibility_residual(&CouplingParams::reference()), 0.0);
        let c = CouplingParams { alpha1: 2.0, beta1: 2.0, kappa1: 0.0, beta2: 7.0, alpha2: 1.0, kappa2: 3.0 };
        assert_eq!(compatibility_residual(&c), 0.0);
        let c = CouplingParams { alpha1: 0.0, beta1: 1.0, alpha2: 0.0, kappa2: 1.0, kappa1: 1.0, beta2: 1.0 };
        assert_eq!(compatibility_residual(&c), 0.0);
        let c = CouplingParams { beta1: 1.0, kappa2: 4.0, ..CouplingParams::reference() };
        assert!((compatibility_residual(&c) + 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn compatibility_requires_vanishing_exchange() {
        assert!(ensure_compatible(&ModelParams::reference(1.0, 20.0)).is_ok());
        let mut p = ModelParams::reference(1.0, 20.0);
        p.coupling.beta1 += 1e-6;
        // kappa2 = alpha2 makes the residual blind to beta1, but h1 no longer
        // vanishes at the steady state.
        assert_eq!(compatibility_residual(&p.coupling), 0.0);
        assert!(matches!(ensure_compatible(&p), Err(Error::SteadyStateExchange { .. })));
        let mut p = ModelParams::reference(1.0, 20.0);
        p.coupling.beta1 = 1.0;
        p.coupling.kappa2 = 4.0;
        assert!(matches!(ensure_compatible(&p), Err(Error::Incompatible { .. })));
    }

    #[test]
    fn jacobian_examples() {
        let p = KineticParams::reference();
        let c = CouplingParams::reference();
        let j = jacobian_at(&p, &c, &reference_state());
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs().max(1.0);
        let eb = [[400.0, 500.0], [-900.0, -500.0]];
        let es = [[500.0 * (0.8 - 5.0 / 12.0), 500.0], [-900.0, -3000.0]];
        for i in 0..2 {
            for k in 0..2 {
                assert!(close(j.j_bulk[i][k], eb[i][k]), "{:?}", j.j_bulk);
                assert!(close(j.j_surf[i][k], es[i][k]), "{:?}", j.j_surf);
            }
        }
        let zero = KineticParams { gamma_bulk: 0.0, ..p };
        assert_eq!(jacobian_at(&zero, &c, &reference_state()).j_bulk, [[0.0; 2]; 2]);
    }

    #[test]
    fn constructors_reject_bad_values() {
        assert!(KineticParams::new(0.1, 0.9, 0.0, 1.0).is_err());
        assert!(KineticParams::new(f64::NAN, 0.9, 1.0, 1.0).is_err());
        assert!(CouplingParams::new(f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(DiffusionParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn full_jacobian_spectrum_is_union_of_blocks() {
        let p = KineticParams::new(0.2, 1.3, 3.0, 2.0).unwrap();
        let c = CouplingParams::new(0.4, 1.1, 0.7, -0.3, 0.2, 0.9).unwrap();
        let j = jacobian_at(&p, &c, &Concentrations::new(1.2, 0.8, 0.6, 1.9));
        let full = j.full();
        assert_eq!([full[0][2], full[0][3], full[1][2], full[1][3]], [0.0; 4]);
        let m = Matrix4::from_fn(|i, k| full[i][k]);
        let mut dense: Vec<_> = m.complex_eigenvalues().iter().copied().collect();
        let mut blocks = Vec::new();
        for b in [j.j_bulk, j.j_surf] {
            let (tr, det) = (trace2(&b), det2(&b));
            let disc = num_complex::Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
            blocks.push((tr + disc) / 2.0);
            blocks.push((tr - disc) / 2.0);
        }
        let key = |z: &num_complex::Complex64| (z.re, z.im);
        dense.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        blocks.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (a, b) in dense.iter().zip(&blocks) {
            assert!((a - b).norm() < 1e-10, "{dense:?} vs {blocks:?}");
        }
    }

    proptest! {
        #[test]
        fn jacobian_matches_central_differences(
            u in 0.1f64..10.0, v in 0.1f64..10.0, r in 0.1f64..10.0, s in 0.1f64..10.0,
        ) {
            let p = KineticParams::new(0.1, 0.9, 3.0, 2.0).unwrap();
            let c = CouplingParams::new(0.5, 1.5, 0.25, -0.5, 0.75, 2.0).unwrap();
            let w = [u, v, r, s];
            let full = jacobian_at(&p, &c, &Concentrations::from_array(w)).full();
            let h = 1e-6;
            for col in 0..4 {
                let mut plus = w;
                let mut minus = w;
                plus[col] += h;
                minus[col] -= h;
                let fp = eval_kinetics(&p, &c, &Concentrations::from_array(plus));
                let fm = eval_kinetics(&p, &c, &Concentrations::from_array(minus));
                for row in 0..4 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    let exact = full[row][col];
                    let scale = exact.abs().max(1.0);
                    prop_assert!((fd - exact).abs() <= 1e-5 * scale,
                        "row {row} col {col}: fd {fd} exact {exact}");
                }
            }
        }

        #[test]
        fn exchange_free_coupling_is_compatible_and_stationary(
            a in 0.01f64..2.0, b in 0.01f64..2.0, alpha1 in -3.0f64..3.0, kappa1 in -3.0f64..3.0,
            alpha2 in -3.0f64..3.0, beta2 in -3.0f64..3.0,
        ) {
            // Compatibility is the solvability condition of h1 = h2 = 0 at
            // u = r, v = s; pick the remaining coefficients so the exchange
            // vanishes at the actual steady state.
            let p = KineticParams::new(a, b, 500.0, 500.0).unwrap();
            let ss = steady_state(&p).unwrap();
            let beta1 = alpha1 - kappa1 * ss.v_star / ss.u_star;
            let kappa2 = alpha2 - beta2 * ss.u_star / ss.v_star;
            let c = CouplingParams::new(alpha1, alpha2, beta1, beta2, kappa1, kappa2).unwrap();
            let scale = 1.0 + (alpha1.abs() + kappa1.abs()) * (alpha2.abs() + beta2.abs())
                * (1.0 + ss.u_star / ss.v_star) * (1.0 + ss.v_star / ss.u_star);
            prop_assert!(compatibility_residual(&c).abs() <= 1e-12 * scale);
            let f = eval_kinetics(&p, &c, &ss.concentrations());
            for x in f {
                prop_assert!(x.abs() <= 1e-9 * scale);
            }
        }
    }
}
