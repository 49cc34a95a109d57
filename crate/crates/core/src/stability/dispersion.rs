use num_complex::Complex64;

use super::quadratic_roots;
use crate::error::Result;
use crate::kinetics::{
    det2, reaction_jacobian, steady_state, surface_derivatives, DiffusionParams, KineticParams,
    Mat2, ModelParams,
};

/// Growth rates of one spherical mode `l` for the bulk and surface branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRow {
    pub l: u32,
    pub k2: u64,
    pub tr_bulk: f64,
    pub det_bulk: f64,
    pub tr_surf: f64,
    pub det_surf: f64,
    pub lambda_bulk: [Complex64; 2],
    pub lambda_surf: [Complex64; 2],
    pub max_re_bulk: f64,
    pub max_re_surf: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DispersionTable {
    pub rows: Vec<DispersionRow>,
}

impl DispersionTable {
    /// Modes with `l ≥ 1` whose bulk branch has a positive growth rate.
    pub fn unstable_bulk(&self) -> Vec<u32> {
        self.rows
            .iter()
            .filter(|r| r.l > 0 && r.max_re_bulk > 0.0)
            .map(|r| r.l)
            .collect()
    }

    pub fn unstable_surf(&self) -> Vec<u32> {
        self.rows
            .iter()
            .filter(|r| r.l > 0 && r.max_re_surf > 0.0)
            .map(|r| r.l)
            .collect()
    }

    /// Row with the largest surface growth rate.
    pub fn fastest_surf(&self) -> Option<&DispersionRow> {
        self.rows
            .iter()
            .max_by(|a, b| a.max_re_surf.total_cmp(&b.max_re_surf))
    }

    pub fn fastest_bulk(&self) -> Option<&DispersionRow> {
        self.rows
            .iter()
            .max_by(|a, b| a.max_re_bulk.total_cmp(&b.max_re_bulk))
    }
}

/// `(Tr M, Det M)` for one branch at modal eigenvalue `k2`, where `m` holds the
/// kinetic derivatives per unit `gamma`:
///
/// ```text
/// Tr M  = (d + 1) k² - γ (f_u + g_v)
/// Det M = d k⁴ - γ (d f_u + g_v) k² + γ² (f_u g_v - f_v g_u)
/// ```
pub fn dispersion_coefficients(m: &Mat2, gamma: f64, d: f64, k2: f64) -> (f64, f64) {
    let (fu, gv) = (m[0][0], m[1][1]);
    let tr = (d + 1.0) * k2 - gamma * (fu + gv);
    let det = d * k2 * k2 - gamma * (d * fu + gv) * k2 + gamma * gamma * det2(m);
    (tr, det)
}

/// Open `k²` interval on which `Det M < 0`, if any.
pub fn unstable_band(m: &Mat2, gamma: f64, d: f64) -> Option<(f64, f64)> {
    // d k⁴ + p k² + q with p = -γ(d f_u + g_v), q = γ² det
    let p = -gamma * (d * m[0][0] + m[1][1]);
    let q = gamma * gamma * det2(m);
    let [hi, lo] = quadratic_roots(p / d, q / d);
    if hi.im != 0.0 || hi.re == lo.re || hi.re <= 0.0 {
        return None;
    }
    Some((lo.re, hi.re))
}

fn branch(m: &Mat2, gamma: f64, d: f64, k2: f64) -> (f64, f64, [Complex64; 2], f64) {
    let (tr, det) = dispersion_coefficients(m, gamma, d, k2);
    let roots = quadratic_roots(tr, det);
    let max_re = roots[0].re.max(roots[1].re);
    (tr, det, roots, max_re)
}

/// Evaluates both branches for `l = 0..=l_max` with `k² = l(l+1)`.
///
/// `bulk` and `surf` are kinetic derivatives per unit `gamma` at the steady
/// state. Because the linearized operator is block lower triangular, each
/// branch is the root pair of its own quadratic.
pub fn dispersion_scan(
    bulk: &Mat2,
    surf: &Mat2,
    p: &KineticParams,
    d: &DiffusionParams,
    l_max: u32,
) -> DispersionTable {
    let rows = (0..=l_max)
        .map(|l| {
            let k2 = u64::from(l) * (u64::from(l) + 1);
            let (tr_bulk, det_bulk, lambda_bulk, max_re_bulk) =
                branch(bulk, p.gamma_bulk, d.d_bulk, k2 as f64);
            let (tr_surf, det_surf, lambda_surf, max_re_surf) =
                branch(surf, p.gamma_surf, d.d_surf, k2 as f64);
            DispersionRow {
                l,
                k2,
                tr_bulk,
                det_bulk,
                tr_surf,
                det_surf,
                lambda_bulk,
                lambda_surf,
                max_re_bulk,
                max_re_surf,
            }
        })
        .collect();
    DispersionTable { rows }
}

/// Dispersion table at the model's steady state. With `coupled_surface` the
/// surface derivatives include the `-alpha` exchange contributions.
pub fn dispersion_scan_for(
    params: &ModelParams,
    coupled_surface: bool,
    l_max: u32,
) -> Result<DispersionTable> {
    let ss = steady_state(&params.kinetics)?;
    let bulk = reaction_jacobian(ss.u_star, ss.v_star);
    let surf = surface_derivatives(&params.coupling, ss.r_star, ss.s_star, coupled_surface);
    Ok(dispersion_scan(
        &bulk,
        &surf,
        &params.kinetics,
        &params.diffusion,
        l_max,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::CouplingParams;
    use crate::stability::{quartic_factors, Quadratic};
    use crate::kinetics::JacobianBlocks;

    const SCHNAK: Mat2 = [[0.8, 1.0], [-1.8, -1.0]];

    fn params(d: f64) -> (KineticParams, DiffusionParams) {
        (KineticParams::reference(), DiffusionParams { d_bulk: d, d_surf: d })
    }

    #[test]
    fn zero_mode_matches_homogeneous_factors() {
        let (p, d) = params(20.0);
        let t = dispersion_scan(&SCHNAK, &SCHNAK, &p, &d, 0);
        let scaled = SCHNAK.map(|row| row.map(|x| 500.0 * x));
        let j = JacobianBlocks { j_bulk: scaled, j_surf: scaled, j_cross: [[0.0; 2]; 2] };
        let [fb, _]: [Quadratic; 2] = quartic_factors(&j);
        let row = &t.rows[0];
        assert_eq!(row.k2, 0);
        assert!((row.tr_bulk - fb.linear).abs() < 1e-9);
        assert!((row.det_bulk - fb.constant).abs() < 1e-6);
    }

    #[test]
    fn band_at_d20() {
        let (p, d) = params(20.0);
        let (lo, hi) = unstable_band(&SCHNAK, p.gamma_bulk, d.d_bulk).unwrap();
        let root = 90625f64.sqrt();
        assert!((lo - (375.0 - root) / 2.0).abs() < 1e-9);
        assert!((hi - (375.0 + root) / 2.0).abs() < 1e-9);
        let t = dispersion_scan(&SCHNAK, &SCHNAK, &p, &d, 50);
        let expected: Vec<u32> = (6..=17).collect();
        assert_eq!(t.unstable_bulk(), expected);
        assert_eq!(t.unstable_surf(), expected);
        for l in t.unstable_bulk() {
            let k2 = (l * (l + 1)) as f64;
            assert!(lo < k2 && k2 < hi);
        }
    }

    #[test]
    fn equal_diffusion_is_stable() {
        let (p, d) = params(1.0);
        let t = dispersion_scan(&SCHNAK, &SCHNAK, &p, &d, 50);
        assert!(t.rows.iter().all(|r| r.max_re_bulk < 0.0 && r.max_re_surf < 0.0));
        assert!(unstable_band(&SCHNAK, 500.0, 1.0).is_none());
    }

    #[test]
    fn k2_is_exact_integer() {
        let (p, d) = params(20.0);
        let t = dispersion_scan(&SCHNAK, &SCHNAK, &p, &d, 50);
        for r in &t.rows {
            assert_eq!(r.k2, u64::from(r.l) * u64::from(r.l + 1));
        }
    }

    #[test]
    fn roots_satisfy_their_quadratics() {
        let params = ModelParams::reference(20.0, 20.0);
        for coupled in [false, true] {
            let t = dispersion_scan_for(&params, coupled, 50).unwrap();
            for r in &t.rows {
                for (tr, det, roots) in [
                    (r.tr_bulk, r.det_bulk, r.lambda_bulk),
                    (r.tr_surf, r.det_surf, r.lambda_surf),
                ] {
                    let q = Quadratic { linear: tr, constant: det };
                    for z in roots {
                        let scale = 1.0f64.max(tr.abs()).max(det.abs()).max(z.norm_sqr());
                        assert!(q.eval(z).norm() <= 1e-9 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_scaling_maps_band() {
        for c in [0.5, 2.0, 3.7] {
            let (lo, hi) = unstable_band(&SCHNAK, 500.0, 20.0).unwrap();
            let (lo_c, hi_c) = unstable_band(&SCHNAK, 500.0 * c, 20.0).unwrap();
            assert!((lo_c - c * lo).abs() <= 1e-9 * lo_c);
            assert!((hi_c - c * hi).abs() <= 1e-9 * hi_c);
            for k2 in [10.0, 50.0, 200.0] {
                let (tr, det) = dispersion_coefficients(&SCHNAK, 500.0, 20.0, k2);
                let (tr_c, det_c) = dispersion_coefficients(&SCHNAK, 500.0 * c, 20.0, c * k2);
                assert!((tr_c - c * tr).abs() <= 1e-9 * tr_c.abs().max(1.0));
                assert!((det_c - c * c * det).abs() <= 1e-9 * det_c.abs().max(1.0));
            }
        }
    }

    #[test]
    fn coupled_surface_derivatives_shift_diagonal() {
        let c = CouplingParams::reference();
        let m = surface_derivatives(&c, 1.0, 0.9, true);
        assert!((m[0][0] - (0.8 - 5.0 / 12.0)).abs() < 1e-15);
        assert!((m[1][1] + 6.0).abs() < 1e-15);
    }
}
