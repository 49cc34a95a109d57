//! Linear stability of the uniform steady state.
//!
//! The homogeneous problem reduces to the quartic `det(λI - J) = 0`, which
//! factors into one quadratic per block because `J` is block lower triangular.
//! Spatial modes on the unit sphere (and, by the same ansatz, in the ball) enter
//! through `k² = l(l+1)`.

mod dispersion;
mod report;
mod turing;

pub use dispersion::{
    dispersion_coefficients, dispersion_scan, dispersion_scan_for, unstable_band, DispersionRow,
    DispersionTable,
};
pub use report::{dispersion_csv, report_csv, report_text};
pub use turing::{
    classify_regime, critical_diffusion, turing_pair, CriticalDiffusion, Regime, StabilityReport,
    TuringPair,
};

use num_complex::Complex64;

use crate::kinetics::{det2, trace2, JacobianBlocks, Mat2};

/// Relative width of the band in which a strict inequality is reported as
/// undecided.
pub const MARGINAL_RELATIVE: f64 = 1e-10;

/// Coefficients of `λ⁴ + a1 λ³ + a2 λ² + a3 λ + a4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl QuarticCoeffs {
    pub fn as_array(&self) -> [f64; 4] {
        [self.a1, self.a2, self.a3, self.a4]
    }
}

/// Monic quadratic `λ² + linear·λ + constant`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub linear: f64,
    pub constant: f64,
}

impl Quadratic {
    /// Characteristic polynomial `λ² - tr λ + det` of a 2×2 block.
    pub fn characteristic(m: &Mat2) -> Self {
        Self {
            linear: -trace2(m),
            constant: det2(m),
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        z * z + self.linear * z + self.constant
    }

    pub fn roots(&self) -> [Complex64; 2] {
        quadratic_roots(self.linear, self.constant)
    }
}

/// Roots of `x² + p x + q`, avoiding cancellation between `-p` and the
/// square root of the discriminant.
pub fn quadratic_roots(p: f64, q: f64) -> [Complex64; 2] {
    let disc = p * p - 4.0 * q;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let t = -0.5 * (p + p.signum() * sq);
        if t == 0.0 {
            // p = 0 and q = 0
            return [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        }
        let (x1, x2) = (t, q / t);
        let (hi, lo) = if x1 >= x2 { (x1, x2) } else { (x2, x1) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let re = -0.5 * p;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

pub fn quartic_coeffs(j: &JacobianBlocks) -> QuarticCoeffs {
    let (tb, ts) = (j.trace_bulk(), j.trace_surf());
    let (db, ds) = (j.det_bulk(), j.det_surf());
    QuarticCoeffs {
        a1: -(tb + ts),
        a2: db + ds + tb * ts,
        a3: -(db * ts + ds * tb),
        a4: db * ds,
    }
}

/// The bulk and surface characteristic quadratics whose product is the quartic.
pub fn quartic_factors(j: &JacobianBlocks) -> [Quadratic; 2] {
    [
        Quadratic::characteristic(&j.j_bulk),
        Quadratic::characteristic(&j.j_surf),
    ]
}

/// Coefficients of the product of two monic quadratics.
pub fn expand_factors(f: &[Quadratic; 2]) -> QuarticCoeffs {
    let [p, q] = f;
    QuarticCoeffs {
        a1: p.linear + q.linear,
        a2: p.constant + q.constant + p.linear * q.linear,
        a3: p.linear * q.constant + q.linear * p.constant,
        a4: p.constant * q.constant,
    }
}

/// Required sign of a condition's left-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Marginal,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Marginal => "marginal",
        }
    }
}

/// One strict inequality `value > 0` or `value < 0`, with the magnitude of its
/// terms used to decide when the sign is not resolvable in floating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub value: f64,
    pub scale: f64,
    pub sense: Sense,
    pub outcome: Outcome,
}

impl Condition {
    pub fn new(name: &'static str, value: f64, scale: f64, sense: Sense) -> Self {
        let outcome = if value.is_nan() || value.abs() <= MARGINAL_RELATIVE * scale {
            Outcome::Marginal
        } else {
            let positive = value > 0.0;
            match (sense, positive) {
                (Sense::Positive, true) | (Sense::Negative, false) => Outcome::Pass,
                _ => Outcome::Fail,
            }
        };
        Self {
            name,
            value,
            scale,
            sense,
            outcome,
        }
    }

    pub fn holds(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn inequality(&self) -> &'static str {
        match self.sense {
            Sense::Positive => "> 0",
            Sense::Negative => "< 0",
        }
    }
}

/// Homogeneous (diffusion-free) stability of the full 4×4 Jacobian.
///
/// `conditions[4]` and `conditions[5]` are the second and third Hurwitz
/// determinants `2(a1 a2 - a3)` and `a3(a1 a2 - a3) - a1² a4`, rewritten in block
/// traces and determinants. The alternative closed forms with different signs
/// on the cross terms are kept in `alt_cond5`/`alt_cond6` for comparison only.
#[derive(Debug, Clone, PartialEq)]
pub struct RouthHurwitz {
    pub trace_full: f64,
    pub trace_bulk: f64,
    pub trace_surf: f64,
    pub det_bulk: f64,
    pub det_surf: f64,
    pub coeffs: QuarticCoeffs,
    pub conditions: [Condition; 6],
    pub alt_cond5: f64,
    pub alt_cond6: f64,
    pub eigenvalues: [Complex64; 4],
    /// `a4` vanishes: `λ = 0` is a root and the quartic degenerates to a cubic.
    pub zero_eigenvalue: bool,
}

impl RouthHurwitz {
    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(Condition::holds)
    }

    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn det_scale(m: &Mat2) -> f64 {
    (m[0][0] * m[1][1]).abs() + (m[0][1] * m[1][0]).abs()
}

fn trace_scale(m: &Mat2) -> f64 {
    m[0][0].abs() + m[1][1].abs()
}

pub fn routh_hurwitz(j: &JacobianBlocks) -> RouthHurwitz {
    let (tb, ts) = (j.trace_bulk(), j.trace_surf());
    let (db, ds) = (j.det_bulk(), j.det_surf());
    let tr = tb + ts;
    // Term magnitudes for the marginal band.
    let (stb, sts) = (trace_scale(&j.j_bulk), trace_scale(&j.j_surf));
    let (sdb, sds) = (det_scale(&j.j_bulk), det_scale(&j.j_surf));
    let str_ = stb + sts;

    let c1 = Condition::new("cond1", tr, str_, Sense::Negative);
    let c2 = Condition::new("cond2", db + ds + tb * ts, sdb + sds + stb * sts, Sense::Positive);
    let c3 = Condition::new("cond3", db * ts + ds * tb, sdb * sts + sds * stb, Sense::Negative);
    let c4 = Condition::new("cond4", db * ds, sdb * sds, Sense::Positive);
    let c5 = Condition::new(
        "cond5",
        -2.0 * (tr * tb * ts + db * tb + ds * ts),
        2.0 * (str_ * stb * sts + sdb * stb + sds * sts),
        Sense::Positive,
    );
    let c6 = Condition::new(
        "cond6",
        tb * ts * ((db - ds).powi(2) + (db * ts + ds * tb) * tr),
        stb * sts * ((sdb + sds).powi(2) + (sdb * sts + sds * stb) * str_),
        Sense::Positive,
    );
    let alt_cond5 = (ts * tr - 2.0 * db) * tb + (tb * tr - 2.0 * ds) * ts;
    let alt_cond6 = ((db + ds).powi(2) - (db * ts + ds * tb) * tr) * tb * ts;

    let [fb, fs] = quartic_factors(j);
    let [l1, l2] = fb.roots();
    let [l3, l4] = fs.roots();
    RouthHurwitz {
        trace_full: tr,
        trace_bulk: tb,
        trace_surf: ts,
        det_bulk: db,
        det_surf: ds,
        coeffs: quartic_coeffs(j),
        zero_eigenvalue: c4.outcome == Outcome::Marginal,
        conditions: [c1, c2, c3, c4, c5, c6],
        alt_cond5,
        alt_cond6,
        eigenvalues: [l1, l2, l3, l4],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{jacobian_at, Concentrations, CouplingParams, KineticParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blocks(b: Mat2, s: Mat2) -> JacobianBlocks {
        JacobianBlocks {
            j_bulk: b,
            j_surf: s,
            j_cross: [[0.0; 2]; 2],
        }
    }

    const NEG_ID: Mat2 = [[-1.0, 0.0], [0.0, -1.0]];

    #[test]
    fn quartic_of_negative_identity_blocks() {
        let j = blocks(NEG_ID, NEG_ID);
        assert_eq!(quartic_coeffs(&j).as_array(), [4.0, 6.0, 4.0, 1.0]);
        assert_eq!(expand_factors(&quartic_factors(&j)).as_array(), [4.0, 6.0, 4.0, 1.0]);
    }

    #[test]
    fn quartic_of_schnakenberg_blocks() {
        let m = [[400.0, 500.0], [-900.0, -500.0]];
        let q = quartic_coeffs(&blocks(m, m));
        assert_eq!(q.a1, 200.0);
        assert_eq!(q.a4, 6.25e10);
    }

    #[test]
    fn zero_blocks() {
        let j = blocks([[0.0; 2]; 2], [[0.0; 2]; 2]);
        assert_eq!(quartic_coeffs(&j).as_array(), [0.0; 4]);
        let rh = routh_hurwitz(&j);
        assert!(rh.zero_eigenvalue);
        assert!(!rh.all_hold());
    }

    #[test]
    fn singular_surface_block_flags_zero_root() {
        let j = blocks(NEG_ID, [[0.0; 2]; 2]);
        let [_, s] = quartic_factors(&j);
        assert_eq!((s.linear, s.constant), (0.0, 0.0));
        assert_eq!(quartic_coeffs(&j).a4, 0.0);
        assert!(routh_hurwitz(&j).zero_eigenvalue);
    }

    #[test]
    fn negative_identity_is_stable() {
        let rh = routh_hurwitz(&blocks(NEG_ID, NEG_ID));
        assert!(rh.all_hold(), "{:?}", rh.conditions);
        assert_eq!(rh.max_real_eigenvalue(), -1.0);
    }

    #[test]
    fn stable_spiral_blocks() {
        let m = [[0.0, 1.0], [-1.0, -1.0]];
        let rh = routh_hurwitz(&blocks(m, m));
        assert!(rh.all_hold());
        for z in rh.eigenvalues {
            assert!((z.re + 0.5).abs() < 1e-15);
            assert!((z.im.abs() - 0.75f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_point_condition4_tracks_determinant_sign() {
        let p = KineticParams::reference();
        let c = CouplingParams::reference();
        let j = jacobian_at(&p, &c, &Concentrations::new(1.0, 0.9, 1.0, 0.9));
        let rh = routh_hurwitz(&j);
        assert_eq!(rh.conditions[3].holds(), j.det_bulk() * j.det_surf() > 0.0);
        // det_surf = -0.5 gamma² with the exchange terms included
        assert!((rh.det_surf + 0.5 * 500.0 * 500.0).abs() < 1e-6);
        let unstable = rh.max_real_eigenvalue() > 1e-8;
        assert_eq!(unstable, !rh.all_hold());
    }

    #[test]
    fn quadratic_roots_without_cancellation() {
        // roots 1e8 and 1e-8
        let [hi, lo] = quadratic_roots(-(1e8 + 1e-8), 1.0);
        assert!((hi.re - 1e8).abs() < 1e-6);
        assert!((lo.re - 1e-8).abs() < 1e-20);
    }

    fn random_blocks(rng: &mut ChaCha8Rng) -> JacobianBlocks {
        let mut m = || -> Mat2 {
            [
                [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
                [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
            ]
        };
        blocks(m(), m())
    }

    #[test]
    fn conditions_match_hurwitz_determinants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let j = random_blocks(&mut rng);
            let q = quartic_coeffs(&j);
            let rh = routh_hurwitz(&j);
            let h2 = q.a1 * q.a2 - q.a3;
            let h3 = q.a3 * h2 - q.a1 * q.a1 * q.a4;
            let c5 = rh.conditions[4].value;
            let c6 = rh.conditions[5].value;
            assert!((c5 - 2.0 * h2).abs() <= 1e-10 * rh.conditions[4].scale);
            assert!((c6 - h3).abs() <= 1e-10 * rh.conditions[5].scale);
        }
    }

    #[test]
    fn equivalence_with_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 1000 {
            let j = random_blocks(&mut rng);
            let rh = routh_hurwitz(&j);
            let max_re = rh.max_real_eigenvalue();
            if rh.coeffs.a4.abs() < 1e-6 || max_re.abs() < 1e-8 {
                continue;
            }
            assert_eq!(rh.all_hold(), max_re < 0.0, "{j:?}");
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn factors_expand_to_quartic(
            e in proptest::array::uniform8(-50.0f64..50.0)
        ) {
            let j = blocks([[e[0], e[1]], [e[2], e[3]]], [[e[4], e[5]], [e[6], e[7]]]);
            let q = quartic_coeffs(&j).as_array();
            let x = expand_factors(&quartic_factors(&j)).as_array();
            for (a, b) in q.iter().zip(x) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn eigenvalues_are_roots_of_quartic(
            e in proptest::array::uniform8(-5.0f64..5.0)
        ) {
            let j = blocks([[e[0], e[1]], [e[2], e[3]]], [[e[4], e[5]], [e[6], e[7]]]);
            let q = quartic_coeffs(&j);
            for z in routh_hurwitz(&j).eigenvalues {
                let p = z.powi(4) + q.a1 * z.powi(3) + q.a2 * z * z + q.a3 * z + q.a4;
                let scale = 1.0 + z.norm().powi(4) + q.a1.abs() * z.norm().powi(3)
                    + q.a2.abs() * z.norm_sqr() + q.a3.abs() * z.norm() + q.a4.abs();
                prop_assert!(p.norm() <= 1e-12 * scale);
            }
        }
    }
}
