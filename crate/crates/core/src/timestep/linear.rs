use crate::error::{Error, Result};
use crate::fem::SparseOperator;

const RESTART: usize = 60;
const MAX_ITERATIONS: usize = 3000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(a: &SparseOperator, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; b.len()];
    a.mul_vec_into(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    r
}

fn check_square(a: &SparseOperator, rhs: &[f64]) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::SizeMismatch {
            what: "system columns",
            got: a.cols(),
            expected: a.rows(),
        });
    }
    if rhs.len() != a.rows() {
        return Err(Error::SizeMismatch {
            what: "right-hand side",
            got: rhs.len(),
            expected: a.rows(),
        });
    }
    Ok(())
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: SparseOperator,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseOperator) -> Result<Self> {
        let n = a.rows();
        let mut lu = a.clone();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            diag.push(lu.position(i, i).ok_or_else(|| {
                Error::Breakdown(format!("ILU(0): row {i} has no diagonal entry"))
            })?);
        }
        let row_ptr = lu.row_ptr().to_vec();
        let col_idx = lu.col_idx().to_vec();
        let vals = lu.values_mut();
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            let row = row_ptr[i]..row_ptr[i + 1];
            for p in row.clone() {
                marker[col_idx[p]] = p;
            }
            for p in row.clone() {
                let k = col_idx[p];
                if k >= i {
                    break;
                }
                let pivot = vals[diag[k]];
                let lik = vals[p] / pivot;
                vals[p] = lik;
                for q in (diag[k] + 1)..row_ptr[k + 1] {
                    let m = marker[col_idx[q]];
                    if m != usize::MAX {
                        vals[m] -= lik * vals[q];
                    }
                }
            }
            let d = vals[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Breakdown(format!("ILU(0): zero pivot in row {i}")));
            }
            for p in row {
                marker[col_idx[p]] = usize::MAX;
            }
        }
        Ok(Self { lu, diag })
    }

    /// Solves `L U x = b` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let (cols, vals) = self.lu.row(i);
            let start = self.lu.row_ptr()[i];
            let mut s = x[i];
            for (p, (&j, &v)) in cols.iter().zip(vals).enumerate() {
                if start + p >= self.diag[i] {
                    break;
                }
                s -= v * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let (cols, vals) = self.lu.row(i);
            let d = self.diag[i] - self.lu.row_ptr()[i];
            let mut s = x[i];
            for (&j, &v) in cols[d + 1..].iter().zip(&vals[d + 1..]) {
                s -= v * x[j];
            }
            x[i] = s / vals[d];
        }
    }
}

/// Solves `A x = b` to relative residual `tol` with restarted GMRES,
/// right-preconditioned by ILU(0).
pub fn solve_linear(a: &SparseOperator, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_square(a, rhs)?;
    let ilu = Ilu0::new(a)?;
    gmres(a, rhs, None, tol, |x| ilu.apply(x))
}

/// GMRES with a caller-supplied right preconditioner and optional initial
/// guess.
pub fn gmres(
    a: &SparseOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    precond: impl Fn(&mut [f64]),
) -> Result<Vec<f64>> {
    check_square(a, b)?;
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut iterations = 0;
    let mut r = residual(a, &x, b);
    let mut rel = norm(&r) / bnorm;
    while rel > tol {
        if iterations >= MAX_ITERATIONS {
            return Err(Error::LinearSolver {
                iterations,
                residual: rel,
            });
        }
        let rel_start = rel;
        let beta = norm(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![[0.0; RESTART + 1]; RESTART];
        let (mut cs, mut sn) = (vec![0.0; RESTART], vec![0.0; RESTART]);
        let mut g = vec![0.0; RESTART + 1];
        g[0] = beta;
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(RESTART);
        let mut k = 0;
        while k < RESTART && iterations < MAX_ITERATIONS {
            let mut z = basis[k].clone();
            precond(&mut z);
            let mut w = vec![0.0; n];
            a.mul_vec_into(&z, &mut w);
            zs.push(z);
            // modified Gram-Schmidt
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(&w, q);
                h[k][i] = hij;
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= hij * qi);
            }
            let wn = norm(&w);
            h[k][k + 1] = wn;
            for i in 0..k {
                let t = cs[i] * h[k][i] + sn[i] * h[k][i + 1];
                h[k][i + 1] = -sn[i] * h[k][i] + cs[i] * h[k][i + 1];
                h[k][i] = t;
            }
            let denom = h[k][k].hypot(h[k][k + 1]);
            if denom == 0.0 {
                return Err(Error::Breakdown("GMRES: zero Krylov direction".into()));
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k][k + 1] / denom;
            h[k][k] = denom;
            h[k][k + 1] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            let happy = wn <= 1e-14 * beta;
            if g[k].abs() / bnorm <= tol || happy {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            x.iter_mut().zip(z).for_each(|(xj, zj)| *xj += yi * zj);
        }
        r = residual(a, &x, b);
        rel = norm(&r) / bnorm;
        if !rel.is_finite() {
            return Err(Error::Breakdown("GMRES: non-finite residual".into()));
        }
        if rel > tol && rel > 0.999 * rel_start {
            return Err(Error::LinearSolver {
                iterations,
                residual: rel,
            });
        }
    }
    Ok(x)
}

/// Conjugate gradients with Jacobi preconditioning for symmetric positive
/// definite systems.
pub fn solve_spd(a: &SparseOperator, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_square(a, rhs)?;
    let n = rhs.len();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let d = a.diagonal();
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Breakdown("CG: non-positive diagonal".into()));
    }
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&d).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..MAX_ITERATIONS.max(2 * n) {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown(format!(
                "CG: non-positive curvature {pap:e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        if norm(&r) / bnorm <= tol {
            let rel = norm(&residual(a, &x, rhs)) / bnorm;
            if rel <= tol {
                return Ok(x);
            }
        }
        z.iter_mut()
            .zip(&r)
            .zip(&d)
            .for_each(|((zi, ri), di)| *zi = ri / di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::LinearSolver {
        iterations: MAX_ITERATIONS.max(2 * n),
        residual: norm(&r) / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_operators, SparseBuilder};
    use crate::mesh::generate_ball_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let a = SparseOperator::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 7.0];
        for x in [solve_linear(&a, &b, 1e-12).unwrap(), solve_spd(&a, &b, 1e-12).unwrap()] {
            assert!(x.iter().zip(&b).all(|(p, q)| (p - q).abs() <= 1e-15 * q.abs()));
        }
    }

    #[test]
    fn mass_round_trip() {
        let ops = assemble_operators(&generate_ball_mesh(2).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..ops.n_bulk()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = ops.m_bulk.mul_vec(&x).unwrap();
        for sol in [
            solve_spd(&ops.m_bulk, &b, 1e-12).unwrap(),
            solve_linear(&ops.m_bulk, &b, 1e-12).unwrap(),
        ] {
            let r = residual(&ops.m_bulk, &sol, &b);
            assert!(norm(&r) / norm(&b) <= 1e-10);
        }
    }

    #[test]
    fn nonsymmetric_system() {
        let n = 200;
        let mut bld = SparseBuilder::new(n, n);
        for i in 0..n {
            bld.add(i, i, 4.0);
            if i + 1 < n {
                bld.add(i, i + 1, -1.5);
                bld.add(i + 1, i, -0.5);
            }
            bld.add(i, (i * 7 + 3) % n, 0.3);
        }
        let a = bld.build();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).cos()).collect();
        let b = a.mul_vec(&x).unwrap();
        let sol = solve_linear(&a, &b, 1e-12).unwrap();
        let err = sol.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn singular_stiffness_is_reported() {
        let ops = assemble_operators(&generate_ball_mesh(1).unwrap()).unwrap();
        let b = vec![1.0; ops.n_bulk()];
        assert!(solve_linear(&ops.k_bulk, &b, 1e-10).is_err());
        assert!(solve_spd(&ops.k_bulk, &b, 1e-10).is_err());
    }

    #[test]
    fn size_checks() {
        let a = SparseOperator::identity(3);
        assert!(matches!(
            solve_linear(&a, &[1.0], 1e-10),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
