//! Independent oracles for the integration tests. Nothing here calls into
//! the library's linear algebra: Hermitian functions are evaluated with a
//! cyclic Jacobi eigensolver on the real embedding
//! `A + iB ↦ [[A, −B], [B, A]]`.

#![allow(dead_code)]

use holomem::qstate::{CMatrix, DensityMatrix};
use num_complex::Complex64;

pub type Dense = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn dense(m: &CMatrix) -> Dense {
    let n = m.dim();
    (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect()
}

pub fn dm(rho: &DensityMatrix) -> Dense {
    dense(rho.matrix())
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

pub fn trace(a: &Dense) -> Complex64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi
/// rotations. Returns `(values, vectors)` with eigenvectors as columns.
pub fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = cs * vkp - sn * vkq;
                    v[k][q] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn embed(m: &Dense) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut r = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            // symmetrize against roundoff in the input
            let z = 0.5 * (m[i][j] + m[j][i].conj());
            r[i][j] = z.re;
            r[i + n][j + n] = z.re;
            r[i][j + n] = -z.im;
            r[i + n][j] = z.im;
        }
    }
    r
}

/// `f(M)` for Hermitian `M`, via the real embedding.
pub fn herm_fn(m: &Dense, f: impl Fn(f64) -> f64) -> Dense {
    let n = m.len();
    let (vals, vecs) = jacobi(embed(m));
    let fv: Vec<f64> = vals.iter().map(|&x| f(x)).collect();
    let big = |i: usize, j: usize| (0..2 * n).map(|k| vecs[i][k] * fv[k] * vecs[j][k]).sum::<f64>();
    (0..n).map(|i| (0..n).map(|j| c(big(i, j), big(i + n, j))).collect()).collect()
}

/// Eigenvalues of Hermitian `M` (each appears once), ascending.
pub fn herm_eigenvalues(m: &Dense) -> Vec<f64> {
    let (mut vals, _) = jacobi(embed(m));
    vals.sort_by(f64::total_cmp);
    vals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

/// Uhlmann fidelity `(Tr √(√a b √a))²`.
///
/// Eigenvalues below `1e-13` are treated as exact zeros in both square roots.
pub fn fidelity(a: &Dense, b: &Dense) -> f64 {
    let root = |x: f64| if x > 1e-13 { x.sqrt() } else { 0.0 };
    let sa = herm_fn(a, root);
    let inner = matmul(&matmul(&sa, b), &sa);
    let t: f64 = herm_eigenvalues(&inner).into_iter().map(root).sum();
    t * t
}

/// `(|HH⟩ + |VV⟩)/√2` as a dense projector, basis order HH, HV, VH, VV.
pub fn phi_plus() -> Dense {
    let mut m = vec![vec![c(0.0, 0.0); 4]; 4];
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[i][j] = c(0.5, 0.0);
    }
    m
}

pub fn werner(p: f64) -> Dense {
    let b = phi_plus();
    (0..4)
        .map(|i| (0..4).map(|j| b[i][j] * p + if i == j { c((1.0 - p) / 4.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

/// `⟨ψ|ρ|ψ⟩` for a product of two linear polarizers at angles `a1`, `a2`.
pub fn linear_pair_prob(rho: &Dense, a1: f64, a2: f64) -> f64 {
    let k1 = [a1.cos(), a1.sin()];
    let k2 = [a2.cos(), a2.sin()];
    let psi: Vec<f64> = (0..4).map(|i| k1[i / 2] * k2[i % 2]).collect();
    let mut acc = c(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            acc += psi[i] * rho[i][j] * psi[j];
        }
    }
    acc.re
}

/// Correlation with photon 2's analyzer angle negated.
pub fn mirrored_correlation(rho: &Dense, a: f64, b: f64) -> f64 {
    let h = std::f64::consts::FRAC_PI_2;
    let b = -b;
    linear_pair_prob(rho, a, b) + linear_pair_prob(rho, a + h, b + h)
        - linear_pair_prob(rho, a, b + h)
        - linear_pair_prob(rho, a + h, b)
}

pub fn textbook_correlation(rho: &Dense, a: f64, b: f64) -> f64 {
    mirrored_correlation(rho, a, -b)
}

pub fn chsh(e: impl Fn(f64, f64) -> f64, [a, ap, b, bp]: [f64; 4]) -> f64 {
    (-e(a, b) + e(a, bp) + e(ap, b) + e(ap, bp)).abs()
}

/// Structural checks on a density matrix: Hermitian, unit trace, PSD.
pub fn assert_physical(rho: &DensityMatrix, tol: f64) {
    let m = dm(rho);
    for i in 0..4 {
        for j in 0..4 {
            assert!((m[i][j] - m[j][i].conj()).norm() < tol, "not Hermitian");
        }
    }
    assert!((trace(&m) - c(1.0, 0.0)).norm() < tol, "trace {}", trace(&m));
    let ev = herm_eigenvalues(&m);
    assert!(ev[0] > -1e-10, "negative eigenvalue {}", ev[0]);
}
