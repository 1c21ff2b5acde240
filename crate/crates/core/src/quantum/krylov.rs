use super::C64;
use nalgebra::{DMatrix, SymmetricEigen};

const MAX_DIM: usize = 40;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn nrm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `e^{-iτA} v` for a Hermitian `A` given as `apply(input, output)`, by Lanczos.
///
/// The step is split in halves until the a-posteriori estimate `β_m |(e^{-iτT})_{m,1}|` drops below `tol·‖v‖`.
pub(crate) fn expm_hermitian(apply: &dyn Fn(&[C64], &mut [C64]), v: &[C64], tau: f64, tol: f64) -> Vec<C64> {
    let mut out = v.to_vec();
    let mut remaining = tau;
    let mut step = tau;
    while remaining.abs() > 0.0 {
        if step.abs() > remaining.abs() {
            step = remaining;
        }
        match lanczos_step(apply, &out, step, tol) {
            Some(next) => {
                out = next;
                remaining -= step;
                step *= 2.0;
            }
            None => step *= 0.5,
        }
    }
    out
}

fn lanczos_step(apply: &dyn Fn(&[C64], &mut [C64]), v: &[C64], tau: f64, tol: f64) -> Option<Vec<C64>> {
    let n = v.len();
    let beta0 = nrm(v);
    if beta0 == 0.0 {
        return Some(v.to_vec());
    }
    let mut basis: Vec<Vec<C64>> = vec![v.iter().map(|x| x / beta0).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); n];
    for j in 0..MAX_DIM.min(n) {
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi -= qi * a;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= qi * b;
            }
        }
        // Full reorthogonalization; the bases are short.
        for q in &basis {
            let c = dot(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= qi * c;
            }
        }
        alpha.push(a);
        let b = nrm(&w);
        let m = j + 1;
        let (coef, err) = small_expm(&alpha, &beta, tau, b);
        if err < tol || b < 1e-14 * beta0.max(1.0) || m == n {
            let mut out = vec![C64::new(0.0, 0.0); n];
            for (c, q) in coef.iter().zip(&basis) {
                for (o, qi) in out.iter_mut().zip(q) {
                    *o += qi * c * beta0;
                }
            }
            return Some(out);
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    None
}

/// First column of `e^{-iτT}` for the tridiagonal `T`, and the residual estimate `β_m |last entry|`.
fn small_expm(alpha: &[f64], beta: &[f64], tau: f64, next_beta: f64) -> (Vec<C64>, f64) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let coef: Vec<C64> = (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    C64::from_polar(eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)], -tau * eig.eigenvalues[k])
                })
                .sum()
        })
        .collect();
    let err = next_beta * coef[m - 1].norm();
    (coef, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator_is_exact() {
        let d: Vec<f64> = (0..50).map(|k| (k as f64).powi(2) * 0.3).collect();
        let v: Vec<C64> = (0..50).map(|k| C64::new(1.0 / (1.0 + k as f64), 0.2)).collect();
        let apply = |x: &[C64], y: &mut [C64]| {
            for i in 0..x.len() {
                y[i] = x[i] * d[i];
            }
        };
        let out = expm_hermitian(&apply, &v, 0.7, 1e-13);
        for i in 0..50 {
            let exact = v[i] * C64::from_polar(1.0, -0.7 * d[i]);
            assert!((out[i] - exact).norm() < 1e-11, "{i}");
        }
    }

    #[test]
    fn tridiagonal_laplacian_preserves_norm() {
        let n = 200;
        let apply = |x: &[C64], y: &mut [C64]| {
            for i in 0..x.len() {
                let l = if i > 0 { x[i - 1] } else { C64::new(0.0, 0.0) };
                let r = if i + 1 < x.len() { x[i + 1] } else { C64::new(0.0, 0.0) };
                y[i] = x[i] * 2.0 - l - r;
            }
        };
        let v: Vec<C64> = (0..n).map(|k| C64::new((-(k as f64 - 100.0).powi(2) / 50.0).exp(), 0.0)).collect();
        let a = expm_hermitian(&apply, &v, 3.0, 1e-12);
        assert!((nrm(&a) - nrm(&v)).abs() < 1e-10);
        let b = expm_hermitian(&apply, &expm_hermitian(&apply, &v, 1.0, 1e-12), 2.0, 1e-12);
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(d < 1e-9);
    }
}
