//! Real polynomial helpers: coefficients are stored in ascending powers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Multiply two polynomials (coefficient convolution).
pub(crate) fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Add two polynomials of possibly different length.
pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] += bi;
    }
    out
}

/// Coefficients of the derivative polynomial.
pub(crate) fn derivative(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &ck)| k as f64 * ck)
        .collect()
}

/// Horner evaluation at a complex point.
pub(crate) fn eval(c: &[f64], s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        acc = acc * s + ck;
    }
    acc
}

/// Drop exactly-zero high-order coefficients (the slice stays non-empty).
pub(crate) fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    c
}

/// All complex roots of a real polynomial, via balanced companion-matrix
/// eigenvalues. Exact zero roots from vanishing low-order coefficients are
/// factored out first.
pub(crate) fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let c = trim(coeffs.to_vec());
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite polynomial coefficient".into()));
    }
    if c.len() == 1 {
        return if c[0] == 0.0 {
            Err(Error::Domain("zero polynomial has no defined roots".into()))
        } else {
            Ok(Vec::new())
        };
    }

    let mut zeros_at_origin = 0;
    let mut c = c;
    while c.len() > 1 && c[0] == 0.0 {
        c.remove(0);
        zeros_at_origin += 1;
    }

    let n = c.len() - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    if n == 0 {
        return Ok(out);
    }

    let lead = c[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    balance(&mut m);
    let eig = m.complex_eigenvalues();
    out.extend(eig.iter().copied());
    Ok(out)
}

/// Parlett–Reinsch balancing with radix-2 scaling, in place.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c: f64 = 0.0;
            let mut r: f64 = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut c2 = c;
            let mut r2 = r;
            while c2 < r2 / 2.0 {
                c2 *= 2.0;
                r2 /= 2.0;
                f *= 2.0;
            }
            while c2 >= r2 * 2.0 {
                c2 /= 2.0;
                r2 *= 2.0;
                f /= 2.0;
            }
            if c2 + r2 < 0.95 * s && f != 1.0 {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}
