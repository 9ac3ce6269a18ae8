//! Anticipate the sampling delay by rescaling the admittance coefficients so
//! the delayed loop reproduces the nominal closed-loop poles.
//!
//! Requiring the held, modified admittance to equal the nominal one at every
//! nominal pole gives one complex linear constraint per pole in the
//! modification factors. The complex rows are stacked into real and
//! imaginary parts so the factors (and hence the programmed recurrence) stay
//! real, one factor is pinned to remove the all-coefficients-to-zero trivial
//! solution, and the reduced system is solved in the least-squares sense
//! with column scaling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freq_analysis::{loop_transfer, zoh_response};
use crate::model::{PiezoModel, RationalTF};
use crate::poly;

/// Real-stacked linear system `P delta = d` for the modification factors.
///
/// Unknown layout: `[delta_b0 .. delta_bM, delta_a0 .. delta_aN]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModificationSystem {
    pub p: DMatrix<f64>,
    pub d: DVector<f64>,
    /// Number of numerator factors (M + 1).
    pub num_len: usize,
    /// Number of denominator factors (N + 1).
    pub den_len: usize,
    /// Sampling period the system was built for.
    pub tau: f64,
}

/// Dimensionless scaling factors applied to the admittance coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModificationFactors {
    pub delta_b: Vec<f64>,
    pub delta_a: Vec<f64>,
    /// Stacked index of the factor pinned to exactly zero.
    pub pinned: usize,
    /// Euclidean norm of the least-squares residual of the reduced system.
    pub residual_norm: f64,
    /// Set when the reduced system was rank deficient and a minimum-norm
    /// solution was returned.
    pub degenerate: bool,
    /// Stacked indices whose scaled coefficient vanished or flipped sign.
    pub sign_flips: Vec<usize>,
}

impl ModificationFactors {
    pub fn stacked(&self) -> Vec<f64> {
        self.delta_b.iter().chain(self.delta_a.iter()).copied().collect()
    }
}

/// Delayed-characteristic residuals at the placement targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementCheck {
    /// `|1 + H(p_k) E(p_k; tau)|` at each target pole.
    pub residuals: Vec<f64>,
    /// Delayed poles re-solved by Newton seeded at the targets.
    pub resolved: Vec<Complex64>,
    /// Distance from each target to its re-solved pole.
    pub displacements: Vec<f64>,
}

impl PlacementCheck {
    pub fn max_resolved_real_part(&self) -> f64 {
        self.resolved.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Assemble the real-stacked placement system for admittance `y`, nominal
/// poles `poles` and sampling period `tau`.
///
/// Complex row `k`, numerator column `m`: `E(p_k) b_m p_k^m / sum_b(p_k)`;
/// denominator column `n`: `-a_n p_k^n / sum_a(p_k)`; right side
/// `1 - E(p_k)` with `E(p) = (1 - e^(-tau p)) / (tau p)`.
pub fn build_modification_system(
    y: &RationalTF,
    poles: &[Complex64],
    tau: f64,
) -> Result<ModificationSystem> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    if poles.is_empty() {
        return Err(Error::Domain("at least one target pole is required".into()));
    }
    let num_len = y.num().len();
    let den_len = y.den().len();
    let cols = num_len + den_len;

    let mut p = DMatrix::<f64>::zeros(2 * poles.len(), cols);
    let mut d = DVector::<f64>::zeros(2 * poles.len());

    for (k, &pk) in poles.iter().enumerate() {
        let e = zoh_response(tau, pk);
        let sum_b = poly::eval(y.num(), pk);
        let sum_a = poly::eval(y.den(), pk);
        let scale = pk.norm().max(1.0);
        if sum_b.norm() < 1e-14 * scale.powi(num_len as i32 - 1).max(1.0) {
            return Err(Error::SingularConfiguration(format!(
                "admittance numerator vanishes at target pole {pk}"
            )));
        }
        if sum_a.norm() < 1e-14 * scale.powi(den_len as i32 - 1).max(1.0) {
            return Err(Error::SingularConfiguration(format!(
                "admittance denominator vanishes at target pole {pk}"
            )));
        }

        let mut power = Complex64::new(1.0, 0.0);
        for m in 0..num_len {
            let entry = e * y.num()[m] * power / sum_b;
            p[(2 * k, m)] = entry.re;
            p[(2 * k + 1, m)] = entry.im;
            power *= pk;
        }
        let mut power = Complex64::new(1.0, 0.0);
        for n in 0..den_len {
            let entry = -y.den()[n] * power / sum_a;
            p[(2 * k, num_len + n)] = entry.re;
            p[(2 * k + 1, num_len + n)] = entry.im;
            power *= pk;
        }

        let rhs = Complex64::new(1.0, 0.0) - e;
        d[2 * k] = rhs.re;
        d[2 * k + 1] = rhs.im;
    }

    Ok(ModificationSystem { p, d, num_len, den_len, tau })
}

/// Minimum-norm least-squares solution of the system with the pinned column
/// removed, via SVD with column scaling.
pub fn solve_modification(
    system: &ModificationSystem,
    y: &RationalTF,
    pinned_index: usize,
) -> Result<ModificationFactors> {
    let cols = system.num_len + system.den_len;
    if pinned_index >= cols {
        return Err(Error::Domain(format!(
            "pinned index {pinned_index} out of range for {cols} factors"
        )));
    }

    let kept: Vec<usize> = (0..cols).filter(|&c| c != pinned_index).collect();
    let mut reduced = DMatrix::<f64>::zeros(system.p.nrows(), kept.len());
    for (j, &c) in kept.iter().enumerate() {
        reduced.set_column(j, &system.p.column(c));
    }

    // Column scaling improves the conditioning of the orthogonal
    // factorization without changing a full-rank least-squares solution.
    let scales: Vec<f64> = (0..reduced.ncols())
        .map(|j| {
            let n = reduced.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = reduced.clone();
    for (j, &s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / s);
    }

    let n_unknowns = scaled.ncols();
    let svd = scaled.svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if max_sv == 0.0 {
        return Err(Error::SingularConfiguration("placement matrix is zero".into()));
    }
    let cutoff = max_sv * 1e-12;
    let rank = svd.singular_values.iter().filter(|&&s| s > max_sv * 1e-10).count();
    let degenerate = rank < n_unknowns;

    let solution = svd
        .solve(&system.d, cutoff)
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
    let solution: Vec<f64> = solution
        .iter()
        .zip(scales.iter())
        .map(|(x, s)| x / s)
        .collect();

    let mut stacked = vec![0.0; cols];
    for (j, &c) in kept.iter().enumerate() {
        stacked[c] = solution[j];
    }

    let sol_vec = DVector::from_vec(solution);
    let residual_norm = (&reduced * &sol_vec - &system.d).norm();

    let coeffs: Vec<f64> = y.num().iter().chain(y.den().iter()).copied().collect();
    let sign_flips = stacked
        .iter()
        .enumerate()
        .filter(|&(i, &delta)| coeffs[i] != 0.0 && 1.0 + delta <= 0.0)
        .map(|(i, _)| i)
        .collect();

    Ok(ModificationFactors {
        delta_b: stacked[..system.num_len].to_vec(),
        delta_a: stacked[system.num_len..].to_vec(),
        pinned: pinned_index,
        residual_norm,
        degenerate,
        sign_flips,
    })
}

/// Coefficient-wise rescaling `b_m (1 + delta_bm)`, `a_n (1 + delta_an)`.
pub fn apply_modification(y: &RationalTF, factors: &ModificationFactors) -> Result<RationalTF> {
    if factors.delta_b.len() != y.num().len() || factors.delta_a.len() != y.den().len() {
        return Err(Error::Domain(format!(
            "factor dimensions ({}, {}) do not match the admittance ({}, {})",
            factors.delta_b.len(),
            factors.delta_a.len(),
            y.num().len(),
            y.den().len()
        )));
    }
    let num: Vec<f64> = y
        .num()
        .iter()
        .zip(&factors.delta_b)
        .map(|(b, d)| b * (1.0 + d))
        .collect();
    let den: Vec<f64> = y
        .den()
        .iter()
        .zip(&factors.delta_a)
        .map(|(a, d)| a * (1.0 + d))
        .collect();
    if den.last().copied().unwrap_or(0.0) == 0.0 {
        return Err(Error::Domain(
            "modification zeroes the leading denominator coefficient".into(),
        ));
    }
    RationalTF::new(num, den)
}

/// Recover the factors that map `y` onto `y_mod` (inverse of
/// [`apply_modification`], for round-trip checks and reporting).
pub fn extract_modification(y: &RationalTF, y_mod: &RationalTF) -> Result<ModificationFactors> {
    if y.num().len() != y_mod.num().len() || y.den().len() != y_mod.den().len() {
        return Err(Error::Domain("admittance orders differ".into()));
    }
    let ratio = |orig: &[f64], scaled: &[f64]| -> Result<Vec<f64>> {
        orig.iter()
            .zip(scaled)
            .map(|(&o, &s)| {
                if o == 0.0 && s != 0.0 {
                    Err(Error::Domain("cannot scale a zero coefficient to a nonzero one".into()))
                } else if o == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(s / o - 1.0)
                }
            })
            .collect()
    };
    Ok(ModificationFactors {
        delta_b: ratio(y.num(), y_mod.num())?,
        delta_a: ratio(y.den(), y_mod.den())?,
        pinned: 0,
        residual_norm: 0.0,
        degenerate: false,
        sign_flips: Vec::new(),
    })
}

/// Evaluate the delayed characteristic function of the (modified) admittance
/// at each target pole and re-solve the nearby delayed poles by Newton.
pub fn verify_pole_placement(
    model: &PiezoModel,
    y_mod: &RationalTF,
    tau: f64,
    target_poles: &[Complex64],
) -> Result<PlacementCheck> {
    if tau < 0.0 || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be non-negative, got {tau}")));
    }
    let h = loop_transfer(model, y_mod);
    let chi = crate::delay_stability::DelayedCharacteristic {
        h: &h,
        variant: crate::delay_stability::DelayVariant::Zoh,
    };

    let mut residuals = Vec::with_capacity(target_poles.len());
    let mut resolved = Vec::with_capacity(target_poles.len());
    let mut displacements = Vec::with_capacity(target_poles.len());
    for &p in target_poles {
        residuals.push(chi.eval(p, tau).norm());
        let re_solved = chi.refine(p, tau, 1e-11, 100).ok_or_else(|| {
            Error::Numerical(format!("delayed pole near {p} did not converge"))
        })?;
        displacements.push((re_solved - p).norm());
        resolved.push(re_solved);
    }
    Ok(PlacementCheck { residuals, resolved, displacements })
}
