//! Poles of the delayed closed loop: homotopy continuation of the
//! transcendental characteristic equation, critical frequencies and delays
//! (numeric and series), and sampling-period rules.
//!
//! Everything is computed on the unit-normalized plant (`omega_sc` = 1,
//! `cp_eps` = 1); the loop dynamics depend only on the coupling factor and
//! the dimensionless shunt values, so results rescale exactly:
//! frequencies by `omega_sc`, delays by `1 / omega_sc`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freq_analysis::{open_loop_tf, zoh_response};
use crate::model::{PiezoModel, RationalTF, ShuntParams};
use crate::poly;

/// Delay representation used by the transcendental characteristic equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayVariant {
    /// `1 + H(s) (1 - e^(-tau s)) / (tau s) = 0`
    Zoh,
    /// `1 + H(s) e^(-tau s / 2) = 0`
    PureDelay,
}

/// Method that produced a critical-delay estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalMethod {
    ZohNumeric,
    PureDelayNumeric,
    Series,
}

/// Imaginary-axis crossing of the delayed closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalDelayResult {
    /// Crossing frequency (rad/s).
    pub omega_c: f64,
    /// Smallest delay putting a pole on the imaginary axis (s).
    pub tau_c: f64,
    /// Branch index of the phase unwrapping that realized the minimum.
    pub branch_k: i32,
    pub method: CriticalMethod,
}

/// Continuation output of the delayed closed-loop poles.
#[derive(Debug, Clone, PartialEq)]
pub struct RootLocus {
    /// Ascending delay values (s).
    pub taus: Vec<f64>,
    /// Tracked poles (rad/s), one inner vector per delay value; branch order
    /// is constant along the continuation.
    pub poles: Vec<Vec<Complex64>>,
    /// Delay and frequency at which the maximum real part changes sign.
    pub crossing: Option<(f64, f64)>,
}

/// Poles of the nominal (delay-free) closed loop: the four roots of
/// `1 + H(s) = 0` expanded as a quartic, sorted by imaginary part.
pub fn nominal_poles(model: &PiezoModel, shunt: &ShuntParams) -> Result<Vec<Complex64>> {
    let h = open_loop_tf(model, shunt)?;
    closed_loop_roots(&h)
}

/// Nominal closed-loop poles for an arbitrary emulated admittance.
pub fn admittance_poles(model: &PiezoModel, admittance: &RationalTF) -> Result<Vec<Complex64>> {
    closed_loop_roots(&crate::freq_analysis::loop_transfer(model, admittance))
}

fn closed_loop_roots(h: &RationalTF) -> Result<Vec<Complex64>> {
    let ch = poly::add(h.den(), h.num());
    let mut roots = poly::roots(&ch)?;
    roots.sort_by(|a, b| (a.im, a.re).partial_cmp(&(b.im, b.re)).unwrap());
    Ok(roots)
}

/// Rescale a plant/shunt pair to `omega_sc` = 1, `cp_eps` = 1.
fn normalize_pair(model: &PiezoModel, shunt: &ShuntParams) -> Result<(PiezoModel, ShuntParams)> {
    let w = model.omega_sc();
    let cp = model.cp_eps();
    let nm = model.normalized_view();
    let ns = ShuntParams::from_components(
        shunt.inductance * cp * w * w,
        shunt.resistance * cp * w,
        &nm,
    )?;
    Ok((nm, ns))
}

/// Delay multiplier of the characteristic equation and its partial
/// derivatives, evaluated at `(s, tau)`.
fn delay_factor(variant: DelayVariant, s: Complex64, tau: f64) -> (Complex64, Complex64, Complex64) {
    match variant {
        DelayVariant::PureDelay => {
            let e = (-0.5 * tau * s).exp();
            (e, -0.5 * tau * e, -0.5 * s * e)
        }
        DelayVariant::Zoh => {
            let d = zoh_response(tau, s);
            let x = tau * s;
            if x.norm() < 1e-6 {
                // d D/dx of the series; both partials follow from x = tau s.
                let ddx = Complex64::new(-0.5, 0.0) + x / 3.0 - x * x / 8.0;
                (d, ddx * tau, ddx * s)
            } else {
                let e = (-x).exp();
                let one = Complex64::new(1.0, 0.0);
                // dD/ds = e^(-x)/s - (1 - e^(-x))/(tau s^2)
                let dds = e / s - (one - e) / (tau * s * s);
                // dD/dtau = e^(-x)/tau - (1 - e^(-x))/(tau^2 s)
                let ddt = e / tau - (one - e) / (tau * tau * s);
                (d, dds, ddt)
            }
        }
    }
}

/// Characteristic function `F(s, tau) = 1 + H(s) D(s, tau)` with analytic
/// derivative in `s`. Dimensionless on the normalized plant.
pub(crate) struct DelayedCharacteristic<'a> {
    pub h: &'a RationalTF,
    pub variant: DelayVariant,
}

impl DelayedCharacteristic<'_> {
    pub fn eval(&self, s: Complex64, tau: f64) -> Complex64 {
        let (d, _, _) = delay_factor(self.variant, s, tau);
        Complex64::new(1.0, 0.0) + self.h.eval(s) * d
    }

    pub fn eval_ds(&self, s: Complex64, tau: f64) -> Complex64 {
        let (d, dds, _) = delay_factor(self.variant, s, tau);
        self.h.eval_derivative(s) * d + self.h.eval(s) * dds
    }

    /// Damped Newton correction from `guess` at fixed `tau`.
    ///
    /// Near the open-loop pole at `j omega_oc` a branch can be squeezed into
    /// the pole/zero gap, where evaluating `H` loses eps/distance digits and
    /// the residual bottoms out above `tol`. A vanishing Newton step (or a
    /// stalled line search) at a small residual is therefore accepted as
    /// convergence to working precision.
    pub fn refine(&self, guess: Complex64, tau: f64, tol: f64, max_iter: usize) -> Option<Complex64> {
        const NOISE_FLOOR: f64 = 1e-7;
        let mut s = guess;
        let mut f = self.eval(s, tau);
        for _ in 0..max_iter {
            if f.norm() < tol {
                return Some(s);
            }
            let df = self.eval_ds(s, tau);
            if df.norm() == 0.0 || !df.is_finite() {
                return None;
            }
            let full = f / df;
            let mut lambda = 1.0;
            loop {
                let step = lambda * full;
                let cand = s - step;
                let fc = self.eval(cand, tau);
                if fc.norm() < f.norm() {
                    s = cand;
                    f = fc;
                    if step.norm() <= 1e-13 * (1.0 + s.norm()) && f.norm() < NOISE_FLOOR {
                        return Some(s);
                    }
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-12 {
                    return (f.norm() < NOISE_FLOOR).then_some(s);
                }
            }
        }
        (f.norm() < tol).then_some(s)
    }
}

const NEWTON_TOL: f64 = 1e-12;
const MAX_STEP_HALVINGS: u32 = 8;

/// Continue the four nominal poles of the closed loop in the delay, with
/// adaptive step halving on correction failure, and locate the first
/// imaginary-axis crossing of the maximum real part.
pub fn root_locus(
    model: &PiezoModel,
    shunt: &ShuntParams,
    variant: DelayVariant,
    tau_max: f64,
    dtau: f64,
) -> Result<RootLocus> {
    if !(dtau > 0.0) || !(tau_max > 0.0) {
        return Err(Error::Domain("tau_max and dtau must be positive".into()));
    }
    let w_sc = model.omega_sc();
    let (nm, ns) = normalize_pair(model, shunt)?;
    let h = open_loop_tf(&nm, &ns)?;
    let chi = DelayedCharacteristic { h: &h, variant };

    // Normalized continuation: delays scale with omega_sc, poles with 1/omega_sc.
    let tau_max_n = tau_max * w_sc;
    let base_step = dtau * w_sc;

    let seeds = nominal_poles(&nm, &ns)?;
    let n_branches = seeds.len();

    let advance = |front: &[Complex64], tau: f64| -> Option<Vec<Complex64>> {
        let mut next = Vec::with_capacity(front.len());
        for &p in front {
            next.push(chi.refine(p, tau, NEWTON_TOL, 60)?);
        }
        // Branch collision means the correction merged two branches.
        for i in 0..next.len() {
            for j in i + 1..next.len() {
                if (next[i] - next[j]).norm() < 1e-9 {
                    return None;
                }
            }
        }
        Some(next)
    };

    let mut taus = vec![0.0];
    let mut fronts = vec![seeds.clone()];
    let mut tau = 0.0;
    while tau < tau_max_n {
        let mut step = base_step.min(tau_max_n - tau);
        let mut halvings = 0;
        let next = loop {
            match advance(fronts.last().unwrap(), tau + step) {
                Some(front) => break front,
                None => {
                    halvings += 1;
                    if halvings > MAX_STEP_HALVINGS {
                        // Name the branch that fails from the last good front.
                        let bad = fronts
                            .last()
                            .unwrap()
                            .iter()
                            .position(|&p| chi.refine(p, tau + step, NEWTON_TOL, 60).is_none())
                            .unwrap_or(0);
                        return Err(Error::BranchLost {
                            branch: bad,
                            tau: (tau + step) / w_sc,
                            detail: format!("Newton correction diverged after {MAX_STEP_HALVINGS} step halvings"),
                        });
                    }
                    step *= 0.5;
                }
            }
        };
        tau += step;
        taus.push(tau);
        fronts.push(next);
    }

    // Sign change of the maximum real part, refined by bisection in tau
    // (re-solving the front at each probe).
    let max_re = |front: &[Complex64]| front.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
    let mut crossing = None;
    for i in 1..fronts.len() {
        let (g0, g1) = (max_re(&fronts[i - 1]), max_re(&fronts[i]));
        if g0 < 0.0 && g1 >= 0.0 {
            let (mut ta, mut tb) = (taus[i - 1], taus[i]);
            let mut front = fronts[i - 1].clone();
            for _ in 0..80 {
                if (tb - ta) < 1e-12 * tb.max(1e-30) {
                    break;
                }
                let tm = 0.5 * (ta + tb);
                match advance(&front, tm) {
                    Some(fm) => {
                        if max_re(&fm) < 0.0 {
                            ta = tm;
                            front = fm;
                        } else {
                            tb = tm;
                        }
                    }
                    None => break,
                }
            }
            let at_cross = advance(&front, tb).unwrap_or_else(|| fronts[i].clone());
            let pole = at_cross
                .iter()
                .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap())
                .copied()
                .unwrap();
            crossing = Some((0.5 * (ta + tb) / w_sc, pole.im.abs() * w_sc));
            break;
        }
    }

    debug_assert_eq!(fronts[0].len(), n_branches);
    Ok(RootLocus {
        taus: taus.iter().map(|t| t / w_sc).collect(),
        poles: fronts
            .iter()
            .map(|f| f.iter().map(|p| p * w_sc).collect())
            .collect(),
        crossing,
    })
}

/// Normalized series critical delay `sqrt(6)(kc - kc^2) + (19/32) sqrt(3/2) kc^3`
/// (multiply by `1/omega_sc` for physical units).
pub(crate) fn series_tau_normalized(kc: f64) -> f64 {
    6.0f64.sqrt() * (kc - kc * kc) + 19.0 / 32.0 * (1.5f64).sqrt() * kc.powi(3)
}

/// Maclaurin-series critical frequency and delay of the equal-peak loop.
pub fn critical_delay_series(kc: f64, omega_sc: f64) -> Result<CriticalDelayResult> {
    if !(kc >= 0.0) || !(omega_sc > 0.0) {
        return Err(Error::Domain(format!(
            "series expansion needs kc >= 0 and omega_sc > 0, got kc = {kc}, omega_sc = {omega_sc}"
        )));
    }
    let omega_c = omega_sc * (1.0 + kc + 5.0 / 8.0 * kc * kc + 73.0 / 128.0 * kc.powi(3));
    Ok(CriticalDelayResult {
        omega_c,
        tau_c: series_tau_normalized(kc) / omega_sc,
        branch_k: 0,
        method: CriticalMethod::Series,
    })
}

/// Largest sampling period keeping the loop both stable (one tenth of the
/// series critical delay) and fast enough for the Nyquist rule of thumb
/// (thirty samples per short-circuit period). With a delay-anticipating
/// modified admittance only the Nyquist rule remains.
pub fn max_sampling_period(kc: f64, omega_sc: f64, modified: bool) -> Result<f64> {
    if !(kc >= 0.0) || !(omega_sc > 0.0) {
        return Err(Error::Domain(format!(
            "needs kc >= 0 and omega_sc > 0, got kc = {kc}, omega_sc = {omega_sc}"
        )));
    }
    let nyquist = std::f64::consts::TAU / 30.0;
    let bound = if modified {
        nyquist
    } else {
        nyquist.min(series_tau_normalized(kc) / 10.0)
    };
    Ok(bound / omega_sc)
}

/// Iterate `k` over this range when inverting the crossing phase condition.
const BRANCH_RANGE: std::ops::RangeInclusive<i32> = 0..=4;

/// Smallest delay at which a closed-loop pole reaches the imaginary axis.
///
/// Pure-delay variant: the magnitude condition `|H(j omega)| = 1` is a
/// quartic in `omega^2`, solved by companion-matrix eigenvalues; each real
/// positive root is mapped to the smallest positive delay through the phase
/// condition `tau = (2/omega)(arg(-H(j omega)) + 2 k pi)` and the overall
/// minimum wins. ZOH variant: the pure-delay crossing is refined by a damped
/// 2x2 Newton iteration on the exact characteristic equation restricted to
/// the imaginary axis.
pub fn critical_delay_numeric(
    model: &PiezoModel,
    shunt: &ShuntParams,
    variant: DelayVariant,
) -> Result<CriticalDelayResult> {
    let method = match variant {
        DelayVariant::Zoh => CriticalMethod::ZohNumeric,
        DelayVariant::PureDelay => CriticalMethod::PureDelayNumeric,
    };
    let w_sc = model.omega_sc();

    // Zero coupling short-circuits the loop gain question: the tuned loop is
    // undamped and any delay destabilizes it.
    if model.kc() < 1e-12 {
        return Ok(CriticalDelayResult { omega_c: w_sc, tau_c: 0.0, branch_k: 0, method });
    }

    let (nm, ns) = normalize_pair(model, shunt)?;
    let h = open_loop_tf(&nm, &ns)?;
    let (omega_n, tau_n, branch_k) = pure_delay_crossing(&nm, &ns, &h)?;

    let (omega_n, tau_n) = match variant {
        DelayVariant::PureDelay => (omega_n, tau_n),
        DelayVariant::Zoh => zoh_refine(&h, omega_n, tau_n)?,
    };

    Ok(CriticalDelayResult {
        omega_c: omega_n * w_sc,
        tau_c: tau_n / w_sc,
        branch_k,
        method,
    })
}

/// Normalized pure-delay crossing `(omega, tau, k)` via the quartic in
/// `omega^2`.
fn pure_delay_crossing(
    nm: &PiezoModel,
    ns: &ShuntParams,
    h: &RationalTF,
) -> Result<(f64, f64, i32)> {
    let w_oc2 = nm.omega_oc() * nm.omega_oc();
    let (l, r) = (ns.inductance, ns.resistance);

    // |den H(j omega)|^2 - |num H(j omega)|^2 as a polynomial in Om = omega^2:
    // (w_oc^2 - Om)^2 (L^2 Om^2 + R^2 Om) - (1 - Om)^2.
    let envelope = poly::conv(&[w_oc2 * w_oc2, -2.0 * w_oc2, 1.0], &[0.0, r * r, l * l]);
    let quartic = poly::add(&envelope, &[-1.0, 2.0, -1.0]);

    let mut best: Option<(f64, f64, i32)> = None;
    for root in poly::roots(&quartic)? {
        if root.im.abs() > 1e-8 * root.norm().max(1.0) || root.re <= 1e-12 {
            continue;
        }
        let omega = root.re.sqrt();
        let hv = h.eval_jomega(omega);
        if !hv.is_finite() {
            continue;
        }
        let ang = (-hv).arg();
        for k in BRANCH_RANGE {
            let tau = 2.0 / omega * (ang + std::f64::consts::TAU * k as f64);
            if tau > 1e-14 && best.is_none_or(|(_, t, _)| tau < t) {
                best = Some((omega, tau, k));
            }
        }
    }
    let (omega, tau, k) = best.ok_or(Error::NoFiniteCriticalDelay)?;
    Ok((omega, tau, k))
}

/// Damped Newton on the two real equations
/// `Re/Im { 1 + H(j omega) (1 - e^(-j omega tau)) / (j omega tau) } = 0`
/// with analytic Jacobian, seeded at the pure-delay crossing.
fn zoh_refine(h: &RationalTF, omega0: f64, tau0: f64) -> Result<(f64, f64)> {
    let chi = DelayedCharacteristic { h, variant: DelayVariant::Zoh };
    let (mut omega, mut tau) = (omega0, tau0);
    let f_norm = |w: f64, t: f64| chi.eval(Complex64::new(0.0, w), t).norm();
    let mut fnow = f_norm(omega, tau);
    for _ in 0..80 {
        if fnow < 1e-13 {
            return Ok((omega, tau));
        }
        let s = Complex64::new(0.0, omega);
        let f = chi.eval(s, tau);
        let dfd_omega = chi.eval_ds(s, tau) * Complex64::new(0.0, 1.0);
        let (_, _, ddt) = delay_factor(DelayVariant::Zoh, s, tau);
        let dfd_tau = h.eval(s) * ddt;

        let det = dfd_omega.re * dfd_tau.im - dfd_tau.re * dfd_omega.im;
        if det.abs() < 1e-300 {
            break;
        }
        let dw = (f.re * dfd_tau.im - dfd_tau.re * f.im) / det;
        let dt = (dfd_omega.re * f.im - f.re * dfd_omega.im) / det;

        let mut lambda = 1.0;
        loop {
            let (wn, tn) = (omega - lambda * dw, tau - lambda * dt);
            if tn > 0.0 && wn > 0.0 && f_norm(wn, tn) < fnow {
                omega = wn;
                tau = tn;
                fnow = f_norm(omega, tau);
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::Numerical(
                    "ZOH crossing refinement stalled; pure-delay seed may be far from a ZOH crossing".into(),
                ));
            }
        }
    }
    if fnow < 1e-10 {
        Ok((omega, tau))
    } else {
        Err(Error::Numerical(format!(
            "ZOH crossing refinement did not converge (residual {fnow:.3e})"
        )))
    }
}
