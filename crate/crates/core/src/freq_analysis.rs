//! Open- and closed-loop frequency-domain analysis: loop transfer functions,
//! stability margins, sampling-delay response multipliers and passivity
//! diagnostics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{shunt_admittance, PiezoModel, RationalTF, ShuntParams};
use crate::poly;

/// How the loop accounts for the sampling period `tau` of the digital unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayModel {
    /// Ideal continuous loop.
    None,
    /// Pure delay of half the sampling period: `e^(-tau s / 2)`.
    PureDelay(f64),
    /// Zero-order hold equivalent: `(1 - e^(-tau s)) / (tau s)`.
    Zoh(f64),
}

impl DelayModel {
    pub fn tau(&self) -> f64 {
        match *self {
            DelayModel::None => 0.0,
            DelayModel::PureDelay(t) | DelayModel::Zoh(t) => t,
        }
    }

    /// Frequency-response multiplier applied to the emulated admittance.
    pub fn response(&self, s: Complex64) -> Complex64 {
        match *self {
            DelayModel::None => Complex64::new(1.0, 0.0),
            DelayModel::PureDelay(tau) => (-0.5 * tau * s).exp(),
            DelayModel::Zoh(tau) => zoh_response(tau, s),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.tau();
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Domain(format!("delay tau must be non-negative, got {t}")));
        }
        Ok(())
    }
}

/// Equivalent continuous response of a zero-order hold,
/// `(1 - e^(-tau s)) / (tau s)`, with the removable singularity at `s = 0`
/// evaluated as 1. `tau = 0` returns 1.
pub fn zoh_response(tau: f64, s: Complex64) -> Complex64 {
    let x = tau * s;
    if x.norm() < 1e-3 {
        // Series for (1 - e^(-x))/x; truncation below 1e-14 relative.
        let one = Complex64::new(1.0, 0.0);
        one - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
    } else {
        (Complex64::new(1.0, 0.0) - (-x).exp()) / x
    }
}

/// Delayed admittance evaluated on the imaginary axis:
/// `Y(j omega) e^(-j omega tau / 2)`.
pub fn delayed_admittance(y: &RationalTF, tau: f64, omega: f64) -> Complex64 {
    y.eval_jomega(omega) * Complex64::new(0.0, -omega * tau / 2.0).exp()
}

/// Sampling period at which the delayed admittance of the linearized tuning
/// stops being passive at the open-circuit resonance:
/// `tau = (2 / omega_oc) atan(sqrt(3/2) kc)`.
pub fn passivity_loss_delay(model: &PiezoModel) -> f64 {
    2.0 / model.omega_oc() * ((1.5f64).sqrt() * model.kc()).atan()
}

/// Loop transfer function for an arbitrary shunt admittance `Y`:
/// `H(s) = (1/cp) (s^2 + w_sc^2) / (s (s^2 + w_oc^2)) * Y(s)`.
pub fn loop_transfer(model: &PiezoModel, admittance: &RationalTF) -> RationalTF {
    let w_sc2 = model.omega_sc() * model.omega_sc();
    let w_oc2 = model.omega_oc() * model.omega_oc();
    let inv_cp = 1.0 / model.cp_eps();
    let num = poly::conv(&[inv_cp * w_sc2, 0.0, inv_cp], admittance.num());
    let den = poly::conv(&[0.0, w_oc2, 0.0, 1.0], admittance.den());
    RationalTF::new(num, den).expect("loop polynomials are finite and nonzero")
}

/// Open-loop transfer function of the series RL feedback loop,
/// `H(s) = (1/cp) (s^2 + w_sc^2) / ((s^2 + w_oc^2)(L s^2 + R s))`.
pub fn open_loop_tf(model: &PiezoModel, shunt: &ShuntParams) -> Result<RationalTF> {
    Ok(loop_transfer(model, &shunt_admittance(shunt)?))
}

/// Frequency grid description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub log_spaced: bool,
}

impl FreqGrid {
    pub fn linear(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points, log_spaced: false }
    }

    pub fn log(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points, log_spaced: true }
    }

    /// Default resonant band for closed-loop response plots:
    /// 2000 linear points over [0.9, 1.15] omega_sc.
    pub fn resonant_band(model: &PiezoModel) -> Self {
        Self::linear(0.9 * model.omega_sc(), 1.15 * model.omega_sc(), 2000)
    }

    /// Default margin scan: 10^4 log points over [0.01, 100] omega_sc.
    pub fn margin_scan(model: &PiezoModel) -> Self {
        Self::log(0.01 * model.omega_sc(), 100.0 * model.omega_sc(), 10_000)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start > 0.0) || !(self.stop > self.start) || !self.stop.is_finite() {
            return Err(Error::Domain(format!(
                "grid must satisfy 0 < start < stop, got [{}, {}]",
                self.start, self.stop
            )));
        }
        if self.points < 2 {
            return Err(Error::Domain("grid needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if self.log_spaced {
            let (a, b) = (self.start.ln(), self.stop.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        } else {
            (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect()
        }
    }
}

/// Scaling applied to a frequency-response curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub k_sc: f64,
    pub omega_sc: f64,
}

/// Complex closed-loop compliance samples, normalized as `x k_sc / f`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrfCurve {
    pub omega: Vec<f64>,
    pub value: Vec<Complex64>,
    pub normalization: Normalization,
    /// Set when part of the requested grid lies beyond the ZOH Nyquist limit.
    pub warning: Option<String>,
}

impl FrfCurve {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.value.iter().map(|v| v.norm()).collect()
    }
}

/// Gain crossovers and the margins derived from them. The phase margin is
/// evaluated at the highest crossover; the gain margin is `f64::INFINITY`
/// when the phase never reaches -180 degrees in the scanned band.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub gain_crossovers: Vec<f64>,
    pub phase_margin_deg: f64,
    pub gain_margin_db: f64,
}

/// Locate all unity-gain crossings of `|H(j omega)|` by sign-change
/// bracketing on the grid followed by bisection, then report the margins.
pub fn stability_margins(h: &RationalTF, grid: &FreqGrid) -> Result<MarginReport> {
    grid.validate()?;
    let omegas = grid.values();
    let gain = |w: f64| h.eval_jomega(w).norm().ln();

    let mut crossovers = Vec::new();
    let mut prev = (omegas[0], gain(omegas[0]));
    for &w in &omegas[1..] {
        let g = gain(w);
        if prev.1 == 0.0 {
            crossovers.push(prev.0);
        } else if prev.1 * g < 0.0 {
            crossovers.push(bisect(prev.0, w, gain));
        }
        prev = (w, g);
    }
    if crossovers.is_empty() {
        return Err(Error::Diagnostic(format!(
            "no unity-gain crossover in [{:.3e}, {:.3e}] rad/s; widen the scan band",
            grid.start, grid.stop
        )));
    }

    let w_top = *crossovers.last().unwrap();
    let phase_margin_deg = 180.0 + h.eval_jomega(w_top).arg().to_degrees();

    // A -180 degree crossing is a sign change of Im H on the negative real
    // side of the Nyquist plot.
    let mut gain_margin_db = f64::INFINITY;
    let mut prev_v = h.eval_jomega(omegas[0]);
    let mut prev_w = omegas[0];
    for &w in &omegas[1..] {
        let v = h.eval_jomega(w);
        if prev_v.re < 0.0 && v.re < 0.0 && prev_v.im * v.im < 0.0 {
            let wc = bisect(prev_w, w, |x| h.eval_jomega(x).im);
            let hv = h.eval_jomega(wc);
            if hv.re < 0.0 && hv.is_finite() {
                let gm = -20.0 * hv.norm().log10();
                if gm < gain_margin_db {
                    gain_margin_db = gm;
                }
            }
        }
        prev_v = v;
        prev_w = w;
    }

    Ok(MarginReport { gain_crossovers: crossovers, phase_margin_deg, gain_margin_db })
}

/// Bisection to 1e-10 relative frequency tolerance. Assumes a sign change of
/// `f` across `[a, b]`.
fn bisect(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) <= 1e-10 * m {
            return m;
        }
        let fm = f(m);
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Closed-loop compliance of the controlled structure under an (optionally
/// delayed) emulated admittance.
///
/// Eliminating charge and voltage from the governing equations together with
/// `s q = Y_eff(s) V` gives
/// `x k_sc / f = w_sc^2 / (s^2 + w_oc^2 - (w_oc^2 - w_sc^2)/cp * Y_eff / (s + Y_eff/cp))`
/// with `Y_eff = Y * delay multiplier`; the mass scale cancels in the
/// `k_sc`-normalized output.
pub fn closed_loop_frf(
    model: &PiezoModel,
    admittance: &RationalTF,
    delay: &DelayModel,
    grid: &FreqGrid,
) -> Result<FrfCurve> {
    grid.validate()?;
    delay.validate()?;

    let mut warning = None;
    if let DelayModel::Zoh(tau) = *delay {
        if tau > 0.0 {
            let nyquist = std::f64::consts::PI / tau;
            if grid.stop > nyquist {
                warning = Some(format!(
                    "grid extends to {:.6e} rad/s beyond the ZOH fundamental-harmonic limit pi/tau = {:.6e} rad/s",
                    grid.stop, nyquist
                ));
            }
        }
    }

    let w_sc2 = model.omega_sc() * model.omega_sc();
    let w_oc2 = model.omega_oc() * model.omega_oc();
    let cp = model.cp_eps();
    let coupling = (w_oc2 - w_sc2) / cp;

    let omega = grid.values();
    let value = omega
        .iter()
        .map(|&w| {
            let s = Complex64::new(0.0, w);
            let y_eff = admittance.eval(s) * delay.response(s);
            let den = s * s + w_oc2 - coupling * y_eff / (s + y_eff / cp);
            w_sc2 / den
        })
        .collect();

    let (_, _, _, k_sc) = model.mechanical_params();
    Ok(FrfCurve {
        omega,
        value,
        normalization: Normalization { k_sc, omega_sc: model.omega_sc() },
        warning,
    })
}

/// A refined local maximum of a sampled magnitude curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrfPeak {
    pub omega: f64,
    pub amplitude: f64,
}

/// Local maxima of `|FRF|`, refined by a parabola through the three samples
/// around each discrete maximum.
pub fn find_frf_peaks(curve: &FrfCurve) -> Vec<FrfPeak> {
    let mags = curve.magnitudes();
    let mut peaks = Vec::new();
    for i in 1..mags.len().saturating_sub(1) {
        if mags[i] > mags[i - 1] && mags[i] >= mags[i + 1] {
            let (y0, y1, y2) = (mags[i - 1], mags[i], mags[i + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            if denom >= 0.0 {
                peaks.push(FrfPeak { omega: curve.omega[i], amplitude: y1 });
                continue;
            }
            // Parabola through (-1, y0), (0, y1), (1, y2) in units of the
            // local spacing; vertex offset and height.
            let t = (0.5 * (y0 - y2) / denom).clamp(-1.0, 1.0);
            let h_step = curve.omega[i] - curve.omega[i - 1];
            peaks.push(FrfPeak {
                omega: curve.omega[i] + t * h_step,
                amplitude: y1 - (y2 - y0) * (y2 - y0) / (8.0 * denom),
            });
        }
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{tune_series_rl, tune_series_rl_linearized};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};

    fn normalized(kc: f64) -> (PiezoModel, ShuntParams) {
        let model = PiezoModel::normalized(kc).unwrap();
        let shunt = tune_series_rl(&model).unwrap();
        (model, shunt)
    }

    #[test]
    fn open_loop_structure() {
        let (model, shunt) = normalized(0.1);
        let h = open_loop_tf(&model, &shunt).unwrap();
        assert_eq!(h.num_degree(), 2);
        assert_eq!(h.den_degree(), 4);
        // Zero of the loop at the short-circuit resonance.
        assert!(h.eval_jomega(model.omega_sc()).norm() < 1e-12);
        // Relative degree 2: the response vanishes at high frequency.
        assert!(h.eval_jomega(1e6).norm() < 1e-9);
    }

    #[test]
    fn margins_three_crossovers_and_infinite_gain_margin() {
        let (model, shunt) = normalized(0.1);
        let h = open_loop_tf(&model, &shunt).unwrap();
        let report = stability_margins(&h, &FreqGrid::margin_scan(&model)).unwrap();
        assert_eq!(report.gain_crossovers.len(), 3);
        assert!(report.gain_margin_db.is_infinite());
        assert!(report.phase_margin_deg > 0.0);
    }

    #[test]
    fn margins_error_when_band_excludes_crossovers() {
        let (model, shunt) = normalized(0.1);
        let h = open_loop_tf(&model, &shunt).unwrap();
        let narrow = FreqGrid::log(20.0, 30.0, 64);
        assert!(matches!(stability_margins(&h, &narrow), Err(Error::Diagnostic(_))));
    }

    #[test]
    fn phase_margin_grows_with_coupling() {
        // Small coupling leaves the loop barely away from -180 degrees; the
        // margin grows monotonically with kc over the physical range.
        let mut last = -1.0;
        for i in 0..20 {
            let kc = 0.01 + (0.2 - 0.01) * i as f64 / 19.0;
            let (model, shunt) = normalized(kc);
            let h = open_loop_tf(&model, &shunt).unwrap();
            let report = stability_margins(&h, &FreqGrid::margin_scan(&model)).unwrap();
            assert!(
                report.phase_margin_deg > last,
                "phase margin not increasing at kc = {kc}"
            );
            last = report.phase_margin_deg;
        }
    }

    #[test]
    fn phase_margin_refinement_oracle() {
        // Independent check: dense-grid argmin of ||H| - 1| at 10x the scan
        // resolution around the reported top crossover.
        let (model, shunt) = normalized(0.05);
        let h = open_loop_tf(&model, &shunt).unwrap();
        let report = stability_margins(&h, &FreqGrid::margin_scan(&model)).unwrap();
        let w_top = *report.gain_crossovers.last().unwrap();

        let lo = w_top * 0.999;
        let hi = w_top * 1.001;
        let mut best = (f64::INFINITY, lo);
        for i in 0..100_000 {
            let w = lo + (hi - lo) * i as f64 / 99_999.0;
            let miss = (h.eval_jomega(w).norm() - 1.0).abs();
            if miss < best.0 {
                best = (miss, w);
            }
        }
        let pm_oracle = 180.0 + h.eval_jomega(best.1).arg().to_degrees();
        assert_relative_eq!(report.phase_margin_deg, pm_oracle, max_relative = 1e-5);
    }

    #[test]
    fn zoh_response_limits() {
        assert_eq!(zoh_response(0.0, Complex64::new(0.3, 0.7)), Complex64::new(1.0, 0.0));
        let near_zero = zoh_response(1e-3, Complex64::new(0.0, 1e-9));
        assert_relative_eq!(near_zero.re, 1.0, max_relative = 1e-12);
        // Zero at the sampling frequency.
        let tau = 0.37;
        let at_fs = zoh_response(tau, Complex64::new(0.0, std::f64::consts::TAU / tau));
        assert!(at_fs.norm() < 1e-12);
    }

    #[test]
    fn zoh_close_to_half_sample_delay() {
        // Relative difference from e^(-j w tau/2) is |sinc(w tau/2) - 1| <
        // (w tau / 2)^2 / 6 for w tau < 0.5.
        let tau = 0.05;
        for i in 1..50 {
            let omega = 0.2 * i as f64; // up to w tau = 0.5
            let zoh = zoh_response(tau, Complex64::new(0.0, omega));
            let pure = Complex64::new(0.0, -omega * tau / 2.0).exp();
            let rel = (zoh - pure).norm() / pure.norm();
            let bound = (omega * tau / 2.0).powi(2) / 6.0;
            assert!(rel < bound, "rel {rel} >= bound {bound} at omega {omega}");
        }
    }

    #[test]
    fn delayed_admittance_rotation() {
        let shunt = normalized(0.08).1;
        let y = shunt_admittance(&shunt).unwrap();
        let (tau, omega) = (0.21, 1.3);
        assert_eq!(delayed_admittance(&y, 0.0, omega), y.eval_jomega(omega));
        let rotated = delayed_admittance(&y, tau, omega);
        let expected_arg = y.eval_jomega(omega).arg() - omega * tau / 2.0;
        let two_pi = std::f64::consts::TAU;
        let wrap = (rotated.arg() - expected_arg).rem_euclid(two_pi);
        assert!(wrap < 1e-12 || (two_pi - wrap) < 1e-12);
    }

    #[test]
    fn passivity_boundary_rotation_reaches_imaginary_axis() {
        let model = PiezoModel::from_hertz(31.08, 31.29, 245e-9).unwrap();
        let shunt = tune_series_rl_linearized(&model);
        let y = shunt_admittance(&shunt).unwrap();
        let tau = passivity_loss_delay(&model);
        let yd = delayed_admittance(&y, tau, model.omega_oc());
        assert!(yd.re.abs() < 1e-10 * yd.norm());
    }

    #[test]
    fn passivity_loss_values() {
        // Frozen 40-digit evaluations of 2 atan(sqrt(3/2) kc) / w_oc.
        let model = PiezoModel::from_hertz(31.08, 31.29, 245e-9).unwrap();
        assert_relative_eq!(passivity_loss_delay(&model), 1.441_079_691_995_240_5e-3, max_relative = 1e-13);
        let rounded = PiezoModel::from_modal(
            model.omega_oc() / (1.0 + 0.116f64.powi(2)).sqrt(),
            0.116,
            245e-9,
        )
        .unwrap();
        assert_relative_eq!(passivity_loss_delay(&rounded), 1.435_659_649_466_054_6e-3, max_relative = 1e-12);
        let zero = PiezoModel::from_modal(1.0, 0.0, 1.0).unwrap();
        assert_eq!(passivity_loss_delay(&zero), 0.0);
    }

    #[test]
    fn passivity_first_order_coefficient() {
        // tau w_oc / kc tends to sqrt(6) as kc goes to zero.
        let model = PiezoModel::from_modal(1.0, 1e-6, 1.0).unwrap();
        let ratio = passivity_loss_delay(&model) * model.omega_oc() / model.kc();
        assert_relative_eq!(ratio, 6.0f64.sqrt(), max_relative = 1e-9);
    }

    /// Independent closure oracle: solve the 3x3 frequency-domain system in
    /// (x, q, V) per grid point instead of using the eliminated formula.
    fn frf_oracle(model: &PiezoModel, y: &RationalTF, delay: &DelayModel, omega: f64) -> Complex64 {
        let (m, k_oc, theta, k_sc) = model.mechanical_params();
        let s = Complex64::new(0.0, omega);
        let y_eff = y.eval(s) * delay.response(s);
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        // Rows: force balance, voltage definition, admittance relation.
        let a = Matrix3::new(
            m * s * s + k_oc,
            Complex64::new(-theta, 0.0),
            zero,
            Complex64::new(-theta, 0.0),
            Complex64::new(1.0 / model.cp_eps(), 0.0),
            one,
            zero,
            s,
            -y_eff,
        );
        let b = Vector3::new(one, zero, zero);
        let sol = a.lu().solve(&b).expect("nonsingular closure system");
        sol[0] * k_sc
    }

    #[test]
    fn closed_loop_frf_matches_linear_system_oracle() {
        for &kc in &[0.01, 0.1] {
            let (model, shunt) = normalized(kc);
            let y = shunt_admittance(&shunt).unwrap();
            for delay in [DelayModel::None, DelayModel::PureDelay(0.11), DelayModel::Zoh(0.11)] {
                let grid = FreqGrid::linear(0.9, 1.15, 40);
                let curve = closed_loop_frf(&model, &y, &delay, &grid).unwrap();
                for (i, &w) in curve.omega.iter().enumerate() {
                    let oracle = frf_oracle(&model, &y, &delay, w);
                    let diff = (curve.value[i] - oracle).norm() / oracle.norm();
                    assert!(diff < 1e-10, "closure mismatch {diff} at omega {w}, {delay:?}");
                }
            }
        }
    }

    #[test]
    fn closed_loop_frf_equal_peaks() {
        let (model, shunt) = normalized(0.1);
        let y = shunt_admittance(&shunt).unwrap();
        let grid = FreqGrid::linear(0.8, 1.2, 4000);
        let curve = closed_loop_frf(&model, &y, &DelayModel::None, &grid).unwrap();
        let peaks = find_frf_peaks(&curve);
        assert_eq!(peaks.len(), 2);
        let (a1, a2) = (peaks[0].amplitude, peaks[1].amplitude);
        assert!((a1 - a2).abs() / a1.max(a2) < 0.01, "peaks {a1} vs {a2}");
    }

    #[test]
    fn closed_loop_frf_nyquist_warning() {
        let (model, shunt) = normalized(0.1);
        let y = shunt_admittance(&shunt).unwrap();
        let grid = FreqGrid::linear(0.9, 1.15, 50);
        let curve = closed_loop_frf(&model, &y, &DelayModel::Zoh(4.0), &grid).unwrap();
        assert!(curve.warning.is_some());
        let ok = closed_loop_frf(&model, &y, &DelayModel::Zoh(0.1), &grid).unwrap();
        assert!(ok.warning.is_none());
    }

    #[test]
    fn conjugate_symmetry_on_axis() {
        let (model, shunt) = normalized(0.07);
        let h = open_loop_tf(&model, &shunt).unwrap();
        for &w in &[0.1, 0.93, 1.0001, 2.7, 40.0] {
            let plus = h.eval(Complex64::new(0.0, w));
            let minus = h.eval(Complex64::new(0.0, -w));
            assert!((minus - plus.conj()).norm() <= 1e-14 * plus.norm());
        }
    }
}
