//! Electromechanical plant definition, coupling metrics and optimal shunt tuning.
//!
//! The canonical parameterization is modal: short-circuit resonance `omega_sc`,
//! coupling factor `kc` and blocked capacitance `cp_eps`. Everything downstream
//! of the governing equations depends only on those three numbers (plus overall
//! mass/stiffness scale factors), so physical data (mass, stiffness, coupling
//! coefficient) are converted on construction and kept only for rehydration.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly;

/// Largest coupling factor for which the optimal-tuning radicand stays
/// non-negative: sqrt((12*sqrt(3) - 4) / 13).
pub fn max_tunable_kc() -> f64 {
    ((12.0 * 3.0f64.sqrt() - 4.0) / 13.0).sqrt()
}

/// Effective electromechanical coupling factor from the short- and
/// open-circuit resonance frequencies (rad/s).
pub fn eemcf(omega_sc: f64, omega_oc: f64) -> Result<f64> {
    if !(omega_sc > 0.0) || !omega_sc.is_finite() || !omega_oc.is_finite() {
        return Err(Error::Domain(format!(
            "frequencies must be positive and finite, got omega_sc = {omega_sc}, omega_oc = {omega_oc}"
        )));
    }
    if omega_oc < omega_sc {
        return Err(Error::Domain(format!(
            "omega_oc ({omega_oc}) must not be below omega_sc ({omega_sc})"
        )));
    }
    // Factored form avoids cancellation for nearly equal frequencies.
    Ok(((omega_oc - omega_sc) * (omega_oc + omega_sc)).sqrt() / omega_sc)
}

/// Single-mode piezoelectric structure.
///
/// Constructible from modal data (`omega_sc`, `kc` or `omega_oc`, `cp_eps`) or
/// from physical data (`mass`, `k_oc`, `theta_p`, `cp_eps`).
#[derive(Debug, Clone, PartialEq)]
pub struct PiezoModel {
    omega_sc: f64,
    kc: f64,
    cp_eps: f64,
    mass: Option<f64>,
    theta_p: Option<f64>,
}

impl PiezoModel {
    /// Build from short- and open-circuit resonance frequencies (rad/s) and
    /// blocked capacitance (F).
    pub fn from_frequencies(omega_sc: f64, omega_oc: f64, cp_eps: f64) -> Result<Self> {
        let kc = eemcf(omega_sc, omega_oc)?;
        Self::from_modal(omega_sc, kc, cp_eps)
    }

    /// Build from resonance frequencies in Hz.
    pub fn from_hertz(f_sc: f64, f_oc: f64, cp_eps: f64) -> Result<Self> {
        let tau = std::f64::consts::TAU;
        Self::from_frequencies(tau * f_sc, tau * f_oc, cp_eps)
    }

    /// Build from the modal triple (`omega_sc` rad/s, coupling factor, capacitance F).
    pub fn from_modal(omega_sc: f64, kc: f64, cp_eps: f64) -> Result<Self> {
        if !(omega_sc > 0.0) || !omega_sc.is_finite() {
            return Err(Error::Domain(format!("omega_sc must be positive, got {omega_sc}")));
        }
        if !(kc >= 0.0) || !kc.is_finite() {
            return Err(Error::Domain(format!("kc must be non-negative, got {kc}")));
        }
        if !(cp_eps > 0.0) || !cp_eps.is_finite() {
            return Err(Error::Domain(format!("cp_eps must be positive, got {cp_eps}")));
        }
        Ok(Self { omega_sc, kc, cp_eps, mass: None, theta_p: None })
    }

    /// Build from physical data: mass (kg), open-circuit stiffness (N/m),
    /// coupling coefficient (N/C) and blocked capacitance (F).
    pub fn from_physical(mass: f64, k_oc: f64, theta_p: f64, cp_eps: f64) -> Result<Self> {
        if !(mass > 0.0) || !(k_oc > 0.0) || !(cp_eps > 0.0) {
            return Err(Error::Domain(
                "mass, k_oc and cp_eps must all be positive".into(),
            ));
        }
        let k_sc = k_oc - theta_p * theta_p * cp_eps;
        if !(k_sc > 0.0) {
            return Err(Error::Domain(format!(
                "short-circuit stiffness k_oc - theta_p^2 cp_eps = {k_sc} must be positive"
            )));
        }
        let omega_sc = (k_sc / mass).sqrt();
        let omega_oc = (k_oc / mass).sqrt();
        let kc = eemcf(omega_sc, omega_oc)?;
        Ok(Self { omega_sc, kc, cp_eps, mass: Some(mass), theta_p: Some(theta_p) })
    }

    /// Unit-normalized model (`omega_sc` = 1, `cp_eps` = 1) for a given coupling.
    pub fn normalized(kc: f64) -> Result<Self> {
        Self::from_modal(1.0, kc, 1.0)
    }

    /// The same plant rescaled to `omega_sc` = 1 and `cp_eps` = 1 (coupling is
    /// scale invariant). Physical fields are dropped.
    pub fn normalized_view(&self) -> Self {
        Self { omega_sc: 1.0, kc: self.kc, cp_eps: 1.0, mass: None, theta_p: None }
    }

    pub fn omega_sc(&self) -> f64 {
        self.omega_sc
    }

    /// Open-circuit resonance, recomputed from the stored coupling.
    pub fn omega_oc(&self) -> f64 {
        self.omega_sc * (1.0 + self.kc * self.kc).sqrt()
    }

    pub fn kc(&self) -> f64 {
        self.kc
    }

    pub fn cp_eps(&self) -> f64 {
        self.cp_eps
    }

    pub fn mass(&self) -> Option<f64> {
        self.mass
    }

    pub fn theta_p(&self) -> Option<f64> {
        self.theta_p
    }

    /// Short-circuit stiffness, defined when a mass is known.
    pub fn k_sc(&self) -> Option<f64> {
        self.mass.map(|m| m * self.omega_sc * self.omega_sc)
    }

    /// Open-circuit stiffness, defined when a mass is known.
    pub fn k_oc(&self) -> Option<f64> {
        self.mass.map(|m| m * self.omega_oc() * self.omega_oc())
    }

    /// Mechanical parameters `(m, k_oc, theta_p, k_sc)` used by the
    /// time-domain simulator. A modal-only model is given unit mass; this
    /// leaves every `k_sc`-normalized output unchanged.
    pub fn mechanical_params(&self) -> (f64, f64, f64, f64) {
        let m = self.mass.unwrap_or(1.0);
        let w_oc = self.omega_oc();
        let k_oc = m * w_oc * w_oc;
        let k_sc = m * self.omega_sc * self.omega_sc;
        let theta = self
            .theta_p
            .unwrap_or_else(|| ((k_oc - k_sc) / self.cp_eps).sqrt());
        (m, k_oc, theta, k_sc)
    }
}

/// Series RL shunt values with the dimensionless electrical frequency and
/// damping ratios they imply for a given plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuntParams {
    pub inductance: f64,
    pub resistance: f64,
    /// Electrical frequency ratio: `delta^2 L omega_oc^2 cp_eps = 1`.
    pub delta: f64,
    /// Electrical damping ratio: `R = 2 zeta / (delta omega_oc cp_eps)`.
    pub zeta: f64,
}

impl ShuntParams {
    /// Wrap explicit component values, deriving the dimensionless ratios from
    /// the plant they will be connected to.
    pub fn from_components(inductance: f64, resistance: f64, model: &PiezoModel) -> Result<Self> {
        if !(inductance > 0.0) || !inductance.is_finite() {
            return Err(Error::Domain(format!("inductance must be positive, got {inductance}")));
        }
        if !(resistance >= 0.0) || !resistance.is_finite() {
            return Err(Error::Domain(format!("resistance must be non-negative, got {resistance}")));
        }
        let w_oc = model.omega_oc();
        let delta = 1.0 / (inductance * w_oc * w_oc * model.cp_eps()).sqrt();
        let zeta = 0.5 * resistance * delta * w_oc * model.cp_eps();
        Ok(Self { inductance, resistance, delta, zeta })
    }
}

/// Electrical frequency ratio of the exact equal-peak tuning.
fn tuning_delta(kc: f64) -> Result<f64> {
    let k2 = kc * kc;
    let radicand = 64.0 - 16.0 * k2 - 26.0 * k2 * k2;
    if radicand < 0.0 {
        return Err(Error::Domain(format!(
            "coupling kc = {kc} exceeds the tunable bound {:.6}",
            max_tunable_kc()
        )));
    }
    let r = (radicand.sqrt() - k2) / 8.0;
    Ok(((3.0 * k2 - 4.0 * r + 8.0) / (4.0 * k2 + 4.0)).sqrt())
}

/// Electrical damping ratio of the exact equal-peak tuning.
fn tuning_zeta(kc: f64) -> f64 {
    let k2 = kc * kc;
    let r = ((64.0 - 16.0 * k2 - 26.0 * k2 * k2).sqrt() - k2) / 8.0;
    let s = 27.0 * k2 * k2 + k2 * (80.0 - 48.0 * r) - 64.0 * (r - 1.0);
    (s / 2.0).sqrt() / (5.0 * k2 + 8.0)
}

/// Exact equal-peak series RL tuning.
pub fn tune_series_rl(model: &PiezoModel) -> Result<ShuntParams> {
    let kc = model.kc();
    let delta = tuning_delta(kc)?;
    let zeta = tuning_zeta(kc);
    let w_oc = model.omega_oc();
    let cp = model.cp_eps();
    let inductance = 1.0 / (delta * delta * w_oc * w_oc * cp);
    let resistance = 2.0 * zeta / (delta * w_oc * cp);
    Ok(ShuntParams { inductance, resistance, delta, zeta })
}

/// First-order (in the coupling factor) series RL tuning.
pub fn tune_series_rl_linearized(model: &PiezoModel) -> ShuntParams {
    let w_oc = model.omega_oc();
    let cp = model.cp_eps();
    let inductance = 1.0 / (cp * w_oc * w_oc);
    let resistance = (1.5f64).sqrt() * model.kc() / (w_oc * cp);
    ShuntParams {
        inductance,
        resistance,
        delta: 1.0,
        zeta: 0.5 * (1.5f64).sqrt() * model.kc(),
    }
}

/// Real-coefficient rational function of `s`, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalTF {
    /// High-order zero coefficients are stripped; the denominator must not be
    /// identically zero.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let num = poly::trim(num);
        let den = poly::trim(den);
        if num.is_empty() || den.is_empty() {
            return Err(Error::Domain("empty coefficient list".into()));
        }
        if den.iter().all(|&c| c == 0.0) {
            return Err(Error::Domain("denominator is identically zero".into()));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        Ok(Self { num, den })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn num_degree(&self) -> usize {
        self.num.len() - 1
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    pub fn is_proper(&self) -> bool {
        self.num_degree() <= self.den_degree()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly::eval(&self.num, s) / poly::eval(&self.den, s)
    }

    pub fn eval_jomega(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, omega))
    }

    /// Derivative d/ds by the quotient rule.
    pub fn eval_derivative(&self, s: Complex64) -> Complex64 {
        let n = poly::eval(&self.num, s);
        let d = poly::eval(&self.den, s);
        let np = poly::eval(&poly::derivative(&self.num), s);
        let dp = poly::eval(&poly::derivative(&self.den), s);
        (np * d - n * dp) / (d * d)
    }
}

/// Admittance of a series RL shunt: `Y(s) = 1 / (L s + R)`.
pub fn shunt_admittance(shunt: &ShuntParams) -> Result<RationalTF> {
    if !(shunt.inductance > 0.0) {
        return Err(Error::Domain("shunt inductance must be positive".into()));
    }
    RationalTF::new(vec![1.0], vec![shunt.resistance, shunt.inductance])
}

/// Voltage-to-charge transfer magnitude of the blocked transducer:
/// `cp_eps (s^2 + omega_oc^2) / (s^2 + omega_sc^2)`.
///
/// The physical ratio `q/V` is the *negative* of the returned function; the
/// sign is kept out of the coefficients so the result can be used directly as
/// a positive dynamic capacitance.
pub fn dynamic_capacitance(model: &PiezoModel) -> RationalTF {
    let w_sc2 = model.omega_sc() * model.omega_sc();
    let w_oc2 = model.omega_oc() * model.omega_oc();
    let cp = model.cp_eps();
    RationalTF::new(vec![cp * w_oc2, 0.0, cp], vec![w_sc2, 0.0, 1.0])
        .expect("coefficients are finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Frozen with a 40-digit evaluation of the tuning formulas (normalized
    // plant: omega_sc = 1, cp_eps = 1, kc = 0.1).
    const L_NORM_KC01: f64 = 0.990_078_306_115_226_4;
    const R_NORM_KC01: f64 = 0.121_770_463_990_997_94;
    const DELTA_KC01: f64 = 1.000_010_455_575_787;
    const ZETA_KC01: f64 = 0.061_189_540_636_975_86;

    // Frozen 40-digit values for the f_sc = 31.08 Hz, f_oc = 31.29 Hz,
    // cp_eps = 245 nF fixture.
    const KC_BEAM: f64 = 0.116_443_837_429_824_9;
    const L_BEAM: f64 = 105.595_742_262_992_83;
    const R_BEAM: f64 = 2_957.629_861_793_496;
    const R_BEAM_LINEARIZED: f64 = 2_960.810_572_831_141;

    fn beam() -> PiezoModel {
        PiezoModel::from_hertz(31.08, 31.29, 245e-9).unwrap()
    }

    #[test]
    fn eemcf_beam_fixture() {
        let tau = std::f64::consts::TAU;
        let kc = eemcf(tau * 31.08, tau * 31.29).unwrap();
        assert_relative_eq!(kc, 0.116, max_relative = 5e-3);
        assert_relative_eq!(kc, KC_BEAM, max_relative = 1e-14);
    }

    #[test]
    fn eemcf_equal_frequencies_is_zero() {
        assert_eq!(eemcf(7.3, 7.3).unwrap(), 0.0);
    }

    #[test]
    fn eemcf_algebraic_inversion() {
        assert_relative_eq!(eemcf(1.0, 1.01f64.sqrt()).unwrap(), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn eemcf_rejects_bad_ordering() {
        assert!(eemcf(2.0, 1.0).is_err());
        assert!(eemcf(0.0, 1.0).is_err());
    }

    #[test]
    fn tuning_matches_beam_fixture() {
        let shunt = tune_series_rl(&beam()).unwrap();
        assert_relative_eq!(shunt.inductance, 105.7, max_relative = 5e-3);
        assert_relative_eq!(shunt.resistance, 2961.0, max_relative = 1e-2);
        assert_relative_eq!(shunt.inductance, L_BEAM, max_relative = 1e-12);
        assert_relative_eq!(shunt.resistance, R_BEAM, max_relative = 1e-12);
    }

    #[test]
    fn tuning_zero_coupling_limit() {
        let model = PiezoModel::from_modal(3.0, 0.0, 0.5).unwrap();
        let shunt = tune_series_rl(&model).unwrap();
        let w_oc = model.omega_oc();
        assert_relative_eq!(shunt.inductance, 1.0 / (w_oc * w_oc * 0.5), max_relative = 1e-15);
        assert_eq!(shunt.resistance, 0.0);
        assert_eq!(shunt.zeta, 0.0);
        assert_relative_eq!(shunt.delta, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn tuning_against_high_precision_oracle() {
        let shunt = tune_series_rl(&PiezoModel::normalized(0.1).unwrap()).unwrap();
        assert_relative_eq!(shunt.inductance, L_NORM_KC01, max_relative = 1e-13);
        assert_relative_eq!(shunt.resistance, R_NORM_KC01, max_relative = 1e-13);
        assert_relative_eq!(shunt.delta, DELTA_KC01, max_relative = 1e-13);
        assert_relative_eq!(shunt.zeta, ZETA_KC01, max_relative = 1e-13);
    }

    #[test]
    fn tuning_rejects_excessive_coupling() {
        let model = PiezoModel::from_modal(1.0, 1.2, 1.0).unwrap();
        let err = tune_series_rl(&model).unwrap_err();
        assert!(err.to_string().contains("1.136"), "bound missing: {err}");
    }

    #[test]
    fn tuning_delta_l_consistency() {
        for &kc in &[0.0, 0.01, 0.05, 0.116, 0.3, 1.0] {
            let model = PiezoModel::from_modal(2.0, kc, 3e-7).unwrap();
            let s = tune_series_rl(&model).unwrap();
            let w_oc = model.omega_oc();
            let prod = s.inductance * s.delta * s.delta * w_oc * w_oc * model.cp_eps();
            assert_relative_eq!(prod, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn linearized_beam_resistance() {
        // Direct evaluation sqrt(3/2) * Kc / (2 pi 31.29 * 245e-9).
        let shunt = tune_series_rl_linearized(&beam());
        assert_relative_eq!(shunt.resistance, R_BEAM_LINEARIZED, max_relative = 1e-13);
        // Spec-quoted arithmetic with the rounded Kc = 0.116.
        assert_relative_eq!(shunt.resistance, 2949.4170819833851, max_relative = 5e-3);
        // Cross-check against the full tuning.
        let full = tune_series_rl(&beam()).unwrap();
        assert_relative_eq!(shunt.resistance, full.resistance, max_relative = 1e-2);
        assert_relative_eq!(shunt.inductance, full.inductance, max_relative = 1e-2);
    }

    #[test]
    fn linearized_zero_coupling() {
        let model = PiezoModel::from_modal(5.0, 0.0, 1e-6).unwrap();
        assert_eq!(tune_series_rl_linearized(&model).resistance, 0.0);
    }

    #[test]
    fn linearized_normalized_inductance() {
        let model = PiezoModel::from_modal(1.0, 0.1, 1.0).unwrap();
        let w_oc = model.omega_oc();
        let shunt = tune_series_rl_linearized(&model);
        assert_relative_eq!(shunt.inductance, 1.0 / (w_oc * w_oc), max_relative = 1e-15);
    }

    #[test]
    fn admittance_series_rl() {
        let model = beam();
        let shunt = ShuntParams::from_components(105.7, 2961.0, &model).unwrap();
        let y = shunt_admittance(&shunt).unwrap();
        assert_eq!(y.num(), &[1.0]);
        assert_eq!(y.den(), &[2961.0, 105.7]);
        // DC limit 1/R.
        let dc = y.eval(Complex64::new(0.0, 0.0));
        assert_relative_eq!(dc.re, 1.0 / 2961.0, max_relative = 1e-15);
    }

    #[test]
    fn admittance_pure_integrator() {
        let model = PiezoModel::normalized(0.1).unwrap();
        let y = shunt_admittance(&ShuntParams::from_components(1.0, 0.0, &model).unwrap()).unwrap();
        let s = Complex64::new(0.0, 2.0);
        assert!((y.eval(s) - 1.0 / s).norm() < 1e-15);
    }

    #[test]
    fn dynamic_capacitance_limits() {
        let model = beam();
        let c = dynamic_capacitance(&model);
        // High-frequency magnitude tends to cp_eps.
        let hi = c.eval_jomega(1e9 * model.omega_oc()).norm();
        assert_relative_eq!(hi, model.cp_eps(), max_relative = 1e-9);
        // Zero at the open-circuit resonance.
        let at_oc = c.eval_jomega(model.omega_oc()).norm();
        assert!(at_oc < 1e-12 * model.cp_eps());
        // DC value, frozen from a 40-digit evaluation: cp (w_oc/w_sc)^2.
        let dc = c.eval(Complex64::new(0.0, 0.0)).re;
        assert_relative_eq!(dc, 2.483_219_959_824_689_6e-7, max_relative = 1e-13);
        assert_relative_eq!(
            dc,
            model.cp_eps() * (1.0 + model.kc() * model.kc()),
            max_relative = 1e-13
        );
    }

    #[test]
    fn physical_construction_round_trip() {
        let (m, k_oc, theta, cp) = (0.5, 2.0e4, 30.0, 245e-9);
        let model = PiezoModel::from_physical(m, k_oc, theta, cp).unwrap();
        let w_sc2 = (k_oc - theta * theta * cp) / m;
        assert_relative_eq!(model.omega_sc() * model.omega_sc(), w_sc2, max_relative = 1e-12);
        assert_relative_eq!(model.k_oc().unwrap(), k_oc, max_relative = 1e-12);
        assert_eq!(model.mass(), Some(m));
        assert_eq!(model.theta_p(), Some(theta));
    }

    #[test]
    fn tuning_consistency_full_vs_linearized() {
        // O(kc^2) agreement: relative difference below 5 kc over a 50-point grid.
        for i in 0..50 {
            let kc = 0.001 + (0.2 - 0.001) * i as f64 / 49.0;
            let model = PiezoModel::from_modal(2.0 * std::f64::consts::PI * 31.08, kc, 245e-9).unwrap();
            let full = tune_series_rl(&model).unwrap();
            let lin = tune_series_rl_linearized(&model);
            let dl = (full.inductance - lin.inductance).abs() / full.inductance;
            let dr = (full.resistance - lin.resistance).abs() / full.resistance;
            assert!(dl < 5.0 * kc, "inductance mismatch {dl} at kc = {kc}");
            assert!(dr < 5.0 * kc, "resistance mismatch {dr} at kc = {kc}");
        }
    }

    #[test]
    fn eemcf_round_trip_via_model() {
        // The stored coupling is exact; recovering it from the frequency pair
        // costs eps/kc^2 in the subtraction, so 1e-12 relative is attainable
        // only for kc above roughly 0.02.
        for &kc in &[1e-3, 0.01, 0.05, 0.116, 0.3] {
            let model = PiezoModel::from_modal(7.0, kc, 1e-7).unwrap();
            assert_eq!(model.kc(), kc);
        }
        for &kc in &[0.05, 0.116, 0.3] {
            let model = PiezoModel::from_modal(7.0, kc, 1e-7).unwrap();
            let back = eemcf(model.omega_sc(), model.omega_oc()).unwrap();
            assert_relative_eq!(back, kc, max_relative = 1e-12);
        }
    }

    #[test]
    fn normalization_invariance_power_of_two_exact() {
        // Power-of-two factors commute exactly with every rounding step, so
        // the scaling law holds bitwise when the raw inputs are scaled.
        let (w_sc, w_oc, cp) = (3.0, 3.07, 2e-7);
        let tuned = tune_series_rl(&PiezoModel::from_frequencies(w_sc, w_oc, cp).unwrap()).unwrap();
        for (alpha, beta) in [(2.0, 4.0), (0.5, 8.0), (64.0, 0.125)] {
            let scaled =
                PiezoModel::from_frequencies(alpha * w_sc, alpha * w_oc, beta * cp).unwrap();
            let st = tune_series_rl(&scaled).unwrap();
            assert_eq!(st.inductance, tuned.inductance / (alpha * alpha * beta));
            assert_eq!(st.resistance, tuned.resistance / (alpha * beta));
        }
    }
}
