//! Sampled-data time simulation: continuous plant, sampler, Tustin-discretized
//! admittance, zero-order-hold current injection, swept-sine forcing and
//! envelope extraction.
//!
//! The plant state `(x, xdot, q)` is integrated by fixed-step RK4 with a
//! configurable number of substeps per sampling period; the injected current
//! is held constant over each period and the quantizer is modeled as a
//! pass-through. Latency inside the digital unit is zero: sampling, the
//! recurrence update and the output hold happen at the same instant.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{PiezoModel, RationalTF};
use crate::poly;

/// Discrete transfer function in descending powers of `z`, ready to run as a
/// recurrence. The leading denominator coefficient is normalized to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTF {
    num_z: Vec<f64>,
    den_z: Vec<f64>,
    tau: f64,
    u_hist: Vec<f64>,
    y_hist: Vec<f64>,
}

impl DiscreteTF {
    pub fn num_z(&self) -> &[f64] {
        &self.num_z
    }

    pub fn den_z(&self) -> &[f64] {
        &self.den_z
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Evaluate the transfer function at a point of the z-plane.
    pub fn eval_z(&self, z: Complex64) -> Complex64 {
        let horner = |c: &[f64]| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &ck in c {
                acc = acc * z + ck;
            }
            acc
        };
        horner(&self.num_z) / horner(&self.den_z)
    }

    /// Clear the recurrence history.
    pub fn reset(&mut self) {
        self.u_hist.iter_mut().for_each(|v| *v = 0.0);
        self.y_hist.iter_mut().for_each(|v| *v = 0.0);
    }

    /// One recurrence update. The caller holds the returned output constant
    /// until the next sample (zero-order hold semantics).
    pub fn step(&mut self, input: f64) -> f64 {
        self.u_hist.rotate_right(1);
        self.u_hist[0] = input;
        let mut acc = 0.0;
        for (c, u) in self.num_z.iter().zip(&self.u_hist) {
            acc += c * u;
        }
        for (c, y) in self.den_z.iter().skip(1).zip(&self.y_hist) {
            acc -= c * y;
        }
        self.y_hist.rotate_right(1);
        self.y_hist[0] = acc;
        acc
    }
}

/// Bilinear (trapezoidal) discretization `s = (2/tau)(z - 1)/(z + 1)` of a
/// proper rational function, expanded and normalized for recurrence use.
pub fn tustin_discretize(y: &RationalTF, tau: f64) -> Result<DiscreteTF> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("sampling period must be positive, got {tau}")));
    }
    if !y.is_proper() {
        return Err(Error::Domain(
            "bilinear discretization needs a proper transfer function".into(),
        ));
    }
    let order = y.num_degree().max(y.den_degree());
    let gain = 2.0 / tau;

    // sum_k c_k (2/tau)^k (z-1)^k (z+1)^(order-k), ascending in z.
    let expand = |coeffs: &[f64]| -> Vec<f64> {
        let mut acc = vec![0.0; order + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            let mut term = vec![c * gain.powi(k as i32)];
            for _ in 0..k {
                term = poly::conv(&term, &[-1.0, 1.0]);
            }
            for _ in 0..(order - k) {
                term = poly::conv(&term, &[1.0, 1.0]);
            }
            for (a, t) in acc.iter_mut().zip(term) {
                *a += t;
            }
        }
        acc.reverse(); // descending in z
        acc
    };

    let num_z = expand(y.num());
    let den_z = expand(y.den());
    let lead = den_z[0];
    let scale = den_z.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if lead.abs() <= 1e-14 * scale {
        return Err(Error::Domain(
            "bilinear mapping produced a zero leading denominator coefficient (pole at s = 2/tau)"
                .into(),
        ));
    }
    let num_z: Vec<f64> = num_z.iter().map(|c| c / lead).collect();
    let den_z: Vec<f64> = den_z.iter().map(|c| c / lead).collect();

    let n = num_z.len();
    let d = den_z.len();
    Ok(DiscreteTF {
        num_z,
        den_z,
        tau,
        u_hist: vec![0.0; n],
        y_hist: vec![0.0; d.saturating_sub(1).max(1)],
    })
}

/// Frequency sweep law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepLaw {
    Linear,
    Logarithmic,
}

/// Swept-sine forcing description (frequencies in Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
    pub amplitude: f64,
    pub law: SweepLaw,
}

impl SweepConfig {
    /// Default sweep for a plant: linear over [0.9, 1.15] omega_sc at unit
    /// amplitude, 600 short-circuit periods long.
    pub fn default_for(model: &PiezoModel) -> Self {
        let f_sc = model.omega_sc() / std::f64::consts::TAU;
        Self {
            f_start: 0.9 * f_sc,
            f_end: 1.15 * f_sc,
            duration: 600.0 / f_sc,
            amplitude: 1.0,
            law: SweepLaw::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_start > 0.0) || !(self.f_end > self.f_start) {
            return Err(Error::Domain(format!(
                "sweep needs 0 < f_start < f_end, got [{}, {}]",
                self.f_start, self.f_end
            )));
        }
        if !(self.duration > 0.0) || !(self.amplitude >= 0.0) {
            return Err(Error::Domain("sweep duration must be positive and amplitude non-negative".into()));
        }
        Ok(())
    }

    /// Instantaneous frequency (Hz) at time `t` of the sweep.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        let u = (t / self.duration).clamp(0.0, 1.0);
        match self.law {
            SweepLaw::Linear => self.f_start + (self.f_end - self.f_start) * u,
            SweepLaw::Logarithmic => self.f_start * (self.f_end / self.f_start).powf(u),
        }
    }

    /// Forcing value at time `t`; zero once the sweep is over.
    pub fn force(&self, t: f64) -> f64 {
        if t > self.duration || self.amplitude == 0.0 {
            return 0.0;
        }
        let phase = match self.law {
            SweepLaw::Linear => {
                let rate = (self.f_end - self.f_start) / self.duration;
                std::f64::consts::TAU * (self.f_start * t + 0.5 * rate * t * t)
            }
            SweepLaw::Logarithmic => {
                let lr = (self.f_end / self.f_start).ln();
                std::f64::consts::TAU * self.f_start * self.duration / lr
                    * ((lr * t / self.duration).exp() - 1.0)
            }
        };
        self.amplitude * phase.sin()
    }
}

/// Continuous plant driven by a sampled controller with held output.
#[derive(Debug, Clone)]
pub struct SampledSimulator {
    mass: f64,
    k_oc: f64,
    theta: f64,
    k_sc: f64,
    cp: f64,
    ctrl: DiscreteTF,
    substeps: usize,
    /// Plant state `(x, xdot, q)`.
    pub state: [f64; 3],
    /// Current simulation time (s).
    pub time: f64,
}

impl SampledSimulator {
    pub fn new(model: &PiezoModel, ctrl: DiscreteTF, substeps: usize) -> Result<Self> {
        if substeps < 10 {
            return Err(Error::Domain(format!(
                "at least 10 substeps per sampling period are required, got {substeps}"
            )));
        }
        let (mass, k_oc, theta, k_sc) = model.mechanical_params();
        Ok(Self {
            mass,
            k_oc,
            theta,
            k_sc,
            cp: model.cp_eps(),
            ctrl,
            substeps,
            state: [0.0; 3],
            time: 0.0,
        })
    }

    pub fn k_sc(&self) -> f64 {
        self.k_sc
    }

    pub fn tau(&self) -> f64 {
        self.ctrl.tau()
    }

    /// Piezo voltage seen by the sampler for the current state.
    pub fn voltage(&self) -> f64 {
        self.theta * self.state[0] - self.state[2] / self.cp
    }

    /// Sample the voltage, update the recurrence, hold the injected current
    /// and integrate the plant over one sampling period. Returns the sampled
    /// voltage and the held current.
    pub fn sample_step(&mut self, force: &impl Fn(f64) -> f64) -> (f64, f64) {
        let v = self.voltage();
        let i = self.ctrl.step(v);
        let tau = self.ctrl.tau();
        let h = tau / self.substeps as f64;
        for k in 0..self.substeps {
            let t = self.time + k as f64 * h;
            self.rk4(t, h, i, force);
        }
        self.time += tau;
        (v, i)
    }

    fn rk4(&mut self, t: f64, h: f64, current: f64, force: &impl Fn(f64) -> f64) {
        let deriv = |t: f64, s: [f64; 3]| -> [f64; 3] {
            [
                s[1],
                (force(t) - self.k_oc * s[0] + self.theta * s[2]) / self.mass,
                current,
            ]
        };
        let s = self.state;
        let k1 = deriv(t, s);
        let k2 = deriv(t + 0.5 * h, add(s, scale(k1, 0.5 * h)));
        let k3 = deriv(t + 0.5 * h, add(s, scale(k2, 0.5 * h)));
        let k4 = deriv(t + h, add(s, scale(k3, h)));
        for j in 0..3 {
            self.state[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], f: f64) -> [f64; 3] {
    [a[0] * f, a[1] * f, a[2] * f]
}

/// Time-domain record of a swept-sine run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub v_piezo: Vec<f64>,
    pub i_inject: Vec<f64>,
    /// `(instantaneous frequency rad/s, k_sc-normalized peak amplitude)`.
    pub envelope: Vec<(f64, f64)>,
    /// Cleared when growth detection truncated the run.
    pub stable: bool,
    /// Stiffness scale used to normalize amplitudes.
    pub k_sc: f64,
}

/// Ratio of current amplitude to the historical maximum that flags
/// divergence during the ring-down phase.
const DIVERGENCE_RATIO: f64 = 1e3;

/// Absolute guard against runaway amplitudes while the forcing is active.
const HARD_GUARD_RATIO: f64 = 1e12;

/// Net growth across the ring-down phase that marks a slow instability.
const RINGDOWN_GROWTH_RATIO: f64 = 3.0;

/// Simulate the sampled loop under swept-sine forcing.
///
/// The sweep phase of `sweep.duration` is followed by an unforced ring-down
/// of half that length, during which exponential growth (beyond
/// [`DIVERGENCE_RATIO`] times the forced-phase maximum) marks the run
/// unstable and truncates it; slow delay-induced instabilities keep growing
/// there after the forcing stops exciting the stable modes.
pub fn simulate_swept_sine(
    model: &PiezoModel,
    ctrl: &DiscreteTF,
    tau: f64,
    sweep: &SweepConfig,
    substeps: usize,
) -> Result<SimResult> {
    sweep.validate()?;
    if !(tau > 0.0) || (tau - ctrl.tau()).abs() > 1e-9 * tau {
        return Err(Error::Domain(format!(
            "sampling period {tau} does not match the controller discretization {}",
            ctrl.tau()
        )));
    }
    if substeps < 10 {
        return Err(Error::Domain(format!(
            "at least 10 substeps per sampling period are required, got {substeps}"
        )));
    }

    let mut ctrl = ctrl.clone();
    ctrl.reset();
    let mut sim = SampledSimulator::new(model, ctrl, substeps)?;
    let force = |t: f64| sweep.force(t);

    let n_forced = (sweep.duration / tau).ceil() as usize;
    let n_total = n_forced + n_forced / 2;
    let floor = sweep.amplitude / sim.k_sc();

    let mut t = Vec::with_capacity(n_total + 1);
    let mut x = Vec::with_capacity(n_total + 1);
    let mut v_piezo = Vec::with_capacity(n_total + 1);
    let mut i_inject = Vec::with_capacity(n_total + 1);
    let mut stable = true;
    let mut forced_max = 0.0f64;

    for k in 0..=n_total {
        let xi = sim.state[0];
        t.push(sim.time);
        x.push(xi);

        if !xi.is_finite() || !sim.state[1].is_finite() || !sim.state[2].is_finite() {
            stable = false;
            v_piezo.push(f64::NAN);
            i_inject.push(f64::NAN);
            break;
        }
        if k <= n_forced {
            forced_max = forced_max.max(xi.abs());
            if floor > 0.0 && xi.abs() > HARD_GUARD_RATIO * floor {
                stable = false;
                v_piezo.push(sim.voltage());
                i_inject.push(f64::NAN);
                break;
            }
        } else {
            let reference = forced_max.max(floor);
            if reference > 0.0 && xi.abs() > DIVERGENCE_RATIO * reference {
                stable = false;
                v_piezo.push(sim.voltage());
                i_inject.push(f64::NAN);
                break;
            }
        }

        let (v, i) = sim.sample_step(&force);
        v_piezo.push(v);
        i_inject.push(i);
    }
    // Drop the trailing push from the break path so all arrays stay aligned.
    v_piezo.truncate(t.len());
    i_inject.truncate(t.len());

    // Slow supercritical growth never trips the amplitude ratio inside the
    // forced phase (the reference maximum grows along with the response), so
    // compare ring-down endpoints: once the forcing stops, a stable loop
    // decays while any pole past the imaginary axis keeps growing.
    if stable {
        let ring: Vec<f64> = t
            .iter()
            .zip(&x)
            .filter(|(tt, _)| **tt > sweep.duration)
            .map(|(_, &xx)| xx.abs())
            .collect();
        let win = ring.len() / 8;
        if win >= 4 {
            let first = ring[..win].iter().copied().fold(0.0, f64::max);
            let last = ring[ring.len() - win..].iter().copied().fold(0.0, f64::max);
            if first > 0.0 && last > RINGDOWN_GROWTH_RATIO * first {
                stable = false;
            }
        }
    }

    let mut result = SimResult {
        t,
        x,
        v_piezo,
        i_inject,
        envelope: Vec::new(),
        stable,
        k_sc: sim.k_sc(),
    };
    if let Ok(env) = extract_envelope(&result, sweep) {
        result.envelope = env;
    }
    Ok(result)
}

/// Map the local maxima of `|x(t)|` during the forced phase to the
/// instantaneous sweep frequency, normalized by force amplitude and `k_sc`
/// to match the frequency-response axes.
///
/// An identically zero response short-circuits to a zero envelope across the
/// band (unforced runs have no oscillation peaks to pick).
pub fn extract_envelope(sim: &SimResult, sweep: &SweepConfig) -> Result<Vec<(f64, f64)>> {
    sweep.validate()?;
    let in_band: Vec<(f64, f64)> = sim
        .t
        .iter()
        .zip(&sim.x)
        .take_while(|(t, _)| **t <= sweep.duration)
        .map(|(&t, &x)| (t, x))
        .collect();

    let to_omega = |t: f64| std::f64::consts::TAU * sweep.instantaneous_frequency(t);
    if in_band.iter().all(|&(_, x)| x == 0.0) {
        return Ok(vec![
            (to_omega(0.0), 0.0),
            (to_omega(0.5 * sweep.duration), 0.0),
            (to_omega(sweep.duration), 0.0),
        ]);
    }

    let scale = sim.k_sc / sweep.amplitude;
    let mut envelope = Vec::new();
    for i in 1..in_band.len().saturating_sub(1) {
        let (y0, y1, y2) = (
            in_band[i - 1].1.abs(),
            in_band[i].1.abs(),
            in_band[i + 1].1.abs(),
        );
        if y1 > y0 && y1 >= y2 {
            // Parabolic refinement of the sampled oscillation peak.
            let denom = y0 - 2.0 * y1 + y2;
            let (mut t_peak, mut amp) = (in_band[i].0, y1);
            if denom < 0.0 {
                let delta = (0.5 * (y0 - y2) / denom).clamp(-1.0, 1.0);
                let dt = in_band[i].0 - in_band[i - 1].0;
                t_peak += delta * dt;
                amp = y1 - (y2 - y0) * (y2 - y0) / (8.0 * denom);
            }
            envelope.push((to_omega(t_peak), amp * scale));
        }
    }
    if envelope.len() < 3 {
        return Err(Error::Diagnostic(format!(
            "only {} oscillation peaks found; the sweep is too short for an envelope",
            envelope.len()
        )));
    }
    Ok(envelope)
}
