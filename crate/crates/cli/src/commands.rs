//! One runner per subcommand. Every runner writes its data files plus a
//! `summary.json` with a stable key order, and returns the file list.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use shuntlab_core::{
    apply_modification, build_modification_system, closed_loop_frf, critical_delay_numeric,
    critical_delay_series, extract_envelope, find_frf_peaks, max_sampling_period, nominal_poles,
    open_loop_tf, root_locus, shunt_admittance, simulate_swept_sine, solve_modification,
    stability_margins, tustin_discretize, verify_pole_placement, DelayModel, DelayVariant,
    FreqGrid, FrfCurve, PiezoModel, RationalTF, ShuntParams,
};

use crate::config::{DelayVariantSpec, Scenario};
use crate::output::{fmt, write_gnuplot, write_json, CsvFile};
use crate::CliError;

#[derive(Serialize)]
struct ModelEcho {
    omega_sc_rad_s: f64,
    omega_oc_rad_s: f64,
    f_sc_hz: f64,
    f_oc_hz: f64,
    kc: f64,
    cp_eps_f: f64,
}

impl ModelEcho {
    fn of(model: &PiezoModel) -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            omega_sc_rad_s: model.omega_sc(),
            omega_oc_rad_s: model.omega_oc(),
            f_sc_hz: model.omega_sc() / tau,
            f_oc_hz: model.omega_oc() / tau,
            kc: model.kc(),
            cp_eps_f: model.cp_eps(),
        }
    }
}

#[derive(Serialize)]
struct ShuntEcho {
    inductance_h: f64,
    resistance_ohm: f64,
    delta: f64,
    zeta: f64,
}

impl ShuntEcho {
    fn of(s: &ShuntParams) -> Self {
        Self {
            inductance_h: s.inductance,
            resistance_ohm: s.resistance,
            delta: s.delta,
            zeta: s.zeta,
        }
    }
}

fn delay_model(variant: DelayVariantSpec, tau: f64) -> DelayModel {
    match variant {
        DelayVariantSpec::None => DelayModel::None,
        DelayVariantSpec::Pure => DelayModel::PureDelay(tau),
        DelayVariantSpec::Zoh => DelayModel::Zoh(tau),
    }
}

pub fn run_tune(scenario: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = scenario.model()?;
    let shunt = scenario.shunt(&model)?;
    let linearized = shuntlab_core::tune_series_rl_linearized(&model);

    #[derive(Serialize)]
    struct Summary {
        schema_version: u32,
        command: &'static str,
        model: ModelEcho,
        shunt: ShuntEcho,
        linearized_reference: ShuntEcho,
    }
    let path = out.join("summary.json");
    write_json(
        &path,
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "tune",
            model: ModelEcho::of(&model),
            shunt: ShuntEcho::of(&shunt),
            linearized_reference: ShuntEcho::of(&linearized),
        },
    )?;
    Ok(vec![path])
}

pub fn run_margins(scenario: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = scenario.model()?;
    let shunt = scenario.shunt(&model)?;
    let h = open_loop_tf(&model, &shunt)?;
    let grid = scenario.grid_or(FreqGrid::margin_scan(&model));
    let report = stability_margins(&h, &grid)?;

    let mut csv = CsvFile::new(out.join("margins.csv"), &["crossover_index", "omega_rad_s", "omega_over_omega_sc"]);
    csv.meta("unity-gain crossovers of the open-loop transfer function");
    for (i, w) in report.gain_crossovers.iter().enumerate() {
        csv.row_strings(vec![i.to_string(), fmt(*w), fmt(*w / model.omega_sc())]);
    }
    let csv_path = csv.write()?;

    #[derive(Serialize)]
    struct Summary {
        schema_version: u32,
        command: &'static str,
        model: ModelEcho,
        shunt: ShuntEcho,
        gain_crossovers_rad_s: Vec<f64>,
        phase_margin_deg: f64,
        gain_margin_db: Option<f64>,
    }
    let path = out.join("summary.json");
    write_json(
        &path,
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "margins",
            model: ModelEcho::of(&model),
            shunt: ShuntEcho::of(&shunt),
            gain_crossovers_rad_s: report.gain_crossovers.clone(),
            phase_margin_deg: report.phase_margin_deg,
            gain_margin_db: report.gain_margin_db.is_finite().then_some(report.gain_margin_db),
        },
    )?;
    Ok(vec![csv_path, path])
}

pub fn run_critical(scenario: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = scenario.model()?;
    let shunt = scenario.shunt(&model)?;
    let series = critical_delay_series(model.kc(), model.omega_sc())?;
    let pure = critical_delay_numeric(&model, &shunt, DelayVariant::PureDelay)?;
    let zoh = critical_delay_numeric(&model, &shunt, DelayVariant::Zoh)?;

    let mut csv = CsvFile::new(out.join("critical.csv"), &["method", "omega_c_rad_s", "tau_c_s", "branch_k"]);
    csv.meta("imaginary-axis crossings of the delayed closed loop");
    for (name, r) in [("series", &series), ("pure_delay", &pure), ("zoh", &zoh)] {
        csv.row_strings(vec![name.into(), fmt(r.omega_c), fmt(r.tau_c), r.branch_k.to_string()]);
    }
    let csv_path = csv.write()?;

    #[derive(Serialize)]
    struct Summary {
        schema_version: u32,
        command: &'static str,
        model: ModelEcho,
        shunt: ShuntEcho,
        tau_c_series_s: f64,
        tau_c_pure_delay_s: f64,
        tau_c_zoh_s: f64,
        max_sampling_period_s: f64,
        max_sampling_period_modified_s: f64,
    }
    let path = out.join("summary.json");
    write_json(
        &path,
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "critical",
            model: ModelEcho::of(&model),
            shunt: ShuntEcho::of(&shunt),
            tau_c_series_s: series.tau_c,
            tau_c_pure_delay_s: pure.tau_c,
            tau_c_zoh_s: zoh.tau_c,
            max_sampling_period_s: max_sampling_period(model.kc(), model.omega_sc(), false)?,
            max_sampling_period_modified_s: max_sampling_period(model.kc(), model.omega_sc(), true)?,
        },
    )?;
    Ok(vec![csv_path, path])
}

pub fn run_rootlocus(scenario: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = scenario.model()?;
    let shunt = scenario.shunt(&model)?;
    let (variant_spec, _) = scenario.taus().unwrap_or((DelayVariantSpec::Zoh, vec![]));
    let variant = match variant_spec {
        DelayVariantSpec::Pure => DelayVariant::PureDelay,
        _ => DelayVariant::Zoh,
    };
    let tau_max = scenario
        .tau_max
        .unwrap_or(std::f64::consts::PI / model.omega_sc());
    let dtau = scenario.dtau.unwrap_or(tau_max / 2000.0);
    let locus = root_locus(&model, &shunt, variant, tau_max, dtau)?;

    let n = locus.poles[0].len();
    let mut header = vec!["tau_s".to_string()];
    for b in 0..n {
        header.push(format!("re_{b}_rad_s"));
        header.push(format!("im_{b}_rad_s"));
    }
    let mut csv = CsvFile::with_header(out.join("rootlocus.csv"), header);
    csv.meta("continuation of the closed-loop poles in the sampling period");
    for (i, tau) in locus.taus.iter().enumerate() {
        let mut row = vec![*tau];
        for p in &locus.poles[i] {
            row.push(p.re);
            row.push(p.im);
        }
        csv.row(&row);
    }
    let csv_path = csv.write()?;

    #[derive(Serialize)]
    struct Summary {
        schema_version: u32,
        command: &'static str,
        model: ModelEcho,
        shunt: ShuntEcho,
        variant: &'static str,
        tau_max_s: f64,
        crossing_tau_s: Option<f64>,
        crossing_omega_rad_s: Option<f64>,
    }
    let path = out.join("summary.json");
    write_json(
        &path,
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "rootlocus",
            model: ModelEcho::of(&model),
            shunt: ShuntEcho::of(&shunt),
            variant: match variant {
                DelayVariant::Zoh => "zoh",
                DelayVariant::PureDelay => "pure_delay",
            },
            tau_max_s: tau_max,
            crossing_tau_s: locus.crossing.map(|c| c.0),
            crossing_omega_rad_s: locus.crossing.map(|c| c.1),
        },
    )?;
    Ok(vec![csv_path, path])
}

pub struct FrfBundle {
    pub taus: Vec<f64>,
    pub curves: Vec<FrfCurve>,
}

pub fn frf_fan_out(
    model: &PiezoModel,
    y: &RationalTF,
    variant: DelayVariantSpec,
    taus: &[f64],
    grid: &FreqGrid,
) -> Result<FrfBundle, CliError> {
    let curves = taus
        .par_iter()
        .map(|&tau| closed_loop_frf(model, y, &delay_model(variant, tau), grid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrfBundle { taus: taus.to_vec(), curves })
}

pub fn run_frf(scenario: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = scenario.model()?;
    let shunt = scenario.shunt(&model)?;
    let y = shunt_admittance(&shunt)?;
    let (variant, taus) = scenario.taus()?;
    let grid = scenario.grid_or(FreqGrid::resonant_band(&model));
    let bundle = frf_fan_out(&model, &y, variant, &taus, &grid)?;

    let mut header = vec!["omega_rad_s".to_string(), "omega_over_omega_sc".to_string()];
    for tau in &bundle.taus {
        header.push(format!("abs_xksc_over_f_tau_{tau:e}"));
    }
    let mut csv = CsvFile::with_header(out.join("frf.csv"), header);
    csv.meta("closed-loop compliance magnitude |x k_sc / f| per sampling period");
    for w in bundle.curves.iter().flat_map(|c| c.warning.as_deref()) {
        csv.meta(format!("warning: {w}"));
    }
    let omegas = &bundle.curves[0].omega;
    for (i, w) in omegas.iter().enumerate() {
        let mut row = vec![*w, *w / model.omega_sc()];
        for c in &bundle.curves {
            row.push(c.value[i].norm());
        }
        csv.row(&row);
    }
    let csv_path = csv.write()?;

    #[derive(Serialize)]
    struct PeakEcho {
        tau_s: f64,
        peak_omega_rad_s: Vec<f64>,
        peak_amplitude: Vec<f64>,
    }
    #[derive(Serialize)]
    struct Summary {
        schema_version: u32,
        command: &'static str,
        model: ModelEcho,
        shunt: ShuntEcho,
        peaks: Vec<PeakEcho>,
    }
    let peaks = bundle
        .taus
        .iter()
        .zip(&bundle.curves)
        .map(|(tau, c)| {
            let p = find_frf_peaks(c);
            PeakEcho {
                tau_s: *tau,
                peak_omega_rad_s: p.iter().map(|q| q.omega).collect(),
                peak_amplitude: p.iter().map(|q| q.amplitude).collect(),
            }
        })
        .collect();
    let path = out.join("summary.json");
    write_json(
        &path,
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "frf",
            model: ModelEcho::of(&model),
            shunt: ShuntEcho::of(&shunt),
            peaks,
        },
    )?;

    let mut files = vec![csv_path, path];
    if scenario.emit_plots {
        let cols: Vec<(usize, String)> = bundle
            .taus
            .iter()
            .enumerate()
            .map(|(i, t)| (i + 3, format!("tau = {t:.3e} s")))
            .collect();
        let col_refs: Vec<(usize, &str)> = cols.iter().map(|(i, s)| (*i, s.as_str())).collect();
        let plot = out.join("frf.gnuplot");
        write_gnuplot(&plot, "frf.csv", "closed-loop response", &col_refs)?;
        files.push(plot);
    }
    Ok(files)
}

pub fn run_simulate(scenario: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = scenario.model()?;
    let shunt = scenario.shunt(&model)?;
    let y = shunt_admittance(&shunt)?;
    let (_, taus) = scenario.taus()?;
    let sweep = scenario.sweep_or_default(&model);
    let substeps = scenario.substeps.unwrap_or(32);

    let sims = taus
        .par_iter()
        .map(|&tau| {
            let ctrl = tustin_discretize(&y, tau)?;
            simulate_swept_sine(&model, &ctrl, tau, &sweep, substeps)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut files = Vec::new();
    for (i, (tau, sim)) in taus.iter().zip(&sims).enumerate() {
        let mut csv = CsvFile::new(
            out.join(format!("sim_{i}.csv")),
            &["t_s", "x_m", "v_piezo_v", "i_inject_a"],
        );
        csv.meta(format!("sampling period tau = {} s", fmt(*tau)));
        csv.meta(format!("stable = {}", sim.stable));
        for k in 0..sim.t.len() {
            csv.row(&[sim.t[k], sim.x[k], sim.v_piezo[k], sim.i_inject[k]]);
        }
        files.push(csv.write()?);

        let mut env = CsvFile::new(
            out.join(format!("envelope_{i}.csv")),
            &["omega_rad_s", "omega_over_omega_sc", "amplitude_xksc_over_f"],
        );
        env.meta(format!("sampling period tau = {} s", fmt(*tau)));
        for &(w, a) in &sim.envelope {
            env.row(&[w, w / model.omega_sc(), a]);
        }
        files.push(env.write()?);
    }

    #[derive(Serialize)]
    struct Verdict {
        tau_s: f64,
        stable: bool,
        samples: usize,
    }
    #[derive(Serialize)]
    struct Summary {
        schema_version: u32,
        command: &'static str,
        model: ModelEcho,
        shunt: ShuntEcho,
        substeps: usize,
        verdicts: Vec<Verdict>,
    }
    let path = out.join("summary.json");
    write_json(
        &path,
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "simulate",
            model: ModelEcho::of(&model),
            shunt: ShuntEcho::of(&shunt),
            substeps,
            verdicts: taus
                .iter()
                .zip(&sims)
                .map(|(t, s)| Verdict { tau_s: *t, stable: s.stable, samples: s.t.len() })
                .collect(),
        },
    )?;
    files.push(path);
    Ok(files)
}

pub fn run_stabilize(scenario: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let model = scenario.model()?;
    let shunt = scenario.shunt(&model)?;
    let y = shunt_admittance(&shunt)?;
    let (_, taus) = scenario.taus()?;
    if taus.len() != 1 || taus[0] <= 0.0 {
        return Err(CliError::Config("stabilize needs exactly one positive tau".into()));
    }
    let tau = taus[0];
    let pinned = scenario.pinned_index.unwrap_or(0);

    let poles = nominal_poles(&model, &shunt)?;
    let system = build_modification_system(&y, &poles, tau)?;
    let factors = solve_modification(&system, &y, pinned)?;
    let y_mod = apply_modification(&y, &factors)?;
    let placement = verify_pole_placement(&model, &y_mod, tau, &poles)?;

    let grid = scenario.grid_or(FreqGrid::resonant_band(&model));
    let nominal = closed_loop_frf(&model, &y, &DelayModel::None, &grid)?;
    let unmodified = closed_loop_frf(&model, &y, &DelayModel::Zoh(tau), &grid)?;
    let modified = closed_loop_frf(&model, &y_mod, &DelayModel::Zoh(tau), &grid)?;

    let mut csv = CsvFile::new(
        out.join("stabilize_frf.csv"),
        &["omega_rad_s", "omega_over_omega_sc", "nominal", "delayed_unmodified", "delayed_modified"],
    );
    csv.meta(format!("sampling period tau = {} s", fmt(tau)));
    for (i, w) in nominal.omega.iter().enumerate() {
        csv.row(&[
            *w,
            *w / model.omega_sc(),
            nominal.value[i].norm(),
            unmodified.value[i].norm(),
            modified.value[i].norm(),
        ]);
    }
    let csv_path = csv.write()?;

    #[derive(Serialize)]
    struct Summary {
        schema_version: u32,
        command: &'static str,
        model: ModelEcho,
        shunt: ShuntEcho,
        tau_s: f64,
        pinned_index: usize,
        delta_b: Vec<f64>,
        delta_a: Vec<f64>,
        residual_norm: f64,
        degenerate: bool,
        modified_num: Vec<f64>,
        modified_den: Vec<f64>,
        placement_residuals: Vec<f64>,
        pole_displacements: Vec<f64>,
        max_delayed_pole_real_part: f64,
        stable: bool,
    }
    let path = out.join("summary.json");
    write_json(
        &path,
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "stabilize",
            model: ModelEcho::of(&model),
            shunt: ShuntEcho::of(&shunt),
            tau_s: tau,
            pinned_index: pinned,
            delta_b: factors.delta_b.clone(),
            delta_a: factors.delta_a.clone(),
            residual_norm: factors.residual_norm,
            degenerate: factors.degenerate,
            modified_num: y_mod.num().to_vec(),
            modified_den: y_mod.den().to_vec(),
            placement_residuals: placement.residuals.clone(),
            pole_displacements: placement.displacements.clone(),
            max_delayed_pole_real_part: placement.max_resolved_real_part(),
            stable: placement.max_resolved_real_part() < 0.0,
        },
    )?;

    let mut files = vec![csv_path, path];
    if scenario.emit_plots {
        let plot = out.join("stabilize_frf.gnuplot");
        write_gnuplot(
            &plot,
            "stabilize_frf.csv",
            "delay anticipation",
            &[(3, "nominal"), (4, "delayed unmodified"), (5, "delayed modified")],
        )?;
        files.push(plot);
    }
    Ok(files)
}

/// Envelope runner shared by the figure targets.
pub fn envelope_curve(
    model: &PiezoModel,
    y: &RationalTF,
    tau: f64,
    periods: f64,
    substeps: usize,
) -> Result<(Vec<(f64, f64)>, bool), CliError> {
    let f_sc = model.omega_sc() / std::f64::consts::TAU;
    let sweep = shuntlab_core::SweepConfig {
        f_start: 0.9 * f_sc,
        f_end: 1.15 * f_sc,
        duration: periods / f_sc,
        amplitude: 1.0,
        law: shuntlab_core::SweepLaw::Linear,
    };
    let ctrl = tustin_discretize(y, tau)?;
    let sim = simulate_swept_sine(model, &ctrl, tau, &sweep, substeps)?;
    let env = if sim.envelope.is_empty() {
        extract_envelope(&sim, &sweep).unwrap_or_default()
    } else {
        sim.envelope.clone()
    };
    Ok((env, sim.stable))
}
