use std::path::PathBuf;

use serde::Serialize;

use casimir_response::error::Error;
use casimir_response::estimator::{energy_bound, energy_bound_quantity, per_mode_bound, BoundInputs, BOUND_LABEL};
use casimir_response::gnm::GnmTable;
use casimir_response::output::{col, float_rows, fmt_float, render_csv, spectral_table_csv, to_json, Column, CsvHeader, PendingOutputs, TOOL_VERSION};
use casimir_response::potential::{far_field_decay_check, solve_radial_potential, DecayReport};
use casimir_response::response::{
    compute_energy, compute_spectrum, AngularKernel, EnergyResult, ExponentFit, LowMomentumCheck, QuadratureEnergy,
    SeriesEnergy, SpectrumDiagnostics, SpectrumOptions,
};
use casimir_response::scenario::{ScenarioConfig, ScenarioHash};
use casimir_response::transforms::DerivativeMethod;
use casimir_response::units::Dimension;
use casimir_response::velocity::{classify_profile, VelocityDiagnostics};

use crate::{Context, DerivativeArg, EnergyArgs, EstimateArgs, Finished, GnmArgs, KernelArg, ScalingArgs, SpectrumArgs};

/// JSON body with the provenance fields every artifact carries.
#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    tool_version: &'static str,
    scenario_hash: &'a str,
    #[serde(flatten)]
    body: T,
}

fn tagged<T: Serialize>(hash: &ScenarioHash, body: T) -> Result<String, Error> {
    to_json(&Tagged { tool_version: TOOL_VERSION, scenario_hash: &hash.0, body })
}

fn header(ctx: &Context, hash: &ScenarioHash) -> CsvHeader {
    let mut h = CsvHeader::new(hash.to_string());
    h.stamp = ctx.stamp;
    h
}

fn snapshot(config: &ScenarioConfig) -> serde_json::Value {
    serde_json::to_value(config.to_file()).expect("scenario serializes")
}

fn finish(ctx: &Context, pending: PendingOutputs, hash: ScenarioHash, config: serde_json::Value) -> Result<Finished, Error> {
    pending.write_all(&ctx.out)?;
    Ok(Finished { hash, config, outputs: pending.names() })
}

fn derivative_method(a: DerivativeArg) -> DerivativeMethod {
    match a {
        DerivativeArg::ClosedForm => DerivativeMethod::ClosedForm,
        DerivativeArg::Spectral => DerivativeMethod::Spectral,
    }
}

fn breakdown_csv(h: CsvHeader, series: &SeriesEnergy) -> String {
    let mut rows = Vec::new();
    for (n, row) in series.breakdown.iter().enumerate() {
        for (m, &e) in row.iter().enumerate() {
            rows.push(vec![n.to_string(), m.to_string(), fmt_float(e)]);
        }
    }
    render_csv(&h, &[col("n", "1"), col("m", "1"), col("E_nm", "1/length")], &rows)
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    kernel: AngularKernel,
    energy_quadrature: &'a QuadratureEnergy,
    energy_series: &'a SeriesEnergy,
    series_quadrature_relative_difference: f64,
    low_omega_fit: &'a ExponentFit,
    low_momentum: &'a LowMomentumCheck,
    diagnostics: &'a SpectrumDiagnostics,
}

pub fn spectrum(ctx: &Context, a: &SpectrumArgs) -> Result<Finished, Error> {
    let config = ctx.load(&a.scenario)?;
    let hash = config.hash();
    let kernel = match a.kernel {
        KernelArg::Summed => AngularKernel::Summed,
        KernelArg::PerPolarization => AngularKernel::PerPolarization,
    };
    let opts = SpectrumOptions { kernel, n_max: a.n_max, derivatives: derivative_method(a.derivatives), ..SpectrumOptions::default() };
    let res = compute_spectrum(&config, &opts)?;
    let kernel_name = match kernel {
        AngularKernel::Summed => "summed",
        AngularKernel::PerPolarization => "per-polarization",
    };

    let mut pending = PendingOutputs::new();
    let e_rows = res.omega_grid.iter().zip(&res.e_of_omega).zip(&res.e_error).map(|((&w, &e), &err)| [w, e, err]);
    pending.add(
        "spectrum.csv",
        render_csv(&header(ctx, &hash), &[col("omega", "1/time"), col("e", "1"), col("err", "1")], &float_rows(e_rows)),
    );
    let n_rows = res.k_grid.iter().zip(&res.n_per_mode_density).zip(&res.n_error).map(|((&k, &n), &err)| [k, n, err]);
    pending.add(
        "modes.csv",
        render_csv(
            &header(ctx, &hash).with("kernel", kernel_name),
            &[col("k", "1/length"), col("n_density", "length^3"), col("err", "length^3")],
            &float_rows(n_rows),
        ),
    );
    pending.add("energy_breakdown.csv", breakdown_csv(header(ctx, &hash), &res.total_energy_series));
    if a.export_table {
        pending.add("table.csv", spectral_table_csv(&res.table, ctx.stamp));
    }
    let summary = SpectrumSummary {
        kernel,
        energy_quadrature: &res.total_energy_quadrature,
        energy_series: &res.total_energy_series,
        series_quadrature_relative_difference: res.series_quadrature_relative_difference,
        low_omega_fit: &res.low_omega,
        low_momentum: &res.low_momentum,
        diagnostics: &res.diagnostics,
    };
    pending.add("summary.json", tagged(&hash, &summary)?);
    println!(
        "E (quadrature) = {:.6e}, E (series) = {:.6e}, low-omega exponent {:.3} +- {:.1e}",
        res.total_energy_quadrature.value, res.total_energy_series.total, res.low_omega.exponent, res.low_omega.std_error
    );
    finish(ctx, pending, hash, snapshot(&config))
}

pub fn energy(ctx: &Context, a: &EnergyArgs) -> Result<Finished, Error> {
    let config = ctx.load(&a.scenario)?;
    let hash = config.hash();
    let res = compute_energy(&config, a.n_max, derivative_method(a.derivatives))?;
    let mut pending = PendingOutputs::new();
    pending.add("energy_breakdown.csv", breakdown_csv(header(ctx, &hash), &res.series));
    pending.add("energy.json", tagged(&hash, &res)?);
    println!("E (quadrature) = {:.6e}, E (series) = {:.6e}", res.quadrature.value, res.series.total);
    finish(ctx, pending, hash, snapshot(&config))
}

pub fn gnm(ctx: &Context, a: &GnmArgs) -> Result<Finished, Error> {
    if !(a.epsilon >= 1.0 && a.epsilon.is_finite()) {
        return Err(Error::Validation("epsilon must be a finite number ≥ 1".into()));
    }
    let inputs = serde_json::json!({ "n_max": a.n_max, "epsilon": a.epsilon });
    let hash = ScenarioHash::of_text(&inputs.to_string());
    let table = GnmTable::new(a.n_max, a.epsilon);
    let rows = table.rows();
    println!("{:>3} {:>3}  {:>28}  {:>22}  {:>22}", "n", "m", "kernel", "kernel (decimal)", "value_at_epsilon");
    for r in &rows {
        println!("{:>3} {:>3}  {:>28}  {:>22}  {:>22}", r.n, r.m, format!("{}/{}", r.kernel_num, r.kernel_den), fmt_float(r.kernel), fmt_float(r.value_at_epsilon));
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.n.to_string(), r.m.to_string(), r.kernel_num.clone(), r.kernel_den.clone(), fmt_float(r.value_at_epsilon)])
        .collect();
    let columns = [col("n", "1"), col("m", "1"), col("kernel_num", "1"), col("kernel_den", "1"), col("value_at_epsilon", "1")];
    let mut pending = PendingOutputs::new();
    pending.add("gnm.csv", render_csv(&header(ctx, &hash).with("epsilon", fmt_float(a.epsilon)), &columns, &cells));
    finish(ctx, pending, hash, inputs)
}

pub fn velocity(ctx: &Context, path: &PathBuf) -> Result<Finished, Error> {
    let config = ctx.load(path)?;
    let hash = config.hash();
    let v = config.velocity.as_ref().ok_or(Error::NoVelocityProfile)?;
    let d: VelocityDiagnostics = classify_profile(v, config.epsilon_inf, None)?;
    let rows = d.k_samples.iter().zip(&d.ft_magnitudes).zip(&d.ft_errors).map(|((&k, &m), &e)| [k, m, e]);
    let rows = if d.ft_magnitudes.is_empty() { Vec::new() } else { float_rows(rows) };
    let mut pending = PendingOutputs::new();
    pending.add(
        "velocity.csv",
        render_csv(&header(ctx, &hash), &[col("k", "1/length"), col("|ft|", "length^4"), col("err", "length^4")], &rows),
    );
    pending.add("velocity.json", tagged(&hash, &d)?);
    match d.low_k_exponent {
        Some(alpha) => println!("{:?}: low-k exponent {alpha:.3}", d.classification),
        None => println!("{:?}", d.classification),
    }
    finish(ctx, pending, hash, snapshot(&config))
}

#[derive(Serialize)]
struct PotentialSummary {
    boundary_convention: &'static str,
    residual_norm: f64,
    support_radius: f64,
    domain_length: f64,
    cells: usize,
    far_field: DecayReport,
}

pub fn potential(ctx: &Context, path: &PathBuf) -> Result<Finished, Error> {
    let config = ctx.load(path)?;
    let hash = config.hash();
    let probe = config
        .potential_probe
        .as_ref()
        .ok_or_else(|| Error::MissingInput("scenario has no potential_probe section".into()))?;
    let problem = probe.to_problem(config.epsilon_inf)?;
    let sol = solve_radial_potential(&problem)?;
    let decay = far_field_decay_check(&sol)?;
    let rows = (0..sol.r.len()).map(|i| [sol.r[i], sol.phi[i], sol.residual[i]]);
    let columns: [Column; 3] = [col("r", "length"), col("phi", "1/length"), col("residual", "length")];
    let mut pending = PendingOutputs::new();
    pending.add("potential.csv", render_csv(&header(ctx, &hash), &columns, &float_rows(rows)));
    let summary = PotentialSummary {
        boundary_convention: sol.boundary_convention,
        residual_norm: sol.residual_norm,
        support_radius: sol.support_radius,
        domain_length: problem.length(),
        cells: sol.r.len() - 1,
        far_field: decay,
    };
    pending.add("potential.json", tagged(&hash, &summary)?);
    println!("solved on {} cells, backward error {:.1e}", summary.cells, summary.residual_norm);
    finish(ctx, pending, hash, snapshot(&config))
}

#[derive(Serialize)]
struct EstimateReport {
    label: &'static str,
    inputs: BoundInputs,
    energy_bound: f64,
    energy_dimension: Dimension,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_mode_bound: Option<f64>,
}

pub fn estimate(ctx: &Context, a: &EstimateArgs) -> Result<Finished, Error> {
    let inputs = BoundInputs { r_max: a.rmax, t_max: a.tmax, k_c: a.kc, v_quant: a.volume, c_order: a.c };
    inputs.validate()?;
    let config = serde_json::to_value(a).expect("inputs serialize");
    let hash = ScenarioHash::of_text(&config.to_string());
    let report = EstimateReport {
        label: BOUND_LABEL,
        inputs,
        energy_bound: energy_bound(&inputs),
        energy_dimension: energy_bound_quantity(&inputs).dim,
        per_mode_bound: inputs.v_quant.map(|_| per_mode_bound(&inputs)).transpose()?,
    };
    let text = tagged(&hash, &report)?;
    print!("{text}");
    let mut pending = PendingOutputs::new();
    pending.add("estimate.json", text);
    finish(ctx, pending, hash, config)
}

#[derive(Serialize)]
struct ScalingReport<'a> {
    factor: f64,
    /// E scales as 1/s under x → s x.
    expected_ratio: f64,
    quadrature_ratio: f64,
    series_ratio: f64,
    quadrature_relative_deviation: f64,
    series_relative_deviation: f64,
    original: &'a EnergyResult,
    rescaled: &'a EnergyResult,
}

pub fn scaling(ctx: &Context, a: &ScalingArgs) -> Result<Finished, Error> {
    if !(a.factor > 0.0 && a.factor.is_finite()) {
        return Err(Error::Validation("--factor must be a positive finite number".into()));
    }
    let config = ctx.load(&a.scenario)?;
    let hash = config.hash();
    let base = compute_energy(&config, a.n_max, DerivativeMethod::ClosedForm)?;
    let big = compute_energy(&config.rescaled(a.factor), a.n_max, DerivativeMethod::ClosedForm)?;
    let expected = 1.0 / a.factor;
    let q = big.quadrature.value / base.quadrature.value;
    let s = big.series.total / base.series.total;
    let report = ScalingReport {
        factor: a.factor,
        expected_ratio: expected,
        quadrature_ratio: q,
        series_ratio: s,
        quadrature_relative_deviation: (q / expected - 1.0).abs(),
        series_relative_deviation: (s / expected - 1.0).abs(),
        original: &base,
        rescaled: &big,
    };
    println!("E(s x)/E(x): quadrature {q:.12}, series {s:.12}, expected {expected:.12}");
    let mut pending = PendingOutputs::new();
    pending.add("scaling.json", tagged(&hash, &report)?);
    finish(ctx, pending, hash, snapshot(&config))
}
