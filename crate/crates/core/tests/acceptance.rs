//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any
//! failure so `cargo test` reports it.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use casimir_response::estimator::{energy_bound, BoundInputs};
use casimir_response::gnm::gnm_exact;
use casimir_response::output::{col, float_rows, render_csv, to_json, CsvHeader};
use casimir_response::potential::{solve_radial_potential, GaussianShell, PotentialProbe, RadialSolution};
use casimir_response::quadrature::{gauss_legendre, integrate_adaptive};
use casimir_response::response::{
    compute_spectrum, n_per_mode_with, AngularKernel, MomentumRules, SpectrumOptions, SpectrumResult,
};
use casimir_response::scenario::{LoadOptions, ScenarioConfig};
use casimir_response::transforms::{
    build_spectral_table, dynamic_moment_jets, full_moment, sharp_moment, static_moments, TableGrids,
};
use casimir_response::velocity::{classify_profile, Classification};
use num_rational::BigRational;
use rand::{rngs::StdRng, Rng, SeedableRng};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn scenario(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_json_str(text, LoadOptions::default()).expect("bundled scenario parses")
}

fn reference_run() -> SpectrumResult {
    compute_spectrum(&ScenarioConfig::reference(), &SpectrumOptions::default()).expect("reference spectrum")
}

fn gnm_exactness() -> Check {
    ensure(gnm_exact(0, 0) == BigRational::new(1.into(), 105.into()), format!("G00 kernel = {}", gnm_exact(0, 0)))?;
    let mut checked = 0;
    for n in 0..=6usize {
        for m in 0..=6 - n {
            let k = gnm_exact(n, m);
            ensure(k == gnm_exact(m, n), format!("asymmetric at ({n},{m})"))?;
            if n > 0 {
                ensure(k == gnm_exact(n - 1, m + 1), format!("anti-diagonal differs at ({n},{m})"))?;
            }
            checked += 1;
        }
    }
    Ok(format!("kernel(0,0) = 1/105 exactly; {checked} entries symmetric and constant on anti-diagonals"))
}

fn moment_anchor() -> Check {
    let cfg = scenario(include_str!("../../../scenarios/sharp_bubble.json"));
    let eps = cfg.epsilon_inf;
    let track = *cfg.profile.track().expect("bubble track");
    let stat = static_moments(&cfg, 0).map_err(|e| e.to_string())?[0];
    let (mut worst_closed, mut worst_quad) = (0.0f64, 0.0f64);
    for &t in &[-25.0, -7.5, -1.0, 0.0, 3.0, 12.0, 30.0] {
        let r = track.radius(t);
        let anchor = 0.5 * (1.0 - 1.0 / eps) * 4.0 / 3.0 * PI * r.powi(3);
        let closed = dynamic_moment_jets(&cfg, t, 0)[0].value() + stat;
        let direct = sharp_moment(eps, r, 0);
        let quad = full_moment(&cfg, 0, t).map_err(|e| e.to_string())?.value;
        worst_closed = worst_closed.max(((closed - anchor) / anchor).abs()).max(((direct - anchor) / anchor).abs());
        worst_quad = worst_quad.max(((quad - anchor) / anchor).abs());
    }
    ensure(worst_closed <= 1e-10, format!("closed-form path off by {worst_closed:.2e}"))?;
    ensure(worst_quad <= 1e-6, format!("quadrature path off by {worst_quad:.2e}"))?;
    Ok(format!("closed form {worst_closed:.1e} (tol 1e-10), quadrature {worst_quad:.1e} (tol 1e-6)"))
}

fn series_vs_quadrature(run: &SpectrumResult) -> Check {
    let quad = run.total_energy_quadrature.value;
    let series = run.total_energy_series.total;
    let rel = (series - quad).abs() / quad;
    let lead = run.total_energy_series.leading_fraction;
    ensure(rel <= 0.02, format!("series {series:.6e} vs quadrature {quad:.6e}: {rel:.3e}"))?;
    ensure(lead >= 0.99, format!("E00 share {lead:.4}"))?;
    Ok(format!("E_series {series:.6e}, E_quad {quad:.6e}, rel {rel:.2e} (tol 2e-2), E00 share {lead:.4}"))
}

fn omega4_law(run: &SpectrumResult) -> Check {
    let f = &run.low_omega;
    ensure((3.8..=4.2).contains(&f.exponent), format!("p = {:.4}", f.exponent))?;
    ensure(f.std_error <= 0.1, format!("sigma = {:.3e}", f.std_error))?;
    Ok(format!("p = {:.4} +- {:.1e} over omega in [{:.2e}, {:.2e}]", f.exponent, f.std_error, f.omega_window[0], f.omega_window[1]))
}

/// V·N_k by a product rule over the full sphere of k' directions with the
/// polarization sum Σ_λ (1 − (k̂'·e_λ)²) written out, k along a generic axis.
fn sphere_mode_sum(
    table: &casimir_response::transforms::SpectralTable,
    rules: &MomentumRules,
    k: f64,
    axis: [f64; 3],
) -> f64 {
    let eps = rules.epsilon_inf;
    let sq = eps.sqrt();
    let n = {
        let l = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        axis.map(|c| c / l)
    };
    // two unit vectors orthogonal to n
    let a = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let e1 = {
        let d = dot(a, n);
        let v = [a[0] - d * n[0], a[1] - d * n[1], a[2] - d * n[2]];
        let l = dot(v, v).sqrt();
        v.map(|c| c / l)
    };
    let e2 = [n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2], n[0] * e1[1] - n[1] * e1[0]];
    let (xt, wt) = gauss_legendre(96);
    let n_phi = 96;
    let wk = k / sq;
    let mut total = 0.0;
    for (i, &kk) in rules.k.nodes.iter().enumerate() {
        let wkk = kk / sq;
        let mut sphere = 0.0;
        for (x, w) in xt.iter().zip(&wt) {
            let st = (1.0 - x * x).sqrt();
            for j in 0..n_phi {
                let phi = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
                let u = [st * phi.cos(), st * phi.sin(), *x];
                let mu = dot(u, n);
                let q = (k * k + kk * kk + 2.0 * k * kk * mu).max(0.0).sqrt();
                let pol = 2.0 - dot(u, e1).powi(2) - dot(u, e2).powi(2);
                sphere += w * (2.0 * PI / n_phi as f64) * table.eval(q, wk + wkk).norm_sqr() * pol;
            }
        }
        total += rules.k.weights[i] * kk * kk * wkk * sphere;
    }
    wk * total / (2.0 * PI).powi(3)
}

fn polarization_identity() -> Check {
    let cfg = ScenarioConfig::reference();
    let table = build_spectral_table(&cfg, &TableGrids::for_scenario(&cfg)).map_err(|e| e.to_string())?;
    let rules = MomentumRules::new(&table, cfg.quadrature.n_k, 8);
    let k_top = cfg.epsilon_inf.sqrt() * table.meta.omega_dense;
    let mut rng = StdRng::seed_from_u64(20240521);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.gen_range(1e-3 * k_top..k_top);
        let s = n_per_mode_with(&table, &rules, k, AngularKernel::Summed).map_err(|e| e.to_string())?.value;
        let p = n_per_mode_with(&table, &rules, k, AngularKernel::PerPolarization).map_err(|e| e.to_string())?.value;
        worst = worst.max((s / (2.0 * p) - 1.0).abs());
    }
    ensure(worst <= 1e-12, format!("Summed/(2 PerPolarization) off by {worst:.2e}"))?;
    let mut worst_sphere = 0.0f64;
    for (k, axis) in [(0.02 * k_top, [0.3, -0.5, 0.8]), (0.3 * k_top, [1.0, 0.2, 0.1]), (0.8 * k_top, [-0.2, 0.7, -0.4])] {
        let reduced = n_per_mode_with(&table, &rules, k, AngularKernel::Summed).map_err(|e| e.to_string())?.value;
        let direct = sphere_mode_sum(&table, &rules, k, axis);
        worst_sphere = worst_sphere.max(((direct - reduced) / reduced).abs());
    }
    ensure(worst_sphere <= 1e-6, format!("azimuthal reduction vs sphere quadrature: {worst_sphere:.2e}"))?;
    Ok(format!("20 random k: ratio error {worst:.1e} (tol 1e-12); sphere quadrature {worst_sphere:.1e} (tol 1e-6)"))
}

fn low_momentum_law(run: &SpectrumResult) -> Check {
    let lm = &run.low_momentum;
    let worst = lm.relative_change.iter().fold(0.0f64, |a, &b| a.max(b));
    let last = *lm.ratio.last().expect("ratios");
    ensure(lm.relative_change.len() == 4, "expected 4 halvings".into())?;
    ensure(worst < 0.02, format!("changes per halving {:?}", lm.relative_change))?;
    ensure(last > 0.0 && lm.monotone, format!("limit {last:.3e}, monotone {}", lm.monotone))?;
    Ok(format!("V N_k / k -> {last:.5e}; max change per halving {worst:.2e} (tol 2e-2)"))
}

fn velocity_classification() -> Check {
    let cases = [
        (include_str!("../../../scenarios/velocity_incompressible.json"), Classification::Localized),
        (include_str!("../../../scenarios/velocity_uniform.json"), Classification::Divergent),
        (include_str!("../../../scenarios/velocity_rigid.json"), Classification::RigidFirstOrderNull),
    ];
    let mut growth = 0.0;
    for (text, expected) in cases {
        let cfg = scenario(text);
        let v = cfg.velocity.as_ref().ok_or("scenario has no velocity")?;
        let d = classify_profile(v, cfg.epsilon_inf, None).map_err(|e| e.to_string())?;
        ensure(d.classification == expected, format!("{:?} classified {:?}", d.kind, d.classification))?;
        if expected == Classification::Divergent {
            growth = d.growth_per_halving.unwrap_or(0.0);
            ensure(growth > 0.5, format!("uniform flow grows {growth:.3} per halving"))?;
        }
    }
    Ok(format!("Localized / Divergent / RigidFirstOrderNull; uniform flow grows {:.0}% per halving", 100.0 * growth))
}

fn solve(probe: &PotentialProbe, eps: f64) -> RadialSolution {
    solve_radial_potential(&probe.to_problem(eps).expect("valid probe")).expect("solve")
}

fn potential_solver() -> Check {
    let eps = 2.0;
    let length = 12.0;
    let g = GaussianShell { amplitude: 1.0, center: 0.0, width: 0.7 };
    let probe = |sources: Vec<GaussianShell>, cells: usize| PotentialProbe {
        epsilon_inner: eps,
        epsilon_outer: Some(eps),
        wall_radius: None,
        wall_width: 0.0,
        sources,
        length: Some(length),
        cells,
    };
    // Φ(r) = −(1/ε)[Q(r)/r + ∫_r^L s r' dr' − Q(L)/L], Q(r) = ∫₀^r s r'² dr'
    let oracle = |r: f64| {
        let q = |x: f64| integrate_adaptive(|u| g.eval(u) * u * u, 0.0, x, &[], 1e-16, 1e-14).unwrap().value;
        let tail = integrate_adaptive(|u| g.eval(u) * u, r, length, &[], 1e-16, 1e-14).unwrap().value;
        let inner = if r == 0.0 { 0.0 } else { q(r) / r };
        -(inner + tail - q(length) / length) / eps
    };
    let fine = solve(&probe(vec![g], 20000), eps);
    let scale = fine.phi[0].abs();
    let mut worst = 0.0f64;
    for (i, &r) in fine.r.iter().enumerate().step_by(997) {
        worst = worst.max((fine.phi[i] - oracle(r)).abs() / scale);
    }
    ensure(worst <= 1e-6, format!("oracle mismatch {worst:.2e}"))?;

    let g2 = GaussianShell { amplitude: -0.4, center: 2.0, width: 0.3 };
    let a = solve(&probe(vec![g], 2000), eps);
    let b = solve(&probe(vec![g2], 2000), eps);
    let scaled = |s: GaussianShell, f: f64| GaussianShell { amplitude: s.amplitude * f, ..s };
    let ab = solve(&probe(vec![scaled(g, 1.5), scaled(g2, -2.0)], 2000), eps);
    let lin = (0..ab.phi.len())
        .map(|i| (ab.phi[i] - 1.5 * a.phi[i] + 2.0 * b.phi[i]).abs())
        .fold(0.0f64, f64::max)
        / ab.phi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    ensure(lin <= 1e-12, format!("superposition error {lin:.2e}"))?;

    let err = |cells: usize| {
        let s = solve(&probe(vec![g], cells), eps);
        s.r.iter().zip(&s.phi).step_by(cells / 20).map(|(&r, &p)| (p - oracle(r)).abs()).fold(0.0f64, f64::max)
    };
    let (e1, e2) = (err(100), err(200));
    let order = (e1 / e2).log2();
    ensure((1.8..=2.3).contains(&order), format!("observed order {order:.3}"))?;
    Ok(format!("oracle {worst:.1e} (tol 1e-6), superposition {lin:.1e}, grid order {order:.2}"))
}

fn estimator_scaling() -> Check {
    let base = BoundInputs { v_quant: Some(2.0), c_order: 0.7, ..BoundInputs::new(1.3, 0.9, 2.2) };
    let e0 = energy_bound(&base);
    let mut worst = 0.0f64;
    for &s in &[0.5, 2.0, 3.0, 7.25] {
        let checks = [
            (energy_bound(&BoundInputs { r_max: s * base.r_max, ..base }), s.powi(6)),
            (energy_bound(&BoundInputs { t_max: s * base.t_max, ..base }), s.powi(2)),
            (energy_bound(&BoundInputs { k_c: s * base.k_c, ..base }), s.powi(9)),
        ];
        for (v, factor) in checks {
            worst = worst.max((v / (e0 * factor) - 1.0).abs());
        }
    }
    ensure(worst <= 8.0 * f64::EPSILON, format!("scaling error {worst:.2e}"))?;
    Ok(format!("r^6 t^2 k^9 scaling error {worst:.1e} (tol 8 ulp)"))
}

fn spectrum_csv(run: &SpectrumResult, hash: &str) -> String {
    let rows = run.omega_grid.iter().zip(&run.e_of_omega).zip(&run.e_error).map(|((&w, &e), &err)| [w, e, err]);
    render_csv(&CsvHeader::new(hash), &[col("omega", "1/time"), col("e", "1"), col("err", "1")], &float_rows(rows))
}

fn determinism_and_scaling(run: &SpectrumResult) -> Check {
    let cfg = ScenarioConfig::reference();
    let hash = cfg.hash().to_string();
    let again = reference_run();
    let same_csv = spectrum_csv(run, &hash) == spectrum_csv(&again, &hash);
    let same_json = to_json(run).map_err(|e| e.to_string())? == to_json(&again).map_err(|e| e.to_string())?;
    ensure(same_csv && same_json, format!("rerun differs: csv {same_csv}, json {same_json}"))?;

    let big = compute_spectrum(&cfg.rescaled(2.0), &SpectrumOptions::default()).map_err(|e| e.to_string())?;
    let dq = (big.total_energy_quadrature.value / run.total_energy_quadrature.value - 0.5).abs() / 0.5;
    let ds = (big.total_energy_series.total / run.total_energy_series.total - 0.5).abs() / 0.5;
    ensure(dq <= 1e-6 && ds <= 1e-6, format!("E(2x)/E(x) off 1/2 by {dq:.2e} (quadrature), {ds:.2e} (series)"))?;
    Ok(format!("byte-identical rerun; s=2 energy ratio error {dq:.1e} / {ds:.1e} (tol 1e-6)"))
}

fn main() {
    // the standard harness flags are accepted and ignored
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, f: &dyn Fn() -> Check| {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{id:>2}] {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failures += 1;
                println!("FAIL [{id:>2}] {name}: {detail} ({secs:.1} s)");
            }
        }
    };

    report(1, "G00 exactness", &gnm_exactness);
    report(2, "moment anchor", &moment_anchor);
    let t = Instant::now();
    let run = reference_run();
    println!("reference spectrum computed in {:.1} s", t.elapsed().as_secs_f64());
    report(3, "series vs quadrature energy", &|| series_vs_quadrature(&run));
    report(4, "omega^4 law", &|| omega4_law(&run));
    report(5, "polarization identity", &polarization_identity);
    report(6, "low-momentum law", &|| low_momentum_law(&run));
    report(7, "velocity classification", &velocity_classification);
    report(8, "potential solver", &potential_solver);
    report(9, "estimator scaling", &estimator_scaling);
    report(10, "determinism and scale covariance", &|| determinism_and_scaling(&run));

    println!("acceptance: {} failed, total {:.1} s", failures, start.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
