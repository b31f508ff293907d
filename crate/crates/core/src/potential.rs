//! Radial scalar-potential constraint (1/r²)(r² ε Φ')' = s(r).
//!
//! Vertex-centred finite volumes on a grid clustered at the dielectric
//! wall, Φ'(0) = 0 by symmetry and Φ(L) = 0 on the truncation radius,
//! solved directly with the Thomas algorithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{linspace, CompositeRule};

/// Normwise backward error ‖r‖∞ / (‖A‖∞‖Φ‖∞ + ‖b‖∞) the direct solve
/// must reach.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// One Gaussian shell A·exp(−((r − c)/w)²) of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianShell {
    pub amplitude: f64,
    #[serde(default)]
    pub center: f64,
    pub width: f64,
}

impl GaussianShell {
    pub fn eval(&self, r: f64) -> f64 {
        let x = (r - self.center) / self.width;
        self.amplitude * (-x * x).exp()
    }
}

/// Potential problem as written in a scenario file.
///
/// Without `wall_radius` the permittivity is the constant `epsilon_outer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialProbe {
    #[serde(default = "one")]
    pub epsilon_inner: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_outer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_radius: Option<f64>,
    #[serde(default)]
    pub wall_width: f64,
    #[serde(default)]
    pub sources: Vec<GaussianShell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default = "default_cells")]
    pub cells: usize,
}

fn one() -> f64 {
    1.0
}

fn default_cells() -> usize {
    4000
}

impl PotentialProbe {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("potential_probe: {m}")));
        if !(self.epsilon_inner >= 1.0) || self.epsilon_outer.is_some_and(|e| !(e >= 1.0)) {
            return bad("permittivities must be ≥ 1");
        }
        if self.wall_radius.is_some_and(|r| !(r > 0.0)) || !(self.wall_width >= 0.0) {
            return bad("wall_radius must be > 0 and wall_width ≥ 0");
        }
        if self.sources.iter().any(|s| !(s.width > 0.0) || !s.amplitude.is_finite() || !(s.center >= 0.0)) {
            return bad("each source needs width > 0, finite amplitude and center ≥ 0");
        }
        if self.length.is_some_and(|l| !(l > 0.0)) {
            return bad("length must be > 0");
        }
        if self.cells < 16 {
            return bad("cells must be ≥ 16");
        }
        Ok(())
    }

    /// Radius beyond which both ε − ε_outer and s are negligible.
    pub fn support_radius(&self) -> f64 {
        let wall = self.wall_radius.map(|r| r + 20.0 * self.wall_width).unwrap_or(0.0);
        let src = self.sources.iter().map(|s| s.center + 6.0 * s.width).fold(0.0, f64::max);
        wall.max(src)
    }

    pub fn rescaled(&self, s: f64) -> Self {
        Self {
            wall_radius: self.wall_radius.map(|r| r * s),
            wall_width: self.wall_width * s,
            sources: self
                .sources
                .iter()
                .map(|g| GaussianShell { amplitude: g.amplitude / (s * s), center: g.center * s, width: g.width * s })
                .collect(),
            length: self.length.map(|l| l * s),
            ..self.clone()
        }
    }

    /// Discretize; `epsilon_inf` fills in a missing `epsilon_outer`.
    pub fn to_problem(&self, epsilon_inf: f64) -> Result<RadialEllipticProblem> {
        self.validate()?;
        let outer = self.epsilon_outer.unwrap_or(epsilon_inf);
        let inner = self.epsilon_inner;
        let wall = self.wall_radius;
        let width = self.wall_width;
        let eps = move |r: f64| match wall {
            None => outer,
            Some(rw) if width == 0.0 => {
                if r < rw {
                    inner
                } else {
                    outer
                }
            }
            Some(rw) => inner + (outer - inner) * 0.5 * (1.0 + ((r - rw) / width).tanh()),
        };
        let sources = self.sources.clone();
        let source = move |r: f64| sources.iter().map(|g| g.eval(r)).sum::<f64>();
        let support = self.support_radius().max(wall.unwrap_or(0.0)).max(1e-300);
        let length = self.length.unwrap_or(10.0 * support);
        let grid = match wall {
            Some(rw) if width > 0.0 => clustered_grid(length, self.cells, rw, width),
            _ => linspace(0.0, length, self.cells + 1),
        };
        RadialEllipticProblem::from_functions(&grid, eps, source, support)
    }
}

/// Grid on [0, L] with spacing ≤ δ/8 across [R − 10δ, R + 10δ].
pub fn clustered_grid(length: f64, cells: usize, wall_radius: f64, wall_width: f64) -> Vec<f64> {
    let a = (wall_radius - 10.0 * wall_width).max(0.0);
    let b = (wall_radius + 10.0 * wall_width).min(length);
    let h = (length / cells as f64).min(wall_width / 8.0);
    let n_mid = ((b - a) / h).ceil().max(1.0) as usize;
    let base = length / cells as f64;
    let n_lo = (a / base).ceil() as usize;
    let n_hi = ((length - b) / base).ceil() as usize;
    let mut g = Vec::new();
    if n_lo > 0 {
        g.extend(linspace(0.0, a, n_lo + 1));
        g.pop();
    }
    g.extend(linspace(a, b, n_mid + 1));
    if n_hi > 0 {
        g.pop();
        g.extend(linspace(b, length, n_hi + 1));
    }
    g
}

/// Sampled radial problem on [0, L].
#[derive(Debug, Clone)]
pub struct RadialEllipticProblem {
    /// Vertices, r₀ = 0 < … < r_N = L.
    pub nodes: Vec<f64>,
    /// ε at the vertices.
    pub epsilon: Vec<f64>,
    /// ε at the cell faces, midway between vertices.
    pub epsilon_faces: Vec<f64>,
    /// s at the vertices.
    pub source: Vec<f64>,
    /// ∫ s r² dr over each control volume.
    pub loads: Vec<f64>,
    /// Radius beyond which ε and s are uniform / zero.
    pub support_radius: f64,
}

impl RadialEllipticProblem {
    pub fn from_functions(
        nodes: &[f64],
        eps: impl Fn(f64) -> f64,
        source: impl Fn(f64) -> f64,
        support_radius: f64,
    ) -> Result<Self> {
        if nodes.len() < 3 || nodes[0] != 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("potential grid must start at 0 and increase strictly".into()));
        }
        let n = nodes.len();
        let faces: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let epsilon: Vec<f64> = nodes.iter().map(|&r| eps(r)).collect();
        let epsilon_faces: Vec<f64> = faces.iter().map(|&r| eps(r)).collect();
        if epsilon.iter().chain(&epsilon_faces).any(|&e| !(e >= 1.0)) {
            return Err(Error::Validation("potential_probe: ε(r) must be ≥ 1 on the grid".into()));
        }
        let length = nodes[n - 1];
        if length < 10.0 * support_radius * (1.0 - 1e-12) {
            log::warn!("potential domain L = {length} is shorter than 10x the support radius {support_radius}");
        }
        let mut loads = Vec::with_capacity(n);
        for i in 0..n {
            let lo = if i == 0 { 0.0 } else { faces[i - 1] };
            let hi = if i == n - 1 { length } else { faces[i] };
            let rule = CompositeRule::uniform(lo, hi, 1);
            loads.push(rule.integrate(|r| source(r) * r * r).value);
        }
        Ok(Self {
            source: nodes.iter().map(|&r| source(r)).collect(),
            nodes: nodes.to_vec(),
            epsilon,
            epsilon_faces,
            loads,
            support_radius,
        })
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().expect("nonempty grid")
    }

    /// Face conductances f² ε / Δr.
    fn conductances(&self) -> Vec<f64> {
        self.nodes
            .windows(2)
            .zip(&self.epsilon_faces)
            .map(|(w, e)| {
                let f = 0.5 * (w[0] + w[1]);
                f * f * e / (w[1] - w[0])
            })
            .collect()
    }

    /// Discrete flux balance A·Φ − b at each interior vertex.
    pub fn residual(&self, phi: &[f64]) -> Vec<f64> {
        let c = self.conductances();
        let n = self.nodes.len();
        (0..n - 1)
            .map(|i| {
                let right = c[i] * (phi[i + 1] - phi[i]);
                let left = if i == 0 { 0.0 } else { c[i - 1] * (phi[i] - phi[i - 1]) };
                right - left - self.loads[i]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    /// Per-vertex flux residual.
    pub residual: Vec<f64>,
    /// Normwise backward error of the solve (0 for a zero source).
    pub residual_norm: f64,
    pub support_radius: f64,
    /// Description of the domain truncation.
    pub boundary_convention: &'static str,
}

pub const BOUNDARY_CONVENTION: &str = "truncated domain: Phi(L) = 0, Phi'(0) = 0";

pub fn solve_radial_potential(problem: &RadialEllipticProblem) -> Result<RadialSolution> {
    let n = problem.nodes.len();
    let c = problem.conductances();
    // unknowns Φ_0..Φ_{N-1}; Φ_N = 0
    let m = n - 1;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    // sign flipped so the matrix is positive definite
    let rhs: Vec<f64> = problem.loads[..m].iter().map(|l| -l).collect();
    for i in 0..m {
        diag[i] = c[i] + if i == 0 { 0.0 } else { c[i - 1] };
        if i > 0 {
            lower[i] = -c[i - 1];
        }
        if i + 1 < m {
            upper[i] = -c[i];
        }
    }
    let mut phi = thomas(&lower, &diag, &upper, &rhs)?;
    phi.push(0.0);

    let residual = problem.residual(&phi);
    let mut residual_full = residual.clone();
    residual_full.push(0.0);
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let a_norm = (0..m).map(|i| diag[i].abs() + lower[i].abs() + upper[i].abs()).fold(0.0f64, f64::max);
    let scale = a_norm * inf(&phi) + inf(&problem.loads);
    let res = inf(&residual);
    let residual_norm = if scale == 0.0 { res } else { res / scale };
    if residual_norm > RESIDUAL_TOL {
        return Err(Error::NonConvergence {
            what: "radial potential solve".into(),
            achieved: residual_norm,
            requested: RESIDUAL_TOL,
        });
    }
    Ok(RadialSolution {
        r: problem.nodes.clone(),
        phi,
        residual: residual_full,
        residual_norm,
        support_radius: problem.support_radius,
        boundary_convention: BOUNDARY_CONVENTION,
    })
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let scale = diag.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut piv = diag[0];
    if piv.abs() <= 1e-14 * scale {
        return Err(Error::Singular("zero pivot in tridiagonal solve".into()));
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv.abs() <= 1e-14 * scale {
            return Err(Error::Singular(format!("zero pivot at row {i}")));
        }
        c[i] = upper[i] / piv;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayStatus {
    /// Power law fitted to the field Φ'.
    Fitted,
    /// Φ' vanishes beyond the source: faster than any power.
    Vanishing,
    /// Φ ≡ 0; nothing to fit.
    TrivialSolution,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub status: DecayStatus,
    /// p in Φ ~ r^{−p}, measured from Φ' ~ r^{−(p+1)}.
    pub exponent: Option<f64>,
    pub std_error: Option<f64>,
    pub fit_range: Option<[f64; 2]>,
}

/// Fit the far-field falloff of the solution.
///
/// The field Φ' is used rather than Φ because the Φ(L) = 0 truncation adds
/// a constant that masks the power law near L.
pub fn far_field_decay_check(sol: &RadialSolution) -> Result<DecayReport> {
    let peak = sol.phi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if peak == 0.0 {
        return Ok(DecayReport { status: DecayStatus::TrivialSolution, exponent: None, std_error: None, fit_range: None });
    }
    let length = *sol.r.last().expect("nonempty");
    let (lo, hi) = (1.5 * sol.support_radius, 0.5 * length);
    let mut field_peak = 0.0f64;
    let mut pts = Vec::new();
    for i in 0..sol.r.len() - 1 {
        let mid = 0.5 * (sol.r[i] + sol.r[i + 1]);
        let d = (sol.phi[i + 1] - sol.phi[i]) / (sol.r[i + 1] - sol.r[i]);
        field_peak = field_peak.max(d.abs());
        if mid >= lo && mid <= hi {
            pts.push((mid, d));
        }
    }
    if pts.len() < 8 {
        return Err(Error::Fit(format!(
            "only {} far-field samples between {lo:.3e} and {hi:.3e}; enlarge the domain",
            pts.len()
        )));
    }
    let floor = 1e-9 * field_peak;
    if pts.iter().all(|&(_, d)| d.abs() <= floor) {
        return Ok(DecayReport {
            status: DecayStatus::Vanishing,
            exponent: None,
            std_error: None,
            fit_range: Some([lo, hi]),
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) =
        pts.iter().filter(|&&(_, d)| d.abs() > floor).map(|&(r, d)| (r.ln(), d.abs().ln())).unzip();
    let fit = crate::response::linear_fit(&x, &y)?;
    Ok(DecayReport {
        status: DecayStatus::Fitted,
        exponent: Some(-fit.slope - 1.0),
        std_error: Some(fit.slope_std_error),
        fit_range: Some([lo, hi]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;

    fn gaussian_probe(eps: f64, sources: Vec<GaussianShell>, cells: usize) -> PotentialProbe {
        PotentialProbe {
            epsilon_inner: eps,
            epsilon_outer: Some(eps),
            wall_radius: None,
            wall_width: 0.0,
            sources,
            length: Some(12.0),
            cells,
        }
    }

    /// Φ(r) = −(1/ε)[Q(r)/r + ∫_r^L s r' dr' − Q(L)/L], Q(r) = ∫₀^r s r'² dr'.
    fn coulomb_oracle(eps: f64, s: impl Fn(f64) -> f64 + Copy, length: f64, r: f64) -> f64 {
        let q = |x: f64| integrate_adaptive(|u| s(u) * u * u, 0.0, x, &[], 1e-15, 1e-13).unwrap().value;
        let tail = integrate_adaptive(|u| s(u) * u, r, length, &[], 1e-15, 1e-13).unwrap().value;
        // Q(r)/r → 0 at the origin
        let inner = if r == 0.0 { 0.0 } else { q(r) / r };
        -(inner + tail - q(length) / length) / eps
    }

    #[test]
    fn zero_source_gives_zero_potential() {
        let probe = gaussian_probe(1.78, vec![], 200);
        let sol = solve_radial_potential(&probe.to_problem(1.78).unwrap()).unwrap();
        assert!(sol.phi.iter().all(|&p| p == 0.0));
        let rep = far_field_decay_check(&sol).unwrap();
        assert_eq!(rep.status, DecayStatus::TrivialSolution);
    }

    #[test]
    fn constant_epsilon_matches_coulomb_integral() {
        let eps = 2.0;
        let g = GaussianShell { amplitude: 1.0, center: 0.0, width: 0.7 };
        let probe = gaussian_probe(eps, vec![g], 20000);
        let sol = solve_radial_potential(&probe.to_problem(eps).unwrap()).unwrap();
        let scale = sol.phi[0].abs();
        for &target in &[0.0, 0.3, 1.0, 2.5, 6.0] {
            let i = sol.r.iter().position(|&x| x >= target - 1e-12).unwrap();
            let r = sol.r[i];
            let exact = coulomb_oracle(eps, |u| g.eval(u), 12.0, r);
            assert!((sol.phi[i] - exact).abs() < 1e-6 * scale, "r={r}: {} vs {exact}", sol.phi[i]);
        }
    }

    #[test]
    fn linearity() {
        let eps = 1.78;
        let s1 = GaussianShell { amplitude: 1.0, center: 1.0, width: 0.2 };
        let s2 = GaussianShell { amplitude: -0.3, center: 0.5, width: 0.1 };
        let mk = |src: Vec<GaussianShell>| {
            let mut p = gaussian_probe(eps, src, 2000);
            p.wall_radius = Some(1.0);
            p.wall_width = 0.05;
            p.epsilon_inner = 1.0;
            solve_radial_potential(&p.to_problem(eps).unwrap()).unwrap()
        };
        let a = mk(vec![s1]);
        let b = mk(vec![s2]);
        let scaled = |g: GaussianShell, f: f64| GaussianShell { amplitude: g.amplitude * f, ..g };
        let both = mk(vec![scaled(s1, 2.0), scaled(s2, -3.0)]);
        let scale = both.phi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        for i in 0..a.phi.len() {
            let lin = 2.0 * a.phi[i] - 3.0 * b.phi[i];
            assert!((both.phi[i] - lin).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn second_order_convergence() {
        let eps = |r: f64| 1.0 + 0.78 * 0.5 * (1.0 + ((r - 1.0) / 0.2).tanh());
        let s = |r: f64| (-((r - 1.0) / 0.3).powi(2)).exp();
        let solve = |n: usize| {
            let grid = linspace(0.0, 8.0, n + 1);
            let p = RadialEllipticProblem::from_functions(&grid, eps, s, 2.0).unwrap();
            solve_radial_potential(&p).unwrap()
        };
        let fine = solve(6400);
        let err = |n: usize| {
            let sol = solve(n);
            let stride = 6400 / n;
            (0..=n).map(|i| (sol.phi[i] - fine.phi[i * stride]).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(100), err(200));
        let order = (e1 / e2).log2();
        assert!(order > 1.8 && order < 2.3, "order {order}");
    }

    #[test]
    fn bubble_wall_source_gives_nontrivial_potential() {
        let mut p = gaussian_probe(1.78, vec![GaussianShell { amplitude: 1.0, center: 1.0, width: 0.05 }], 4000);
        p.epsilon_inner = 1.0;
        p.wall_radius = Some(1.0);
        p.wall_width = 0.05;
        p.length = None;
        let sol = solve_radial_potential(&p.to_problem(1.78).unwrap()).unwrap();
        assert!(sol.phi[0].abs() > 0.0);
        let mid = sol.r.iter().position(|&r| r > 3.0).unwrap();
        assert!(sol.phi[mid].abs() > 0.0);
        assert_eq!(*sol.phi.last().unwrap(), 0.0);
        assert!(sol.residual_norm <= RESIDUAL_TOL);
    }

    #[test]
    fn monopole_source_decays_as_inverse_r() {
        let probe = gaussian_probe(1.5, vec![GaussianShell { amplitude: 1.0, center: 0.0, width: 0.5 }], 8000);
        let mut probe = probe;
        probe.length = Some(60.0);
        let sol = solve_radial_potential(&probe.to_problem(1.5).unwrap()).unwrap();
        let rep = far_field_decay_check(&sol).unwrap();
        assert_eq!(rep.status, DecayStatus::Fitted);
        assert!((rep.exponent.unwrap() - 1.0).abs() < 1e-3, "{rep:?}");
    }

    #[test]
    fn zero_charge_source_falls_faster() {
        // positive core, negative shell, total ∫ s r² dr = 0
        let core = GaussianShell { amplitude: 1.0, center: 0.0, width: 0.5 };
        let q_core = integrate_adaptive(|r| core.eval(r) * r * r, 0.0, 10.0, &[], 1e-15, 1e-14).unwrap().value;
        let shell0 = GaussianShell { amplitude: 1.0, center: 1.5, width: 0.3 };
        let q_shell = integrate_adaptive(|r| shell0.eval(r) * r * r, 0.0, 10.0, &[], 1e-15, 1e-14).unwrap().value;
        let shell = GaussianShell { amplitude: -q_core / q_shell, ..shell0 };
        let mut probe = gaussian_probe(1.5, vec![core, shell], 8000);
        probe.length = Some(60.0);
        let sol = solve_radial_potential(&probe.to_problem(1.5).unwrap()).unwrap();
        let rep = far_field_decay_check(&sol).unwrap();
        match rep.status {
            DecayStatus::Vanishing => {}
            DecayStatus::Fitted => assert!(rep.exponent.unwrap() >= 2.0, "{rep:?}"),
            DecayStatus::TrivialSolution => panic!("nonzero source"),
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let r = RadialEllipticProblem::from_functions(&[0.0, 1.0, 0.5], |_| 1.0, |_| 0.0, 0.1);
        assert!(r.is_err());
    }
}
