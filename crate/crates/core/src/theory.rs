//! Numerical convergence certificate for AB-SAGA.
//!
//! The four error quantities (π-weighted agreement error, scaled optimality gap,
//! auxiliary table gap, scaled tracking error) obey `t^{k+1} <= G_alpha t^k` for a
//! nonnegative 4×4 matrix `G_alpha`. A positive vector `delta` with
//! `G_alpha delta <= gamma delta` bounds `rho(G_alpha) <= gamma`, which certifies
//! linear convergence. This module evaluates every closed-form constant involved
//! and checks those inequalities numerically.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::problems::ProblemConstants;
use crate::weights::WeightSystem;

/// Every numeric constant of the error-system analysis, in one place.
pub mod consts {
    /// `g_1 = 40 ell^2 n |pi_c|^2 max(pi_r) / (1 - sigma_A^{2c})`
    pub const G1: f64 = 40.0;
    /// `g_2 = 16 ell^2 |pi_c|^2 max(pi_r) / (1 - sigma_A^{2c})`
    pub const G2: f64 = 16.0;
    /// `g_3 = 8 ell^2 max(pi_r) max(pi_c) / (1 - sigma_A^{2c})`
    pub const G3: f64 = 8.0;
    /// `g_4 = 8 ell^2 n pi_r.pi_c / (mu min(pi_r))`
    pub const G4: f64 = 8.0;
    /// `g_5 = mu n pi_r.pi_c / 4`
    pub const G5_DIV: f64 = 4.0;
    /// `g_6 = 3 ell^2 n (pi_r.pi_c)^2`
    pub const G6: f64 = 3.0;
    /// `g_7 = 5 ell^2 |pi_r|^2 max(pi_c) / (mu pi_r.pi_c)`
    pub const G7: f64 = 5.0;
    /// Diagonal of the agreement and tracking rows.
    pub const DIAG_CONSENSUS: f64 = 0.75;
    /// Row-3 coefficients `2/(m min(pi_r))` and `2/m`.
    pub const ROW3: f64 = 2.0;
    /// Row-4 coefficients on `sigma_B^{2d} / (1 - sigma_B^{2d})`.
    pub const ROW4_AGREE: f64 = 146.0;
    pub const ROW4_OPT: f64 = 97.0;
    pub const ROW4_AUX: f64 = 26.0;
    /// Step-size bound terms.
    pub const STEP_SQRT_H: f64 = 35.0;
    pub const STEP_KAPPA: f64 = 288.0;
    pub const STEP_M: f64 = 9.0;
    /// Requirement `c, d >= log(4n) / log(1/sigma)`.
    pub const ROUNDS_LOG_N: f64 = 4.0;
    /// Communication-round thresholds.
    pub const C_BAR: f64 = 90512.0;
    pub const D_BAR: f64 = 1265.0;
    /// Applicability gate `sigma_B^d < pi_r.pi_c / (201 kappa) sqrt(m / (n M h_c))`.
    pub const SIGMA_B_GATE: f64 = 201.0;
    /// `tau_1`, `tau_2`, `delta_4` numerator.
    pub const TAU: f64 = 40000.0;
    pub const DELTA2: f64 = 64.0;
    pub const DELTA3: f64 = 130.0;
    /// Sufficient bounds on `sigma_A^{2c}` from the first inequality.
    pub const SIGMA_A_FIRST: f64 = 51200.0;
    pub const SIGMA_A_SECOND: f64 = 640000.0;
}

/// Tolerance for `rho <= bound` comparisons.
pub const RHO_TOL: f64 = 1e-9;
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 100_000;

/// Scalars the certificate needs from the mixing weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkConstants {
    pub n: usize,
    pub pi_r_min: f64,
    pub pi_r_max: f64,
    pub pi_c_min: f64,
    pub pi_c_max: f64,
    pub pi_r_norm_sq: f64,
    pub pi_c_norm_sq: f64,
    pub pi_dot: f64,
    pub h_r: f64,
    pub h_c: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
}

impl NetworkConstants {
    pub fn from_perron(
        pi_r: &DVector<f64>,
        pi_c: &DVector<f64>,
        sigma_a: f64,
        sigma_b: f64,
    ) -> Result<Self> {
        let n = pi_r.len();
        if n == 0 || pi_c.len() != n {
            return Err(Error::InvalidArgument("Perron vectors must have equal positive length".into()));
        }
        if pi_r.iter().chain(pi_c.iter()).any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument("Perron vectors must be positive".into()));
        }
        if !(0.0..1.0).contains(&sigma_a) || !(0.0..1.0).contains(&sigma_b) {
            return Err(Error::InvalidArgument(format!(
                "contraction factors must lie in [0, 1), got {sigma_a}, {sigma_b}"
            )));
        }
        Ok(Self {
            n,
            pi_r_min: pi_r.min(),
            pi_r_max: pi_r.max(),
            pi_c_min: pi_c.min(),
            pi_c_max: pi_c.max(),
            pi_r_norm_sq: pi_r.norm_squared(),
            pi_c_norm_sq: pi_c.norm_squared(),
            pi_dot: pi_r.dot(pi_c),
            h_r: pi_r.max() / pi_r.min(),
            h_c: pi_c.max() / pi_c.min(),
            sigma_a,
            sigma_b,
        })
    }

    pub fn from_weights(ws: &WeightSystem) -> Self {
        Self::from_perron(&ws.pi_r, &ws.pi_c, ws.sigma_a, ws.sigma_b)
            .expect("a constructed weight system has valid spectra")
    }

    pub fn psi(&self) -> f64 {
        (self.h_r * self.h_c).sqrt() / (self.n as f64 * self.pi_dot)
    }
}

/// Network, problem, and run parameters the certificate is evaluated at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceInputs {
    pub network: NetworkConstants,
    pub ell: f64,
    pub mu: f64,
    pub kappa: f64,
    /// smallest local data size
    pub m: usize,
    /// largest local data size
    pub big_m: usize,
    pub alpha: f64,
    pub c: u32,
    pub d: u32,
}

impl ConvergenceInputs {
    pub fn new(
        network: NetworkConstants,
        problem: ProblemConstants,
        m: usize,
        big_m: usize,
        alpha: f64,
        c: u32,
        d: u32,
    ) -> Result<Self> {
        if m == 0 || big_m < m {
            return Err(Error::InvalidArgument(format!("need 1 <= m <= M, got m={m}, M={big_m}")));
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        if c == 0 || d == 0 {
            return Err(Error::InvalidArgument("c and d must be >= 1".into()));
        }
        Ok(Self {
            network,
            ell: problem.ell,
            mu: problem.mu,
            kappa: problem.kappa,
            m,
            big_m,
            alpha,
            c,
            d,
        })
    }

    pub fn with_run(self, alpha: f64, c: u32, d: u32) -> Self {
        Self { alpha, c, d, ..self }
    }

    /// `sigma_A^{2c}`
    pub fn sigma_a_2c(&self) -> f64 {
        self.network.sigma_a.powi(2 * self.c as i32)
    }

    /// `sigma_B^{2d}`
    pub fn sigma_b_2d(&self) -> f64 {
        self.network.sigma_b.powi(2 * self.d as i32)
    }

    fn n(&self) -> f64 {
        self.network.n as f64
    }
}

/// `g_1 ... g_7`, zero-indexed.
pub fn g_constants(inp: &ConvergenceInputs) -> [f64; 7] {
    let net = &inp.network;
    let n = inp.n();
    let l2 = inp.ell * inp.ell;
    let one_minus_a = 1.0 - inp.sigma_a_2c();
    [
        consts::G1 * l2 * n * net.pi_c_norm_sq * net.pi_r_max / one_minus_a,
        consts::G2 * l2 * net.pi_c_norm_sq * net.pi_r_max / one_minus_a,
        consts::G3 * l2 * net.pi_r_max * net.pi_c_max / one_minus_a,
        consts::G4 * l2 * n * net.pi_dot / (inp.mu * net.pi_r_min),
        inp.mu * n * net.pi_dot / consts::G5_DIV,
        consts::G6 * l2 * n * net.pi_dot * net.pi_dot,
        consts::G7 * l2 * net.pi_r_norm_sq * net.pi_c_max / (inp.mu * net.pi_dot),
    ]
}

/// The step-size and round preconditions under which the 4×4 bound holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreconditionCheck {
    /// `min{1/(35 ell sqrt(h_r h_c)), mu/(288 n ell^2 pi_r.pi_c)}`
    pub alpha_bound: f64,
    /// `log(4n)/log(1/sigma_A)`, zero when `sigma_A = 0`
    pub c_threshold: f64,
    pub d_threshold: f64,
    pub alpha_ok: bool,
    pub c_ok: bool,
    pub d_ok: bool,
}

impl PreconditionCheck {
    pub fn holds(&self) -> bool {
        self.alpha_ok && self.c_ok && self.d_ok
    }

    /// Human-readable list of violated conditions.
    pub fn reasons(&self, inp: &ConvergenceInputs) -> Vec<String> {
        let mut out = Vec::new();
        if !self.alpha_ok {
            out.push(format!("alpha={} exceeds {}", inp.alpha, self.alpha_bound));
        }
        if !self.c_ok {
            out.push(format!("c={} below {}", inp.c, self.c_threshold));
        }
        if !self.d_ok {
            out.push(format!("d={} below {}", inp.d, self.d_threshold));
        }
        out
    }
}

fn rounds_threshold(numerator_log: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        0.0
    } else {
        numerator_log / (1.0 / sigma).ln()
    }
}

pub fn error_system_preconditions(inp: &ConvergenceInputs) -> PreconditionCheck {
    let net = &inp.network;
    let n = inp.n();
    let alpha_bound = f64::min(
        1.0 / (consts::STEP_SQRT_H * inp.ell * (net.h_r * net.h_c).sqrt()),
        inp.mu / (consts::STEP_KAPPA * n * inp.ell * inp.ell * net.pi_dot),
    );
    let log4n = (consts::ROUNDS_LOG_N * n).ln();
    let c_threshold = rounds_threshold(log4n, net.sigma_a);
    let d_threshold = rounds_threshold(log4n, net.sigma_b);
    PreconditionCheck {
        alpha_bound,
        c_threshold,
        d_threshold,
        alpha_ok: inp.alpha <= alpha_bound,
        c_ok: f64::from(inp.c) >= c_threshold,
        d_ok: f64::from(inp.d) >= d_threshold,
    }
}

/// The error-system matrix `G_alpha`.
pub fn build_g(inp: &ConvergenceInputs) -> Matrix4<f64> {
    let g = g_constants(inp);
    let net = &inp.network;
    let n = inp.n();
    let a = inp.alpha;
    let sa = inp.sigma_a_2c();
    let sb = inp.sigma_b_2d();
    let sb_ratio = sb / (1.0 - sb);
    let (m, big_m) = (inp.m as f64, inp.big_m as f64);
    Matrix4::new(
        consts::DIAG_CONSENSUS,
        a * a * g[0] * sa,
        a * a * g[1] * sa,
        a * a * g[2] * sa,
        //
        a * g[3],
        1.0 - a * g[4],
        a * a * g[5],
        a * g[6],
        //
        consts::ROW3 / (m * net.pi_r_min),
        consts::ROW3 / m,
        1.0 - 1.0 / big_m,
        0.0,
        //
        consts::ROW4_AGREE * n * sb_ratio / (net.pi_r_min * net.pi_c_min),
        consts::ROW4_OPT * n * sb_ratio / net.pi_c_min,
        consts::ROW4_AUX * sb_ratio / net.pi_c_min,
        consts::DIAG_CONSENSUS,
    )
}

/// `G_alpha` together with its precondition report.
pub fn build_g_checked(inp: &ConvergenceInputs) -> (Matrix4<f64>, PreconditionCheck) {
    (build_g(inp), error_system_preconditions(inp))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadiusMethod {
    PowerIteration,
    Companion,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralRadius {
    pub rho: f64,
    pub method: RadiusMethod,
    /// `max_i (G delta)_i / delta_i` for the supplied `delta`.
    pub weighted_bound: Option<f64>,
}

/// `max_i (G delta)_i / delta_i`, an upper bound on `rho(G)` for positive `delta`.
pub fn weighted_max_bound(g: &Matrix4<f64>, delta: &Vector4<f64>) -> f64 {
    let gd = g * delta;
    (0..4).map(|i| gd[i] / delta[i]).fold(f64::NEG_INFINITY, f64::max)
}

/// Perron root by shifted power iteration on `G + I` with Collatz–Wielandt bounds.
fn power_radius(g: &Matrix4<f64>) -> Option<f64> {
    let shifted = g + Matrix4::identity();
    let mut v = Vector4::from_element(1.0);
    for _ in 0..POWER_MAX_ITERS {
        let u = shifted * v;
        let ratios = u.component_div(&v);
        let (lo, hi) = (ratios.min(), ratios.max());
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        if hi - lo <= POWER_TOL {
            return Some(0.5 * (lo + hi) - 1.0);
        }
        v = u / u.max();
    }
    None
}

/// Characteristic polynomial by Faddeev–LeVerrier, then eigenvalues of its companion matrix.
fn companion_radius(g: &Matrix4<f64>) -> f64 {
    let n = 4;
    let mut coeffs = vec![1.0];
    let mut mk = Matrix4::<f64>::zeros();
    let id = Matrix4::<f64>::identity();
    for k in 1..=n {
        mk = g * (mk + id * coeffs[k - 1]);
        coeffs.push(-mk.trace() / k as f64);
    }
    // x^4 + c1 x^3 + c2 x^2 + c3 x + c4
    if coeffs[1..].iter().all(|&c| c == 0.0) {
        return 0.0;
    }
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -coeffs[n - i];
    }
    comp.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Spectral radius of a nonnegative 4×4 matrix.
///
/// When `delta` is given, also returns the weighted max-norm bound and fails if the
/// computed radius exceeds it by more than [`RHO_TOL`].
pub fn spectral_radius(g: &Matrix4<f64>, delta: Option<&Vector4<f64>>) -> Result<SpectralRadius> {
    if g.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("spectral_radius needs a finite nonnegative matrix".into()));
    }
    let (rho, method) = match power_radius(g) {
        Some(r) => (r.max(0.0), RadiusMethod::PowerIteration),
        None => (companion_radius(g), RadiusMethod::Companion),
    };
    let weighted_bound = match delta {
        Some(d) => {
            if d.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InvalidArgument("delta must be positive".into()));
            }
            let bound = weighted_max_bound(g, d);
            if rho > bound + RHO_TOL {
                return Err(Error::NumericalFailure(format!(
                    "spectral radius {rho} exceeds weighted max-norm bound {bound}"
                )));
            }
            Some(bound)
        }
        None => None,
    };
    Ok(SpectralRadius {
        rho,
        method,
        weighted_bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepBound {
    pub alpha_bar: f64,
    /// `[1/(35 ell sqrt(h_r h_c)), m/(288 M n kappa ell pi_r.pi_c), 1/(9 mu M pi_r.pi_c)]`
    pub terms: [f64; 3],
    /// index into `terms` of the minimum
    pub binding: usize,
}

/// Largest certified step size; ignores the run fields of `inp`.
pub fn max_stepsize(inp: &ConvergenceInputs) -> StepBound {
    let net = &inp.network;
    let n = inp.n();
    let (m, big_m) = (inp.m as f64, inp.big_m as f64);
    let terms = [
        1.0 / (consts::STEP_SQRT_H * inp.ell * (net.h_r * net.h_c).sqrt()),
        m / (consts::STEP_KAPPA * big_m * n * inp.kappa * inp.ell * net.pi_dot),
        1.0 / (consts::STEP_M * inp.mu * big_m * net.pi_dot),
    ];
    let binding = (0..3)
        .min_by(|&a, &b| terms[a].total_cmp(&terms[b]))
        .expect("three terms");
    StepBound {
        alpha_bar: terms[binding],
        terms,
        binding,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommRounds {
    pub c_bar: f64,
    pub d_bar: f64,
    /// `max(1, ceil(c_bar))`
    pub c: u32,
    pub d: u32,
}

fn clamp_rounds(bar: f64) -> u32 {
    if bar.is_finite() && bar > 1.0 {
        bar.ceil() as u32
    } else {
        1
    }
}

/// Communication-round thresholds; `d_bar` first because `c_bar` depends on `sigma_B^{2d}`.
pub fn min_comm_rounds(inp: &ConvergenceInputs) -> CommRounds {
    let net = &inp.network;
    let n = inp.n();
    let (m, big_m) = (inp.m as f64, inp.big_m as f64);
    let d_bar = rounds_threshold(
        (consts::D_BAR * inp.kappa / net.pi_dot * (n * big_m * net.h_c / m).sqrt()).ln(),
        net.sigma_b,
    );
    let d = clamp_rounds(d_bar);
    let sb2d = net.sigma_b.powi(2 * d as i32);
    let c_bar = rounds_threshold(
        (consts::C_BAR * n * big_m * inp.kappa / (m * (1.0 - sb2d))
            * (net.h_r * net.h_c / net.pi_dot).sqrt())
        .ln(),
        net.sigma_a,
    );
    CommRounds {
        c_bar,
        d_bar,
        c: clamp_rounds(c_bar),
        d,
    }
}

/// One of the four sufficient inequalities: `lhs <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceCertificate {
    pub inputs: ConvergenceInputs,
    pub preconditions: PreconditionCheck,
    pub g_matrix: Matrix4<f64>,
    pub g: [f64; 7],
    pub rho: SpectralRadius,
    pub gamma: f64,
    pub delta: Vector4<f64>,
    pub tau: (f64, f64),
    pub step: StepBound,
    pub rounds: CommRounds,
    pub psi: f64,
    pub gamma_order: f64,
    /// The four scalar inequalities on `alpha`, `c`, `d` for the chosen `delta`.
    pub inequalities: [InequalityCheck; 4],
    /// `G delta <= gamma delta` elementwise.
    pub g_delta_ok: bool,
    /// `rho(G) <= gamma + tol`.
    pub rho_le_gamma: bool,
    /// `rho(G)` evaluated at `alpha = alpha_bar` with the same `c`, `d`.
    pub rho_at_alpha_bar: f64,
    /// `1 - min{1/(35 kappa psi), m/(288 kappa^2 M), 1/(9 M)}`
    pub rate_bound: f64,
    pub rate_bound_ok: bool,
}

impl ConvergenceCertificate {
    /// All four inequalities and `G delta <= gamma delta` hold.
    pub fn passed(&self) -> bool {
        self.inequalities.iter().all(InequalityCheck::holds) && self.g_delta_ok && self.rho_le_gamma
    }

    /// Labelled values in display order.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| kv.push((k.to_owned(), v));
        let inp = &self.inputs;
        put("n", inp.network.n.to_string());
        put("alpha", fmt(inp.alpha));
        put("c", inp.c.to_string());
        put("d", inp.d.to_string());
        put("kappa", fmt(inp.kappa));
        put("m", inp.m.to_string());
        put("M", inp.big_m.to_string());
        put("sigma_A", fmt(inp.network.sigma_a));
        put("sigma_B", fmt(inp.network.sigma_b));
        for (i, g) in self.g.iter().enumerate() {
            put(&format!("g{}", i + 1), fmt(*g));
        }
        for i in 0..4 {
            for j in 0..4 {
                put(&format!("G{}{}", i + 1, j + 1), fmt(self.g_matrix[(i, j)]));
            }
        }
        put("rho", fmt(self.rho.rho));
        put("rho_method", format!("{:?}", self.rho.method));
        put("gamma", fmt(self.gamma));
        for i in 0..4 {
            put(&format!("delta{}", i + 1), fmt(self.delta[i]));
        }
        put("tau1", fmt(self.tau.0));
        put("tau2", fmt(self.tau.1));
        put("alpha_bar", fmt(self.step.alpha_bar));
        put("alpha_bar_binding_term", (self.step.binding + 1).to_string());
        put("c_bar", fmt(self.rounds.c_bar));
        put("d_bar", fmt(self.rounds.d_bar));
        put("psi", fmt(self.psi));
        put("gamma_order", fmt(self.gamma_order));
        put("error_system_preconditions", verdict(self.preconditions.holds()));
        for (i, q) in self.inequalities.iter().enumerate() {
            put(&format!("inequality{}", i + 1), verdict(q.holds()));
            put(&format!("inequality{}_margin", i + 1), fmt(q.margin()));
        }
        put("g_delta_le_gamma_delta", verdict(self.g_delta_ok));
        put("rho_le_gamma", verdict(self.rho_le_gamma));
        put("rho_at_alpha_bar", fmt(self.rho_at_alpha_bar));
        put("rate_bound", fmt(self.rate_bound));
        put("rate_bound_holds", verdict(self.rate_bound_ok));
        put("certificate", verdict(self.passed()));
        kv
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn verdict(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_owned()
}

/// Builds `delta`, `gamma = 1 - alpha g_5 / 2`, and checks every inequality.
///
/// Returns [`Error::CertificateNotApplicable`] when `sigma_B^d` is too large for the
/// chosen `delta` to be defined (`tau_1 <= 0`).
pub fn delta_certificate(inp: &ConvergenceInputs) -> Result<ConvergenceCertificate> {
    let net = &inp.network;
    let n = inp.n();
    let (m, big_m) = (inp.m as f64, inp.big_m as f64);
    let k2 = inp.kappa * inp.kappa;
    let sb_d = net.sigma_b.powi(inp.d as i32);
    let gate = net.pi_dot / (consts::SIGMA_B_GATE * inp.kappa) * (m / (n * big_m * net.h_c)).sqrt();
    if !(sb_d < gate) {
        return Err(Error::CertificateNotApplicable(format!(
            "sigma_B^d = {sb_d:e} is not below {gate:e}; increase d"
        )));
    }
    let sb = inp.sigma_b_2d();
    let sa = inp.sigma_a_2c();
    let pd2 = net.pi_dot * net.pi_dot;
    let tau1 = 1.0 - consts::TAU * n * sb * k2 * big_m * net.h_c / (m * (1.0 - sb) * pd2);
    if !(tau1 > 0.0) {
        return Err(Error::CertificateNotApplicable(format!("tau_1 = {tau1} is not positive")));
    }
    let tau2 = 1.0 + consts::TAU * n * k2 * big_m * net.h_c / (pd2 * tau1 * m * (1.0 - sb));
    let delta = Vector4::new(
        1.0,
        consts::DELTA2 * tau2 * k2 / net.pi_r_min,
        consts::DELTA3 * tau2 * k2 * big_m / (m * net.pi_r_min),
        consts::TAU * n * k2 * big_m / (net.pi_r_min * net.pi_c_min * m * tau1 * (1.0 - sb)),
    );

    let g = g_constants(inp);
    let a = inp.alpha;
    let half_ag5 = a * g[4] / 2.0;
    let sb_ratio = sb / (1.0 - sb);
    let inequalities = [
        InequalityCheck {
            lhs: half_ag5
                + sa / delta[0] * (a * a * g[0] * delta[1] + a * a * g[1] * delta[2] + a * a * g[2] * delta[3]),
            rhs: 0.25,
        },
        InequalityCheck {
            lhs: a * g[5],
            rhs: g[4] / 2.0 * delta[1] / delta[2] - g[3] * delta[0] / delta[2] - g[6] * delta[3] / delta[2],
        },
        InequalityCheck {
            lhs: half_ag5,
            rhs: 1.0 / big_m
                - consts::ROW3 / (net.pi_r_min * m) * delta[0] / delta[2]
                - consts::ROW3 / m * delta[1] / delta[2],
        },
        InequalityCheck {
            lhs: half_ag5,
            rhs: 0.25
                - sb_ratio / delta[3]
                    * (consts::ROW4_AGREE * n / (net.pi_r_min * net.pi_c_min) * delta[0]
                        + consts::ROW4_OPT * n / net.pi_c_min * delta[1]
                        + consts::ROW4_AUX / net.pi_c_min * delta[2]),
        },
    ];

    let gamma = 1.0 - half_ag5;
    let g_matrix = build_g(inp);
    let gd = g_matrix * delta;
    let g_delta_ok = (0..4).all(|i| gd[i] <= gamma * delta[i]);
    let rho = spectral_radius(&g_matrix, Some(&delta))?;

    let step = max_stepsize(inp);
    let at_bar = inp.with_run(step.alpha_bar, inp.c, inp.d);
    let rho_at_alpha_bar = spectral_radius(&build_g(&at_bar), None)?.rho;
    let psi = net.psi();
    let rate_bound = 1.0
        - [
            1.0 / (consts::STEP_SQRT_H * inp.kappa * psi),
            m / (consts::STEP_KAPPA * k2 * big_m),
            1.0 / (consts::STEP_M * big_m),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);

    Ok(ConvergenceCertificate {
        inputs: *inp,
        preconditions: error_system_preconditions(inp),
        g_matrix,
        g,
        rho_le_gamma: rho.rho <= gamma + RHO_TOL,
        rho,
        gamma,
        delta,
        tau: (tau1, tau2),
        step,
        rounds: min_comm_rounds(inp),
        psi,
        gamma_order: gradient_complexity(inp, 0.5).order,
        inequalities,
        g_delta_ok,
        rho_at_alpha_bar,
        rate_bound,
        rate_bound_ok: rho_at_alpha_bar <= rate_bound + RHO_TOL,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complexity {
    /// `max{kappa psi, kappa^2 M / m, M}`
    pub order: f64,
    /// `order * ln(1/epsilon)`
    pub estimate: f64,
    /// `n M`, the centralized SAGA order
    pub centralized_order: f64,
    /// `centralized_order / order`; equals `n` in the large-data regime
    pub speedup: f64,
    /// `order == M`: per-node cost matches one local pass
    pub linear_speedup: bool,
}

pub fn gradient_complexity(inp: &ConvergenceInputs, epsilon: f64) -> Complexity {
    let (m, big_m) = (inp.m as f64, inp.big_m as f64);
    let psi = inp.network.psi();
    let order = (inp.kappa * psi)
        .max(inp.kappa * inp.kappa * big_m / m)
        .max(big_m);
    let centralized_order = inp.n() * big_m;
    Complexity {
        order,
        estimate: order * (1.0 / epsilon).ln(),
        centralized_order,
        speedup: centralized_order / order,
        linear_speedup: order == big_m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, sigma: f64) -> NetworkConstants {
        let u = DVector::from_element(n, 1.0 / n as f64);
        NetworkConstants::from_perron(&u, &u, sigma, sigma).unwrap()
    }

    fn inputs(net: NetworkConstants, ell: f64, mu: f64, m: usize, big_m: usize) -> ConvergenceInputs {
        ConvergenceInputs::new(net, ProblemConstants::new(ell, mu).unwrap(), m, big_m, 1e-3, 1, 1)
            .unwrap()
    }

    #[test]
    fn g_constant_examples() {
        let inp = inputs(uniform(4, 0.5), 1.0, 1.0, 10, 10);
        let g = g_constants(&inp);
        assert!((g[4] - 0.25).abs() < 1e-15);
        assert!((g[5] - 0.75).abs() < 1e-15);
        assert!((g[3] - 32.0).abs() < 1e-12);
        let inp = inputs(uniform(7, 0.5), 2.0, 0.3, 10, 10);
        assert!((g_constants(&inp)[4] - 0.3 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn g_matrix_entries() {
        let net = uniform(4, 0.1f64.sqrt());
        let inp = inputs(net, 1.0, 1.0, 10, 10);
        let g = build_g(&inp);
        assert!((g[(2, 0)] - 0.8).abs() < 1e-15);
        // sigma_B^{2d} = 0.1 here; use d such that it is 0.01
        let inp2 = inp.with_run(inp.alpha, 1, 2);
        let g2 = build_g(&inp2);
        assert!((g2[(3, 2)] - 26.0 * 0.01 / (0.99 * 0.25)).abs() < 1e-12);
        assert_eq!(g[(2, 3)], 0.0);
    }

    #[test]
    fn g_matrix_small_limits() {
        let inp = inputs(uniform(4, 1e-30), 1.0, 1.0, 1_000_000, 1_000_000).with_run(1e-300, 1, 1);
        let g = build_g(&inp);
        let diag = [0.75, 1.0, 1.0 - 1e-6, 0.75];
        for i in 0..4 {
            assert!((g[(i, i)] - diag[i]).abs() < 1e-15);
        }
        assert!(g[(0, 1)] < 1e-50 && g[(3, 0)] < 1e-50);
    }

    #[test]
    fn precondition_examples() {
        let inp = inputs(uniform(4, 0.5), 1.0, 1.0, 1, 1);
        let chk = error_system_preconditions(&inp);
        assert!((chk.alpha_bound - 1.0 / 288.0).abs() < 1e-15);
        assert!((chk.c_threshold - 4.0).abs() < 1e-12);
        assert!(!chk.c_ok);
        let inp = inp.with_run(1.0 / 300.0, 4, 4);
        assert!(error_system_preconditions(&inp).holds());

        let tiny = inputs(uniform(4, 0.0), 1.0, 1.0, 1, 1);
        let chk = error_system_preconditions(&tiny);
        assert_eq!(chk.c_threshold, 0.0);
        assert!(chk.c_ok && chk.d_ok);
    }

    #[test]
    fn radius_examples() {
        let r = spectral_radius(&Matrix4::identity(), None).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-12);

        let upper = Matrix4::new(
            0.0, 1.0, 2.0, 3.0, //
            0.0, 0.0, 4.0, 5.0, //
            0.0, 0.0, 0.0, 6.0, //
            0.0, 0.0, 0.0, 0.0,
        );
        let r = spectral_radius(&upper, None).unwrap();
        assert_eq!(r.method, RadiusMethod::Companion);
        assert!(r.rho < 1e-9, "{r:?}");

        let d = Matrix4::from_diagonal(&Vector4::new(0.75, 0.9, 0.9, 0.75));
        let r = spectral_radius(&d, Some(&Vector4::from_element(1.0))).unwrap();
        assert!((r.rho - 0.9).abs() < 1e-12);
        assert!((r.weighted_bound.unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn radius_matches_dense_eigen_on_positive_matrix() {
        let g = Matrix4::new(
            0.5, 0.1, 0.2, 0.0, //
            0.3, 0.4, 0.0, 0.1, //
            0.0, 0.2, 0.6, 0.2, //
            0.1, 0.0, 0.3, 0.2,
        );
        let r = spectral_radius(&g, None).unwrap();
        let dense = DMatrix::from_iterator(4, 4, g.iter().copied());
        let reference = dense
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!((r.rho - reference).abs() < 1e-10);
        assert_eq!(r.method, RadiusMethod::PowerIteration);
    }

    #[test]
    fn step_examples() {
        let inp = inputs(uniform(16, 0.5), 1.0, 0.1, 100, 100);
        let s = max_stepsize(&inp);
        assert!((s.terms[0] - 1.0 / 35.0).abs() < 1e-15);
        assert!((s.terms[1] - 1.0 / 2880.0).abs() < 1e-15);
        assert!((s.terms[2] - 16.0 / 90.0).abs() < 1e-12);
        assert_eq!(s.binding, 1);

        let one = inputs(uniform(1, 0.0), 1.0, 1.0, 1, 1);
        assert!((max_stepsize(&one).alpha_bar - 1.0 / 288.0).abs() < 1e-15);

        // ell -> 2 ell with mu/ell fixed halves the first two terms
        let scaled = inputs(uniform(16, 0.5), 2.0, 0.2, 100, 100);
        let t = max_stepsize(&scaled).terms;
        assert!((t[0] - s.terms[0] / 2.0).abs() < 1e-15);
        assert!((t[1] - s.terms[1] / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rounds_examples() {
        let r = min_comm_rounds(&inputs(uniform(8, 0.0), 1.0, 0.1, 5, 5));
        assert_eq!((r.c, r.d), (1, 1));
        assert_eq!((r.c_bar, r.d_bar), (0.0, 0.0));

        let inp = inputs(uniform(4, 0.5), 1.0, 1.0, 1, 1);
        let r = min_comm_rounds(&inp);
        // log(1265 * 4 * sqrt(4)) / log 2
        let expect = (1265.0f64 * 4.0 * 2.0).ln() / 2f64.ln();
        assert!((r.d_bar - expect).abs() < 1e-12);
        assert!(r.d_bar > 0.0);

        let sq = inputs(uniform(4, 0.25), 1.0, 1.0, 1, 1);
        let mut same_num = sq;
        same_num.network.sigma_b = 0.5;
        let r_half = min_comm_rounds(&same_num);
        assert!((r_half.c_bar - 2.0 * min_comm_rounds(&sq).c_bar).abs() < 1e-9 || r_half.d != min_comm_rounds(&sq).d);
    }

    #[test]
    fn certificate_not_applicable_when_sigma_b_large() {
        let inp = inputs(uniform(16, 0.9), 1.0, 0.1, 100, 100);
        assert!(matches!(
            delta_certificate(&inp),
            Err(Error::CertificateNotApplicable(_))
        ));
    }

    #[test]
    fn complexity_examples() {
        let mut inp = inputs(uniform(4, 0.5), 1.0, 1.0, 50, 50);
        let c = gradient_complexity(&inp, 1e-6);
        assert_eq!(c.order, 50.0);
        assert!(c.linear_speedup);
        assert_eq!(c.speedup, 4.0);
        assert!((c.estimate - 50.0 * 1e6f64.ln()).abs() < 1e-9);

        let u = DVector::from_element(2, 0.5);
        let skew = DVector::from_vec(vec![0.8, 0.2]);
        inp.network = NetworkConstants::from_perron(&skew, &u, 0.5, 0.5).unwrap();
        // psi = sqrt(4 * 1) / (2 * 0.5) = 2
        assert!((inp.network.psi() - 2.0).abs() < 1e-12);
        let inp = ConvergenceInputs {
            kappa: 10.0,
            m: 10,
            big_m: 100,
            ..inp
        };
        assert_eq!(gradient_complexity(&inp, 0.1).order, 1000.0);
    }
}
