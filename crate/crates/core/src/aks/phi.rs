//! The map from reduced points to Fehér points.
//!
//! Local sections of the orbits: `s+(eta+) = exp(X)`, `X` in `k+`, with
//! `eta+ = mu o Ad_{exp(-X)}`, and `s-(eta-) = exp(Y)`, `Y` in `k-`, with
//! `eta- = nu_R o Ad_{exp(Y)}`. Both are found by Newton iteration from a
//! warm start; `|X|`, `|Y|` above [`SECTION_RADIUS`] are refused.
//!
//! With `U = s+^{-1} s+'` and `V = s-' s-^{-1}` along the orbit velocities,
//!
//! `g_F = s+^{-1} g' s-^{-1}`, `alpha_F = Ad_{s+^{-1}} alpha~ + U`,
//! `beta_F = V - Ad_{s-} beta~`, `zeta_F = Ad_{s+^{-1}} zeta' - U - Ad_{g_F} V`,
//!
//! and `R(point) = L_F(Phi(point)) + <mu, U> + <nu, V>`.

use super::feher::{AksRun, FeherSystem};
use super::reduced::{reduced_routhian, AksReduced, ReducedPoint};
use super::{dual_eval, feher_lagrangian, Algebras, AksParams, FeherState};
use crate::error::{Error, Result};
use crate::geomcalc::fd_jacobian;
use crate::integrate::TimeSpan;
use crate::liegroup::{adjoint, adjoint_inv, mat_exp, pairing, AlgebraBasis};
use crate::linalg::Matrix;

/// Largest section coordinate norm accepted.
pub const SECTION_RADIUS: f64 = 2.0;
const NEWTON_TOL: f64 = 1e-14;
const NEWTON_ITERATIONS: usize = 60;
const CONTINUATION_STEPS: usize = 10;
/// Relative step of the central differences giving `U` and `V`.
const SECTION_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Sections {
    alg: Algebras,
    mu: Matrix<f64>,
    nu_r: Matrix<f64>,
}

/// Image of a reduced point.
#[derive(Debug, Clone)]
pub struct PhiImage {
    pub state: FeherState,
    pub s_plus: Matrix<f64>,
    pub s_minus: Matrix<f64>,
    pub u: Matrix<f64>,
    pub v: Matrix<f64>,
    /// Section coordinates, for warm starts.
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
}

impl Sections {
    pub fn new(params: &AksParams) -> Self {
        Self { alg: params.algebras(), mu: params.mu.clone(), nu_r: -&params.nu }
    }

    fn orbit_plus(&self, x: &[f64]) -> Vec<f64> {
        match mat_exp(&self.alg.plus.combine(x)).and_then(|s| adjoint(&s, &self.mu)) {
            Ok(m) => self.alg.plus.dual_coords(&m),
            Err(_) => vec![f64::NAN; x.len()],
        }
    }

    fn orbit_minus(&self, y: &[f64]) -> Vec<f64> {
        match mat_exp(&self.alg.minus.combine(y)).and_then(|s| adjoint_inv(&s, &self.nu_r)) {
            Ok(m) => self.alg.minus.dual_coords(&m),
            Err(_) => vec![f64::NAN; y.len()],
        }
    }

    /// Coordinates `X` of `s+(eta)`.
    pub fn plus(&self, eta: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let base = self.alg.plus.dual_coords(&self.mu);
        solve_section(&|x| self.orbit_plus(x), &self.alg.plus, &base, eta, guess, "s+")
    }

    /// Coordinates `Y` of `s-(eta)`.
    pub fn minus(&self, eta: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let base = self.alg.minus.dual_coords(&self.nu_r);
        solve_section(&|y| self.orbit_minus(y), &self.alg.minus, &base, eta, guess, "s-")
    }
}

fn newton(f: &dyn Fn(&[f64]) -> Vec<f64>, eta: &[f64], start: &[f64]) -> Option<Vec<f64>> {
    let scale = 1.0 + eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = start.to_vec();
    let mut best = f64::INFINITY;
    for _ in 0..NEWTON_ITERATIONS {
        let r: Vec<f64> = f(&x).iter().zip(eta).map(|(a, b)| a - b).collect();
        let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !norm.is_finite() {
            return None;
        }
        if norm <= NEWTON_TOL * scale {
            return Some(x);
        }
        if norm >= best && norm <= 1e3 * NEWTON_TOL * scale {
            return Some(x);
        }
        best = best.min(norm);
        let j = fd_jacobian(|y: &[f64]| f(y), &x).ok()?;
        let step = j.solve_min_norm(&r);
        x.iter_mut().zip(step).for_each(|(a, s)| *a -= s);
    }
    None
}

fn solve_section(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    basis: &AlgebraBasis<f64>,
    base: &[f64],
    eta: &[f64],
    guess: &[f64],
    name: &str,
) -> Result<Vec<f64>> {
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let accept = |x: Vec<f64>| -> Result<Vec<f64>> {
        if norm(&x) > SECTION_RADIUS {
            Err(Error::SectionDomain(format!("{name}: |X| = {} exceeds {SECTION_RADIUS}", norm(&x))))
        } else {
            Ok(x)
        }
    };
    if let Some(x) = newton(f, eta, guess) {
        return accept(x);
    }
    // Continuation from the base point of the orbit.
    let mut x = vec![0.0; basis.dim()];
    for k in 1..=CONTINUATION_STEPS {
        let s = k as f64 / CONTINUATION_STEPS as f64;
        let target: Vec<f64> = base.iter().zip(eta).map(|(b, e)| b + s * (e - b)).collect();
        x = newton(f, &target, &x)
            .ok_or_else(|| Error::SectionDomain(format!("{name}: no section point found along continuation")))?;
    }
    accept(x)
}

/// Applies `Phi` to a reduced point whose orbit velocities are
/// `x -> eta([w, x])`. `guess` warm-starts both sections.
pub fn phi_map(
    sections: &Sections,
    p: &ReducedPoint,
    w_plus: &Matrix<f64>,
    w_minus: &Matrix<f64>,
    guess: Option<(&[f64], &[f64])>,
) -> Result<PhiImage> {
    let alg = &sections.alg;
    let zp = vec![0.0; alg.plus.dim()];
    let zm = vec![0.0; alg.minus.dim()];
    let (gp, gm) = guess.unwrap_or((&zp, &zm));
    let x_plus = sections.plus(&p.eta_plus, gp)?;
    let x_minus = sections.minus(&p.eta_minus, gm)?;
    let s_plus = mat_exp(&alg.plus.combine(&x_plus))?;
    let s_minus = mat_exp(&alg.minus.combine(&x_minus))?;

    let u = section_derivative(&p.eta_plus, w_plus, &x_plus, &|e, g| sections.plus(e, g), &alg.plus)?;
    let u = &s_plus.inverse()? * &u;
    let v = section_derivative(&p.eta_minus, w_minus, &x_minus, &|e, g| sections.minus(e, g), &alg.minus)?;
    let v = &v * &s_minus.inverse()?;

    let g = &(&s_plus.inverse()? * &p.g) * &s_minus.inverse()?;
    let alpha = &adjoint_inv(&s_plus, &p.alpha)? + &u;
    let beta = &v - &adjoint(&s_minus, &p.beta)?;
    let zeta = &(&adjoint_inv(&s_plus, &p.zeta)? - &u) - &adjoint(&g, &v)?;
    Ok(PhiImage { state: FeherState { g, zeta, alpha, beta }, s_plus, s_minus, u, v, x_plus, x_minus })
}

/// `d/ds s(eta o Ad_{exp(s w)})` at `s = 0` by central differences along
/// the orbit.
fn section_derivative(
    eta: &[f64],
    w: &Matrix<f64>,
    x0: &[f64],
    section: &dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
    basis: &AlgebraBasis<f64>,
) -> Result<Matrix<f64>> {
    let wn = w.max_abs();
    if wn == 0.0 {
        return Ok(Matrix::zeros(basis.d(), basis.d()));
    }
    let h = SECTION_FD_STEP / wn;
    let at = |s: f64| -> Result<Matrix<f64>> {
        let t = mat_exp(&w.scale(s))?;
        let e: Vec<f64> =
            basis.elements().iter().map(|x| Ok(dual_eval(basis, eta, &adjoint(&t, x)?))).collect::<Result<_>>()?;
        mat_exp(&basis.combine(&section(&e, x0)?))
    };
    Ok((&at(h)? - &at(-h)?).scale(1.0 / (2.0 * h)))
}

/// `R(point) - L_F(Phi(point)) - <mu, U> - <nu, V>`.
pub fn pullback_defect(params: &AksParams, alg: &Algebras, p: &ReducedPoint, image: &PhiImage) -> Result<f64> {
    let r = reduced_routhian(alg, p)?;
    let l = feher_lagrangian(params, &image.state)?;
    Ok(r - l - pairing(&params.mu, &image.u) - pairing(&params.nu, &image.v))
}

/// Result of mapping a reduced trajectory into the Fehér system.
#[derive(Debug, Clone)]
pub struct PhiEquivalence {
    /// Largest entrywise gap in `(g, zeta)` between the mapped reduced
    /// trajectory and the independently integrated Fehér trajectory.
    pub max_deviation: f64,
    pub max_pullback_defect: f64,
    pub mapped: AksRun,
    pub feher: AksRun,
}

/// Integrates the reduced system from the consistent point over `g0` at
/// the base orbit points with velocities `alpha0`, `beta0`, maps every
/// sample through `Phi`, and compares with a Fehér run started at the
/// image of the initial point. The two integrations run concurrently.
pub fn equivalence_run(params: &AksParams, span: &TimeSpan<f64>) -> Result<PhiEquivalence> {
    let red = AksReduced::new(params.clone());
    let alg = red.algebras().clone();
    let sections = Sections::new(params);
    let p0 = red.consistent_point(&params.g0, &params.mu_dual(&alg), &red.nu_r_dual(), &params.alpha0, &params.beta0)?;
    let (wp, wm) = red.orbit_velocities(&p0)?;
    let image0 = phi_map(&sections, &p0, &wp, &wm, None)?;
    let feher = FeherSystem::new(params.clone());

    let (reduced, fe) = std::thread::scope(|scope| {
        let handle = scope.spawn(|| feher.simulate(&image0.state, span));
        let reduced = red.simulate(&p0, span);
        (reduced, handle.join().expect("Fehér integration thread panicked"))
    });
    let reduced = reduced.map_err(|ab| ab.error)?;
    let fe = fe.map_err(|ab| ab.error)?;

    let mut mapped = AksRun::default();
    let mut defect = 0.0f64;
    let mut guess = (image0.x_plus.clone(), image0.x_minus.clone());
    for smp in &reduced {
        let img = phi_map(&sections, &smp.point, &smp.w_plus, &smp.w_minus, Some((&guess.0, &guess.1)))?;
        defect = defect.max(pullback_defect(params, &alg, &smp.point, &img)?.abs());
        guess = (img.x_plus.clone(), img.x_minus.clone());
        let lambda = img.state.lax()?;
        mapped.samples.push(super::feher::AksSample { t: smp.t, state: img.state, lambda, chart: None });
    }
    let max_deviation = mapped.max_gap(&fe)?;
    Ok(PhiEquivalence { max_deviation, max_pullback_defect: defect, mapped, feher: fe })
}
