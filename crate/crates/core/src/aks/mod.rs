//! Adler-Kostant-Symes systems on `K = SL(d)`.
//!
//! Four views of the same dynamics live here: the intrinsically constrained
//! geodesic problem on `K x K+ x K-` ([`unreduced`]), its Routh reduction by
//! `K+ x K-` with the connection `(-alpha, beta)` ([`reduced`]), the Fehér
//! Lagrangian ([`feher`]), and the map between the last two ([`phi`]).
//!
//! Duals are stored two ways. Parameters `mu`, `nu` are matrices paired by
//! trace; points on coadjoint orbits are vectors of their values on the
//! subalgebra basis, `eta_a = eta(E_a)`.
//!
//! `params.nu` is the Fehér `nu`. The level of the second momentum component
//! of the unreduced system is its negative.

pub mod feher;
pub mod phi;
pub mod reduced;
pub mod unreduced;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrate::{rk4_step, Aborted, TimeSpan};
use crate::liegroup::{adjoint, bracket, dexp, factorize, mat_exp, pairing, AlgebraBasis, Part};
use crate::linalg::Matrix;
use crate::scalar::max_abs;

/// Gram systems at or above this condition number are refused.
pub const GRAM_CONDITION_LIMIT: f64 = 1e10;
/// Chart coordinates are recentred once their norm reaches this value.
pub const RECENTER_THRESHOLD: f64 = 0.5;

/// The three bases every AKS computation needs.
#[derive(Debug, Clone)]
pub struct Algebras {
    pub d: usize,
    pub full: AlgebraBasis<f64>,
    pub plus: AlgebraBasis<f64>,
    pub minus: AlgebraBasis<f64>,
}

impl Algebras {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            full: AlgebraBasis::new(d, Part::Full),
            plus: AlgebraBasis::new(d, Part::Plus),
            minus: AlgebraBasis::new(d, Part::Minus),
        }
    }
}

/// Value `eta(x)` of a dual vector given by its values on `basis`.
pub fn dual_eval(basis: &AlgebraBasis<f64>, eta: &[f64], x: &Matrix<f64>) -> f64 {
    basis.coords(x).iter().zip(eta).map(|(c, e)| c * e).sum()
}

/// The traceless matrix `M` in the span of the transposed basis with
/// `<M, E_a> = eta_a`.
pub fn representative(basis: &AlgebraBasis<f64>, eta: &[f64]) -> Result<Matrix<f64>> {
    let n = basis.dim();
    let gram = Matrix::from_fn(n, n, |a, b| pairing(&basis.element(b).transpose(), basis.element(a)));
    let c = gram.solve(eta)?;
    let mut m = Matrix::zeros(basis.d(), basis.d());
    for (cb, e) in c.iter().zip(basis.elements()) {
        m = &m + &e.transpose().scale(*cb);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AksParams {
    pub d: usize,
    /// Element of the `K+` dual, `<mu, x> = tr(mu x)`.
    pub mu: Matrix<f64>,
    /// Element of the `K-` dual (Fehér sign).
    pub nu: Matrix<f64>,
    pub g0: Matrix<f64>,
    pub zeta0: Matrix<f64>,
    pub alpha0: Matrix<f64>,
    pub beta0: Matrix<f64>,
}

impl AksParams {
    pub fn new(
        mu: Matrix<f64>,
        nu: Matrix<f64>,
        g0: Matrix<f64>,
        zeta0: Matrix<f64>,
        alpha0: Matrix<f64>,
        beta0: Matrix<f64>,
    ) -> Result<Self> {
        let d = g0.rows();
        for (name, m) in [("mu", &mu), ("nu", &nu), ("g0", &g0), ("zeta0", &zeta0), ("alpha0", &alpha0), ("beta0", &beta0)]
        {
            if m.rows() != d || m.cols() != d {
                return Err(Error::Dimension(format!("{name} must be {d}x{d}")));
            }
            if !m.is_finite() {
                return Err(Error::non_finite(name));
            }
        }
        if d < 2 {
            return Err(Error::Dimension("AKS needs d >= 2".into()));
        }
        if (g0.determinant() - 1.0).abs() > 1e-10 {
            return Err(Error::Precondition(format!("g0 is not in SL({d}): det = {}", g0.determinant())));
        }
        factorize(&g0)?;
        for (name, m) in [("zeta0", &zeta0), ("alpha0", &alpha0)] {
            if m.trace().abs() > 1e-12 {
                return Err(Error::Precondition(format!("{name} is not traceless")));
            }
        }
        if !Part::Plus.admits(&alpha0) {
            return Err(Error::Precondition("alpha0 must be lower triangular".into()));
        }
        if !Part::Minus.admits(&beta0) {
            return Err(Error::Precondition("beta0 must be strictly upper triangular".into()));
        }
        Ok(Self { d, mu, nu, g0, zeta0, alpha0, beta0 })
    }

    /// `SL(2)` instance with a diagonal `mu`, so every `alpha` is admissible
    /// and the Lax matrix rotates. The spectrum of `Lambda` is `+-0.1`.
    pub fn sl2() -> Self {
        let m = |r: [[f64; 2]; 2]| Matrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>());
        Self::new(
            m([[0.1, 0.0], [0.0, -0.1]]),
            m([[0.0, 0.0], [0.3, 0.0]]),
            m([[1.0, 0.2], [0.1, 1.02]]),
            m([[0.3, 0.5], [-0.4, -0.3]]),
            m([[0.1, 0.0], [0.2, -0.1]]),
            m([[0.0, 0.15], [0.0, 0.0]]),
        )
        .expect("valid built-in parameters")
    }

    /// `SL(3)` instance, Toda-like: `nu` on the first subdiagonal. `mu`
    /// pairs with the root `E31`, which cuts its `K+` stabilizer down to
    /// `diag(a, -2a, a)`.
    pub fn sl3() -> Self {
        let m = |r: [[f64; 3]; 3]| Matrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>());
        let g0 = mat_exp(&m([[0.05, 0.1, -0.05], [0.08, -0.02, 0.1], [-0.06, 0.04, -0.03]])).expect("finite");
        Self::new(
            m([[0.04, 0.0, 0.15], [0.0, -0.08, 0.0], [0.0, 0.0, 0.04]]),
            m([[0.0, 0.0, 0.0], [0.2, 0.0, 0.0], [0.0, -0.1, 0.0]]),
            g0,
            m([[0.2, 0.3, 0.0], [-0.1, 0.1, 0.2], [0.05, -0.2, -0.3]]),
            m([[0.05, 0.0, 0.0], [0.0, -0.1, 0.0], [0.0, 0.0, 0.05]]),
            m([[0.0, 0.1, -0.05], [0.0, 0.0, 0.07], [0.0, 0.0, 0.0]]),
        )
        .expect("valid built-in parameters")
    }

    /// `SL(2)` instance whose `mu` pairs with the root `E21`, so its `K+`
    /// stabilizer is trivial and the `K+` orbit is open.
    pub fn sl2_generic() -> Self {
        let base = Self::sl2();
        let mu = Matrix::from_rows(&[vec![0.5, 0.4], vec![0.0, -0.5]]);
        Self::new(mu, base.nu, base.g0, base.zeta0, base.alpha0, base.beta0).expect("valid built-in parameters")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "aks_sl2" => Some(Self::sl2()),
            "aks_sl3" => Some(Self::sl3()),
            _ => None,
        }
    }

    pub fn algebras(&self) -> Algebras {
        Algebras::new(self.d)
    }

    /// Values of `mu` on the `K+` basis.
    pub fn mu_dual(&self, alg: &Algebras) -> Vec<f64> {
        alg.plus.dual_coords(&self.mu)
    }

    /// Values of the Fehér `nu` on the `K-` basis.
    pub fn nu_dual(&self, alg: &Algebras) -> Vec<f64> {
        alg.minus.dual_coords(&self.nu)
    }
}

/// Lax matrix `Lambda = zeta + alpha + Ad_g beta`.
pub fn lax(g: &Matrix<f64>, zeta: &Matrix<f64>, alpha: &Matrix<f64>, beta: &Matrix<f64>) -> Result<Matrix<f64>> {
    Ok(&(zeta + alpha) + &adjoint(g, beta)?)
}

/// A point of the Fehér configuration-velocity space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeherState {
    pub g: Matrix<f64>,
    /// Right-trivialized velocity `g' g^{-1}`.
    pub zeta: Matrix<f64>,
    pub alpha: Matrix<f64>,
    pub beta: Matrix<f64>,
}

impl FeherState {
    pub fn lax(&self) -> Result<Matrix<f64>> {
        lax(&self.g, &self.zeta, &self.alpha, &self.beta)
    }
}

/// `L_F = <Lambda, Lambda>/2 - <alpha, mu> - <beta, nu>`.
pub fn feher_lagrangian(params: &AksParams, s: &FeherState) -> Result<f64> {
    let l = compact_form(params, s)?;
    if cfg!(debug_assertions) {
        let e = expanded_form(params, s)?;
        debug_assert!((l - e).abs() <= 1e-10 * (1.0 + l.abs()), "Fehér forms disagree: {l} vs {e}");
    }
    Ok(l)
}

fn compact_form(params: &AksParams, s: &FeherState) -> Result<f64> {
    let lam = s.lax()?;
    Ok(0.5 * pairing(&lam, &lam) - pairing(&s.alpha, &params.mu) - pairing(&s.beta, &params.nu))
}

/// The six-term form: `<zeta,zeta>/2 + <alpha,alpha>/2 + <beta,beta>/2
/// + <alpha, zeta - mu> + <beta, g^{-1} g' - nu> + <alpha, Ad_g beta>`.
pub fn feher_lagrangian_expanded(params: &AksParams, s: &FeherState) -> Result<f64> {
    expanded_form(params, s)
}

fn expanded_form(params: &AksParams, s: &FeherState) -> Result<f64> {
    let (z, a, b) = (&s.zeta, &s.alpha, &s.beta);
    let gi = s.g.inverse()?;
    let body = &(&gi * z) * &s.g;
    let ad_b = &(&s.g * b) * &gi;
    Ok(0.5 * pairing(z, z)
        + 0.5 * pairing(a, a)
        + 0.5 * pairing(b, b)
        + pairing(a, &(z - &params.mu))
        + pairing(b, &(&body - &params.nu))
        + pairing(a, &ad_b))
}

/// Solves the stationarity conditions of `L_F` in `alpha` and `beta`:
/// `<Lambda, x> = plus_dual(x)` for `x` in `k+` and
/// `<Ad_{g^{-1}} Lambda, y> = minus_dual(y)` for `y` in `k-`,
/// with `Lambda = zeta + alpha + Ad_g beta`.
pub fn solve_multipliers(
    alg: &Algebras,
    g: &Matrix<f64>,
    zeta: &Matrix<f64>,
    plus_dual: &[f64],
    minus_dual: &[f64],
) -> Result<(Matrix<f64>, Matrix<f64>)> {
    let gi = g.inverse()?;
    let mut family: Vec<Matrix<f64>> = alg.plus.elements().to_vec();
    family.extend(alg.minus.elements().iter().map(|y| &(g * y) * &gi));
    let n = family.len();
    let gram = Matrix::from_fn(n, n, |a, b| pairing(&family[a], &family[b]));
    let cond = gram.condition_number();
    if !(cond < GRAM_CONDITION_LIMIT) {
        return Err(Error::Singular(format!(
            "Fehér stationarity: Gram condition number {cond:e} is not below {GRAM_CONDITION_LIMIT:e}"
        )));
    }
    let np = alg.plus.dim();
    let rhs: Vec<f64> = (0..n)
        .map(|a| if a < np { plus_dual[a] } else { minus_dual[a - np] } - pairing(zeta, &family[a]))
        .collect();
    let c = gram.solve(&rhs)?;
    Ok((alg.plus.combine(&c[..np]), alg.minus.combine(&c[np..])))
}

/// The Lax matrix fixed by the stationarity conditions at `g`.
pub fn lax_from_group(alg: &Algebras, g: &Matrix<f64>, plus_dual: &[f64], minus_dual: &[f64]) -> Result<Matrix<f64>> {
    let (a, b) = solve_multipliers(alg, g, &Matrix::zeros(alg.d, alg.d), plus_dual, minus_dual)?;
    lax(g, &Matrix::zeros(alg.d, alg.d), &a, &b)
}

/// Orthogonal projection (in basis coordinates) of `x` onto the stabilizer
/// `{x : eta([x, y]) = 0 for all y}` of a dual vector.
pub fn project_stabilizer(basis: &AlgebraBasis<f64>, eta: &[f64], x: &Matrix<f64>) -> Matrix<f64> {
    let n = basis.dim();
    let a = Matrix::from_fn(n, n, |r, c| dual_eval(basis, eta, &bracket(basis.element(c), basis.element(r))));
    let cx = basis.coords(x);
    if a.max_abs() == 0.0 {
        return basis.combine(&cx);
    }
    let row = a.solve_min_norm(&a.mul_vec(&cx));
    let p: Vec<f64> = cx.iter().zip(row).map(|(c, r)| c - r).collect();
    basis.combine(&p)
}

/// `tr(Lambda^k)` for `k = 2..=kmax`.
pub fn trace_powers(lam: &Matrix<f64>, kmax: usize) -> Vec<f64> {
    let mut p = lam.clone();
    let mut out = Vec::new();
    for _ in 2..=kmax {
        p = &p * lam;
        out.push(p.trace());
    }
    out
}

/// One sample of a chart integration.
#[derive(Debug, Clone)]
pub struct ChartSample {
    pub t: f64,
    /// Index of the chart the sample was computed in.
    pub chart: usize,
    pub center: Arc<Matrix<f64>>,
    pub x: Vec<f64>,
    pub xd: Vec<f64>,
    pub g: Matrix<f64>,
    pub zeta: Matrix<f64>,
}

/// `g = exp(X) g_c`.
pub fn chart_point(basis: &AlgebraBasis<f64>, center: &Matrix<f64>, x: &[f64]) -> Result<Matrix<f64>> {
    Ok(&mat_exp(&basis.combine(x))? * center)
}

/// `g' g^{-1} = dexp_X(X')`.
pub fn chart_velocity(basis: &AlgebraBasis<f64>, x: &[f64], xd: &[f64]) -> Matrix<f64> {
    dexp(&basis.combine(x), &basis.combine(xd))
}

pub type ChartAccel<'a> = dyn Fn(&Matrix<f64>, f64, &[f64], &[f64]) -> Result<Vec<f64>> + 'a;

/// RK4 on exponential charts of `SL(d)`, recentring once `|x|` reaches
/// [`RECENTER_THRESHOLD`]. `accel(center, t, x, x')` returns `x''`.
pub fn integrate_on_charts(
    basis: &AlgebraBasis<f64>,
    g0: &Matrix<f64>,
    zeta0: &Matrix<f64>,
    span: &TimeSpan<f64>,
    accel: &ChartAccel<'_>,
) -> std::result::Result<Vec<ChartSample>, Aborted<Vec<ChartSample>>> {
    let n = basis.dim();
    let mut center = Arc::new(g0.clone());
    let mut chart = 0;
    let mut state: Vec<f64> = vec![0.0; n].into_iter().chain(basis.coords(zeta0)).collect();
    let mut out: Vec<ChartSample> = Vec::with_capacity(span.samples());
    let sample = |t: f64, chart: usize, center: &Arc<Matrix<f64>>, s: &[f64]| -> Result<ChartSample> {
        Ok(ChartSample {
            t,
            chart,
            center: center.clone(),
            x: s[..n].to_vec(),
            xd: s[n..].to_vec(),
            g: chart_point(basis, center, &s[..n])?,
            zeta: chart_velocity(basis, &s[..n], &s[n..]),
        })
    };
    let fail = |out: Vec<ChartSample>, error: Error, t: f64| Aborted { partial: out, error, time: t };
    match sample(span.t0, chart, &center, &state) {
        Ok(s) => out.push(s),
        Err(e) => return Err(fail(out, e, span.t0)),
    }
    for k in 0..span.steps() {
        let t = span.time(k);
        let c = center.clone();
        let f = |tt: f64, s: &[f64]| -> Result<Vec<f64>> {
            let a = accel(&c, tt, &s[..n], &s[n..])?;
            Ok(s[n..].iter().copied().chain(a).collect())
        };
        state = match rk4_step(&f, &state, t, span.dt) {
            Ok(s) => s,
            Err(e) => return Err(fail(out, e, t)),
        };
        let norm = state[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= RECENTER_THRESHOLD {
            let here = match sample(span.time(k + 1), chart, &center, &state) {
                Ok(s) => s,
                Err(e) => return Err(fail(out, Error::Chart(format!("recentring failed: {e}")), t)),
            };
            center = Arc::new(here.g);
            chart += 1;
            state = vec![0.0; n].into_iter().chain(basis.coords(&here.zeta)).collect();
        }
        match sample(span.time(k + 1), chart, &center, &state) {
            Ok(s) => out.push(s),
            Err(e) => return Err(fail(out, e, t)),
        }
    }
    Ok(out)
}

/// Largest entry of a matrix difference.
pub fn matrix_gap(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    (a - b).max_abs()
}

/// Five-point central derivative of matrix samples at the middle one.
pub(crate) fn five_point(w: &[&Matrix<f64>], dt: f64) -> Matrix<f64> {
    let num = &(w[0] - w[4]) + &(w[3] - w[1]).scale(8.0);
    num.scale(1.0 / (12.0 * dt))
}

pub(crate) fn vec_gap(a: &[f64], b: &[f64]) -> f64 {
    max_abs(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}
