//! Group actions, momentum maps, principal connections and Routh reduction
//! over trivial bundles `Q = S x G` with abelian `G`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geomcalc::{d_oneform, fd_gradient, fd_jacobian, lie_bracket, OneFormSpec, ScalarField, VectorFieldSpec};
use crate::integrate::{simulate, Aborted, Diagnostic, TimeSpan, Trajectory};
use crate::linalg::Matrix;
use crate::mech::LagrangianSystem;
use crate::scalar::{dot, lit, max_abs, Real};

/// Invariance checks pass when both maxima are at or below this value.
pub const INVARIANCE_TOLERANCE: f64 = 1e-6;
/// Initial data must satisfy `|J - mu| <=` this for an equivalence run.
pub const MOMENTUM_LEVEL_TOLERANCE: f64 = 1e-10;

/// Components `<J, xi_a>` of a momentum value.
pub type MomentumValue<T> = Vec<T>;

/// Infinitesimal generators of a Lie group action on `Q` together with the
/// structure constants `c^k_ab` (stored `[k][a][b]`), with the convention
/// `[xi_a, xi_b] = -c^k_ab xi_k`.
#[derive(Debug, Clone)]
pub struct GroupAction<T> {
    generators: Vec<VectorFieldSpec<T>>,
    structure: Vec<T>,
}

impl<T: Real> GroupAction<T> {
    pub fn new(generators: Vec<VectorFieldSpec<T>>, structure: Vec<T>) -> Result<Self> {
        let m = generators.len();
        if structure.len() != m * m * m {
            return Err(Error::Dimension(format!("{} structure constants for a {m}-dimensional group", structure.len())));
        }
        for k in 0..m {
            for a in 0..m {
                for b in 0..m {
                    let (x, y) = (structure[(k * m + a) * m + b], structure[(k * m + b) * m + a]);
                    if (x + y).abs() > lit(1e-12) {
                        return Err(Error::Precondition(format!("structure constants not antisymmetric at ({k},{a},{b})")));
                    }
                }
            }
        }
        Ok(Self { generators, structure })
    }

    pub fn abelian(generators: Vec<VectorFieldSpec<T>>) -> Self {
        let m = generators.len();
        Self { generators, structure: vec![T::zero(); m * m * m] }
    }

    /// Translations along the given coordinate directions.
    pub fn coordinate_translations(n: usize, coords: &[usize]) -> Self {
        Self::abelian(coords.iter().map(|&i| VectorFieldSpec::coordinate(n, i)).collect())
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[VectorFieldSpec<T>] {
        &self.generators
    }

    pub fn structure_constant(&self, k: usize, a: usize, b: usize) -> T {
        let m = self.dim();
        self.structure[(k * m + a) * m + b]
    }

    pub fn is_abelian(&self) -> bool {
        self.structure.iter().all(|c| *c == T::zero())
    }

    /// Largest violation of `[xi_a, xi_b] = -c^k_ab xi_k` over the samples.
    pub fn bracket_defect(&self, samples: &[Vec<T>]) -> Result<T> {
        let m = self.dim();
        let mut worst = T::zero();
        for q in samples {
            let xs: Vec<Vec<T>> = self.generators.iter().map(|g| g.eval(q)).collect();
            for a in 0..m {
                for b in 0..m {
                    let br = lie_bracket(&self.generators[a], &self.generators[b], q)?;
                    for (j, bj) in br.iter().enumerate() {
                        let rhs = (0..m).fold(T::zero(), |s, k| s - self.structure_constant(k, a, b) * xs[k][j]);
                        worst = worst.max((*bj - rhs).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Which chart coordinates parametrize the group factor of `Q = S x G`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub group: Vec<usize>,
    pub base: Vec<usize>,
}

impl Split {
    pub fn new(n: usize, group: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &g in &group {
            if g >= n || seen[g] {
                return Err(Error::Dimension(format!("group coordinate {g} invalid for dimension {n}")));
            }
            seen[g] = true;
        }
        let base = (0..n).filter(|i| !seen[*i]).collect();
        Ok(Self { group, base })
    }

    pub fn gather<T: Copy>(&self, x: &[T], which: &[usize]) -> Vec<T> {
        which.iter().map(|&i| x[i]).collect()
    }

    pub fn assemble<T: Real>(&self, base: &[T], group: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.base.len() + self.group.len()];
        for (k, &i) in self.base.iter().enumerate() {
            out[i] = base[k];
        }
        for (k, &i) in self.group.iter().enumerate() {
            out[i] = group[k];
        }
        out
    }
}

pub type CoeffFn<T> = Arc<dyn Fn(&[T]) -> Matrix<T> + Send + Sync>;

/// Principal connection `omega_Q`, given by its `m x n` coefficient matrix:
/// `omega^a(v) = omega^a_i(q) v^i`.
#[derive(Clone)]
pub struct PrincipalConnection<T> {
    n: usize,
    m: usize,
    coeffs: CoeffFn<T>,
    split: Option<Split>,
}

impl<T> fmt::Debug for PrincipalConnection<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrincipalConnection").field("n", &self.n).field("m", &self.m).field("split", &self.split).finish()
    }
}

impl<T: Real> PrincipalConnection<T> {
    pub fn general(n: usize, m: usize, coeffs: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        Self { n, m, coeffs: Arc::new(coeffs), split: None }
    }

    /// `omega^a = d theta^a + A^a_i(s) ds^i` on a trivial bundle. `a_coeffs`
    /// receives the base coordinates and returns the `m x (n - m)` matrix `A`.
    pub fn trivial(
        n: usize,
        group: Vec<usize>,
        a_coeffs: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static,
    ) -> Result<Self> {
        let split = Split::new(n, group)?;
        let m = split.group.len();
        let sp = split.clone();
        let coeffs = move |q: &[T]| {
            let s = sp.gather(q, &sp.base);
            let a = a_coeffs(&s);
            let mut w = Matrix::zeros(m, n);
            for r in 0..m {
                w[(r, sp.group[r])] = T::one();
                for (k, &i) in sp.base.iter().enumerate() {
                    w[(r, i)] = a[(r, k)];
                }
            }
            w
        };
        Ok(Self { n, m, coeffs: Arc::new(coeffs), split: Some(split) })
    }

    /// Flat connection `d theta` on the given group coordinates.
    pub fn flat(n: usize, group: Vec<usize>) -> Result<Self> {
        let m = group.len();
        Self::trivial(n, group, move |_| Matrix::zeros(m, n - m))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn group_dim(&self) -> usize {
        self.m
    }

    pub fn split(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    pub fn coefficients(&self, q: &[T]) -> Matrix<T> {
        (self.coeffs)(q)
    }

    /// `omega_Q(v_q)`.
    pub fn apply(&self, q: &[T], v: &[T]) -> Vec<T> {
        self.coefficients(q).mul_vec(v)
    }

    /// `omega_mu = <mu, omega_Q>` as a 1-form on `Q`.
    pub fn omega_mu(&self, mu: &[T]) -> OneFormSpec<T> {
        let coeffs = self.coeffs.clone();
        let mu = mu.to_vec();
        OneFormSpec::new(self.n, move |q| coeffs(q).tr_mul_vec(&mu))
    }

    /// Largest `|omega^a(xi_b) - delta^a_b|` over the samples.
    pub fn generator_defect(&self, action: &GroupAction<T>, samples: &[Vec<T>]) -> T {
        let mut worst = T::zero();
        for q in samples {
            let w = self.coefficients(q);
            for (b, xi) in action.generators().iter().enumerate() {
                let col = w.mul_vec(&xi.eval(q));
                for (a, c) in col.iter().enumerate() {
                    let target = if a == b { T::one() } else { T::zero() };
                    worst = worst.max((*c - target).abs());
                }
            }
        }
        worst
    }
}

/// `J_a = dL/dv . xi_a(q)`.
pub fn momentum_map<T: Real>(
    sys: &LagrangianSystem<T>,
    action: &GroupAction<T>,
    t: T,
    q: &[T],
    v: &[T],
) -> Result<MomentumValue<T>> {
    let p = sys.fiber_derivative(t, q, v)?;
    Ok(action.generators().iter().map(|xi| dot(&p, &xi.eval(q))).collect())
}

/// Diagnostics `J1..Jm` for trajectory recording.
pub fn momentum_diagnostics<T: Real>(action: &GroupAction<T>) -> Vec<Diagnostic<T>> {
    (0..action.dim())
        .map(|a| {
            let xi = action.generators()[a].clone();
            Diagnostic::new(format!("J{}", a + 1), move |_, pt| Ok(dot(&pt.p, &xi.eval(&pt.q))))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport<T> {
    pub max_lagrangian_variation: T,
    pub max_force_on_generators: T,
    pub pass: bool,
}

/// Evaluates `max |xi_a^C . L|` and `max |F . xi_a|` over `(t, q, v)` samples.
pub fn check_invariance<T: Real>(
    sys: &LagrangianSystem<T>,
    action: &GroupAction<T>,
    samples: &[(T, Vec<T>, Vec<T>)],
) -> InvarianceReport<T> {
    let mut lag = T::zero();
    let mut force = T::zero();
    let nan_to_inf = |x: T| if x.is_nan() { T::infinity() } else { x };
    for (t, q, v) in samples {
        for xi in action.generators() {
            let variation = crate::geomcalc::complete_lift(xi).apply(sys.lagrangian(), *t, q, v);
            lag = lag.max(nan_to_inf(variation.map_or(T::infinity(), |x| x.abs())));
            let f = sys.force(*t, q, v);
            force = force.max(nan_to_inf(dot(&f, &xi.eval(q)).abs()));
        }
    }
    let tol = lit(INVARIANCE_TOLERANCE);
    InvarianceReport { max_lagrangian_variation: lag, max_force_on_generators: force, pass: lag <= tol && force <= tol }
}

/// `R_mu = L - <mu, omega_Q(v)>`.
pub fn routhian<T: Real>(sys: &LagrangianSystem<T>, conn: &PrincipalConnection<T>, mu: &[T]) -> ScalarField<T> {
    let l = sys.lagrangian().clone();
    let w = conn.omega_mu(mu);
    let n = sys.dim();
    let (l2, w2) = (l.clone(), w.clone());
    let field = ScalarField::new(n, move |t, q, v| l.eval(t, q, v) - dot(&w.eval(q), v));
    if l2.has_analytic_dv() {
        field.with_dv(move |t, q, v| {
            let g = l2.grad_v(t, q, v).unwrap_or_else(|_| vec![T::nan(); v.len()]);
            g.iter().zip(w2.eval(q)).map(|(a, b)| *a - b).collect()
        })
    } else {
        field
    }
}

/// Gyroscopic force `G_i = D_ij v^j`, `D_ij = d_i w_j - d_j w_i`, `w = omega_mu`.
/// Equivalently `G = -v _| d omega_mu`; it does no work, `G . v = 0`.
pub fn gyro_force<T: Real>(omega_mu: &OneFormSpec<T>, q: &[T], v: &[T]) -> Result<Vec<T>> {
    Ok(d_oneform(omega_mu, q)?.mul_vec(v))
}

/// Unique `(alpha_hat, sigma)` with `alpha = alpha_hat o T p + sigma . omega_Q`.
pub fn routh_decompose<T: Real>(alpha: &[T], conn: &PrincipalConnection<T>, q: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let split = conn.split().ok_or_else(|| Error::Precondition("Routh decomposition needs split coordinates".into()))?;
    let w = conn.coefficients(q);
    let m = conn.group_dim();
    let wg = Matrix::from_fn(m, m, |a, b| w[(a, split.group[b])]);
    let alpha_g = split.gather(alpha, &split.group);
    // sigma^T W_G = alpha_G
    let sigma = wg
        .transpose()
        .solve(&alpha_g)
        .map_err(|_| Error::Singular("connection coefficients restricted to the group directions".into()))?;
    let hat = split
        .base
        .iter()
        .map(|&i| alpha[i] - (0..m).fold(T::zero(), |s, a| s + sigma[a] * w[(a, i)]))
        .collect();
    Ok((hat, sigma))
}

/// Inverse of [`routh_decompose`].
pub fn routh_recompose<T: Real>(hat: &[T], sigma: &[T], conn: &PrincipalConnection<T>, q: &[T]) -> Result<Vec<T>> {
    let split = conn.split().ok_or_else(|| Error::Precondition("Routh decomposition needs split coordinates".into()))?;
    let mut alpha = conn.coefficients(q).tr_mul_vec(sigma);
    for (k, &i) in split.base.iter().enumerate() {
        alpha[i] += hat[k];
    }
    Ok(alpha)
}

#[derive(Debug, Clone)]
pub struct ReductionOptions<T> {
    /// Multiplies the gyroscopic force; `-1` gives the wrong-sign control.
    pub gyro_sign: T,
    pub max_newton_iterations: usize,
}

impl<T: Real> Default for ReductionOptions<T> {
    fn default() -> Self {
        Self { gyro_sign: T::one(), max_newton_iterations: 30 }
    }
}

/// Routh-reduced system on the base chart `S`.
#[derive(Debug, Clone)]
pub struct ReducedSystem<T> {
    pub system: LagrangianSystem<T>,
    pub parent: LagrangianSystem<T>,
    pub connection: PrincipalConnection<T>,
    pub mu: Vec<T>,
    pub split: Split,
    /// Group coordinates at which the (group-independent) parent is evaluated.
    pub theta_ref: Vec<T>,
    locked: LockedVelocity<T>,
}

impl<T: Real> ReducedSystem<T> {
    /// Group velocities fixed by `J = mu` at a base state.
    pub fn locked_group_velocity(&self, t: T, s: &[T], sdot: &[T]) -> Result<Vec<T>> {
        self.locked.solve(t, s, sdot)
    }

    /// Lifts a reduced state to the full chart.
    pub fn lift_state(&self, t: T, s: &[T], sdot: &[T], theta: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let w = self.locked.solve(t, s, sdot)?;
        Ok((self.split.assemble(s, theta), self.split.assemble(sdot, &w)))
    }
}

/// Newton solve of `dL/d theta-dot = mu` for the group velocities.
#[derive(Clone)]
struct LockedVelocity<T> {
    lagrangian: ScalarField<T>,
    split: Split,
    theta_ref: Vec<T>,
    mu: Vec<T>,
    max_iter: usize,
}

impl<T> fmt::Debug for LockedVelocity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LockedVelocity")
    }
}

impl<T: Real> LockedVelocity<T> {
    fn residual(&self, t: T, q: &[T], s_dot: &[T], w: &[T]) -> Result<Vec<T>> {
        let v = self.split.assemble(s_dot, w);
        let g = self.lagrangian.grad_v(t, q, &v)?;
        Ok(self.split.group.iter().zip(&self.mu).map(|(&i, m)| g[i] - *m).collect())
    }

    fn solve(&self, t: T, s: &[T], s_dot: &[T]) -> Result<Vec<T>> {
        let q = self.split.assemble(s, &self.theta_ref);
        let m = self.split.group.len();
        let mut w = vec![T::zero(); m];
        let tol = lit::<T>(1e-13);
        // With finite-difference momenta the steps bottom out at the noise
        // floor instead of shrinking below `tol`.
        let floor = lit::<T>(1e-8);
        let mut prev = T::infinity();
        for _ in 0..self.max_iter {
            let r = self.residual(t, &q, s_dot, &w)?;
            let jac = fd_jacobian(|x| self.residual(t, &q, s_dot, x).unwrap_or_else(|_| vec![T::nan(); m]), &w)?;
            let step = jac.solve(&r).map_err(|e| {
                Error::ConstraintSolveFailure(format!("group block of the mass matrix is singular ({e})"))
            })?;
            let mut size = T::zero();
            for (wi, di) in w.iter_mut().zip(&step) {
                *wi -= *di;
                size = size.max(di.abs());
            }
            let scale = T::one() + max_abs(&w);
            if size <= tol * scale || (size <= floor * scale && size >= lit::<T>(0.5) * prev) {
                return Ok(w);
            }
            prev = size;
        }
        Err(Error::ConstraintSolveFailure("momentum constraint did not converge".into()))
    }
}

/// Builds the Routh-reduced system at momentum level `mu`.
///
/// The Lagrangian is `R_mu` with the group velocities eliminated through
/// `J = mu`; the force is the base part of `F` plus the gyroscopic force of
/// `omega_mu` restricted to the base.
pub fn build_reduced_system<T: Real>(
    sys: &LagrangianSystem<T>,
    action: &GroupAction<T>,
    conn: &PrincipalConnection<T>,
    mu: &[T],
    samples: &[(T, Vec<T>, Vec<T>)],
    options: &ReductionOptions<T>,
) -> Result<ReducedSystem<T>> {
    let split = conn
        .split()
        .cloned()
        .ok_or_else(|| Error::Precondition("reduction needs a trivial bundle with split coordinates".into()))?;
    if !action.is_abelian() {
        return Err(Error::Precondition("reduction is implemented for abelian groups only".into()));
    }
    if action.dim() != split.group.len() || mu.len() != action.dim() {
        return Err(Error::Dimension("group dimension, connection split and mu disagree".into()));
    }
    let report = check_invariance(sys, action, samples);
    if !report.pass {
        return Err(Error::InvarianceFailure(format!(
            "max |xi^C L| = {:e}, max |F xi| = {:e}, tolerance {:e}",
            report.max_lagrangian_variation.to_f64().unwrap_or(f64::NAN),
            report.max_force_on_generators.to_f64().unwrap_or(f64::NAN),
            INVARIANCE_TOLERANCE
        )));
    }
    let qs: Vec<Vec<T>> = samples.iter().map(|(_, q, _)| q.clone()).collect();
    let defect = conn.generator_defect(action, &qs);
    if defect > lit(1e-8) {
        return Err(Error::Precondition(format!("connection does not reproduce the generators (defect {defect:e})")));
    }

    let theta_ref = samples.first().map(|(_, q, _)| split.gather(q, &split.group)).unwrap_or_else(|| vec![T::zero(); split.group.len()]);
    let locked = LockedVelocity {
        lagrangian: sys.lagrangian().clone(),
        split: split.clone(),
        theta_ref: theta_ref.clone(),
        mu: mu.to_vec(),
        max_iter: options.max_newton_iterations,
    };
    for (t, q, v) in samples {
        let s = split.gather(q, &split.base);
        let sd = split.gather(v, &split.base);
        locked.solve(*t, &s, &sd)?;
    }

    let nb = split.base.len();
    let w_mu = conn.omega_mu(mu);
    let rbar = {
        let (locked, w_mu, l) = (locked.clone(), w_mu.clone(), sys.lagrangian().clone());
        move |t: T, s: &[T], sd: &[T]| -> Result<T> {
            let w = locked.solve(t, s, sd)?;
            let q = locked.split.assemble(s, &locked.theta_ref);
            let v = locked.split.assemble(sd, &w);
            Ok(l.eval(t, &q, &v) - dot(&w_mu.eval(&q), &v))
        }
    };
    let rb = rbar.clone();
    let mut field = ScalarField::new(nb, move |t, s, sd| rb(t, s, sd).unwrap_or(T::nan()));
    let l = sys.lagrangian();
    if l.has_analytic_dv() {
        // Envelope theorem: R-bar is stationary in the eliminated velocities.
        let (locked, w_mu, l) = (locked.clone(), w_mu.clone(), l.clone());
        field = field.with_dv(move |t, s, sd| {
            let eval = || -> Result<Vec<T>> {
                let w = locked.solve(t, s, sd)?;
                let q = locked.split.assemble(s, &locked.theta_ref);
                let v = locked.split.assemble(sd, &w);
                let g = l.grad_v(t, &q, &v)?;
                let om = w_mu.eval(&q);
                Ok(locked.split.base.iter().map(|&i| g[i] - om[i]).collect())
            };
            eval().unwrap_or_else(|_| vec![T::nan(); sd.len()])
        });
    }
    if l.has_analytic_dq() {
        let (locked, w_mu, l) = (locked.clone(), w_mu.clone(), l.clone());
        field = field.with_dq(move |t, s, sd| {
            let eval = || -> Result<Vec<T>> {
                let w = locked.solve(t, s, sd)?;
                let q = locked.split.assemble(s, &locked.theta_ref);
                let v = locked.split.assemble(sd, &w);
                let g = l.grad_q(t, &q, &v)?;
                let coupling = fd_gradient(
                    |x| {
                        let qx = locked.split.assemble(x, &locked.theta_ref);
                        dot(&w_mu.eval(&qx), &v)
                    },
                    s,
                )?;
                Ok(locked.split.base.iter().zip(coupling).map(|(&i, c)| g[i] - c).collect())
            };
            eval().unwrap_or_else(|_| vec![T::nan(); sd.len()])
        });
    }

    let base_form = {
        let (sp, theta, w_mu) = (split.clone(), theta_ref.clone(), w_mu.clone());
        OneFormSpec::new(nb, move |s| {
            let q = sp.assemble(s, &theta);
            sp.gather(&w_mu.eval(&q), &sp.base)
        })
    };
    let force = {
        let (locked, parent, sign) = (locked.clone(), sys.clone(), options.gyro_sign);
        move |t: T, s: &[T], sd: &[T]| -> Vec<T> {
            let eval = || -> Result<Vec<T>> {
                let mut f = if parent.is_forced() {
                    let w = locked.solve(t, s, sd)?;
                    let q = locked.split.assemble(s, &locked.theta_ref);
                    let v = locked.split.assemble(sd, &w);
                    locked.split.gather(&parent.force(t, &q, &v), &locked.split.base)
                } else {
                    vec![T::zero(); sd.len()]
                };
                let g = gyro_force(&base_form, s, sd)?;
                for (fi, gi) in f.iter_mut().zip(g) {
                    *fi += sign * gi;
                }
                Ok(f)
            };
            eval().unwrap_or_else(|_| vec![T::nan(); sd.len()])
        }
    };
    let label = format!("{} reduced", sys.label());
    let system = LagrangianSystem::new(field).with_force(force).with_label(label.trim());
    Ok(ReducedSystem {
        system,
        parent: sys.clone(),
        connection: conn.clone(),
        mu: mu.to_vec(),
        split,
        theta_ref,
        locked,
    })
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport<T> {
    pub max_base_deviation: T,
    pub momentum_drift: T,
    pub full: Trajectory<T>,
    pub reduced: Trajectory<T>,
}

/// Integrates the full and the reduced system from matching data and
/// compares their base coordinates.
pub fn equivalence_check<T: Real>(
    reduced: &ReducedSystem<T>,
    action: &GroupAction<T>,
    q0: &[T],
    v0: &[T],
    span: &TimeSpan<T>,
) -> std::result::Result<EquivalenceReport<T>, Aborted<Trajectory<T>>> {
    let abort = |error: Error| Aborted { partial: Trajectory::empty(q0.len()), error, time: span.t0.to_f64().unwrap_or(0.0) };
    let j0 = momentum_map(&reduced.parent, action, span.t0, q0, v0).map_err(abort)?;
    let gap = j0.iter().zip(&reduced.mu).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
    if gap > lit(MOMENTUM_LEVEL_TOLERANCE) {
        return Err(abort(Error::Precondition(format!(
            "initial momentum differs from mu by {:e}",
            gap.to_f64().unwrap_or(f64::NAN)
        ))));
    }
    let split = &reduced.split;
    let s0 = split.gather(q0, &split.base);
    let sd0 = split.gather(v0, &split.base);
    let diags = momentum_diagnostics(action);
    let (full, red) = std::thread::scope(|scope| {
        let full = scope.spawn(|| simulate(&reduced.parent, q0, v0, span, &diags));
        let red = simulate(&reduced.system, &s0, &sd0, span, &[]);
        (full.join().expect("full-system integration thread panicked"), red)
    });
    let full = full?;
    let red = red?;
    let mut dev = T::zero();
    for k in 0..full.len().min(red.len()) {
        let fq = split.gather(full.q(k), &split.base);
        for (a, b) in fq.iter().zip(red.q(k)) {
            dev = dev.max((*a - *b).abs());
        }
    }
    let mut drift = T::zero();
    for (a, name) in reduced.mu.iter().zip((1..).map(|i| format!("J{i}"))) {
        if let Some(c) = full.channel(&name) {
            drift = drift.max(c.iter().fold(T::zero(), |m, x| m.max((*x - *a).abs())));
        }
    }
    Ok(EquivalenceReport { max_base_deviation: dev, momentum_drift: drift, full, reduced: red })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomcalc::fiber_linear;

    fn central() -> LagrangianSystem<f64> {
        LagrangianSystem::new(
            ScalarField::autonomous(2, |q: &[f64], v: &[f64]| {
                0.5 * v[0] * v[0] + 0.5 * q[0] * q[0] * v[1] * v[1] - 0.5 * q[0] * q[0]
            })
            .with_dv(|_, q, v| vec![v[0], q[0] * q[0] * v[1]])
            .with_dq(|_, q, v| vec![q[0] * v[1] * v[1] - q[0], 0.0]),
        )
        .with_label("central_force")
    }

    fn samples() -> Vec<(f64, Vec<f64>, Vec<f64>)> {
        vec![(0.0, vec![1.0, 0.2], vec![0.1, 1.0]), (0.5, vec![1.7, -2.0], vec![-0.4, 0.3])]
    }

    #[test]
    fn momentum_examples() {
        let rot = GroupAction::coordinate_translations(2, &[1]);
        let j = momentum_map(&central(), &rot, 0.0, &[2.0, 0.0], &[0.0, 0.25]).unwrap();
        assert!((j[0] - 1.0).abs() < 1e-12);
        assert_eq!(momentum_map(&central(), &rot, 0.0, &[2.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0]);
        let free = LagrangianSystem::new(ScalarField::autonomous(2, |_, v: &[f64]| 0.5 * dot(v, v)));
        let tr = GroupAction::coordinate_translations(2, &[0, 1]);
        let j = momentum_map(&free, &tr, 0.0, &[0.0, 0.0], &[0.3, -0.7]).unwrap();
        assert!((j[0] - 0.3).abs() < 1e-9 && (j[1] + 0.7).abs() < 1e-9);
    }

    #[test]
    fn invariance_examples() {
        let rot = GroupAction::coordinate_translations(2, &[1]);
        assert!(check_invariance(&central(), &rot, &samples()).pass);
        let qv = LagrangianSystem::new(ScalarField::autonomous(1, |q: &[f64], v: &[f64]| q[0] * v[0]));
        let tr = GroupAction::coordinate_translations(1, &[0]);
        let r = check_invariance(&qv, &tr, &[(0.0, vec![0.5], vec![-2.5])]);
        assert!(!r.pass && (r.max_lagrangian_variation - 2.5).abs() < 1e-9);
        let pushed = central().with_force(|_, _, _| vec![0.0, 1.0]);
        let r = check_invariance(&pushed, &rot, &samples());
        assert!(!r.pass && r.max_lagrangian_variation < 1e-9 && (r.max_force_on_generators - 1.0).abs() < 1e-12);
    }

    #[test]
    fn routhian_examples() {
        let conn = PrincipalConnection::flat(2, vec![1]).unwrap();
        let r = routhian(&central(), &conn, &[1.0]);
        let (q, v) = ([1.3, 0.0], [0.2, 0.7]);
        let expected = 0.5 * 0.04 + 0.5 * 1.69 * 0.49 - 0.5 * 1.69 - 0.7;
        assert!((r.eval(0.0, &q, &v) - expected).abs() < 1e-14);
        let r0 = routhian(&central(), &conn, &[0.0]);
        assert_eq!(r0.eval(0.0, &q, &v), central().lagrangian().eval(0.0, &q, &v));
        let a = central().mass_matrix(0.0, &q, &v).unwrap();
        let b = LagrangianSystem::new(r).mass_matrix(0.0, &q, &v).unwrap();
        assert!((&a - &b).max_abs() < 1e-10);
    }

    fn magnetic_form() -> OneFormSpec<f64> {
        OneFormSpec::new(3, |q: &[f64]| vec![-q[1] / 2.0, q[0] / 2.0, 1.0])
    }

    #[test]
    fn gyro_examples() {
        let flat = OneFormSpec::new(2, |_: &[f64]| vec![0.0, 1.0]);
        assert_eq!(gyro_force(&flat, &[1.0, 0.0], &[0.3, 0.2]).unwrap(), vec![0.0, 0.0]);
        let g = gyro_force(&magnetic_form(), &[0.4, -0.2, 1.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!(g[0].abs() < 1e-9 && (g[1] + 1.0).abs() < 1e-9 && g[2].abs() < 1e-9);
        let v = [0.3, -1.2, 0.8];
        assert_eq!(dot(&gyro_force(&magnetic_form(), &[0.1, 0.5, 0.0], &v).unwrap(), &v), 0.0);
    }

    #[test]
    fn decomposition_examples() {
        let flat = PrincipalConnection::flat(2, vec![1]).unwrap();
        assert_eq!(routh_decompose(&[0.0, 1.0], &flat, &[1.0, 0.0]).unwrap(), (vec![0.0], vec![1.0]));
        assert_eq!(routh_decompose(&[1.0, 0.0], &flat, &[1.0, 0.0]).unwrap(), (vec![1.0], vec![0.0]));
        let bent = PrincipalConnection::trivial(2, vec![1], |s: &[f64]| Matrix::from_rows(&[vec![s[0] * s[0]]])).unwrap();
        let r = 0.7;
        let (hat, sigma) = routh_decompose(&[2.0, 3.0], &bent, &[r, 0.0]).unwrap();
        assert!((sigma[0] - 3.0).abs() < 1e-14 && (hat[0] - (2.0 - 3.0 * r * r)).abs() < 1e-14);
        let back = routh_recompose(&hat, &sigma, &bent, &[r, 0.0]).unwrap();
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 3.0).abs() < 1e-14);
        let degenerate = PrincipalConnection::general(2, 1, |_: &[f64]| Matrix::from_rows(&[vec![1.0, 0.0]]));
        assert!(routh_decompose(&[1.0, 1.0], &degenerate, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn reduced_central_force_keeps_circular_orbit() {
        let sys = central();
        let rot = GroupAction::coordinate_translations(2, &[1]);
        let conn = PrincipalConnection::flat(2, vec![1]).unwrap();
        let red = build_reduced_system(&sys, &rot, &conn, &[1.0], &samples(), &ReductionOptions::default()).unwrap();
        // Effective Lagrangian r'^2/2 - mu^2/(2 r^2) - r^2/2.
        let (r, rd) = (1.4, 0.3);
        let want = 0.5 * rd * rd - 0.5 / (r * r) - 0.5 * r * r;
        assert!((red.system.lagrangian().eval(0.0, &[r], &[rd]) - want).abs() < 1e-12);
        let span = TimeSpan::new(0.0, 10.0, 1e-3).unwrap();
        let traj = simulate(&red.system, &[1.0], &[0.0], &span, &[]).unwrap();
        let worst = (0..traj.len()).fold(0.0f64, |m, k| m.max((traj.q(k)[0] - 1.0).abs()));
        assert!(worst <= 1e-6, "{worst}");
    }

    #[test]
    fn locked_velocity_converges_with_finite_difference_momenta() {
        let kk = LagrangianSystem::new(ScalarField::autonomous(3, |q: &[f64], v: &[f64]| {
            let c = v[2] - 0.5 * q[1] * v[0] + 0.5 * q[0] * v[1];
            0.5 * (v[0] * v[0] + v[1] * v[1]) + 0.5 * c * c
        }));
        let tr = GroupAction::coordinate_translations(3, &[2]);
        let conn = PrincipalConnection::trivial(3, vec![2], |s: &[f64]| Matrix::from_rows(&[vec![-s[1] / 2.0, s[0] / 2.0]]))
            .unwrap();
        let samples = vec![(0.0, vec![0.3, -0.2, 0.0], vec![1.0, 0.0, 0.9])];
        let red = build_reduced_system(&kk, &tr, &conn, &[1.0], &samples, &ReductionOptions::default()).unwrap();
        let (s, sd) = ([0.3, -0.2], [1.0, 0.5]);
        let w = red.locked_group_velocity(0.0, &s, &sd).unwrap();
        let want = 1.0 + 0.5 * s[1] * sd[0] - 0.5 * s[0] * sd[1];
        assert!((w[0] - want).abs() < 1e-8, "{} vs {want}", w[0]);
    }

    #[test]
    fn reduction_refuses_broken_symmetry_and_singular_blocks() {
        let rot = GroupAction::coordinate_translations(2, &[1]);
        let conn = PrincipalConnection::flat(2, vec![1]).unwrap();
        let pushed = central().with_force(|_, _, _| vec![0.0, 0.5]);
        let e = build_reduced_system(&pushed, &rot, &conn, &[1.0], &samples(), &ReductionOptions::default());
        assert!(matches!(e, Err(Error::InvarianceFailure(_))));
        let flat_theta = LagrangianSystem::new(ScalarField::autonomous(2, |_, v: &[f64]| 0.5 * v[0] * v[0] + v[1]));
        let e = build_reduced_system(&flat_theta, &rot, &conn, &[1.0], &samples(), &ReductionOptions::default());
        assert!(matches!(e, Err(Error::ConstraintSolveFailure(_))));
    }

    #[test]
    fn zero_momentum_flat_connection_restricts_to_horizontal_states() {
        let free = LagrangianSystem::new(
            ScalarField::autonomous(2, |q: &[f64], v: &[f64]| 0.5 * dot(v, v) - q[0].cos()),
        )
        .with_force(|_, _, v| vec![-0.1 * v[0], 0.0]);
        let tr = GroupAction::coordinate_translations(2, &[1]);
        let conn = PrincipalConnection::flat(2, vec![1]).unwrap();
        let red = build_reduced_system(&free, &tr, &conn, &[0.0], &samples(), &ReductionOptions::default()).unwrap();
        let (s, sd) = ([0.4], [0.9]);
        assert_eq!(red.locked_group_velocity(0.0, &s, &sd).unwrap(), vec![0.0]);
        let l = free.lagrangian().eval(0.0, &[0.4, 0.0], &[0.9, 0.0]);
        assert!((red.system.lagrangian().eval(0.0, &s, &sd) - l).abs() < 1e-14);
        assert_eq!(red.system.force(0.0, &s, &sd), vec![-0.1 * 0.9]);
    }

    #[test]
    fn generator_and_connection_consistency() {
        let rot = GroupAction::coordinate_translations(2, &[1]);
        let conn = PrincipalConnection::flat(2, vec![1]).unwrap();
        let qs = vec![vec![1.0, 0.5]];
        assert_eq!(conn.generator_defect(&rot, &qs), 0.0);
        assert!(rot.bracket_defect(&qs).unwrap() < 1e-12);
        // so(3) acting on R^3 by rotations: [xi_a, xi_b] = -eps_abk xi_k.
        let gens = vec![
            VectorFieldSpec::new(3, |q: &[f64]| vec![0.0, -q[2], q[1]]),
            VectorFieldSpec::new(3, |q: &[f64]| vec![q[2], 0.0, -q[0]]),
            VectorFieldSpec::new(3, |q: &[f64]| vec![-q[1], q[0], 0.0]),
        ];
        let mut c = vec![0.0; 27];
        for (a, b, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[(k * 3 + a) * 3 + b] = 1.0;
            c[(k * 3 + b) * 3 + a] = -1.0;
        }
        let so3 = GroupAction::new(gens, c).unwrap();
        assert!(so3.bracket_defect(&[vec![0.3, -0.8, 1.1]]).unwrap() < 1e-8);
        assert!(!so3.is_abelian());
    }

    #[test]
    fn routhian_coupling_is_fiber_linear_form() {
        let conn = PrincipalConnection::flat(2, vec![1]).unwrap();
        let w = fiber_linear(&conn.omega_mu(&[2.0]));
        assert_eq!(w.eval(0.0, &[1.0, 0.0], &[0.5, 0.25]), 0.5);
    }
}
