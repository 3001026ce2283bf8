//! Forced Lagrangian systems in the Cartan picture.
//!
//! A point of `W_L = R x (TQ + T*Q)` is a [`CartanPoint`] `(t, q, v, p)`; the
//! Cartan form there is `lambda_L = (L - p.v) dt + p_i dq^i`. The Legendre
//! submanifold is the image of the canonical section `p = dL/dv`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geomcalc::{fd_gradient, fd_jacobian, GradFn, ScalarField, VectorFieldSpec};
use crate::linalg::Matrix;
use crate::scalar::{dot, lit, Real};

/// Mass matrices at or above this 1-norm condition number are refused.
pub const MASS_CONDITION_LIMIT: f64 = 1e12;
/// Frames at or above this condition number are treated as singular.
pub const FRAME_CONDITION_LIMIT: f64 = 1e12;
/// Below this `|L|` the lift formulas switch to `L + 1`.
pub const LIFT_SMALL_LAGRANGIAN: f64 = 1e-10;

#[derive(Clone)]
pub struct LagrangianSystem<T> {
    n: usize,
    lagrangian: ScalarField<T>,
    force: Option<GradFn<T>>,
    label: String,
}

impl<T> fmt::Debug for LagrangianSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianSystem")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("forced", &self.force.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartanPoint<T> {
    pub t: T,
    pub q: Vec<T>,
    pub v: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Real> CartanPoint<T> {
    pub fn new(t: T, q: Vec<T>, v: Vec<T>, p: Vec<T>) -> Self {
        Self { t, q, v, p }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ELResiduals<T> {
    pub r_dyn: Vec<T>,
    pub r_leg: Vec<T>,
    pub r_con: Vec<T>,
}

impl<T: Real> ELResiduals<T> {
    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.r_dyn)
            .max(crate::scalar::max_abs(&self.r_leg))
            .max(crate::scalar::max_abs(&self.r_con))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Coordinate,
    Custom,
}

/// Local basis `{Z_i}` of vector fields on `Q`.
#[derive(Debug, Clone)]
pub struct Frame<T> {
    fields: Vec<VectorFieldSpec<T>>,
    kind: FrameKind,
}

impl<T: Real> Frame<T> {
    pub fn coordinate(n: usize) -> Self {
        Self { fields: (0..n).map(|i| VectorFieldSpec::coordinate(n, i)).collect(), kind: FrameKind::Coordinate }
    }

    pub fn custom(fields: Vec<VectorFieldSpec<T>>) -> Self {
        Self { fields, kind: FrameKind::Custom }
    }

    /// Quadratic polynomial frame `Z_i^j(q) = delta_ij + a_ij + b_ijk q^k + c_ijk (q^k)^2`.
    /// `a` is `n x n`, `b` and `c` are `n x n x n` in row-major `[i][j][k]`.
    pub fn polynomial(n: usize, a: Vec<T>, b: Vec<T>, c: Vec<T>) -> Self {
        assert_eq!(a.len(), n * n);
        assert_eq!(b.len(), n * n * n);
        assert_eq!(c.len(), n * n * n);
        let (a, b, c) = (Arc::new(a), Arc::new(b), Arc::new(c));
        let fields = (0..n)
            .map(|i| {
                let (a, b, c) = (a.clone(), b.clone(), c.clone());
                VectorFieldSpec::new(n, move |q: &[T]| {
                    (0..n)
                        .map(|j| {
                            let mut z = a[i * n + j] + if i == j { T::one() } else { T::zero() };
                            for (k, qk) in q.iter().enumerate() {
                                let idx = (i * n + j) * n + k;
                                z += b[idx] * *qk + c[idx] * *qk * *qk;
                            }
                            z
                        })
                        .collect()
                })
            })
            .collect();
        Self { fields, kind: FrameKind::Custom }
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn fields(&self) -> &[VectorFieldSpec<T>] {
        &self.fields
    }

    /// Matrix with columns `Z_i(q)`.
    pub fn matrix(&self, q: &[T]) -> Matrix<T> {
        Matrix::from_columns(&self.fields.iter().map(|z| z.eval(q)).collect::<Vec<_>>())
    }

    pub fn check_invertible(&self, q: &[T]) -> Result<Matrix<T>> {
        let m = self.matrix(q);
        let cond = m.condition_number();
        if !(cond < lit(FRAME_CONDITION_LIMIT)) {
            return Err(Error::FrameSingular { cond: cond.to_f64().unwrap_or(f64::INFINITY) });
        }
        Ok(m)
    }
}

/// A velocity-phase vector field with a time component,
/// `U d/dt + Z^i d/dq^i + W^i d/dv^i`, projectable: `U` and `Z` depend on
/// `(t, q)` only.
#[derive(Clone)]
pub struct ExtendedField<T> {
    pub time: Arc<dyn Fn(T, &[T]) -> T + Send + Sync>,
    pub base: Arc<dyn Fn(T, &[T]) -> Vec<T> + Send + Sync>,
    pub fiber: Arc<dyn Fn(T, &[T], &[T]) -> Vec<T> + Send + Sync>,
}

impl<T> fmt::Debug for ExtendedField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExtendedField")
    }
}

impl<T: Real> ExtendedField<T> {
    pub fn new(
        time: impl Fn(T, &[T]) -> T + Send + Sync + 'static,
        base: impl Fn(T, &[T]) -> Vec<T> + Send + Sync + 'static,
        fiber: impl Fn(T, &[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self { time: Arc::new(time), base: Arc::new(base), fiber: Arc::new(fiber) }
    }

    /// Complete lift of a vector field on `Q`, no time component.
    pub fn complete_lift(x: &VectorFieldSpec<T>) -> Self {
        let (xb, xf) = (x.clone(), x.clone());
        Self::new(
            |_, _| T::zero(),
            move |_, q| xb.eval(q),
            move |_, q, v| match xf.jacobian(q) {
                Ok(j) => j.mul_vec(v),
                Err(_) => vec![T::nan(); v.len()],
            },
        )
    }

    /// Vertical lift of a vector field on `Q`.
    pub fn vertical_lift(x: &VectorFieldSpec<T>) -> Self {
        let x = x.clone();
        let n = x.dim();
        Self::new(|_, _| T::zero(), move |_, _| vec![T::zero(); n], move |_, q, _| x.eval(q))
    }

    pub fn components(&self, t: T, q: &[T], v: &[T]) -> (T, Vec<T>, Vec<T>) {
        ((self.time)(t, q), (self.base)(t, q), (self.fiber)(t, q, v))
    }
}

/// Coefficients of the lift `Z^{1_L}` on `W_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftCoefficients<T> {
    pub mu: T,
    /// Momentum components `R_i` of the lift.
    pub r: Vec<T>,
    /// Set when `|L|` was too small and `L + 1` was used instead.
    pub shifted: bool,
}

impl<T: Real> LagrangianSystem<T> {
    pub fn new(lagrangian: ScalarField<T>) -> Self {
        let n = lagrangian.dim();
        Self { n, lagrangian, force: None, label: String::new() }
    }

    pub fn with_force(mut self, force: impl Fn(T, &[T], &[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.force = Some(Arc::new(force));
        self
    }

    pub fn with_force_fn(mut self, force: Option<GradFn<T>>) -> Self {
        self.force = force;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lagrangian(&self) -> &ScalarField<T> {
        &self.lagrangian
    }

    pub fn force_fn(&self) -> Option<&GradFn<T>> {
        self.force.as_ref()
    }

    pub fn is_forced(&self) -> bool {
        self.force.is_some()
    }

    pub fn force(&self, t: T, q: &[T], v: &[T]) -> Vec<T> {
        match &self.force {
            Some(f) => f(t, q, v),
            None => vec![T::zero(); self.n],
        }
    }

    pub fn lagrangian_value(&self, t: T, q: &[T], v: &[T]) -> Result<T> {
        self.lagrangian.eval_checked(t, q, v)
    }

    /// `p_i = dL/dv^i`.
    pub fn fiber_derivative(&self, t: T, q: &[T], v: &[T]) -> Result<Vec<T>> {
        self.lagrangian.grad_v(t, q, v)
    }

    /// Classical energy `E = p.v - L` with `p = dL/dv`.
    pub fn energy(&self, t: T, q: &[T], v: &[T]) -> Result<T> {
        let p = self.fiber_derivative(t, q, v)?;
        Ok(dot(&p, v) - self.lagrangian_value(t, q, v)?)
    }

    /// Hessian in the velocities, refusing degenerate Lagrangians.
    pub fn mass_matrix(&self, t: T, q: &[T], v: &[T]) -> Result<Matrix<T>> {
        let m = self.lagrangian.hess_vv(t, q, v)?;
        let cond = m.condition_number();
        if !(cond < lit(MASS_CONDITION_LIMIT)) {
            return Err(Error::DegenerateLagrangian {
                cond: cond.to_f64().unwrap_or(f64::INFINITY),
                limit: MASS_CONDITION_LIMIT,
            });
        }
        Ok(m)
    }

    /// `s_0(t, q, v) = (t, q, v, dL/dv)`.
    pub fn canonical_section(&self, t: T, q: &[T], v: &[T]) -> Result<CartanPoint<T>> {
        let p = self.fiber_derivative(t, q, v)?;
        Ok(CartanPoint::new(t, q.to_vec(), v.to_vec(), p))
    }

    pub fn is_on_legendre(&self, pt: &CartanPoint<T>, tol: T) -> Result<bool> {
        let p = self.fiber_derivative(pt.t, &pt.q, &pt.v)?;
        Ok(p.iter().zip(&pt.p).all(|(a, b)| (*a - *b).abs() <= tol))
    }

    /// `(L - p.v, p)`: the `dt` and `dq` coefficients of `lambda_L` at `pt`.
    pub fn cartan_form_coeffs(&self, pt: &CartanPoint<T>) -> Result<(T, Vec<T>)> {
        let l = self.lagrangian_value(pt.t, &pt.q, &pt.v)?;
        Ok((l - dot(&pt.p, &pt.v), pt.p.clone()))
    }

    /// Explicit accelerations of a regular Lagrangian:
    /// `M a = dL/dq + F - (d2L/dv dq) v - d2L/dt dv`.
    pub fn solve_accel(&self, t: T, q: &[T], v: &[T]) -> Result<Vec<T>> {
        let m = self.mass_matrix(t, q, v)?;
        let gq = self.lagrangian.grad_q(t, q, v)?;
        let mv = self.lagrangian.hess_vq_dir(t, q, v, v)?;
        let tv = self.lagrangian.dt_grad_v(t, q, v)?;
        let f = self.force(t, q, v);
        let rhs: Vec<T> = (0..self.n).map(|i| gq[i] + f[i] - mv[i] - tv[i]).collect();
        if !crate::scalar::all_finite(&rhs) {
            return Err(Error::non_finite("acceleration right-hand side"));
        }
        m.solve(&rhs)
    }

    /// Quasi-velocity Euler-Lagrange residuals at the center of a uniformly
    /// spaced five-sample window.
    pub fn el_residuals(&self, frame: &Frame<T>, window: &[CartanPoint<T>]) -> Result<ELResiduals<T>> {
        if window.len() != 5 {
            return Err(Error::Dimension(format!("residual window of {} samples, expected 5", window.len())));
        }
        let dt = window[1].t - window[0].t;
        let spacing_tol = lit::<T>(1e-9) * T::one().max(dt.abs());
        if !(dt > T::zero()) || window.windows(2).any(|w| ((w[1].t - w[0].t) - dt).abs() > spacing_tol) {
            return Err(Error::Precondition("residual window must be uniformly spaced in time".into()));
        }
        let c = &window[2];
        let n = self.n;
        let zmat = frame.check_invertible(&c.q)?;

        let zbar = |pt: &CartanPoint<T>| -> Vec<T> {
            frame.fields.iter().map(|z| dot(&pt.p, &z.eval(&pt.q))).collect()
        };
        let zb: Vec<Vec<T>> = window.iter().map(zbar).collect();
        let d_zbar = five_point_derivative(|k, i| zb[k][i], n, dt);
        let qdot = five_point_derivative(|k, i| window[k].q[i], n, dt);

        let gq = self.lagrangian.grad_q(c.t, &c.q, &c.v)?;
        let gv = self.lagrangian.grad_v(c.t, &c.q, &c.v)?;
        let f = self.force(c.t, &c.q, &c.v);
        let mut r_dyn = Vec::with_capacity(n);
        let mut r_leg = Vec::with_capacity(n);
        for (i, z) in frame.fields.iter().enumerate() {
            let zq = z.eval(&c.q);
            let jz = z.jacobian(&c.q)?;
            let fiber = jz.mul_vec(&c.v);
            let zc_l = dot(&zq, &gq) + dot(&fiber, &gv);
            r_dyn.push(d_zbar[i] - (zc_l + dot(&f, &zq)));
            r_leg.push(zb[2][i] - dot(&zq, &gv));
        }
        let slip: Vec<T> = qdot.iter().zip(&c.v).map(|(a, b)| *a - *b).collect();
        let r_con = zmat.solve(&slip)?;
        let out = ELResiduals { r_dyn, r_leg, r_con };
        if !out.max_abs().is_finite() {
            return Err(Error::non_finite("EL residuals"));
        }
        Ok(out)
    }

    /// `mu_Z` and `R` for the lift of a projectable field to `W_L`:
    ///
    /// `mu L = U dL/dt + Z.dL/dq + W.(dL/dv - p) + E D_t U + p_k D_t Z^k`,
    /// `R_i = mu p_i - E d_i U - p_k d_i Z^k`, with `E = L - p.v` and
    /// `D_t = d/dt + v^i d/dq^i`.
    pub fn lift_coefficients(&self, field: &ExtendedField<T>, pt: &CartanPoint<T>) -> Result<LiftCoefficients<T>> {
        let (t, q, v, p) = (pt.t, &pt.q[..], &pt.v[..], &pt.p[..]);
        let mut l = self.lagrangian_value(t, q, v)?;
        let shifted = l.abs() <= lit(LIFT_SMALL_LAGRANGIAN);
        if shifted {
            l += T::one();
        }
        let e = l - dot(p, v);
        let (u, z, w) = field.components(t, q, v);
        let lt = self.lagrangian.partial_t(t, q, v)?;
        let gq = self.lagrangian.grad_q(t, q, v)?;
        let gv = self.lagrangian.grad_v(t, q, v)?;

        // Derivatives of U and Z in (t, q): column 0 is d/dt.
        let tq: Vec<T> = std::iter::once(t).chain(q.iter().copied()).collect();
        let du = fd_gradient(|x| (field.time)(x[0], &x[1..]), &tq)?;
        let dz = fd_jacobian(|x| (field.base)(x[0], &x[1..]), &tq)?;
        let total = |row: &dyn Fn(usize) -> T| row(0) + (0..self.n).fold(T::zero(), |s, i| s + v[i] * row(i + 1));
        let dt_u = total(&|c| du[c]);
        let dt_z: Vec<T> = (0..self.n).map(|k| total(&|c| dz[(k, c)])).collect();

        let gv_minus_p: Vec<T> = gv.iter().zip(p).map(|(a, b)| *a - *b).collect();
        let num = u * lt + dot(&z, &gq) + dot(&w, &gv_minus_p) + e * dt_u + dot(p, &dt_z);
        let mu = num / l;
        let r = (0..self.n)
            .map(|i| mu * p[i] - e * du[i + 1] - (0..self.n).fold(T::zero(), |s, k| s + p[k] * dz[(k, i + 1)]))
            .collect::<Vec<_>>();
        if !mu.is_finite() || !crate::scalar::all_finite(&r) {
            return Err(Error::non_finite("lift coefficients"));
        }
        Ok(LiftCoefficients { mu, r, shifted })
    }
}

/// Fourth-order central derivative at the middle of five uniform samples.
fn five_point_derivative<T: Real>(sample: impl Fn(usize, usize) -> T, n: usize, dt: T) -> Vec<T> {
    let eight = lit::<T>(8.0);
    let denom = lit::<T>(12.0) * dt;
    (0..n)
        .map(|i| (sample(0, i) - eight * sample(1, i) + eight * sample(3, i) - sample(4, i)) / denom)
        .collect()
}
