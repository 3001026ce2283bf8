//! Finite-difference calculus on a single coordinate chart.
//!
//! Base points are `q in R^n`; velocity-phase points are `(q, v)`. Scalar
//! fields may depend on time as well, `(t, q, v) -> R`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{lit, Real};

pub type FieldFn<T> = Arc<dyn Fn(T, &[T], &[T]) -> T + Send + Sync>;
pub type GradFn<T> = Arc<dyn Fn(T, &[T], &[T]) -> Vec<T> + Send + Sync>;
pub type HessFn<T> = Arc<dyn Fn(T, &[T], &[T]) -> Matrix<T> + Send + Sync>;
pub type BaseVecFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// First-derivative step scale: `1e-5` in double precision, widened to the
/// cube root of machine epsilon for coarser scalar types.
pub fn fd_step<T: Real>() -> T {
    lit::<T>(1e-5).max(T::epsilon().cbrt())
}

/// Step scale for second derivatives (nested central differences).
pub fn fd_step2<T: Real>() -> T {
    fd_step::<T>() * lit(10.0)
}

#[inline]
fn step_at<T: Real>(scale: T, x: T) -> T {
    scale * T::one().max(x.abs())
}

/// Central difference `(f(x + h e_i) - f(x - h e_i)) / 2h`, `h = 1e-5 max(1, |x_i|)`.
pub fn fd_partial<T: Real>(f: impl Fn(&[T]) -> T, x: &[T], i: usize) -> Result<T> {
    let h = step_at(fd_step(), x[i]);
    let mut xp = x.to_vec();
    xp[i] = x[i] + h;
    let fp = f(&xp);
    xp[i] = x[i] - h;
    let fm = f(&xp);
    let d = (fp - fm) / (h + h);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::non_finite(format!("finite difference in direction {i}")))
    }
}

pub fn fd_gradient<T: Real>(f: impl Fn(&[T]) -> T, x: &[T]) -> Result<Vec<T>> {
    (0..x.len()).map(|i| fd_partial(&f, x, i)).collect()
}

/// Jacobian `J[j][k] = d f_j / d x_k` of a vector-valued map.
pub fn fd_jacobian<T: Real>(f: impl Fn(&[T]) -> Vec<T>, x: &[T]) -> Result<Matrix<T>> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = step_at(fd_step(), x[k]);
        xp[k] = x[k] + h;
        let fp = f(&xp);
        xp[k] = x[k] - h;
        let fm = f(&xp);
        xp[k] = x[k];
        let col: Vec<T> = fp.iter().zip(&fm).map(|(a, b)| (*a - *b) / (h + h)).collect();
        if !col.iter().all(|c| c.is_finite()) {
            return Err(Error::non_finite(format!("Jacobian column {k}")));
        }
        cols.push(col);
    }
    Ok(Matrix::from_columns(&cols))
}

/// Mixed second derivative `d^2 f / dx_i dx_j` by nested central differences
/// with `h2 = 1e-4 max(1, |x|)` at both levels.
pub fn fd_second<T: Real>(f: impl Fn(&[T]) -> T, x: &[T], i: usize, j: usize) -> Result<T> {
    let hi = step_at(fd_step2(), x[i]);
    let hj = step_at(fd_step2(), x[j]);
    let mut y = x.to_vec();
    let mut at = |di: T, dj: T| {
        y.copy_from_slice(x);
        y[i] += di;
        y[j] += dj;
        f(&y)
    };
    let d = if i == j {
        (at(hi, T::zero()) - lit::<T>(2.0) * at(T::zero(), T::zero()) + at(-hi, T::zero())) / (hi * hi)
    } else {
        (at(hi, hj) - at(hi, -hj) - at(-hi, hj) + at(-hi, -hj)) / (lit::<T>(4.0) * hi * hj)
    };
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::non_finite(format!("second difference ({i}, {j})")))
    }
}

/// Time-dependent Lagrangian-type scalar field on `(t, q, v)`.
///
/// Analytic partials are optional and take precedence over finite
/// differences whenever present; second derivatives then difference the
/// analytic gradient once instead of differencing the field twice.
#[derive(Clone)]
pub struct ScalarField<T> {
    n: usize,
    f: FieldFn<T>,
    dt: Option<FieldFn<T>>,
    dq: Option<GradFn<T>>,
    dv: Option<GradFn<T>>,
    hvv: Option<HessFn<T>>,
    autonomous: bool,
}

impl<T> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.n)
            .field("dt", &self.dt.is_some())
            .field("dq", &self.dq.is_some())
            .field("dv", &self.dv.is_some())
            .field("hess_vv", &self.hvv.is_some())
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl<T: Real> ScalarField<T> {
    pub fn new(n: usize, f: impl Fn(T, &[T], &[T]) -> T + Send + Sync + 'static) -> Self {
        Self { n, f: Arc::new(f), dt: None, dq: None, dv: None, hvv: None, autonomous: false }
    }

    /// Field on `(q, v)` with no explicit time dependence.
    pub fn autonomous(n: usize, f: impl Fn(&[T], &[T]) -> T + Send + Sync + 'static) -> Self {
        let field = Self::new(n, move |_, q, v| f(q, v));
        Self { dt: Some(Arc::new(|_, _, _| T::zero())), autonomous: true, ..field }
    }

    pub fn with_dt(mut self, dt: impl Fn(T, &[T], &[T]) -> T + Send + Sync + 'static) -> Self {
        self.dt = Some(Arc::new(dt));
        self.autonomous = false;
        self
    }

    pub fn with_dq(mut self, dq: impl Fn(T, &[T], &[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.dq = Some(Arc::new(dq));
        self
    }

    pub fn with_dv(mut self, dv: impl Fn(T, &[T], &[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.dv = Some(Arc::new(dv));
        self
    }

    /// Analytic `d^2 f / dv dv`; expected symmetric.
    pub fn with_hess_vv(mut self, h: impl Fn(T, &[T], &[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.hvv = Some(Arc::new(h));
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn has_analytic_dv(&self) -> bool {
        self.dv.is_some()
    }

    pub fn has_analytic_dq(&self) -> bool {
        self.dq.is_some()
    }

    /// Built with [`Self::autonomous`] and no explicit time partial since.
    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    #[inline]
    pub fn eval(&self, t: T, q: &[T], v: &[T]) -> T {
        (self.f)(t, q, v)
    }

    pub fn eval_checked(&self, t: T, q: &[T], v: &[T]) -> Result<T> {
        let x = self.eval(t, q, v);
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::non_finite("scalar field evaluation"))
        }
    }

    /// Lagrangian shifted by a constant, same partials.
    pub fn shifted(&self, c: T) -> Self {
        let f = self.f.clone();
        Self { f: Arc::new(move |t, q, v| f(t, q, v) + c), ..self.clone() }
    }

    pub fn partial_t(&self, t: T, q: &[T], v: &[T]) -> Result<T> {
        if let Some(dt) = &self.dt {
            return finite(dt(t, q, v), "analytic time partial");
        }
        fd_partial(|x| self.eval(x[0], q, v), &[t], 0)
    }

    pub fn grad_q(&self, t: T, q: &[T], v: &[T]) -> Result<Vec<T>> {
        if let Some(dq) = &self.dq {
            return finite_vec(dq(t, q, v), "analytic q-gradient");
        }
        fd_gradient(|x| self.eval(t, x, v), q)
    }

    pub fn grad_v(&self, t: T, q: &[T], v: &[T]) -> Result<Vec<T>> {
        if let Some(dv) = &self.dv {
            return finite_vec(dv(t, q, v), "analytic v-gradient");
        }
        fd_gradient(|x| self.eval(t, q, x), v)
    }

    /// `d^2 f / dv_i dv_j`, symmetrized exactly.
    pub fn hess_vv(&self, t: T, q: &[T], v: &[T]) -> Result<Matrix<T>> {
        let m = if let Some(h) = &self.hvv {
            let m = h(t, q, v);
            if !m.as_slice().iter().all(|x| x.is_finite()) {
                return Err(Error::non_finite("analytic v-Hessian"));
            }
            m
        } else if let Some(dv) = &self.dv {
            fd_jacobian(|x| dv(t, q, x), v)?
        } else {
            let n = self.n;
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let d = fd_second(|x| self.eval(t, q, x), v, i, j)?;
                    m[(i, j)] = d;
                    m[(j, i)] = d;
                }
            }
            m
        };
        Ok(m.symmetrized())
    }

    /// `M[i][j] = d^2 f / dv_i dq_j`.
    pub fn hess_vq(&self, t: T, q: &[T], v: &[T]) -> Result<Matrix<T>> {
        if let Some(dv) = &self.dv {
            return fd_jacobian(|x| dv(t, x, v), q);
        }
        let n = self.n;
        let joint = |z: &[T]| self.eval(t, &z[..n], &z[n..]);
        let z: Vec<T> = q.iter().chain(v).copied().collect();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = fd_second(joint, &z, n + i, j)?;
            }
        }
        Ok(m)
    }

    /// `(d^2 f / dv dq) w`, one directional difference of the v-gradient.
    pub fn hess_vq_dir(&self, t: T, q: &[T], v: &[T], w: &[T]) -> Result<Vec<T>> {
        let norm = w.iter().fold(T::zero(), |a, x| a.max(x.abs()));
        if norm == T::zero() {
            return Ok(vec![T::zero(); self.n]);
        }
        let qmax = q.iter().fold(T::zero(), |a, x| a.max(x.abs()));
        let h = step_at(fd_step(), qmax) / norm;
        let shift = |s: T| -> Vec<T> { q.iter().zip(w).map(|(a, b)| *a + s * *b).collect() };
        let (qp, qm) = (shift(h), shift(-h));
        let (gp, gm) = if self.dv.is_some() {
            (self.grad_v(t, &qp, v)?, self.grad_v(t, &qm, v)?)
        } else {
            (fd_gradient(|x| self.eval(t, &qp, x), v)?, fd_gradient(|x| self.eval(t, &qm, x), v)?)
        };
        finite_vec(gp.iter().zip(&gm).map(|(a, b)| (*a - *b) / (h + h)).collect(), "mixed directional derivative")
    }

    /// `d^2 f / dt dv_i`.
    pub fn dt_grad_v(&self, t: T, q: &[T], v: &[T]) -> Result<Vec<T>> {
        if self.autonomous {
            return Ok(vec![T::zero(); self.n]);
        }
        if let Some(dv) = &self.dv {
            let j = fd_jacobian(|x| dv(x[0], q, v), &[t])?;
            return Ok(j.column(0));
        }
        let n = self.n;
        let joint = |z: &[T]| self.eval(z[n], q, &z[..n]);
        let z: Vec<T> = v.iter().copied().chain(std::iter::once(t)).collect();
        (0..n).map(|i| fd_second(joint, &z, i, n)).collect()
    }

    /// Compares the analytic partials against central differences at the
    /// given samples; the relative tolerance is `1e-5 max(1, |value|)`.
    /// Samples where the field is not finite are skipped.
    pub fn validate_partials(&self, samples: &[(T, Vec<T>, Vec<T>)]) -> Result<()> {
        let tol = lit::<T>(1e-5).max(fd_step::<T>() * fd_step::<T>() * lit(1e5));
        let bare = Self::new(self.n, {
            let f = self.f.clone();
            move |t, q, v| f(t, q, v)
        });
        let close = |a: T, b: T| (a - b).abs() <= tol * T::one().max(b.abs());
        for (t, q, v) in samples {
            if !self.eval(*t, q, v).is_finite() {
                continue;
            }
            let checks: [(&str, bool); 3] = [
                ("time", self.dt.is_some()),
                ("q", self.dq.is_some()),
                ("v", self.dv.is_some()),
            ];
            for (which, present) in checks {
                if !present {
                    continue;
                }
                let (a, b) = match which {
                    "time" => (vec![self.partial_t(*t, q, v)?], vec![bare.partial_t(*t, q, v)?]),
                    "q" => (self.grad_q(*t, q, v)?, bare.grad_q(*t, q, v)?),
                    _ => (self.grad_v(*t, q, v)?, bare.grad_v(*t, q, v)?),
                };
                if let Some((x, y)) = a.iter().zip(&b).find(|(x, y)| !close(**x, **y)) {
                    return Err(Error::Precondition(format!(
                        "analytic {which} partial {x} disagrees with finite difference {y}"
                    )));
                }
            }
            if self.hvv.is_some() {
                let differenced = Self { hvv: None, ..self.clone() };
                let a = self.hess_vv(*t, q, v)?;
                let b = differenced.hess_vv(*t, q, v)?;
                if let Some((x, y)) = a.as_slice().iter().zip(b.as_slice()).find(|(x, y)| !close(**x, **y)) {
                    return Err(Error::Precondition(format!(
                        "analytic v-Hessian entry {x} disagrees with finite difference {y}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn finite<T: Real>(x: T, what: &str) -> Result<T> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::non_finite(what))
    }
}

fn finite_vec<T: Real>(x: Vec<T>, what: &str) -> Result<Vec<T>> {
    if x.iter().all(|c| c.is_finite()) {
        Ok(x)
    } else {
        Err(Error::non_finite(what))
    }
}

/// Vector field on the base chart, `q -> X(q)`.
#[derive(Clone)]
pub struct VectorFieldSpec<T> {
    n: usize,
    f: BaseVecFn<T>,
}

impl<T> fmt::Debug for VectorFieldSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorFieldSpec(n = {})", self.n)
    }
}

impl<T: Real> VectorFieldSpec<T> {
    pub fn new(n: usize, f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self { n, f: Arc::new(f) }
    }

    /// Coordinate field `d/dq^i`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        Self::new(n, move |_| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            e
        })
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, move |_| vec![T::zero(); n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn eval(&self, q: &[T]) -> Vec<T> {
        (self.f)(q)
    }

    pub fn eval_checked(&self, q: &[T]) -> Result<Vec<T>> {
        finite_vec(self.eval(q), "vector field evaluation")
    }

    pub fn sum(&self, other: &Self) -> Self {
        let (a, b) = (self.f.clone(), other.f.clone());
        Self::new(self.n, move |q| a(q).into_iter().zip(b(q)).map(|(x, y)| x + y).collect())
    }

    pub fn scaled(&self, c: T) -> Self {
        let a = self.f.clone();
        Self::new(self.n, move |q| a(q).into_iter().map(|x| x * c).collect())
    }

    /// `J[j][k] = dX^j / dq^k`.
    pub fn jacobian(&self, q: &[T]) -> Result<Matrix<T>> {
        fd_jacobian(|x| self.eval(x), q)
    }
}

/// `[X, Y]^j = X^k d_k Y^j - Y^k d_k X^j`.
pub fn lie_bracket<T: Real>(x: &VectorFieldSpec<T>, y: &VectorFieldSpec<T>, q: &[T]) -> Result<Vec<T>> {
    let jx = x.jacobian(q)?;
    let jy = y.jacobian(q)?;
    let xv = x.eval_checked(q)?;
    let yv = y.eval_checked(q)?;
    let a = jy.mul_vec(&xv);
    let b = jx.mul_vec(&yv);
    Ok(a.iter().zip(&b).map(|(a, b)| *a - *b).collect())
}

/// Vector field on the velocity phase space `(q, v)`, split into base and
/// fiber components.
#[derive(Clone)]
pub struct PhaseField<T> {
    n: usize,
    f: Arc<dyn Fn(&[T], &[T]) -> (Vec<T>, Vec<T>) + Send + Sync>,
}

impl<T> fmt::Debug for PhaseField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseField(n = {})", self.n)
    }
}

impl<T: Real> PhaseField<T> {
    pub fn new(n: usize, f: impl Fn(&[T], &[T]) -> (Vec<T>, Vec<T>) + Send + Sync + 'static) -> Self {
        Self { n, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, q: &[T], v: &[T]) -> (Vec<T>, Vec<T>) {
        (self.f)(q, v)
    }

    /// The same field as a vector field on the `2n`-dimensional chart.
    pub fn as_vector_field(&self) -> VectorFieldSpec<T> {
        let n = self.n;
        let f = self.f.clone();
        VectorFieldSpec::new(2 * n, move |z| {
            let (mut a, b) = f(&z[..n], &z[n..]);
            a.extend(b);
            a
        })
    }

    /// Derivative of a scalar field on `(t, q, v)` along this field at time `t`.
    pub fn apply(&self, field: &ScalarField<T>, t: T, q: &[T], v: &[T]) -> Result<T> {
        let (base, fiber) = self.eval(q, v);
        let gq = field.grad_q(t, q, v)?;
        let gv = field.grad_v(t, q, v)?;
        Ok(crate::scalar::dot(&base, &gq) + crate::scalar::dot(&fiber, &gv))
    }
}

/// `X^C = X^i d/dq^i + v^k (dX^j/dq^k) d/dv^j`.
pub fn complete_lift<T: Real>(x: &VectorFieldSpec<T>) -> PhaseField<T> {
    let x = x.clone();
    PhaseField::new(x.dim(), move |q, v| {
        let base = x.eval(q);
        let fiber = match x.jacobian(q) {
            Ok(j) => j.mul_vec(v),
            Err(_) => vec![T::nan(); v.len()],
        };
        (base, fiber)
    })
}

/// `X^V = X^i d/dv^i`.
pub fn vertical_lift<T: Real>(x: &VectorFieldSpec<T>) -> PhaseField<T> {
    let x = x.clone();
    let n = x.dim();
    PhaseField::new(n, move |q, _| (vec![T::zero(); n], x.eval(q)))
}

/// Covector field on the base chart.
#[derive(Clone)]
pub struct OneFormSpec<T> {
    n: usize,
    f: BaseVecFn<T>,
}

impl<T> fmt::Debug for OneFormSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OneFormSpec(n = {})", self.n)
    }
}

impl<T: Real> OneFormSpec<T> {
    pub fn new(n: usize, f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self { n, f: Arc::new(f) }
    }

    /// Exact form `df` with the gradient taken by finite differences.
    pub fn exact(n: usize, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self::new(n, move |q| fd_gradient(&f, q).unwrap_or_else(|_| vec![T::nan(); q.len()]))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn eval(&self, q: &[T]) -> Vec<T> {
        (self.f)(q)
    }
}

/// `gamma-bar(q, v) = gamma_i(q) v^i`, the fiber-linear function of a 1-form.
pub fn fiber_linear<T: Real>(gamma: &OneFormSpec<T>) -> ScalarField<T> {
    let g = gamma.clone();
    let g2 = gamma.clone();
    ScalarField::autonomous(gamma.dim(), move |q, v| crate::scalar::dot(&g.eval(q), v))
        .with_dv(move |_, q, _| g2.eval(q))
}

/// `D_ij = d_i w_j - d_j w_i`, antisymmetrized exactly.
pub fn d_oneform<T: Real>(w: &OneFormSpec<T>, q: &[T]) -> Result<Matrix<T>> {
    // jac[j][i] = d_i w_j
    let jac = fd_jacobian(|x| w.eval(x), q)?;
    let d = &jac.transpose() - &jac;
    Ok(d.antisymmetrized())
}
