//! Fixed-step RK4 integration and trajectory diagnostics.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mech::{CartanPoint, ELResiduals, Frame, LagrangianSystem};
use crate::scalar::{all_finite, lit, Real};

/// Uniform time grid `t0 + k dt`, `k = 0..=floor((t1 - t0) / dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpan<T> {
    pub t0: T,
    pub t1: T,
    pub dt: T,
}

impl<T: Real> TimeSpan<T> {
    pub fn new(t0: T, t1: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::Precondition(format!("empty time span [{t0}, {t1}]")));
        }
        Ok(Self { t0, t1, dt })
    }

    /// Number of steps; a relative slack of `1e-9` absorbs spans that are an
    /// exact multiple of `dt` up to rounding.
    pub fn steps(&self) -> usize {
        let ratio = (self.t1 - self.t0) / self.dt;
        (ratio + lit::<T>(1e-9) * T::one().max(ratio)).floor().to_usize().unwrap_or(0)
    }

    pub fn samples(&self) -> usize {
        self.steps() + 1
    }

    #[inline]
    pub fn time(&self, k: usize) -> T {
        self.t0 + lit::<T>(k as f64) * self.dt
    }
}

/// One classical Runge-Kutta step of `s' = f(t, s)`.
pub fn rk4_step<T: Real>(f: &dyn Fn(T, &[T]) -> Result<Vec<T>>, s: &[T], t: T, dt: T) -> Result<Vec<T>> {
    let half = dt * lit(0.5);
    let stage = |x: &[T], k: &[T], h: T| -> Vec<T> { x.iter().zip(k).map(|(a, b)| *a + h * *b).collect() };
    let k1 = checked(f(t, s)?, 1)?;
    let k2 = checked(f(t + half, &stage(s, &k1, half))?, 2)?;
    let k3 = checked(f(t + half, &stage(s, &k2, half))?, 3)?;
    let k4 = checked(f(t + dt, &stage(s, &k3, dt))?, 4)?;
    let sixth = dt / lit(6.0);
    let two = lit::<T>(2.0);
    let out: Vec<T> =
        (0..s.len()).map(|i| s[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i])).collect();
    checked(out, 0)
}

fn checked<T: Real>(k: Vec<T>, stage: usize) -> Result<Vec<T>> {
    if all_finite(&k) {
        Ok(k)
    } else if stage == 0 {
        Err(Error::non_finite("RK4 update"))
    } else {
        Err(Error::non_finite(format!("RK4 stage {stage}")))
    }
}

/// An integration that stopped early. `partial` holds every sample computed
/// before the failure.
#[derive(Debug, Clone)]
pub struct Aborted<P> {
    pub partial: P,
    pub error: Error,
    pub time: f64,
}

impl<P> fmt::Display for Aborted<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "integration aborted at t = {}: {}", self.time, self.error)
    }
}

impl<P: fmt::Debug> std::error::Error for Aborted<P> {}

/// Integrates a first-order system on the grid of `span`, returning the
/// sampled states.
pub fn integrate_ode<T: Real>(
    f: &dyn Fn(T, &[T]) -> Result<Vec<T>>,
    s0: &[T],
    span: &TimeSpan<T>,
) -> std::result::Result<Vec<Vec<T>>, Aborted<Vec<Vec<T>>>> {
    let steps = span.steps();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(s0.to_vec());
    for k in 0..steps {
        let t = span.time(k);
        match rk4_step(f, &states[k], t, span.dt) {
            Ok(s) => states.push(s),
            Err(error) => {
                return Err(Aborted { partial: states, error, time: t.to_f64().unwrap_or(f64::NAN) });
            }
        }
    }
    Ok(states)
}

pub type DiagnosticFn<T> = Arc<dyn Fn(&LagrangianSystem<T>, &CartanPoint<T>) -> Result<T> + Send + Sync>;

/// A named scalar evaluated on every sample after integration.
#[derive(Clone)]
pub struct Diagnostic<T> {
    pub name: String,
    f: DiagnosticFn<T>,
}

impl<T> fmt::Debug for Diagnostic<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Diagnostic({})", self.name)
    }
}

impl<T: Real> Diagnostic<T> {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&LagrangianSystem<T>, &CartanPoint<T>) -> Result<T> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn energy() -> Self {
        Self::new("energy", |sys, pt| sys.energy(pt.t, &pt.q, &pt.v))
    }

    pub fn lagrangian() -> Self {
        Self::new("lagrangian", |sys, pt| sys.lagrangian_value(pt.t, &pt.q, &pt.v))
    }

    pub fn eval(&self, sys: &LagrangianSystem<T>, pt: &CartanPoint<T>) -> Result<T> {
        (self.f)(sys, pt)
    }
}

/// Sampled solution curve `t -> s_0(t, q(t), q'(t))` plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub n: usize,
    pub times: Vec<T>,
    /// `(q, v)` per sample, length `2n`.
    pub states: Vec<Vec<T>>,
    pub momenta: Vec<Vec<T>>,
    pub diagnostics: Vec<(String, Vec<T>)>,
}

impl<T: Real> Trajectory<T> {
    pub fn empty(n: usize) -> Self {
        Self { n, times: Vec::new(), states: Vec::new(), momenta: Vec::new(), diagnostics: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn q(&self, k: usize) -> &[T] {
        &self.states[k][..self.n]
    }

    pub fn v(&self, k: usize) -> &[T] {
        &self.states[k][self.n..]
    }

    pub fn point(&self, k: usize) -> CartanPoint<T> {
        CartanPoint::new(self.times[k], self.q(k).to_vec(), self.v(k).to_vec(), self.momenta[k].clone())
    }

    pub fn channel(&self, name: &str) -> Option<&[T]> {
        self.diagnostics.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }

    /// `max_k |c_k - c_0|` for a diagnostic channel.
    pub fn drift(&self, name: &str) -> Option<T> {
        let c = self.channel(name)?;
        let c0 = *c.first()?;
        Some(c.iter().fold(T::zero(), |m, x| m.max((*x - c0).abs())))
    }

    /// Quasi-EL residuals for every sample with two neighbours on each side.
    pub fn residuals(&self, sys: &LagrangianSystem<T>, frame: &Frame<T>) -> Result<Vec<ELResiduals<T>>> {
        if self.len() < 5 {
            return Ok(Vec::new());
        }
        let pts: Vec<CartanPoint<T>> = (0..self.len()).map(|k| self.point(k)).collect();
        pts.windows(5).map(|w| sys.el_residuals(frame, w)).collect()
    }

    /// Largest residual component of any kind over the trajectory.
    pub fn max_residual(&self, sys: &LagrangianSystem<T>, frame: &Frame<T>) -> Result<T> {
        Ok(self.residuals(sys, frame)?.iter().fold(T::zero(), |m, r| m.max(r.max_abs())))
    }

    /// Evaluates and appends a diagnostic channel.
    pub fn record(&mut self, sys: &LagrangianSystem<T>, diag: &Diagnostic<T>) -> Result<()> {
        let values = (0..self.len()).map(|k| diag.eval(sys, &self.point(k))).collect::<Result<Vec<_>>>()?;
        self.diagnostics.push((diag.name.clone(), values));
        Ok(())
    }

    /// Appends the residual-norm channel `el_residual`; the two samples at
    /// each end reuse the nearest full window.
    pub fn record_residual_norms(&mut self, sys: &LagrangianSystem<T>, frame: &Frame<T>) -> Result<()> {
        let r = self.residuals(sys, frame)?;
        let values = (0..self.len())
            .map(|k| {
                if r.is_empty() {
                    T::nan()
                } else {
                    r[k.saturating_sub(2).min(r.len() - 1)].max_abs()
                }
            })
            .collect();
        self.diagnostics.push(("el_residual".into(), values));
        Ok(())
    }
}

/// Integrates `q'' = solve_accel(t, q, q')` from `(q0, v0)`, records momenta
/// through the canonical section and then the requested diagnostics.
pub fn simulate<T: Real>(
    sys: &LagrangianSystem<T>,
    q0: &[T],
    v0: &[T],
    span: &TimeSpan<T>,
    diagnostics: &[Diagnostic<T>],
) -> std::result::Result<Trajectory<T>, Aborted<Trajectory<T>>> {
    let n = sys.dim();
    if q0.len() != n || v0.len() != n {
        let error = Error::Dimension(format!("initial condition of sizes {}/{} for a {n}-dimensional system", q0.len(), v0.len()));
        return Err(Aborted { partial: Trajectory::empty(n), error, time: span.t0.to_f64().unwrap_or(f64::NAN) });
    }
    let rhs = |t: T, s: &[T]| -> Result<Vec<T>> {
        let (q, v) = s.split_at(n);
        let a = sys.solve_accel(t, q, v)?;
        Ok(v.iter().copied().chain(a).collect())
    };
    let s0: Vec<T> = q0.iter().chain(v0).copied().collect();
    let (states, failure) = match integrate_ode(&rhs, &s0, span) {
        Ok(s) => (s, None),
        Err(a) => (a.partial, Some((a.error, a.time))),
    };
    let times: Vec<T> = (0..states.len()).map(|k| span.time(k)).collect();
    let mut traj = Trajectory { n, times, states, momenta: Vec::new(), diagnostics: Vec::new() };
    let finish = |traj: &mut Trajectory<T>| -> Result<()> {
        for k in 0..traj.len() {
            let p = sys.fiber_derivative(traj.times[k], traj.q(k), traj.v(k))?;
            traj.momenta.push(p);
        }
        for d in diagnostics {
            traj.record(sys, d)?;
        }
        Ok(())
    };
    let post = finish(&mut traj);
    match (failure, post) {
        (None, Ok(())) => Ok(traj),
        (Some((error, time)), _) => Err(Aborted { partial: traj, error, time }),
        (None, Err(error)) => {
            let time = span.t1.to_f64().unwrap_or(f64::NAN);
            Err(Aborted { partial: traj, error, time })
        }
    }
}
