//! The Fehér Lagrangian on `K x k+ x k-`.
//!
//! `alpha` and `beta` carry no time derivatives. Along solutions they are
//! fixed by stationarity up to a gauge: any element of the stabilizers of
//! `mu` and `nu` may be added. The gauge used here keeps them constant in
//! time, re-solving and projecting at every Runge-Kutta stage.
//!
//! The group variable is integrated on exponential charts `g = exp(X) g_c`
//! with the frozen Lagrangian
//! `L(x, x') = <Lambda, Lambda>/2 - <alpha, mu> - <beta, nu>`,
//! `zeta = dexp_X(X')`.

use std::sync::Arc;

use super::{
    integrate_on_charts, lax, lax_from_group, project_stabilizer, solve_multipliers, trace_powers, Algebras,
    AksParams, ChartSample, FeherState,
};
use crate::error::{Error, Result};
use crate::geomcalc::ScalarField;
use crate::integrate::{integrate_ode, rk4_step, Aborted, TimeSpan};
use crate::liegroup::{adjoint, bracket, dexp, dexp_derivative, dexp_matrix, mat_exp, pairing};
use crate::linalg::Matrix;
use crate::mech::{CartanPoint, Frame, LagrangianSystem};

/// The frozen chart Lagrangian around `center`.
pub fn frozen_lagrangian(
    alg: Arc<Algebras>,
    center: Matrix<f64>,
    alpha: Matrix<f64>,
    beta: Matrix<f64>,
    mu: Matrix<f64>,
    nu: Matrix<f64>,
) -> LagrangianSystem<f64> {
    let n = alg.full.dim();
    let offset = pairing(&alpha, &mu) + pairing(&beta, &nu);
    // Ad_{g_c} beta, so that Ad_g beta = Ad_{exp X}(c_beta).
    let c_beta = adjoint(&center, &beta).unwrap_or_else(|_| Matrix::from_fn(alg.d, alg.d, |_, _| f64::NAN));
    let frozen = Arc::new((alg, alpha, c_beta));
    let lam = {
        let frozen = frozen.clone();
        move |x: &[f64], xd: &[f64]| -> Option<(Matrix<f64>, Matrix<f64>)> {
            let (alg, alpha, c_beta) = &*frozen;
            let xm = alg.full.combine(x);
            let e = mat_exp(&xm).ok()?;
            let ei = mat_exp(&-&xm).ok()?;
            let zeta = dexp(&xm, &alg.full.combine(xd));
            let ad = &(&e * c_beta) * &ei;
            Some((&(&zeta + alpha) + &ad, xm))
        }
    };
    let (lam2, lam3) = (lam.clone(), lam.clone());
    let (f2, f3) = (frozen.clone(), frozen.clone());
    let gram = frozen.0.full.gram();
    LagrangianSystem::new(
        ScalarField::autonomous(n, move |x: &[f64], xd: &[f64]| match lam(x, xd) {
            Some((l, _)) => 0.5 * pairing(&l, &l) - offset,
            None => f64::NAN,
        })
        .with_dv(move |_, x, xd| match lam2(x, xd) {
            Some((l, xm)) => frozen.0.full.dual_coords(&dexp(&-&xm, &l)),
            None => vec![f64::NAN; n],
        })
        // dL/dx_k = <Lambda, d_t eta_k> + <[Lambda, alpha], eta_k>, eta_k = dexp_X E_k.
        .with_dq(move |_, x, xd| match lam3(x, xd) {
            Some((l, xm)) => {
                let (alg, alpha, _) = &*f2;
                let xdm = alg.full.combine(xd);
                let along = dexp_derivative(&-&xm, &-&xdm, &l);
                alg.full.dual_coords(&(&along + &dexp(&-&xm, &bracket(&l, alpha))))
            }
            None => vec![f64::NAN; n],
        })
        .with_hess_vv(move |_, x, _| {
            let d = dexp_matrix(&f3.0.full, x);
            &(&d.transpose() * &gram) * &d
        }),
    )
    .with_label("feher")
}

/// Spectral invariants and state along a Fehér trajectory.
#[derive(Debug, Clone)]
pub struct AksSample {
    pub t: f64,
    pub state: FeherState,
    pub lambda: Matrix<f64>,
    /// Present for chart integrations.
    pub chart: Option<ChartSample>,
}

#[derive(Debug, Clone, Default)]
pub struct AksRun {
    pub samples: Vec<AksSample>,
}

impl AksRun {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(tr Lambda^2, tr Lambda^3)` per sample.
    pub fn invariants(&self) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| {
                let p = trace_powers(&s.lambda, 3);
                (p[0], p[1])
            })
            .collect()
    }

    /// Largest deviation of each invariant from its initial value.
    pub fn invariant_drift(&self) -> (f64, f64) {
        let inv = self.invariants();
        let Some(&(a0, b0)) = inv.first() else { return (0.0, 0.0) };
        inv.iter().fold((0.0f64, 0.0f64), |(da, db), &(a, b)| (da.max((a - a0).abs()), db.max((b - b0).abs())))
    }

    /// Largest entrywise gap in `g` and `zeta` against a run on the same
    /// time grid.
    pub fn max_gap(&self, other: &AksRun) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!("runs of {} and {} samples", self.len(), other.len())));
        }
        let mut gap = 0.0f64;
        for (a, b) in self.samples.iter().zip(&other.samples) {
            if (a.t - b.t).abs() > 1e-9 {
                return Err(Error::Precondition("runs are on different time grids".into()));
            }
            gap = gap.max((&a.state.g - &b.state.g).max_abs()).max((&a.state.zeta - &b.state.zeta).max_abs());
        }
        Ok(gap)
    }
}

#[derive(Debug, Clone)]
pub struct FeherSystem {
    params: AksParams,
    alg: Arc<Algebras>,
    mu_dual: Vec<f64>,
    nu_dual: Vec<f64>,
}

impl FeherSystem {
    pub fn new(params: AksParams) -> Self {
        let alg = params.algebras();
        let mu_dual = params.mu_dual(&alg);
        let nu_dual = params.nu_dual(&alg);
        Self { params, alg: Arc::new(alg), mu_dual, nu_dual }
    }

    pub fn params(&self) -> &AksParams {
        &self.params
    }

    pub fn algebras(&self) -> &Algebras {
        &self.alg
    }

    /// Stationary `alpha`, `beta` at `(g, zeta)`, projected onto the
    /// stabilizers.
    pub fn multipliers(&self, g: &Matrix<f64>, zeta: &Matrix<f64>) -> Result<(Matrix<f64>, Matrix<f64>)> {
        let (a, b) = solve_multipliers(&self.alg, g, zeta, &self.mu_dual, &self.nu_dual)?;
        Ok((self.project_alpha(&a), self.project_beta(&b)))
    }

    pub fn project_alpha(&self, a: &Matrix<f64>) -> Matrix<f64> {
        project_stabilizer(&self.alg.plus, &self.mu_dual, a)
    }

    pub fn project_beta(&self, b: &Matrix<f64>) -> Matrix<f64> {
        project_stabilizer(&self.alg.minus, &self.nu_dual, b)
    }

    /// The Lax matrix fixed by `g` alone.
    pub fn lax_at(&self, g: &Matrix<f64>) -> Result<Matrix<f64>> {
        lax_from_group(&self.alg, g, &self.mu_dual, &self.nu_dual)
    }

    /// The state over `g` with multipliers `alpha`, `beta` (projected).
    pub fn consistent_state(&self, g: &Matrix<f64>, alpha: &Matrix<f64>, beta: &Matrix<f64>) -> Result<FeherState> {
        let alpha = self.project_alpha(alpha);
        let beta = self.project_beta(beta);
        let lam = self.lax_at(g)?;
        let zeta = &(&lam - &alpha) - &adjoint(g, &beta)?;
        Ok(FeherState { g: g.clone(), zeta, alpha, beta })
    }

    /// Consistent state built from `g0`, `alpha0`, `beta0`. `zeta0` of the
    /// parameters is not used: it is fixed by the other three.
    pub fn initial_state(&self) -> Result<FeherState> {
        self.consistent_state(&self.params.g0, &self.params.alpha0, &self.params.beta0)
    }

    /// Largest violation of the stationarity conditions at `s`.
    pub fn stationarity_defect(&self, s: &FeherState) -> Result<f64> {
        let lam = s.lax()?;
        let body = crate::liegroup::adjoint_inv(&s.g, &lam)?;
        let plus = self.alg.plus.dual_coords(&lam);
        let minus = self.alg.minus.dual_coords(&body);
        Ok(plus
            .iter()
            .zip(&self.mu_dual)
            .chain(minus.iter().zip(&self.nu_dual))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn frozen(&self, center: &Matrix<f64>, alpha: &Matrix<f64>, beta: &Matrix<f64>) -> LagrangianSystem<f64> {
        frozen_lagrangian(
            self.alg.clone(),
            center.clone(),
            alpha.clone(),
            beta.clone(),
            self.params.mu.clone(),
            self.params.nu.clone(),
        )
    }

    /// Fehér Lagrangian on `q = (x, a, b)` over the chart `g = exp(X) center`,
    /// where `a`, `b` are the `K+`, `K-` coordinates of `alpha`, `beta`. The
    /// velocities of `a`, `b` do not enter, so their mass rows vanish and the
    /// system is singular as a whole; see [`Self::split_accel`].
    pub fn feher_system(&self, center: &Matrix<f64>) -> LagrangianSystem<f64> {
        let alg = self.alg.clone();
        let (n, np, nm) = (alg.full.dim(), alg.plus.dim(), alg.minus.dim());
        let (mu, nu) = (self.params.mu.clone(), self.params.nu.clone());
        let center = center.clone();
        let lam = move |z: &[f64], zd: &[f64]| -> Option<(Matrix<f64>, Matrix<f64>, Matrix<f64>, Matrix<f64>)> {
            let xm = alg.full.combine(&z[..n]);
            let alpha = alg.plus.combine(&z[n..n + np]);
            let beta = alg.minus.combine(&z[n + np..]);
            let g = &mat_exp(&xm).ok()? * &center;
            let zeta = dexp(&xm, &alg.full.combine(&zd[..n]));
            let l = lax(&g, &zeta, &alpha, &beta).ok()?;
            Some((l, xm, alpha, beta))
        };
        let lam2 = lam.clone();
        let full = self.alg.clone();
        LagrangianSystem::new(
            ScalarField::autonomous(n + np + nm, move |z: &[f64], zd: &[f64]| match lam(z, zd) {
                Some((l, _, alpha, beta)) => 0.5 * pairing(&l, &l) - pairing(&alpha, &mu) - pairing(&beta, &nu),
                None => f64::NAN,
            })
            .with_dv(move |_, z, zd| match lam2(z, zd) {
                Some((l, xm, _, _)) => {
                    let mut p = full.full.dual_coords(&dexp(&-&xm, &l));
                    p.resize(n + np + nm, 0.0);
                    p
                }
                None => vec![f64::NAN; n + np + nm],
            }),
        )
        .with_label("feher")
    }

    /// Differential-algebraic split of [`Self::feher_system`]: `alpha`,
    /// `beta` from the linear stationarity solve (projected), then the
    /// `x`-block of the generic Euler-Lagrange equations with `a`, `b` held
    /// fixed. Returns the `x` accelerations and the multipliers.
    pub fn split_accel(
        &self,
        system: &LagrangianSystem<f64>,
        center: &Matrix<f64>,
        x: &[f64],
        xd: &[f64],
    ) -> Result<(Vec<f64>, Matrix<f64>, Matrix<f64>)> {
        let full = &self.alg.full;
        let n = full.dim();
        let g = super::chart_point(full, center, x)?;
        let zeta = super::chart_velocity(full, x, xd);
        let (alpha, beta) = self.multipliers(&g, &zeta)?;
        let mut z = x.to_vec();
        z.extend(self.alg.plus.coords(&alpha));
        z.extend(self.alg.minus.coords(&beta));
        let mut zd = xd.to_vec();
        zd.resize(z.len(), 0.0);
        let l = system.lagrangian();
        let m = l.hess_vv(0.0, &z, &zd)?;
        let gq = l.grad_q(0.0, &z, &zd)?;
        let mv = l.hess_vq_dir(0.0, &z, &zd, &zd)?;
        let block = Matrix::from_fn(n, n, |i, j| m[(i, j)]);
        let rhs: Vec<f64> = (0..n).map(|i| gq[i] - mv[i]).collect();
        Ok((block.solve(&rhs)?, alpha, beta))
    }

    /// Chart integration from a state. `alpha`, `beta` are recomputed from
    /// the state at every stage.
    pub fn simulate(&self, s0: &FeherState, span: &TimeSpan<f64>) -> std::result::Result<AksRun, Aborted<AksRun>> {
        let full = &self.alg.full;
        let accel = |center: &Matrix<f64>, t: f64, x: &[f64], xd: &[f64]| -> Result<Vec<f64>> {
            let g = super::chart_point(full, center, x)?;
            let zeta = super::chart_velocity(full, x, xd);
            let (a, b) = self.multipliers(&g, &zeta)?;
            self.frozen(center, &a, &b).solve_accel(t, x, xd)
        };
        let to_run = |chart: Vec<ChartSample>| -> Result<AksRun> {
            let mut samples = Vec::with_capacity(chart.len());
            for c in chart {
                let (alpha, beta) = self.multipliers(&c.g, &c.zeta)?;
                let lambda = lax(&c.g, &c.zeta, &alpha, &beta)?;
                let state = FeherState { g: c.g.clone(), zeta: c.zeta.clone(), alpha, beta };
                samples.push(AksSample { t: c.t, state, lambda, chart: Some(c) });
            }
            Ok(AksRun { samples })
        };
        match integrate_on_charts(full, &s0.g, &s0.zeta, span, &accel) {
            Ok(chart) => to_run(chart).map_err(|error| Aborted { partial: AksRun::default(), error, time: span.t1 }),
            Err(ab) => Err(Aborted {
                partial: to_run(ab.partial).unwrap_or_default(),
                error: ab.error,
                time: ab.time,
            }),
        }
    }

    /// Reference integration of the first-order Lax system with frozen
    /// `alpha`, `beta`: `g' = Xi g`, `h' = -h Xi` with `h = g^{-1}`,
    /// `Lambda' = [Lambda, alpha]`, `Xi = Lambda - alpha - g beta h`.
    /// Every `stride`-th sample is kept.
    pub fn simulate_lax(
        &self,
        s0: &FeherState,
        span: &TimeSpan<f64>,
        stride: usize,
    ) -> std::result::Result<AksRun, Aborted<AksRun>> {
        let d = self.alg.d;
        let dd = d * d;
        let (alpha, beta) = (&s0.alpha, &s0.beta);
        let lam0 = match s0.lax().and_then(|l| Ok((l, s0.g.inverse()?))) {
            Ok(x) => x,
            Err(error) => return Err(Aborted { partial: AksRun::default(), error, time: span.t0 }),
        };
        let unpack = |s: &[f64]| {
            (
                Matrix::from_row_slice(d, d, &s[..dd]),
                Matrix::from_row_slice(d, d, &s[dd..2 * dd]),
                Matrix::from_row_slice(d, d, &s[2 * dd..]),
            )
        };
        let xi = |g: &Matrix<f64>, h: &Matrix<f64>, l: &Matrix<f64>| &(l - alpha) - &(&(g * beta) * h);
        let f = |_t: f64, s: &[f64]| -> Result<Vec<f64>> {
            let (g, h, l) = unpack(s);
            let x = xi(&g, &h, &l);
            let mut out = Vec::with_capacity(3 * dd);
            out.extend_from_slice((&x * &g).as_slice());
            out.extend_from_slice((-&(&h * &x)).as_slice());
            out.extend_from_slice(bracket(&l, alpha).as_slice());
            Ok(out)
        };
        let sample = |t: f64, s: &[f64]| {
            let (g, h, l) = unpack(s);
            let zeta = xi(&g, &h, &l);
            AksSample { t, state: FeherState { g, zeta, alpha: alpha.clone(), beta: beta.clone() }, lambda: l, chart: None }
        };
        let stride = stride.max(1);
        let mut state: Vec<f64> = s0.g.as_slice().iter().chain(lam0.1.as_slice()).chain(lam0.0.as_slice()).copied().collect();
        let mut run = AksRun { samples: vec![sample(span.t0, &state)] };
        for k in 0..span.steps() {
            let t = span.time(k);
            state = match rk4_step(&f, &state, t, span.dt) {
                Ok(s) => s,
                Err(error) => return Err(Aborted { partial: run, error, time: t }),
            };
            if (k + 1) % stride == 0 {
                run.samples.push(sample(span.time(k + 1), &state));
            }
        }
        Ok(run)
    }

    /// Largest quasi-velocity Euler-Lagrange residual over windows of five
    /// consecutive samples lying in one chart, checking every `stride`-th
    /// window. Each window uses the frozen Lagrangian of its middle sample.
    pub fn max_el_residual(&self, run: &AksRun, frame: &Frame<f64>, stride: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut checked = 0usize;
        let charts: Vec<&ChartSample> = run
            .samples
            .iter()
            .map(|s| s.chart.as_ref().ok_or_else(|| Error::Precondition("residuals need a chart run".into())))
            .collect::<Result<_>>()?;
        let mut k = 2;
        while k + 2 < charts.len() {
            let w = &charts[k - 2..=k + 2];
            if w.iter().all(|c| c.chart == w[2].chart) {
                let mid = &run.samples[k].state;
                let sys = self.frozen(&w[2].center, &mid.alpha, &mid.beta);
                let window: Vec<CartanPoint<f64>> = w
                    .iter()
                    .map(|c| Ok(CartanPoint::new(c.t, c.x.clone(), c.xd.clone(), sys.fiber_derivative(c.t, &c.x, &c.xd)?)))
                    .collect::<Result<_>>()?;
                worst = worst.max(sys.el_residuals(frame, &window)?.max_abs());
                checked += 1;
                k += stride.max(1);
            } else {
                k += 1;
            }
        }
        if checked == 0 {
            return Err(Error::Precondition("no five-sample window inside a single chart".into()));
        }
        Ok(worst)
    }
}

/// Integrates the matrix ODE `s' = f(s)` and keeps all samples.
pub(crate) fn integrate_matrix(
    f: &dyn Fn(&Matrix<f64>) -> Matrix<f64>,
    m0: &Matrix<f64>,
    span: &TimeSpan<f64>,
) -> std::result::Result<Vec<Matrix<f64>>, Aborted<Vec<Matrix<f64>>>> {
    let (r, c) = (m0.rows(), m0.cols());
    let rhs = |_t: f64, s: &[f64]| -> Result<Vec<f64>> { Ok(f(&Matrix::from_row_slice(r, c, s)).as_slice().to_vec()) };
    let back = |v: Vec<Vec<f64>>| v.into_iter().map(|s| Matrix::from_row_slice(r, c, &s)).collect::<Vec<_>>();
    integrate_ode(&rhs, m0.as_slice(), span)
        .map(back)
        .map_err(|ab| Aborted { partial: back(ab.partial), error: ab.error, time: ab.time })
}
