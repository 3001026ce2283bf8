//! The geodesic problem on `K x K+ x K-` with intrinsic constraints.
//!
//! State `(g, zeta, g+, alpha, g-, beta)` with `zeta = g' g^{-1}`,
//! `alpha = g+^{-1} g+'`, `beta = g-' g-^{-1}` and Lagrangian
//! `L' = <zeta, zeta>/2`. `K+ x K-` acts by
//! `(h+, h-) . (g, g+, g-) = (h+ g h-^{-1}, g+ h+^{-1}, h- g-)`, which fixes
//! `g+ g g-`. Solutions have `zeta`, `alpha`, `beta` constant.
//!
//! Charts: `g = exp(X) g_c`, `g+ = g+_c exp(Y)`, `g- = exp(Z) g-_c`, so that
//! `zeta = dexp_X(X')`, `alpha = dexp_{-Y}(Y')`, `beta = dexp_Z(Z')`.

use std::sync::Arc;

use super::feher::{frozen_lagrangian, integrate_matrix};
use super::{five_point, integrate_on_charts, Algebras, AksParams};
use crate::error::{Error, Result};
use crate::geomcalc::{ScalarField, VectorFieldSpec};
use crate::integrate::{Aborted, TimeSpan};
use crate::liegroup::{adjoint, bracket, dexp, dexp_matrix, mat_exp, pairing};
use crate::linalg::Matrix;
use crate::mech::LagrangianSystem;
use crate::symmetry::{momentum_map, GroupAction, PrincipalConnection};

#[derive(Debug, Clone, PartialEq)]
pub struct UnreducedState {
    pub g: Matrix<f64>,
    pub zeta: Matrix<f64>,
    pub gp: Matrix<f64>,
    pub alpha: Matrix<f64>,
    pub gm: Matrix<f64>,
    pub beta: Matrix<f64>,
}

/// Chart centres for the three factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Centers {
    pub g: Matrix<f64>,
    pub gp: Matrix<f64>,
    pub gm: Matrix<f64>,
}

impl Centers {
    pub fn at(s: &UnreducedState) -> Self {
        Self { g: s.g.clone(), gp: s.gp.clone(), gm: s.gm.clone() }
    }
}

/// Residuals of the unreduced equations along a sampled trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnreducedResiduals {
    /// `g' g^{-1} - zeta`.
    pub zeta: f64,
    /// `g+^{-1} g+' - alpha`.
    pub plus: f64,
    /// `g-' g-^{-1} - beta`.
    pub minus: f64,
    /// `zeta'`.
    pub dynamics: f64,
}

impl UnreducedResiduals {
    pub fn max(&self) -> f64 {
        self.zeta.max(self.plus).max(self.minus).max(self.dynamics)
    }
}

#[derive(Debug, Clone)]
pub struct UnreducedSystem {
    params: AksParams,
    alg: Arc<Algebras>,
}

impl UnreducedSystem {
    pub fn new(params: AksParams) -> Self {
        let alg = Arc::new(params.algebras());
        Self { params, alg }
    }

    pub fn params(&self) -> &AksParams {
        &self.params
    }

    pub fn algebras(&self) -> &Algebras {
        &self.alg
    }

    /// Chart dimensions `(dim K, dim K+, dim K-)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.alg.full.dim(), self.alg.plus.dim(), self.alg.minus.dim())
    }

    /// A state on the momentum level `(mu, -nu)`: `g = g0`, `g+ = g- = 1`,
    /// `alpha = alpha0`, `beta = beta0`, and `zeta` fixed by the level.
    pub fn initial_state(&self) -> Result<UnreducedState> {
        let d = self.alg.d;
        let zeta = super::lax_from_group(
            &self.alg,
            &self.params.g0,
            &self.params.mu_dual(&self.alg),
            &self.params.nu_dual(&self.alg),
        )?;
        Ok(UnreducedState {
            g: self.params.g0.clone(),
            zeta,
            gp: Matrix::identity(d),
            alpha: self.params.alpha0.clone(),
            gm: Matrix::identity(d),
            beta: self.params.beta0.clone(),
        })
    }

    /// Chart coordinates `(x, y, z)` and velocities of a state, in the chart
    /// centred on it.
    pub fn chart_state(&self, s: &UnreducedState) -> (Centers, Vec<f64>, Vec<f64>) {
        let (nf, np, nm) = self.dims();
        let v: Vec<f64> = self
            .alg
            .full
            .coords(&s.zeta)
            .into_iter()
            .chain(self.alg.plus.coords(&s.alpha))
            .chain(self.alg.minus.coords(&s.beta))
            .collect();
        (Centers::at(s), vec![0.0; nf + np + nm], v)
    }

    /// The state at chart coordinates `q`, velocities `v`.
    pub fn state_at(&self, c: &Centers, q: &[f64], v: &[f64]) -> Result<UnreducedState> {
        let (nf, np, _) = self.dims();
        let a = &self.alg;
        let (x, y, z) = (&q[..nf], &q[nf..nf + np], &q[nf + np..]);
        let (xd, yd, zd) = (&v[..nf], &v[nf..nf + np], &v[nf + np..]);
        let (xm, ym, zm) = (a.full.combine(x), a.plus.combine(y), a.minus.combine(z));
        Ok(UnreducedState {
            g: &mat_exp(&xm)? * &c.g,
            zeta: dexp(&xm, &a.full.combine(xd)),
            gp: &c.gp * &mat_exp(&ym)?,
            alpha: dexp(&-&ym, &a.plus.combine(yd)),
            gm: &mat_exp(&zm)? * &c.gm,
            beta: dexp(&zm, &a.minus.combine(zd)),
        })
    }

    /// `L' = <zeta, zeta>/2` on the chart around `c`. It does not depend on
    /// the `K+`, `K-` velocities, so it is degenerate there.
    pub fn lagrangian(&self) -> LagrangianSystem<f64> {
        let (nf, np, nm) = self.dims();
        let n = nf + np + nm;
        let alg = self.alg.clone();
        let alg2 = self.alg.clone();
        LagrangianSystem::new(
            ScalarField::autonomous(n, move |q: &[f64], v: &[f64]| {
                let z = dexp(&alg.full.combine(&q[..nf]), &alg.full.combine(&v[..nf]));
                0.5 * pairing(&z, &z)
            })
            .with_dv(move |_, q, v| {
                let xm = alg2.full.combine(&q[..nf]);
                let z = dexp(&xm, &alg2.full.combine(&v[..nf]));
                let mut p = alg2.full.dual_coords(&dexp(&-&xm, &z));
                p.resize(n, 0.0);
                p
            }),
        )
        .with_label("aks_unreduced")
    }

    /// Structure constants of `k+ + k-` in the concatenated basis, stored
    /// `[k][a][b]`.
    pub fn structure_constants(&self) -> Vec<f64> {
        let (np, nm) = (self.alg.plus.dim(), self.alg.minus.dim());
        let m = np + nm;
        let mut c = vec![0.0; m * m * m];
        for (off, basis) in [(0, &self.alg.plus), (np, &self.alg.minus)] {
            let k = basis.dim();
            for a in 0..k {
                for b in 0..k {
                    let coords = basis.coords(&bracket(basis.element(a), basis.element(b)));
                    for (i, ck) in coords.into_iter().enumerate() {
                        c[((off + i) * m + off + a) * m + off + b] = ck;
                    }
                }
            }
        }
        c
    }

    /// Infinitesimal generators of the `K+ x K-` action on the chart around
    /// `c`. The generator of `(a, b)` moves `g` by `a - Ad_g b`, `g+` by
    /// `-a` (body) and `g-` by `b` (space).
    pub fn action(&self, c: &Centers) -> Result<GroupAction<f64>> {
        let (nf, np, nm) = self.dims();
        let n = nf + np + nm;
        let mut gens = Vec::with_capacity(np + nm);
        for e in 0..np + nm {
            let alg = self.alg.clone();
            let cg = c.g.clone();
            gens.push(VectorFieldSpec::new(n, move |q: &[f64]| {
                let (a, b) = if e < np {
                    (alg.plus.element(e).clone(), Matrix::zeros(alg.d, alg.d))
                } else {
                    (Matrix::zeros(alg.d, alg.d), alg.minus.element(e - np).clone())
                };
                generator(&alg, &cg, q, &a, &b).unwrap_or_else(|_| vec![f64::NAN; n])
            }));
        }
        GroupAction::new(gens, self.structure_constants())
    }

    /// The connection `omega = (-alpha, beta)` on the chart.
    pub fn connection(&self) -> PrincipalConnection<f64> {
        let (nf, np, nm) = self.dims();
        let n = nf + np + nm;
        let alg = self.alg.clone();
        PrincipalConnection::general(n, np + nm, move |q: &[f64]| {
            let y: Vec<f64> = q[nf..nf + np].iter().map(|v| -v).collect();
            let dp = dexp_matrix(&alg.plus, &y);
            let dm = dexp_matrix(&alg.minus, &q[nf + np..]);
            let mut m = Matrix::zeros(np + nm, n);
            for i in 0..np {
                for j in 0..np {
                    m[(i, nf + j)] = -dp[(i, j)];
                }
            }
            for i in 0..nm {
                for j in 0..nm {
                    m[(np + i, nf + np + j)] = dm[(i, j)];
                }
            }
            m
        })
    }

    /// `J(a, b) = <zeta, a - Ad_g b>` on the basis of `k+ + k-`.
    pub fn momentum(&self, s: &UnreducedState) -> Result<Vec<f64>> {
        let mut j = self.alg.plus.dual_coords(&s.zeta);
        let body = crate::liegroup::adjoint_inv(&s.g, &s.zeta)?;
        j.extend(self.alg.minus.dual_coords(&body).into_iter().map(|v| -v));
        Ok(j)
    }

    /// The same value through the chart Lagrangian and generators.
    pub fn momentum_from_chart(&self, s: &UnreducedState) -> Result<Vec<f64>> {
        let (c, q, v) = self.chart_state(s);
        momentum_map(&self.lagrangian(), &self.action(&c)?, 0.0, &q, &v)
    }

    /// `g = exp(t zeta) g0`, `g+ = g+0 exp(t alpha)`, `g- = exp(t beta) g-0`.
    pub fn exact_flow(&self, s0: &UnreducedState, t: f64) -> Result<UnreducedState> {
        Ok(UnreducedState {
            g: &mat_exp(&s0.zeta.scale(t))? * &s0.g,
            zeta: s0.zeta.clone(),
            gp: &s0.gp * &mat_exp(&s0.alpha.scale(t))?,
            alpha: s0.alpha.clone(),
            gm: &mat_exp(&s0.beta.scale(t))? * &s0.gm,
            beta: s0.beta.clone(),
        })
    }

    pub fn exact_trajectory(&self, s0: &UnreducedState, span: &TimeSpan<f64>) -> Result<Vec<(f64, UnreducedState)>> {
        (0..span.samples()).map(|k| Ok((span.time(k), self.exact_flow(s0, span.time(k) - span.t0)?))).collect()
    }

    /// Numerical integration: `g` on charts with `L'`, `g+` and `g-` by RK4
    /// on their constraint equations.
    pub fn simulate(
        &self,
        s0: &UnreducedState,
        span: &TimeSpan<f64>,
    ) -> std::result::Result<Vec<(f64, UnreducedState)>, Aborted<Vec<(f64, UnreducedState)>>> {
        let d = self.alg.d;
        let z = Matrix::zeros(d, d);
        let accel = |c: &Matrix<f64>, t: f64, x: &[f64], xd: &[f64]| {
            frozen_lagrangian(self.alg.clone(), c.clone(), z.clone(), z.clone(), z.clone(), z.clone()).solve_accel(t, x, xd)
        };
        let fail = |error: Error, time: f64| Aborted { partial: Vec::new(), error, time };
        let chart = integrate_on_charts(&self.alg.full, &s0.g, &s0.zeta, span, &accel).map_err(|ab| fail(ab.error, ab.time))?;
        let alpha = s0.alpha.clone();
        let beta = s0.beta.clone();
        let gp = integrate_matrix(&|m| m * &alpha, &s0.gp, span).map_err(|ab| fail(ab.error, ab.time))?;
        let gm = integrate_matrix(&|m| &beta * m, &s0.gm, span).map_err(|ab| fail(ab.error, ab.time))?;
        Ok(chart
            .into_iter()
            .zip(gp)
            .zip(gm)
            .map(|((c, gp), gm)| {
                (c.t, UnreducedState { g: c.g, zeta: c.zeta, gp, alpha: s0.alpha.clone(), gm, beta: s0.beta.clone() })
            })
            .collect())
    }

    /// Five-point residuals of the constraint and dynamical equations at
    /// every interior sample of a uniformly spaced trajectory.
    pub fn residuals(&self, traj: &[(f64, UnreducedState)]) -> Result<UnreducedResiduals> {
        if traj.len() < 5 {
            return Err(Error::Precondition("residuals need at least five samples".into()));
        }
        let dt = traj[1].0 - traj[0].0;
        let mut r = UnreducedResiduals { zeta: 0.0, plus: 0.0, minus: 0.0, dynamics: 0.0 };
        for k in 2..traj.len() - 2 {
            let w = &traj[k - 2..=k + 2];
            let s = &w[2].1;
            let pick = |f: fn(&UnreducedState) -> &Matrix<f64>| five_point(&w.iter().map(|(_, s)| f(s)).collect::<Vec<_>>(), dt);
            let gd = pick(|s| &s.g);
            let gpd = pick(|s| &s.gp);
            let gmd = pick(|s| &s.gm);
            let zd = pick(|s| &s.zeta);
            r.zeta = r.zeta.max((&(&gd * &s.g.inverse()?) - &s.zeta).max_abs());
            r.plus = r.plus.max((&(&s.gp.inverse()? * &gpd) - &s.alpha).max_abs());
            r.minus = r.minus.max((&(&gmd * &s.gm.inverse()?) - &s.beta).max_abs());
            r.dynamics = r.dynamics.max(zd.max_abs());
        }
        Ok(r)
    }

    /// Largest change of each momentum component along a trajectory.
    pub fn momentum_drift(&self, traj: &[(f64, UnreducedState)]) -> Result<f64> {
        let j0 = self.momentum(&traj[0].1)?;
        let mut worst = 0.0f64;
        for (_, s) in traj {
            worst = worst.max(super::vec_gap(&self.momentum(s)?, &j0));
        }
        Ok(worst)
    }
}

/// Chart velocity of the generator of `(a, b)` at chart point `q`.
fn generator(alg: &Algebras, cg: &Matrix<f64>, q: &[f64], a: &Matrix<f64>, b: &Matrix<f64>) -> Result<Vec<f64>> {
    let (nf, np) = (alg.full.dim(), alg.plus.dim());
    let (x, y, z) = (&q[..nf], &q[nf..nf + np], &q[nf + np..]);
    let g = &mat_exp(&alg.full.combine(x))? * cg;
    let dg = a - &adjoint(&g, b)?;
    let my: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut out = dexp_matrix(&alg.full, x).solve(&alg.full.coords(&dg))?;
    out.extend(dexp_matrix(&alg.plus, &my).solve(&alg.plus.coords(&-a))?);
    out.extend(dexp_matrix(&alg.minus, z).solve(&alg.minus.coords(b))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::check_invariance;

    fn moved(sys: &UnreducedSystem) -> (Centers, Vec<f64>, Vec<f64>) {
        let s = sys.initial_state().unwrap();
        let (c, q, v) = sys.chart_state(&s);
        let q: Vec<f64> = q.iter().enumerate().map(|(i, _)| 0.05 * ((i % 5) as f64) - 0.1).collect();
        (c, q, v)
    }

    #[test]
    fn action_is_a_symmetry_with_the_right_brackets() {
        for p in [AksParams::sl2(), AksParams::sl3()] {
            let sys = UnreducedSystem::new(p);
            let (c, q, v) = moved(&sys);
            let action = sys.action(&c).unwrap();
            assert!(action.bracket_defect(&[q.clone()]).unwrap() < 1e-6);
            let report = check_invariance(&sys.lagrangian(), &action, &[(0.0, q.clone(), v)]);
            assert!(report.pass, "{report:?}");
            assert!(sys.connection().generator_defect(&action, &[q]) < 1e-12);
        }
    }

    #[test]
    fn momentum_matches_the_chart_momentum_map() {
        let sys = UnreducedSystem::new(AksParams::sl3());
        let s = sys.initial_state().unwrap();
        let a = sys.momentum(&s).unwrap();
        let b = sys.momentum_from_chart(&s).unwrap();
        assert!(super::super::vec_gap(&a, &b) < 1e-12);
        // Level (mu, -nu).
        let alg = sys.algebras();
        let mut level = sys.params().mu_dual(alg);
        level.extend(sys.params().nu_dual(alg).iter().map(|v| -v));
        assert!(super::super::vec_gap(&a, &level) < 1e-12);
    }

    #[test]
    fn exact_flow_solves_the_system() {
        let sys = UnreducedSystem::new(AksParams::sl2());
        let s0 = sys.initial_state().unwrap();
        let span = TimeSpan::new(0.0, 2.0, 1e-2).unwrap();
        let traj = sys.exact_trajectory(&s0, &span).unwrap();
        assert!(sys.residuals(&traj).unwrap().max() < 1e-9);
        assert!(sys.momentum_drift(&traj).unwrap() < 1e-12);
    }

    #[test]
    fn integration_follows_the_exact_flow() {
        let sys = UnreducedSystem::new(AksParams::sl2());
        let s0 = sys.initial_state().unwrap();
        let span = TimeSpan::new(0.0, 2.0, 1e-2).unwrap();
        let num = sys.simulate(&s0, &span).unwrap();
        let exact = sys.exact_trajectory(&s0, &span).unwrap();
        for ((_, a), (_, b)) in num.iter().zip(&exact) {
            assert!((&a.g - &b.g).max_abs() < 1e-8);
            assert!((&a.gp - &b.gp).max_abs() < 1e-10);
            assert!((&a.gm - &b.gm).max_abs() < 1e-10);
        }
        assert!(sys.momentum_drift(&num).unwrap() < 1e-8);
    }
}
