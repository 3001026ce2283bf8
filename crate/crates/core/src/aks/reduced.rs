//! Routh reduction of the unreduced system by `K+ x K-`.
//!
//! The base is `K` with `g' = g+ g g-`; the connection is
//! `omega(zeta, alpha, beta) = (-alpha, beta)`. A reduced point carries
//! `(g', zeta')`, orbit points `eta+ = mu o Ad_{g+^{-1}}`,
//! `eta- = nu_R o Ad_{g-}` (with `nu_R = -nu`), and the adjoint-bundle
//! velocities `alpha~ = -Ad_{g+} alpha`, `beta~ = Ad_{g-^{-1}} beta`.

use super::unreduced::UnreducedState;
use super::{dual_eval, lax_from_group, representative, Algebras, AksParams};
use crate::error::{Error, Result};
use crate::integrate::{rk4_step, Aborted, TimeSpan};
use crate::liegroup::{adjoint, adjoint_inv, bracket, pairing};
use crate::linalg::Matrix;

/// `omega = (-alpha, beta)`.
pub fn connection_value(s: &UnreducedState) -> (Matrix<f64>, Matrix<f64>) {
    (-&s.alpha, s.beta.clone())
}

/// `Tp`: the base point `g+ g g-` and velocity `Ad_{g+}(zeta + alpha + Ad_g beta)`.
pub fn project(s: &UnreducedState) -> Result<(Matrix<f64>, Matrix<f64>)> {
    let g = &(&s.gp * &s.g) * &s.gm;
    let inner = &(&s.zeta + &s.alpha) + &adjoint(&s.g, &s.beta)?;
    Ok((g, adjoint(&s.gp, &inner)?))
}

/// Horizontal lift of the base velocity `(g', zeta')` at fiber point
/// `(g+, g-)`: `(g+^{-1} g' g-^{-1}, Ad_{g+^{-1}} zeta', g+, 0, g-, 0)`.
pub fn horizontal_lift(
    g: &Matrix<f64>,
    zeta: &Matrix<f64>,
    gp: &Matrix<f64>,
    gm: &Matrix<f64>,
) -> Result<UnreducedState> {
    let d = g.rows();
    Ok(UnreducedState {
        g: &(&gp.inverse()? * g) * &gm.inverse()?,
        zeta: adjoint_inv(gp, zeta)?,
        gp: gp.clone(),
        alpha: Matrix::zeros(d, d),
        gm: gm.clone(),
        beta: Matrix::zeros(d, d),
    })
}

/// Tangent action of `(h+, h-)` on a state.
pub fn act(hp: &Matrix<f64>, hm: &Matrix<f64>, s: &UnreducedState) -> Result<UnreducedState> {
    let hpi = hp.inverse()?;
    let hmi = hm.inverse()?;
    Ok(UnreducedState {
        g: &(hp * &s.g) * &hmi,
        zeta: adjoint(hp, &s.zeta)?,
        gp: &s.gp * &hpi,
        alpha: adjoint(hp, &s.alpha)?,
        gm: hm * &s.gm,
        beta: adjoint(hm, &s.beta)?,
    })
}

/// `<mu, [u1, u2]> - <nu, [v1, v2]>`.
pub fn connection_force(
    mu: &Matrix<f64>,
    nu: &Matrix<f64>,
    u1: &Matrix<f64>,
    v1: &Matrix<f64>,
    u2: &Matrix<f64>,
    v2: &Matrix<f64>,
) -> f64 {
    pairing(mu, &bracket(u1, u2)) - pairing(nu, &bracket(v1, v2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPoint {
    pub g: Matrix<f64>,
    pub zeta: Matrix<f64>,
    /// Values of `eta+` on the `K+` basis.
    pub eta_plus: Vec<f64>,
    /// Values of `eta-` on the `K-` basis (unreduced sign).
    pub eta_minus: Vec<f64>,
    pub alpha: Matrix<f64>,
    pub beta: Matrix<f64>,
}

impl ReducedPoint {
    /// `Lambda_R = zeta' + alpha~ - Ad_{g'} beta~`.
    pub fn lax(&self) -> Result<Matrix<f64>> {
        Ok(&(&self.zeta + &self.alpha) - &adjoint(&self.g, &self.beta)?)
    }
}

/// `R = |zeta' + alpha~ - Ad_{g'} beta~|^2 / 2 - eta+(alpha~) - eta-(beta~)`.
pub fn reduced_routhian(alg: &Algebras, p: &ReducedPoint) -> Result<f64> {
    let lam = p.lax()?;
    Ok(0.5 * pairing(&lam, &lam) - dual_eval(&alg.plus, &p.eta_plus, &p.alpha) - dual_eval(&alg.minus, &p.eta_minus, &p.beta))
}

/// Coadjoint velocity `x -> eta([w, x])` in basis values.
pub fn coadjoint_velocity(basis: &crate::liegroup::AlgebraBasis<f64>, eta: &[f64], w: &Matrix<f64>) -> Vec<f64> {
    basis.elements().iter().map(|e| dual_eval(basis, eta, &bracket(w, e))).collect()
}

/// One sample of a reduced trajectory with the orbit velocities that drove
/// it (basis values of `eta+'` and `eta-'`).
#[derive(Debug, Clone)]
pub struct ReducedSample {
    pub t: f64,
    pub point: ReducedPoint,
    pub eta_plus_dot: Vec<f64>,
    pub eta_minus_dot: Vec<f64>,
    /// Algebra lifts of the orbit velocities.
    pub w_plus: Matrix<f64>,
    pub w_minus: Matrix<f64>,
}

#[derive(Debug, Clone)]
pub struct AksReduced {
    params: AksParams,
    alg: Algebras,
}

impl AksReduced {
    pub fn new(params: AksParams) -> Self {
        let alg = params.algebras();
        Self { params, alg }
    }

    pub fn algebras(&self) -> &Algebras {
        &self.alg
    }

    pub fn params(&self) -> &AksParams {
        &self.params
    }

    /// Values of `nu_R = -nu` on the `K-` basis.
    pub fn nu_r_dual(&self) -> Vec<f64> {
        self.params.nu_dual(&self.alg).into_iter().map(|v| -v).collect()
    }

    /// The reduced point of an unreduced state.
    pub fn reduce(&self, s: &UnreducedState) -> Result<ReducedPoint> {
        let (g, zeta) = project(s)?;
        let nu_r = -&self.params.nu;
        let eta_plus = self
            .alg
            .plus
            .elements()
            .iter()
            .map(|e| Ok(pairing(&self.params.mu, &adjoint_inv(&s.gp, e)?)))
            .collect::<Result<_>>()?;
        let eta_minus =
            self.alg.minus.elements().iter().map(|e| Ok(pairing(&nu_r, &adjoint(&s.gm, e)?))).collect::<Result<_>>()?;
        Ok(ReducedPoint {
            g,
            zeta,
            eta_plus,
            eta_minus,
            alpha: -&adjoint(&s.gp, &s.alpha)?,
            beta: adjoint_inv(&s.gm, &s.beta)?,
        })
    }

    /// The reduced point over `g` whose Lax matrix satisfies the
    /// stationarity conditions of `eta+` and `-eta-`.
    pub fn consistent_point(
        &self,
        g: &Matrix<f64>,
        eta_plus: &[f64],
        eta_minus: &[f64],
        alpha: &Matrix<f64>,
        beta: &Matrix<f64>,
    ) -> Result<ReducedPoint> {
        let neg: Vec<f64> = eta_minus.iter().map(|v| -v).collect();
        let lam = lax_from_group(&self.alg, g, eta_plus, &neg)?;
        let zeta = &(&lam - alpha) + &adjoint(g, beta)?;
        Ok(ReducedPoint {
            g: g.clone(),
            zeta,
            eta_plus: eta_plus.to_vec(),
            eta_minus: eta_minus.to_vec(),
            alpha: alpha.clone(),
            beta: beta.clone(),
        })
    }

    /// Orbit velocities from the balance between the variation of `R` along
    /// each orbit direction and the connection force.
    pub fn orbit_velocities(&self, p: &ReducedPoint) -> Result<(Matrix<f64>, Matrix<f64>)> {
        let d = self.alg.d;
        let z = Matrix::zeros(d, d);
        let rep_plus = representative(&self.alg.plus, &p.eta_plus)?;
        let neg: Vec<f64> = p.eta_minus.iter().map(|v| -v).collect();
        let rep_minus = representative(&self.alg.minus, &neg)?;
        let h = 1e-3;
        let routhian = |q: &ReducedPoint| reduced_routhian(&self.alg, q);

        let np = self.alg.plus.dim();
        let mut bp = Matrix::zeros(np, np);
        let mut rp = vec![0.0; np];
        for (i, ei) in self.alg.plus.elements().iter().enumerate() {
            let dir = coadjoint_velocity(&self.alg.plus, &p.eta_plus, ei);
            let shifted = |s: f64| ReducedPoint {
                eta_plus: p.eta_plus.iter().zip(&dir).map(|(a, b)| a + s * b).collect(),
                ..p.clone()
            };
            rp[i] = (routhian(&shifted(h))? - routhian(&shifted(-h))?) / (2.0 * h);
            for (k, ek) in self.alg.plus.elements().iter().enumerate() {
                bp[(i, k)] = connection_force(&rep_plus, &z, ek, &z, ei, &z);
            }
        }
        let nm = self.alg.minus.dim();
        let mut bm = Matrix::zeros(nm, nm);
        let mut rm = vec![0.0; nm];
        for (i, ei) in self.alg.minus.elements().iter().enumerate() {
            let dir = coadjoint_velocity(&self.alg.minus, &p.eta_minus, ei);
            let shifted = |s: f64| ReducedPoint {
                eta_minus: p.eta_minus.iter().zip(&dir).map(|(a, b)| a + s * b).collect(),
                ..p.clone()
            };
            rm[i] = (routhian(&shifted(h))? - routhian(&shifted(-h))?) / (2.0 * h);
            for (k, ek) in self.alg.minus.elements().iter().enumerate() {
                bm[(i, k)] = connection_force(&z, &rep_minus, &z, ek, &z, ei);
            }
        }
        let wp = if bp.max_abs() == 0.0 { vec![0.0; np] } else { bp.solve_min_norm(&rp) };
        let wm = if bm.max_abs() == 0.0 { vec![0.0; nm] } else { bm.solve_min_norm(&rm) };
        Ok((self.alg.plus.combine(&wp), self.alg.minus.combine(&wm)))
    }

    /// Time derivative of `(g', zeta', eta+, eta-)` with `alpha~`, `beta~`
    /// held fixed.
    pub fn rates(&self, p: &ReducedPoint) -> Result<(Matrix<f64>, Matrix<f64>, Vec<f64>, Vec<f64>)> {
        let lam = p.lax()?;
        let ad_b = adjoint(&p.g, &p.beta)?;
        let gdot = &p.zeta * &p.g;
        let zdot = &bracket(&lam, &p.alpha) + &bracket(&p.zeta, &ad_b);
        let (wp, wm) = self.orbit_velocities(p)?;
        Ok((
            gdot,
            zdot,
            coadjoint_velocity(&self.alg.plus, &p.eta_plus, &wp),
            coadjoint_velocity(&self.alg.minus, &p.eta_minus, &wm),
        ))
    }

    pub fn simulate(
        &self,
        p0: &ReducedPoint,
        span: &TimeSpan<f64>,
    ) -> std::result::Result<Vec<ReducedSample>, Aborted<Vec<ReducedSample>>> {
        let d = self.alg.d;
        let dd = d * d;
        let (np, nm) = (self.alg.plus.dim(), self.alg.minus.dim());
        let unpack = |s: &[f64]| ReducedPoint {
            g: Matrix::from_row_slice(d, d, &s[..dd]),
            zeta: Matrix::from_row_slice(d, d, &s[dd..2 * dd]),
            eta_plus: s[2 * dd..2 * dd + np].to_vec(),
            eta_minus: s[2 * dd + np..2 * dd + np + nm].to_vec(),
            alpha: p0.alpha.clone(),
            beta: p0.beta.clone(),
        };
        let pack = |r: (Matrix<f64>, Matrix<f64>, Vec<f64>, Vec<f64>)| -> Vec<f64> {
            r.0.as_slice().iter().chain(r.1.as_slice()).chain(&r.2).chain(&r.3).copied().collect()
        };
        let f = |_t: f64, s: &[f64]| -> Result<Vec<f64>> { Ok(pack(self.rates(&unpack(s))?)) };
        let sample = |t: f64, s: &[f64]| -> Result<ReducedSample> {
            let point = unpack(s);
            let (w_plus, w_minus) = self.orbit_velocities(&point)?;
            let eta_plus_dot = coadjoint_velocity(&self.alg.plus, &point.eta_plus, &w_plus);
            let eta_minus_dot = coadjoint_velocity(&self.alg.minus, &point.eta_minus, &w_minus);
            Ok(ReducedSample { t, point, eta_plus_dot, eta_minus_dot, w_plus, w_minus })
        };
        let mut state = pack((p0.g.clone(), p0.zeta.clone(), p0.eta_plus.clone(), p0.eta_minus.clone()));
        let mut out = Vec::with_capacity(span.samples());
        match sample(span.t0, &state) {
            Ok(s) => out.push(s),
            Err(error) => return Err(Aborted { partial: out, error, time: span.t0 }),
        }
        for k in 0..span.steps() {
            let t = span.time(k);
            let step = rk4_step(&f, &state, t, span.dt).and_then(|s| {
                let smp = sample(span.time(k + 1), &s)?;
                Ok((s, smp))
            });
            match step {
                Ok((s, smp)) => {
                    state = s;
                    out.push(smp);
                }
                Err(error) => return Err(Aborted { partial: out, error, time: t }),
            }
        }
        if out.iter().any(|s| !s.point.g.is_finite()) {
            return Err(Aborted { partial: out, error: Error::non_finite("reduced state"), time: span.t1 });
        }
        Ok(out)
    }
}
