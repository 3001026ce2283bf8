//! Named mechanical systems with their symmetry data and default initial
//! conditions.

use crate::geomcalc::ScalarField;
use crate::linalg::Matrix;
use crate::mech::LagrangianSystem;
use crate::scalar::dot;
use crate::symmetry::{GroupAction, PrincipalConnection};

/// A ready-made system. `action`, `connection` and `mu` are present for the
/// systems with a declared symmetry.
#[derive(Debug, Clone)]
pub struct Builtin {
    pub name: &'static str,
    pub system: LagrangianSystem<f64>,
    pub symmetry: Option<SymmetryData>,
    pub q0: Vec<f64>,
    pub v0: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SymmetryData {
    pub action: GroupAction<f64>,
    pub connection: PrincipalConnection<f64>,
    pub mu: Vec<f64>,
}

/// Names accepted by [`builtin`]. The AKS systems live in [`crate::aks`].
pub const MECHANICAL: [&str; 4] = ["free_particle", "harmonic", "central_force", "magnetic_kk"];

pub fn builtin(name: &str) -> Option<Builtin> {
    match name {
        "free_particle" => Some(free_particle()),
        "harmonic" => Some(harmonic()),
        "central_force" => Some(central_force()),
        "magnetic_kk" => Some(magnetic_kk()),
        _ => None,
    }
}

/// `L = |v|^2 / 2` on the plane with the translation action.
pub fn free_particle() -> Builtin {
    let system = LagrangianSystem::new(
        ScalarField::autonomous(2, |_, v: &[f64]| 0.5 * dot(v, v))
            .with_dv(|_, _, v| v.to_vec())
            .with_dq(|_, _, _| vec![0.0; 2]),
    )
    .with_label("free_particle");
    let v0 = vec![1.0, 0.5];
    Builtin {
        name: "free_particle",
        system,
        symmetry: Some(SymmetryData {
            action: GroupAction::coordinate_translations(2, &[1]),
            connection: PrincipalConnection::flat(2, vec![1]).expect("valid split"),
            mu: vec![v0[1]],
        }),
        q0: vec![0.0, 0.0],
        v0,
    }
}

/// `L = (v^2 - q^2) / 2`.
pub fn harmonic() -> Builtin {
    let system = LagrangianSystem::new(
        ScalarField::autonomous(1, |q: &[f64], v: &[f64]| 0.5 * (v[0] * v[0] - q[0] * q[0]))
            .with_dv(|_, _, v| vec![v[0]])
            .with_dq(|_, q, _| vec![-q[0]]),
    )
    .with_label("harmonic");
    Builtin { name: "harmonic", system, symmetry: None, q0: vec![1.0], v0: vec![0.0] }
}

/// Planar motion in `V = r^2 / 2`, polar coordinates `(r, theta)`.
pub fn central_force() -> Builtin {
    let system = LagrangianSystem::new(
        ScalarField::autonomous(2, |q: &[f64], v: &[f64]| {
            0.5 * v[0] * v[0] + 0.5 * q[0] * q[0] * v[1] * v[1] - 0.5 * q[0] * q[0]
        })
        .with_dv(|_, q, v| vec![v[0], q[0] * q[0] * v[1]])
        .with_dq(|_, q, v| vec![q[0] * v[1] * v[1] - q[0], 0.0]),
    )
    .with_label("central_force");
    let r0: f64 = 1.2;
    Builtin {
        name: "central_force",
        system,
        symmetry: Some(SymmetryData {
            action: GroupAction::coordinate_translations(2, &[1]),
            connection: PrincipalConnection::flat(2, vec![1]).expect("valid split"),
            mu: vec![1.0],
        }),
        q0: vec![r0, 0.0],
        v0: vec![0.1, 1.0 / (r0 * r0)],
    }
}

/// Kaluza-Klein particle on `R^2 x S^1`:
/// `L = (x'^2 + y'^2) / 2 + (theta' + A.q')^2 / 2`, `A = (-y/2, x/2)`.
pub fn magnetic_kk() -> Builtin {
    fn a(q: &[f64]) -> [f64; 2] {
        [-q[1] / 2.0, q[0] / 2.0]
    }
    fn p_theta(q: &[f64], v: &[f64]) -> f64 {
        let a = a(q);
        v[2] + a[0] * v[0] + a[1] * v[1]
    }
    let system = LagrangianSystem::new(
        ScalarField::autonomous(3, |q: &[f64], v: &[f64]| {
            let c = p_theta(q, v);
            0.5 * (v[0] * v[0] + v[1] * v[1]) + 0.5 * c * c
        })
        .with_dv(|_, q, v| {
            let c = p_theta(q, v);
            let a = a(q);
            vec![v[0] + c * a[0], v[1] + c * a[1], c]
        })
        .with_dq(|_, q, v| {
            let c = p_theta(q, v);
            vec![c * v[1] / 2.0, -c * v[0] / 2.0, 0.0]
        }),
    )
    .with_label("magnetic_kk");
    let connection = PrincipalConnection::trivial(3, vec![2], |s: &[f64]| Matrix::from_rows(&[vec![-s[1] / 2.0, s[0] / 2.0]]))
        .expect("valid split");
    let q0 = vec![0.3, -0.2, 0.0];
    let a0 = a(&q0);
    Builtin {
        name: "magnetic_kk",
        system,
        symmetry: Some(SymmetryData { action: GroupAction::coordinate_translations(3, &[2]), connection, mu: vec![1.0] }),
        v0: vec![1.0, 0.0, 1.0 - a0[0]],
        q0,
    }
}
