//! Building mechanical systems from a configuration.

use std::sync::Arc;

use geomech::builtins::{self, SymmetryData};
use geomech::exprlang::{chart_index, parse_with_names, Compiled, Expr, Names};
use geomech::geomcalc::{ScalarField, VectorFieldSpec};
use geomech::linalg::Matrix;
use geomech::mech::LagrangianSystem;
use geomech::symmetry::{GroupAction, PrincipalConnection};

use crate::config::{CustomSystem, RunConfig, SymmetrySpec, SystemSpec};
use crate::Failure;

pub struct Mechanical {
    pub name: String,
    pub system: LagrangianSystem<f64>,
    pub symmetry: Option<SymmetryData>,
    pub q0: Vec<f64>,
    pub v0: Vec<f64>,
}

/// Compiled expression over the slot layout `[t, q1..qn, v1..vn, params..]`.
#[derive(Clone)]
struct Formula {
    compiled: Arc<Compiled>,
    uses_time: bool,
}

struct Scope<'a> {
    dim: usize,
    params: Vec<(&'a str, f64)>,
}

impl Scope<'_> {
    fn names(&self) -> Names {
        Names::new(self.dim, self.params.iter().map(|(k, _)| k.to_string()))
    }

    fn slot(&self, name: &str) -> Option<usize> {
        if name == "t" {
            return Some(0);
        }
        if let Some((c, k)) = chart_index(name) {
            return (k >= 1 && k <= self.dim).then(|| if c == 'q' { k } else { self.dim + k });
        }
        self.params.iter().position(|(p, _)| *p == name).map(|i| 1 + 2 * self.dim + i)
    }

    /// Parses `src`; `allowed` rejects chart variables the context forbids.
    fn compile(&self, what: &str, src: &str, allowed: &dyn Fn(&str) -> bool) -> Result<Formula, Failure> {
        let expr: Expr = parse_with_names(src, &self.names()).map_err(|e| Failure::Validation(format!("{what}: {e}")))?;
        let names = expr.free_names();
        if let Some(bad) = names.iter().find(|n| self.slot(n).is_some() && self.params.iter().all(|(p, _)| p != n) && !allowed(n)) {
            return Err(Failure::Validation(format!("{what}: `{bad}` is not allowed here")));
        }
        let compiled = Compiled::new(&expr, &|n| self.slot(n)).map_err(|e| Failure::Validation(format!("{what}: {e}")))?;
        Ok(Formula { compiled: Arc::new(compiled), uses_time: names.iter().any(|n| n == "t") })
    }
}

impl Formula {
    fn eval(&self, slots: &[f64]) -> f64 {
        self.compiled.eval(slots).unwrap_or(f64::NAN)
    }
}

fn any(_: &str) -> bool {
    true
}

fn positions_only(name: &str) -> bool {
    matches!(chart_index(name), Some(('q', _)))
}

pub fn build(config: &RunConfig) -> Result<Mechanical, Failure> {
    let mut mech = match &config.system {
        SystemSpec::Builtin(name) => {
            let b = builtins::builtin(name).ok_or_else(|| {
                Failure::Validation(format!("unknown builtin `{name}`; expected one of {:?} or an AKS system", builtins::MECHANICAL))
            })?;
            Mechanical { name: b.name.to_string(), system: b.system, symmetry: b.symmetry, q0: b.q0, v0: b.v0 }
        }
        SystemSpec::Custom(c) => custom(c, config)?,
    };
    if let Some(s) = &config.symmetry {
        let params = match &config.system {
            SystemSpec::Custom(c) => c.params.iter().map(|(k, v)| (k.as_str(), *v)).collect(),
            SystemSpec::Builtin(_) => Vec::new(),
        };
        mech.symmetry = Some(symmetry(s, &Scope { dim: mech.system.dim(), params })?);
    }
    if let Some(ic) = &config.ic {
        let n = mech.system.dim();
        if ic.q.len() != n || ic.v.len() != n {
            return Err(Failure::Validation(format!(
                "ic has {} positions and {} velocities for a {n}-dimensional system",
                ic.q.len(),
                ic.v.len()
            )));
        }
        mech.q0 = ic.q.clone();
        mech.v0 = ic.v.clone();
    }
    Ok(mech)
}

fn custom(c: &CustomSystem, config: &RunConfig) -> Result<Mechanical, Failure> {
    if c.dim == 0 {
        return Err(Failure::Validation("system.dim must be at least 1".into()));
    }
    if let Some(bad) = c.params.keys().find(|k| k.as_str() == "t" || chart_index(k).is_some()) {
        return Err(Failure::Validation(format!("parameter name `{bad}` shadows a chart variable")));
    }
    let scope = Scope { dim: c.dim, params: c.params.iter().map(|(k, v)| (k.as_str(), *v)).collect() };
    let lag = scope.compile("lagrangian", &c.lagrangian, &any)?;
    let forces = match &c.force {
        Some(f) if f.len() != c.dim => {
            return Err(Failure::Validation(format!("force has {} components for dimension {}", f.len(), c.dim)));
        }
        Some(f) => Some(
            f.iter()
                .enumerate()
                .map(|(i, src)| scope.compile(&format!("force[{i}]"), src, &any))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    if config.ic.is_none() {
        return Err(Failure::Validation("expression-defined systems need an ic block".into()));
    }
    let values: Arc<Vec<f64>> = Arc::new(c.params.values().copied().collect());
    let n = c.dim;
    let slots = move |t: f64, q: &[f64], v: &[f64]| -> Vec<f64> {
        let mut s = Vec::with_capacity(1 + 2 * n + values.len());
        s.push(t);
        s.extend_from_slice(q);
        s.extend_from_slice(v);
        s.extend_from_slice(&values);
        s
    };
    let field = if lag.uses_time {
        let slots = slots.clone();
        ScalarField::new(n, move |t, q, v| lag.eval(&slots(t, q, v)))
    } else {
        let slots = slots.clone();
        ScalarField::autonomous(n, move |q, v| lag.eval(&slots(0.0, q, v)))
    };
    let mut system = LagrangianSystem::new(field).with_label("custom");
    if let Some(forces) = forces {
        system = system.with_force(move |t, q, v| {
            let s = slots(t, q, v);
            forces.iter().map(|f| f.eval(&s)).collect()
        });
    }
    Ok(Mechanical { name: "custom".into(), system, symmetry: None, q0: Vec::new(), v0: Vec::new() })
}

fn symmetry(s: &SymmetrySpec, scope: &Scope) -> Result<SymmetryData, Failure> {
    let n = scope.dim;
    let m = s.generators.len();
    if m == 0 {
        return Err(Failure::Validation("symmetry.generators is empty".into()));
    }
    if s.mu.len() != m {
        return Err(Failure::Validation(format!("symmetry.mu has {} entries for {m} generators", s.mu.len())));
    }
    let param_values: Arc<Vec<f64>> = Arc::new(scope.params.iter().map(|(_, v)| *v).collect());
    let mut generators = Vec::with_capacity(m);
    for (a, g) in s.generators.iter().enumerate() {
        if g.len() != n {
            return Err(Failure::Validation(format!("generator {a} has {} components for dimension {n}", g.len())));
        }
        let comps = g
            .iter()
            .enumerate()
            .map(|(i, src)| scope.compile(&format!("symmetry.generators[{a}][{i}]"), src, &positions_only))
            .collect::<Result<Vec<_>, _>>()?;
        let pv = param_values.clone();
        generators.push(VectorFieldSpec::new(n, move |q: &[f64]| {
            let slots = position_slots(n, q, &pv);
            comps.iter().map(|c| c.eval(&slots)).collect()
        }));
    }
    let structure = if s.structure_constants.is_empty() { vec![0.0; m * m * m] } else { s.structure_constants.clone() };
    let action = GroupAction::new(generators, structure).map_err(|e| Failure::Validation(format!("symmetry: {e}")))?;
    let connection = match &s.connection {
        Some(c) => connection(c, scope, m)?,
        None => {
            return Err(Failure::Validation("symmetry.connection is required".into()));
        }
    };
    Ok(SymmetryData { action, connection, mu: s.mu.clone() })
}

fn position_slots(n: usize, q: &[f64], params: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; 1 + 2 * n];
    s[1..=n].copy_from_slice(q);
    s.extend_from_slice(params);
    s
}

fn connection(c: &crate::config::ConnectionSpec, scope: &Scope, m: usize) -> Result<PrincipalConnection<f64>, Failure> {
    let n = scope.dim;
    if c.group.len() != m {
        return Err(Failure::Validation(format!("connection.group has {} entries for {m} generators", c.group.len())));
    }
    if let Some(bad) = c.group.iter().find(|&&g| g == 0 || g > n) {
        return Err(Failure::Validation(format!("connection.group index {bad} outside 1..={n}")));
    }
    let group: Vec<usize> = c.group.iter().map(|g| g - 1).collect();
    let nb = n - m;
    let rows = if c.a.is_empty() { vec![vec!["0".to_string(); nb]; m] } else { c.a.clone() };
    if rows.len() != m || rows.iter().any(|r| r.len() != nb) {
        return Err(Failure::Validation(format!("connection.A must be {m} x {nb}")));
    }
    let base_only = |name: &str| matches!(chart_index(name), Some(('q', k)) if !group.contains(&(k - 1)));
    let mut cells = Vec::with_capacity(m * nb);
    for (a, row) in rows.iter().enumerate() {
        for (k, src) in row.iter().enumerate() {
            cells.push(scope.compile(&format!("connection.A[{a}][{k}]"), src, &base_only)?);
        }
    }
    let split = geomech::symmetry::Split::new(n, group.clone()).map_err(|e| Failure::Validation(format!("connection: {e}")))?;
    let pv: Vec<f64> = scope.params.iter().map(|(_, v)| *v).collect();
    PrincipalConnection::trivial(n, group, move |s: &[f64]| {
        let q = split.assemble(s, &vec![0.0; m]);
        let slots = position_slots(n, &q, &pv);
        Matrix::from_fn(m, nb, |a, k| cells[a * nb + k].eval(&slots))
    })
    .map_err(|e| Failure::Validation(format!("connection: {e}")))
}
