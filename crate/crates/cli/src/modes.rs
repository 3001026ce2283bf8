//! The five subcommands.

use std::path::Path;
use std::sync::Mutex;

use geomech::aks::feher::{AksRun, FeherSystem};
use geomech::aks::{feher_lagrangian, AksParams};
use geomech::integrate::{simulate, Aborted, Diagnostic, TimeSpan, Trajectory};
use geomech::mech::{Frame, LagrangianSystem};
use geomech::symmetry::{
    build_reduced_system, check_invariance, equivalence_check, momentum_diagnostics, GroupAction, ReducedSystem,
    ReductionOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Mode, RunConfig, SystemSpec};
use crate::output::{resolve, write_sidecar, Table};
use crate::systems::{self, Mechanical};
use crate::Failure;

/// Windows of the AKS chart runs checked for residuals: every tenth.
const AKS_RESIDUAL_STRIDE: usize = 10;

pub fn run(config: &RunConfig, out: &Path, jobs: usize) -> Result<(), Failure> {
    let integ = config.integration;
    let span = TimeSpan::new(integ.t0, integ.t1, integ.dt).map_err(|e| Failure::engine("integration", e))?;
    let mode = config.mode.expect("effective config has a mode");
    if let Some(params) = aks_params(config) {
        let sys = FeherSystem::new(params);
        check_aks_diagnostics(&config.outputs.diagnostics)?;
        write_sidecar(config, out)?;
        return match mode {
            Mode::Aks => aks(config, out, &sys, &span),
            Mode::Check => check_aks(config, out, &sys, &span, jobs),
            _ => unreachable!("rejected while validating the config"),
        };
    }
    let mech = systems::build(config)?;
    let plan = plan_diagnostics(&config.outputs.diagnostics, mode, mech.symmetry.as_ref().map(|s| s.action.dim()))?;
    let reduced = match mode {
        Mode::Reduce | Mode::Compare => Some(reduce_system(&mech)?),
        _ => None,
    };
    write_sidecar(config, out)?;
    match mode {
        Mode::Simulate => simulate_mode(config, out, &mech, &plan, &span),
        Mode::Reduce => reduce_mode(config, out, &mech, reduced.as_ref().expect("built above"), &plan, &span),
        Mode::Compare => compare(config, out, &mech, reduced.as_ref().expect("built above"), &plan, &span),
        Mode::Check => check(config, out, &mech, &plan, &span, jobs),
        Mode::Aks => unreachable!("rejected while validating the config"),
    }
}

fn aks_params(config: &RunConfig) -> Option<AksParams> {
    match &config.system {
        SystemSpec::Builtin(name) => AksParams::builtin(name),
        SystemSpec::Custom(_) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Channel {
    Energy,
    Lagrangian,
    Residual,
    Momentum(usize),
}

fn plan_diagnostics(names: &[String], mode: Mode, group_dim: Option<usize>) -> Result<Vec<(String, Channel)>, Failure> {
    let mut plan: Vec<(String, Channel)> = Vec::with_capacity(names.len());
    for name in names {
        if plan.iter().any(|(n, _)| n == name) {
            return Err(Failure::Validation(format!("diagnostic `{name}` listed twice")));
        }
        let channel = match name.as_str() {
            "energy" => Channel::Energy,
            "lagrangian" => Channel::Lagrangian,
            "el_residual" => Channel::Residual,
            other => {
                let k = other.strip_prefix('J').and_then(|k| k.parse::<usize>().ok()).ok_or_else(|| {
                    Failure::Validation(format!(
                        "unknown diagnostic `{other}`; expected energy, lagrangian, el_residual or J<k>"
                    ))
                })?;
                if mode == Mode::Reduce {
                    return Err(Failure::Validation(format!("`{other}` is not defined on the reduced system")));
                }
                match group_dim {
                    Some(m) if (1..=m).contains(&k) => Channel::Momentum(k - 1),
                    Some(m) => return Err(Failure::Validation(format!("`{other}` outside J1..J{m}"))),
                    None => return Err(Failure::Validation(format!("`{other}` needs a symmetry"))),
                }
            }
        };
        plan.push((name.clone(), channel));
    }
    Ok(plan)
}

/// Evaluates the planned channels on a finished trajectory, in plan order.
/// Samples where a diagnostic cannot be evaluated are `NaN`.
fn channels(
    traj: &Trajectory<f64>,
    sys: &LagrangianSystem<f64>,
    action: Option<&GroupAction<f64>>,
    plan: &[(String, Channel)],
) -> Vec<(String, Vec<f64>)> {
    let momenta = action.map(momentum_diagnostics).unwrap_or_default();
    let eval = |d: &Diagnostic<f64>| -> Vec<f64> {
        (0..traj.len()).map(|k| d.eval(sys, &traj.point(k)).unwrap_or(f64::NAN)).collect()
    };
    plan.iter()
        .map(|(name, ch)| {
            let values = match ch {
                Channel::Energy => eval(&Diagnostic::energy()),
                Channel::Lagrangian => eval(&Diagnostic::lagrangian()),
                Channel::Momentum(a) => eval(&momenta[*a]),
                Channel::Residual => {
                    let mut t = Trajectory { diagnostics: Vec::new(), ..traj.clone() };
                    match t.record_residual_norms(sys, &Frame::coordinate(sys.dim())) {
                        Ok(()) => t.diagnostics.pop().map(|(_, c)| c).unwrap_or_default(),
                        Err(_) => vec![f64::NAN; traj.len()],
                    }
                }
            };
            (name.clone(), values)
        })
        .collect()
}

fn table(traj: &Trajectory<f64>, channels: Vec<(String, Vec<f64>)>) -> Table {
    Table {
        n: traj.n,
        times: traj.times.clone(),
        q: (0..traj.len()).map(|k| traj.q(k).to_vec()).collect(),
        v: (0..traj.len()).map(|k| traj.v(k).to_vec()).collect(),
        p: (0..traj.len()).map(|k| traj.momenta.get(k).cloned().unwrap_or_else(|| vec![f64::NAN; traj.n])).collect(),
        channels,
    }
}

/// Unwraps an integration, writing whatever was computed when it aborts.
fn finished<R, P>(
    result: Result<R, Aborted<P>>,
    what: &str,
    on_partial: impl FnOnce(&P) -> Result<(), Failure>,
) -> Result<R, Failure> {
    match result {
        Ok(r) => Ok(r),
        Err(a) => {
            on_partial(&a.partial)?;
            Err(match a.error {
                e @ (geomech::Error::Precondition(_) | geomech::Error::Dimension(_)) => Failure::engine(what, e),
                e => Failure::Numerical(format!("{what}: integration aborted at t = {}: {e}", a.time)),
            })
        }
    }
}

fn write_trajectory(
    config: &RunConfig,
    out: &Path,
    traj: &Trajectory<f64>,
    sys: &LagrangianSystem<f64>,
    action: Option<&GroupAction<f64>>,
    plan: &[(String, Channel)],
) -> Result<(), Failure> {
    let Some(csv) = &config.outputs.csv else { return Ok(()) };
    let path = resolve(out, csv);
    table(traj, channels(traj, sys, action, plan)).write(&path)?;
    println!("wrote {} ({} rows)", path.display(), traj.len());
    Ok(())
}

fn simulate_mode(
    config: &RunConfig,
    out: &Path,
    mech: &Mechanical,
    plan: &[(String, Channel)],
    span: &TimeSpan<f64>,
) -> Result<(), Failure> {
    let action = mech.symmetry.as_ref().map(|s| &s.action);
    let write = |t: &Trajectory<f64>| write_trajectory(config, out, t, &mech.system, action, plan);
    let traj = finished(simulate(&mech.system, &mech.q0, &mech.v0, span, &[]), "simulate", write)?;
    write(&traj)
}

/// Deterministic states around the initial condition, used where the
/// reduction checks invariance.
fn nearby_states(mech: &Mechanical, t0: f64) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    let q: Vec<f64> = mech.q0.iter().map(|x| x + 0.3).collect();
    let v: Vec<f64> = mech.v0.iter().map(|x| 0.5 * x - 0.1).collect();
    vec![(t0, mech.q0.clone(), mech.v0.clone()), (t0, q, v)]
}

fn reduce_system(mech: &Mechanical) -> Result<ReducedSystem<f64>, Failure> {
    let sym = mech
        .symmetry
        .as_ref()
        .ok_or_else(|| Failure::Validation(format!("`{}` has no symmetry; add a symmetry block", mech.name)))?;
    build_reduced_system(
        &mech.system,
        &sym.action,
        &sym.connection,
        &sym.mu,
        &nearby_states(mech, 0.0),
        &ReductionOptions::default(),
    )
    .map_err(|e| Failure::engine("reduction", e))
}

fn reduce_mode(
    config: &RunConfig,
    out: &Path,
    mech: &Mechanical,
    red: &ReducedSystem<f64>,
    plan: &[(String, Channel)],
    span: &TimeSpan<f64>,
) -> Result<(), Failure> {
    let s0 = red.split.gather(&mech.q0, &red.split.base);
    let sd0 = red.split.gather(&mech.v0, &red.split.base);
    let write = |t: &Trajectory<f64>| write_trajectory(config, out, t, &red.system, None, plan);
    let traj = finished(simulate(&red.system, &s0, &sd0, span, &[]), "reduce", write)?;
    write(&traj)
}

struct Line {
    name: String,
    value: f64,
    tolerance: Option<f64>,
    note: String,
}

impl Line {
    fn bounded(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance: Some(tolerance), note: String::new() }
    }

    fn info(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self { name: name.into(), value: f64::NAN, tolerance: None, note: note.into() }
    }

    fn passed(&self) -> bool {
        self.tolerance.is_none_or(|tol| self.value <= tol)
    }
}

/// Prints the report and turns failing lines into a tolerance failure.
fn report(lines: &[Line]) -> Result<(), Failure> {
    for l in lines {
        match l.tolerance {
            Some(tol) => println!(
                "{:<28} {:>10.3e}  tolerance {:.1e}  {}",
                l.name,
                l.value,
                tol,
                if l.passed() { "PASS" } else { "FAIL" }
            ),
            None => println!("{:<28} {}", l.name, l.note),
        }
    }
    let failed: Vec<String> = lines
        .iter()
        .filter(|l| !l.passed())
        .map(|l| format!("{} = {:.3e} exceeds {:.1e}", l.name, l.value, l.tolerance.unwrap_or(f64::NAN)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Tolerance(failed.join("; ")))
    }
}

fn compare(
    config: &RunConfig,
    out: &Path,
    mech: &Mechanical,
    red: &ReducedSystem<f64>,
    plan: &[(String, Channel)],
    span: &TimeSpan<f64>,
) -> Result<(), Failure> {
    let action = &mech.symmetry.as_ref().expect("reduced systems have a symmetry").action;
    let rep = finished(equivalence_check(red, action, &mech.q0, &mech.v0, span), "compare", |_| Ok(()))?;
    write_trajectory(config, out, &rep.full, &mech.system, Some(action), plan)?;
    let tol = config.tolerances;
    report(&[
        Line::bounded("max base deviation", rep.max_base_deviation, tol.compare),
        Line::bounded("momentum drift", rep.momentum_drift, tol.compare_momentum),
    ])
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn uniform(r: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-s..s)).collect()
}

/// Quadratic frame near the identity, invertible on a ball of radius `reach`.
fn random_frame(seed: u64, n: usize, reach: f64) -> Frame<f64> {
    let mut r = rng(seed, 1);
    let s = 0.2 / n as f64;
    let reach = reach.max(1.0);
    Frame::polynomial(n, uniform(&mut r, n * n, s), uniform(&mut r, n * n * n, s / reach), uniform(&mut r, n * n * n, s / (reach * reach)))
}

type Lines = Result<Vec<Line>, Failure>;
type Task<'a> = Box<dyn FnOnce() -> Lines + Send + 'a>;

/// Runs independent tasks on up to `jobs` threads; results keep task order.
fn run_pool(jobs: usize, tasks: Vec<Task<'_>>) -> Vec<Lines> {
    let n = tasks.len();
    let queue = Mutex::new(tasks.into_iter().enumerate());
    let results: Mutex<Vec<Option<Lines>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let next = queue.lock().expect("queue lock").next();
                let Some((i, task)) = next else { break };
                let r = task();
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    results.into_inner().expect("results lock").into_iter().map(|r| r.expect("every task ran")).collect()
}

fn collect_lines(results: Vec<Lines>) -> Lines {
    let mut lines = Vec::new();
    for r in results {
        lines.extend(r?);
    }
    Ok(lines)
}

fn check(
    config: &RunConfig,
    out: &Path,
    mech: &Mechanical,
    plan: &[(String, Channel)],
    span: &TimeSpan<f64>,
    jobs: usize,
) -> Result<(), Failure> {
    let sys = &mech.system;
    let action = mech.symmetry.as_ref().map(|s| &s.action);
    let traj = finished(simulate(sys, &mech.q0, &mech.v0, span, &[]), "check", |_| Ok(()))?;
    write_trajectory(config, out, &traj, sys, action, plan)?;
    let tol = config.tolerances;
    let seed = config.seed();
    let traj = &traj;
    let drift = |d: &Diagnostic<f64>| -> Result<f64, Failure> {
        let mut t = traj.clone();
        t.record(sys, d).map_err(|e| Failure::engine(&d.name, e))?;
        Ok(t.drift(&d.name).unwrap_or(f64::NAN))
    };
    let mut tasks: Vec<Task> = Vec::new();
    tasks.push(Box::new(move || {
        if sys.lagrangian().is_autonomous() && !sys.is_forced() {
            Ok(vec![Line::bounded("energy drift", drift(&Diagnostic::energy())?, tol.energy)])
        } else {
            Ok(vec![Line::info("energy drift", "skipped: time-dependent or forced")])
        }
    }));
    if let Some(action) = action {
        tasks.push(Box::new(move || {
            momentum_diagnostics(action)
                .iter()
                .map(|d| Ok(Line::bounded(format!("{} drift", d.name), drift(d)?, tol.noether)))
                .collect()
        }));
        tasks.push(Box::new(move || {
            let mut r = rng(seed, 2);
            let n = sys.dim();
            let mut samples = nearby_states(mech, span.t0);
            for _ in 0..8 {
                let q = mech.q0.iter().zip(uniform(&mut r, n, 0.5)).map(|(a, b)| a + b).collect();
                let v = mech.v0.iter().zip(uniform(&mut r, n, 0.5)).map(|(a, b)| a + b).collect();
                samples.push((span.t0, q, v));
            }
            let rep = check_invariance(sys, action, &samples);
            Ok(vec![
                Line::bounded("lagrangian invariance", rep.max_lagrangian_variation, tol.invariance),
                Line::bounded("force on generators", rep.max_force_on_generators, tol.invariance),
            ])
        }));
    }
    let residual = move |name: &'static str, frame: Frame<f64>| -> Task {
        Box::new(move || {
            let r = traj.max_residual(sys, &frame).map_err(|e| Failure::engine(name, e))?;
            Ok(vec![Line::bounded(name, r, tol.residual)])
        })
    };
    tasks.push(residual("residual, coordinate frame", Frame::coordinate(sys.dim())));
    let reach = (0..traj.len()).flat_map(|k| traj.q(k).iter().map(|x| x.abs())).fold(0.0, f64::max);
    tasks.push(residual("residual, random frame", random_frame(seed, sys.dim(), reach)));
    report(&collect_lines(run_pool(jobs, tasks))?)
}

const AKS_CHANNELS: [&str; 4] = ["lam_tr2", "lam_tr3", "stationarity", "lagrangian"];

fn check_aks_diagnostics(names: &[String]) -> Result<(), Failure> {
    for (i, name) in names.iter().enumerate() {
        if !AKS_CHANNELS.contains(&name.as_str()) {
            return Err(Failure::Validation(format!("unknown AKS diagnostic `{name}`; expected one of {AKS_CHANNELS:?}")));
        }
        if names[..i].contains(name) {
            return Err(Failure::Validation(format!("diagnostic `{name}` listed twice")));
        }
    }
    Ok(())
}

/// `q` = entries of `g`, `v` = entries of `g' = zeta g`, `p` = entries of
/// the Lax matrix; `lam_tr2`, `lam_tr3` always follow.
fn aks_table(sys: &FeherSystem, run: &AksRun, names: &[String]) -> Table {
    let d = sys.params().d;
    let inv = run.invariants();
    let mut channels = vec![
        ("lam_tr2".to_string(), inv.iter().map(|x| x.0).collect::<Vec<_>>()),
        ("lam_tr3".to_string(), inv.iter().map(|x| x.1).collect()),
    ];
    for name in names {
        let values = match name.as_str() {
            "stationarity" => run.samples.iter().map(|s| sys.stationarity_defect(&s.state).unwrap_or(f64::NAN)).collect(),
            "lagrangian" => {
                run.samples.iter().map(|s| feher_lagrangian(sys.params(), &s.state).unwrap_or(f64::NAN)).collect()
            }
            _ => continue,
        };
        channels.push((name.clone(), values));
    }
    Table {
        n: d * d,
        times: run.samples.iter().map(|s| s.t).collect(),
        q: run.samples.iter().map(|s| s.state.g.as_slice().to_vec()).collect(),
        v: run.samples.iter().map(|s| (&s.state.zeta * &s.state.g).as_slice().to_vec()).collect(),
        p: run.samples.iter().map(|s| s.lambda.as_slice().to_vec()).collect(),
        channels,
    }
}

fn simulate_aks(
    config: &RunConfig,
    out: &Path,
    sys: &FeherSystem,
    span: &TimeSpan<f64>,
    what: &str,
) -> Result<AksRun, Failure> {
    let s0 = sys.initial_state().map_err(|e| Failure::engine("initial state", e))?;
    let write = |run: &AksRun| -> Result<(), Failure> {
        let Some(csv) = &config.outputs.csv else { return Ok(()) };
        let path = resolve(out, csv);
        aks_table(sys, run, &config.outputs.diagnostics).write(&path)?;
        println!("wrote {} ({} rows)", path.display(), run.len());
        Ok(())
    };
    let run = finished(sys.simulate(&s0, span), what, write)?;
    write(&run)?;
    Ok(run)
}

fn aks(config: &RunConfig, out: &Path, sys: &FeherSystem, span: &TimeSpan<f64>) -> Result<(), Failure> {
    let run = simulate_aks(config, out, sys, span, "aks")?;
    let (d2, d3) = run.invariant_drift();
    println!("{:<28} {d2:>10.3e}", "tr(Lambda^2) drift");
    println!("{:<28} {d3:>10.3e}", "tr(Lambda^3) drift");
    Ok(())
}

fn check_aks(config: &RunConfig, out: &Path, sys: &FeherSystem, span: &TimeSpan<f64>, jobs: usize) -> Result<(), Failure> {
    let run = simulate_aks(config, out, sys, span, "check")?;
    let run = &run;
    let tol = config.tolerances;
    let n = sys.algebras().full.dim();
    let seed = config.seed();
    let mut tasks: Vec<Task> = vec![
        Box::new(move || {
            let (d2, d3) = run.invariant_drift();
            Ok(vec![
                Line::bounded("tr(Lambda^2) drift", d2, tol.spectral),
                Line::bounded("tr(Lambda^3) drift", d3, tol.spectral),
            ])
        }),
        Box::new(move || {
            let mut worst = 0.0f64;
            for s in &run.samples {
                worst = worst.max(sys.stationarity_defect(&s.state).map_err(|e| Failure::engine("stationarity", e))?);
            }
            Ok(vec![Line::bounded("stationarity defect", worst, tol.stationarity)])
        }),
    ];
    for (name, frame) in [
        ("residual, coordinate frame", Frame::coordinate(n)),
        ("residual, random frame", random_frame(seed, n, 0.5)),
    ] {
        tasks.push(Box::new(move || {
            let r = sys.max_el_residual(run, &frame, AKS_RESIDUAL_STRIDE).map_err(|e| Failure::engine(name, e))?;
            Ok(vec![Line::bounded(name, r, tol.residual)])
        }));
    }
    report(&collect_lines(run_pool(jobs, tasks))?)
}
