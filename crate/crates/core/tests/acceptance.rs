//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use brachiation::checks::{free_response, random_state};
use brachiation::config::RunConfig;
use brachiation::dynamics::{Robot, RobotParams, RobotState, SpringDamperParams, UncertainParamVector};
use brachiation::oracle::{relative_error, LagrangianOracle};
use brachiation::sim::{
    augmented_derivative, compute_metrics, monte_carlo, run_continuous, run_swing, Aggregate, AugmentedState,
    ControllerKind, EpisodeLog, ForceModel, MonteCarloResult, Scenario,
};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    name: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
    elapsed: Duration,
}

impl Verdict {
    fn new(name: &'static str) -> Self {
        Self { name, failures: Vec::new(), notes: Vec::new(), elapsed: Duration::ZERO }
    }

    fn check(&mut self, ok: bool, what: String) {
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn runtime(&mut self, start: Instant, limit: Duration) {
        self.elapsed = start.elapsed();
        let secs = self.elapsed.as_secs_f64();
        self.check(self.elapsed < limit, format!("runtime {secs:.1} s < {} s", limit.as_secs()));
    }

    fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn print(&self) {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let detail = if self.passed() { self.notes.join("; ") } else { format!("violated: {}", self.failures.join("; ")) };
        println!("{status} {:<26} {detail}", self.name);
    }
}

fn experiment(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments").join(format!("{name}.toml"));
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn csv_bytes(log: &EpisodeLog, dir: &Path, name: &str) -> Vec<u8> {
    let path = dir.join(format!("{name}.csv"));
    log.write(&path).unwrap();
    let mut b = std::fs::read(&path).unwrap();
    b.extend(std::fs::read(dir.join(format!("{name}_events.csv"))).unwrap());
    b
}

fn oracle_suite() -> Verdict {
    let mut v = Verdict::new("dynamics-oracle");
    let start = Instant::now();
    let params = RobotParams::default();
    let robot = Robot::new(params).unwrap();
    let oracle = LagrangianOracle::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = random_state(&mut rng);
        let mm = robot.manipulator_matrices(&s);
        worst = worst
            .max(relative_error(mm.mass.iter(), oracle.mass_matrix(&s.q).iter()))
            .max(relative_error(mm.coriolis.iter(), oracle.coriolis(&s.q, &s.qdot).iter()))
            .max(relative_error(mm.gravity.iter(), oracle.gravity(&s.q).iter()));
    }
    v.check(worst <= 1e-6, format!("max relative error {worst:.2e} <= 1e-6 over 1000 states"));
    v.runtime(start, Duration::from_secs(10));
    v
}

fn affine_suite() -> Verdict {
    let mut v = Verdict::new("affine-equivalence");
    let start = Instant::now();
    let robot = Robot::new(RobotParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut n) = (0.0f64, 0usize);
    while n < 1000 {
        let s = random_state(&mut rng);
        let Ok(at) = robot.affine_terms(&s) else { continue };
        let mut r = |a: f64, b: f64| a + (b - a) * rng.random::<f64>();
        let p = UncertainParamVector::from(&SpringDamperParams::new(r(100.0, 2000.0), r(0.0, 50.0), r(1.0, 3.0)));
        let (f_d, u) = (r(-20.0, 20.0), r(-10.0, 10.0));
        let qdd = robot.forward_dynamics(&s, u, p.spring_force(s.q[2], s.qdot[2]) + f_d).unwrap();
        let direct = qdd[0] + 0.5 * qdd[1];
        worst = worst.max((direct - at.output_acceleration(&p, f_d, u)).abs() / direct.abs().max(1.0));
        n += 1;
    }
    v.check(worst <= 1e-8, format!("max relative error {worst:.2e} <= 1e-8 over {n} tuples"));
    v.elapsed = start.elapsed();
    v
}

fn energy_suite() -> Verdict {
    let mut v = Verdict::new("energy");
    let start = Instant::now();
    let robot = Robot::new(RobotParams::default()).unwrap();
    let undamped = SpringDamperParams { b_s: 0.0, ..SpringDamperParams::reference() };
    let x0 = RobotState::from_degrees([-48.0, -98.0, 1.84, 0.0, 0.0, 0.0]);
    let (x1, _) = free_response(&robot, &undamped, x0, 1.0, 1e-5).unwrap();
    let (e0, e1) = (robot.total_energy(&x0, Some(&undamped)), robot.total_energy(&x1, Some(&undamped)));
    let drift = ((e1 - e0) / e0).abs();
    v.check(drift <= 1e-6, format!("undamped drift {drift:.2e} <= 1e-6"));

    let damped = SpringDamperParams::reference();
    let x0 = RobotState::from_degrees([-35.0, -110.0, 1.95, 60.0, -90.0, 0.4]);
    let (x1, dissipated) = free_response(&robot, &damped, x0, 1.0, 1e-5).unwrap();
    let drop = robot.total_energy(&x0, Some(&damped)) - robot.total_energy(&x1, Some(&damped));
    let err = ((drop - dissipated) / dissipated).abs();
    v.check(err <= 1e-4, format!("damped decrement vs dissipation {err:.2e} <= 1e-4"));
    v.elapsed = start.elapsed();
    v
}

fn exact_model() -> Verdict {
    let mut v = Verdict::new("exact-model-tracking");
    let start = Instant::now();
    let cfg = experiment("fig4_spring_damper");
    let mut sc = cfg.scenario(ControllerKind::AdaptiveRobust).unwrap();
    sc.initial_guess = sc.spring;
    sc.disturbance = None;
    let y0 = sc.initial.q[0] + 0.5 * sc.initial.q[1];
    let on = (y0 - sc.trajectory.sample(0.0).y_d).abs();
    v.check(on < 1e-9, format!("starts on the reference ({:.1e} rad)", on));
    let m = compute_metrics(&run_swing(&sc).unwrap()).unwrap();
    v.check(m.rmse_y < 0.5, format!("rmse_y {:.3} deg < 0.5", m.rmse_y));
    v.elapsed = start.elapsed();
    v
}

fn spring_damper(log_out: &mut Option<EpisodeLog>) -> Verdict {
    let mut v = Verdict::new("spring-damper-disturbance");
    let start = Instant::now();
    let cfg = experiment("fig4_spring_damper");
    let sc = cfg.scenario(ControllerKind::AdaptiveRobust).unwrap();
    let log = run_swing(&sc).unwrap();
    let (phi, lambda) = (sc.gains.phi, sc.gains.lambda);
    v.check(log.success, format!("grab {}", if log.success { "succeeds" } else { "fails" }));

    let late: Vec<_> = log.rows.iter().filter(|r| r.t >= 0.45 - 1e-9).collect();
    let s_max = late.iter().map(|r| r.s.abs()).fold(0.0, f64::max);
    let e_max = late.iter().map(|r| (r.y_d - r.y).abs()).fold(0.0, f64::max);
    v.check(s_max <= phi + 0.05, format!("max |s| after 0.45 s = {s_max:.3} <= {:.2}", phi + 0.05));
    v.check(e_max <= phi / lambda + 0.01, format!("max |e| after 0.45 s = {e_max:.4} rad <= {:.3}", phi / lambda + 0.01));

    let truth = UncertainParamVector::from(&sc.spring).0;
    let (first, last) = (log.rows.first().unwrap(), log.rows.last().unwrap());
    let e0 = (Vector3::from(first.p_hat) - truth).abs();
    let e1 = (Vector3::from(last.p_hat) - truth).abs();
    for (k, name) in ["k_s", "b_s", "k_s z_s"].iter().enumerate() {
        v.check(e1[k] < e0[k], format!("|p_hat - p| {name}: {:.2} -> {:.2}", e0[k], e1[k]));
    }
    let monotone = log.rows.windows(2).all(|w| w[1].k_d >= w[0].k_d);
    v.check(monotone, format!("k_d non-decreasing ({:.3} -> {:.3})", first.k_d, last.k_d));

    let robot = Robot::new(sc.robot).unwrap();
    let force = ForceModel::Surrogate { truth: sc.spring, disturbance: sc.disturbance };
    let frozen = log.rows.iter().filter(|r| r.s.abs() <= phi).all(|r| {
        let x = AugmentedState {
            robot: RobotState::new(Vector3::from(r.q), Vector3::from(r.qdot)),
            p_hat: Vector3::from(r.p_hat),
            k_d: r.k_d,
        };
        let (_, _, dp, dk) = augmented_derivative(&robot, &sc.trajectory, &sc.gains, true, r.u, force, r.t, &x).unwrap();
        dp == Vector3::zeros() && dk == 0.0
    });
    v.check(frozen, "adaptation frozen inside the boundary layer".into());
    v.runtime(start, Duration::from_secs(30));
    *log_out = Some(log);
    v
}

fn cable_swing(logs: &mut Vec<EpisodeLog>) -> Verdict {
    let mut v = Verdict::new("cable-single-swing");
    let start = Instant::now();
    let cfg = experiment("fig3_single_swing");
    let run = |k| run_swing(&cfg.scenario(k).unwrap()).unwrap();
    let (ours, base) = (run(ControllerKind::AdaptiveRobust), run(ControllerKind::FeedbackLinearization));
    let (mo, mb) = (compute_metrics(&ours).unwrap(), compute_metrics(&base).unwrap());
    v.check(ours.success, format!("proposed grab {}", if ours.success { "succeeds" } else { "fails" }));
    v.check(mo.rmse_y <= 6.0, format!("proposed rmse_y {:.2} deg <= 6", mo.rmse_y));
    v.check(mo.rms_u <= 4.0, format!("proposed rms_u {:.2} N m <= 4", mo.rms_u));
    v.check(mb.rmse_y > mo.rmse_y, format!("baseline rmse_y {:.2} > proposed {:.2}", mb.rmse_y, mo.rmse_y));
    v.check(!base.success, format!("baseline grab {}", if base.success { "succeeds" } else { "fails" }));
    v.runtime(start, Duration::from_secs(300));
    logs.push(ours);
    logs.push(base);
    v
}

fn monte_carlo_batch() -> (RunConfig, Scenario, Vec<ControllerKind>) {
    let cfg = experiment("fig5_monte_carlo");
    let kinds = cfg.run.controller.kinds();
    let base = cfg.scenario(kinds[0]).unwrap();
    (cfg, base, kinds)
}

fn monte_carlo_suite(out: &mut Option<MonteCarloResult>) -> Verdict {
    let mut v = Verdict::new("monte-carlo");
    let start = Instant::now();
    let (cfg, base, kinds) = monte_carlo_batch();
    let n = cfg.monte_carlo.n;
    let mc = monte_carlo(&base, &kinds, &cfg.monte_carlo.ranges, n, cfg.run.seed).unwrap();
    let find = |k: ControllerKind| mc.aggregates.iter().find(|a| a.controller == k.label()).unwrap();
    let (o, b) = (find(ControllerKind::AdaptiveRobust), find(ControllerKind::FeedbackLinearization));
    v.check(o.rmse_y < b.rmse_y, format!("rmse_y {:.2} < {:.2}", o.rmse_y, b.rmse_y));
    v.check(o.rmse_ydot < b.rmse_ydot, format!("rmse_ydot {:.2} < {:.2}", o.rmse_ydot, b.rmse_ydot));
    v.check(o.rms_u < b.rms_u, format!("rms_u {:.2} < {:.2}", o.rms_u, b.rms_u));
    v.check(o.rmse_y <= 8.0, format!("proposed rmse_y {:.2} deg <= 8", o.rmse_y));
    v.check(o.successes * 20 >= 18 * o.runs, format!("proposed successes {}/{} >= 18/20", o.successes, o.runs));
    v.runtime(start, Duration::from_secs(1800));
    *out = Some(mc);
    v
}

fn continuous(log_out: &mut Option<EpisodeLog>) -> Verdict {
    let mut v = Verdict::new("continuous-brachiation");
    let cfg = experiment("fig7_continuous");
    let sc = cfg.scenario(ControllerKind::AdaptiveRobust).unwrap();
    let start = Instant::now();
    let log = run_continuous(&sc).unwrap();
    v.check(
        log.success && log.swings_completed == 5,
        format!("{} of 5 swings completed", log.swings_completed),
    );
    let u_max = log.rows.iter().map(|r| r.u.abs()).fold(0.0, f64::max);
    v.check(u_max <= 10.0, format!("max |u| {u_max:.2} N m <= 10"));
    v.check(log.progress() >= 4.0, format!("progress {:.2} m >= 4", log.progress()));
    v.elapsed = start.elapsed();
    *log_out = Some(log);
    v
}

fn determinism(
    dir: &Path,
    fig3: &[EpisodeLog],
    fig4: &EpisodeLog,
    mc: &MonteCarloResult,
    fig7: &EpisodeLog,
) -> Verdict {
    let mut v = Verdict::new("determinism");
    let start = Instant::now();
    let same = |a: &EpisodeLog, b: &EpisodeLog, name: &str| csv_bytes(a, dir, &format!("{name}_a")) == csv_bytes(b, dir, &format!("{name}_b"));

    let cfg = experiment("fig3_single_swing");
    let kinds = [ControllerKind::AdaptiveRobust, ControllerKind::FeedbackLinearization];
    for (log, k) in fig3.iter().zip(kinds) {
        let again = run_swing(&cfg.scenario(k).unwrap()).unwrap();
        v.check(same(log, &again, k.label()), format!("single swing {} identical", k.label()));
    }
    let again = run_swing(&experiment("fig4_spring_damper").scenario(ControllerKind::AdaptiveRobust).unwrap()).unwrap();
    v.check(same(fig4, &again, "fig4"), "spring-damper run identical".into());

    let (cfg, base, kinds) = monte_carlo_batch();
    let again = monte_carlo(&base, &kinds, &cfg.monte_carlo.ranges, cfg.monte_carlo.n, cfg.run.seed).unwrap();
    let agg = |a: &[Aggregate], name: &str| {
        let p = dir.join(name);
        Aggregate::write_csv(a, &p).unwrap();
        std::fs::read(p).unwrap()
    };
    let runs_equal = mc.runs.iter().zip(&again.runs).all(|(a, b)| same(&a.log, &b.log, "mc"));
    v.check(
        agg(&mc.aggregates, "agg_a.csv") == agg(&again.aggregates, "agg_b.csv") && runs_equal,
        format!("Monte Carlo aggregate and {} run logs identical", mc.runs.len()),
    );

    let again = run_continuous(&experiment("fig7_continuous").scenario(ControllerKind::AdaptiveRobust).unwrap()).unwrap();
    v.check(same(fig7, &again, "fig7"), "continuous run identical".into());
    v.elapsed = start.elapsed();
    v
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let mut verdicts = vec![oracle_suite(), affine_suite(), energy_suite(), exact_model()];
    let (mut fig4, mut fig3, mut mc, mut fig7) = (None, Vec::new(), None, None);
    verdicts.push(spring_damper(&mut fig4));
    verdicts.push(cable_swing(&mut fig3));
    verdicts.push(monte_carlo_suite(&mut mc));
    verdicts.push(continuous(&mut fig7));
    verdicts.push(determinism(dir, &fig3, fig4.as_ref().unwrap(), mc.as_ref().unwrap(), fig7.as_ref().unwrap()));

    println!();
    for v in &verdicts {
        v.print();
    }
    let failed = verdicts.iter().filter(|v| !v.passed()).count();
    println!("\nacceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
