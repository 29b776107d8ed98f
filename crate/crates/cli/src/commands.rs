use std::f64::consts::PI;

use serde::Serialize;

use abpeakon::closed_form::{g1, g2, make_profile, z_of_q, CaseProfile};
use abpeakon::dynamics::{
    integrate, integrate_reduced, integrate_with_outputs, qp_bracket, rhs_full, rhs_qp, Event, ReducedState, Trajectory,
};
use abpeakon::peakon::peakon_speed;
use abpeakon::residual::{max_local_residual, nonlocal_residual, nonuniqueness_demo, refines_by, BranchCheck, ResidualReport};
use abpeakon::sobolev::convergence_study;
use abpeakon::{AbParams, CollisionProfile, Error, TwoPeakonState};

use crate::config::RunConfig;
use crate::output::{fmt_f64, write_json, Table};
use crate::CliError;

/// Relative offsets `10^{-k}` of the convergence-table times before the event.
pub const TIME_OFFSETS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

struct Setup {
    params: AbParams,
    case: Option<CaseProfile>,
    initial: TwoPeakonState,
    t_max: f64,
}

fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    cfg.validate()?;
    let params = AbParams::new(cfg.a, cfg.b)?;
    match cfg.single {
        Some(p) => {
            let speed = peakon_speed(&params, p);
            let t_max = match cfg.t_max {
                Some(t) => t,
                None if speed != 0.0 => 2.0 * PI / speed.abs(),
                None => return Err(CliError::Validation("zero-amplitude peakon: give --t-max".into())),
            };
            Ok(Setup { params, case: None, initial: TwoPeakonState::single(0.0, p, 0.0), t_max })
        }
        None => {
            let case = make_profile(&params, cfg.alpha, cfg.delta, cfg.c)?;
            let t_max = cfg.t_max.unwrap_or(4.0 * case.tc_bound);
            Ok(Setup { params, initial: case.initial, case: Some(case), t_max })
        }
    }
}

fn require_case(s: &Setup, what: &str) -> Result<CaseProfile, CliError> {
    s.case.ok_or_else(|| CliError::Validation(format!("{what} needs a colliding case profile, not --single")))
}

#[derive(Serialize)]
struct EventsDoc<'a> {
    mode: &'static str,
    case: Option<&'a CaseProfile>,
    mu: Option<f64>,
    epsilon: Option<f64>,
    tc_bound: Option<f64>,
    events: &'a [Event],
    event_time: Option<f64>,
    collision_profile: Option<CollisionProfile>,
    accepted_tolerance: f64,
    samples: usize,
    partial: bool,
    failure: Option<String>,
}

fn write_trajectory(cfg: &RunConfig, s: &Setup, traj: &Trajectory, failure: Option<String>) -> Result<(), CliError> {
    let mut table = Table::new("trajectory", &["t", "q1", "q2", "p1", "p2", "q", "h", "w", "z", "p"]);
    for st in &traj.samples {
        let r = ReducedState::from_state(st);
        table.row(&[st.t, st.q1(), st.q2(), st.p1(), st.p2(), r.q, r.h, r.w, r.z, r.p()].map(fmt_f64));
    }
    let mut notes = vec![format!("mode: {}", if s.case.is_some() { "case" } else { "single" })];
    if let Some(f) = &failure {
        notes.push(format!("partial: {f}"));
    }
    table.write(&cfg.output_dir.join("trajectory.csv"), cfg, &notes)?;
    let doc = EventsDoc {
        mode: if s.case.is_some() { "case" } else { "single" },
        case: s.case.as_ref(),
        mu: s.case.map(|c| c.mu),
        epsilon: s.case.map(|c| c.epsilon),
        tc_bound: s.case.map(|c| c.tc_bound),
        events: &traj.events,
        event_time: traj.event_time(),
        collision_profile: traj.collision_profile().filter(|_| traj.event_time().is_some()),
        accepted_tolerance: traj.accepted_tolerance,
        samples: traj.samples.len(),
        partial: failure.is_some(),
        failure,
    };
    write_json(&cfg.output_dir.join("events.json"), "events", cfg, &doc)
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let s = setup(cfg)?;
    match integrate(&s.params, &s.initial, s.t_max, cfg.tol) {
        Ok(traj) => write_trajectory(cfg, &s, &traj, None),
        Err(Error::Integration { t, reason, partial }) => {
            let msg = format!("integration failed at t = {t}: {reason}");
            write_trajectory(cfg, &s, &partial, Some(msg.clone()))?;
            Err(CliError::Numerical(msg))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Time of the worst sample.
    pub worst_time: Option<f64>,
}

/// Running maximum of `value` over samples, remembering where it occurred.
struct Worst {
    value: f64,
    time: Option<f64>,
}

impl Worst {
    fn new() -> Self {
        Self { value: f64::NEG_INFINITY, time: None }
    }

    fn push(&mut self, t: f64, v: f64) {
        if v > self.value || v.is_nan() {
            self.value = v;
            self.time = Some(t);
        }
    }

    fn check(self, name: &'static str, threshold: f64) -> Check {
        Check { name, value: self.value, threshold, passed: self.value <= threshold, worst_time: self.time }
    }
}

#[derive(Serialize)]
struct VerifyDoc {
    case: CaseProfile,
    event_time: Option<f64>,
    all_passed: bool,
    checks: Vec<Check>,
}

pub fn run_checks(params: &AbParams, case: &CaseProfile, traj: &Trajectory, tol: f64) -> Result<Vec<Check>, CliError> {
    let init = ReducedState::from_state(&case.initial);
    let (z0, h0, w0, mu) = (init.z, init.h, init.w, case.mu);
    let mut zerr = Worst::new();
    let mut herr = Worst::new();
    let mut werr = Worst::new();
    let mut margin = Worst::new();
    let mut zsign = Worst::new();
    let mut dpsign = Worst::new();
    let mut bracket = Worst::new();
    for st in &traj.samples {
        let r = ReducedState::from_state(st);
        let t = st.t;
        zerr.push(t, (r.z - z_of_q(params, z0, mu, r.q)?).abs() / z0.abs());
        herr.push(t, (r.h * r.h - h0 * h0 - 2.0 * g1(params, z0, mu, r.q)?).abs());
        werr.push(t, (r.w * r.w - w0 * w0 - 2.0 * g2(params, z0, mu, r.q)?).abs());
        let (dq, dp) = rhs_qp(params, st);
        margin.push(t, dq + case.epsilon);
        // 0 when the sign is kept, 1 otherwise
        zsign.push(t, if r.z * z0 > 0.0 { 0.0 } else { 1.0 });
        dpsign.push(t, if dp * case.case_id.dp_sign() > 0.0 { 0.0 } else { 1.0 });
        bracket.push(t, -qp_bracket(st.p1(), st.p2(), r.q));
    }
    let mut checks = vec![
        zerr.check("z_identity_rel_error", 1e-8),
        herr.check("h_squared_identity_abs_error", 1e-6),
        werr.check("w_squared_identity_abs_error", 1e-6),
        margin.check("q_rate_plus_epsilon", 10.0 * tol),
        zsign.check("z_sign_changed", 0.0),
        dpsign.check("dp_sign_violated", 0.0),
    ];
    let mut b = bracket.check("bracket_negated_min", 0.0);
    b.passed = b.value < 0.0;
    checks.push(b);

    let t_event = traj.event_time();
    checks.push(Check {
        name: "event_time_over_bound",
        value: t_event.map_or(f64::INFINITY, |t| (t - case.initial.t) / case.tc_bound),
        threshold: 1.0,
        passed: t_event.is_some_and(|t| t - case.initial.t <= case.tc_bound),
        worst_time: t_event,
    });

    // reduced system at the interior sample times
    let n = traj.samples.len();
    let outputs: Vec<f64> = traj.samples[1..n.saturating_sub(1)].iter().map(|s| s.t).collect();
    let reduced = integrate_reduced(params, case.initial.t, &init, 4.0 * case.tc_bound, tol, &outputs)?;
    let mut agree = Worst::new();
    for st in &traj.samples[1..n.saturating_sub(1)] {
        if let Some(i) = reduced.times.iter().position(|&t| t == st.t) {
            let a = ReducedState::from_state(st);
            let b = reduced.states[i];
            let d = [a.q - b.q, a.h - b.h, a.w - b.w, a.z - b.z].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            agree.push(st.t, d);
        } else {
            agree.push(st.t, f64::INFINITY);
        }
    }
    checks.push(agree.check("reduced_full_max_difference", 100.0 * tol));
    Ok(checks)
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let case = require_case(&s, "verify")?;
    let traj = integrate(&s.params, &s.initial, s.t_max, cfg.tol)?;
    let checks = run_checks(&s.params, &case, &traj, cfg.tol)?;
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
    let doc = VerifyDoc { case, event_time: traj.event_time(), all_passed: failed.is_empty(), checks };
    write_json(&cfg.output_dir.join("verify.json"), "verify", cfg, &doc)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("failed checks: {}", failed.join(", "))))
    }
}

pub fn sobolev(cfg: &RunConfig) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let traj = integrate(&s.params, &s.initial, s.t_max, cfg.tol)?;
    let profile = traj
        .event_time()
        .and_then(|_| traj.collision_profile())
        .ok_or_else(|| CliError::Validation("trajectory has no collision or momentum event".into()))?;
    let t0 = traj.first().t;
    let span = traj.event_time().expect("checked") - t0;
    let times: Vec<f64> = TIME_OFFSETS.iter().map(|k| t0 + span - k * span).collect();
    let table = convergence_study(&traj, &profile, &cfg.s_values, &times)?;
    let mut csv = Table::new(
        "sobolev",
        &["s", "t", "partial_sum", "tail_bound", "certified_upper", "certified_lower", "refined_tail", "truncation"],
    );
    for r in &table.rows {
        let x = &r.series;
        let mut cells = [r.s, r.t, x.partial_sum, x.tail_bound, x.certified_upper(), x.certified_lower(), x.refined_tail]
            .map(fmt_f64)
            .to_vec();
        cells.push(x.truncation.to_string());
        csv.row(&cells);
    }
    let mut notes = vec![
        format!("event_time: {}", fmt_f64(table.event_time)),
        format!("p_star: {} q_star: {}", fmt_f64(profile.p_star), fmt_f64(profile.q_star())),
        format!("m_bound: {}", fmt_f64(table.m_bound)),
        "values are squared H^s distances to the collision profile".into(),
    ];
    for &sv in &cfg.s_values {
        notes.push(format!("s = {sv}: certified upper bounds decreasing = {}", table.upper_decreasing(sv)));
    }
    csv.write(&cfg.output_dir.join("sobolev.csv"), cfg, &notes)
}

#[derive(Serialize)]
struct ResidualDoc {
    state: TwoPeakonState,
    reports: Vec<ResidualReport>,
    max_abs_by_grid: Vec<(usize, f64)>,
    refines_by_factor_two: bool,
    max_local_relative: f64,
}

fn refinement_grids(finest: usize) -> Vec<usize> {
    let mut grids = vec![finest.min(512)];
    while *grids.last().expect("non-empty") < finest {
        let next = grids.last().expect("non-empty") * 2;
        grids.push(next);
    }
    grids
}

pub fn residual(cfg: &RunConfig) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let state = match s.case {
        None => s.initial,
        Some(_) => {
            let traj = integrate(&s.params, &s.initial, s.t_max, cfg.tol)?;
            let end = traj.event_time().unwrap_or(traj.last().t);
            let mid = s.initial.t + 0.5 * (end - s.initial.t);
            let run = integrate_with_outputs(&s.params, &s.initial, s.t_max, cfg.tol, &[mid], false)?;
            *run.samples.iter().find(|st| st.t == mid).ok_or_else(|| CliError::Numerical("no midpoint output".into()))?
        }
    };
    let rhs = rhs_full(&s.params, &state);
    let reports = refinement_grids(cfg.grid_size)
        .into_iter()
        .map(|m| nonlocal_residual(&s.params, &state, &rhs, m))
        .collect::<Result<Vec<_>, _>>()?;
    let doc = ResidualDoc {
        state,
        max_abs_by_grid: reports.iter().map(|r| (r.grid_size, r.max_abs_residual)).collect(),
        refines_by_factor_two: refines_by(&reports, 2.0),
        max_local_relative: max_local_residual(&s.params, &state, &rhs)?,
        reports,
    };
    write_json(&cfg.output_dir.join("residual.json"), "residual", cfg, &doc)
}

#[derive(Serialize)]
struct DistanceRow {
    s: f64,
    initial_partial_sum: f64,
    initial_certified_upper: f64,
    initial_tail_bound: f64,
    probe_certified_lower: f64,
    probe_certified_upper: f64,
    probe_tail_uncertainty: f64,
    probe_truncation: usize,
    separated_tenfold: bool,
}

#[derive(Serialize)]
struct BranchSummary {
    state: TwoPeakonState,
    max_abs_by_grid: Vec<(usize, f64)>,
    refines_by_factor_two: bool,
    max_local_relative: f64,
}

impl From<&BranchCheck> for BranchSummary {
    fn from(b: &BranchCheck) -> Self {
        Self {
            state: b.state,
            max_abs_by_grid: b.refinement.iter().map(|r| (r.grid_size, r.max_abs_residual)).collect(),
            refines_by_factor_two: refines_by(&b.refinement, 2.0),
            max_local_relative: b.max_local_relative,
        }
    }
}

#[derive(Serialize)]
struct NonuniqueDoc {
    event_time: f64,
    t_probe: f64,
    p_star: f64,
    q_star: f64,
    speed: f64,
    degenerate: bool,
    distances: Vec<DistanceRow>,
    single_branch: BranchSummary,
    reflected_branch: BranchSummary,
}

pub fn nonunique(cfg: &RunConfig) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let case = require_case(&s, "nonunique")?;
    let traj = integrate(&s.params, &s.initial, s.t_max, cfg.tol)?;
    let span = traj.event_time().ok_or_else(|| CliError::Validation("case trajectory has no event".into()))? - case.initial.t;
    let t_probe = cfg.t_probe.unwrap_or(0.5 * span);
    let reports = cfg
        .s_values
        .iter()
        .map(|&sv| nonuniqueness_demo(&s.params, &case, t_probe, sv, cfg.tol))
        .collect::<Result<Vec<_>, _>>()?;
    let first = &reports[0];
    let doc = NonuniqueDoc {
        event_time: first.event_time,
        t_probe,
        p_star: first.profile.p_star,
        q_star: first.profile.q_star(),
        speed: first.speed,
        degenerate: first.degenerate,
        distances: reports
            .iter()
            .map(|r| DistanceRow {
                s: r.s,
                initial_partial_sum: r.initial_distance.partial_sum,
                initial_certified_upper: r.initial_distance.certified_upper(),
                initial_tail_bound: r.initial_distance.tail_bound,
                probe_certified_lower: r.probe_distance.certified_lower(),
                probe_certified_upper: r.probe_distance.certified_upper(),
                probe_tail_uncertainty: r.probe_distance.tail_uncertainty(),
                probe_truncation: r.probe_distance.truncation,
                separated_tenfold: r.separated(10.0),
            })
            .collect(),
        single_branch: (&first.single_branch).into(),
        reflected_branch: (&first.reflected_branch).into(),
    };
    write_json(&cfg.output_dir.join("nonunique.json"), "nonunique", cfg, &doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_double_up_to_finest() {
        assert_eq!(refinement_grids(4096), vec![512, 1024, 2048, 4096]);
        assert_eq!(refinement_grids(256), vec![256]);
    }

    #[test]
    fn all_cases_pass_their_checks() {
        for (a, b) in [(1.0, 3.0), (1.0, 1.0), (-1.0, 3.0), (-1.0, 1.0)] {
            let cfg = RunConfig { a, b, ..Default::default() };
            let s = setup(&cfg).unwrap();
            let case = s.case.unwrap();
            let traj = integrate(&s.params, &s.initial, s.t_max, cfg.tol).unwrap();
            for c in run_checks(&s.params, &case, &traj, cfg.tol).unwrap() {
                assert!(c.passed, "a={a} b={b}: {c:?}");
            }
        }
    }

    #[test]
    fn loose_tolerance_degrades_the_z_identity() {
        let err = |tol: f64| {
            let cfg = RunConfig { tol, ..Default::default() };
            let s = setup(&cfg).unwrap();
            let traj = integrate(&s.params, &s.initial, s.t_max, tol).unwrap();
            run_checks(&s.params, &s.case.unwrap(), &traj, tol).unwrap()[0].value
        };
        assert!(err(1e-3) > 100.0 * err(1e-10));
    }
}
