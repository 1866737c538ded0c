//! Gradient descent, normalized gradient descent and progressive rescaling
//! gradient descent (PRGD) on the exponential loss.
//!
//! PRGD alternates cycles of
//! 1. a rescaling step `w <- R_k w / |w|`, then
//! 2. `T_{k+1} - T_k - 1` normalized gradient steps, each followed by
//!    Euclidean projection onto the ball of radius `R_k`.
//!
//! Each rescaling consumes one time index, as do the gradient steps.

mod schedule;
mod trajectory;

pub use schedule::{PerpendicularTarget, Progression, Schedule, ScheduleKind};
pub use trajectory::{
    fmt17, load_trajectory_csv, read_trajectory_csv, Phase, Reference, RunOptions,
    TrajectoryRecord, TrajectoryRow,
};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{check_dim, MarginError, Result};
use crate::margin::{LossEval, Weight};
use trajectory::Recorder;

/// Norms below this cannot be rescaled.
pub const MIN_RESCALE_NORM: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Gd,
    Ngd,
}

fn check_eta(eta: f64) -> Result<()> {
    if eta >= 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(MarginError::Domain(format!(
            "step size must be finite and non-negative, got {eta}"
        )))
    }
}

/// `w - eta * grad L(w)`, with the gradient rebuilt as `L(w) * (grad L / L)`.
/// At large norms `L(w)` underflows and the step vanishes, as true GD would.
pub fn gd_step(w: &Weight, ds: &Dataset, eta: f64) -> Result<Weight> {
    check_eta(eta)?;
    let eval = LossEval::evaluate(w, ds)?;
    let scale = eta * eval.log_loss.exp();
    Ok(w - &(eval.normalized_gradient * scale))
}

/// `w - eta * grad L(w) / L(w)`.
pub fn ngd_step(w: &Weight, ds: &Dataset, eta: f64) -> Result<Weight> {
    check_eta(eta)?;
    let eval = LossEval::evaluate(w, ds)?;
    Ok(w - &(eval.normalized_gradient * eta))
}

pub fn step(kind: StepKind, w: &Weight, ds: &Dataset, eta: f64) -> Result<Weight> {
    match kind {
        StepKind::Gd => gd_step(w, ds, eta),
        StepKind::Ngd => ngd_step(w, ds, eta),
    }
}

/// Plain GD or NGD for `steps` iterations from the origin.
pub fn run_baseline(
    ds: &Dataset,
    kind: StepKind,
    eta: f64,
    steps: usize,
    opts: &RunOptions,
) -> Result<TrajectoryRecord> {
    check_eta(eta)?;
    let phase = match kind {
        StepKind::Gd => Phase::GdStep,
        StepKind::Ngd => Phase::NgdStep,
    };
    let mut rec = Recorder::new(ds, opts);
    let mut w = Weight::zeros(ds.dim());
    rec.observe(0, Phase::Init, &w)?;
    let steps = opts.max_iterations.map_or(steps, |m| m.min(steps));
    let mut t = 0;
    while t < steps && !rec.stopped() {
        w = step(kind, &w, ds, eta)?;
        t += 1;
        rec.observe(t, phase, &w)?;
    }
    rec.finish(t, if t == 0 { Phase::Init } else { phase }, w)
}

/// PRGD for `cycles` cycles starting from `w0` at time 0.
pub fn prgd_run<P: Progression + ?Sized>(
    w0: &Weight,
    ds: &Dataset,
    eta: f64,
    schedule: &P,
    cycles: usize,
    opts: &RunOptions,
) -> Result<TrajectoryRecord> {
    check_dim(ds.dim(), w0.len())?;
    check_eta(eta)?;
    let mut rec = Recorder::new(ds, opts);
    rec.observe(0, Phase::Init, w0)?;
    rec.mark_acceleration(0);
    let (w, t, phase) = accelerate(&mut rec, w0.clone(), 0, ds, eta, schedule, cycles, opts)?;
    rec.finish(t, phase, w)
}

#[allow(clippy::too_many_arguments)]
fn accelerate<P: Progression + ?Sized>(
    rec: &mut Recorder<'_>,
    mut w: Weight,
    start: usize,
    ds: &Dataset,
    eta: f64,
    schedule: &P,
    cycles: usize,
    opts: &RunOptions,
) -> Result<(Weight, usize, Phase)> {
    let start_norm = w.dot(&w).sqrt();
    let limit = opts.max_iterations.map(|m| start + m);
    let mut t = start;
    let mut phase = Phase::Init;
    let done = |t: usize, rec: &Recorder<'_>| rec.stopped() || limit.is_some_and(|l| t >= l);
    'cycles: for k in 0..cycles {
        if done(t, rec) {
            break;
        }
        let norm = w.dot(&w).sqrt();
        if !(norm >= MIN_RESCALE_NORM) {
            return Err(MarginError::ZeroVector("rescaling requires a nonzero iterate"));
        }
        let radius = schedule.radius(k, &w, start_norm);
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(MarginError::Schedule(format!(
                "radius R_{k} = {radius} is not a positive finite number"
            )));
        }
        w *= radius / norm;
        t += 1;
        phase = Phase::Rescale;
        rec.observe(t, phase, &w)?;
        for _ in 1..schedule.cycle_len(k) {
            if done(t, rec) {
                break 'cycles;
            }
            let mut v = ngd_step(&w, ds, eta)?;
            let vn = v.dot(&v).sqrt();
            if vn > radius {
                v *= radius / vn;
            }
            w = v;
            t += 1;
            phase = Phase::NgdStep;
            rec.observe(t, phase, &w)?;
        }
    }
    Ok((w, t, phase))
}

/// Warm-up phase parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Warmup {
    pub kind: StepKind,
    pub steps: usize,
}

impl Default for Warmup {
    fn default() -> Self {
        Self {
            kind: StepKind::Gd,
            steps: 1000,
        }
    }
}

/// GD or NGD warm-up from the origin, then PRGD from the warm-up iterate.
///
/// `opts.max_iterations` caps the accelerated phase only.
pub fn two_phase_run<P: Progression + ?Sized>(
    ds: &Dataset,
    eta: f64,
    warmup: Warmup,
    schedule: &P,
    cycles: usize,
    opts: &RunOptions,
) -> Result<TrajectoryRecord> {
    check_eta(eta)?;
    if warmup.steps == 0 {
        return Err(MarginError::Domain("warm-up needs at least one step".into()));
    }
    let mut rec = Recorder::new(ds, opts);
    let mut w = Weight::zeros(ds.dim());
    rec.observe(0, Phase::Init, &w)?;
    let mut t = 0;
    while t < warmup.steps && !rec.stopped() {
        w = step(warmup.kind, &w, ds, eta)?;
        t += 1;
        rec.observe(t, Phase::Warmup, &w)?;
    }
    if rec.stopped() {
        return rec.finish(t, Phase::Warmup, w);
    }
    rec.mark_acceleration(t);
    let (w, t_end, phase) = accelerate(&mut rec, w, t, ds, eta, schedule, cycles, opts)?;
    let phase = if t_end == t { Phase::Warmup } else { phase };
    rec.finish(t_end, phase, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_toy;
    use crate::margin::{directional_error, margin};
    use ndarray::array;

    fn toy_ref(g: f64) -> Reference {
        Reference {
            w_star: array![1.0, 0.0],
            gamma_star: g,
        }
    }

    #[test]
    fn gd_step_from_origin() {
        let ds = make_toy(0.5).unwrap();
        let w = gd_step(&array![0.0, 0.0], &ds, 1.0).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!((w[1] - 0.75_f64.sqrt() / 3.0).abs() < 1e-15);
        let same = gd_step(&array![0.3, -0.2], &ds, 0.0).unwrap();
        assert_eq!(same, array![0.3, -0.2]);
    }

    #[test]
    fn ngd_step_advances_axis_by_gamma() {
        let g = 0.5_f64;
        let ds = make_toy(g).unwrap();
        let w = ngd_step(&array![0.0, 0.0], &ds, 1.0).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!((w[1] - 0.75_f64.sqrt() / 3.0).abs() < 1e-15);
        let w = array![3.0, -0.7];
        let next = ngd_step(&w, &ds, 1.0).unwrap();
        assert!((next[0] - w[0] - g).abs() < 1e-14);
    }

    #[test]
    fn ngd_first_step_matches_recursion_start() {
        let g = 0.3_f64;
        let s = (1.0 - g * g).sqrt();
        let ds = make_toy(g).unwrap();
        let w = ngd_step(&array![0.0, 0.0], &ds, 1.0).unwrap();
        let x1 = 2.0 * w[1] * s - std::f64::consts::LN_2;
        let expected = -std::f64::consts::LN_2 + 2.0 * (1.0 - g * g) / 3.0;
        assert!((x1 - expected).abs() < 1e-15);
    }

    #[test]
    fn negative_step_rejected() {
        let ds = make_toy(0.5).unwrap();
        assert!(ngd_step(&array![0.0, 0.0], &ds, -1.0).is_err());
        assert!(gd_step(&array![0.0, 0.0, 1.0], &ds, 1.0).is_err());
    }

    #[test]
    fn baseline_rows_and_weights() {
        let ds = make_toy(0.5).unwrap();
        let opts = RunOptions {
            keep_weights: true,
            ..RunOptions::with_reference(toy_ref(0.5))
        };
        let rec = run_baseline(&ds, StepKind::Ngd, 1.0, 10, &opts).unwrap();
        assert_eq!(rec.rows.len(), 11);
        assert_eq!(rec.rows[0].phase, Phase::Init);
        assert!(rec.rows[0].margin.is_nan());
        assert_eq!(rec.weights.as_ref().unwrap().len(), 11);
        for (row, w) in rec.rows.iter().zip(rec.weights.as_ref().unwrap()).skip(1) {
            assert!((row.margin_gap - (0.5 - row.margin)).abs() < 1e-14);
            assert_eq!(row.margin, margin(w, &ds).unwrap());
        }
        assert_eq!(rec.final_time, 10);
    }

    #[test]
    fn stride_keeps_last_row() {
        let ds = make_toy(0.5).unwrap();
        let opts = RunOptions {
            log_stride: 4,
            ..RunOptions::with_reference(toy_ref(0.5))
        };
        let rec = run_baseline(&ds, StepKind::Gd, 1.0, 10, &opts).unwrap();
        let ts: Vec<usize> = rec.rows.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 4, 8, 10]);
    }

    #[test]
    fn early_stop_records_first_crossing() {
        let ds = make_toy(0.5).unwrap();
        let opts = RunOptions {
            stop_gap: Some(1e-2),
            ..RunOptions::with_reference(toy_ref(0.5))
        };
        let rec = run_baseline(&ds, StepKind::Ngd, 1.0, 100_000, &opts).unwrap();
        let t = rec.stop_time.unwrap();
        assert_eq!(rec.final_time, t);
        assert!(rec.last().unwrap().margin_gap < 1e-2);
        assert!(rec.rows[rec.rows.len() - 2].margin_gap >= 1e-2);
    }

    #[test]
    fn prgd_rescale_and_projection_contracts() {
        let ds = make_toy(0.5).unwrap();
        let w0 = ngd_step(&array![0.0, 0.0], &ds, 1.0).unwrap();
        let sched = Schedule::exp_radius(4, 1.5);
        let opts = RunOptions {
            keep_weights: true,
            ..RunOptions::with_reference(toy_ref(0.5))
        };
        let rec = prgd_run(&w0, &ds, 1.0, &sched, 6, &opts).unwrap();
        let start = w0.dot(&w0).sqrt();
        let ws = rec.weights.as_ref().unwrap();
        let mut k = 0;
        for i in 1..rec.rows.len() {
            let row = &rec.rows[i];
            let prev = &rec.rows[i - 1];
            let radius = start * 1.5f64.powi(k as i32);
            match row.phase {
                Phase::Rescale => {
                    assert!((row.norm - radius).abs() < 1e-12 * radius);
                    assert!((row.margin - prev.margin).abs() < 1e-12);
                    assert!((row.dir_err - prev.dir_err).abs() < 1e-12);
                    assert!((directional_error(&ws[i], &array![1.0, 0.0]).unwrap()
                        - row.dir_err)
                        .abs()
                        < 1e-15);
                }
                Phase::NgdStep => {
                    assert!(row.norm <= radius + 1e-12);
                    if i + 1 < rec.rows.len() && rec.rows[i + 1].phase == Phase::Rescale {
                        k += 1;
                    }
                }
                _ => unreachable!(),
            }
        }
        assert_eq!(rec.final_time, 24);
    }

    #[test]
    fn prgd_rejects_zero_start() {
        let ds = make_toy(0.5).unwrap();
        let err = prgd_run(
            &array![0.0, 0.0],
            &ds,
            1.0,
            &Schedule::default(),
            1,
            &RunOptions::default(),
        );
        assert!(matches!(err, Err(MarginError::ZeroVector(_))));
    }

    #[test]
    fn two_phase_without_cycles_is_plain_warmup() {
        let ds = make_toy(0.5).unwrap();
        let opts = RunOptions::with_reference(toy_ref(0.5));
        let warm = Warmup {
            kind: StepKind::Ngd,
            steps: 50,
        };
        let two = two_phase_run(&ds, 1.0, warm, &Schedule::default(), 0, &opts).unwrap();
        let plain = run_baseline(&ds, StepKind::Ngd, 1.0, 50, &opts).unwrap();
        assert_eq!(two.final_weight, plain.final_weight);
        assert_eq!(two.rows.len(), plain.rows.len());
        for (a, b) in two.rows.iter().zip(&plain.rows) {
            assert_eq!(a.norm, b.norm);
            assert_eq!(a.t, b.t);
        }
    }

    #[test]
    fn two_phase_first_rescale_keeps_direction() {
        let ds = make_toy(0.5).unwrap();
        let opts = RunOptions::with_reference(toy_ref(0.5));
        let warm = Warmup {
            kind: StepKind::Gd,
            steps: 20,
        };
        let sched = Schedule::exp_radius(5, 1.2).with_r0(100.0);
        let rec = two_phase_run(&ds, 1.0, warm, &sched, 3, &opts).unwrap();
        assert_eq!(rec.acceleration_start, Some(20));
        let before = &rec.rows[20];
        let after = &rec.rows[21];
        assert_eq!(before.phase, Phase::Warmup);
        assert_eq!(after.phase, Phase::Rescale);
        assert!((after.norm - 100.0).abs() < 1e-12);
        assert!((after.dir_err - before.dir_err).abs() < 1e-12);
        assert_eq!(rec.final_time, 35);
    }

    #[test]
    fn max_iterations_caps_accelerated_phase() {
        let ds = make_toy(0.5).unwrap();
        let opts = RunOptions {
            max_iterations: Some(7),
            ..RunOptions::with_reference(toy_ref(0.5))
        };
        let warm = Warmup {
            kind: StepKind::Ngd,
            steps: 3,
        };
        let rec = two_phase_run(&ds, 1.0, warm, &Schedule::default(), 10, &opts).unwrap();
        assert_eq!(rec.final_time, 10);
    }
}
