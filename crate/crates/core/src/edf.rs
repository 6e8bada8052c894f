//! Preemptive earliest-deadline-first execution on a given speed profile.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::num::{abs, fmax, fmin};
use crate::step::StepFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdfJob {
    pub id: u64,
    pub release: f64,
    pub deadline: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdfResult {
    pub per_job: BTreeMap<u64, StepFunction>,
    pub completion: BTreeMap<u64, f64>,
    /// Jobs finishing after their deadline (or never), with their unfinished
    /// volume at the deadline.
    pub late: Vec<(u64, f64)>,
}

impl EdfResult {
    pub fn feasible(&self) -> bool {
        self.late.is_empty()
    }
}

fn done_tol(p: f64) -> f64 {
    1e-9 * if p > 1.0 { p } else { 1.0 }
}

/// Runs released, unfinished jobs in `(deadline, id)` order at `speed`.
pub fn edf(speed: &StepFunction, jobs: &[EdfJob]) -> EdfResult {
    let mut rem: Vec<f64> = jobs.iter().map(|j| j.volume).collect();
    let mut rem_at_deadline: Vec<Option<f64>> = alloc::vec![None; jobs.len()];
    let mut pieces: Vec<Vec<(f64, f64, f64)>> = alloc::vec![Vec::new(); jobs.len()];
    let mut completion = BTreeMap::new();
    let mut releases: Vec<f64> = jobs.iter().map(|j| j.release).collect();
    releases.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let note_deadlines = |rem: &[f64], upto: f64, out: &mut Vec<Option<f64>>| {
        for (k, j) in jobs.iter().enumerate() {
            if out[k].is_none() && j.deadline <= upto {
                out[k] = Some(rem[k]);
            }
        }
    };

    for (a, b, v) in speed.pieces() {
        let mut t = a;
        while t < b {
            let pick = (0..jobs.len())
                .filter(|&k| jobs[k].release <= t && rem[k] > done_tol(jobs[k].volume))
                .min_by(|&x, &y| {
                    jobs[x].deadline.partial_cmp(&jobs[y].deadline).unwrap().then(jobs[x].id.cmp(&jobs[y].id))
                });
            let next_rel = releases.iter().copied().find(|&r| r > t).unwrap_or(f64::INFINITY);
            let Some(k) = pick.filter(|_| v > 0.0) else {
                t = fmin(next_rel, b);
                continue;
            };
            let mut finish = t + rem[k] / v;
            // A finish a few ulps short of a boundary is that boundary.
            let snap = fmin(next_rel, b);
            if finish < snap && snap - finish <= 1e-12 * fmax(1.0, abs(snap)) {
                finish = snap;
            }
            let end = fmin(fmin(finish, next_rel), b);
            // Record remaining volume for deadlines passed inside this step.
            note_deadlines(&rem, t, &mut rem_at_deadline);
            let dt = end - t;
            pieces[k].push((t, end, v));
            rem[k] -= v * dt;
            if end >= finish || rem[k] <= done_tol(jobs[k].volume) {
                rem[k] = 0.0;
                completion.insert(jobs[k].id, end);
            }
            t = end;
        }
    }
    note_deadlines(&rem, f64::INFINITY, &mut rem_at_deadline);

    let mut late = Vec::new();
    for (k, j) in jobs.iter().enumerate() {
        match completion.get(&j.id) {
            Some(&c) if c <= j.deadline + done_tol(j.deadline) => {}
            Some(_) => late.push((j.id, rem_at_deadline[k].unwrap_or(0.0))),
            None => late.push((j.id, rem[k])),
        }
    }
    let per_job = jobs.iter().enumerate().map(|(k, j)| (j.id, StepFunction::from_pieces(&pieces[k]))).collect();
    EdfResult { per_job, completion, late }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn nested_jobs() {
        // Speed 1.5 on [0,1], 0.5 on [1,2]; job 1 (d=1) runs first.
        let s = StepFunction::new(vec![0.0, 1.0, 2.0], vec![1.5, 0.5]).unwrap();
        let jobs = [
            EdfJob { id: 0, release: 0.0, deadline: 2.0, volume: 1.0 },
            EdfJob { id: 1, release: 0.0, deadline: 1.0, volume: 1.0 },
        ];
        let r = edf(&s, &jobs);
        assert!(r.feasible());
        assert!((r.completion[&1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.completion[&0] - 2.0).abs() < 1e-12);
        assert!((r.per_job[&0].total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_slow_is_late() {
        let s = StepFunction::constant(0.0, 1.0, 1.0);
        let jobs = [EdfJob { id: 3, release: 0.0, deadline: 1.0, volume: 2.0 }];
        let r = edf(&s, &jobs);
        assert_eq!(r.late.len(), 1);
        assert!((r.late[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn waits_for_release() {
        let s = StepFunction::constant(0.0, 3.0, 1.0);
        let jobs = [EdfJob { id: 0, release: 1.0, deadline: 3.0, volume: 1.0 }];
        let r = edf(&s, &jobs);
        assert_eq!(r.per_job[&0], StepFunction::constant(1.0, 2.0, 1.0));
    }
}
