//! Sampled check of the structural hypotheses on `f`:
//!
//! * lower barrier: `f > threshold(r)` for `r <= r1`,
//! * upper barrier: `f < threshold(r)` for `r >= r2`,
//! * monotonicity: `d/dr (lambda^(k-l) f) <= 0`.
//!
//! Margins are relative for the barrier conditions (`f / threshold - 1` and
//! `1 - f / threshold`, positive when satisfied) and equal to
//! `-max d/dr (lambda^(k-l) f)` for monotonicity.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use super::{ProblemSpec, Var};

/// Strictness tolerance for the barrier margins.
pub const STRICT_TOL: f64 = 1e-12;
/// Radial step of the central difference in the monotonicity check.
pub const FD_STEP: f64 = 1e-5;

const NUR_SAMPLES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    /// Satisfied with equality up to the finite-difference noise floor.
    BoundaryCase,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub condition: &'static str,
    /// Worst margin over the samples, `-inf` if `f` could not be evaluated.
    pub worst_margin: f64,
    /// `(r, th, ph, nur)` of the worst sample.
    pub at: [f64; 4],
    pub status: CheckStatus,
    /// First evaluation error, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub lower_barrier: AssumptionCheck,
    pub upper_barrier: AssumptionCheck,
    pub monotone: AssumptionCheck,
    /// Sampled radial range `(r_lo', r_hi')`.
    pub r_range: (f64, f64),
    pub samples: usize,
}

impl AssumptionReport {
    pub fn checks(&self) -> [&AssumptionCheck; 3] {
        [&self.lower_barrier, &self.upper_barrier, &self.monotone]
    }

    /// No check failed; boundary cases count as passing.
    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn boundary_case(&self) -> bool {
        self.checks()
            .iter()
            .any(|c| c.status == CheckStatus::BoundaryCase)
    }

    pub fn margins_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<14} {:<38} {:>14} {:>10} {:>8} {:>8} {:>6}  status",
            "assumption", "condition", "worst margin", "r", "th", "ph", "nur"
        );
        for c in self.checks() {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::BoundaryCase => "boundary case",
                CheckStatus::Fail => "FAIL",
            };
            let _ = writeln!(
                s,
                "{:<14} {:<38} {:>14.6e} {:>10.6} {:>8.4} {:>8.4} {:>6.3}  {status}",
                c.name, c.condition, c.worst_margin, c.at[0], c.at[1], c.at[2], c.at[3]
            );
            if let Some(e) = &c.error {
                let _ = writeln!(s, "{:<14} error: {e}", "");
            }
        }
        let _ = writeln!(
            s,
            "sampled r in [{:.6}, {:.6}]",
            self.r_range.0, self.r_range.1
        );
        s
    }
}

struct Tracker {
    check: AssumptionCheck,
}

impl Tracker {
    fn new(name: &'static str, condition: &'static str) -> Self {
        Self {
            check: AssumptionCheck {
                name,
                condition,
                worst_margin: f64::INFINITY,
                at: [f64::NAN; 4],
                status: CheckStatus::Pass,
                error: None,
            },
        }
    }

    fn record(&mut self, margin: crate::Result<f64>, at: [f64; 4]) {
        match margin {
            Ok(m) if m.is_nan() => self.fail(at, "margin is NaN".into()),
            Ok(m) => {
                if m < self.check.worst_margin {
                    self.check.worst_margin = m;
                    self.check.at = at;
                }
            }
            Err(e) => self.fail(at, e.to_string()),
        }
    }

    fn fail(&mut self, at: [f64; 4], msg: String) {
        if self.check.error.is_none() {
            self.check.error = Some(msg);
            self.check.at = at;
        }
        self.check.worst_margin = f64::NEG_INFINITY;
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

pub(super) fn check(spec: &ProblemSpec, samples: usize) -> AssumptionReport {
    let samples = samples.max(2);
    let (lo, hi) = spec.profile.domain();
    let span = spec.r2 - spec.r1;
    // keep the finite-difference stencil inside the open domain
    let pad = 1e-3 * span;
    let r_lo = if spec.r1 - span > lo {
        spec.r1 - span
    } else {
        lo + pad
    };
    let r_hi = if spec.r2 + span < hi {
        spec.r2 + span
    } else {
        hi - pad
    };

    let uses = |v| spec.forcing.uses(v);
    let ths = if uses(Var::Th) {
        (0..samples)
            .map(|j| (j as f64 + 0.5) * PI / samples as f64)
            .collect()
    } else {
        vec![0.5 * PI]
    };
    let phs = if uses(Var::Ph) {
        (0..samples)
            .map(|m| 2.0 * PI * m as f64 / samples as f64)
            .collect()
    } else {
        vec![0.0]
    };
    let nurs: Vec<f64> = if uses(Var::Nur) {
        NUR_SAMPLES.to_vec()
    } else {
        vec![1.0]
    };

    let mut lower = Tracker::new("lower-barrier", "f > threshold(r) for r <= r1");
    let mut upper = Tracker::new("upper-barrier", "f < threshold(r) for r >= r2");
    let mut mono = Tracker::new("monotone", "d/dr(lambda^(k-l) f) <= 0");
    let mut noise_floor: f64 = 0.0;
    let deg = spec.q.degree();

    let scaled = |r: f64, th, ph, nur| -> crate::Result<f64> {
        Ok(spec.profile.eval(r)?.lambda.powi(deg) * spec.eval_f(r, th, ph, nur)?)
    };
    let ratio = |r: f64, th, ph, nur| -> crate::Result<f64> {
        Ok(spec.eval_f(r, th, ph, nur)? / spec.threshold(r)?)
    };

    let r_inner = linspace(r_lo, spec.r1, samples);
    let r_outer = linspace(spec.r2, r_hi, samples);
    let r_all = linspace(r_lo, r_hi, 3 * samples);

    for &th in &ths {
        for &ph in &phs {
            for &nur in &nurs {
                for &r in &r_inner {
                    lower.record(ratio(r, th, ph, nur).map(|x| x - 1.0), [r, th, ph, nur]);
                }
                for &r in &r_outer {
                    upper.record(ratio(r, th, ph, nur).map(|x| 1.0 - x), [r, th, ph, nur]);
                }
                for &r in &r_all {
                    let d = (|| {
                        let a = scaled(r + FD_STEP, th, ph, nur)?;
                        let b = scaled(r - FD_STEP, th, ph, nur)?;
                        noise_floor = noise_floor.max(a.abs()).max(b.abs());
                        Ok((a - b) / (2.0 * FD_STEP))
                    })();
                    mono.record(d.map(|d| -d), [r, th, ph, nur]);
                }
            }
        }
    }

    let noise = STRICT_TOL + 8.0 * f64::EPSILON * noise_floor / FD_STEP;
    for t in [&mut lower, &mut upper] {
        let c = &mut t.check;
        if c.error.is_some() || c.worst_margin <= STRICT_TOL {
            c.status = CheckStatus::Fail;
        }
    }
    let c = &mut mono.check;
    c.status = if c.error.is_some() || c.worst_margin < -noise {
        CheckStatus::Fail
    } else if c.worst_margin <= noise {
        CheckStatus::BoundaryCase
    } else {
        CheckStatus::Pass
    };

    AssumptionReport {
        lower_barrier: lower.check,
        upper_barrier: upper.check,
        monotone: mono.check,
        r_range: (r_lo, r_hi),
        samples,
    }
}
