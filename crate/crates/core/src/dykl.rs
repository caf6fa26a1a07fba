//! Dykstra's algorithm with KL projections, the entropic-regularization
//! baseline for the 2-marginal capacity-bounded transport problem.
//!
//! The regularized problem `min KL(X, K)` over the intersection of the two
//! marginal sets and the capacity box (with kernel `K = exp(-C/eps)`) is
//! attacked by cyclic KL projections with Dykstra correction factors. Each
//! projection is closed-form: row scaling, column scaling, entrywise min.
//! Accuracy of the baseline requires shrinking `eps`, which eventually
//! underflows the multiplicative form; a log-domain twin of the sweep with
//! per-row/column max subtraction covers that regime.

use crate::constraints::Instance;
use crate::eppa::{self, ReportDeltas, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Multiplicative-form state. All tensors are `(m, n, 1)`.
#[derive(Clone, Debug)]
pub struct DyklPlain {
    pub x: Tensor3,
    pub q: [Tensor3; 3],
    pub epsilon: f64,
}

/// Projections computed during one sweep, exposed for verification.
#[derive(Clone, Debug)]
pub struct DyklTrace {
    pub pi: [Tensor3; 3],
}

impl DyklPlain {
    /// Start at the kernel: `X^0 = exp(-C/eps)`, unit corrections.
    pub fn init(cost: &Tensor3, epsilon: f64) -> Self {
        let x = cost.scale(-1.0).exp_scaled(epsilon);
        let ones = Tensor3::ones(cost.dims());
        Self {
            x,
            q: [ones.clone(), ones.clone(), ones],
            epsilon,
        }
    }

    /// One cycle of the three KL projections with Dykstra corrections.
    /// Errors when a value degenerates to zero/nonfinite (the signal to
    /// switch to the stabilized form).
    pub fn sweep(
        &mut self,
        a: &[f64],
        b: &[f64],
        upper: Option<&Tensor3>,
    ) -> Result<DyklTrace> {
        let (m, n, _) = self.x.dims();
        let pi0 = self.x.clone();

        // row scaling to a
        let t1 = pi0.hadamard(&self.q[0])?;
        let mut pi1 = t1.clone();
        for r in 0..m {
            let mut row_sum = 0.0;
            for s in 0..n {
                row_sum += t1[(r, s, 0)];
            }
            let f = a[r] / row_sum;
            for s in 0..n {
                pi1[(r, s, 0)] *= f;
            }
        }
        self.q[0] = self.q[0].hadamard(&pi0.quotient(&pi1)?)?;

        // column scaling to b
        let t2 = pi1.hadamard(&self.q[1])?;
        let mut pi2 = t2.clone();
        for s in 0..n {
            let mut col_sum = 0.0;
            for r in 0..m {
                col_sum += t2[(r, s, 0)];
            }
            let f = b[s] / col_sum;
            for r in 0..m {
                pi2[(r, s, 0)] *= f;
            }
        }
        self.q[1] = self.q[1].hadamard(&pi1.quotient(&pi2)?)?;

        // capacity clip
        let pi3 = match upper {
            Some(u) => {
                let t3 = pi2.hadamard(&self.q[2])?;
                let pi3 = t3.entrywise_min(u)?;
                self.q[2] = self.q[2].hadamard(&pi2.quotient(&pi3)?)?;
                pi3
            }
            None => pi2.clone(),
        };
        self.x = pi3.clone();

        for t in [&self.x, &self.q[0], &self.q[1], &self.q[2]] {
            for &v in t.data() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: "dykl sweep",
                    });
                }
            }
        }
        Ok(DyklTrace {
            pi: [pi1, pi2, pi3],
        })
    }
}

/// Log-domain twin: every quantity is `eps * ln` of its multiplicative
/// counterpart and the scalings become stabilized log-sum-exp shifts.
#[derive(Clone, Debug)]
pub struct DyklStabilized {
    pub xt: Tensor3,
    pub qt: [Tensor3; 3],
    pub epsilon: f64,
}

impl DyklStabilized {
    /// `X~^0 = -C`, zero corrections.
    pub fn init(cost: &Tensor3, epsilon: f64) -> Self {
        let zeros = Tensor3::zeros(cost.dims());
        Self {
            xt: cost.scale(-1.0),
            qt: [zeros.clone(), zeros.clone(), zeros],
            epsilon,
        }
    }

    /// Recovered multiplicative iterate `exp(X~/eps)`.
    pub fn primal(&self) -> Tensor3 {
        self.xt.exp_scaled(self.epsilon)
    }

    pub fn sweep(
        &mut self,
        a_log: &[f64],
        b_log: &[f64],
        upper_log: Option<&Tensor3>,
    ) -> Result<()> {
        let eps = self.epsilon;
        let (m, n, _) = self.xt.dims();
        let pi0 = self.xt.clone();

        // row block: pi1 = (a~ - eps lse_row((pi0+q1)/eps)) 1' + pi0 + q1
        let t1 = pi0.add(&self.qt[0])?;
        let mut pi1 = t1.clone();
        for r in 0..m {
            let mut mx = f64::NEG_INFINITY;
            for s in 0..n {
                mx = mx.max(t1[(r, s, 0)]);
            }
            let mut acc = 0.0;
            for s in 0..n {
                acc += ((t1[(r, s, 0)] - mx) / eps).exp();
            }
            let shift = a_log[r] - (mx + eps * acc.ln());
            for s in 0..n {
                pi1[(r, s, 0)] += shift;
            }
        }
        self.qt[0] = self.qt[0].add(&pi0)?.sub(&pi1)?;

        let t2 = pi1.add(&self.qt[1])?;
        let mut pi2 = t2.clone();
        for s in 0..n {
            let mut mx = f64::NEG_INFINITY;
            for r in 0..m {
                mx = mx.max(t2[(r, s, 0)]);
            }
            let mut acc = 0.0;
            for r in 0..m {
                acc += ((t2[(r, s, 0)] - mx) / eps).exp();
            }
            let shift = b_log[s] - (mx + eps * acc.ln());
            for r in 0..m {
                pi2[(r, s, 0)] += shift;
            }
        }
        self.qt[1] = self.qt[1].add(&pi1)?.sub(&pi2)?;

        let pi3 = match upper_log {
            Some(ut) => {
                let t3 = pi2.add(&self.qt[2])?;
                let pi3 = t3.entrywise_min(ut)?;
                self.qt[2] = self.qt[2].add(&pi2)?.sub(&pi3)?;
                pi3
            }
            None => pi2.clone(),
        };
        self.xt = pi3;

        for t in [&self.xt, &self.qt[0], &self.qt[1], &self.qt[2]] {
            for &v in t.data() {
                if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::NonFinite {
                        context: "stabilized dykl sweep",
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DyklMode {
    Plain,
    Stabilized,
    /// Plain first; restart in the stabilized form if it degenerates.
    Auto,
}

/// Outcome of a baseline solve. `d1_history` records the feasibility
/// residual after every sweep (both phases, when a restart happened).
#[derive(Clone, Debug)]
pub struct DyklOutcome {
    pub x: Tensor3,
    pub report: SolveReport,
    pub d1_history: Vec<f64>,
}

fn baseline_deltas(inst: &Instance, x: &Tensor3) -> ReportDeltas {
    let d1 = eppa::delta1(inst, x);
    let mut neg = 0.0;
    for &v in x.data() {
        neg += v.min(0.0).powi(2);
    }
    let d3 = neg.sqrt() / (1.0 + x.norm_fro());
    let d4 = match inst.upper() {
        None => 0.0,
        Some(u) => {
            let mut over = 0.0;
            let mut u_norm_sq = 0.0;
            for (&xv, &uv) in x.data().iter().zip(u.data()) {
                if uv.is_finite() {
                    over += (uv - xv).min(0.0).powi(2);
                    u_norm_sq += uv * uv;
                }
            }
            over.sqrt() / (1.0 + u_norm_sq.sqrt())
        }
    };
    ReportDeltas {
        d1: Some(d1),
        d2: None,
        d3: Some(d3),
        d4: Some(d4),
        d5: None,
        d6: None,
        d7: None,
        kkt: Some(d1.max(d3).max(d4)),
    }
}

/// Runs the baseline on a 2-marginal instance until the feasibility
/// residual drops below `tol` or `max_iter` sweeps elapse. The iterate is
/// returned either way; hitting the cap is recorded in the status, not an
/// error. No dual certificate exists, so the dual residual slots of the
/// report are null.
pub fn solve_dykl(
    inst: &Instance,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
    mode: DyklMode,
) -> Result<DyklOutcome> {
    if inst.dims().2 != 1 || !inst.is_marginal_structured() {
        return Err(Error::NotMarginalStructured);
    }
    let start = std::time::Instant::now();
    let a = &inst.rhs()[0];
    let b = &inst.rhs()[1];
    let mut history = Vec::new();
    let mut flags: Vec<String> = Vec::new();

    let mut run_plain = !matches!(mode, DyklMode::Stabilized);
    let mut x = None;
    let mut iters = 0usize;
    let mut converged = false;

    if run_plain {
        let mut st = DyklPlain::init(inst.cost(), epsilon);
        'plain: {
            for _ in 0..max_iter {
                match st.sweep(a, b, inst.upper()) {
                    Ok(_) => {}
                    Err(Error::NonFinite { .. }) | Err(Error::DivisionByZero { .. })
                        if matches!(mode, DyklMode::Auto) =>
                    {
                        flags.push(crate::eppa::FLAG_SWITCHED_TO_LOG.to_string());
                        run_plain = false;
                        break 'plain;
                    }
                    Err(e) => return Err(e),
                }
                iters += 1;
                let d1 = eppa::delta1(inst, &st.x);
                history.push(d1);
                if d1 < tol {
                    converged = true;
                    break;
                }
            }
            x = Some(st.x.clone());
        }
    }

    if !run_plain && x.is_none() {
        // stabilized run (either requested or an auto restart)
        if matches!(mode, DyklMode::Stabilized) {
            flags.push("log-domain".to_string());
        }
        let a_log: Vec<f64> = a.iter().map(|&v| epsilon * v.ln()).collect();
        let b_log: Vec<f64> = b.iter().map(|&v| epsilon * v.ln()).collect();
        let upper_log = inst.upper().map(|u| u.log_scaled(epsilon)).transpose()?;
        let mut st = DyklStabilized::init(inst.cost(), epsilon);
        iters = 0;
        for _ in 0..max_iter {
            st.sweep(&a_log, &b_log, upper_log.as_ref())?;
            iters += 1;
            let xc = st.primal();
            let d1 = eppa::delta1(inst, &xc);
            history.push(d1);
            if d1 < tol {
                converged = true;
                break;
            }
        }
        x = Some(st.primal());
    }

    let x = x.expect("one of the forms ran");
    let report = SolveReport {
        objective: inst.cost().inner(&x)?,
        delta: baseline_deltas(inst, &x),
        outer_iters: iters,
        inner_sweeps: iters,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        status: if converged {
            SolveStatus::Converged
        } else {
            SolveStatus::MaxOuterReached
        },
        flags,
    };
    Ok(DyklOutcome {
        x,
        report,
        d1_history: history,
    })
}
