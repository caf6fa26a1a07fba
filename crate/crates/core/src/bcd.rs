//! Dual block coordinate descent for the entropic proximal subproblem.
//!
//! For a prox center `S > 0` and parameter `eps > 0` the subproblem is
//!
//! ```text
//!     min <C, X> + eps D_phi(X, S)   s.t.  A_i(X) = b_i,  X <= U,
//! ```
//!
//! whose dual has `N + 1` blocks: one multiplier vector `y_i` per
//! constraint block plus a tensor multiplier `W <= 0` for the capacity
//! bound. Cyclic exact minimization over the blocks yields closed-form
//! updates. Two algebraically equivalent sweeps are provided:
//!
//! * a multiplicative sweep over `xi_i = exp(y_i / eps)` and
//!   `Gamma = exp(W / eps)` that keeps a single cached working tensor and
//!   touches every grid entry a constant number of times per cycle, and
//! * a log-domain sweep over `(y_i, W)` directly, evaluating the row
//!   reductions by log-sum-exp with per-row max subtraction, for regimes
//!   where the multiplicative form under- or overflows.
//!
//! A specialization for marginal-sum blocks replaces label indirection by
//! direct axis reductions.

use crate::constraints::{Instance, PartitionBlock, UNCOVERED};
use crate::entropy::bregman;
use crate::eppa::{GateOutcome, InexactGate, Scheme};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// The entropic proximal subproblem with its cached derived tensors
/// `M = C - eps ln S` and `M~ = exp(-M/eps) = S o exp(-C/eps)`.
pub struct ProxSubproblem<'a> {
    instance: &'a Instance,
    epsilon: f64,
    m: Tensor3,
    m_tilde: Tensor3,
}

impl<'a> ProxSubproblem<'a> {
    pub fn new(instance: &'a Instance, center: &Tensor3, epsilon: f64) -> Result<Self> {
        if center.dims() != instance.dims() {
            return Err(Error::DimMismatch {
                left: instance.dims(),
                right: center.dims(),
            });
        }
        if let Some(index) = center.data().iter().position(|&v| !(v > 0.0)) {
            return Err(Error::EntropyDomain {
                what: "prox center",
                index,
                value: center.data()[index],
            });
        }
        let cost = instance.cost();
        let m = Tensor3::new(
            instance.dims(),
            cost.data()
                .iter()
                .zip(center.data())
                .map(|(&c, &s)| c - epsilon * s.ln())
                .collect(),
        )?;
        let m_tilde = Tensor3::new(
            instance.dims(),
            cost.data()
                .iter()
                .zip(center.data())
                .map(|(&c, &s)| s * (-c / epsilon).exp())
                .collect(),
        )?;
        Ok(Self {
            instance,
            epsilon,
            m,
            m_tilde,
        })
    }

    #[inline]
    pub fn instance(&self) -> &Instance {
        self.instance
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `C - eps ln S`.
    #[inline]
    pub fn m(&self) -> &Tensor3 {
        &self.m
    }

    /// `exp(-M/eps)`.
    #[inline]
    pub fn m_tilde(&self) -> &Tensor3 {
        &self.m_tilde
    }
}

/// Dual iterate. Both representations `(y, W)` and `(xi, Gamma)` are kept;
/// every successful sweep refreshes them together, so `xi_i == exp(y_i/eps)`
/// and `Gamma == exp(W/eps)` between sweeps.
///
/// `hat_m` caches the multiplicative sweep's working tensor
/// `M~ o prod_i bullet_i(xi_i)`; it is dropped whenever the subproblem or
/// the scheme changes.
#[derive(Clone, Debug)]
pub struct DualState {
    y: Vec<Vec<f64>>,
    w: Tensor3,
    xi: Vec<Vec<f64>>,
    gamma: Tensor3,
    hat_m: Option<Tensor3>,
}

impl DualState {
    /// Cold start at the origin of the dual domain: `y = 0`, `W = 0`,
    /// hence `xi = 1` and `Gamma = 1`.
    pub fn cold(instance: &Instance) -> Self {
        Self {
            y: instance
                .blocks()
                .iter()
                .map(|b| vec![0.0; b.rows()])
                .collect(),
            w: Tensor3::zeros(instance.dims()),
            xi: instance
                .blocks()
                .iter()
                .map(|b| vec![1.0; b.rows()])
                .collect(),
            gamma: Tensor3::ones(instance.dims()),
            hat_m: None,
        }
    }

    #[inline]
    pub fn y(&self) -> &[Vec<f64>] {
        &self.y
    }

    #[inline]
    pub fn w(&self) -> &Tensor3 {
        &self.w
    }

    #[inline]
    pub fn xi(&self) -> &[Vec<f64>] {
        &self.xi
    }

    #[inline]
    pub fn gamma(&self) -> &Tensor3 {
        &self.gamma
    }

    /// Drops the cached working tensor. Must be called before the same
    /// state warm-starts a different subproblem.
    pub fn invalidate_cache(&mut self) {
        self.hat_m = None;
    }

    /// Restores `xi`/`Gamma` from `y`/`W` (the last consistent snapshot)
    /// after a multiplicative sweep aborted midway.
    pub fn resync_from_log(&mut self, epsilon: f64) {
        for (xi, y) in self.xi.iter_mut().zip(&self.y) {
            for (x, &v) in xi.iter_mut().zip(y) {
                *x = (v / epsilon).exp();
            }
        }
        self.gamma = self.w.exp_scaled(epsilon);
        self.hat_m = None;
    }

    fn refresh_log_from_xi(&mut self, epsilon: f64) {
        for (y, xi) in self.y.iter_mut().zip(&self.xi) {
            for (v, &x) in y.iter_mut().zip(xi) {
                *v = epsilon * x.ln();
            }
        }
        for (wv, &g) in self.w.data_mut().iter_mut().zip(self.gamma.data()) {
            *wv = epsilon * g.ln();
        }
    }

    fn refresh_xi_from_log(&mut self, epsilon: f64) {
        for (xi, y) in self.xi.iter_mut().zip(&self.y) {
            for (x, &v) in xi.iter_mut().zip(y) {
                *x = (v / epsilon).exp();
            }
        }
        for (gv, &wv) in self.gamma.data_mut().iter_mut().zip(self.w.data()) {
            *gv = (wv / epsilon).exp();
        }
    }
}

#[inline]
fn mul_by_block(t: &mut Tensor3, block: &PartitionBlock, z: &[f64]) {
    for (v, &l) in t.data_mut().iter_mut().zip(block.labels()) {
        if l != UNCOVERED {
            *v *= z[l as usize];
        }
    }
}

#[inline]
fn div_by_block(t: &mut Tensor3, block: &PartitionBlock, z: &[f64]) {
    for (v, &l) in t.data_mut().iter_mut().zip(block.labels()) {
        if l != UNCOVERED {
            *v /= z[l as usize];
        }
    }
}

fn build_hat_m(sub: &ProxSubproblem, st: &DualState) -> Tensor3 {
    let mut hm = sub.m_tilde().clone();
    for (block, xi) in sub.instance().blocks().iter().zip(&st.xi) {
        mul_by_block(&mut hm, block, xi);
    }
    hm
}

/// One multiplicative cycle over all `N + 1` dual blocks, realized with a
/// single working tensor that is repeatedly overwritten: divide out the
/// stale factor of the block being updated, multiply in the freshest
/// factor of its predecessor, reduce, rescale.
///
/// Errors with [`Error::DualUnderflow`] when a block's row sums reach
/// floating-point zero and with [`Error::NonFinite`] when the working
/// tensor degenerates; both signal the caller to switch to the log-domain
/// sweep. On error `y`/`W` still hold the pre-sweep iterate.
pub fn sweep_multiplicative(sub: &ProxSubproblem, st: &mut DualState) -> Result<()> {
    let inst = sub.instance();
    let blocks = inst.blocks();
    let nb = blocks.len();
    let has_u = inst.upper().is_some();

    let mut hm = match st.hat_m.take() {
        Some(hm) => hm,
        None => build_hat_m(sub, st),
    };

    for i in 0..nb {
        div_by_block(&mut hm, &blocks[i], &st.xi[i]);
        if i == 0 {
            if has_u {
                for (v, &g) in hm.data_mut().iter_mut().zip(st.gamma.data()) {
                    *v *= g;
                }
            }
        } else {
            mul_by_block(&mut hm, &blocks[i - 1], &st.xi[i - 1]);
        }
        let denom = blocks[i].apply(&hm)?;
        for (j, &d) in denom.iter().enumerate() {
            if d == 0.0 {
                return Err(Error::DualUnderflow { block: i });
            }
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    context: "multiplicative sweep row sums",
                });
            }
            st.xi[i][j] = inst.rhs()[i][j] / d;
        }
    }

    // restore the full product form for the capacity step
    if has_u {
        for (v, &g) in hm.data_mut().iter_mut().zip(st.gamma.data()) {
            *v /= g;
        }
    }
    mul_by_block(&mut hm, &blocks[nb - 1], &st.xi[nb - 1]);
    for &v in hm.data() {
        if v == 0.0 {
            return Err(Error::DualUnderflow { block: nb });
        }
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "multiplicative working tensor",
            });
        }
    }
    if let Some(u) = inst.upper() {
        for ((g, &h), &u_e) in st
            .gamma
            .data_mut()
            .iter_mut()
            .zip(hm.data())
            .zip(u.data())
        {
            *g = (u_e / h).min(1.0);
        }
    }

    st.refresh_log_from_xi(sub.epsilon());
    st.hat_m = Some(hm);
    Ok(())
}

/// One log-domain cycle: the same block minimizations carried out on
/// `(y_i, W)`, with per-row max subtraction inside every row reduction so
/// that no intermediate overflows for exponents up to about `1e4` in
/// magnitude.
pub fn sweep_logdomain(sub: &ProxSubproblem, st: &mut DualState) -> Result<()> {
    let inst = sub.instance();
    let blocks = inst.blocks();
    let eps = sub.epsilon();
    let m = sub.m().data();
    let total = inst.num_entries();

    // adjoint sum rebuilt once per sweep, then maintained incrementally
    let mut sum_ay = vec![0.0; total];
    for (block, y) in blocks.iter().zip(&st.y) {
        for (acc, &l) in sum_ay.iter_mut().zip(block.labels()) {
            if l != UNCOVERED {
                *acc += y[l as usize];
            }
        }
    }

    let mut exponent = vec![0.0; total];
    for (i, block) in blocks.iter().enumerate() {
        let rows = block.rows();
        let y_old = std::mem::take(&mut st.y[i]);
        let mut row_max = vec![f64::NEG_INFINITY; rows];
        for (e, &l) in block.labels().iter().enumerate() {
            if l == UNCOVERED {
                continue;
            }
            let s = (sum_ay[e] - y_old[l as usize] + st.w.data()[e] - m[e]) / eps;
            exponent[e] = s;
            if s > row_max[l as usize] {
                row_max[l as usize] = s;
            }
        }
        let mut acc = vec![0.0; rows];
        for (e, &l) in block.labels().iter().enumerate() {
            if l != UNCOVERED {
                acc[l as usize] += (exponent[e] - row_max[l as usize]).exp();
            }
        }
        let mut y_new = Vec::with_capacity(rows);
        for j in 0..rows {
            let v = eps * inst.rhs()[i][j].ln() - eps * (row_max[j] + acc[j].ln());
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "log-domain multiplier update",
                });
            }
            y_new.push(v);
        }
        for (acc, &l) in sum_ay.iter_mut().zip(block.labels()) {
            if l != UNCOVERED {
                *acc += y_new[l as usize] - y_old[l as usize];
            }
        }
        st.y[i] = y_new;
    }

    if let Some(u) = inst.upper() {
        for (e, wv) in st.w.data_mut().iter_mut().enumerate() {
            // eps ln U + M - sum_i A_i^* y_i, capped at zero; infinite U pins W to 0
            let bound = eps * u.data()[e].ln() + m[e] - sum_ay[e];
            *wv = bound.min(0.0);
        }
    }

    st.refresh_xi_from_log(eps);
    st.hat_m = None;
    Ok(())
}

/// Multiplicative sweep specialized to marginal-sum blocks: the row
/// reductions become direct axis sums over the rank-one factor structure,
/// with no label indirection and no cached working tensor.
pub fn cmot3_sweep(sub: &ProxSubproblem, st: &mut DualState) -> Result<()> {
    let inst = sub.instance();
    if !inst.is_marginal_structured() {
        return Err(Error::NotMarginalStructured);
    }
    let (n1, n2, n3) = inst.dims();
    let has_third = n3 > 1;
    let has_u = inst.upper().is_some();
    let eps = sub.epsilon();
    let mt = sub.m_tilde().data();

    // weight = Gamma o M~, fixed during the marginal updates of one cycle
    let weight: Vec<f64> = if has_u {
        mt.iter()
            .zip(st.gamma.data())
            .map(|(&m, &g)| m * g)
            .collect()
    } else {
        mt.to_vec()
    };

    let ones = [1.0];
    {
        let g = &st.xi[1];
        let h: &[f64] = if has_third { &st.xi[2] } else { &ones };
        let mut denom = vec![0.0; n1];
        let mut e = 0;
        for d in denom.iter_mut() {
            let mut acc = 0.0;
            for gs in g.iter().take(n2) {
                for ht in h.iter().take(n3) {
                    acc += weight[e] * gs * ht;
                    e += 1;
                }
            }
            *d = acc;
        }
        update_xi_from_denoms(&mut st.xi[0], &inst.rhs()[0], &denom, 0)?;
    }
    {
        let f = st.xi[0].clone();
        let h: &[f64] = if has_third { &st.xi[2] } else { &ones };
        let mut denom = vec![0.0; n2];
        let mut e = 0;
        for fr in f.iter().take(n1) {
            for d in denom.iter_mut() {
                for ht in h.iter().take(n3) {
                    acc_into(d, weight[e] * fr * ht);
                    e += 1;
                }
            }
        }
        update_xi_from_denoms(&mut st.xi[1], &inst.rhs()[1], &denom, 1)?;
    }
    if has_third {
        let f = st.xi[0].clone();
        let g = st.xi[1].clone();
        let mut denom = vec![0.0; n3];
        let mut e = 0;
        for fr in f.iter().take(n1) {
            for gs in g.iter().take(n2) {
                for d in denom.iter_mut() {
                    acc_into(d, weight[e] * fr * gs);
                    e += 1;
                }
            }
        }
        update_xi_from_denoms(&mut st.xi[2], &inst.rhs()[2], &denom, 2)?;
    }

    if let Some(u) = inst.upper() {
        let f = &st.xi[0];
        let g = &st.xi[1];
        let h: &[f64] = if has_third { &st.xi[2] } else { &ones };
        let mut e = 0;
        for fr in f.iter().take(n1) {
            for gs in g.iter().take(n2) {
                for ht in h.iter().take(n3) {
                    let prod = mt[e] * fr * gs * ht;
                    if prod == 0.0 {
                        return Err(Error::DualUnderflow {
                            block: inst.num_blocks(),
                        });
                    }
                    if !prod.is_finite() {
                        return Err(Error::NonFinite {
                            context: "marginal sweep capacity step",
                        });
                    }
                    st.gamma.data_mut()[e] = (u.data()[e] / prod).min(1.0);
                    e += 1;
                }
            }
        }
    }

    st.refresh_log_from_xi(eps);
    st.hat_m = None;
    Ok(())
}

#[inline]
fn acc_into(d: &mut f64, v: f64) {
    *d += v;
}

fn update_xi_from_denoms(
    xi: &mut [f64],
    rhs: &[f64],
    denom: &[f64],
    block: usize,
) -> Result<()> {
    for (j, (&d, x)) in denom.iter().zip(xi.iter_mut()).enumerate() {
        if d == 0.0 {
            return Err(Error::DualUnderflow { block });
        }
        if !d.is_finite() {
            return Err(Error::NonFinite {
                context: "marginal sweep row sums",
            });
        }
        *x = rhs[j] / d;
    }
    Ok(())
}

/// Primal point associated with a dual iterate:
/// `X = M~ o prod_i bullet_i(xi_i) o Gamma`, equivalently
/// `exp((sum_i A_i^* y_i + W - M)/eps)`. Strictly positive by construction;
/// a zero or nonfinite entry means the scheme's floating-point range was
/// exceeded and is reported as an error.
pub fn recover_primal(sub: &ProxSubproblem, st: &DualState) -> Result<Tensor3> {
    let inst = sub.instance();
    let mut x = build_hat_m(sub, st);
    if inst.upper().is_some() {
        for (v, &g) in x.data_mut().iter_mut().zip(st.gamma.data()) {
            *v *= g;
        }
    }
    for &v in x.data() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonFinite {
                context: "recovered primal",
            });
        }
    }
    Ok(x)
}

/// Dual objective
/// `R = eps <M~, exp((W + sum_i A_i^* y_i)/eps)> - sum_i <y_i, b_i> - <W, U>`,
/// with the capacity term summed over finite `U` entries only (`W` is zero
/// where `U` is infinite, and absent `U` contributes nothing).
pub fn dual_objective(sub: &ProxSubproblem, st: &DualState) -> Result<f64> {
    let inst = sub.instance();
    if let Some(index) = st.w.data().iter().position(|&w| w > 0.0) {
        return Err(Error::PositiveCapacityMultiplier { index });
    }
    let eps = sub.epsilon();
    let m = sub.m().data();
    let total = inst.num_entries();
    let mut sum_ay = vec![0.0; total];
    for (block, y) in inst.blocks().iter().zip(&st.y) {
        for (acc, &l) in sum_ay.iter_mut().zip(block.labels()) {
            if l != UNCOVERED {
                *acc += y[l as usize];
            }
        }
    }
    let mut exp_term = 0.0;
    for e in 0..total {
        exp_term += ((sum_ay[e] + st.w.data()[e] - m[e]) / eps).exp();
    }
    let mut linear = 0.0;
    for (y, b) in st.y.iter().zip(inst.rhs()) {
        for (&yv, &bv) in y.iter().zip(b) {
            linear += yv * bv;
        }
    }
    let mut cap = 0.0;
    if let Some(u) = inst.upper() {
        for (&wv, &uv) in st.w.data().iter().zip(u.data()) {
            if uv.is_finite() {
                cap += wv * uv;
            }
        }
    }
    Ok(eps * exp_term - linear - cap)
}

/// Options for [`solve_subproblem`].
#[derive(Clone, Copy, Debug)]
pub struct SubsolveOptions {
    pub scheme: Scheme,
    /// Hard cap on sweeps; exceeding it is an error, not silent acceptance.
    pub cap: usize,
    /// Record the dual objective after every sweep (costs one extra pass).
    pub track_dual: bool,
}

impl Default for SubsolveOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Auto,
            cap: 50_000,
            track_dual: false,
        }
    }
}

/// Result of one inner solve.
#[derive(Clone, Debug)]
pub struct SubproblemOutcome {
    pub x: Tensor3,
    /// Feasible companion point, when the gate carries a feasibility map.
    pub x_tilde: Option<Tensor3>,
    pub delta1: f64,
    pub bregman: Option<f64>,
    pub sweeps: usize,
    /// Largest observed increase of the dual objective across consecutive
    /// sweeps, relative to `1 + |R|`. Only present when tracking was on.
    pub dual_increase_max_rel: Option<f64>,
    pub switched_to_log: bool,
}

/// Runs dual sweeps until the inexactness gate accepts: after each sweep
/// the primal candidate is recovered and its feasibility residual checked
/// against the gate's activation threshold; only then is the feasible
/// companion built and the Bregman distance compared. `Scheme::Auto`
/// starts multiplicative (the marginal specialization when applicable)
/// and switches to the log-domain sweep on underflow.
pub fn solve_subproblem(
    sub: &ProxSubproblem,
    gate: &InexactGate,
    st: &mut DualState,
    opts: &SubsolveOptions,
) -> Result<SubproblemOutcome> {
    let marginal = sub.instance().is_marginal_structured();
    let mut use_log = matches!(opts.scheme, Scheme::LogDomain);
    let auto = matches!(opts.scheme, Scheme::Auto);
    let mut switched = false;
    let mut sweeps = 0usize;
    let mut r_prev = if opts.track_dual {
        Some(dual_objective(sub, st)?)
    } else {
        None
    };
    let mut max_inc = f64::NEG_INFINITY;

    while sweeps < opts.cap {
        let step = if use_log {
            sweep_logdomain(sub, st)
        } else if marginal {
            cmot3_sweep(sub, st)
        } else {
            sweep_multiplicative(sub, st)
        };
        match step {
            Ok(()) => {}
            Err(Error::DualUnderflow { .. }) | Err(Error::NonFinite { .. })
                if auto && !use_log =>
            {
                st.resync_from_log(sub.epsilon());
                use_log = true;
                switched = true;
                continue;
            }
            Err(e) => return Err(e),
        }
        sweeps += 1;

        if let Some(prev) = r_prev {
            let r = dual_objective(sub, st)?;
            let inc = (r - prev) / (1.0 + r.abs());
            if inc > max_inc {
                max_inc = inc;
            }
            r_prev = Some(r);
        }

        let x = match recover_primal(sub, st) {
            Ok(x) => x,
            Err(Error::NonFinite { .. }) if auto && !use_log => {
                st.resync_from_log(sub.epsilon());
                use_log = true;
                switched = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        let outcome: GateOutcome = gate.check(sub.instance(), &x)?;
        if outcome.accepted {
            if let Some(xt) = &outcome.x_tilde {
                // accepted via the feasibility map; double-check domains
                debug_assert!(bregman(xt, &x).is_ok());
            }
            return Ok(SubproblemOutcome {
                x,
                x_tilde: outcome.x_tilde,
                delta1: outcome.delta1,
                bregman: outcome.bregman,
                sweeps,
                dual_increase_max_rel: if opts.track_dual {
                    Some(if max_inc == f64::NEG_INFINITY {
                        0.0
                    } else {
                        max_inc
                    })
                } else {
                    None
                },
                switched_to_log: switched,
            });
        }
    }
    Err(Error::InnerCapExceeded { cap: opts.cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::cmot_marginal_blocks;
    use crate::eppa;
    use crate::gen::SplitMix64;

    fn unit_instance() -> Instance {
        // single entry, one block summing it to 1, no upper bound
        let dims = (1, 1, 1);
        let block = PartitionBlock::from_labels(dims, 1, vec![0]).unwrap();
        Instance::new(Tensor3::zeros(dims), vec![block], vec![vec![1.0]], None).unwrap()
    }

    fn random_instance(
        dims: (usize, usize, usize),
        seed: u64,
        with_upper: bool,
    ) -> Instance {
        let mut rng = SplitMix64::new(seed);
        let blocks = cmot_marginal_blocks(dims);
        let mut marg = |n: usize| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.next_open01()).collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            v
        };
        let a = marg(dims.0);
        let b = marg(dims.1);
        let c = marg(dims.2);
        let cost = Tensor3::from_fn(dims, |r, s, t| {
            (((r * 7 + s * 3 + t * 11) % 13) as f64) / 13.0
        });
        let upper = if with_upper {
            Some(if dims.2 == 1 {
                Tensor3::outer2(&a, &b).scale(2.0)
            } else {
                Tensor3::outer3(&a, &b, &c).scale(2.0)
            })
        } else {
            None
        };
        let rhs = if dims.2 == 1 {
            vec![a, b]
        } else {
            vec![a, b, c]
        };
        Instance::new(cost, blocks, rhs, upper).unwrap()
    }

    #[test]
    fn dual_objective_at_origin_of_unit_instance() {
        let inst = unit_instance();
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones((1, 1, 1)), 0.05).unwrap();
        let st = DualState::cold(&inst);
        assert!((dual_objective(&sub, &st).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn dual_objective_increases_away_from_minimizer() {
        let inst = unit_instance();
        let eps = 0.05;
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones((1, 1, 1)), eps).unwrap();
        let mut st = DualState::cold(&inst);
        st.y[0][0] = eps * 2.0_f64.ln();
        st.refresh_xi_from_log(eps);
        let r = dual_objective(&sub, &st).unwrap();
        let expect = 2.0 * eps - eps * 2.0_f64.ln();
        assert!((r - expect).abs() < 1e-15);
        assert!(r > eps);
    }

    #[test]
    fn dual_objective_rejects_positive_w() {
        let dims = (2, 2, 1);
        let inst = random_instance(dims, 3, true);
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones(dims), 0.05).unwrap();
        let mut st = DualState::cold(&inst);
        st.w.data_mut()[1] = 0.5;
        assert!(matches!(
            dual_objective(&sub, &st),
            Err(Error::PositiveCapacityMultiplier { index: 1 })
        ));
    }

    #[test]
    fn unit_instance_fixed_point() {
        let inst = unit_instance();
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones((1, 1, 1)), 0.05).unwrap();
        let mut st = DualState::cold(&inst);
        sweep_multiplicative(&sub, &mut st).unwrap();
        assert_eq!(st.xi()[0][0], 1.0);
        assert_eq!(st.y()[0][0], 0.0);
        let mut st2 = DualState::cold(&inst);
        sweep_logdomain(&sub, &mut st2).unwrap();
        assert_eq!(st2.y()[0][0], 0.0);
        assert_eq!(st2.w().data()[0], 0.0);
        let x = recover_primal(&sub, &st).unwrap();
        assert!((x.data()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn first_block_constraint_exact_after_its_update() {
        // one sweep of a 2x2 transport instance with zero cost enforces the
        // row block exactly on the recovered plan when no capacity follows
        let dims = (2, 2, 1);
        let blocks = cmot_marginal_blocks(dims);
        let inst = Instance::new(
            Tensor3::zeros(dims),
            blocks,
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            None,
        )
        .unwrap();
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones(dims), 0.05).unwrap();
        let mut st = DualState::cold(&inst);
        sweep_multiplicative(&sub, &mut st).unwrap();
        let x = recover_primal(&sub, &st).unwrap();
        // after the full sweep the *last* block is exact
        let col = inst.blocks()[1].apply(&x).unwrap();
        assert!((col[0] - 0.5).abs() < 1e-12);
        assert!((col[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn block_exactness_mid_sweep() {
        // white-box: replicate the first stage of the multiplicative sweep
        // and verify the just-updated block solves its constraint exactly
        let dims = (3, 4, 1);
        let inst = random_instance(dims, 11, false);
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones(dims), 0.05).unwrap();
        let mut st = DualState::cold(&inst);
        // run one full sweep to leave the trivial cold start
        sweep_multiplicative(&sub, &mut st).unwrap();
        // manual first-block update on a copy
        let mut hm = build_hat_m(&sub, &st);
        div_by_block(&mut hm, &inst.blocks()[0], &st.xi[0]);
        let denom = inst.blocks()[0].apply(&hm).unwrap();
        for (j, &d) in denom.iter().enumerate() {
            st.xi[0][j] = inst.rhs()[0][j] / d;
        }
        st.hat_m = None;
        st.refresh_log_from_xi(sub.epsilon());
        let x = recover_primal(&sub, &st).unwrap();
        let got = inst.blocks()[0].apply(&x).unwrap();
        for (g, b) in got.iter().zip(&inst.rhs()[0]) {
            assert!((g - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn feasibility_reached_on_random_cmot() {
        let dims = (3, 3, 3);
        let inst = random_instance(dims, 6, true);
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones(dims), 0.05).unwrap();
        let mut st = DualState::cold(&inst);
        for _ in 0..200 {
            sweep_multiplicative(&sub, &mut st).unwrap();
        }
        let x = recover_primal(&sub, &st).unwrap();
        assert!(eppa::delta1(&inst, &x) < 1e-8);

        // cross-check against the log-domain path
        let mut st2 = DualState::cold(&inst);
        for _ in 0..200 {
            sweep_logdomain(&sub, &mut st2).unwrap();
        }
        let x2 = recover_primal(&sub, &st2).unwrap();
        let diff = x.sub(&x2).unwrap().norm_fro();
        assert!(diff < 1e-10, "schemes disagree: {diff}");
    }

    #[test]
    fn one_log_sweep_matches_one_multiplicative_sweep() {
        let dims = (4, 3, 2);
        let inst = random_instance(dims, 7, true);
        let center = Tensor3::from_fn(dims, |r, s, t| 0.3 + ((r + s + t) % 4) as f64 * 0.2);
        let sub = ProxSubproblem::new(&inst, &center, 0.05).unwrap();
        let mut a = DualState::cold(&inst);
        let mut b = DualState::cold(&inst);
        sweep_multiplicative(&sub, &mut a).unwrap();
        sweep_logdomain(&sub, &mut b).unwrap();
        for (ya, yb) in a.y().iter().zip(b.y()) {
            for (va, vb) in ya.iter().zip(yb) {
                assert!((va - vb).abs() < 1e-10);
            }
        }
        let dw = a.w().sub(b.w()).unwrap().norm_fro();
        assert!(dw < 1e-10);
    }

    #[test]
    fn cmot_specialized_sweep_agrees_with_generic() {
        let dims = (4, 3, 2);
        let inst = random_instance(dims, 9, true);
        let center = Tensor3::from_fn(dims, |r, s, t| 0.2 + ((r * s + t) % 5) as f64 * 0.3);
        let sub = ProxSubproblem::new(&inst, &center, 0.05).unwrap();
        let mut a = DualState::cold(&inst);
        let mut b = DualState::cold(&inst);
        sweep_multiplicative(&sub, &mut a).unwrap();
        cmot3_sweep(&sub, &mut b).unwrap();
        for (xa, xb) in a.xi().iter().zip(b.xi()) {
            for (va, vb) in xa.iter().zip(xb) {
                assert!((va - vb).abs() <= 1e-12 * (1.0 + va.abs()));
            }
        }
        for (ga, gb) in a.gamma().data().iter().zip(b.gamma().data()) {
            assert!((ga - gb).abs() <= 1e-12 * (1.0 + ga.abs()));
        }
        assert!(matches!(
            cmot3_sweep(
                &ProxSubproblem::new(&unit_instance(), &Tensor3::ones((1, 1, 1)), 0.05)
                    .unwrap(),
                &mut DualState::cold(&unit_instance())
            ),
            Err(Error::NotMarginalStructured)
        ));
    }

    #[test]
    fn classic_sinkhorn_reduction_when_n3_is_one() {
        // n3 = 1: the capacity step reduces to Gamma = min{(U./M~)./(f x g), 1}
        let dims = (3, 3, 1);
        let inst = random_instance(dims, 13, true);
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones(dims), 0.05).unwrap();
        let mut st = DualState::cold(&inst);
        cmot3_sweep(&sub, &mut st).unwrap();
        let u = inst.upper().unwrap();
        let fg = Tensor3::outer2(&st.xi()[0], &st.xi()[1]);
        for e in 0..inst.num_entries() {
            let expect = (u.data()[e] / (sub.m_tilde().data()[e] * fg.data()[e])).min(1.0);
            assert!((st.gamma().data()[e] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn logdomain_survives_where_multiplicative_underflows() {
        // eps = 1e-3 with cost spread >= 5: exp(-C/eps) underflows to zero
        let dims = (5, 5, 1);
        let blocks = cmot_marginal_blocks(dims);
        let cost = Tensor3::from_fn(dims, |r, s, _| 5.0 * ((r * 5 + s) as f64) / 24.0);
        let inst = Instance::new(
            cost,
            blocks,
            vec![vec![0.2; 5], vec![0.2; 5]],
            None,
        )
        .unwrap();
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones(dims), 1e-3).unwrap();
        let mut st = DualState::cold(&inst);
        let err = sweep_multiplicative(&sub, &mut st);
        assert!(matches!(err, Err(Error::DualUnderflow { .. })));
        let mut st2 = DualState::cold(&inst);
        for _ in 0..5 {
            sweep_logdomain(&sub, &mut st2).unwrap();
        }
        for y in st2.y() {
            assert!(y.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn dual_objective_monotone_across_sweeps() {
        let dims = (4, 4, 2);
        let inst = random_instance(dims, 21, true);
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones(dims), 0.05).unwrap();
        let mut st = DualState::cold(&inst);
        let mut prev = dual_objective(&sub, &st).unwrap();
        for _ in 0..100 {
            sweep_multiplicative(&sub, &mut st).unwrap();
            let r = dual_objective(&sub, &st).unwrap();
            assert!(r <= prev + 1e-12 * (1.0 + r.abs()));
            prev = r;
        }
    }

    #[test]
    fn iterates_approach_long_run_limit() {
        // an instance whose dual converges slowly enough that sweeps 50,
        // 100 and 200 are still strictly approaching the limit
        let dims = (3, 3, 3);
        let inst = random_instance(dims, 5, true);
        let sub = ProxSubproblem::new(&inst, &Tensor3::ones(dims), 0.05).unwrap();
        let snapshot = |st: &DualState| {
            let mut v: Vec<f64> = Vec::new();
            for y in st.y() {
                v.extend_from_slice(y);
            }
            v.extend_from_slice(st.w().data());
            v
        };
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let mut st = DualState::cold(&inst);
        let mut snaps = std::collections::BTreeMap::new();
        for sweep in 1..=2000 {
            sweep_multiplicative(&sub, &mut st).unwrap();
            if [50usize, 100, 200].contains(&sweep) {
                snaps.insert(sweep, snapshot(&st));
            }
        }
        let limit = snapshot(&st);
        for t in [50usize, 100] {
            let near = dist(&snaps[&(2 * t)], &limit);
            let far = dist(&snaps[&t], &limit);
            assert!(near < far, "sweep {} not closer: {} vs {}", 2 * t, near, far);
        }
    }

    #[test]
    fn recover_primal_into_prox_optimum_is_unique() {
        // long-run BCD from two different starts reaches the same optimum
        let dims = (3, 2, 2);
        let inst = random_instance(dims, 29, true);
        let center = Tensor3::from_fn(dims, |r, s, t| 0.4 + ((r + 2 * s + t) % 3) as f64 * 0.3);
        let sub = ProxSubproblem::new(&inst, &center, 0.05).unwrap();
        let mut a = DualState::cold(&inst);
        let mut b = DualState::cold(&inst);
        for y in b.y.iter_mut() {
            for (j, v) in y.iter_mut().enumerate() {
                *v = 0.01 * (j as f64 + 1.0);
            }
        }
        b.refresh_xi_from_log(sub.epsilon());
        for _ in 0..4000 {
            sweep_multiplicative(&sub, &mut a).unwrap();
            sweep_multiplicative(&sub, &mut b).unwrap();
        }
        let xa = recover_primal(&sub, &a).unwrap();
        let xb = recover_primal(&sub, &b).unwrap();
        let gap = xa
            .data()
            .iter()
            .zip(xb.data())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-6, "two starts disagree by {gap}");
    }
}
