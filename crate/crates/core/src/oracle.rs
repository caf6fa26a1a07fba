//! Exact LP oracle for desk-scale verification.
//!
//! Flattens an instance into a dense equality-form LP with variable upper
//! bounds and solves it by a two-phase bounded-variable primal simplex
//! with Bland's anti-cycling rule. The oracle shares no code with the
//! entropic machinery it validates; its own test suite cross-checks the
//! simplex against exhaustive vertex enumeration on tiny problems.

use crate::constraints::{Instance, UNCOVERED};
use crate::error::{Error, Result};

/// Default cap on flattened variables; keeps dense storage desk-scale.
pub const DEFAULT_MAX_VARS: usize = 10_000;

const TOL: f64 = 1e-10;
const PIVOT_CAP: usize = 200_000;
const REFACTOR_EVERY: usize = 64;

/// Dense equality-form LP `min c'x : Ax = b, 0 <= x <= u` with binary `A`.
#[derive(Clone, Debug)]
pub struct StandardLp {
    pub num_rows: usize,
    pub num_vars: usize,
    /// Row-major `num_rows x num_vars`.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    /// Variable upper bounds; `f64::INFINITY` for unbounded.
    pub upper: Vec<f64>,
}

impl StandardLp {
    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.num_vars + j]
    }
}

/// Flattens an instance: one column per tensor entry in flat order, one
/// row per constraint row, blocks stacked in order.
pub fn flatten(inst: &Instance) -> Result<StandardLp> {
    flatten_with_limit(inst, DEFAULT_MAX_VARS)
}

pub fn flatten_with_limit(inst: &Instance, max_vars: usize) -> Result<StandardLp> {
    let vars = inst.num_entries();
    if vars > max_vars {
        return Err(Error::OracleSizeGuard {
            vars,
            max: max_vars,
        });
    }
    let num_rows: usize = inst.blocks().iter().map(|b| b.rows()).sum();
    let mut matrix = vec![0.0; num_rows * vars];
    let mut rhs = Vec::with_capacity(num_rows);
    let mut offset = 0;
    for (block, b) in inst.blocks().iter().zip(inst.rhs()) {
        for (e, &l) in block.labels().iter().enumerate() {
            if l != UNCOVERED {
                matrix[(offset + l as usize) * vars + e] = 1.0;
            }
        }
        rhs.extend_from_slice(b);
        offset += block.rows();
    }
    let upper = match inst.upper() {
        Some(u) => u.data().to_vec(),
        None => vec![f64::INFINITY; vars],
    };
    Ok(StandardLp {
        num_rows,
        num_vars: vars,
        matrix,
        rhs,
        cost: inst.cost().data().to_vec(),
        upper,
    })
}

/// A primal optimal vertex.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Variable indices of the final basis (may include artificial slots
    /// `>= num_vars` pinned to zero on redundant rows).
    pub basis: Vec<usize>,
    pub pivots: usize,
}

struct Simplex<'a> {
    lp: &'a StandardLp,
    m: usize,
    /// total variables = original + m artificials
    n: usize,
    upper: Vec<f64>,
    art_sign: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    at_upper: Vec<bool>,
    binv: Vec<f64>,
    pivots: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a StandardLp) -> Self {
        let m = lp.num_rows;
        let n = lp.num_vars + m;
        let mut upper = lp.upper.clone();
        upper.extend(std::iter::repeat(f64::INFINITY).take(m));
        let art_sign: Vec<f64> = lp.rhs.iter().map(|&b| if b >= 0.0 { 1.0 } else { -1.0 }).collect();
        let mut cost = vec![0.0; n];
        for j in lp.num_vars..n {
            cost[j] = 1.0;
        }
        let basis: Vec<usize> = (lp.num_vars..n).collect();
        let mut in_basis = vec![false; n];
        for &j in &basis {
            in_basis[j] = true;
        }
        // B = diag(art_sign) so B^{-1} = diag(art_sign)
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = art_sign[i];
        }
        Self {
            lp,
            m,
            n,
            upper,
            art_sign,
            cost,
            basis,
            in_basis,
            at_upper: vec![false; n],
            binv,
            pivots: 0,
        }
    }

    fn col_into(&self, j: usize, out: &mut [f64]) {
        if j < self.lp.num_vars {
            for i in 0..self.m {
                out[i] = self.lp.a(i, j);
            }
        } else {
            out.fill(0.0);
            out[j - self.lp.num_vars] = self.art_sign[j - self.lp.num_vars];
        }
    }

    /// Effective right-hand side after moving at-upper nonbasics across.
    fn rhs_effective(&self) -> Vec<f64> {
        let mut r = self.lp.rhs.clone();
        for j in 0..self.n {
            if !self.in_basis[j] && self.at_upper[j] {
                let u = self.upper[j];
                if j < self.lp.num_vars {
                    for i in 0..self.m {
                        r[i] -= self.lp.a(i, j) * u;
                    }
                } else {
                    r[j - self.lp.num_vars] -= self.art_sign[j - self.lp.num_vars] * u;
                }
            }
        }
        r
    }

    fn basic_values(&self) -> Vec<f64> {
        let r = self.rhs_effective();
        let mut x = vec![0.0; self.m];
        for i in 0..self.m {
            let mut acc = 0.0;
            for k in 0..self.m {
                acc += self.binv[i * self.m + k] * r[k];
            }
            x[i] = acc;
        }
        x
    }

    fn refactorize(&mut self) -> Result<()> {
        let m = self.m;
        // invert the basis matrix by Gauss-Jordan with partial pivoting
        let mut aug = vec![0.0; m * 2 * m];
        let mut col = vec![0.0; m];
        for (pos, &j) in self.basis.iter().enumerate() {
            self.col_into(j, &mut col);
            for i in 0..m {
                aug[i * 2 * m + pos] = col[i];
            }
        }
        for i in 0..m {
            aug[i * 2 * m + m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            let mut best = aug[c * 2 * m + c].abs();
            for r in c + 1..m {
                let v = aug[r * 2 * m + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(Error::NonFinite {
                    context: "singular simplex basis",
                });
            }
            if piv != c {
                for k in 0..2 * m {
                    aug.swap(c * 2 * m + k, piv * 2 * m + k);
                }
            }
            let d = aug[c * 2 * m + c];
            for k in 0..2 * m {
                aug[c * 2 * m + k] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = aug[r * 2 * m + c];
                    if f != 0.0 {
                        for k in 0..2 * m {
                            aug[r * 2 * m + k] -= f * aug[c * 2 * m + k];
                        }
                    }
                }
            }
        }
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = aug[i * 2 * m + m + k];
            }
        }
        Ok(())
    }

    /// Reduced cost of column j given the simplex multipliers.
    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        if j < self.lp.num_vars {
            for i in 0..self.m {
                let a = self.lp.a(i, j);
                if a != 0.0 {
                    d -= y[i] * a;
                }
            }
        } else {
            d -= y[j - self.lp.num_vars] * self.art_sign[j - self.lp.num_vars];
        }
        d
    }

    fn multipliers(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for k in 0..m {
            let mut acc = 0.0;
            for i in 0..m {
                acc += self.cost[self.basis[i]] * self.binv[i * m + k];
            }
            y[k] = acc;
        }
        y
    }

    /// One phase of bounded-variable simplex with Bland's rule.
    fn optimize(&mut self) -> Result<()> {
        loop {
            if self.pivots > PIVOT_CAP {
                return Err(Error::PivotCapExceeded { cap: PIVOT_CAP });
            }
            let y = self.multipliers();
            // Bland: smallest eligible variable index enters
            let mut entering = None;
            for j in 0..self.n {
                if self.in_basis[j] || self.upper[j] == 0.0 {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                if !self.at_upper[j] && d < -TOL {
                    entering = Some((j, 1.0));
                    break;
                }
                if self.at_upper[j] && d > TOL {
                    entering = Some((j, -1.0));
                    break;
                }
            }
            let Some((j, sigma)) = entering else {
                return Ok(());
            };

            let mut col = vec![0.0; self.m];
            self.col_into(j, &mut col);
            let mut dir = vec![0.0; self.m];
            for i in 0..self.m {
                let mut acc = 0.0;
                for k in 0..self.m {
                    acc += self.binv[i * self.m + k] * col[k];
                }
                dir[i] = acc;
            }
            let xb = self.basic_values();

            // ratio test; Bland tie-break on the smallest leaving variable
            let mut t_best = self.upper[j]; // own bound flip
            let mut leave: Option<(usize, bool)> = None; // (row, hits_upper)
            for i in 0..self.m {
                let rate = sigma * dir[i];
                let (lim, hits_upper) = if rate > TOL {
                    (xb[i] / rate, false)
                } else if rate < -TOL && self.upper[self.basis[i]].is_finite() {
                    ((self.upper[self.basis[i]] - xb[i]) / (-rate), true)
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                let better = match leave {
                    _ if lim < t_best - 1e-12 => true,
                    Some((row, _)) if (lim - t_best).abs() <= 1e-12 => {
                        self.basis[i] < self.basis[row]
                    }
                    None if (lim - t_best).abs() <= 1e-12 => true,
                    _ => false,
                };
                if better {
                    t_best = lim.min(t_best);
                    leave = Some((i, hits_upper));
                }
            }

            if t_best.is_infinite() {
                return Err(Error::Unbounded);
            }

            match leave {
                None => {
                    // entering variable runs to its other bound
                    self.at_upper[j] = !self.at_upper[j];
                    self.pivots += 1;
                }
                Some((row, hits_upper)) => {
                    let leaving = self.basis[row];
                    self.in_basis[leaving] = false;
                    self.at_upper[leaving] = hits_upper;
                    self.basis[row] = j;
                    self.in_basis[j] = true;
                    // entering starts from the bound it was sitting at
                    // (value handled implicitly through rhs_effective)
                    self.at_upper[j] = false;
                    self.pivots += 1;
                    self.update_binv(row, &dir)?;
                    if self.pivots % REFACTOR_EVERY == 0 {
                        self.refactorize()?;
                    }
                }
            }
        }
    }

    fn update_binv(&mut self, row: usize, dir: &[f64]) -> Result<()> {
        let m = self.m;
        let piv = dir[row];
        if piv.abs() < 1e-12 {
            return Err(Error::NonFinite {
                context: "degenerate simplex pivot",
            });
        }
        for k in 0..m {
            self.binv[row * m + k] /= piv;
        }
        for i in 0..m {
            if i != row {
                let f = dir[i];
                if f != 0.0 {
                    for k in 0..m {
                        self.binv[i * m + k] -= f * self.binv[row * m + k];
                    }
                }
            }
        }
        Ok(())
    }

    fn solution(&self) -> Vec<f64> {
        let xb = self.basic_values();
        let mut x = vec![0.0; self.n];
        for j in 0..self.n {
            if !self.in_basis[j] && self.at_upper[j] {
                x[j] = self.upper[j];
            }
        }
        for (i, &j) in self.basis.iter().enumerate() {
            x[j] = xb[i];
        }
        x
    }
}

/// Two-phase bounded-variable primal simplex with Bland's rule.
pub fn solve_lp_exact(lp: &StandardLp) -> Result<LpSolution> {
    let mut s = Simplex::new(lp);

    // phase 1: minimize the artificial mass
    s.optimize()?;
    let phase1: f64 = {
        let x = s.solution();
        x[lp.num_vars..].iter().sum()
    };
    let b_scale: f64 = lp.rhs.iter().map(|b| b.abs()).sum::<f64>();
    if phase1 > 1e-8 * (1.0 + b_scale) {
        return Err(Error::Infeasible);
    }

    // pin artificials to zero and drive basic ones out where possible
    for j in lp.num_vars..s.n {
        s.upper[j] = 0.0;
        s.at_upper[j] = false;
    }
    for row in 0..s.m {
        if s.basis[row] < lp.num_vars {
            continue;
        }
        let mut col = vec![0.0; s.m];
        let mut dir = vec![0.0; s.m];
        let mut replaced = false;
        for j in 0..lp.num_vars {
            if s.in_basis[j] {
                continue;
            }
            s.col_into(j, &mut col);
            let mut piv = 0.0;
            for k in 0..s.m {
                piv += s.binv[row * s.m + k] * col[k];
            }
            if piv.abs() > 1e-7 {
                for i in 0..s.m {
                    let mut acc = 0.0;
                    for k in 0..s.m {
                        acc += s.binv[i * s.m + k] * col[k];
                    }
                    dir[i] = acc;
                }
                let leaving = s.basis[row];
                s.in_basis[leaving] = false;
                s.at_upper[leaving] = false;
                s.basis[row] = j;
                s.in_basis[j] = true;
                s.update_binv(row, &dir)?;
                replaced = true;
                break;
            }
        }
        // redundant row: the artificial stays basic at level zero
        let _ = replaced;
    }

    // phase 2: original costs
    for j in 0..lp.num_vars {
        s.cost[j] = lp.cost[j];
    }
    for j in lp.num_vars..s.n {
        s.cost[j] = 0.0;
    }
    s.refactorize()?;
    s.optimize()?;

    let full = s.solution();
    let x = full[..lp.num_vars].to_vec();
    let mut objective = 0.0;
    for (v, c) in x.iter().zip(&lp.cost) {
        objective += v * c;
    }
    Ok(LpSolution {
        x,
        objective,
        basis: s.basis.clone(),
        pivots: s.pivots,
    })
}

/// Exhaustive vertex enumeration for cross-validation, exponential in the
/// variable count. Every vertex has its strictly-between-bounds support on
/// linearly independent columns, so scanning all (support, bound pattern)
/// splits visits every vertex.
pub fn brute_force_optimum(lp: &StandardLp) -> Result<(Vec<f64>, f64)> {
    let n = lp.num_vars;
    if n > 16 {
        return Err(Error::OracleSizeGuard { vars: n, max: 16 });
    }
    let m = lp.num_rows;
    let mut best: Option<(Vec<f64>, f64)> = None;

    // assignment per variable: 0 = at lower, 1 = at upper (finite), 2 = free
    let mut assign = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&j| assign[j] == 2).collect();
        if free.len() <= m {
            let mut rhs = lp.rhs.clone();
            let mut feasible_pattern = true;
            for j in 0..n {
                if assign[j] == 1 {
                    if !lp.upper[j].is_finite() {
                        feasible_pattern = false;
                        break;
                    }
                    for i in 0..m {
                        rhs[i] -= lp.a(i, j) * lp.upper[j];
                    }
                }
            }
            if feasible_pattern {
                if let Some(xf) = solve_consistent(lp, &free, &rhs) {
                    let mut ok = true;
                    let mut x = vec![0.0; n];
                    for j in 0..n {
                        if assign[j] == 1 {
                            x[j] = lp.upper[j];
                        }
                    }
                    for (pos, &j) in free.iter().enumerate() {
                        let v = xf[pos];
                        if v < -1e-9 || v > lp.upper[j] + 1e-9 {
                            ok = false;
                            break;
                        }
                        x[j] = v;
                    }
                    if ok {
                        let obj: f64 = x.iter().zip(&lp.cost).map(|(v, c)| v * c).sum();
                        if best.as_ref().map_or(true, |(_, b)| obj < *b - 0.0) {
                            best = Some((x, obj));
                        }
                    }
                }
            }
        }
        // next ternary assignment
        let mut k = 0;
        loop {
            if k == n {
                return best.ok_or(Error::Infeasible);
            }
            assign[k] += 1;
            if assign[k] == 3 {
                assign[k] = 0;
                k += 1;
            } else {
                break;
            }
        }
    }
}

/// Solves `A_S x_S = rhs` when the system is consistent and `A_S` has full
/// column rank; returns `None` otherwise.
fn solve_consistent(lp: &StandardLp, cols: &[usize], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = lp.num_rows;
    let k = cols.len();
    let mut a = vec![0.0; m * (k + 1)];
    for i in 0..m {
        for (pos, &j) in cols.iter().enumerate() {
            a[i * (k + 1) + pos] = lp.a(i, j);
        }
        a[i * (k + 1) + k] = rhs[i];
    }
    let mut row = 0;
    let mut pivot_rows = Vec::new();
    for c in 0..k {
        let mut piv = row;
        let mut bestv = 0.0;
        for r in row..m {
            let v = a[r * (k + 1) + c].abs();
            if v > bestv {
                bestv = v;
                piv = r;
            }
        }
        if bestv < 1e-9 {
            return None; // rank-deficient support
        }
        if piv != row {
            for t in 0..k + 1 {
                a.swap(row * (k + 1) + t, piv * (k + 1) + t);
            }
        }
        let d = a[row * (k + 1) + c];
        for t in 0..k + 1 {
            a[row * (k + 1) + t] /= d;
        }
        for r in 0..m {
            if r != row {
                let f = a[r * (k + 1) + c];
                if f != 0.0 {
                    for t in 0..k + 1 {
                        a[r * (k + 1) + t] -= f * a[row * (k + 1) + t];
                    }
                }
            }
        }
        pivot_rows.push(row);
        row += 1;
    }
    // consistency of the eliminated remainder
    for r in row..m {
        if a[r * (k + 1) + k].abs() > 1e-9 {
            return None;
        }
    }
    let mut x = vec![0.0; k];
    for (c, &pr) in pivot_rows.iter().enumerate() {
        x[c] = a[pr * (k + 1) + k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::cmot_marginal_blocks;
    use crate::tensor::Tensor3;
    use crate::Instance;

    fn ot_2x2(upper: Option<f64>) -> Instance {
        let dims = (2, 2, 1);
        Instance::new(
            Tensor3::new(dims, vec![0.0, 1.0, 1.0, 0.0]).unwrap(),
            cmot_marginal_blocks(dims),
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            upper.map(|u| Tensor3::full(dims, u)),
        )
        .unwrap()
    }

    #[test]
    fn flatten_shapes() {
        let lp = flatten(&ot_2x2(None)).unwrap();
        assert_eq!(lp.num_vars, 4);
        assert_eq!(lp.num_rows, 4);
        // rows: two row-sum indicators then two column-sum indicators
        assert_eq!(
            lp.matrix,
            vec![
                1.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 1.0, //
                1.0, 0.0, 1.0, 0.0, //
                0.0, 1.0, 0.0, 1.0,
            ]
        );
        // every column covered by both blocks
        for j in 0..4 {
            let ones: f64 = (0..4).map(|i| lp.a(i, j)).sum();
            assert_eq!(ones, 2.0);
        }
    }

    #[test]
    fn flatten_tomography_shape() {
        let dims = (3, 3, 1);
        let blocks = vec![
            crate::tomo_block(3, (1, 0)).unwrap(),
            crate::tomo_block(3, (0, 1)).unwrap(),
        ];
        let rhs = vec![
            blocks[0].apply(&Tensor3::ones(dims)).unwrap(),
            blocks[1].apply(&Tensor3::ones(dims)).unwrap(),
        ];
        let inst = Instance::new(Tensor3::zeros(dims), blocks, rhs, None).unwrap();
        let lp = flatten(&inst).unwrap();
        assert_eq!((lp.num_vars, lp.num_rows), (9, 6));
    }

    #[test]
    fn size_guard_fires() {
        let inst = ot_2x2(None);
        assert!(matches!(
            flatten_with_limit(&inst, 3),
            Err(Error::OracleSizeGuard { vars: 4, max: 3 })
        ));
    }

    #[test]
    fn zero_cost_matching() {
        let lp = flatten(&ot_2x2(None)).unwrap();
        let sol = solve_lp_exact(&lp).unwrap();
        assert!(sol.objective.abs() < 1e-10);
        assert!((sol.x[0] - 0.5).abs() < 1e-10);
        assert!((sol.x[3] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn capacity_forces_off_diagonal_mass() {
        let lp = flatten(&ot_2x2(Some(0.3))).unwrap();
        let sol = solve_lp_exact(&lp).unwrap();
        let expect = [0.3, 0.2, 0.2, 0.3];
        for (got, want) in sol.x.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert!((sol.objective - 0.4).abs() < 1e-10);
        // agrees with exhaustive vertex enumeration
        let (bx, bobj) = brute_force_optimum(&lp).unwrap();
        assert!((bobj - sol.objective).abs() < 1e-10);
        for (got, want) in bx.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn inconsistent_marginals_infeasible() {
        let dims = (2, 2, 1);
        let inst = Instance::new(
            Tensor3::zeros(dims),
            cmot_marginal_blocks(dims),
            vec![vec![0.5, 0.5], vec![0.9, 0.5]],
            None,
        )
        .unwrap();
        let lp = flatten(&inst).unwrap();
        assert!(matches!(solve_lp_exact(&lp), Err(Error::Infeasible)));
    }

    #[test]
    fn vertex_feasibility_and_basis() {
        use crate::gen::{gen_cmot, GenSpec};
        let (inst, _) = gen_cmot(&GenSpec::two_marginal(3, 3, 4)).unwrap();
        let lp = flatten(&inst).unwrap();
        let sol = solve_lp_exact(&lp).unwrap();
        assert_eq!(sol.basis.len(), lp.num_rows);
        // feasibility at 1e-10
        for i in 0..lp.num_rows {
            let mut acc = 0.0;
            for j in 0..lp.num_vars {
                acc += lp.a(i, j) * sol.x[j];
            }
            assert!((acc - lp.rhs[i]).abs() < 1e-10);
        }
        for (j, &v) in sol.x.iter().enumerate() {
            assert!(v >= -1e-10 && v <= lp.upper[j] + 1e-10);
        }
    }

    #[test]
    fn simplex_agrees_with_enumeration_on_small_family() {
        use crate::gen::{gen_cmot, GenSpec};
        for seed in 0..6u64 {
            let (inst, _) = gen_cmot(&GenSpec::two_marginal(3, 3, seed)).unwrap();
            let lp = flatten(&inst).unwrap();
            let sol = solve_lp_exact(&lp).unwrap();
            let (_, bobj) = brute_force_optimum(&lp).unwrap();
            assert!(
                (sol.objective - bobj).abs() < 1e-9,
                "seed {seed}: simplex {} vs enumeration {bobj}",
                sol.objective
            );
        }
    }

    #[test]
    fn column_permutation_preserves_objective() {
        use crate::gen::{gen_cmot, GenSpec};
        let (inst, _) = gen_cmot(&GenSpec::two_marginal(3, 4, 2)).unwrap();
        let lp = flatten(&inst).unwrap();
        let sol = solve_lp_exact(&lp).unwrap();
        // reverse the column order
        let perm: Vec<usize> = (0..lp.num_vars).rev().collect();
        let mut matrix = vec![0.0; lp.matrix.len()];
        for i in 0..lp.num_rows {
            for (newj, &oldj) in perm.iter().enumerate() {
                matrix[i * lp.num_vars + newj] = lp.a(i, oldj);
            }
        }
        let permuted = StandardLp {
            num_rows: lp.num_rows,
            num_vars: lp.num_vars,
            matrix,
            rhs: lp.rhs.clone(),
            cost: perm.iter().map(|&j| lp.cost[j]).collect(),
            upper: perm.iter().map(|&j| lp.upper[j]).collect(),
        };
        let sol2 = solve_lp_exact(&permuted).unwrap();
        assert!((sol.objective - sol2.objective).abs() < 1e-10);
    }
}
