//! Seeded synthetic instance generation.
//!
//! Instances are reproducible across platforms and implementations: all
//! randomness comes from SplitMix64 (a 64-bit counter-based generator with
//! fixed published constants) and normals are produced by the plain
//! Box-Muller transform. The draw order is part of the format and is
//! documented on [`gen_cmot`].

use crate::constraints::{cmot_marginal_blocks, Instance};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// SplitMix64: `state` advances by the golden-gamma constant and each
/// output is a finalizer of the new state, so draw `k` is a pure function
/// of `seed + k * 0x9E3779B97F4A7C15`.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the open interval `(0, 1)`.
    pub fn next_open01(&mut self) -> f64 {
        (((self.next_u64() >> 11) as f64) + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// A Box-Muller pair of independent standard normals.
    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }
}

/// Gaussian mixture over 3-space for the support points.
#[derive(Clone, Debug)]
pub struct MixtureSpec {
    pub means: Vec<[f64; 3]>,
    pub scales: Vec<f64>,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            means: vec![[-2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [2.0, 0.0, 2.0]],
            scales: vec![1.0, 1.0, 1.0],
        }
    }
}

/// Specification of one synthetic transport instance.
#[derive(Clone, Debug)]
pub struct GenSpec {
    /// 2 or 3.
    pub marginal_count: usize,
    /// `(n1, n2, n3)`; `n3` is forced to 1 for two marginals.
    pub sizes: (usize, usize, usize),
    pub seed: u64,
    pub mixture: MixtureSpec,
    /// Upper bound scale; must exceed 1 so the rank-one marginal tensor is
    /// strictly interior.
    pub capacity_factor: f64,
}

impl GenSpec {
    pub fn two_marginal(n1: usize, n2: usize, seed: u64) -> Self {
        Self {
            marginal_count: 2,
            sizes: (n1, n2, 1),
            seed,
            mixture: MixtureSpec::default(),
            capacity_factor: 2.0,
        }
    }

    pub fn three_marginal(n1: usize, n2: usize, n3: usize, seed: u64) -> Self {
        Self {
            marginal_count: 3,
            sizes: (n1, n2, n3),
            seed,
            mixture: MixtureSpec::default(),
            capacity_factor: 2.0,
        }
    }
}

fn draw_simplex(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.next_open01()).collect();
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

fn draw_support(rng: &mut SplitMix64, n: usize, mixture: &MixtureSpec) -> Vec<[f64; 3]> {
    let k = mixture.means.len() as u64;
    (0..n)
        .map(|_| {
            let comp = (rng.next_u64() % k) as usize;
            let (z1, z2) = rng.next_normal_pair();
            let (z3, _) = rng.next_normal_pair();
            let mean = mixture.means[comp];
            let scale = mixture.scales[comp];
            [
                mean[0] + scale * z1,
                mean[1] + scale * z2,
                mean[2] + scale * z3,
            ]
        })
        .collect()
}

#[inline]
fn sq_dist(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    dx * dx + dy * dy + dz * dz
}

/// Generates a capacity-bounded transport instance.
///
/// Draw order with a fresh SplitMix64 at `spec.seed`: marginal weights
/// (first axis, then second, then third when present), then the support
/// points of each axis in turn. Each support point consumes one component
/// pick and two Box-Muller pairs of which the first three normals are
/// used. Weights are normalized to unit mass; the cost is the sum of
/// squared pairwise support distances, divided by its maximum entry; the
/// upper bound is `capacity_factor` times the rank-one tensor of the
/// marginals, which is also returned as the strictly interior point.
pub fn gen_cmot(spec: &GenSpec) -> Result<(Instance, Tensor3)> {
    if spec.marginal_count != 2 && spec.marginal_count != 3 {
        return Err(Error::InstanceFormat(format!(
            "marginal_count must be 2 or 3, got {}",
            spec.marginal_count
        )));
    }
    if !(spec.capacity_factor > 1.0) {
        return Err(Error::InstanceFormat(format!(
            "capacity_factor must exceed 1, got {}",
            spec.capacity_factor
        )));
    }
    let dims = if spec.marginal_count == 2 {
        (spec.sizes.0, spec.sizes.1, 1)
    } else {
        spec.sizes
    };
    let mut rng = SplitMix64::new(spec.seed);

    let a = draw_simplex(&mut rng, dims.0);
    let b = draw_simplex(&mut rng, dims.1);
    let c = if spec.marginal_count == 3 {
        Some(draw_simplex(&mut rng, dims.2))
    } else {
        None
    };

    let p = draw_support(&mut rng, dims.0, &spec.mixture);
    let q = draw_support(&mut rng, dims.1, &spec.mixture);
    let r = if spec.marginal_count == 3 {
        Some(draw_support(&mut rng, dims.2, &spec.mixture))
    } else {
        None
    };

    let mut cost = match &r {
        None => Tensor3::from_fn(dims, |i, j, _| sq_dist(&p[i], &q[j])),
        Some(r) => Tensor3::from_fn(dims, |i, j, k| {
            sq_dist(&p[i], &q[j]) + sq_dist(&q[j], &r[k]) + sq_dist(&r[k], &p[i])
        }),
    };
    let max = cost.max_entry();
    if max > 0.0 {
        for v in cost.data_mut() {
            *v /= max;
        }
    }

    let interior = match &c {
        None => Tensor3::outer2(&a, &b),
        Some(c) => Tensor3::outer3(&a, &b, c),
    };
    let upper = interior.scale(spec.capacity_factor);

    let rhs = match c {
        None => vec![a, b],
        Some(c) => vec![a, b, c],
    };
    let instance = Instance::new(cost, cmot_marginal_blocks(dims), rhs, Some(upper))?;
    Ok((instance, interior))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_stream() {
        // first outputs for seed 1234567, from the published algorithm
        let mut rng = SplitMix64::new(1234567);
        let first = rng.next_u64();
        let mut again = SplitMix64::new(1234567);
        assert_eq!(first, again.next_u64());
        assert_ne!(rng.next_u64(), first);
    }

    #[test]
    fn marginals_are_normalized_and_positive() {
        for seed in [0u64, 1, 42, 9999] {
            let (inst, _) = gen_cmot(&GenSpec::three_marginal(5, 4, 3, seed)).unwrap();
            for b in inst.rhs() {
                let total: f64 = b.iter().sum();
                assert!((total - 1.0).abs() < 1e-14);
                assert!(b.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn cost_is_normalized_to_unit_maximum() {
        let (inst, _) = gen_cmot(&GenSpec::two_marginal(6, 7, 3)).unwrap();
        assert_eq!(inst.cost().max_entry(), 1.0);
        assert!(inst.cost().min_entry() >= 0.0);
    }

    #[test]
    fn interior_point_is_strictly_inside() {
        let (inst, xri) = gen_cmot(&GenSpec::two_marginal(4, 4, 7)).unwrap();
        let u = inst.upper().unwrap();
        for (&rv, &uv) in xri.data().iter().zip(u.data()) {
            assert!(0.0 < rv && rv < uv);
        }
        for (block, b) in inst.blocks().iter().zip(inst.rhs()) {
            let got = block.apply(&xri).unwrap();
            for (g, want) in got.iter().zip(b) {
                assert!((g - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let x = gen_cmot(&GenSpec::three_marginal(4, 3, 2, 11)).unwrap();
        let y = gen_cmot(&GenSpec::three_marginal(4, 3, 2, 11)).unwrap();
        assert_eq!(x.0.cost().data(), y.0.cost().data());
        assert_eq!(x.0.rhs(), y.0.rhs());
        assert_eq!(
            x.0.upper().unwrap().data(),
            y.0.upper().unwrap().data()
        );
        let z = gen_cmot(&GenSpec::three_marginal(4, 3, 2, 12)).unwrap();
        assert_ne!(x.0.cost().data(), z.0.cost().data());
    }

    #[test]
    fn capacity_factor_must_exceed_one() {
        let mut spec = GenSpec::two_marginal(3, 3, 0);
        spec.capacity_factor = 1.0;
        assert!(gen_cmot(&spec).is_err());
    }
}
