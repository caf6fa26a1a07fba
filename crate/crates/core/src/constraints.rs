//! Structured linear constraint blocks and problem instances.
//!
//! Each constraint block groups rows whose binary indicator tensors have
//! pairwise disjoint supports, so a block is stored as a label map: every
//! tensor entry carries either the row index it belongs to or an
//! "uncovered" sentinel. Apply/adjoint then run in a single pass over the
//! grid, which is what makes one dual sweep cost `O(n1 n2 n3)`.

use crate::error::{Error, Result};
use crate::tensor::{Dims, Tensor3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Sentinel label for entries not covered by any row of a block.
pub const UNCOVERED: u32 = u32::MAX;

/// One constraint block: a partition (or partial partition) of the grid
/// into `m` rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionBlock {
    dims: Dims,
    m: usize,
    labels: Vec<u32>,
}

impl PartitionBlock {
    /// Builds a block directly from a label map. Every row in `0..m` must
    /// appear at least once.
    pub fn from_labels(dims: Dims, m: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::DataLength {
                dims,
                len: labels.len(),
            });
        }
        let mut seen = vec![false; m];
        for &l in &labels {
            if l != UNCOVERED {
                let l = l as usize;
                if l >= m {
                    return Err(Error::LengthMismatch { len: l, rows: m });
                }
                seen[l] = true;
            }
        }
        if let Some(row) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyRow { row });
        }
        Ok(Self { dims, m, labels })
    }

    /// Builds a block from binary indicator tensors, one per row.
    /// Enforces the non-overlap structure at construction time.
    pub fn from_indicators(tensors: &[Tensor3]) -> Result<Self> {
        let dims = match tensors.first() {
            Some(t) => t.dims(),
            None => return Err(Error::EmptyRow { row: 0 }),
        };
        let mut labels = vec![UNCOVERED; dims.0 * dims.1 * dims.2];
        for (row, t) in tensors.iter().enumerate() {
            if t.dims() != dims {
                return Err(Error::DimMismatch {
                    left: dims,
                    right: t.dims(),
                });
            }
            let mut nonempty = false;
            for (index, &v) in t.data().iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                if v != 1.0 {
                    return Err(Error::NonBinaryIndicator {
                        tensor: row,
                        index,
                        value: v,
                    });
                }
                if labels[index] != UNCOVERED {
                    return Err(Error::OverlappingIndicators {
                        index,
                        first: labels[index] as usize,
                        second: row,
                    });
                }
                labels[index] = row as u32;
                nonempty = true;
            }
            if !nonempty {
                return Err(Error::EmptyRow { row });
            }
        }
        Ok(Self {
            dims,
            m: tensors.len(),
            labels,
        })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Number of rows `m`.
    #[inline]
    pub fn rows(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn is_fully_covering(&self) -> bool {
        self.labels.iter().all(|&l| l != UNCOVERED)
    }

    /// Reconstructs the row indicator tensors.
    pub fn indicator_tensors(&self) -> Vec<Tensor3> {
        let mut out = vec![Tensor3::zeros(self.dims); self.m];
        for (index, &l) in self.labels.iter().enumerate() {
            if l != UNCOVERED {
                out[l as usize].data_mut()[index] = 1.0;
            }
        }
        out
    }

    /// `out[j] = sum of X over entries labelled j` (scatter-add in
    /// ascending flat order). Uncovered entries are ignored.
    pub fn apply(&self, x: &Tensor3) -> Result<Vec<f64>> {
        if x.dims() != self.dims {
            return Err(Error::DimMismatch {
                left: self.dims,
                right: x.dims(),
            });
        }
        let mut out = vec![0.0; self.m];
        for (&l, &v) in self.labels.iter().zip(x.data()) {
            if l != UNCOVERED {
                out[l as usize] += v;
            }
        }
        Ok(out)
    }

    /// Adjoint gather: entry `e` receives `y[label(e)]`, uncovered entries 0.
    pub fn adjoint(&self, y: &[f64]) -> Result<Tensor3> {
        if y.len() != self.m {
            return Err(Error::LengthMismatch {
                len: y.len(),
                rows: self.m,
            });
        }
        let data = self
            .labels
            .iter()
            .map(|&l| if l == UNCOVERED { 0.0 } else { y[l as usize] })
            .collect();
        Tensor3::new(self.dims, data)
    }

    /// Like [`adjoint`](Self::adjoint) but uncovered entries receive 1,
    /// matching the exponential change of variables of the dual updates.
    pub fn bullet(&self, z: &[f64]) -> Result<Tensor3> {
        if z.len() != self.m {
            return Err(Error::LengthMismatch {
                len: z.len(),
                rows: self.m,
            });
        }
        let data = self
            .labels
            .iter()
            .map(|&l| if l == UNCOVERED { 1.0 } else { z[l as usize] })
            .collect();
        Tensor3::new(self.dims, data)
    }

    /// Sum of `M` over entries not covered by this block.
    pub fn uncovered_sum(&self, m: &Tensor3) -> Result<f64> {
        if m.dims() != self.dims {
            return Err(Error::DimMismatch {
                left: self.dims,
                right: m.dims(),
            });
        }
        let mut acc = 0.0;
        for (&l, &v) in self.labels.iter().zip(m.data()) {
            if l == UNCOVERED {
                acc += v;
            }
        }
        Ok(acc)
    }
}

/// Marginal-sum blocks: block `i` labels entry `(r, s, t)` with its `i`-th
/// coordinate. Returns two blocks when `n3 == 1` (the classical matrix
/// case), otherwise three.
pub fn cmot_marginal_blocks(dims: Dims) -> Vec<PartitionBlock> {
    let total = dims.0 * dims.1 * dims.2;
    let mut blocks = Vec::new();
    let coords: [Box<dyn Fn(usize, usize, usize) -> usize>; 3] = [
        Box::new(|r, _, _| r),
        Box::new(|_, s, _| s),
        Box::new(|_, _, t| t),
    ];
    let block_count = if dims.2 == 1 { 2 } else { 3 };
    for (axis, coord) in coords.iter().enumerate().take(block_count) {
        let m = [dims.0, dims.1, dims.2][axis];
        let mut labels = Vec::with_capacity(total);
        for r in 0..dims.0 {
            for s in 0..dims.1 {
                for t in 0..dims.2 {
                    labels.push(coord(r, s, t) as u32);
                }
            }
        }
        blocks.push(PartitionBlock::from_labels(dims, m, labels).expect("full cover"));
    }
    blocks
}

/// Lattice-line projection block for an `n x n` grid along direction
/// `(v1, v2)`, admissible forms `(1, p)`, `(1, -p)`, `(p, 1)`, `(p, -1)`
/// with integer `p >= 0`.
///
/// With `(x, y) = (column, row)` 1-based, all points on a line parallel to
/// the direction share the invariant `v2 x - v1 y`; rows are numbered by
/// ascending invariant. Every grid entry lies on exactly one line, so the
/// block always covers the full grid.
pub fn tomo_block(n: usize, direction: (i64, i64)) -> Result<PartitionBlock> {
    let (v1, v2) = direction;
    let admissible = v1 == 1 || (v1 >= 0 && (v2 == 1 || v2 == -1));
    if !admissible || (v1 == 0 && v2 == 0) {
        return Err(Error::InvalidDirection(v1, v2));
    }
    let dims = (n, n, 1);
    let mut rows: BTreeMap<i64, u32> = BTreeMap::new();
    let mut invariants = Vec::with_capacity(n * n);
    for r in 0..n {
        for s in 0..n {
            let x = (s + 1) as i64;
            let y = (r + 1) as i64;
            let inv = v2 * x - v1 * y;
            invariants.push(inv);
            rows.entry(inv).or_insert(0);
        }
    }
    for (next, (_, id)) in rows.iter_mut().enumerate() {
        *id = next as u32;
    }
    let labels = invariants.iter().map(|inv| rows[inv]).collect();
    PartitionBlock::from_labels(dims, rows.len(), labels)
}

/// A full problem instance: `min <C, X>` subject to the block constraints
/// `A_i(X) = b_i` and the box `0 <= X <= U` (absent `U` means unbounded
/// above; individual `U` entries may be `+inf`).
#[derive(Clone, Debug)]
pub struct Instance {
    dims: Dims,
    cost: Tensor3,
    blocks: Vec<PartitionBlock>,
    rhs: Vec<Vec<f64>>,
    upper: Option<Tensor3>,
}

impl Instance {
    pub fn new(
        cost: Tensor3,
        blocks: Vec<PartitionBlock>,
        rhs: Vec<Vec<f64>>,
        upper: Option<Tensor3>,
    ) -> Result<Self> {
        let dims = cost.dims();
        if blocks.is_empty() {
            return Err(Error::EmptyRow { row: 0 });
        }
        if blocks.len() != rhs.len() {
            return Err(Error::LengthMismatch {
                len: rhs.len(),
                rows: blocks.len(),
            });
        }
        for (i, (block, b)) in blocks.iter().zip(&rhs).enumerate() {
            if block.dims() != dims {
                return Err(Error::DimMismatch {
                    left: dims,
                    right: block.dims(),
                });
            }
            if b.len() != block.rows() {
                return Err(Error::LengthMismatch {
                    len: b.len(),
                    rows: block.rows(),
                });
            }
            for (row, &v) in b.iter().enumerate() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NonpositiveRhs {
                        block: i,
                        row,
                        value: v,
                    });
                }
            }
        }
        if let Some(u) = &upper {
            if u.dims() != dims {
                return Err(Error::DimMismatch {
                    left: dims,
                    right: u.dims(),
                });
            }
            for (index, &v) in u.data().iter().enumerate() {
                if !(v > 0.0) {
                    return Err(Error::NonpositiveUpper { index, value: v });
                }
            }
        }
        Ok(Self {
            dims,
            cost,
            blocks,
            rhs,
            upper,
        })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn cost(&self) -> &Tensor3 {
        &self.cost
    }

    #[inline]
    pub fn blocks(&self) -> &[PartitionBlock] {
        &self.blocks
    }

    #[inline]
    pub fn rhs(&self) -> &[Vec<f64>] {
        &self.rhs
    }

    #[inline]
    pub fn upper(&self) -> Option<&Tensor3> {
        self.upper.as_ref()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_entries(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    /// True when the blocks are exactly the marginal-sum blocks of the
    /// grid (two for `n3 == 1`, three otherwise), in that order.
    pub fn is_marginal_structured(&self) -> bool {
        let expect = cmot_marginal_blocks(self.dims);
        self.blocks.len() == expect.len()
            && self.blocks.iter().zip(&expect).all(|(a, b)| a == b)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            dims: [self.dims.0, self.dims.1, self.dims.2],
            cost: self.cost.data().to_vec(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockFile {
                    m: b.rows(),
                    labels: b
                        .labels()
                        .iter()
                        .map(|&l| if l == UNCOVERED { -1 } else { l as i64 })
                        .collect(),
                })
                .collect(),
            rhs: self.rhs.clone(),
            upper: self.upper.as_ref().map(|u| {
                u.data()
                    .iter()
                    .map(|&v| {
                        if v == f64::INFINITY {
                            UpperEntry::Text("inf".to_string())
                        } else {
                            UpperEntry::Number(v)
                        }
                    })
                    .collect()
            }),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let dims = (file.dims[0], file.dims[1], file.dims[2]);
        let cost = Tensor3::new(dims, file.cost)?;
        let blocks = file
            .blocks
            .into_iter()
            .map(|b| {
                let labels = b
                    .labels
                    .iter()
                    .map(|&l| {
                        if l < 0 {
                            Ok(UNCOVERED)
                        } else if (l as usize) < b.m {
                            Ok(l as u32)
                        } else {
                            Err(Error::InstanceFormat(format!(
                                "label {l} out of range for m = {}",
                                b.m
                            )))
                        }
                    })
                    .collect::<Result<Vec<u32>>>()?;
                PartitionBlock::from_labels(dims, b.m, labels)
            })
            .collect::<Result<Vec<_>>>()?;
        let upper = file
            .upper
            .map(|entries| {
                let data = entries
                    .iter()
                    .map(|e| match e {
                        UpperEntry::Number(v) => Ok(*v),
                        UpperEntry::Text(s) if s == "inf" => Ok(f64::INFINITY),
                        UpperEntry::Text(s) => Err(Error::InstanceFormat(format!(
                            "unrecognized upper bound entry {s:?}"
                        ))),
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Tensor3::new(dims, data)
            })
            .transpose()?;
        Instance::new(cost, blocks, file.rhs, upper)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    dims: [usize; 3],
    cost: Vec<f64>,
    blocks: Vec<BlockFile>,
    rhs: Vec<Vec<f64>>,
    upper: Option<Vec<UpperEntry>>,
}

#[derive(Serialize, Deserialize)]
struct BlockFile {
    m: usize,
    labels: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum UpperEntry {
    Number(f64),
    Text(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_vec(n: usize, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        v
    }

    #[test]
    fn indicators_build_first_marginal_block() {
        let dims = (2, 2, 2);
        let ind = |j: usize| {
            let e = unit_vec(2, j);
            Tensor3::outer3(&e, &[1.0, 1.0], &[1.0, 1.0])
        };
        let block = PartitionBlock::from_indicators(&[ind(0), ind(1)]).unwrap();
        assert_eq!(block.rows(), 2);
        let expect = &cmot_marginal_blocks(dims)[0];
        assert_eq!(&block, expect);
        // round trip through indicator tensors
        let again = PartitionBlock::from_indicators(&block.indicator_tensors()).unwrap();
        assert_eq!(again, block);
    }

    #[test]
    fn overlapping_indicators_rejected() {
        let mut a = Tensor3::zeros((2, 2, 2));
        let mut b = Tensor3::zeros((2, 2, 2));
        a.data_mut()[0] = 1.0;
        a.data_mut()[3] = 1.0;
        b.data_mut()[0] = 1.0;
        assert!(matches!(
            PartitionBlock::from_indicators(&[a, b]),
            Err(Error::OverlappingIndicators { index: 0, .. })
        ));
    }

    #[test]
    fn non_binary_indicator_rejected() {
        let mut a = Tensor3::zeros((2, 2, 2));
        a.data_mut()[1] = 2.0;
        assert!(matches!(
            PartitionBlock::from_indicators(&[a]),
            Err(Error::NonBinaryIndicator { .. })
        ));
    }

    #[test]
    fn apply_first_marginal_uniform() {
        let dims = (2, 3, 4);
        let blocks = cmot_marginal_blocks(dims);
        let x = Tensor3::full(dims, 1.0 / 24.0);
        let out = blocks[0].apply(&x).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-15);
        assert!((out[1] - 0.5).abs() < 1e-15);
        assert_eq!(blocks[0].apply(&Tensor3::zeros(dims)).unwrap(), vec![0.0; 2]);
    }

    #[test]
    fn apply_tomo_horizontal_ones() {
        let block = tomo_block(3, (1, 0)).unwrap();
        assert_eq!(block.rows(), 3);
        let out = block.apply(&Tensor3::ones((3, 3, 1))).unwrap();
        assert_eq!(out, vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn adjoint_gathers_rows() {
        let blocks = cmot_marginal_blocks((2, 2, 1));
        let t = blocks[0].adjoint(&[1.0, 2.0]).unwrap();
        assert_eq!(t.data(), &[1.0, 1.0, 2.0, 2.0]);
        let z = blocks[0].adjoint(&[0.0, 0.0]).unwrap();
        assert_eq!(z, Tensor3::zeros((2, 2, 1)));
    }

    #[test]
    fn apply_after_adjoint_scales_by_row_counts() {
        // derived oracle: count labels per row, then compare
        let block = tomo_block(4, (1, 1)).unwrap();
        let y: Vec<f64> = (0..block.rows()).map(|j| 1.0 + j as f64).collect();
        let mut counts = vec![0.0; block.rows()];
        for &l in block.labels() {
            if l != UNCOVERED {
                counts[l as usize] += 1.0;
            }
        }
        let got = block.apply(&block.adjoint(&y).unwrap()).unwrap();
        for j in 0..block.rows() {
            assert!((got[j] - y[j] * counts[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn bullet_equals_adjoint_on_full_cover() {
        let blocks = cmot_marginal_blocks((3, 2, 2));
        let z = [0.5, 1.5, 2.5];
        assert_eq!(
            blocks[0].bullet(&z).unwrap(),
            blocks[0].adjoint(&z).unwrap()
        );
        let ones = vec![1.0; blocks[1].rows()];
        assert_eq!(blocks[1].bullet(&ones).unwrap(), Tensor3::ones((3, 2, 2)));
    }

    #[test]
    fn bullet_fills_ones_on_uncovered() {
        // a partial block: single row covering only entry 0
        let mut ind = Tensor3::zeros((2, 2, 1));
        ind.data_mut()[0] = 1.0;
        let block = PartitionBlock::from_indicators(&[ind]).unwrap();
        let t = block.bullet(&[5.0]).unwrap();
        assert_eq!(t.data(), &[5.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn marginal_blocks_shapes() {
        let blocks = cmot_marginal_blocks((2, 3, 4));
        assert_eq!(
            blocks.iter().map(|b| b.rows()).collect::<Vec<_>>(),
            vec![2, 3, 4]
        );
        assert_eq!(cmot_marginal_blocks((5, 5, 1)).len(), 2);
        for b in &blocks {
            assert!(b.is_fully_covering());
        }
    }

    #[test]
    fn marginalization_of_rank_one_tensor() {
        let a = [0.3, 0.7];
        let b = [0.2, 0.5, 0.3];
        let c = [0.9, 0.1];
        let x = Tensor3::outer3(&a, &b, &c);
        let blocks = cmot_marginal_blocks((2, 3, 2));
        let got = blocks[1].apply(&x).unwrap();
        for (g, want) in got.iter().zip(&b) {
            assert!((g - want).abs() < 1e-15);
        }
    }

    #[test]
    fn tomo_line_counts_match_enumeration() {
        // derived: enumerate invariants by brute force
        let count_lines = |n: usize, v: (i64, i64)| {
            let mut set = std::collections::BTreeSet::new();
            for r in 0..n {
                for s in 0..n {
                    set.insert(v.1 * (s as i64 + 1) - v.0 * (r as i64 + 1));
                }
            }
            set.len()
        };
        assert_eq!(tomo_block(3, (1, 1)).unwrap().rows(), count_lines(3, (1, 1)));
        assert_eq!(tomo_block(3, (1, 1)).unwrap().rows(), 5);
        let b = tomo_block(5, (2, 1)).unwrap();
        assert_eq!(b.rows(), count_lines(5, (2, 1)));
        assert_eq!(b.rows(), 13);
        assert!(b.is_fully_covering());
    }

    #[test]
    fn tomo_rejects_bad_directions() {
        assert!(matches!(
            tomo_block(3, (0, 0)),
            Err(Error::InvalidDirection(0, 0))
        ));
        assert!(matches!(
            tomo_block(3, (2, 3)),
            Err(Error::InvalidDirection(2, 3))
        ));
        assert!(matches!(
            tomo_block(3, (-1, 2)),
            Err(Error::InvalidDirection(-1, 2))
        ));
        assert!(tomo_block(3, (1, -2)).is_ok());
        assert!(tomo_block(3, (0, 1)).is_ok());
    }

    #[test]
    fn instance_rejects_nonpositive_rhs() {
        let dims = (2, 2, 1);
        let blocks = cmot_marginal_blocks(dims);
        let cost = Tensor3::zeros(dims);
        let err = Instance::new(
            cost,
            blocks,
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
            None,
        );
        assert!(matches!(
            err,
            Err(Error::NonpositiveRhs {
                block: 1,
                row: 1,
                ..
            })
        ));
    }

    #[test]
    fn instance_json_round_trip_with_infinite_upper() {
        let dims = (2, 2, 1);
        let blocks = cmot_marginal_blocks(dims);
        let cost = Tensor3::from_fn(dims, |r, s, _| (r + 2 * s) as f64);
        let mut upper = Tensor3::full(dims, 0.75);
        upper.data_mut()[2] = f64::INFINITY;
        let inst = Instance::new(
            cost,
            blocks,
            vec![vec![0.5, 0.5], vec![0.4, 0.6]],
            Some(upper),
        )
        .unwrap();
        let text = inst.to_json().unwrap();
        assert!(text.contains("\"inf\""));
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back.cost(), inst.cost());
        assert_eq!(back.blocks(), inst.blocks());
        assert_eq!(back.rhs(), inst.rhs());
        assert_eq!(back.upper(), inst.upper());
        assert!(back.is_marginal_structured());
    }
}
