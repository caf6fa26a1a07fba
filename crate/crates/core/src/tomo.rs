//! Discrete tomography front end: build projection data from images,
//! assemble the reconstruction LP, solve it, score the result.
//!
//! Each direction contributes one constraint block whose rows are the
//! lattice lines of the grid. Lines with zero projected mass force their
//! pixels to zero, so those pixels are pinned by a presolve step and the
//! LP is posed over the surviving pixels only (the solver requires
//! strictly positive right-hand sides). A zero-mask records the pinned
//! pixels so the full image can be reassembled.

use crate::constraints::{tomo_block, Instance, PartitionBlock, UNCOVERED};
use crate::eppa::{solve_ieppa, EppaParams, SolveResult};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;
use serde::{Deserialize, Serialize};

/// Square nonnegative gray image, stored as an `(n, n, 1)` tensor with
/// values in `[0, 1]` after PGM ingestion.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    n: usize,
    pixels: Tensor3,
}

impl GrayImage {
    pub fn new(pixels: Tensor3) -> Result<Self> {
        let dims = pixels.dims();
        if dims.0 != dims.1 || dims.2 != 1 {
            return Err(Error::PgmFormat(format!(
                "image must be square with n3 = 1, got {dims:?}"
            )));
        }
        if let Some(index) = pixels.data().iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::EntropyDomain {
                what: "pixel",
                index,
                value: pixels.data()[index],
            });
        }
        Ok(Self { n: dims.0, pixels })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn pixels(&self) -> &Tensor3 {
        &self.pixels
    }

    /// Parses P2 (ASCII) or P5 (binary, 8-bit) PGM data; values are scaled
    /// by the declared maximum into `[0, 1]`.
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let magic = next_token(bytes, &mut cursor)
            .ok_or_else(|| Error::PgmFormat("missing magic number".into()))?;
        let binary = match magic.as_str() {
            "P2" => false,
            "P5" => true,
            other => {
                return Err(Error::PgmFormat(format!(
                    "unsupported magic {other:?}, expected P2 or P5"
                )))
            }
        };
        let mut header = [0usize; 3];
        for slot in header.iter_mut() {
            let tok = next_token(bytes, &mut cursor)
                .ok_or_else(|| Error::PgmFormat("truncated header".into()))?;
            *slot = tok
                .parse()
                .map_err(|_| Error::PgmFormat(format!("bad header token {tok:?}")))?;
        }
        let [width, height, maxval] = header;
        if width != height {
            return Err(Error::PgmFormat(format!(
                "image must be square, got {width}x{height}"
            )));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(Error::PgmFormat(format!("invalid maxval {maxval}")));
        }
        let count = width * height;
        let mut values = Vec::with_capacity(count);
        if binary {
            if maxval > 255 {
                return Err(Error::PgmFormat(
                    "16-bit binary PGM is not supported".into(),
                ));
            }
            // single whitespace byte separates header from raster
            cursor += 1;
            if bytes.len() < cursor + count {
                return Err(Error::PgmFormat("truncated raster".into()));
            }
            for &b in &bytes[cursor..cursor + count] {
                values.push(b as f64 / maxval as f64);
            }
        } else {
            for _ in 0..count {
                let tok = next_token(bytes, &mut cursor)
                    .ok_or_else(|| Error::PgmFormat("truncated raster".into()))?;
                let v: u32 = tok
                    .parse()
                    .map_err(|_| Error::PgmFormat(format!("bad pixel {tok:?}")))?;
                values.push(v as f64 / maxval as f64);
            }
        }
        GrayImage::new(Tensor3::new((width, width, 1), values)?)
    }

    /// Serializes as ASCII P2 with maxval 255, clamping to `[0, 1]`.
    pub fn to_pgm_string(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.n, self.n);
        for r in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|s| {
                    let v = self.pixels[(r, s, 0)].clamp(0.0, 1.0);
                    format!("{}", (v * 255.0).round() as u32)
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn next_token(bytes: &[u8], cursor: &mut usize) -> Option<String> {
    let mut i = *cursor;
    loop {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        break;
    }
    if i >= bytes.len() {
        return None;
    }
    let start = i;
    while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    *cursor = i;
    Some(String::from_utf8_lossy(&bytes[start..i]).into_owned())
}

/// An ordered set of pairwise non-parallel projection directions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectionSet {
    dirs: Vec<(i64, i64)>,
}

impl DirectionSet {
    pub fn new(dirs: Vec<(i64, i64)>) -> Result<Self> {
        for (idx, &(v1, v2)) in dirs.iter().enumerate() {
            let admissible = v1 == 1 || (v1 >= 0 && (v2 == 1 || v2 == -1));
            if !admissible || (v1 == 0 && v2 == 0) {
                return Err(Error::InvalidDirection(v1, v2));
            }
            for &(w1, w2) in &dirs[..idx] {
                if v1 * w2 == v2 * w1 {
                    return Err(Error::DuplicateDirection(v1, v2));
                }
            }
        }
        Ok(Self { dirs })
    }

    /// The canonical enumeration: for `p = 0, 1, 2, ...` take the forms
    /// `(1, p)`, `(1, -p)`, `(p, 1)`, `(p, -1)` in that order, skipping
    /// directions parallel to an earlier one, until `count` are collected.
    pub fn canonical(count: usize) -> Self {
        let mut dirs: Vec<(i64, i64)> = Vec::with_capacity(count);
        let mut p: i64 = 0;
        while dirs.len() < count {
            for cand in [(1, p), (1, -p), (p, 1), (p, -1)] {
                if dirs.len() >= count {
                    break;
                }
                if dirs
                    .iter()
                    .all(|&(w1, w2)| cand.0 * w2 != cand.1 * w1)
                {
                    dirs.push(cand);
                }
            }
            p += 1;
        }
        Self { dirs }
    }

    /// Parses the CLI syntax `"v1,v2;v1,v2;..."`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dirs = Vec::new();
        for part in text.split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let mut it = part.split(',');
            let v1 = it
                .next()
                .and_then(|t| t.trim().parse::<i64>().ok())
                .ok_or_else(|| Error::InstanceFormat(format!("bad direction {part:?}")))?;
            let v2 = it
                .next()
                .and_then(|t| t.trim().parse::<i64>().ok())
                .ok_or_else(|| Error::InstanceFormat(format!("bad direction {part:?}")))?;
            if it.next().is_some() {
                return Err(Error::InstanceFormat(format!("bad direction {part:?}")));
            }
            dirs.push((v1, v2));
        }
        Self::new(dirs)
    }

    #[inline]
    pub fn dirs(&self) -> &[(i64, i64)] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Cost model for the reconstruction LP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TomoCost {
    /// `C(r, s) = |r - s|^2`, normalized by the maximal entry of the full
    /// cost matrix.
    SquaredIndexDistance,
}

/// Which pixels were pinned to zero by the presolve step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroMask {
    pub n: usize,
    pub pinned: Vec<bool>,
}

impl ZeroMask {
    pub fn kept(&self) -> usize {
        self.pinned.iter().filter(|&&p| !p).count()
    }
}

/// Builds the reconstruction LP from an image and a direction set.
///
/// Lines with zero projected mass pin their pixels; the instance is posed
/// over the `K` surviving pixels as a `(K, 1, 1)` tensor in ascending
/// flat order of the original grid.
pub fn project_image(
    img: &GrayImage,
    dirs: &DirectionSet,
    cost: TomoCost,
) -> Result<(Instance, ZeroMask)> {
    if dirs.is_empty() {
        return Err(Error::InstanceFormat("no projection directions".into()));
    }
    if img.pixels().data().iter().all(|&v| v == 0.0) {
        return Err(Error::AllZeroImage);
    }
    let n = img.n();
    let full: Vec<(PartitionBlock, Vec<f64>)> = dirs
        .dirs()
        .iter()
        .map(|&v| {
            let block = tomo_block(n, v)?;
            let sums = block.apply(img.pixels())?;
            Ok((block, sums))
        })
        .collect::<Result<_>>()?;

    let mut pinned = vec![false; n * n];
    for (block, sums) in &full {
        for (e, &l) in block.labels().iter().enumerate() {
            if sums[l as usize] == 0.0 {
                pinned[e] = true;
            }
        }
    }
    let kept_idx: Vec<usize> = (0..n * n).filter(|&e| !pinned[e]).collect();
    let kept = kept_idx.len();
    let dims = (kept, 1, 1);

    let mut blocks = Vec::with_capacity(full.len());
    let mut rhs = Vec::with_capacity(full.len());
    for (block, sums) in &full {
        // renumber surviving rows by ascending original row index
        let mut new_row = vec![UNCOVERED; block.rows()];
        let mut next = 0u32;
        let mut b = Vec::new();
        for (j, &s) in sums.iter().enumerate() {
            if s > 0.0 {
                new_row[j] = next;
                b.push(s);
                next += 1;
            }
        }
        let labels: Vec<u32> = kept_idx
            .iter()
            .map(|&e| new_row[block.labels()[e] as usize])
            .collect();
        blocks.push(PartitionBlock::from_labels(dims, next as usize, labels)?);
        rhs.push(b);
    }

    let TomoCost::SquaredIndexDistance = cost;
    let norm = if n > 1 { ((n - 1) * (n - 1)) as f64 } else { 1.0 };
    let cost_data: Vec<f64> = kept_idx
        .iter()
        .map(|&e| {
            let r = e / n;
            let s = e % n;
            let d = r as f64 - s as f64;
            d * d / norm
        })
        .collect();
    let inst = Instance::new(Tensor3::new(dims, cost_data)?, blocks, rhs, None)?;
    Ok((inst, ZeroMask { n, pinned }))
}

/// Solves the masked reconstruction LP and reassembles the full image.
pub fn reconstruct(
    inst: &Instance,
    params: &EppaParams,
    mask: &ZeroMask,
) -> Result<(GrayImage, SolveResult)> {
    if inst.dims() != (mask.kept(), 1, 1) {
        return Err(Error::InstanceFormat(format!(
            "instance dims {:?} do not match mask with {} kept pixels",
            inst.dims(),
            mask.kept()
        )));
    }
    let out = solve_ieppa(inst, params)?;
    let mut data = vec![0.0; mask.n * mask.n];
    let mut cursor = 0usize;
    for (e, &p) in mask.pinned.iter().enumerate() {
        if !p {
            data[e] = out.x.data()[cursor];
            cursor += 1;
        }
    }
    let img = GrayImage::new(Tensor3::new((mask.n, mask.n, 1), data)?)?;
    Ok((img, out))
}

/// Peak signal-to-noise ratio in dB:
/// `10 log10(n^2 max(truth)^2 / ||recon - truth||_F^2)`, `+inf` on an
/// exact match.
pub fn psnr(recon: &GrayImage, truth: &GrayImage) -> Result<f64> {
    if recon.n() != truth.n() {
        return Err(Error::DimMismatch {
            left: recon.pixels().dims(),
            right: truth.pixels().dims(),
        });
    }
    let peak = truth.pixels().max_entry();
    if peak <= 0.0 {
        return Err(Error::AllZeroImage);
    }
    let err = recon.pixels().sub(truth.pixels())?.norm_fro();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n2 = (truth.n() * truth.n()) as f64;
    Ok(10.0 * (n2 * peak * peak / (err * err)).log10())
}
