//! Extended SMOTE over the whole feature space: every source row moves
//! toward its single nearest neighbour by a Beta(α, α) weight, and the
//! decoded result is repaired back onto the schema.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use crate::rng::{self, stream};
use crate::schema::{
    argmax_lowest, CrossRule, EncodeOptions, EncodingCodec, Portfolio, RawRecord, RawValue, Schema,
    VariableKind,
};
use crate::{Error, Result};

pub const DEFAULT_U_SHAPE_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteConfig {
    pub u_shape_alpha: f64,
    pub n_output: usize,
    pub seed: u64,
    /// Replaces every sampled weight; for tests.
    pub fixed_weight: Option<f64>,
    /// Keep the interpolated encoded rows (before decoding and repair).
    pub keep_encoded: bool,
}

impl SmoteConfig {
    pub fn new(n_output: usize, seed: u64) -> Self {
        Self {
            u_shape_alpha: DEFAULT_U_SHAPE_ALPHA,
            n_output,
            seed,
            fixed_weight: None,
            keep_encoded: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_shape_alpha > 0.0 && self.u_shape_alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "the U-shape needs 0 < alpha < 1, got {}",
                self.u_shape_alpha
            )));
        }
        if let Some(w) = self.fixed_weight {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidArgument(
                    "fixed weight must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

fn squared_distance_below(a: &[f64], b: &[f64], bound: f64) -> f64 {
    let mut d = 0.0;
    for (chunk_a, chunk_b) in a.chunks(8).zip(b.chunks(8)) {
        for (x, y) in chunk_a.iter().zip(chunk_b) {
            let t = x - y;
            d += t * t;
        }
        if d > bound {
            return d;
        }
    }
    d
}

/// Index of the row closest to row `i` (excluding `i`); ties go to the
/// smallest index.
pub fn nearest_neighbor(i: usize, x: ArrayView2<'_, f64>) -> Result<usize> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "nearest neighbours need at least 2 rows".into(),
        ));
    }
    if i >= n {
        return Err(Error::Dimension {
            expected: n,
            found: i,
        });
    }
    let row = |k: usize| {
        x.row(k)
            .to_slice()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| x.row(k).to_vec())
    };
    let xi = row(i);
    let mut best = usize::MAX;
    let mut best_d = f64::INFINITY;
    let contiguous = x.as_slice().is_some();
    let d = x.ncols();
    for j in 0..n {
        if j == i {
            continue;
        }
        let dist = if contiguous {
            let s = x.as_slice().expect("contiguous");
            squared_distance_below(&xi, &s[j * d..(j + 1) * d], best_d)
        } else {
            squared_distance_below(&xi, &row(j), best_d)
        };
        if dist < best_d || best == usize::MAX {
            best = j;
            best_d = dist;
        }
    }
    Ok(best)
}

/// Nearest neighbour of every row.
pub fn nearest_neighbors(x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if x.nrows() < 2 {
        return Err(Error::InvalidArgument(
            "nearest neighbours need at least 2 rows".into(),
        ));
    }
    let owned;
    let x = if x.is_standard_layout() {
        x
    } else {
        owned = x.as_standard_layout().into_owned();
        owned.view()
    };
    (0..x.nrows())
        .into_par_iter()
        .map(|i| nearest_neighbor(i, x))
        .collect()
}

/// One draw from Beta(α, α).
pub fn u_shape_sample<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    Beta::new(alpha, alpha).expect("positive alpha").sample(rng)
}

/// `x + w·(neighbor − x)`, clamped to the segment's coordinate range so
/// rounding cannot leave it.
pub fn interpolate(x: &[f64], neighbor: &[f64], w: f64) -> Vec<f64> {
    x.iter()
        .zip(neighbor)
        .map(|(&a, &b)| {
            if w == 0.0 {
                a
            } else if w == 1.0 {
                b
            } else {
                (a + w * (b - a)).clamp(a.min(b), a.max(b))
            }
        })
        .collect()
}

/// Maps a decoded record onto the schema: integers rounded half away from
/// zero, every numeric value clipped to its bounds, categories resolved by
/// their largest indicator, compositional groups closed by their last member
/// and renormalized, and `lesser < greater` rules repaired by lowering the
/// lesser side.
pub fn postprocess_row(raw: &RawRecord, schema: &Schema) -> Vec<f64> {
    let features = schema.features();
    let mut row: Vec<f64> = features
        .iter()
        .zip(&raw.values)
        .map(|(spec, v)| match v {
            RawValue::Numeric(x) => {
                let x = if matches!(spec.kind, VariableKind::Integer) {
                    x.round()
                } else {
                    *x
                };
                spec.bounds.clip(x)
            }
            RawValue::Indicators(ind) => argmax_lowest(ind) as f64,
            RawValue::Missing => 0.0,
        })
        .collect();
    for (_, members) in schema.group_indices() {
        let (last, rest) = members
            .split_last()
            .expect("groups have two or more members");
        let partial: f64 = rest.iter().map(|&i| row[i]).sum();
        row[*last] = (1.0 - partial).max(0.0);
        let total: f64 = members.iter().map(|&i| row[i]).sum();
        if total > 0.0 {
            for &i in &members {
                row[i] /= total;
            }
        } else {
            row[*last] = 1.0;
        }
    }
    for rule in schema.cross_rules() {
        if let CrossRule::LessThan { lesser, greater } = rule {
            let (Some(l), Some(g)) = (schema.index_of(lesser), schema.index_of(greater)) else {
                continue;
            };
            if l >= row.len() || g >= row.len() || row[l] < row[g] {
                continue;
            }
            let spec = &features[l];
            let step = if matches!(spec.kind, VariableKind::Integer) {
                1.0
            } else {
                0.0
            };
            let repaired = if step > 0.0 {
                row[g] - step
            } else {
                row[g] * (1.0 - 1e-12)
            };
            row[l] = spec.bounds.clip(repaired);
        }
    }
    row
}

/// The codec the SMOTE distance runs on: standardized, with each
/// composition's closing member left out.
pub fn smote_codec(real: &Portfolio) -> Result<EncodingCodec> {
    EncodingCodec::fit(
        real,
        &EncodeOptions {
            standardize: true,
            exclude: real.schema().closure_members(),
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborRecord {
    pub source: usize,
    pub neighbor: usize,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    /// Features-only synthetic portfolio.
    pub portfolio: Portfolio,
    /// Per output row.
    pub neighbors: Vec<NeighborRecord>,
    /// Interpolated encoded rows before decoding, when requested.
    pub encoded: Option<Array2<f64>>,
}

impl SmoteOutput {
    /// `output,source,neighbor,w` per generated row.
    pub fn neighbors_csv(&self) -> String {
        let mut out = String::from("output,source,neighbor,w\n");
        for (k, r) in self.neighbors.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{},{:?}", r.source, r.neighbor, r.weight);
        }
        out
    }
}

/// Source row of every output: whole cycles over the source, then a
/// seeded sample without replacement for the remainder.
pub fn source_rows(n_source: usize, n_output: usize, seed: u64) -> Vec<usize> {
    let cycles = n_output / n_source;
    let remainder = n_output % n_source;
    let mut rows: Vec<usize> = (0..cycles).flat_map(|_| 0..n_source).collect();
    if remainder > 0 {
        let mut r = rng::stream_rng(rng::derive_seed(seed, stream::SMOTE), u64::MAX);
        rows.extend(index::sample(&mut r, n_source, remainder));
    }
    rows
}

/// Fits [`smote_codec`] on `real` and generates.
pub fn generate_portfolio(real: &Portfolio, cfg: &SmoteConfig) -> Result<SmoteOutput> {
    let features = real.features_only();
    let codec = smote_codec(&features)?;
    generate_with_codec(real, &codec, cfg)
}

pub fn generate_with_codec(
    real: &Portfolio,
    codec: &EncodingCodec,
    cfg: &SmoteConfig,
) -> Result<SmoteOutput> {
    cfg.validate()?;
    let schema = real.schema().clone();
    codec.check_schema(&schema)?;
    if !real.is_validated() {
        let violations = real.violations()?;
        if !violations.is_empty() {
            return Err(Error::Validation { violations });
        }
    }
    let features = real.features_only();
    let n = features.n_rows();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "extended SMOTE needs at least 2 source rows".into(),
        ));
    }
    let x = codec.encode(&features)?;
    let nn = nearest_neighbors(x.view())?;
    let sources = source_rows(n, cfg.n_output, cfg.seed);
    let base = rng::derive_seed(cfg.seed, stream::SMOTE);
    let rows: Vec<(Vec<f64>, NeighborRecord, Option<Vec<f64>>)> = sources
        .par_iter()
        .enumerate()
        .map(|(k, &source)| {
            let weight = match cfg.fixed_weight {
                Some(w) => w,
                None => u_shape_sample(&mut rng::stream_rng(base, k as u64), cfg.u_shape_alpha),
            };
            let neighbor = nn[source];
            let xs = x.row(source);
            let xn = x.row(neighbor);
            let z = interpolate(
                xs.as_slice().expect("row-major"),
                xn.as_slice().expect("row-major"),
                weight,
            );
            let raw = codec.decode_row(&z)?;
            let row = postprocess_row(&raw, &schema);
            Ok((
                row,
                NeighborRecord {
                    source,
                    neighbor,
                    weight,
                },
                cfg.keep_encoded.then_some(z),
            ))
        })
        .collect::<Result<_>>()?;
    let width = codec.width();
    let mut data = Vec::with_capacity(rows.len() * schema.n_features());
    let mut neighbors = Vec::with_capacity(rows.len());
    let mut encoded = cfg
        .keep_encoded
        .then(|| Vec::with_capacity(rows.len() * width));
    for (row, rec, z) in rows {
        data.extend_from_slice(&row);
        neighbors.push(rec);
        if let (Some(e), Some(z)) = (encoded.as_mut(), z) {
            e.extend_from_slice(&z);
        }
    }
    let portfolio = if data.is_empty() {
        Portfolio::empty(schema, false)
    } else {
        Portfolio::new(schema, false, data)?
    };
    let encoded = encoded
        .map(|e| Array2::from_shape_vec((neighbors.len(), width), e).expect("consistent widths"));
    Ok(SmoteOutput {
        portfolio,
        neighbors,
        encoded,
    })
}
