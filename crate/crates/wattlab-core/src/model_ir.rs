//! Network architecture IR with exact FLOP/MAC accounting.
//!
//! A [`ModelSpec`] is an ordered list of blocks, each an ordered list of
//! [`LayerSpec`]s. The IR carries no weights and executes nothing; it exists
//! so that energy metrics can be driven by exact integer operation counts.
//!
//! Conventions: one multiply-accumulate is 2 FLOPs, and bias additions are
//! folded into the MAC count.

use std::collections::HashSet;
use std::fmt;

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("layer `{layer}`: field `{field}` must be a positive integer")]
    InvalidDimension { layer: String, field: &'static str },
    #[error("layer `{layer}` of kind `{kind}` has no MAC count")]
    NotAMacLayer { layer: String, kind: LayerKindTag },
    #[error("duplicate block id `{0}`")]
    DuplicateBlockId(String),
    #[error("duplicate layer id `{0}`")]
    DuplicateLayerId(String),
    #[error("model has {0} blocks; scaling requires at least 3")]
    TooFewBlocks(usize),
    #[error("scaling target {target} FLOPs exceeds model total {total}")]
    TargetAboveTotal { target: u64, total: u64 },
    #[error("scaling target {target} FLOPs is unreachable without zeroing a layer (best achievable {best})")]
    TargetUnreachable { target: u64, best: u64 },
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
    #[error("invalid model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Layer kind discriminant, mirroring the `kind` field of the JSON schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKindTag {
    Conv2d,
    Dense,
    Elementwise,
    Normalization,
}

impl fmt::Display for LayerKindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LayerKindTag::Conv2d => "conv2d",
            LayerKindTag::Dense => "dense",
            LayerKindTag::Elementwise => "elementwise",
            LayerKindTag::Normalization => "normalization",
        };
        f.write_str(s)
    }
}

/// Dimensions of a single layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d {
        kernel_h: u64,
        kernel_w: u64,
        channels_in: u64,
        channels_out: u64,
        out_h: u64,
        out_w: u64,
    },
    Dense {
        features_in: u64,
        features_out: u64,
    },
    Elementwise {
        element_count: u64,
    },
    Normalization {
        element_count: u64,
    },
}

impl LayerKind {
    pub fn tag(&self) -> LayerKindTag {
        match self {
            LayerKind::Conv2d { .. } => LayerKindTag::Conv2d,
            LayerKind::Dense { .. } => LayerKindTag::Dense,
            LayerKind::Elementwise { .. } => LayerKindTag::Elementwise,
            LayerKind::Normalization { .. } => LayerKindTag::Normalization,
        }
    }
}

/// One layer of a model: an id plus its dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub id: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn conv2d(
        id: impl Into<String>,
        kernel_h: u64,
        kernel_w: u64,
        channels_in: u64,
        channels_out: u64,
        out_h: u64,
        out_w: u64,
    ) -> Self {
        LayerSpec {
            id: id.into(),
            kind: LayerKind::Conv2d {
                kernel_h,
                kernel_w,
                channels_in,
                channels_out,
                out_h,
                out_w,
            },
        }
    }

    pub fn dense(id: impl Into<String>, features_in: u64, features_out: u64) -> Self {
        LayerSpec {
            id: id.into(),
            kind: LayerKind::Dense {
                features_in,
                features_out,
            },
        }
    }

    pub fn elementwise(id: impl Into<String>, element_count: u64) -> Self {
        LayerSpec {
            id: id.into(),
            kind: LayerKind::Elementwise { element_count },
        }
    }

    pub fn normalization(id: impl Into<String>, element_count: u64) -> Self {
        LayerSpec {
            id: id.into(),
            kind: LayerKind::Normalization { element_count },
        }
    }

    /// Input-feature count per output element: `d_0` of the dense-layer
    /// energy model, `kernel_h * kernel_w * channels_in` for convolutions.
    pub fn input_features(&self) -> Option<u64> {
        match self.kind {
            LayerKind::Conv2d {
                kernel_h,
                kernel_w,
                channels_in,
                ..
            } => Some(kernel_h * kernel_w * channels_in),
            LayerKind::Dense { features_in, .. } => Some(features_in),
            _ => None,
        }
    }
}

/// A named group of layers (a residual block in the canonical model).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub block_id: String,
    pub layers: Vec<LayerSpec>,
}

impl BlockSpec {
    pub fn new(block_id: impl Into<String>, layers: Vec<LayerSpec>) -> Self {
        BlockSpec {
            block_id: block_id.into(),
            layers,
        }
    }

    pub fn flops(&self) -> Result<u64, ModelError> {
        self.layers.iter().map(count_flops).sum()
    }
}

/// An ordered residual-block/layer description of a network, with the FLOP
/// total cached at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub name: String,
    pub blocks: Vec<BlockSpec>,
    total_flops: u64,
}

impl ModelSpec {
    /// Validates dimensions and id uniqueness, then caches the FLOP total.
    pub fn new(name: impl Into<String>, blocks: Vec<BlockSpec>) -> Result<Self, ModelError> {
        let mut block_ids = HashSet::new();
        let mut layer_ids = HashSet::new();
        let mut total = 0u64;
        for block in &blocks {
            if !block_ids.insert(block.block_id.clone()) {
                return Err(ModelError::DuplicateBlockId(block.block_id.clone()));
            }
            for layer in &block.layers {
                if !layer_ids.insert(layer.id.clone()) {
                    return Err(ModelError::DuplicateLayerId(layer.id.clone()));
                }
                total += count_flops(layer)?;
            }
        }
        Ok(ModelSpec {
            name: name.into(),
            blocks,
            total_flops: total,
        })
    }

    /// FLOPs for one forward pass, equal to the sum over all layers.
    pub fn total_flops(&self) -> u64 {
        self.total_flops
    }

    pub fn layers(&self) -> impl Iterator<Item = (&BlockSpec, &LayerSpec)> {
        self.blocks
            .iter()
            .flat_map(|b| b.layers.iter().map(move |l| (b, l)))
    }

    pub fn layer_count(&self) -> usize {
        self.blocks.iter().map(|b| b.layers.len()).sum()
    }
}

/// Exact FLOP count of one layer.
///
/// conv2d: `2 * kh * kw * c_in * c_out * out_h * out_w`; dense:
/// `2 * f_in * f_out`; elementwise: one FLOP per element; normalization:
/// two FLOPs per element (scale and shift).
pub fn count_flops(layer: &LayerSpec) -> Result<u64, ModelError> {
    let invalid = |field: &'static str| ModelError::InvalidDimension {
        layer: layer.id.clone(),
        field,
    };
    let check = |v: u64, field: &'static str| if v == 0 { Err(invalid(field)) } else { Ok(v) };
    match layer.kind {
        LayerKind::Conv2d {
            kernel_h,
            kernel_w,
            channels_in,
            channels_out,
            out_h,
            out_w,
        } => {
            let f = 2 * check(kernel_h, "kernel_h")?
                * check(kernel_w, "kernel_w")?
                * check(channels_in, "channels_in")?
                * check(channels_out, "channels_out")?
                * check(out_h, "out_h")?
                * check(out_w, "out_w")?;
            Ok(f)
        }
        LayerKind::Dense {
            features_in,
            features_out,
        } => Ok(2 * check(features_in, "features_in")? * check(features_out, "features_out")?),
        LayerKind::Elementwise { element_count } => check(element_count, "element_count"),
        LayerKind::Normalization { element_count } => {
            Ok(2 * check(element_count, "element_count")?)
        }
    }
}

/// MAC count of a conv2d or dense layer: exactly `count_flops / 2`.
pub fn count_macs(layer: &LayerSpec) -> Result<u64, ModelError> {
    match layer.kind {
        LayerKind::Conv2d { .. } | LayerKind::Dense { .. } => Ok(count_flops(layer)? / 2),
        _ => Err(ModelError::NotAMacLayer {
            layer: layer.id.clone(),
            kind: layer.kind.tag(),
        }),
    }
}

/// Shrink the central blocks of a model until its FLOP total is within 5%
/// of `target_flops`.
///
/// The first and last blocks are never touched. Width fields (channels,
/// features, element counts) of a central block are scaled by a common
/// factor and rounded to the nearest integer, never below 1. Blocks are
/// consumed greedily from the most central outward: each block is floored
/// before the next one is considered, and the last block visited is
/// bisected onto the target.
pub fn scale_model(spec: &ModelSpec, target_flops: u64) -> Result<ModelSpec, ModelError> {
    let total = spec.total_flops();
    if spec.blocks.len() < 3 {
        return Err(ModelError::TooFewBlocks(spec.blocks.len()));
    }
    if target_flops > total {
        return Err(ModelError::TargetAboveTotal {
            target: target_flops,
            total,
        });
    }
    if target_flops == total {
        return Ok(spec.clone());
    }

    let n = spec.blocks.len();
    let mut order: Vec<usize> = (1..n - 1).collect();
    let center = (n as f64 - 1.0) / 2.0;
    order.sort_by(|&a, &b| {
        let da = (a as f64 - center).abs();
        let db = (b as f64 - center).abs();
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });

    let target = target_flops as f64;
    let tolerance = 0.05 * target;
    let mut blocks = spec.blocks.clone();

    for &idx in &order {
        let original = &spec.blocks[idx];
        let rest: u64 = blocks
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, b)| b.flops())
            .sum::<Result<u64, _>>()?;
        let floor_flops = scaled_block(original, 0.0).flops()? as f64;
        if rest as f64 + floor_flops > target + tolerance {
            // Even at width 1 this block leaves us over target; floor it
            // and keep shrinking the next-most-central block.
            blocks[idx] = scaled_block(original, 0.0);
            continue;
        }
        // The target is reachable inside this block: bisect the factor.
        let want = target - rest as f64;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if scaled_block(original, mid).flops()? as f64 > want {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let low = scaled_block(original, lo);
        let high = scaled_block(original, hi);
        let pick = if (low.flops()? as f64 - want).abs() <= (high.flops()? as f64 - want).abs() {
            low
        } else {
            high
        };
        blocks[idx] = pick;
        break;
    }

    let scaled = ModelSpec::new(spec.name.clone(), blocks)?;
    let achieved = scaled.total_flops() as f64;
    if (achieved - target).abs() > tolerance {
        return Err(ModelError::TargetUnreachable {
            target: target_flops,
            best: scaled.total_flops(),
        });
    }
    Ok(scaled)
}

fn scale_width(w: u64, factor: f64) -> u64 {
    ((w as f64 * factor).round() as u64).max(1)
}

fn scaled_block(block: &BlockSpec, factor: f64) -> BlockSpec {
    let layers = block
        .layers
        .iter()
        .map(|l| {
            let kind = match l.kind {
                LayerKind::Conv2d {
                    kernel_h,
                    kernel_w,
                    channels_in,
                    channels_out,
                    out_h,
                    out_w,
                } => LayerKind::Conv2d {
                    kernel_h,
                    kernel_w,
                    channels_in: scale_width(channels_in, factor),
                    channels_out: scale_width(channels_out, factor),
                    out_h,
                    out_w,
                },
                LayerKind::Dense {
                    features_in,
                    features_out,
                } => LayerKind::Dense {
                    features_in: scale_width(features_in, factor),
                    features_out: scale_width(features_out, factor),
                },
                LayerKind::Elementwise { element_count } => LayerKind::Elementwise {
                    element_count: scale_width(element_count, factor),
                },
                LayerKind::Normalization { element_count } => LayerKind::Normalization {
                    element_count: scale_width(element_count, factor),
                },
            };
            LayerSpec {
                id: l.id.clone(),
                kind,
            }
        })
        .collect();
    BlockSpec {
        block_id: block.block_id.clone(),
        layers,
    }
}

// ---------------------------------------------------------------------------
// JSON model files
//
// Schema: {"name": ..., "blocks": [{"block_id": ..., "layers": [{"id": ...,
// "kind": "conv2d", ...dims}]}]}. Unknown fields are rejected, so the parse
// is written by hand over serde_json values rather than derived (derive
// cannot enforce that across an internally tagged enum).
// ---------------------------------------------------------------------------

/// Parse a model-spec JSON document.
pub fn parse_model(json: &str) -> Result<ModelSpec, ModelError> {
    let value: Value = serde_json::from_str(json)?;
    let root = expect_object(&value, "model")?;
    reject_unknown(root, &["name", "blocks"], "model")?;
    let name = expect_str(root, "name", "model")?;
    let blocks_value = root
        .get("blocks")
        .ok_or_else(|| parse_err("model", "missing field `blocks`"))?;
    let blocks_arr = blocks_value
        .as_array()
        .ok_or_else(|| parse_err("model", "`blocks` must be an array"))?;

    let mut blocks = Vec::with_capacity(blocks_arr.len());
    for (i, bv) in blocks_arr.iter().enumerate() {
        let ctx = format!("blocks[{i}]");
        let bo = expect_object(bv, &ctx)?;
        reject_unknown(bo, &["block_id", "layers"], &ctx)?;
        let block_id = expect_str(bo, "block_id", &ctx)?;
        let layers_arr = bo
            .get("layers")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err(&ctx, "missing array field `layers`"))?;
        let mut layers = Vec::with_capacity(layers_arr.len());
        for (j, lv) in layers_arr.iter().enumerate() {
            let lctx = format!("{ctx}.layers[{j}]");
            layers.push(parse_layer(lv, &lctx)?);
        }
        blocks.push(BlockSpec::new(block_id, layers));
    }
    ModelSpec::new(name, blocks)
}

pub fn load_model(path: &std::path::Path) -> Result<ModelSpec, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_model(&text)
}

/// Serialize a model to the documented JSON schema.
pub fn model_to_json(spec: &ModelSpec) -> Value {
    let blocks: Vec<Value> = spec
        .blocks
        .iter()
        .map(|b| {
            let layers: Vec<Value> = b.layers.iter().map(layer_to_json).collect();
            serde_json::json!({ "block_id": b.block_id, "layers": layers })
        })
        .collect();
    serde_json::json!({ "name": spec.name, "blocks": blocks })
}

fn layer_to_json(layer: &LayerSpec) -> Value {
    match layer.kind {
        LayerKind::Conv2d {
            kernel_h,
            kernel_w,
            channels_in,
            channels_out,
            out_h,
            out_w,
        } => serde_json::json!({
            "id": layer.id, "kind": "conv2d",
            "kernel_h": kernel_h, "kernel_w": kernel_w,
            "channels_in": channels_in, "channels_out": channels_out,
            "out_h": out_h, "out_w": out_w,
        }),
        LayerKind::Dense {
            features_in,
            features_out,
        } => serde_json::json!({
            "id": layer.id, "kind": "dense",
            "features_in": features_in, "features_out": features_out,
        }),
        LayerKind::Elementwise { element_count } => serde_json::json!({
            "id": layer.id, "kind": "elementwise", "element_count": element_count,
        }),
        LayerKind::Normalization { element_count } => serde_json::json!({
            "id": layer.id, "kind": "normalization", "element_count": element_count,
        }),
    }
}

fn parse_layer(value: &Value, ctx: &str) -> Result<LayerSpec, ModelError> {
    let obj = expect_object(value, ctx)?;
    let id = expect_str(obj, "id", ctx)?;
    let kind = expect_str(obj, "kind", ctx)?;
    let dim = |field: &str| -> Result<u64, ModelError> {
        obj.get(field)
            .and_then(Value::as_u64)
            .ok_or_else(|| parse_err(ctx, &format!("missing or non-integer field `{field}`")))
    };
    let kind = match kind.as_str() {
        "conv2d" => {
            reject_unknown(
                obj,
                &["id", "kind", "kernel_h", "kernel_w", "channels_in", "channels_out", "out_h", "out_w"],
                ctx,
            )?;
            LayerKind::Conv2d {
                kernel_h: dim("kernel_h")?,
                kernel_w: dim("kernel_w")?,
                channels_in: dim("channels_in")?,
                channels_out: dim("channels_out")?,
                out_h: dim("out_h")?,
                out_w: dim("out_w")?,
            }
        }
        "dense" => {
            reject_unknown(obj, &["id", "kind", "features_in", "features_out"], ctx)?;
            LayerKind::Dense {
                features_in: dim("features_in")?,
                features_out: dim("features_out")?,
            }
        }
        "elementwise" => {
            reject_unknown(obj, &["id", "kind", "element_count"], ctx)?;
            LayerKind::Elementwise {
                element_count: dim("element_count")?,
            }
        }
        "normalization" => {
            reject_unknown(obj, &["id", "kind", "element_count"], ctx)?;
            LayerKind::Normalization {
                element_count: dim("element_count")?,
            }
        }
        other => {
            return Err(parse_err(ctx, &format!("unknown layer kind `{other}`")));
        }
    };
    Ok(LayerSpec { id, kind })
}

fn parse_err(context: &str, message: &str) -> ModelError {
    ModelError::Parse {
        context: context.to_string(),
        message: message.to_string(),
    }
}

fn expect_object<'a>(value: &'a Value, ctx: &str) -> Result<&'a Map<String, Value>, ModelError> {
    value
        .as_object()
        .ok_or_else(|| parse_err(ctx, "expected a JSON object"))
}

fn expect_str(obj: &Map<String, Value>, field: &str, ctx: &str) -> Result<String, ModelError> {
    obj.get(field)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| parse_err(ctx, &format!("missing string field `{field}`")))
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], ctx: &str) -> Result<(), ModelError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(parse_err(ctx, &format!("unknown field `{key}`")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv_example() -> LayerSpec {
        LayerSpec::conv2d("c", 3, 3, 16, 32, 8, 8)
    }

    #[test]
    fn dense_flops() {
        let l = LayerSpec::dense("d", 1, 1);
        assert_eq!(count_flops(&l).unwrap(), 2);
        let l = LayerSpec::dense("d", 100, 10);
        assert_eq!(count_flops(&l).unwrap(), 2000);
    }

    #[test]
    fn conv_flops_closed_form() {
        // 2 * 3 * 3 * 16 * 32 * 8 * 8
        assert_eq!(count_flops(&conv_example()).unwrap(), 589_824);
    }

    #[test]
    fn elementwise_and_normalization_flops() {
        assert_eq!(
            count_flops(&LayerSpec::elementwise("e", 100)).unwrap(),
            100
        );
        assert_eq!(
            count_flops(&LayerSpec::normalization("n", 100)).unwrap(),
            200
        );
    }

    #[test]
    fn zero_dimension_rejected() {
        let l = LayerSpec::dense("d", 0, 5);
        assert!(matches!(
            count_flops(&l),
            Err(ModelError::InvalidDimension { .. })
        ));
    }

    #[test]
    fn macs_are_half_flops() {
        assert_eq!(count_macs(&conv_example()).unwrap(), 294_912);
        let d = LayerSpec::dense("d", 100, 10); // 2000 FLOPs
        assert_eq!(count_macs(&d).unwrap(), 1000);
        assert_eq!(count_macs(&LayerSpec::dense("d1", 1, 1)).unwrap(), 1);
    }

    #[test]
    fn mac_of_elementwise_is_an_error() {
        let l = LayerSpec::elementwise("e", 4);
        assert!(matches!(count_macs(&l), Err(ModelError::NotAMacLayer { .. })));
    }

    #[test]
    fn total_flops_is_layer_sum() {
        let spec = four_block_model();
        let by_hand: u64 = spec
            .layers()
            .map(|(_, l)| count_flops(l).unwrap())
            .sum();
        assert_eq!(spec.total_flops(), by_hand);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let blocks = vec![
            BlockSpec::new("a", vec![LayerSpec::dense("x", 2, 2)]),
            BlockSpec::new("a", vec![LayerSpec::dense("y", 2, 2)]),
        ];
        assert!(matches!(
            ModelSpec::new("m", blocks),
            Err(ModelError::DuplicateBlockId(_))
        ));
        let blocks = vec![
            BlockSpec::new("a", vec![LayerSpec::dense("x", 2, 2)]),
            BlockSpec::new("b", vec![LayerSpec::dense("x", 2, 2)]),
        ];
        assert!(matches!(
            ModelSpec::new("m", blocks),
            Err(ModelError::DuplicateLayerId(_))
        ));
    }

    fn four_block_model() -> ModelSpec {
        let block = |i: usize, ch: u64| {
            BlockSpec::new(
                format!("b{i}"),
                vec![
                    LayerSpec::conv2d(format!("b{i}_conv_a"), 3, 3, ch, ch, 8, 8),
                    LayerSpec::conv2d(format!("b{i}_conv_b"), 3, 3, ch, ch, 8, 8),
                    LayerSpec::elementwise(format!("b{i}_add"), ch * 64),
                ],
            )
        };
        ModelSpec::new(
            "four",
            vec![block(0, 16), block(1, 64), block(2, 64), block(3, 16)],
        )
        .unwrap()
    }

    #[test]
    fn scale_to_own_total_is_identity() {
        let spec = four_block_model();
        let scaled = scale_model(&spec, spec.total_flops()).unwrap();
        assert_eq!(scaled, spec);
    }

    #[test]
    fn scale_halves_central_width() {
        let spec = four_block_model();
        let outer: u64 = spec.blocks[0].flops().unwrap() + spec.blocks[3].flops().unwrap();
        let center: u64 = spec.total_flops() - outer;
        let target = outer + center / 2;
        let scaled = scale_model(&spec, target).unwrap();
        // Conservation: cached total equals recomputed layer sum.
        let recomputed: u64 = scaled
            .layers()
            .map(|(_, l)| count_flops(l).unwrap())
            .sum();
        assert_eq!(scaled.total_flops(), recomputed);
        let achieved = scaled.total_flops() as f64;
        assert!((achieved - target as f64).abs() <= 0.05 * target as f64);
        // Outer blocks untouched, block count and kinds preserved.
        assert_eq!(scaled.blocks[0], spec.blocks[0]);
        assert_eq!(scaled.blocks[3], spec.blocks[3]);
        assert_eq!(scaled.blocks.len(), spec.blocks.len());
        for (a, b) in scaled.layers().zip(spec.layers()) {
            assert_eq!(a.1.kind.tag(), b.1.kind.tag());
        }
    }

    #[test]
    fn scale_below_minimum_is_an_error() {
        let spec = four_block_model();
        // Below the untouched outer blocks even all-ones central blocks
        // cannot reach the target.
        let outer: u64 = spec.blocks[0].flops().unwrap() + spec.blocks[3].flops().unwrap();
        assert!(matches!(
            scale_model(&spec, outer / 2),
            Err(ModelError::TargetUnreachable { .. })
        ));
    }

    #[test]
    fn scale_prefers_central_blocks() {
        // Five blocks; a mild reduction should only touch the middle one.
        let block = |i: usize, ch: u64| {
            BlockSpec::new(
                format!("b{i}"),
                vec![LayerSpec::conv2d(format!("b{i}_c"), 3, 3, ch, ch, 8, 8)],
            )
        };
        let spec = ModelSpec::new(
            "five",
            (0..5).map(|i| block(i, 32)).collect::<Vec<_>>(),
        )
        .unwrap();
        let target = spec.total_flops() - spec.blocks[2].flops().unwrap() / 2;
        let scaled = scale_model(&spec, target).unwrap();
        assert_eq!(scaled.blocks[1], spec.blocks[1]);
        assert_eq!(scaled.blocks[3], spec.blocks[3]);
        assert_ne!(scaled.blocks[2], spec.blocks[2]);
    }

    #[test]
    fn json_roundtrip_and_unknown_field_rejection() {
        let spec = four_block_model();
        let text = serde_json::to_string_pretty(&model_to_json(&spec)).unwrap();
        let back = parse_model(&text).unwrap();
        assert_eq!(back, spec);

        let bad = text.replace("\"kernel_h\"", "\"kernal_h\"");
        let err = parse_model(&bad).unwrap_err();
        assert!(err.to_string().contains("kernal_h"), "{err}");
    }

    #[test]
    fn json_rejects_unknown_top_level_field() {
        let err = parse_model(r#"{"name":"m","blocks":[],"extra":1}"#).unwrap_err();
        assert!(err.to_string().contains("extra"));
    }
}
