//! Deterministic synthetic datasets shaped like real event-analysis files.
//!
//! Three presets cover the interesting structural range: a fully flat wide
//! table, a mid-size schema with jagged sub-collections, and a very wide
//! schema where an analysis touches under one percent of the fields. Entry
//! counts are scaled down by a factor of 100 from the originals so a full
//! generate-and-scan cycle stays in desk-scale seconds; `scaled` adjusts
//! further in either direction.
//!
//! Values are drawn per field from one of three distributions chosen round
//! robin: near-constant (compresses extremely well), low-cardinality (eight
//! distinct values), and uniform random (incompressible). Each field owns a
//! counter-based RNG stream seeded from (seed, field index), and collection
//! lengths come from per-group streams shared by every fourth field, the
//! way particle attributes share one multiplicity per event. Equal inputs
//! produce bytewise-equal files.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::api::{DatasetModel, DatasetWriter, WriteSummary, WriterOptions};
use crate::error::Result;
use crate::schema::{FieldDef, FieldKind, Schema};
use crate::storage::ContainerTarget;
use crate::value::Value;

/// Structural description of one synthetic sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleShape {
    pub name: String,
    /// Top-level fields in the schema.
    pub field_count: u32,
    /// Fields a benchmark analysis reads; see [`SampleShape::read_paths`].
    pub read_fields: u32,
    /// Mix jagged one-level collections in (every fourth field) or stay flat.
    pub collections: bool,
    pub entry_count: u64,
}

pub const PRESET_NAMES: [&str; 3] = ["lhcb-like", "h1-like", "cms-like"];

impl SampleShape {
    /// A named preset: `lhcb-like` (26 flat fields, 18 read), `h1-like`
    /// (152 fields with collections, 16 read), or `cms-like` (1479 fields
    /// with collections, 6 read).
    pub fn preset(name: &str) -> Result<SampleShape> {
        Ok(match name {
            "lhcb-like" => SampleShape {
                name: name.to_string(),
                field_count: 26,
                read_fields: 18,
                collections: false,
                entry_count: 85_000,
            },
            "h1-like" => SampleShape {
                name: name.to_string(),
                field_count: 152,
                read_fields: 16,
                collections: true,
                entry_count: 28_000,
            },
            "cms-like" => SampleShape {
                name: name.to_string(),
                field_count: 1479,
                read_fields: 6,
                collections: true,
                entry_count: 16_000,
            },
            other => {
                return Err(crate::error::Error::Usage(format!(
                    "unknown sample shape `{other}` (available: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        })
    }

    /// The same shape with the entry count multiplied by `scale`.
    pub fn scaled(mut self, scale: f64) -> SampleShape {
        self.entry_count = (self.entry_count as f64 * scale).round().max(0.0) as u64;
        self
    }

    /// True when top-level field `index` is a jagged collection.
    fn is_collection(&self, index: u32) -> bool {
        self.collections && index % 4 == 3
    }

    /// True when top-level field `index` is a low-cardinality string.
    fn is_string(&self, index: u32) -> bool {
        self.collections && !self.is_collection(index) && index % 29 == 11
    }

    /// The schema this shape generates: field `i` is named `f{i:04}`.
    pub fn schema(&self) -> Arc<Schema> {
        let fields = (0..self.field_count)
            .map(|i| {
                let name = field_name(i);
                if self.is_collection(i) {
                    FieldDef::collection(name, leaf_def(String::new(), i))
                } else if self.is_string(i) {
                    FieldDef::string(name)
                } else {
                    leaf_def(name, i)
                }
            })
            .collect();
        Schema::from_fields(fields).expect("generated shapes are valid schemas")
    }

    /// The fields the sample's analysis reads: `read_fields` names spread
    /// evenly across the schema.
    pub fn read_paths(&self) -> Vec<String> {
        let step = (self.field_count / self.read_fields.max(1)).max(1);
        (0..self.read_fields)
            .map(|k| field_name((k * step) % self.field_count))
            .collect()
    }
}

fn field_name(index: u32) -> String {
    format!("f{index:04}")
}

/// Leaf type palette, cycled by field index.
fn leaf_def(name: String, index: u32) -> FieldDef {
    match index % 8 {
        0 => FieldDef::float32(name),
        1 => FieldDef::float64(name),
        2 => FieldDef::int32(name),
        3 => FieldDef::int64(name),
        4 => FieldDef::uint32(name),
        5 => FieldDef::bool_(name),
        6 => FieldDef::int16(name),
        _ => FieldDef::uint64(name),
    }
}

/// How one field's values are distributed across entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Distribution {
    NearConstant,
    LowCardinality,
    Uniform,
}

fn distribution(index: u32) -> Distribution {
    match index % 3 {
        0 => Distribution::NearConstant,
        1 => Distribution::LowCardinality,
        _ => Distribution::Uniform,
    }
}

const VOCAB: [&str; 8] = [
    "pion", "kaon", "muon", "electron", "proton", "photon", "neutron", "tau",
];

/// Splittable per-field stream: independent of every other field's draws.
fn field_rng(seed: u64, index: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1)))
}

fn leaf_value(kind: FieldKind, dist: Distribution, rng: &mut ChaCha8Rng) -> Value {
    let pick: u64 = match dist {
        Distribution::NearConstant => {
            if rng.random_ratio(1, 256) {
                rng.random_range(1..=3u64)
            } else {
                0
            }
        }
        Distribution::LowCardinality => rng.random_range(0..8u64),
        Distribution::Uniform => rng.random(),
    };
    match kind {
        FieldKind::LeafBool => Value::Bool(pick & 1 != 0),
        FieldKind::LeafInt { width: 2, signed: true } => Value::I16(pick as i16),
        FieldKind::LeafInt { width: 4, signed: true } => Value::I32(pick as i32),
        FieldKind::LeafInt { width: 8, signed: true } => Value::I64(pick as i64),
        FieldKind::LeafInt { width: 4, signed: false } => Value::U32(pick as u32),
        FieldKind::LeafInt { width: 8, signed: false } => Value::U64(pick),
        FieldKind::LeafFloat { width: 4 } => match dist {
            Distribution::Uniform => Value::F32(rng.random::<f32>() * 100.0),
            _ => Value::F32(pick as f32 * 0.25 + 1.0),
        },
        FieldKind::LeafFloat { width: 8 } => match dist {
            Distribution::Uniform => Value::F64(rng.random::<f64>() * 100.0),
            _ => Value::F64(pick as f64 * 0.25 + 1.0),
        },
        other => unreachable!("generator palette holds no {other:?}"),
    }
}

/// Writes one synthetic dataset. Bytewise reproducible for fixed
/// (shape, seed, options).
pub fn generate(
    shape: &SampleShape,
    seed: u64,
    target: &ContainerTarget,
    options: WriterOptions,
) -> Result<WriteSummary> {
    let schema = shape.schema();
    let mut writer = DatasetWriter::create(target, &shape.name, Arc::clone(&schema), options)?;
    let model = DatasetModel::from_schema(Arc::clone(&schema));
    let mut entry = model.create_entry();

    let top: Vec<_> = schema.root().children.clone();
    let mut rngs: Vec<ChaCha8Rng> =
        (0..shape.field_count).map(|i| field_rng(seed, i)).collect();
    // Collection multiplicities: every fourth collection shares one stream,
    // so related collections stay the same length within an entry.
    let mut group_rngs: Vec<ChaCha8Rng> =
        (0..4).map(|g| field_rng(seed ^ 0x6702_9E3D, g)).collect();

    for _ in 0..shape.entry_count {
        let mut group_len = [0usize; 4];
        for (g, rng) in group_rngs.iter_mut().enumerate() {
            group_len[g] = rng.random_range(0..=12);
        }
        for (slot, &field) in top.iter().enumerate() {
            let index = slot as u32;
            let dist = distribution(index);
            let rng = &mut rngs[slot];
            let descriptor = schema.field(field);
            entry.values_mut()[slot] = match descriptor.kind {
                FieldKind::Collection => {
                    let item = schema.field(descriptor.children[0]).kind;
                    let len = group_len[(index as usize / 4) % 4];
                    Value::List((0..len).map(|_| leaf_value(item, dist, rng)).collect())
                }
                FieldKind::String => {
                    Value::Str(VOCAB[rng.random_range(0..VOCAB.len())].to_string())
                }
                kind => leaf_value(kind, dist, rng),
            };
        }
        writer.fill(&entry)?;
    }
    writer.commit()
}
