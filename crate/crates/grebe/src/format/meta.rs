//! Header and footer records.
//!
//! The header carries the dataset name and the full field tree plus the
//! column plan; the footer carries cluster metadata: entry ranges and page
//! locators. Both are length-prefixed and version-tagged, and both reject
//! trailing bytes, unknown tags, and counts that exceed the buffer.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::format::{
    push_string, ByteRange, Cursor, PhysicalType, BYTE_RANGE_LEN, ENVELOPE_LEN, FORMAT_VERSION,
};
use crate::schema::{
    ColumnDescriptor, ColumnRole, FieldDescriptor, FieldKind, Schema, NO_PARENT,
};

/// Highest codec id a v1 file may reference.
pub const MAX_CODEC_ID: u8 = 4;

const KIND_RECORD: u8 = 0;
const KIND_COLLECTION: u8 = 1;
const KIND_BOOL: u8 = 2;
const KIND_INT: u8 = 3;
const KIND_FLOAT: u8 = 4;
const KIND_STRING: u8 = 5;
const KIND_ARRAY: u8 = 6;
const KIND_VARIANT: u8 = 7;

/// One page on disk: where it lives and how many elements it holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageLocator {
    pub range: ByteRange,
    pub elements: u32,
}

/// All pages of one column within one cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnPages {
    pub column_id: u32,
    pub elements: u64,
    pub pages: Vec<PageLocator>,
}

impl ColumnPages {
    /// Pages paired with the cluster-local index of their first element.
    pub fn runs(&self) -> impl Iterator<Item = (u64, &PageLocator)> {
        self.pages.iter().scan(0u64, |first, page| {
            let at = *first;
            *first += page.elements as u64;
            Some((at, page))
        })
    }

    /// The page covering cluster-local `element`, with its first element.
    pub fn page_covering(&self, element: u64) -> Option<(u64, &PageLocator)> {
        self.runs()
            .take_while(|(first, _)| *first <= element)
            .last()
            .filter(|(first, page)| element < first + page.elements as u64)
    }
}

/// One cluster: a self-contained entry range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterDescriptor {
    pub first_entry: u64,
    pub entries: u64,
    pub columns: Vec<ColumnPages>,
}

impl ClusterDescriptor {
    /// Column ids are stored sorted, so lookup is a binary search.
    pub fn column(&self, id: u32) -> Option<&ColumnPages> {
        self.columns
            .binary_search_by_key(&id, |c| c.column_id)
            .ok()
            .map(|i| &self.columns[i])
    }
}

#[derive(Debug, Clone)]
pub struct Header {
    pub dataset_name: String,
    pub schema: Arc<Schema>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footer {
    pub total_entries: u64,
    pub clusters: Vec<ClusterDescriptor>,
}

pub fn serialize_header(header: &Header) -> Vec<u8> {
    let mut payload = Vec::new();
    payload.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    push_string(&mut payload, &header.dataset_name);

    let fields = header.schema.fields();
    payload.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    for f in fields {
        payload.extend_from_slice(&f.field_id.to_le_bytes());
        payload.extend_from_slice(&f.parent_id.unwrap_or(NO_PARENT).to_le_bytes());
        match f.kind {
            FieldKind::Record => payload.push(KIND_RECORD),
            FieldKind::Collection => payload.push(KIND_COLLECTION),
            FieldKind::LeafBool => payload.push(KIND_BOOL),
            FieldKind::LeafInt { width, signed } => {
                payload.push(KIND_INT);
                payload.push(width);
                payload.push(signed as u8);
            }
            FieldKind::LeafFloat { width } => {
                payload.push(KIND_FLOAT);
                payload.push(width);
            }
            FieldKind::String => payload.push(KIND_STRING),
            FieldKind::FixedArray { len } => {
                payload.push(KIND_ARRAY);
                payload.extend_from_slice(&len.to_le_bytes());
            }
            FieldKind::Variant => payload.push(KIND_VARIANT),
        }
        push_string(&mut payload, &f.name);
        payload.extend_from_slice(&(f.children.len() as u32).to_le_bytes());
        for &c in &f.children {
            payload.extend_from_slice(&c.to_le_bytes());
        }
    }

    let columns = header.schema.columns();
    payload.extend_from_slice(&(columns.len() as u32).to_le_bytes());
    for c in columns {
        payload.extend_from_slice(&c.column_id.to_le_bytes());
        payload.extend_from_slice(&c.owner_field.to_le_bytes());
        payload.push(c.role.tag());
        payload.push(c.physical_type.tag());
    }

    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn deserialize_header(buf: &[u8]) -> Result<Header> {
    let mut cur = Cursor::new(buf, 0);
    let payload_len = cur.u32()? as usize;
    if payload_len != cur.remaining() {
        return Err(Error::Format {
            offset: 0,
            reason: format!(
                "header length prefix {payload_len} does not match {} payload bytes",
                cur.remaining()
            ),
        });
    }
    let version = cur.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, supported: FORMAT_VERSION });
    }
    let dataset_name = cur.string()?;

    let raw_field_count = cur.u32()?;
    let field_count = guarded_count(&cur, raw_field_count, 17)?;
    let mut fields = Vec::with_capacity(field_count);
    for _ in 0..field_count {
        let field_id = cur.u32()?;
        let parent_raw = cur.u32()?;
        let kind_tag = cur.u8()?;
        let at = cur.offset();
        let kind = match kind_tag {
            KIND_RECORD => FieldKind::Record,
            KIND_COLLECTION => FieldKind::Collection,
            KIND_BOOL => FieldKind::LeafBool,
            KIND_INT => FieldKind::LeafInt { width: cur.u8()?, signed: cur.u8()? != 0 },
            KIND_FLOAT => FieldKind::LeafFloat { width: cur.u8()? },
            KIND_STRING => FieldKind::String,
            KIND_ARRAY => FieldKind::FixedArray { len: cur.u32()? },
            KIND_VARIANT => FieldKind::Variant,
            other => {
                return Err(Error::Format {
                    offset: at,
                    reason: format!("unknown field kind tag {other}"),
                })
            }
        };
        let name = cur.string()?;
        let raw_child_count = cur.u32()?;
        let child_count = guarded_count(&cur, raw_child_count, 4)?;
        let mut children = Vec::with_capacity(child_count);
        for _ in 0..child_count {
            children.push(cur.u32()?);
        }
        fields.push(FieldDescriptor {
            field_id,
            name,
            kind,
            parent_id: if parent_raw == NO_PARENT { None } else { Some(parent_raw) },
            children,
        });
    }

    let raw_column_count = cur.u32()?;
    let column_count = guarded_count(&cur, raw_column_count, 10)?;
    let mut columns = Vec::with_capacity(column_count);
    for _ in 0..column_count {
        let column_id = cur.u32()?;
        let owner_field = cur.u32()?;
        let at = cur.offset();
        let role = ColumnRole::from_tag(cur.u8()?).ok_or_else(|| Error::Format {
            offset: at,
            reason: "unknown column role tag".into(),
        })?;
        let at = cur.offset();
        let physical_type = PhysicalType::from_tag(cur.u8()?).ok_or_else(|| Error::Format {
            offset: at,
            reason: "unknown physical type tag".into(),
        })?;
        columns.push(ColumnDescriptor { column_id, owner_field, role, physical_type });
    }

    if cur.remaining() != 0 {
        return Err(Error::Format {
            offset: cur.offset(),
            reason: format!("{} trailing bytes after header", cur.remaining()),
        });
    }

    let schema = Schema::from_descriptors(fields)
        .map_err(|e| Error::corruption_caused("header holds an invalid schema", e))?;
    if schema.columns() != columns.as_slice() {
        return Err(Error::Format {
            offset: 0,
            reason: "stored column plan does not match the field tree".into(),
        });
    }
    Ok(Header { dataset_name, schema })
}

pub fn serialize_footer(footer: &Footer) -> Result<Vec<u8>> {
    validate_footer_structure(footer)?;
    let mut payload = Vec::new();
    payload.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    payload.extend_from_slice(&footer.total_entries.to_le_bytes());
    payload.extend_from_slice(&(footer.clusters.len() as u32).to_le_bytes());
    for cluster in &footer.clusters {
        payload.extend_from_slice(&cluster.first_entry.to_le_bytes());
        payload.extend_from_slice(&cluster.entries.to_le_bytes());
        payload.extend_from_slice(&(cluster.columns.len() as u32).to_le_bytes());
        for col in &cluster.columns {
            payload.extend_from_slice(&col.column_id.to_le_bytes());
            payload.extend_from_slice(&col.elements.to_le_bytes());
            payload.extend_from_slice(&(col.pages.len() as u32).to_le_bytes());
            for page in &col.pages {
                page.range.encode_into(&mut payload);
                payload.extend_from_slice(&page.elements.to_le_bytes());
            }
        }
    }
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn deserialize_footer(buf: &[u8]) -> Result<Footer> {
    let mut cur = Cursor::new(buf, 0);
    let payload_len = cur.u32()? as usize;
    if payload_len != cur.remaining() {
        return Err(Error::Format {
            offset: 0,
            reason: format!(
                "footer length prefix {payload_len} does not match {} payload bytes",
                cur.remaining()
            ),
        });
    }
    let version = cur.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, supported: FORMAT_VERSION });
    }
    let total_entries = cur.u64()?;
    let raw_cluster_count = cur.u32()?;
    let cluster_count = guarded_count(&cur, raw_cluster_count, 20)?;
    let mut clusters = Vec::with_capacity(cluster_count);
    for _ in 0..cluster_count {
        let first_entry = cur.u64()?;
        let entries = cur.u64()?;
        let raw_columns = cur.u32()?;
        let column_count = guarded_count(&cur, raw_columns, 16)?;
        let mut columns = Vec::with_capacity(column_count);
        for _ in 0..column_count {
            let column_id = cur.u32()?;
            let elements = cur.u64()?;
            let raw_pages = cur.u32()?;
            let page_count = guarded_count(&cur, raw_pages, BYTE_RANGE_LEN + 4)?;
            let mut pages = Vec::with_capacity(page_count);
            for _ in 0..page_count {
                let range = ByteRange::decode(&mut cur)?;
                let elements = cur.u32()?;
                pages.push(PageLocator { range, elements });
            }
            columns.push(ColumnPages { column_id, elements, pages });
        }
        clusters.push(ClusterDescriptor { first_entry, entries, columns });
    }
    if cur.remaining() != 0 {
        return Err(Error::Format {
            offset: cur.offset(),
            reason: format!("{} trailing bytes after footer", cur.remaining()),
        });
    }
    let footer = Footer { total_entries, clusters };
    validate_footer_structure(&footer)?;
    Ok(footer)
}

/// Structural rules shared by both directions: contiguous entry ranges from
/// zero, per-column page element sums, sorted column ids, sane page counts.
fn validate_footer_structure(footer: &Footer) -> Result<()> {
    let mut next_entry = 0u64;
    for (i, cluster) in footer.clusters.iter().enumerate() {
        if cluster.first_entry != next_entry {
            return Err(Error::Format {
                offset: 0,
                reason: format!(
                    "cluster {i} starts at entry {} but {} entries precede it",
                    cluster.first_entry, next_entry
                ),
            });
        }
        if cluster.entries == 0 {
            return Err(Error::Format {
                offset: 0,
                reason: format!("cluster {i} is empty"),
            });
        }
        next_entry = next_entry
            .checked_add(cluster.entries)
            .ok_or_else(|| Error::Format {
                offset: 0,
                reason: format!("cluster {i} entry range overflows"),
            })?;
        let mut prev_col: Option<u32> = None;
        for col in &cluster.columns {
            if let Some(prev) = prev_col {
                if col.column_id <= prev {
                    return Err(Error::Format {
                        offset: 0,
                        reason: format!(
                            "cluster {i} columns not sorted ({} after {prev})",
                            col.column_id
                        ),
                    });
                }
            }
            prev_col = Some(col.column_id);
            let mut sum = 0u64;
            for page in &col.pages {
                if page.elements == 0 {
                    return Err(Error::Format {
                        offset: 0,
                        reason: format!(
                            "cluster {i} column {} holds an empty page",
                            col.column_id
                        ),
                    });
                }
                sum += page.elements as u64;
            }
            if sum != col.elements {
                return Err(Error::Format {
                    offset: 0,
                    reason: format!(
                        "cluster {i} column {} pages sum to {sum} elements, expected {}",
                        col.column_id, col.elements
                    ),
                });
            }
        }
    }
    if next_entry != footer.total_entries {
        return Err(Error::Format {
            offset: 0,
            reason: format!(
                "clusters cover {next_entry} entries, footer declares {}",
                footer.total_entries
            ),
        });
    }
    Ok(())
}

/// Cross-checks footer contents against the schema and the region geometry:
/// every referenced column exists, page sizes match their physical type,
/// codecs are known, and no two stored blobs overlap.
pub fn validate_dataset(
    schema: &Schema,
    footer: &Footer,
    region_len: u64,
    header_loc: ByteRange,
    footer_loc: ByteRange,
) -> Result<()> {
    let column_count = schema.columns().len() as u32;
    // Columns reached through records and fixed arrays alone have a
    // statically known element count: the product of the array lengths,
    // per entry. Collections and variants make the count data dependent.
    let mut fixed_mult: Vec<(u32, u64)> = Vec::new();
    for col in schema.columns() {
        if col.role == ColumnRole::CharData {
            continue;
        }
        let mut mult = 1u64;
        let mut field = col.owner_field;
        let fixed = loop {
            match schema.field(field).parent_id {
                None => break true,
                Some(p) => {
                    match schema.field(p).kind {
                        FieldKind::Record => {}
                        FieldKind::FixedArray { len } => mult *= len as u64,
                        _ => break false,
                    }
                    field = p;
                }
            }
        };
        if fixed {
            fixed_mult.push((col.column_id, mult));
        }
    }

    let mut blobs: Vec<(u64, u64, String)> = vec![
        (header_loc.offset, header_loc.end(), "header".into()),
        (footer_loc.offset, footer_loc.end(), "footer".into()),
    ];
    for (i, cluster) in footer.clusters.iter().enumerate() {
        for col in &cluster.columns {
            if col.column_id >= column_count {
                return Err(Error::Format {
                    offset: 0,
                    reason: format!(
                        "cluster {i} references column {} but the schema has {column_count}",
                        col.column_id
                    ),
                });
            }
            let ty = schema.column(col.column_id).physical_type;
            if let Some(&(_, mult)) =
                fixed_mult.iter().find(|(id, _)| *id == col.column_id)
            {
                if col.elements != mult * cluster.entries {
                    return Err(Error::Format {
                        offset: 0,
                        reason: format!(
                            "cluster {i} column {} holds {} elements, expected {mult} per entry over {} entries",
                            col.column_id, col.elements, cluster.entries
                        ),
                    });
                }
            }
            for page in &col.pages {
                let expect = ty.payload_len(page.elements as usize) as u32;
                if page.range.uncompressed_size != expect {
                    return Err(Error::Format {
                        offset: 0,
                        reason: format!(
                            "cluster {i} column {} page declares {} unpacked bytes, {} elements of {} need {expect}",
                            col.column_id,
                            page.range.uncompressed_size,
                            page.elements,
                            ty.name()
                        ),
                    });
                }
                if page.range.codec_id > MAX_CODEC_ID {
                    return Err(Error::Format {
                        offset: 0,
                        reason: format!("unknown codec id {}", page.range.codec_id),
                    });
                }
                if page.range.compressed_size == 0 {
                    return Err(Error::Format {
                        offset: 0,
                        reason: format!(
                            "cluster {i} column {} page has zero stored bytes",
                            col.column_id
                        ),
                    });
                }
                blobs.push((
                    page.range.offset,
                    page.range.end(),
                    format!("cluster {i} column {} page", col.column_id),
                ));
            }
        }
    }

    blobs.sort_by_key(|b| b.0);
    let mut prev_end = ENVELOPE_LEN as u64;
    let mut prev_name = "envelope".to_string();
    for (start, end, name) in blobs {
        if start < prev_end {
            return Err(Error::Format {
                offset: start,
                reason: format!("{name} overlaps {prev_name}"),
            });
        }
        if end > region_len {
            return Err(Error::Format {
                offset: start,
                reason: format!("{name} ends at {end}, past the region ({region_len} bytes)"),
            });
        }
        prev_end = end;
        prev_name = name;
    }
    Ok(())
}

/// Rejects collection counts that could not possibly fit the remaining bytes,
/// so corrupt counts fail before any allocation.
fn guarded_count(cur: &Cursor<'_>, count: u32, min_item_bytes: usize) -> Result<usize> {
    let need = count as u64 * min_item_bytes as u64;
    if need > cur.remaining() as u64 {
        return Err(Error::Truncated {
            expected: cur.offset() + need,
            found: cur.offset() + cur.remaining() as u64,
        });
    }
    Ok(count as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{DefKind, FieldDef};

    fn single_float_header() -> Header {
        Header {
            dataset_name: "sample".into(),
            schema: Schema::from_fields(vec![FieldDef::float32("pt")]).unwrap(),
        }
    }

    #[test]
    fn header_bytes_are_stable() {
        let bytes = serialize_header(&single_float_header());
        let expected: Vec<u8> = [
            &[0x47, 0, 0, 0][..],                   // payload length 71
            &[1, 0],                                // version
            &[6, 0, 0, 0], b"sample",               // dataset name
            &[2, 0, 0, 0],                          // field count
            &[0, 0, 0, 0], &[0xff, 0xff, 0xff, 0xff], &[0], // root: id, no parent, record
            &[0, 0, 0, 0],                          // root name ""
            &[1, 0, 0, 0], &[1, 0, 0, 0],           // one child: field 1
            &[1, 0, 0, 0], &[0, 0, 0, 0], &[4, 4],  // pt: id, parent, float width 4
            &[2, 0, 0, 0], b"pt",                   // name
            &[0, 0, 0, 0],                          // no children
            &[1, 0, 0, 0],                          // column count
            &[0, 0, 0, 0], &[1, 0, 0, 0], &[0, 10], // column 0: owner 1, value, float32
        ]
        .concat();
        assert_eq!(bytes, expected);
    }

    #[test]
    fn header_round_trips() {
        let header = Header {
            dataset_name: "événements".into(),
            schema: Schema::from_fields(vec![
                FieldDef::int32("id"),
                FieldDef::collection(
                    "ptcls",
                    FieldDef::record(
                        "",
                        vec![
                            FieldDef::float32("energy"),
                            FieldDef::collection("ids", FieldDef::item(DefKind::Int32)),
                        ],
                    ),
                ),
                FieldDef::variant("hit", vec![FieldDef::bool_("a"), FieldDef::string("b")]),
                FieldDef::fixed_array("cov", 6, FieldDef::item(DefKind::Float64)),
            ])
            .unwrap(),
        };
        let bytes = serialize_header(&header);
        let back = deserialize_header(&bytes).unwrap();
        assert_eq!(back.dataset_name, header.dataset_name);
        assert!(back.schema.structurally_equal(&header.schema));
        assert_eq!(back.schema.columns(), header.schema.columns());
    }

    #[test]
    fn header_rejects_trailing_bytes() {
        let mut bytes = serialize_header(&single_float_header());
        bytes.push(0);
        assert!(matches!(
            deserialize_header(&bytes),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn header_rejects_tampered_column_plan() {
        let mut bytes = serialize_header(&single_float_header());
        let n = bytes.len();
        bytes[n - 1] = PhysicalType::Float64.tag(); // declared float32 in the tree
        assert!(matches!(
            deserialize_header(&bytes),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn header_rejects_empty_field_list() {
        // payload: version, name "", zero fields, zero columns.
        let mut payload = Vec::new();
        payload.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        payload.extend_from_slice(&[0, 0, 0, 0]);
        payload.extend_from_slice(&[0, 0, 0, 0]);
        payload.extend_from_slice(&[0, 0, 0, 0]);
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&payload);
        let err = deserialize_header(&bytes).unwrap_err();
        assert!(err.to_string().contains("invalid schema"));
        let cause = std::error::Error::source(&err).expect("cause retained");
        assert!(cause.to_string().contains("missing root"));
    }

    fn page(offset: u64, csize: u32, usize_: u32, elements: u32) -> PageLocator {
        PageLocator {
            range: ByteRange {
                offset,
                compressed_size: csize,
                uncompressed_size: usize_,
                codec_id: 0,
            },
            elements,
        }
    }

    fn three_cluster_footer() -> Footer {
        let cluster = |first: u64, off: u64| ClusterDescriptor {
            first_entry: first,
            entries: 100,
            columns: vec![ColumnPages {
                column_id: 0,
                elements: 100,
                pages: vec![page(off, 400, 400, 60), page(off + 400, 160, 160, 40)],
            }],
        };
        Footer {
            total_entries: 300,
            clusters: vec![cluster(0, 100), cluster(100, 1000), cluster(200, 2000)],
        }
    }

    #[test]
    fn footer_round_trips() {
        let footer = three_cluster_footer();
        let bytes = serialize_footer(&footer).unwrap();
        assert_eq!(deserialize_footer(&bytes).unwrap(), footer);
    }

    #[test]
    fn empty_dataset_footer_round_trips() {
        let footer = Footer { total_entries: 0, clusters: vec![] };
        let bytes = serialize_footer(&footer).unwrap();
        assert_eq!(deserialize_footer(&bytes).unwrap(), footer);
    }

    #[test]
    fn footer_rejects_entry_range_gap() {
        let mut footer = three_cluster_footer();
        footer.clusters[1].first_entry = 150;
        let err = serialize_footer(&footer).unwrap_err();
        assert!(err.to_string().contains("starts at entry 150"));
    }

    #[test]
    fn footer_rejects_total_mismatch() {
        let mut footer = three_cluster_footer();
        footer.total_entries = 299;
        let err = serialize_footer(&footer).unwrap_err();
        assert!(err.to_string().contains("declares 299"));
    }

    #[test]
    fn footer_rejects_page_sum_mismatch() {
        let mut footer = three_cluster_footer();
        footer.clusters[0].columns[0].pages[1].elements = 39;
        let err = serialize_footer(&footer).unwrap_err();
        assert!(err.to_string().contains("sum to 99"));
    }

    #[test]
    fn footer_byte_flips_never_panic() {
        let bytes = serialize_footer(&three_cluster_footer()).unwrap();
        for i in 0..bytes.len() {
            for bit in [0x01u8, 0x80] {
                let mut mutated = bytes.clone();
                mutated[i] ^= bit;
                let _ = deserialize_footer(&mutated);
            }
        }
        // Truncations at every length must error, not panic.
        for n in 0..bytes.len() {
            assert!(deserialize_footer(&bytes[..n]).is_err());
        }
    }

    #[test]
    fn dataset_validation_catches_overlap_and_size_lies() {
        let schema = Schema::from_fields(vec![FieldDef::float32("pt")]).unwrap();
        let header_loc = ByteRange {
            offset: ENVELOPE_LEN as u64,
            compressed_size: 10,
            uncompressed_size: 10,
            codec_id: 0,
        };
        let footer_loc = ByteRange {
            offset: 5000,
            compressed_size: 50,
            uncompressed_size: 50,
            codec_id: 0,
        };
        let make = |pages: Vec<PageLocator>, elements: u64| Footer {
            total_entries: elements,
            clusters: vec![ClusterDescriptor {
                first_entry: 0,
                entries: elements,
                columns: vec![ColumnPages { column_id: 0, elements, pages }],
            }],
        };

        // Well-formed: one 100-element float32 page, 400 bytes.
        let good = make(vec![page(100, 400, 400, 100)], 100);
        validate_dataset(&schema, &good, 5050, header_loc, footer_loc).unwrap();

        // Page overlaps the header.
        let overlap = make(vec![page(55, 400, 400, 100)], 100);
        assert!(validate_dataset(&schema, &overlap, 5050, header_loc, footer_loc).is_err());

        // Page runs past the region end.
        let past = make(vec![page(4900, 400, 400, 100)], 100);
        assert!(validate_dataset(&schema, &past, 5050, header_loc, footer_loc).is_err());

        // Uncompressed size inconsistent with element count.
        let lie = make(vec![page(100, 399, 399, 100)], 100);
        assert!(validate_dataset(&schema, &lie, 5050, header_loc, footer_loc).is_err());

        // A flat column must hold one element per entry.
        let short = make(vec![page(100, 396, 396, 99)], 100);
        let mut short_fixed = short;
        short_fixed.clusters[0].columns[0].elements = 99;
        short_fixed.total_entries = 100;
        short_fixed.clusters[0].entries = 100;
        assert!(validate_dataset(&schema, &short_fixed, 5050, header_loc, footer_loc).is_err());
    }

    #[test]
    fn absurd_counts_fail_before_allocation() {
        // A footer declaring four billion clusters in a 40-byte buffer.
        let mut payload = Vec::new();
        payload.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        payload.extend_from_slice(&0u64.to_le_bytes());
        payload.extend_from_slice(&u32::MAX.to_le_bytes());
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&payload);
        assert!(matches!(
            deserialize_footer(&bytes),
            Err(Error::Truncated { .. })
        ));
    }
}
