//! Canonical text form of a dataset, for export, import, and diffing.
//!
//! The layout is line oriented:
//!
//! ```text
//! #grebe 1
//! #name <dataset name>
//! #field <name> <type text>
//! <value>\t<value>\t...
//! ```
//!
//! One `#field` line per exported top-level field, then one line per entry
//! with tab-separated values in field order. Value syntax by kind:
//!
//! * bool: `true` / `false`; integers: decimal
//! * floats: shortest decimal that parses back to the same bits, `NaN`,
//!   `inf`, `-inf` (every finite value round-trips exactly)
//! * strings: double-quoted; `\"` `\\` `\n` `\t` `\r` plus `\u{XXXX}` for
//!   other control characters, so no raw tab or newline appears in a value
//! * collections and fixed arrays: `[v,v,...]`; records: `{v,v,...}` with
//!   member names implied by the schema; variants: `<alt:v>` zero-based
//!
//! The form is canonical: export, import, export again is byte-identical.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::api::{DatasetModel, DatasetReader, DatasetWriter, WriteSummary, WriterOptions};
use crate::error::{Error, Result};
use crate::schema::{DefKind, FieldDef, FieldId, FieldKind, Schema};
use crate::storage::ContainerTarget;
use crate::value::Value;

const TEXT_MAGIC: &str = "#grebe 1";

/// Writes the canonical text form of `reader` to `out`. `fields` selects
/// top-level fields by name; `None` exports all of them in schema order.
pub fn export(
    reader: &DatasetReader,
    fields: Option<&[&str]>,
    out: &mut impl Write,
) -> Result<()> {
    let schema = reader.schema();
    let selected: Vec<FieldId> = match fields {
        None => schema.root().children.clone(),
        Some(names) => names
            .iter()
            .map(|name| {
                let id = schema.resolve_path(name)?;
                if schema.field(id).parent_id != Some(0) {
                    return Err(Error::Usage(format!(
                        "`{name}` is nested; export selects top-level fields"
                    )));
                }
                Ok(id)
            })
            .collect::<Result<_>>()?,
    };
    let io = |e| Error::Io { offset: 0, source: e };
    writeln!(out, "{TEXT_MAGIC}").map_err(io)?;
    writeln!(out, "#name {}", reader.name()).map_err(io)?;
    for &field in &selected {
        writeln!(out, "#field {} {}", schema.field(field).name, schema.type_text(field))
            .map_err(io)?;
    }
    let views: Vec<_> = selected
        .iter()
        .map(|&f| reader.dyn_view(&schema.field(f).name))
        .collect::<Result<_>>()?;
    let mut line = String::new();
    for entry in reader.entries() {
        line.clear();
        for (i, view) in views.iter().enumerate() {
            if i > 0 {
                line.push('\t');
            }
            format_value(&view.value(entry)?, &mut line);
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}

/// Reads the canonical text form and writes it as a dataset.
pub fn import(
    input: &mut impl BufRead,
    target: &ContainerTarget,
    options: WriterOptions,
) -> Result<WriteSummary> {
    let mut lines = Lines::new(input);
    let magic = lines.next_line()?.unwrap_or_default();
    if magic != TEXT_MAGIC {
        return Err(lines.bad(format!("expected `{TEXT_MAGIC}` on the first line")));
    }
    let name_line = lines.next_line()?.unwrap_or_default();
    let name = name_line
        .strip_prefix("#name ")
        .ok_or_else(|| lines.bad("expected a `#name` line".to_string()))?
        .to_string();

    let mut defs = Vec::new();
    let mut first_entry_line: Option<String> = None;
    loop {
        match lines.next_line()? {
            None => break,
            Some(line) => match line.strip_prefix("#field ") {
                Some(rest) => {
                    let (field_name, type_text) =
                        rest.split_once(' ').ok_or_else(|| {
                            lines.bad("expected `#field <name> <type>`".to_string())
                        })?;
                    let kind = parse_type_text(type_text)
                        .map_err(|reason| lines.bad(reason))?;
                    defs.push(FieldDef { name: field_name.to_string(), kind });
                }
                None => {
                    first_entry_line = Some(line);
                    break;
                }
            },
        }
    }
    if defs.is_empty() {
        return Err(lines.bad("no `#field` lines".to_string()));
    }
    let schema = Schema::from_fields(defs)?;
    let mut writer = DatasetWriter::create(target, &name, Arc::clone(&schema), options)?;
    let model = DatasetModel::from_schema(Arc::clone(&schema));
    let mut entry = model.create_entry();
    let top = schema.root().children.clone();

    let mut pending = first_entry_line;
    loop {
        let line = match pending.take() {
            Some(l) => l,
            None => match lines.next_line()? {
                Some(l) => l,
                None => break,
            },
        };
        let mut p = Parser { text: line.as_bytes(), at: 0 };
        for (slot, &field) in top.iter().enumerate() {
            if slot > 0 {
                p.expect(b'\t').map_err(|reason| lines.bad(reason))?;
            }
            entry.values_mut()[slot] =
                p.value(&schema, field).map_err(|reason| lines.bad(reason))?;
        }
        if p.at != p.text.len() {
            return Err(lines.bad(format!("trailing text after the last field: `{}`",
                String::from_utf8_lossy(&p.text[p.at..]))));
        }
        writer.fill(&entry)?;
    }
    writer.commit()
}

/// Line reader that tracks byte offsets for error reporting.
struct Lines<'a, R: BufRead> {
    input: &'a mut R,
    /// Byte offset where the most recent line started.
    line_start: u64,
    consumed: u64,
}

impl<'a, R: BufRead> Lines<'a, R> {
    fn new(input: &'a mut R) -> Self {
        Lines { input, line_start: 0, consumed: 0 }
    }

    fn next_line(&mut self) -> Result<Option<String>> {
        let mut buf = String::new();
        self.line_start = self.consumed;
        let n = self
            .input
            .read_line(&mut buf)
            .map_err(|e| Error::Io { offset: self.consumed, source: e })?;
        if n == 0 {
            return Ok(None);
        }
        self.consumed += n as u64;
        while buf.ends_with('\n') || buf.ends_with('\r') {
            buf.pop();
        }
        Ok(Some(buf))
    }

    fn bad(&self, reason: String) -> Error {
        Error::Format { offset: self.line_start, reason }
    }
}

/// Appends the canonical text of one value.
pub fn format_value(value: &Value, out: &mut String) {
    match value {
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::I8(x) => out.push_str(&x.to_string()),
        Value::I16(x) => out.push_str(&x.to_string()),
        Value::I32(x) => out.push_str(&x.to_string()),
        Value::I64(x) => out.push_str(&x.to_string()),
        Value::U8(x) => out.push_str(&x.to_string()),
        Value::U16(x) => out.push_str(&x.to_string()),
        Value::U32(x) => out.push_str(&x.to_string()),
        Value::U64(x) => out.push_str(&x.to_string()),
        Value::F32(x) => out.push_str(&x.to_string()),
        Value::F64(x) => out.push_str(&x.to_string()),
        Value::Str(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '\r' => out.push_str("\\r"),
                    c if (c as u32) < 0x20 => {
                        out.push_str(&format!("\\u{{{:04X}}}", c as u32))
                    }
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        Value::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                format_value(item, out);
            }
            out.push(']');
        }
        Value::Record(members) => {
            out.push('{');
            for (i, member) in members.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                format_value(member, out);
            }
            out.push('}');
        }
        Value::Variant(alt, payload) => {
            out.push('<');
            out.push_str(&alt.to_string());
            out.push(':');
            format_value(payload, out);
            out.push('>');
        }
    }
}

/// Parses a type-text expression (the `#field` grammar, matching what
/// [`Schema::type_text`] emits) into a definition.
pub fn parse_type_text(text: &str) -> std::result::Result<DefKind, String> {
    let mut p = Parser { text: text.as_bytes(), at: 0 };
    let kind = p.type_text()?;
    if p.at != p.text.len() {
        return Err(format!("trailing characters in type `{text}`"));
    }
    Ok(kind)
}

/// Recursive-descent parser over one line. Errors are plain strings; the
/// caller attaches the line position.
struct Parser<'a> {
    text: &'a [u8],
    at: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.at).copied()
    }

    fn expect(&mut self, want: u8) -> std::result::Result<(), String> {
        match self.peek() {
            Some(c) if c == want => {
                self.at += 1;
                Ok(())
            }
            Some(c) => Err(format!(
                "expected `{}` at column {}, found `{}`",
                want as char, self.at, c as char
            )),
            None => Err(format!("expected `{}` at column {}, found end of line",
                want as char, self.at)),
        }
    }

    /// The longest run of characters a scalar token may contain.
    fn token(&mut self) -> &str {
        let start = self.at;
        while let Some(c) = self.peek() {
            match c {
                b'\t' | b',' | b']' | b'}' | b'>' | b'|' | b':' => break,
                _ => self.at += 1,
            }
        }
        std::str::from_utf8(&self.text[start..self.at]).unwrap_or("")
    }

    fn value(&mut self, schema: &Schema, field: FieldId) -> std::result::Result<Value, String> {
        let f = schema.field(field);
        let fail = |token: &str, what: &str| {
            format!("`{token}` is not a valid {what} for field `{}`", schema.path_of(field))
        };
        match f.kind {
            FieldKind::LeafBool => match self.token() {
                "true" => Ok(Value::Bool(true)),
                "false" => Ok(Value::Bool(false)),
                t => Err(fail(t, "bool")),
            },
            FieldKind::LeafInt { width, signed } => {
                let t = self.token();
                Ok(match (width, signed) {
                    (1, true) => Value::I8(t.parse().map_err(|_| fail(t, "int8"))?),
                    (2, true) => Value::I16(t.parse().map_err(|_| fail(t, "int16"))?),
                    (4, true) => Value::I32(t.parse().map_err(|_| fail(t, "int32"))?),
                    (8, true) => Value::I64(t.parse().map_err(|_| fail(t, "int64"))?),
                    (1, false) => Value::U8(t.parse().map_err(|_| fail(t, "uint8"))?),
                    (2, false) => Value::U16(t.parse().map_err(|_| fail(t, "uint16"))?),
                    (4, false) => Value::U32(t.parse().map_err(|_| fail(t, "uint32"))?),
                    _ => Value::U64(t.parse().map_err(|_| fail(t, "uint64"))?),
                })
            }
            FieldKind::LeafFloat { width } => {
                let t = self.token();
                if width == 4 {
                    Ok(Value::F32(t.parse().map_err(|_| fail(t, "float32"))?))
                } else {
                    Ok(Value::F64(t.parse().map_err(|_| fail(t, "float64"))?))
                }
            }
            FieldKind::String => self.string(),
            FieldKind::Collection => {
                let child = f.children[0];
                self.expect(b'[')?;
                let mut items = Vec::new();
                if self.peek() == Some(b']') {
                    self.at += 1;
                    return Ok(Value::List(items));
                }
                loop {
                    items.push(self.value(schema, child)?);
                    match self.peek() {
                        Some(b',') => self.at += 1,
                        _ => break,
                    }
                }
                self.expect(b']')?;
                Ok(Value::List(items))
            }
            FieldKind::FixedArray { len } => {
                let child = f.children[0];
                self.expect(b'[')?;
                let mut items = Vec::with_capacity(len as usize);
                for i in 0..len {
                    if i > 0 {
                        self.expect(b',')?;
                    }
                    items.push(self.value(schema, child)?);
                }
                self.expect(b']')?;
                Ok(Value::List(items))
            }
            FieldKind::Record => {
                self.expect(b'{')?;
                let children = f.children.clone();
                let mut members = Vec::with_capacity(children.len());
                for (i, child) in children.into_iter().enumerate() {
                    if i > 0 {
                        self.expect(b',')?;
                    }
                    members.push(self.value(schema, child)?);
                }
                self.expect(b'}')?;
                Ok(Value::Record(members))
            }
            FieldKind::Variant => {
                self.expect(b'<')?;
                let t = self.token();
                let alt: u32 = t.parse().map_err(|_| fail(t, "alternative index"))?;
                if alt as usize >= f.children.len() {
                    return Err(format!(
                        "variant `{}` has {} alternatives, index {alt} given",
                        schema.path_of(field),
                        f.children.len()
                    ));
                }
                self.expect(b':')?;
                let payload = self.value(schema, f.children[alt as usize])?;
                self.expect(b'>')?;
                Ok(Value::Variant(alt, Box::new(payload)))
            }
        }
    }

    fn string(&mut self) -> std::result::Result<Value, String> {
        self.expect(b'"')?;
        let mut out = String::new();
        loop {
            let rest = &self.text[self.at..];
            let Some(&c) = rest.first() else {
                return Err("unterminated string".to_string());
            };
            match c {
                b'"' => {
                    self.at += 1;
                    return Ok(Value::Str(out));
                }
                b'\\' => {
                    self.at += 1;
                    let Some(&esc) = self.text.get(self.at) else {
                        return Err("dangling escape".to_string());
                    };
                    self.at += 1;
                    match esc {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'n' => out.push('\n'),
                        b't' => out.push('\t'),
                        b'r' => out.push('\r'),
                        b'u' => {
                            self.expect(b'{')?;
                            let start = self.at;
                            while self.peek().is_some_and(|c| c != b'}') {
                                self.at += 1;
                            }
                            let hex = std::str::from_utf8(&self.text[start..self.at])
                                .map_err(|_| "bad unicode escape".to_string())?;
                            let code = u32::from_str_radix(hex, 16)
                                .map_err(|_| format!("bad unicode escape `{hex}`"))?;
                            out.push(
                                char::from_u32(code)
                                    .ok_or(format!("`{code:#x}` is not a character"))?,
                            );
                            self.expect(b'}')?;
                        }
                        other => {
                            return Err(format!("unknown escape `\\{}`", other as char))
                        }
                    }
                }
                _ => {
                    // Consume one UTF-8 character, multi-byte included.
                    let s = std::str::from_utf8(rest)
                        .map_err(|_| "invalid UTF-8 in string".to_string())?;
                    let ch = s.chars().next().unwrap();
                    out.push(ch);
                    self.at += ch.len_utf8();
                }
            }
        }
    }

    fn type_text(&mut self) -> std::result::Result<DefKind, String> {
        match self.peek() {
            Some(b'[') => {
                self.at += 1;
                let item = self.type_text()?;
                match self.peek() {
                    Some(b';') => {
                        self.at += 1;
                        let t = self.token();
                        let len: u32 =
                            t.parse().map_err(|_| format!("bad array length `{t}`"))?;
                        self.expect(b']')?;
                        Ok(DefKind::FixedArray(len, Box::new(FieldDef::item(item))))
                    }
                    Some(b']') => {
                        self.at += 1;
                        Ok(DefKind::Collection(Box::new(FieldDef::item(item))))
                    }
                    _ => Err("expected `]` or `;` in array type".to_string()),
                }
            }
            Some(b'{') => {
                self.at += 1;
                let mut children = Vec::new();
                if self.peek() == Some(b'}') {
                    self.at += 1;
                    return Ok(DefKind::Record(children));
                }
                loop {
                    children.push(self.named_member()?);
                    match self.peek() {
                        Some(b',') => self.at += 1,
                        _ => break,
                    }
                }
                self.expect(b'}')?;
                Ok(DefKind::Record(children))
            }
            Some(b'<') => {
                self.at += 1;
                let mut children = Vec::new();
                loop {
                    children.push(self.named_member()?);
                    match self.peek() {
                        Some(b'|') => self.at += 1,
                        _ => break,
                    }
                }
                self.expect(b'>')?;
                Ok(DefKind::Variant(children))
            }
            _ => {
                let start = self.at;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
                {
                    self.at += 1;
                }
                let name = std::str::from_utf8(&self.text[start..self.at]).unwrap_or("");
                Ok(match name {
                    "bool" => DefKind::Bool,
                    "int8" => DefKind::Int8,
                    "int16" => DefKind::Int16,
                    "int32" => DefKind::Int32,
                    "int64" => DefKind::Int64,
                    "uint8" => DefKind::UInt8,
                    "uint16" => DefKind::UInt16,
                    "uint32" => DefKind::UInt32,
                    "uint64" => DefKind::UInt64,
                    "float32" => DefKind::Float32,
                    "float64" => DefKind::Float64,
                    "string" => DefKind::Str,
                    other => return Err(format!("unknown type `{other}`")),
                })
            }
        }
    }

    fn named_member(&mut self) -> std::result::Result<FieldDef, String> {
        let name = self.token().to_string();
        self.expect(b':')?;
        let kind = self.type_text()?;
        Ok(FieldDef { name, kind })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::DatasetReader;
    use crate::storage::ContainerSource;

    fn tricky_schema() -> Arc<Schema> {
        Schema::from_fields(vec![
            FieldDef::int32("id"),
            FieldDef::float64("energy"),
            FieldDef::string("tag"),
            FieldDef::collection(
                "hits",
                FieldDef::record(
                    "",
                    vec![FieldDef::float32("q"), FieldDef::string("det")],
                ),
            ),
            FieldDef::fixed_array("pos", 3, FieldDef::float32("")),
            FieldDef::variant(
                "extra",
                vec![FieldDef::int32("code"), FieldDef::string("note")],
            ),
        ])
        .unwrap()
    }

    fn tricky_entries() -> Vec<Vec<Value>> {
        let row = |id: i32, e: f64, tag: &str, hits: Vec<(f32, &str)>, pos: [f32; 3],
                   extra: Value| {
            vec![
                Value::I32(id),
                Value::F64(e),
                Value::Str(tag.to_string()),
                Value::List(
                    hits.into_iter()
                        .map(|(q, d)| {
                            Value::Record(vec![Value::F32(q), Value::Str(d.to_string())])
                        })
                        .collect(),
                ),
                Value::List(pos.iter().map(|&p| Value::F32(p)).collect()),
                extra,
            ]
        };
        vec![
            row(1, 0.1, "plain", vec![(1.5, "a")], [0.0, -0.0, 3.25],
                Value::Variant(0, Box::new(Value::I32(-7)))),
            row(2, f64::NAN, "tab\tand\nnewline", vec![], [f32::INFINITY, f32::NEG_INFINITY, 0.0],
                Value::Variant(1, Box::new(Value::Str(String::new())))),
            row(3, 1e300, "quote\"backslash\\", vec![(0.25, "π µ")], [1e-38, 1.0, -1.0],
                Value::Variant(1, Box::new(Value::Str("\u{1}control".to_string())))),
        ]
    }

    fn write_tricky(dir: &std::path::Path) -> std::path::PathBuf {
        let path = dir.join("tricky.grb");
        let schema = tricky_schema();
        let mut writer = DatasetWriter::create(
            &ContainerTarget::BareFile(path.clone()),
            "tricky",
            Arc::clone(&schema),
            WriterOptions::default(),
        )
        .unwrap();
        let model = DatasetModel::from_schema(schema);
        let mut entry = model.create_entry();
        for values in tricky_entries() {
            entry.set_values(values).unwrap();
            writer.fill(&entry).unwrap();
        }
        writer.commit().unwrap();
        path
    }

    #[test]
    fn export_import_export_is_a_fixed_point() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tricky(dir.path());
        let reader = DatasetReader::open(&ContainerSource::BareFile(path)).unwrap();
        let mut first = Vec::new();
        export(&reader, None, &mut first).unwrap();

        let reimported = dir.path().join("reimported.grb");
        import(
            &mut first.as_slice(),
            &ContainerTarget::BareFile(reimported.clone()),
            WriterOptions::default(),
        )
        .unwrap();
        let reader2 = DatasetReader::open(&ContainerSource::BareFile(reimported)).unwrap();
        let mut second = Vec::new();
        export(&reader2, None, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(reader2.name(), "tricky");
    }

    #[test]
    fn import_recovers_plain_values_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tricky(dir.path());
        let reader = DatasetReader::open(&ContainerSource::BareFile(path)).unwrap();
        let mut text = Vec::new();
        export(&reader, None, &mut text).unwrap();
        let reimported = dir.path().join("back.grb");
        import(
            &mut text.as_slice(),
            &ContainerTarget::BareFile(reimported.clone()),
            WriterOptions::default(),
        )
        .unwrap();
        let back = DatasetReader::open(&ContainerSource::BareFile(reimported)).unwrap();
        let mut entry = back.create_entry();
        // Entry 0 holds only finite values, so equality is value-exact.
        back.load_entry(0, &mut entry).unwrap();
        assert_eq!(entry.values(), tricky_entries()[0].as_slice());
        // NaN payload bits are not preserved through text, shape still is.
        back.load_entry(1, &mut entry).unwrap();
        let Value::F64(nan) = entry.values()[1] else { panic!("shape") };
        assert!(nan.is_nan());
    }

    #[test]
    fn field_subset_exports_only_named_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tricky(dir.path());
        let reader = DatasetReader::open(&ContainerSource::BareFile(path)).unwrap();
        let mut text = Vec::new();
        export(&reader, Some(&["id", "tag"]), &mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "#grebe 1");
        assert_eq!(lines[1], "#name tricky");
        assert_eq!(lines[2], "#field id int32");
        assert_eq!(lines[3], "#field tag string");
        assert_eq!(lines[4], "1\t\"plain\"");
        assert_eq!(lines[5], "2\t\"tab\\tand\\nnewline\"");
        assert_eq!(lines[6], "3\t\"quote\\\"backslash\\\\\"");
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn type_text_parses_back_to_the_same_schema() {
        let schema = tricky_schema();
        for &field in &schema.root().children {
            let text = schema.type_text(field);
            let kind = parse_type_text(&text).unwrap();
            let def = FieldDef { name: schema.field(field).name.clone(), kind };
            let rebuilt = Schema::from_fields(vec![def]).unwrap();
            assert_eq!(rebuilt.type_text(rebuilt.root().children[0]), text);
        }
    }

    #[test]
    fn malformed_lines_name_the_line_start_offset() {
        let dir = tempfile::tempdir().unwrap();
        let target = ContainerTarget::BareFile(dir.path().join("x.grb"));
        let cases: &[&str] = &[
            "not a header\n",
            "#grebe 1\nmissing name\n",
            "#grebe 1\n#name d\n#field x int32\nnot_an_int\n",
            "#grebe 1\n#name d\n#field x int32\n5 trailing\n",
            "#grebe 1\n#name d\n#field x [int32\n",
            "#grebe 1\n#name d\n#field s string\n\"open\n",
        ];
        for case in cases {
            let err = import(&mut case.as_bytes(), &target, WriterOptions::default())
                .unwrap_err();
            assert!(
                matches!(err, Error::Format { .. } | Error::Schema(_)),
                "{case:?} gave {err}"
            );
        }
    }

    #[test]
    fn float_formatting_round_trips_extremes() {
        let values = [
            0.0f64, -0.0, 1.0, -1.5, f64::MIN_POSITIVE, f64::MAX, 1e-300, 0.1,
            f64::INFINITY, f64::NEG_INFINITY,
        ];
        for v in values {
            let mut s = String::new();
            format_value(&Value::F64(v), &mut s);
            let parsed: f64 = s.parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits(), "{v} → {s} → {parsed}");
        }
    }
}
