//! JSON serialization with 17-significant-digit floats.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};

use crate::error::{Error, Result};

/// Compact JSON formatter writing every `f64` as `d.dddddddddddddddde±x`.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sig17Formatter;

impl Formatter for Sig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        CompactFormatter.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17Formatter);
    value.serialize(&mut ser)?;
    String::from_utf8(buf).map_err(|e| Error::Json(e.to_string()))
}

/// Rejects documents whose `schema` field differs from `expected`.
pub fn check_schema(doc: &serde_json::Value, expected: &str) -> Result<()> {
    let found = doc.get("schema").and_then(|s| s.as_str()).unwrap_or("<missing>");
    if found == expected {
        Ok(())
    } else {
        Err(Error::Schema {
            found: found.to_string(),
            expected: expected.to_string(),
        })
    }
}
