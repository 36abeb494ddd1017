//! Report plumbing shared by every module: numeric quantities with a
//! finiteness status, and a JSON writer that prints all floats with 17
//! significant digits.

use std::io;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use serde_json::ser::Formatter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Finite,
    Infinite,
    Unconverged,
}

/// A computed value together with what is known about its convergence.
/// Non-finite values serialize as `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub status: Status,
}

impl Quantity {
    pub fn finite(value: f64) -> Self {
        Self {
            value,
            status: Status::Finite,
        }
    }

    pub fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            status: Status::Infinite,
        }
    }

    pub fn unconverged(value: f64) -> Self {
        Self {
            value,
            status: Status::Unconverged,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.status == Status::Finite
    }

    pub fn is_infinite(&self) -> bool {
        self.status == Status::Infinite
    }

    /// `self + other`; infinite dominates, then unconverged.
    pub fn add(self, other: Quantity) -> Quantity {
        let status = match (self.status, other.status) {
            (Status::Infinite, _) | (_, Status::Infinite) => return Quantity::infinite(),
            (Status::Unconverged, _) | (_, Status::Unconverged) => Status::Unconverged,
            _ => Status::Finite,
        };
        Quantity {
            value: self.value + other.value,
            status,
        }
    }

    pub fn scaled(self, c: f64) -> Quantity {
        Quantity {
            value: if self.is_infinite() { self.value } else { self.value * c },
            status: self.status,
        }
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Quantity", 2)?;
        s.serialize_field("value", &self.value.is_finite().then_some(self.value))?;
        s.serialize_field("status", &self.status)?;
        s.end()
    }
}

/// Finite floats only; anything else becomes `null`.
pub fn finite_or_none(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// JSON formatter printing every float as `{:.16e}` (round-trip exact).
#[derive(Debug, Clone, Default)]
pub struct ExactFloatFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl Formatter for ExactFloatFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Pretty JSON with 17-significant-digit floats and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloatFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

/// `{:.16e}` for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let v = vec![0.1, 1.0 / 3.0, 2.5e-300, 6.02e23];
        let s = to_json_string(&v).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(s.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn quantity_serialization() {
        let s = to_json_string(&Quantity::infinite()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v["value"].is_null());
        assert_eq!(v["status"], "infinite");
        let v: serde_json::Value = serde_json::from_str(&to_json_string(&Quantity::finite(2.0)).unwrap()).unwrap();
        assert_eq!(v["value"], 2.0);
    }

    #[test]
    fn quantity_arithmetic() {
        let a = Quantity::finite(1.0);
        assert!(a.add(Quantity::infinite()).is_infinite());
        assert_eq!(a.add(Quantity::unconverged(2.0)).status, Status::Unconverged);
        assert_eq!(a.add(a).scaled(3.0).value, 6.0);
    }
}
