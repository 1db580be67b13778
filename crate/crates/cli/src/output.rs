//! Artifact serialization: CSV with `#` metadata lines, or one JSON object.
//! Every real number is written with 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `{:.16e}` round-trips every finite `f64` exactly.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_owned()
    } else if x > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

/// Compact JSON with fixed-precision reals; non-finite reals become `null`.
struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    library: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

pub fn json_artifact<T: Serialize>(cfg: &RunConfig, body: &T) -> Vec<u8> {
    let envelope = Envelope {
        library: "unicirc",
        version: VERSION,
        config: cfg,
        body,
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits);
    envelope
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    out.push(b'\n');
    out
}

/// CSV artifact builder. Metadata lines precede the header row.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(cfg: &RunConfig) -> Self {
        let mut buf = format!("# unicirc {VERSION}\n");
        let value = serde_json::to_value(cfg).expect("config serializes");
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                let v = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) => match n.as_f64() {
                        Some(x) if n.is_f64() => fmt_real(x),
                        _ => n.to_string(),
                    },
                    other => other.to_string(),
                };
                buf.push_str(&format!("# {k}={v}\n"));
            }
        }
        Self { buf }
    }

    pub fn comment(&mut self, line: &str) {
        self.buf.push_str("# ");
        self.buf.push_str(line);
        self.buf.push('\n');
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.buf.push(',');
            }
            first = false;
            self.buf.push_str(f.as_ref());
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}
