//! Deterministic JSON rendering for result files.
//!
//! Keys keep insertion order and every float is printed with 17 significant
//! digits (`{:.16e}`), so identical results serialize to identical bytes and
//! parse back to identical doubles. JSON has no NaN; unavailable values
//! render as the string `"nan"`.

use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn object() -> Json {
        Json::Object(Vec::new())
    }

    pub fn push(&mut self, key: &str, value: Json) -> &mut Self {
        match self {
            Json::Object(entries) => entries.push((key.to_string(), value)),
            _ => panic!("push on non-object Json"),
        }
        self
    }

    pub fn floats(values: impl IntoIterator<Item = f64>) -> Json {
        Json::Array(values.into_iter().map(Json::Float).collect())
    }

    pub fn strings(values: impl IntoIterator<Item = String>) -> Json {
        Json::Array(values.into_iter().map(Json::Str).collect())
    }

    pub fn render(&self) -> String {
        let mut buf = String::new();
        self.write(&mut buf, 0);
        buf.push('\n');
        buf
    }

    fn write(&self, buf: &mut String, indent: usize) {
        match self {
            Json::Null => buf.push_str("null"),
            Json::Bool(b) => {
                let _ = write!(buf, "{b}");
            }
            Json::Int(x) => {
                let _ = write!(buf, "{x}");
            }
            Json::UInt(x) => {
                let _ = write!(buf, "{x}");
            }
            Json::Float(x) => {
                if x.is_finite() {
                    let _ = write!(buf, "{x:.16e}");
                } else {
                    buf.push_str("\"nan\"");
                }
            }
            Json::Str(s) => write_escaped(buf, s),
            Json::Array(items) => {
                if items.is_empty() {
                    buf.push_str("[]");
                    return;
                }
                buf.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        buf.push(',');
                    }
                    buf.push('\n');
                    push_indent(buf, indent + 1);
                    item.write(buf, indent + 1);
                }
                buf.push('\n');
                push_indent(buf, indent);
                buf.push(']');
            }
            Json::Object(entries) => {
                if entries.is_empty() {
                    buf.push_str("{}");
                    return;
                }
                buf.push('{');
                for (i, (key, value)) in entries.iter().enumerate() {
                    if i > 0 {
                        buf.push(',');
                    }
                    buf.push('\n');
                    push_indent(buf, indent + 1);
                    write_escaped(buf, key);
                    buf.push_str(": ");
                    value.write(buf, indent + 1);
                }
                buf.push('\n');
                push_indent(buf, indent);
                buf.push('}');
            }
        }
    }
}

fn push_indent(buf: &mut String, level: usize) {
    for _ in 0..level {
        buf.push_str("  ");
    }
}

fn write_escaped(buf: &mut String, s: &str) {
    buf.push('"');
    for ch in s.chars() {
        match ch {
            '"' => buf.push_str("\\\""),
            '\\' => buf.push_str("\\\\"),
            '\n' => buf.push_str("\\n"),
            '\t' => buf.push_str("\\t"),
            '\r' => buf.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                let _ = write!(buf, "\\u{:04x}", c as u32);
            }
            c => buf.push(c),
        }
    }
    buf.push('"');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_deterministically() {
        let mut obj = Json::object();
        obj.push("name", Json::Str("demo".into()))
            .push("value", Json::Float(0.1))
            .push("grid", Json::floats([1.0, 2.0]))
            .push("missing", Json::Float(f64::NAN));
        let a = obj.render();
        let b = obj.render();
        assert_eq!(a, b);
        assert!(a.contains("1.0000000000000001e-1"));
        assert!(a.contains("\"nan\""));
    }
}
