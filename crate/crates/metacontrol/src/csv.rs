//! Minimal RFC-4180 field quoting for the CSV files the harness emits.

/// Quotes a field only when it contains a comma, quote, or newline.
pub fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
