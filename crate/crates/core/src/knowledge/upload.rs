//! Upload screening and chunking.

use super::KnowledgeError;

pub const CHUNK_SIZE: usize = 1000;
pub const CHUNK_OVERLAP: usize = 200;
/// Share of non-printable characters above which text counts as binary.
pub const MAX_NON_PRINTABLE: f64 = 0.10;

/// Rejects binary payloads and non-UTF-8 text; returns the decoded text.
pub fn screen_upload(bytes: &[u8]) -> Result<&str, KnowledgeError> {
    if bytes.contains(&0) {
        return Err(KnowledgeError::BinaryContentRejected(
            "payload contains NUL bytes".into(),
        ));
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|e| KnowledgeError::EncodingRejected(format!("payload is not valid UTF-8: {e}")))?;
    let total = text.chars().count();
    if total > 0 {
        let bad = text
            .chars()
            .filter(|c| c.is_control() && !matches!(c, '\n' | '\r' | '\t'))
            .count();
        let share = bad as f64 / total as f64;
        if share > MAX_NON_PRINTABLE {
            return Err(KnowledgeError::BinaryContentRejected(format!(
                "{:.0}% of characters are non-printable",
                share * 100.0
            )));
        }
    }
    Ok(text)
}

/// Fixed-size character windows. A text that fits in one window is one
/// chunk; longer texts get a window starting at every multiple of
/// `size - overlap`.
pub fn chunk_text(text: &str, size: usize, overlap: usize) -> Vec<String> {
    assert!(overlap < size, "overlap must be smaller than the chunk size");
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    if chars.len() <= size {
        return vec![text.to_string()];
    }
    let step = size - overlap;
    (0..chars.len())
        .step_by(step)
        .map(|start| chars[start..(start + size).min(chars.len())].iter().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_counts() {
        assert_eq!(chunk_text("", 1000, 200).len(), 0);
        assert_eq!(chunk_text(&"a".repeat(999), 1000, 200).len(), 1);
        let c = chunk_text(&"b".repeat(2500), 1000, 200);
        assert_eq!(c.len(), 4);
        assert_eq!(c[0].len(), 1000);
        assert_eq!(c[3].len(), 100);
    }

    #[test]
    fn overlap_is_shared() {
        let text: String = (0..1500).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let c = chunk_text(&text, 1000, 200);
        assert_eq!(&c[0][800..], &c[1][..200]);
    }

    #[test]
    fn screening() {
        assert!(matches!(
            screen_upload(b"ab\0c"),
            Err(KnowledgeError::BinaryContentRejected(_))
        ));
        assert!(matches!(
            screen_upload(&[0xff, 0xfe, 0x41]),
            Err(KnowledgeError::EncodingRejected(_))
        ));
        let noisy: Vec<u8> = std::iter::repeat_n(b"\x01abcd".to_vec(), 10).flatten().collect();
        assert!(matches!(
            screen_upload(&noisy),
            Err(KnowledgeError::BinaryContentRejected(_))
        ));
        assert_eq!(screen_upload("x := 1;\n\tok".as_bytes()).unwrap(), "x := 1;\n\tok");
    }
}
