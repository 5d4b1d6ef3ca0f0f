//! Small shared helpers: content hashing and a bounded parallel map.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Stable short id for a piece of text: SHA-256 of its
/// whitespace-normalized form, truncated to 16 hex chars.
pub fn text_id(text: &str) -> String {
    let normalized = normalize_whitespace(text);
    sha256_hex(normalized.as_bytes())[..16].to_string()
}

/// Collapse all whitespace runs to single spaces and trim the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace-delimited token count.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Apply `f` to every item with at most `limit` invocations in flight.
///
/// Results come back positionally aligned with the input. Workers pull
/// indices from a shared counter, so the in-flight bound is structural:
/// there are never more than `limit` worker threads.
pub fn parallel_map<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    assert!(limit >= 1, "parallelism limit must be >= 1");
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, R)>> = Mutex::new(Vec::with_capacity(n));
    std::thread::scope(|scope| {
        for _ in 0..limit.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = f(i, &items[i]);
                results.lock().unwrap().push((i, r));
            });
        }
    });
    let mut collected = results.into_inner().unwrap();
    collected.sort_by_key(|(i, _)| *i);
    collected.into_iter().map(|(_, r)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_id_stable_under_whitespace() {
        assert_eq!(text_id("a  b\tc"), text_id("a b c"));
        assert_eq!(text_id("  a b c  "), text_id("a b c"));
        assert_ne!(text_id("a b c"), text_id("a b d"));
    }

    #[test]
    fn parallel_map_alignment() {
        let items: Vec<usize> = (0..100).collect();
        let out = parallel_map(&items, 8, |_, x| x * 2);
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn parallel_map_empty() {
        let items: Vec<usize> = vec![];
        assert!(parallel_map(&items, 4, |_, x| *x).is_empty());
    }
}
