//! Greedy longest-match scanning over case-folded character sequences.
//!
//! Works uniformly for languages with and without word separators; all
//! offsets are char indices.

pub(crate) fn fold_char(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

pub(crate) fn fold_chars(s: &str) -> Vec<char> {
    s.chars().map(fold_char).collect()
}

pub(crate) struct Needle<T> {
    pub folded: Vec<char>,
    pub tag: T,
}

pub(crate) fn make_needles<T>(items: impl IntoIterator<Item = (String, T)>) -> Vec<Needle<T>> {
    let mut needles: Vec<Needle<T>> = items
        .into_iter()
        .map(|(s, tag)| Needle {
            folded: fold_chars(&s),
            tag,
        })
        .collect();
    // Longest first so the greedy scan prefers the most specific match;
    // lexicographic tiebreak keeps the order deterministic.
    needles.sort_by(|a, b| {
        b.folded
            .len()
            .cmp(&a.folded.len())
            .then_with(|| a.folded.cmp(&b.folded))
    });
    needles
}

/// All non-overlapping matches as (start, end, tag) char ranges, scanning
/// left to right and taking the longest needle at each position.
pub(crate) fn scan<T: Clone>(haystack: &[char], needles: &[Needle<T>]) -> Vec<(usize, usize, T)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < haystack.len() {
        let mut matched: Option<(usize, T)> = None;
        for needle in needles {
            let len = needle.folded.len();
            if len == 0 || i + len > haystack.len() {
                continue;
            }
            if haystack[i..i + len] == needle.folded[..] {
                matched = Some((len, needle.tag.clone()));
                break;
            }
        }
        if let Some((len, tag)) = matched {
            out.push((i, i + len, tag));
            i += len;
        } else {
            i += 1;
        }
    }
    out
}

/// First match of `needle` inside `haystack`, as a char range.
pub(crate) fn find(haystack: &[char], needle: &[char]) -> Option<(usize, usize)> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len())
        .find(|&i| haystack[i..i + needle.len()] == needle[..])
        .map(|i| (i, i + needle.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefers_longest_match() {
        let needles = make_needles([
            ("market 1".to_string(), 0usize),
            ("night market 1".to_string(), 1usize),
        ]);
        let haystack = fold_chars("the night market 1 stall");
        let hits = scan(&haystack, &needles);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].2, 1);
    }

    #[test]
    fn scan_is_case_insensitive() {
        let needles = make_needles([("Dormitory 6".to_string(), 0usize)]);
        let haystack = fold_chars("DORMITORY 6 should be behind");
        assert_eq!(scan(&haystack, &needles).len(), 1);
    }

    #[test]
    fn scan_works_without_separators() {
        let needles = make_needles([
            ("餐廳5".to_string(), 0usize),
            ("公車站1".to_string(), 1usize),
        ]);
        let haystack = fold_chars("餐廳5在我前面，公車站1在我左邊");
        let hits = scan(&haystack, &needles);
        assert_eq!(hits.len(), 2);
        assert_eq!((hits[0].0, hits[0].1), (0, 3));
    }
}
