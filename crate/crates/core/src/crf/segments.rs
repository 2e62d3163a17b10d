use serde::{Deserialize, Serialize};

use crate::features::RawToken;
use crate::tags::Tag;

/// Inclusive token span `[first, last]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub first: usize,
    pub last: usize,
}

impl Segment {
    pub fn new(first: usize, last: usize) -> Self {
        debug_assert!(first <= last);
        Segment { first, last }
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Half-open character span from the first token's start to the last
    /// token's end.
    pub fn char_span(&self, tokens: &[RawToken]) -> (usize, usize) {
        (tokens[self.first].char_start, tokens[self.last].char_end)
    }
}

/// Segments from a label sequence. `B` opens a segment, `I` extends it and
/// `O` closes it; an `I` at the start or right after an `O` opens one.
pub fn extract_segments(labels: &[Tag]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, tag) in labels.iter().enumerate() {
        match tag {
            Tag::Begin => {
                if let Some(s) = open.take() {
                    out.push(Segment::new(s, i - 1));
                }
                open = Some(i);
            }
            Tag::Inside => {
                if open.is_none() {
                    open = Some(i);
                }
            }
            Tag::Outside => {
                if let Some(s) = open.take() {
                    out.push(Segment::new(s, i - 1));
                }
            }
        }
    }
    if let Some(s) = open {
        out.push(Segment::new(s, labels.len() - 1));
    }
    out
}

/// Labels that [`extract_segments`] maps back onto `segments`; tokens not
/// covered are `O`.
pub fn segments_to_labels(segments: &[Segment], len: usize) -> Vec<Tag> {
    let mut out = vec![Tag::Outside; len];
    for s in segments {
        out[s.first] = Tag::Begin;
        for t in &mut out[s.first + 1..=s.last] {
            *t = Tag::Inside;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Tag::*;

    #[test]
    fn examples() {
        assert_eq!(
            extract_segments(&[Begin, Inside, Inside, Outside, Begin]),
            vec![Segment::new(0, 2), Segment::new(4, 4)]
        );
        assert_eq!(extract_segments(&[Outside, Inside, Inside]), vec![Segment::new(1, 2)]);
        assert!(extract_segments(&[Outside; 4]).is_empty());
        assert_eq!(extract_segments(&[Inside, Begin]), vec![Segment::new(0, 0), Segment::new(1, 1)]);
    }

    fn tag() -> impl Strategy<Value = Tag> {
        prop_oneof![Just(Begin), Just(Inside), Just(Outside)]
    }

    proptest! {
        #[test]
        fn segments_are_disjoint_and_ordered(labels in prop::collection::vec(tag(), 0..40)) {
            let segs = extract_segments(&labels);
            for w in segs.windows(2) {
                prop_assert!(w[0].last < w[1].first);
            }
            for s in &segs {
                prop_assert!(labels[s.first..=s.last].iter().all(|t| *t != Outside));
            }
            let covered: usize = segs.iter().map(Segment::len).sum();
            prop_assert_eq!(covered, labels.iter().filter(|t| **t != Outside).count());
        }

        #[test]
        fn canonical_labels_round_trip(labels in prop::collection::vec(tag(), 0..40)) {
            let segs = extract_segments(&labels);
            let canon = segments_to_labels(&segs, labels.len());
            prop_assert_eq!(extract_segments(&canon), segs);
        }
    }
}
