use crate::error::{Error, Result};
use crate::tags::{Tag, TagScheme};

/// Replaces each maximal run of `O` by a segment: its first token becomes
/// `B`, the rest `I`.
pub fn bio_to_bi(labels: &[Tag]) -> Vec<Tag> {
    let mut out = Vec::with_capacity(labels.len());
    let mut prev = None;
    for &tag in labels {
        out.push(match (tag, prev) {
            (Tag::Outside, Some(Tag::Outside)) => Tag::Inside,
            (Tag::Outside, _) => Tag::Begin,
            (t, _) => t,
        });
        prev = Some(tag);
    }
    out
}

/// Gold labels expressed in `scheme`.
pub fn convert_labels(labels: &[Tag], scheme: TagScheme) -> Vec<Tag> {
    match scheme {
        TagScheme::Bio => labels.to_vec(),
        TagScheme::Bi => bio_to_bi(labels),
    }
}

/// Token count of each segment of a BI sequence. A leading `I` opens a
/// segment.
pub fn segment_masses(labels: &[Tag]) -> Result<Vec<usize>> {
    let mut masses: Vec<usize> = Vec::new();
    for (i, &tag) in labels.iter().enumerate() {
        match tag {
            Tag::Outside => {
                return Err(Error::usage(format!(
                    "O label at position {i}: convert to BI before computing masses"
                )))
            }
            Tag::Begin => masses.push(1),
            Tag::Inside => match masses.last_mut() {
                Some(m) => *m += 1,
                None => masses.push(1),
            },
        }
    }
    Ok(masses)
}

/// Window size: half the mean reference segment mass, rounded, at least 1.
pub fn default_k(masses: &[usize]) -> usize {
    if masses.is_empty() {
        return 1;
    }
    let mean = masses.iter().sum::<usize>() as f64 / masses.len() as f64;
    ((mean / 2.0).round() as usize).max(1)
}

fn segment_ids(masses: &[usize]) -> Vec<usize> {
    masses
        .iter()
        .enumerate()
        .flat_map(|(s, &m)| std::iter::repeat_n(s, m))
        .collect()
}

/// P_k between two BI label sequences.
///
/// Scans windows `(i, i + k)` for `i` in `[0, n - k)` and counts those where
/// the endpoints share a segment in one sequence but not the other.
pub fn pk(reference: &[Tag], hypothesis: &[Tag], k: Option<usize>) -> Result<f64> {
    if reference.len() != hypothesis.len() {
        return Err(Error::usage(format!(
            "sequence lengths differ: {} vs {}",
            reference.len(),
            hypothesis.len()
        )));
    }
    let ref_masses = segment_masses(reference)?;
    let hyp_masses = segment_masses(hypothesis)?;
    let n = reference.len();
    let k = k.unwrap_or_else(|| default_k(&ref_masses));
    if k == 0 {
        return Err(Error::usage("window size must be positive"));
    }
    if n <= k {
        return Err(Error::data(format!(
            "document of {n} tokens is too short for window size {k}"
        )));
    }
    let r = segment_ids(&ref_masses);
    let h = segment_ids(&hyp_masses);
    let windows = n - k;
    let disagreements = (0..windows)
        .filter(|&i| (r[i] == r[i + k]) != (h[i] == h[i + k]))
        .count();
    Ok(disagreements as f64 / windows as f64)
}

/// P_k on labels in either scheme: both sides pass through [`bio_to_bi`]
/// first (a no-op on BI input).
pub fn pk_any_scheme(reference: &[Tag], hypothesis: &[Tag]) -> Result<f64> {
    pk(&bio_to_bi(reference), &bio_to_bi(hypothesis), None)
}
