//! Position-wise sequence identity and the hard sequence-conflict subset.

use crate::error::{Error, Result};

/// Truncation applied before comparing sequences.
pub const IDENTITY_TRUNCATION: usize = 300;

/// Gap-free position-wise identity: both sequences truncated to 300
/// residues, matched position by position, divided by the shorter
/// truncated length. Symmetric in its arguments.
pub fn sequence_identity(a: &str, b: &str) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("sequence_identity requires nonempty sequences".into()));
    }
    let a = a.as_bytes();
    let b = b.as_bytes();
    let la = a.len().min(IDENTITY_TRUNCATION);
    let lb = b.len().min(IDENTITY_TRUNCATION);
    let n = la.min(lb);
    let matches = a[..n].iter().zip(&b[..n]).filter(|(x, y)| x == y).count();
    Ok(matches as f64 / n as f64)
}

/// Indices of the hard sequence-conflict subset: positives in the lowest
/// identity quartile and negatives in the highest, with quartile cutoffs
/// computed separately within each class. Requires at least 4 pairs per
/// class.
pub fn hard_subset(identities: &[f64], labels: &[u8]) -> Result<Vec<usize>> {
    if identities.len() != labels.len() {
        return Err(Error::Domain(format!(
            "hard_subset lengths disagree: {} identities, {} labels",
            identities.len(),
            labels.len()
        )));
    }
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for (i, &y) in labels.iter().enumerate() {
        match y {
            1 => pos.push(i),
            0 => neg.push(i),
            other => return Err(Error::Domain(format!("labels must be 0/1, got {other}"))),
        }
    }
    if pos.len() < 4 || neg.len() < 4 {
        return Err(Error::Domain(format!(
            "hard_subset needs at least 4 pairs per class, got {} / {}",
            pos.len(),
            neg.len()
        )));
    }
    let quartile = |members: &[usize], lowest: bool| -> f64 {
        let mut vals: Vec<f64> = members.iter().map(|&i| identities[i]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = (members.len() / 4).max(1);
        if lowest {
            vals[k - 1]
        } else {
            vals[vals.len() - k]
        }
    };
    let pos_cutoff = quartile(&pos, true);
    let neg_cutoff = quartile(&neg, false);
    let mut keep: Vec<usize> = Vec::new();
    for &i in &pos {
        if identities[i] <= pos_cutoff {
            keep.push(i);
        }
    }
    for &i in &neg {
        if identities[i] >= neg_cutoff {
            keep.push(i);
        }
    }
    keep.sort_unstable();
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn identity_worked_examples() {
        assert_eq!(sequence_identity("MKVA", "MKVA").unwrap(), 1.0);
        assert_eq!(sequence_identity("AAAA", "AAAT").unwrap(), 0.75);
        assert!(sequence_identity("", "AA").is_err());
    }

    #[test]
    fn identity_ignores_positions_beyond_truncation() {
        let a: String = std::iter::repeat('A').take(400).collect();
        let mut b_chars: Vec<char> = a.chars().collect();
        b_chars[349] = 'T'; // mismatch beyond the 300-residue window
        let b: String = b_chars.into_iter().collect();
        assert_eq!(sequence_identity(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn identity_denominator_is_shorter_truncated_length() {
        // 4 vs 8 residues: compared over 4 positions.
        assert_eq!(sequence_identity("MKVA", "MKVAXXXX").unwrap(), 1.0);
        assert_eq!(
            sequence_identity("MKVA", "MKTTXXXX").unwrap(),
            0.5
        );
    }

    #[test]
    fn identity_is_symmetric() {
        let mut rng = Stream::new(81, &["seq"]);
        let alphabet = b"ACDEFGHIKLMNPQRSTVWY";
        for _ in 0..20 {
            let len_a = 5 + rng.next_below(400) as usize;
            let len_b = 5 + rng.next_below(400) as usize;
            let a: String = (0..len_a)
                .map(|_| alphabet[rng.next_below(20) as usize] as char)
                .collect();
            let b: String = (0..len_b)
                .map(|_| alphabet[rng.next_below(20) as usize] as char)
                .collect();
            assert_eq!(
                sequence_identity(&a, &b).unwrap(),
                sequence_identity(&b, &a).unwrap()
            );
        }
    }

    // Exhaustive sort-and-cut oracle.
    fn hard_subset_oracle(identities: &[f64], labels: &[u8]) -> Vec<usize> {
        let take = |target: u8, lowest: bool| -> Vec<usize> {
            let mut members: Vec<usize> = (0..labels.len())
                .filter(|&i| labels[i] == target)
                .collect();
            members.sort_by(|&a, &b| identities[a].partial_cmp(&identities[b]).unwrap());
            let k = (members.len() / 4).max(1);
            let cutoff = if lowest {
                identities[members[k - 1]]
            } else {
                identities[members[members.len() - k]]
            };
            members
                .into_iter()
                .filter(|&i| {
                    if lowest {
                        identities[i] <= cutoff
                    } else {
                        identities[i] >= cutoff
                    }
                })
                .collect()
        };
        let mut keep = take(1, true);
        keep.extend(take(0, false));
        keep.sort_unstable();
        keep
    }

    #[test]
    fn hard_subset_matches_sort_oracle_and_retains_a_quarter() {
        let mut rng = Stream::new(82, &["hard"]);
        for trial in 0..20 {
            let n = 40 + rng.next_below(200) as usize;
            let identities: Vec<f64> = (0..n).map(|_| rng.next_unit()).collect();
            let labels: Vec<u8> = (0..n).map(|_| (rng.next_unit() < 0.5) as u8).collect();
            let n_pos = labels.iter().filter(|&&y| y == 1).count();
            let n_neg = n - n_pos;
            if n_pos < 4 || n_neg < 4 {
                continue;
            }
            let got = hard_subset(&identities, &labels).unwrap();
            let want = hard_subset_oracle(&identities, &labels);
            assert_eq!(got, want, "trial {trial}");
            // Continuous identities: exactly floor(n/4) per class.
            let kept_pos = got.iter().filter(|&&i| labels[i] == 1).count();
            let kept_neg = got.iter().filter(|&&i| labels[i] == 0).count();
            assert_eq!(kept_pos, (n_pos / 4).max(1));
            assert_eq!(kept_neg, (n_neg / 4).max(1));
        }
    }

    #[test]
    fn retained_positives_sit_below_the_class_cutoff() {
        let mut rng = Stream::new(83, &["hard2"]);
        let n = 100;
        let identities: Vec<f64> = (0..n).map(|_| rng.next_unit()).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let keep = hard_subset(&identities, &labels).unwrap();
        let max_kept_pos = keep
            .iter()
            .filter(|&&i| labels[i] == 1)
            .map(|&i| identities[i])
            .fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            if labels[i] == 1 && !keep.contains(&i) {
                assert!(identities[i] > max_kept_pos);
            }
        }
    }

    #[test]
    fn small_classes_are_rejected() {
        let identities = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let labels = vec![1, 1, 1, 0, 0];
        assert!(hard_subset(&identities, &labels).is_err());
    }
}
