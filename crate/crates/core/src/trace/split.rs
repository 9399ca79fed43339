use std::collections::BTreeSet;

use super::SessionTrace;
use crate::error::{Error, Result};

/// Splits sessions so that no reference content appears on both sides.
pub fn split_by_content<S: AsRef<str>>(
    data: &[SessionTrace],
    test_contents: &[S],
) -> Result<(Vec<SessionTrace>, Vec<SessionTrace>)> {
    let present: BTreeSet<&str> = data.iter().map(|s| s.source_content.as_str()).collect();
    let wanted: BTreeSet<&str> = test_contents.iter().map(|s| s.as_ref()).collect();
    if wanted.is_empty() {
        return Err(Error::invalid("test content set is empty"));
    }
    if let Some(missing) = wanted.iter().find(|c| !present.contains(*c)) {
        return Err(Error::UnknownContent(missing.to_string()));
    }
    if wanted.len() == present.len() {
        return Err(Error::invalid(
            "every content is held out; training set would be empty",
        ));
    }
    let (test, train): (Vec<_>, Vec<_>) = data
        .iter()
        .cloned()
        .partition(|s| wanted.contains(s.source_content.as_str()));
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TimeSeries;

    fn data() -> Vec<SessionTrace> {
        ["A", "B", "C"]
            .iter()
            .flat_map(|c| {
                (0..5).map(move |i| {
                    let s = TimeSeries::new(vec![1.0, 2.0], 1.0, 0.0).unwrap();
                    SessionTrace::new(format!("{c}{i}"), *c, vec![("q".into(), s)], None).unwrap()
                })
            })
            .collect()
    }

    #[test]
    fn ten_five_split() {
        let (train, test) = split_by_content(&data(), &["C"]).unwrap();
        assert_eq!((train.len(), test.len()), (10, 5));
        assert!(test.iter().all(|s| s.source_content == "C"));
        assert!(train.iter().all(|s| s.source_content != "C"));
    }

    #[test]
    fn degenerate_splits_rejected() {
        assert!(split_by_content(&data(), &["A", "B", "C"]).is_err());
        assert!(split_by_content::<&str>(&data(), &[]).is_err());
        assert!(matches!(
            split_by_content(&data(), &["Z"]),
            Err(Error::UnknownContent(c)) if c == "Z"
        ));
    }

    #[test]
    fn partition_is_exhaustive() {
        let d = data();
        let (train, test) = split_by_content(&d, &["A", "C"]).unwrap();
        assert_eq!(train.len() + test.len(), d.len());
        for s in &train {
            assert!(!test.iter().any(|t| t.id == s.id));
        }
    }
}
