use crate::error::{Error, Result};

fn check(submits: &[(bool, f64)]) -> Result<()> {
    if submits.is_empty() {
        return Err(Error::Undefined("no submitted surveys".into()));
    }
    if let Some((_, p)) = submits.iter().find(|(_, p)| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::InvalidInput(format!(
            "submit propensity must be in (0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Self-normalized inverse-propensity rate: the summed inverse propensity of
/// flagged submits over that of all submits. Equal propensities give back
/// the raw flagged share exactly.
pub fn debiased_issue_rate(submits: &[(bool, f64)]) -> Result<f64> {
    check(submits)?;
    // Weights relative to the smallest propensity: identical propensities
    // then weigh exactly 1.0 each.
    let p_min = submits.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let (mut flagged, mut total) = (0.0, 0.0);
    for &(issue, p) in submits {
        let w = p_min / p;
        total += w;
        if issue {
            flagged += w;
        }
    }
    Ok(flagged / total)
}

/// Unnormalized Horvitz–Thompson rate over `shows` survey shows.
pub fn horvitz_thompson_rate(submits: &[(bool, f64)], shows: usize) -> Result<f64> {
    check(submits)?;
    if shows < submits.len() {
        return Err(Error::InvalidInput(format!(
            "{} submits cannot come from {shows} shows",
            submits.len()
        )));
    }
    let flagged: f64 = submits.iter().filter(|(f, _)| *f).map(|(_, p)| 1.0 / p).sum();
    Ok(flagged / shows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_submit_example() {
        let r = debiased_issue_rate(&[(false, 0.5), (true, 0.25)]).unwrap();
        assert!((r - 4.0 / 6.0).abs() < 1e-15);
        assert!((r - 0.666667).abs() < 1e-6);
    }

    #[test]
    fn rejects_empty_and_nonpositive() {
        assert!(debiased_issue_rate(&[]).is_err());
        assert!(debiased_issue_rate(&[(true, 0.0)]).is_err());
        assert!(debiased_issue_rate(&[(true, -0.1)]).is_err());
        assert!(debiased_issue_rate(&[(true, 1.5)]).is_err());
        assert!(horvitz_thompson_rate(&[(true, 0.5)], 0).is_err());
    }

    #[test]
    fn horvitz_thompson_example() {
        // 2 flagged submits at p=0.5 out of 8 shows: (2 + 2) / 8.
        let r = horvitz_thompson_rate(&[(true, 0.5), (true, 0.5), (false, 0.5)], 8).unwrap();
        assert_eq!(r, 0.5);
    }

    fn submits() -> impl Strategy<Value = Vec<(bool, f64)>> {
        prop::collection::vec((any::<bool>(), 0.01f64..=1.0), 1..200)
    }

    proptest! {
        #[test]
        fn rate_is_a_probability(s in submits()) {
            let r = debiased_issue_rate(&s).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn invariant_to_common_scaling(s in submits(), c in 0.01f64..=1.0) {
            let scaled: Vec<(bool, f64)> = s.iter().map(|&(f, p)| (f, p * c)).collect();
            let a = debiased_issue_rate(&s).unwrap();
            let b = debiased_issue_rate(&scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }

        #[test]
        fn uniform_propensity_gives_raw_rate(flags in prop::collection::vec(any::<bool>(), 1..200), p in 0.01f64..=1.0) {
            let s: Vec<(bool, f64)> = flags.iter().map(|&f| (f, p)).collect();
            let raw = flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64;
            prop_assert_eq!(debiased_issue_rate(&s).unwrap(), raw);
        }
    }
}
