use thiserror::Error;

use super::StateId;

/// Tolerance on total probability mass when a distribution is loaded.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("empty distribution")]
    Empty,
    #[error("probability {probability} of successor {successor} is not in (0, 1]")]
    InvalidProbability { successor: StateId, probability: f64 },
    #[error("duplicate successor {0}")]
    DuplicateSuccessor(StateId),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
}

/// `T(s, a, ·)` as a sparse list of successors with strictly positive
/// probabilities, sorted by successor id.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    entries: Vec<(StateId, f64)>,
}

impl OutcomeDistribution {
    /// Validates and renormalizes. Mass within [`PROB_TOLERANCE`] of 1 is
    /// rescaled to sum to 1; anything further off is rejected.
    pub fn new(mut entries: Vec<(StateId, f64)>) -> Result<Self, DistributionError> {
        if entries.is_empty() {
            return Err(DistributionError::Empty);
        }
        entries.sort_by_key(|&(s, _)| s);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DistributionError::DuplicateSuccessor(w[0].0));
            }
        }
        for &(successor, probability) in &entries {
            if !(probability > 0.0 && probability <= 1.0 + PROB_TOLERANCE) {
                return Err(DistributionError::InvalidProbability {
                    successor,
                    probability,
                });
            }
        }
        let mass: f64 = entries.iter().map(|&(_, p)| p).sum();
        if (mass - 1.0).abs() > PROB_TOLERANCE {
            return Err(DistributionError::NotNormalized(mass));
        }
        for e in &mut entries {
            e.1 /= mass;
        }
        Ok(Self { entries })
    }

    /// Builds a distribution from possibly repeated successors, summing their
    /// weights and dropping zero-weight entries.
    pub fn merged<I>(weighted: I) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = (StateId, f64)>,
    {
        let mut entries: Vec<(StateId, f64)> = weighted.into_iter().filter(|&(_, p)| p != 0.0).collect();
        entries.sort_by_key(|&(s, _)| s);
        let mut out: Vec<(StateId, f64)> = Vec::with_capacity(entries.len());
        for (s, p) in entries {
            match out.last_mut() {
                Some(last) if last.0 == s => last.1 += p,
                _ => out.push((s, p)),
            }
        }
        Self::new(out)
    }

    /// Stores entries as given (sorted by successor) without any checks.
    /// Used when loading raw models that are validated afterwards.
    pub fn unchecked(mut entries: Vec<(StateId, f64)>) -> Self {
        entries.sort_by_key(|&(s, _)| s);
        Self { entries }
    }

    pub fn deterministic(successor: StateId) -> Self {
        Self {
            entries: vec![(successor, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(StateId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_deterministic(&self) -> bool {
        self.entries.len() == 1
    }

    pub fn probability(&self, s: StateId) -> f64 {
        self.entries
            .binary_search_by_key(&s, |&(t, _)| t)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.entries.binary_search_by_key(&s, |&(t, _)| t).is_ok()
    }

    /// `θ(s, a)`: successors with positive probability.
    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.entries.iter().map(|&(s, _)| s)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    /// Inverse-CDF sampling with `u` uniform in `[0, 1)`.
    pub fn sample(&self, u: f64) -> StateId {
        let mut acc = 0.0;
        for &(s, p) in &self.entries {
            acc += p;
            if u < acc {
                return s;
            }
        }
        self.entries.last().expect("non-empty distribution").0
    }

    /// `Σ T(s,a,s')·V(s')`.
    pub fn expectation(&self, mut value: impl FnMut(StateId) -> f64) -> f64 {
        self.entries.iter().map(|&(s, p)| p * value(s)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(i: u32) -> StateId {
        StateId(i)
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let d = OutcomeDistribution::new(vec![(s(1), 0.5 + 4e-10), (s(0), 0.5)]).unwrap();
        assert_eq!(d.entries()[0].0, s(0));
        assert!((d.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_short_mass() {
        let err = OutcomeDistribution::new(vec![(s(0), 0.5), (s(1), 0.4)]).unwrap_err();
        assert!(matches!(err, DistributionError::NotNormalized(m) if (m - 0.9).abs() < 1e-12));
    }

    #[test]
    fn rejects_duplicates_and_zero() {
        assert_eq!(
            OutcomeDistribution::new(vec![(s(2), 0.5), (s(2), 0.5)]),
            Err(DistributionError::DuplicateSuccessor(s(2)))
        );
        assert!(matches!(
            OutcomeDistribution::new(vec![(s(0), 1.0), (s(1), 0.0)]),
            Err(DistributionError::InvalidProbability { .. })
        ));
        assert_eq!(OutcomeDistribution::new(vec![]), Err(DistributionError::Empty));
    }

    #[test]
    fn merged_sums_duplicates() {
        let d = OutcomeDistribution::merged([(s(3), 0.25), (s(1), 0.5), (s(3), 0.25), (s(7), 0.0)]).unwrap();
        assert_eq!(d.entries(), &[(s(1), 0.5), (s(3), 0.5)]);
    }

    #[test]
    fn sampling_follows_cdf() {
        let d = OutcomeDistribution::new(vec![(s(0), 0.25), (s(1), 0.75)]).unwrap();
        assert_eq!(d.sample(0.0), s(0));
        assert_eq!(d.sample(0.2499), s(0));
        assert_eq!(d.sample(0.25), s(1));
        assert_eq!(d.sample(0.999_999), s(1));
    }
}
