//! Many synthetic subjects at once, one rayon task per subject.

use rayon::prelude::*;

use crate::agent::{simulate_session, AgentError, AgentParams};
use crate::experiment::{plan_session, TrialRecord};
use crate::session::SessionSetup;

/// Simulates subjects `0..subjects`, each with its own counterbalanced plan.
/// Records are sorted by subject, then method, then trial, so the output is
/// independent of scheduling.
pub fn simulate_batch(
    subjects: u32,
    setup: &SessionSetup,
    params: &AgentParams,
    seed: u64,
) -> Result<Vec<TrialRecord>, AgentError> {
    let per_subject: Vec<Vec<TrialRecord>> = (0..subjects)
        .into_par_iter()
        .map(|s| {
            let plan = plan_session(s, &setup.display, seed)?;
            simulate_session(&plan, setup, params, seed)
        })
        .collect::<Result<_, _>>()?;
    let mut records: Vec<TrialRecord> = per_subject.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.subject, r.method, r.trial));
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_is_schedule_independent() {
        let setup = SessionSetup::default();
        let p = AgentParams::default();
        let a = simulate_batch(2, &setup, &p, 4).unwrap();
        assert_eq!(a.len(), 720);
        let one = simulate_session(&plan_session(1, &setup.display, 4).unwrap(), &setup, &p, 4).unwrap();
        let mut one_sorted = one.clone();
        one_sorted.sort_by_key(|r| (r.method, r.trial));
        assert_eq!(&a[360..], &one_sorted[..]);
    }
}
