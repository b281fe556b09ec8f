use std::collections::BTreeSet;

use adasurv::dataset::Status;
use adasurv::estimators::{aalen_johansen, cause_specific_chf, kaplan_meier, nelson_aalen, RiskTable};
use proptest::prelude::*;

type Obs = (f64, Status, Option<u32>);

fn observations(max_causes: u32) -> impl Strategy<Value = Vec<Obs>> {
    prop::collection::vec((1u32..=8, 0u32..=max_causes), 1..=20).prop_map(|v| {
        v.into_iter()
            .map(|(t, c)| {
                let time = t as f64 * 0.5;
                if c == 0 {
                    (time, Status::Censored, None)
                } else {
                    (time, Status::Event, Some(c))
                }
            })
            .collect()
    })
}

fn at_risk(obs: &[Obs], s: f64) -> f64 {
    obs.iter().filter(|o| o.0 >= s).count() as f64
}

fn deaths(obs: &[Obs], s: f64, cause: Option<u32>) -> f64 {
    obs.iter()
        .filter(|o| o.0 == s && o.1 == Status::Event && (cause.is_none() || o.2 == cause))
        .count() as f64
}

fn event_times(obs: &[Obs]) -> Vec<f64> {
    let mut t: Vec<f64> = obs.iter().filter(|o| o.1 == Status::Event).map(|o| o.0).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn km_at(obs: &[Obs], t: f64, strict: bool) -> f64 {
    event_times(obs)
        .into_iter()
        .filter(|&s| if strict { s < t } else { s <= t })
        .map(|s| 1.0 - deaths(obs, s, None) / at_risk(obs, s))
        .product()
}

fn hazard_at(obs: &[Obs], t: f64, cause: Option<u32>) -> f64 {
    event_times(obs)
        .into_iter()
        .filter(|&s| s <= t)
        .map(|s| deaths(obs, s, cause) / at_risk(obs, s))
        .sum()
}

fn cif_at(obs: &[Obs], t: f64, cause: u32) -> f64 {
    event_times(obs)
        .into_iter()
        .filter(|&s| s <= t)
        .map(|s| km_at(obs, s, true) * deaths(obs, s, Some(cause)) / at_risk(obs, s))
        .sum()
}

fn grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.25).collect()
}

proptest! {
    #[test]
    fn single_event_estimators_match_definitions(obs in observations(1)) {
        let obs: Vec<Obs> = obs.into_iter().map(|(t, s, _)| (t, s, None)).collect();
        let table = RiskTable::from_observations(obs.iter().copied(), &BTreeSet::new()).unwrap();
        let km = kaplan_meier(&table);
        let na = nelson_aalen(&table);
        km.check_invariants().unwrap();
        na.check_invariants().unwrap();
        for t in grid() {
            prop_assert!((km.eval(t) - km_at(&obs, t, false)).abs() <= 1e-12);
            prop_assert!((na.eval(t) - hazard_at(&obs, t, None)).abs() <= 1e-12);
        }
    }

    #[test]
    fn competing_estimators_match_definitions(obs in observations(3)) {
        let declared: BTreeSet<u32> = [1, 2, 3].into();
        let table = RiskTable::from_observations(obs.iter().copied(), &declared).unwrap();
        let km = kaplan_meier(&table);
        let na = nelson_aalen(&table);
        for t in grid() {
            let mut total_f = 0.0;
            let mut total_h = 0.0;
            for c in 1..=3 {
                let f = aalen_johansen(&table, c).unwrap();
                let h = cause_specific_chf(&table, c).unwrap();
                prop_assert!((f.eval(t) - cif_at(&obs, t, c)).abs() <= 1e-12);
                prop_assert!((h.eval(t) - hazard_at(&obs, t, Some(c))).abs() <= 1e-12);
                total_f += f.eval(t);
                total_h += h.eval(t);
            }
            prop_assert!((km.eval(t) + total_f - 1.0).abs() <= 1e-10);
            prop_assert!((na.eval(t) - total_h).abs() <= 1e-10);
        }
    }

    #[test]
    fn curves_are_monotone(obs in observations(2)) {
        let table = RiskTable::from_observations(obs.iter().copied(), &[1, 2].into()).unwrap();
        let km = kaplan_meier(&table);
        prop_assert!(km.values.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(km.values.iter().all(|v| (0.0..=1.0).contains(v)));
        for c in [1, 2] {
            let f = aalen_johansen(&table, c).unwrap();
            prop_assert!(f.values.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

#[test]
fn unknown_cause_is_rejected() {
    let obs = [(1.0, Status::Event, Some(1))];
    let table = RiskTable::from_observations(obs, &BTreeSet::new()).unwrap();
    assert!(aalen_johansen(&table, 2).is_err());
    assert!(cause_specific_chf(&table, 2).is_err());
}
