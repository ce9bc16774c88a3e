//! Per-step conservation check: Δ_new = Δ_old − Ξ′ + Δ′ and Γ_new = Γ_old ∪ Γ′,
//! restricted to the facts that live at the stepping node.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::Outcome;
use crate::ir::Fact;

pub(crate) struct Snapshot {
    linear: BTreeMap<Fact, usize>,
    persistent: BTreeSet<Fact>,
}

impl Snapshot {
    pub fn of(db: &crate::database::NodeDatabase) -> Self {
        Snapshot { linear: db.linear_multiset(), persistent: db.persistent_set() }
    }
}

/// Checks a committed step. `before` is the database before the step and
/// `after` the database once the outcome was committed.
pub fn audit_step(
    before_linear: &BTreeMap<Fact, usize>,
    before_persistent: &BTreeSet<Fact>,
    o: &Outcome,
    after: &crate::database::NodeDatabase,
) -> Result<(), String> {
    let mut linear = before_linear.clone();
    for (_, f) in &o.consumed {
        match linear.get_mut(f) {
            Some(n) if *n > 1 => *n -= 1,
            Some(_) => {
                linear.remove(f);
            }
            None => return Err(format!("consumed fact {f:?} was not present")),
        }
    }
    let mut persistent = before_persistent.clone();
    for f in o.derived.iter().filter(|f| f.home() == o.node) {
        if f.linear {
            *linear.entry(f.clone()).or_insert(0) += 1;
        } else {
            persistent.insert(f.clone());
        }
    }
    if linear != after.linear_multiset() {
        return Err("linear context differs from old - consumed + derived".into());
    }
    let now = after.persistent_set();
    if !before_persistent.is_subset(&now) {
        return Err("persistent context shrank".into());
    }
    if persistent != now {
        return Err("persistent context differs from old + derived".into());
    }
    Ok(())
}

pub(crate) fn check(before: &Snapshot, o: &Outcome, after: &crate::database::NodeDatabase) -> Result<(), String> {
    audit_step(&before.linear, &before.persistent, o, after)
}
