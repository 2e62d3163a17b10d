use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Entity, EntityType};

/// Half-open character span of a segment.
pub type CharSpan = (usize, usize);

fn overlap(a: CharSpan, b: CharSpan) -> usize {
    a.1.min(b.1).saturating_sub(a.0.max(b.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    /// `tp / (tp + fp)`; with nothing predicted this is 1 when nothing was
    /// missed and 0 otherwise.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp, self.fn_ == 0)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_, self.fp == 0)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    pub fn add(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: usize, den: usize, empty_ok: bool) -> f64 {
    if den == 0 {
        if empty_ok {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

/// Counts per entity type; every type is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCounts {
    pub per_type: BTreeMap<EntityType, Counts>,
}

impl Default for TaskCounts {
    fn default() -> Self {
        TaskCounts {
            per_type: EntityType::ALL.iter().map(|&t| (t, Counts::default())).collect(),
        }
    }
}

impl TaskCounts {
    pub fn total(&self) -> Counts {
        let mut c = Counts::default();
        for v in self.per_type.values() {
            c.add(v);
        }
        c
    }

    pub fn add(&mut self, other: &TaskCounts) {
        for (t, c) in &other.per_type {
            self.per_type.entry(*t).or_default().add(c);
        }
    }

    fn bump(&mut self, kind: EntityType, f: impl FnOnce(&mut Counts)) {
        f(self.per_type.entry(kind).or_default());
    }
}

fn check_disjoint(spans: &[CharSpan], what: &str) -> Result<()> {
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::data(format!(
                "{what} segments overlap: [{}, {}) and [{}, {})",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    if let Some(s) = spans.iter().find(|s| s.0 >= s.1) {
        return Err(Error::data(format!("empty {what} segment [{}, {})", s.0, s.1)));
    }
    Ok(())
}

/// The segment holding the majority of the entity's characters, if any.
/// An even split goes to the earlier segment.
fn containing(entity: &Entity, spans: &[CharSpan]) -> Option<usize> {
    let e = (entity.start, entity.end);
    let mut best: Option<(usize, usize)> = None;
    for (i, &s) in spans.iter().enumerate() {
        let o = overlap(e, s);
        if o > 0 && best.is_none_or(|(_, b)| o > b) {
            best = Some((i, o));
        }
    }
    best.filter(|&(_, o)| 2 * o >= entity.len()).map(|(i, _)| i)
}

/// Matches each gold segment to the predicted segment sharing the most
/// characters (earliest on ties) and scores the entities the two contain.
///
/// Gold segments with no overlapping prediction contribute all of their
/// entities as false negatives. Spans must be sorted and disjoint.
pub fn task_eval(entities: &[Entity], gold: &[CharSpan], predicted: &[CharSpan]) -> Result<TaskCounts> {
    check_disjoint(gold, "gold")?;
    check_disjoint(predicted, "predicted")?;
    let mut in_gold: Vec<BTreeSet<Entity>> = vec![BTreeSet::new(); gold.len()];
    let mut in_pred: Vec<BTreeSet<Entity>> = vec![BTreeSet::new(); predicted.len()];
    for e in entities {
        if let Some(g) = containing(e, gold) {
            in_gold[g].insert(*e);
        }
        if let Some(p) = containing(e, predicted) {
            in_pred[p].insert(*e);
        }
    }

    let mut counts = TaskCounts::default();
    for (g, &gspan) in gold.iter().enumerate() {
        let mut best: Option<(usize, usize)> = None;
        for (p, &pspan) in predicted.iter().enumerate() {
            let o = overlap(gspan, pspan);
            if o > 0 && best.is_none_or(|(_, b)| o > b) {
                best = Some((p, o));
            }
        }
        let empty = BTreeSet::new();
        let matched = best.map_or(&empty, |(p, _)| &in_pred[p]);
        for e in &in_gold[g] {
            if matched.contains(e) {
                counts.bump(e.kind, |c| c.tp += 1);
            } else {
                counts.bump(e.kind, |c| c.fn_ += 1);
            }
        }
        for e in matched.difference(&in_gold[g]) {
            counts.bump(e.kind, |c| c.fp += 1);
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use EntityType::*;

    fn two_announcements() -> Vec<Entity> {
        vec![
            Entity::new(Bride, 10, 20),
            Entity::new(Groom, 30, 40),
            Entity::new(Bride, 110, 120),
            Entity::new(Groom, 130, 140),
        ]
    }

    #[test]
    fn perfect() {
        let gold = [(0, 100), (100, 200)];
        let c = task_eval(&two_announcements(), &gold, &gold).unwrap();
        for t in EntityType::ALL {
            let v = c.per_type[&t];
            assert_eq!((v.precision(), v.recall(), v.f1()), (1.0, 1.0, 1.0));
        }
        assert_eq!(c.total(), Counts { tp: 4, fp: 0, fn_: 0 });
    }

    #[test]
    fn merged_prediction() {
        let c = task_eval(&two_announcements(), &[(0, 100), (100, 200)], &[(0, 200)]).unwrap();
        let t = c.total();
        assert_eq!(t, Counts { tp: 4, fp: 4, fn_: 0 });
        assert_eq!(t.precision(), 0.5);
        assert_eq!(t.recall(), 1.0);
    }

    #[test]
    fn missed_segment() {
        let c = task_eval(&two_announcements(), &[(0, 100), (100, 200)], &[(0, 100)]).unwrap();
        assert_eq!(c.total(), Counts { tp: 2, fp: 0, fn_: 2 });
        assert_eq!(c.total().recall(), 0.5);
    }

    #[test]
    fn majority_and_ties() {
        // an entity split evenly between two predicted segments goes to the first
        let e = [Entity::new(Groom, 95, 105)];
        assert_eq!(containing(&e[0], &[(0, 100), (100, 200)]), Some(0));
        assert_eq!(containing(&e[0], &[(0, 99), (99, 200)]), Some(1));
        // a gold segment overlapping two predictions equally matches the earlier
        let c = task_eval(&[Entity::new(Bride, 60, 70)], &[(40, 80)], &[(0, 60), (60, 80)]).unwrap();
        assert_eq!(c.total(), Counts { tp: 0, fp: 0, fn_: 1 });
    }

    #[test]
    fn overlapping_predictions_rejected() {
        assert!(task_eval(&[], &[(0, 10)], &[(0, 6), (5, 10)]).is_err());
    }

    #[test]
    fn f1_is_harmonic_mean() {
        let c = Counts { tp: 3, fp: 1, fn_: 2 };
        let (p, r) = (0.75, 0.6);
        assert!((c.f1() - 2.0 * p * r / (p + r)).abs() < 1e-15);
        assert_eq!(Counts { tp: 0, fp: 2, fn_: 3 }.f1(), 0.0);
    }
}
