use std::collections::BTreeMap;

use super::{Dataset, SplitPair};
use crate::error::{LabError, Result};
use crate::rng::{rng_for, shuffle};

/// Splits `dataset` into two halves without letting any group straddle them.
///
/// Groups are visited in a seeded order and an exact subset-sum over group
/// sizes picks the achievable `|d1|` closest to `fraction * |D|` (ties go to
/// the smaller count). Both sides are always non-empty.
pub fn grouped_split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(LabError::InvalidArgument(format!("split fraction {fraction} outside (0,1)")));
    }
    let mut members: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, ex) in dataset.examples.iter().enumerate() {
        members.entry(ex.group_id).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(LabError::Split(format!(
            "dataset {} has a single group; any split would leak it",
            dataset.task_id
        )));
    }
    let mut groups: Vec<Vec<usize>> = members.into_values().collect();
    shuffle(&mut groups, &mut rng_for(seed, "grouped-split"));

    let n = dataset.len();
    // first[c] = index of the group that first made count c reachable.
    let mut first: Vec<Option<usize>> = vec![None; n + 1];
    let mut reachable = vec![false; n + 1];
    reachable[0] = true;
    for (gi, g) in groups.iter().enumerate() {
        let s = g.len();
        for c in (s..=n).rev() {
            if !reachable[c] && reachable[c - s] {
                reachable[c] = true;
                first[c] = Some(gi);
            }
        }
    }
    let target = fraction * n as f64;
    let best = (1..n)
        .filter(|&c| reachable[c])
        .min_by(|&a, &b| {
            let da = (a as f64 - target).abs();
            let db = (b as f64 - target).abs();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        })
        .ok_or_else(|| LabError::Split("no proper subset of groups exists".into()))?;

    let mut in_d1 = vec![false; n];
    let mut c = best;
    while c > 0 {
        let gi = first[c].expect("reachable counts have a witness");
        for &i in &groups[gi] {
            in_d1[i] = true;
        }
        c -= groups[gi].len();
    }
    let (d1, d2): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_d1[i]);
    Ok(SplitPair {
        d1: dataset.subset(&d1)?,
        d2: dataset.subset(&d2)?,
    })
}
