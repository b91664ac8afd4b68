//! Error taxonomy as an explicit truth table over three equalities.

/// Category name for one row, `None` when the student is right.
///
/// Keyed by (student == truth, weak == truth, student == weak).
pub fn categorize_rule(student: usize, weak: usize, truth: usize) -> Option<&'static str> {
    const TABLE: [((bool, bool, bool), Option<&str>); 8] = [
        ((true, true, true), None),
        ((true, true, false), None),
        ((true, false, true), None),
        ((true, false, false), None),
        ((false, true, true), Some("evidence_extraction")),
        ((false, true, false), Some("evidence_extraction")),
        ((false, false, true), Some("overfit_weak_errors")),
        ((false, false, false), Some("selection_other")),
    ];
    let key = (student == truth, weak == truth, student == weak);
    TABLE.iter().find(|(k, _)| *k == key).expect("table is total").1
}

/// Counts in the order overfit_weak_errors, evidence_extraction, selection_other.
pub fn histogram(rows: &[(usize, usize, usize)]) -> [usize; 3] {
    let mut h = [0; 3];
    for &(s, w, t) in rows {
        match categorize_rule(s, w, t) {
            Some("overfit_weak_errors") => h[0] += 1,
            Some("evidence_extraction") => h[1] += 1,
            Some("selection_other") => h[2] += 1,
            _ => {}
        }
    }
    h
}
