use super::ObservationPanel;

/// Default minimum number of non-missing rows for a station to be kept.
pub const MIN_RECORDS: usize = 50;

/// Stations dropped by [`rank_transform`] for having too few records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankReport {
    pub excluded: Vec<String>,
}

/// Pseudo-uniform scores rank/(n_j + 1) per station over its non-missing
/// rows, with average ranks for ties. Stations with fewer than `min_records`
/// observations are dropped from the returned panel.
pub fn rank_transform(panel: &ObservationPanel, min_records: usize) -> (ObservationPanel, RankReport) {
    let counts = panel.record_counts();
    let keep: Vec<usize> = (0..panel.n_cols()).filter(|&j| counts[j] >= min_records).collect();
    let mut report = RankReport::default();
    for j in (0..panel.n_cols()).filter(|j| !keep.contains(j)) {
        log::warn!(
            "station {} has {} records (< {min_records}); excluded",
            panel.ids()[j],
            counts[j]
        );
        report.excluded.push(panel.ids()[j].clone());
    }
    let mut out = if keep.len() == panel.n_cols() {
        panel.clone()
    } else {
        panel.select_columns(&keep)
    };
    let (n, d) = (out.n_rows(), out.n_cols());
    let mut scores = vec![f64::NAN; n * d];
    let mut col: Vec<(f64, usize)> = Vec::with_capacity(n);
    for j in 0..d {
        col.clear();
        col.extend((0..n).filter_map(|i| out.value(i, j).map(|v| (v, i))));
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        let denom = col.len() as f64 + 1.0;
        let mut start = 0;
        while start < col.len() {
            let mut end = start + 1;
            while end < col.len() && col[end].0 == col[start].0 {
                end += 1;
            }
            // ranks start+1 ..= end share their mean
            let rank = 0.5 * ((start + 1) + end) as f64;
            for &(_, i) in &col[start..end] {
                scores[i * d + j] = rank / denom;
            }
            start = end;
        }
    }
    out.set_scores(scores);
    (out, report)
}
