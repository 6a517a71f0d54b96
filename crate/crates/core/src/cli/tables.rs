use crate::certify::EvalReport;
use crate::error::Result;
use crate::io::csv_string;

fn grid_union(reports: &[&EvalReport]) -> Vec<f64> {
    let mut grid: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.certified_accuracy.iter().map(|c| c.radius))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn acc_at(report: &EvalReport, r: f64) -> Option<f64> {
    report
        .certified_accuracy
        .iter()
        .find(|c| c.radius == r)
        .map(|c| c.accuracy)
}

/// One row per report: method, sigma, ACR, clean accuracy, abstain rate, accuracy at each radius.
pub fn summary_csv(reports: &[EvalReport]) -> Result<String> {
    let refs: Vec<&EvalReport> = reports.iter().collect();
    let grid = grid_union(&refs);
    let mut header: Vec<String> = ["method", "sigma", "acr", "clean_accuracy", "abstain_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(grid.iter().map(|r| format!("acc@{r}")));
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|rep| {
            let mut row = vec![
                rep.method.clone(),
                rep.sigma.to_string(),
                rep.acr.to_string(),
                rep.clean_accuracy.to_string(),
                rep.abstain_rate.to_string(),
            ];
            row.extend(
                grid.iter()
                    .map(|&r| acc_at(rep, r).map_or_else(String::new, |a| a.to_string())),
            );
            row
        })
        .collect();
    csv_string(&header, &rows)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per variant, aggregating that variant's per-seed reports.
pub fn ablation_csv(rows: &[(String, Vec<EvalReport>)]) -> Result<String> {
    let all: Vec<&EvalReport> = rows.iter().flat_map(|(_, r)| r.iter()).collect();
    let grid = grid_union(&all);
    let mut header: Vec<String> = [
        "variant",
        "sigma",
        "seeds",
        "acr_mean",
        "acr_std",
        "acr_min",
        "acr_max",
        "clean_accuracy_mean",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(grid.iter().map(|r| format!("acc@{r}_mean")));
    let mut out = Vec::with_capacity(rows.len());
    for (name, reps) in rows {
        let acr: Vec<f64> = reps.iter().map(|r| r.acr).collect();
        let (m, s) = mean_std(&acr);
        let min = acr.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = acr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let clean: Vec<f64> = reps.iter().map(|r| r.clean_accuracy).collect();
        let mut row = vec![
            name.clone(),
            reps.first().map_or(String::new(), |r| r.sigma.to_string()),
            reps.len().to_string(),
            m.to_string(),
            s.to_string(),
            min.to_string(),
            max.to_string(),
            mean_std(&clean).0.to_string(),
        ];
        for &r in &grid {
            let vals: Vec<f64> = reps.iter().filter_map(|rep| acc_at(rep, r)).collect();
            row.push(if vals.is_empty() {
                String::new()
            } else {
                mean_std(&vals).0.to_string()
            });
        }
        out.push(row);
    }
    csv_string(&header, &out)
}
