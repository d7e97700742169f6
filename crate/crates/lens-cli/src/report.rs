//! `report`: renders `aggregates.csv` as fixed-order pivot tables,
//! one per (regime, attack, epsilon) group with a `(k, w)` row per
//! parameter pair and a column per metric.

use std::fs;
use std::path::Path;

use crate::config::{AttackKind, MetricKind, Regime};
use crate::error::{CliError, CliResult};
use crate::run::AGGREGATES_HEADER;

struct ParsedRow {
    regime: Regime,
    attack: AttackKind,
    metric: MetricKind,
    k: usize,
    w: usize,
    epsilon: String,
    mean: f64,
}

fn parse_aggregates(path: &Path) -> CliResult<Vec<ParsedRow>> {
    let body = fs::read_to_string(path).map_err(|e| {
        CliError::Data(format!("cannot read {}: {e} (run `lens evaluate` first)", path.display()))
    })?;
    let mut lines = body.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == AGGREGATES_HEADER => {}
        _ => {
            return Err(CliError::Data(format!(
                "{}: expected header `{AGGREGATES_HEADER}`",
                path.display()
            )))
        }
    }
    let bad = |line: usize, detail: &str| {
        CliError::Data(format!("{}:{}: {detail}", path.display(), line + 1))
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(bad(i, "expected 9 fields"));
        }
        let regime: Regime =
            fields[0].parse().map_err(|_| bad(i, "unknown regime"))?;
        let attack: AttackKind =
            fields[1].parse().map_err(|_| bad(i, "unknown attack id"))?;
        let metric: MetricKind =
            fields[2].parse().map_err(|_| bad(i, "unknown metric id"))?;
        let k = fields[3].parse().map_err(|_| bad(i, "bad k"))?;
        let w = fields[4].parse().map_err(|_| bad(i, "bad w"))?;
        let mean: f64 = fields[6].parse().map_err(|_| bad(i, "bad mean"))?;
        rows.push(ParsedRow {
            regime,
            attack,
            metric,
            k,
            w,
            epsilon: fields[5].to_string(),
            mean,
        });
    }
    Ok(rows)
}

fn render(rows: &[ParsedRow]) -> String {
    // Column set: metrics that appear anywhere, in canonical order.
    let columns: Vec<MetricKind> = MetricKind::REPORT_ORDER
        .iter()
        .copied()
        .filter(|m| rows.iter().any(|r| r.metric == *m))
        .collect();

    // Group keys in file order (the file is already sorted, but group
    // boundaries interleave, so collect unique keys first).
    let mut groups: Vec<(Regime, AttackKind, String)> = Vec::new();
    for r in rows {
        let key = (r.regime, r.attack, r.epsilon.clone());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    groups.sort_by(|a, b| {
        (a.0.id(), a.1.id(), &a.2).cmp(&(b.0.id(), b.1.id(), &b.2))
    });

    let mut out = String::new();
    for (regime, attack, eps) in &groups {
        let eps_pretty: f64 = eps.parse().unwrap_or(f64::NAN);
        out.push_str(&format!(
            "== regime {} | attack {} | epsilon {:.4}\n",
            regime.id(),
            attack.id(),
            eps_pretty
        ));
        let group: Vec<&ParsedRow> = rows
            .iter()
            .filter(|r| r.regime == *regime && r.attack == *attack && r.epsilon == *eps)
            .collect();
        let mut kw: Vec<(usize, usize)> =
            group.iter().map(|r| (r.k, r.w)).collect();
        kw.sort_unstable();
        kw.dedup();

        out.push_str(&format!("{:>4} {:>3}", "k", "w"));
        for m in &columns {
            out.push_str(&format!(" {:>16}", m.id()));
        }
        out.push('\n');
        for (k, w) in kw {
            out.push_str(&format!("{k:>4} {w:>3}"));
            for m in &columns {
                let cell = group
                    .iter()
                    .find(|r| r.metric == *m && r.k == k && r.w == w)
                    .map_or_else(|| "-".to_string(), |r| format!("{:.4}", r.mean));
                out.push_str(&format!(" {cell:>16}"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    if out.is_empty() {
        out.push_str("(no aggregate rows)\n");
    }
    out
}

pub fn cmd_report(out_dir: &Path) -> CliResult<String> {
    let rows = parse_aggregates(&out_dir.join("aggregates.csv"))?;
    Ok(render(&rows))
}
