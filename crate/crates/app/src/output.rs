//! JSON and terminal output. The API and `--json` both go through [`json`].

use searchsvc_core::klm::{Comparison, Seconds};
use searchsvc_core::visualize::PresentationModel;
use searchsvc_core::PropertyValue;
use serde::Serialize;

/// Pretty JSON with a trailing newline.
pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    text
}

pub const CELL_WIDTH: usize = 40;

/// Cuts `s` to `width` characters, marking the cut with an ellipsis.
pub fn truncate(s: &str, width: usize) -> String {
    if s.chars().count() <= width {
        s.to_string()
    } else {
        let mut out: String = s.chars().take(width.saturating_sub(1)).collect();
        out.push('…');
        out
    }
}

fn cell(v: &PropertyValue) -> String {
    truncate(v.as_str().unwrap_or("-"), CELL_WIDTH)
}

fn grid(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(header);
    out.push_str(&line(
        &widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>(),
    ));
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

pub fn presentation(model: &PresentationModel) -> String {
    match model {
        PresentationModel::Table(t) => {
            let rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|r| r.iter().map(cell).collect())
                .collect();
            let mut out = grid(&t.columns, &rows);
            if let Some(hidden) = t.overflow.first().filter(|m| !m.is_empty()) {
                let names: Vec<&str> = hidden.keys().map(String::as_str).collect();
                out.push_str(&format!("(not shown: {})\n", names.join(", ")));
            }
            out
        }
        PresentationModel::Grouped(g) => {
            let mut out = String::new();
            let title = |o: &searchsvc_core::DomainObject| {
                o.values
                    .values()
                    .find_map(|v| v.as_str())
                    .unwrap_or(&o.target_url)
                    .to_string()
            };
            for (key, items) in &g.groups {
                out.push_str(&format!("{} ({})\n", truncate(key, CELL_WIDTH), items.len()));
                for o in items {
                    out.push_str(&format!("  {}\n", truncate(&title(o), CELL_WIDTH)));
                }
            }
            if !g.missing_group.is_empty() {
                out.push_str(&format!("(no {}) ({})\n", g.group_property, g.missing_group.len()));
                for o in &g.missing_group {
                    out.push_str(&format!("  {}\n", truncate(&title(o), CELL_WIDTH)));
                }
            }
            out
        }
        PresentationModel::Aggregate(a) => {
            let rows: Vec<Vec<String>> = a
                .counts
                .iter()
                .map(|(k, n)| vec![truncate(k, CELL_WIDTH), n.to_string()])
                .collect();
            grid(&[a.dimension.clone(), "count".into()], &rows)
        }
        PresentationModel::Custom { data, .. } => json(data),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepTime {
    pub label: String,
    pub seconds: Seconds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Estimate {
    pub scenario: String,
    pub total: Seconds,
    pub steps: Vec<StepTime>,
}

pub fn estimate(e: &Estimate) -> String {
    let rows: Vec<Vec<String>> = e
        .steps
        .iter()
        .map(|s| vec![s.label.clone(), s.seconds.to_string()])
        .chain(std::iter::once(vec!["total".into(), e.total.to_string()]))
        .collect();
    format!("{}\n{}", e.scenario, grid(&["step".into(), "seconds".into()], &rows))
}

pub fn comparison(a: &str, b: &str, c: &Comparison) -> String {
    let opt = |s: Option<Seconds>| s.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
    let rows: Vec<Vec<String>> = c
        .steps
        .iter()
        .map(|s| vec![s.label.clone(), opt(s.a), opt(s.b), opt(s.delta)])
        .chain(std::iter::once(vec![
            "total".into(),
            c.total_a.to_string(),
            c.total_b.to_string(),
            c.delta.to_string(),
        ]))
        .collect();
    grid(
        &["step".into(), a.to_string(), b.to_string(), "delta".into()],
        &rows,
    )
}
