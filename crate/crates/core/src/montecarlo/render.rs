use std::fmt::Write;

use crate::error::{Error, Result};

use super::experiment::{EstimatorSummary, SimulationSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

fn level_column(level: f64) -> String {
    format!("rej_{:02}", (level * 100.0).round() as u32)
}

fn level_label(level: f64) -> String {
    format!("{}%", level * 100.0)
}

fn csv_columns(levels: &[f64]) -> Vec<String> {
    let mut cols: Vec<String> = ["estimator", "bias", "sd", "mean_se", "se_sd_ratio", "mse"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(levels.iter().map(|l| level_column(*l)));
    cols.push("failures".into());
    cols
}

/// One row per estimator; floats in shortest round-trip form.
pub fn render_csv(summary: &SimulationSummary) -> String {
    let mut out = csv_columns(&summary.levels).join(",");
    out.push('\n');
    for r in &summary.rows {
        let mut fields = vec![
            r.estimator.clone(),
            r.bias.to_string(),
            r.sd.to_string(),
            r.mean_se.to_string(),
            r.se_sd_ratio.to_string(),
            r.mse.to_string(),
        ];
        fields.extend(r.rejections.iter().map(|x| x.to_string()));
        fields.push(r.failures.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn markdown_cells(r: &EstimatorSummary) -> Vec<String> {
    let mut cells = vec![
        format!("{:.3}", r.bias),
        format!("{:.3}", r.se_sd_ratio),
        format!("{:.3}", r.mse),
    ];
    cells.extend(r.rejections.iter().map(|x| format!("{x:.3}")));
    cells
}

fn markdown_headers(levels: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["Bias", "SE/SD", "MSE"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(levels.iter().map(|l| level_label(*l)));
    h
}

fn table_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

pub fn render_markdown(summary: &SimulationSummary) -> String {
    let mut head = vec!["Estimator".to_string()];
    head.extend(markdown_headers(&summary.levels));
    let mut out = table_row(&head);
    let mut rule = vec!["---".to_string()];
    rule.extend(std::iter::repeat_n("---:".to_string(), head.len() - 1));
    out.push_str(&table_row(&rule));
    for r in &summary.rows {
        let mut cells = vec![r.estimator.clone()];
        cells.extend(markdown_cells(r));
        out.push_str(&table_row(&cells));
    }
    out
}

pub fn render_summary(summary: &SimulationSummary, format: Format) -> String {
    match format {
        Format::Csv => render_csv(summary),
        Format::Markdown => render_markdown(summary),
    }
}

/// A parsed summary file with its `# key = value` header comments.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub columns: Vec<String>,
    pub comments: Vec<(String, String)>,
    pub summary: SimulationSummary,
}

fn parse_float(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value `{field}`")))
}

/// Parses a summary CSV, keeping header comments; the title comes from the
/// `n` and `T` comments when present.
pub fn parse_csv(text: &str, fallback_title: &str) -> Result<Panel> {
    let mut comments = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.trim_start().strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                comments.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let levels: Vec<f64> = columns
        .iter()
        .filter_map(|c| c.strip_prefix("rej_"))
        .map(|p| p.parse::<f64>().map(|x| x / 100.0))
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse("bad rejection column".into()))?;
    if columns != csv_columns(&levels) {
        return Err(Error::SchemaMismatch(format!(
            "unexpected columns {}",
            columns.join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let rec = record?;
        if rec.len() != columns.len() {
            return Err(Error::Parse(format!(
                "row has {} fields, expected {}",
                rec.len(),
                columns.len()
            )));
        }
        let k = levels.len();
        rows.push(EstimatorSummary {
            estimator: rec[0].to_string(),
            bias: parse_float(&rec[1], "bias")?,
            sd: parse_float(&rec[2], "sd")?,
            mean_se: parse_float(&rec[3], "mean_se")?,
            se_sd_ratio: parse_float(&rec[4], "se_sd_ratio")?,
            mse: parse_float(&rec[5], "mse")?,
            rejections: (0..k)
                .map(|j| parse_float(&rec[6 + j], "rejection"))
                .collect::<Result<_>>()?,
            failures: rec[6 + k]
                .parse()
                .map_err(|_| Error::Parse(format!("bad failures value `{}`", &rec[6 + k])))?,
        });
    }
    let lookup = |key: &str| {
        comments
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
    };
    let title = match (lookup("n"), lookup("T")) {
        (Some(n), Some(t)) => format!("n = {n}, T = {t}"),
        (Some(n), None) => format!("n = {n}"),
        (None, Some(t)) => format!("T = {t}"),
        _ => fallback_title.to_string(),
    };
    Ok(Panel {
        title,
        columns,
        comments,
        summary: SimulationSummary { levels, rows },
    })
}

/// Side-by-side markdown, two panels per row band.
pub fn merge_report(panels: &[Panel]) -> Result<String> {
    let Some(first) = panels.first() else {
        return Ok(String::new());
    };
    for p in panels {
        if p.columns != first.columns {
            return Err(Error::SchemaMismatch(format!(
                "`{}` has columns {} but `{}` has {}",
                p.title,
                p.columns.join(","),
                first.title,
                first.columns.join(",")
            )));
        }
    }
    let headers = markdown_headers(&first.summary.levels);
    let width = headers.len();
    let mut out = String::new();
    for band in panels.chunks(2) {
        let mut names: Vec<&str> = Vec::new();
        for p in band {
            for r in &p.summary.rows {
                if !names.contains(&r.estimator.as_str()) {
                    names.push(&r.estimator);
                }
            }
        }
        let mut title_row = vec![String::new()];
        let mut head_row = vec!["**Estimator**".to_string()];
        for p in band {
            title_row.push(format!("**{}**", p.title));
            title_row.extend(std::iter::repeat_n(String::new(), width - 1));
            head_row.extend(headers.iter().map(|h| format!("**{h}**")));
        }
        out.push_str(&table_row(&title_row));
        let mut rule = vec!["---".to_string()];
        rule.extend(std::iter::repeat_n("---:".to_string(), width * band.len()));
        out.push_str(&table_row(&rule));
        out.push_str(&table_row(&head_row));
        for name in names {
            let mut cells = vec![name.to_string()];
            for p in band {
                match p.summary.row(name) {
                    Some(r) => cells.extend(markdown_cells(r)),
                    None => cells.extend(std::iter::repeat_n(String::new(), width)),
                }
            }
            out.push_str(&table_row(&cells));
        }
        let _ = writeln!(out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary() -> SimulationSummary {
        SimulationSummary {
            levels: vec![0.10, 0.05],
            rows: vec![
                EstimatorSummary {
                    estimator: "mle".into(),
                    bias: 0.19312345678901234,
                    sd: 0.1 / 3.0,
                    mean_se: 0.123,
                    se_sd_ratio: 0.123 / (0.1 / 3.0),
                    mse: 1e-17,
                    rejections: vec![0.4, 0.288],
                    failures: 2,
                },
                EstimatorSummary {
                    estimator: "jackknife".into(),
                    bias: -0.038,
                    sd: f64::NAN,
                    mean_se: 0.2,
                    se_sd_ratio: f64::NAN,
                    mse: 0.25,
                    rejections: vec![0.1, 0.042],
                    failures: 0,
                },
            ],
        }
    }

    fn same(a: &SimulationSummary, b: &SimulationSummary) -> bool {
        let fl = |x: f64, y: f64| x.to_bits() == y.to_bits();
        a.levels == b.levels
            && a.rows.len() == b.rows.len()
            && a.rows.iter().zip(&b.rows).all(|(r, s)| {
                r.estimator == s.estimator
                    && fl(r.bias, s.bias)
                    && fl(r.sd, s.sd)
                    && fl(r.mean_se, s.mean_se)
                    && fl(r.se_sd_ratio, s.se_sd_ratio)
                    && fl(r.mse, s.mse)
                    && r.rejections
                        .iter()
                        .zip(&s.rejections)
                        .all(|(x, y)| fl(*x, *y))
                    && r.failures == s.failures
            })
    }

    #[test]
    fn csv_round_trips_bit_for_bit() {
        let s = summary();
        let text = format!("# n = 100\n# T = 8\n{}", render_csv(&s));
        let p = parse_csv(&text, "x").unwrap();
        assert!(same(&p.summary, &s));
        assert_eq!(p.title, "n = 100, T = 8");
        assert_eq!(
            p.columns.join(","),
            "estimator,bias,sd,mean_se,se_sd_ratio,mse,rej_10,rej_05,failures"
        );
    }

    #[test]
    fn markdown_layout() {
        let md = render_markdown(&summary());
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Estimator | Bias | SE/SD | MSE | 10% | 5% |");
        assert_eq!(lines[2], "| mle | 0.193 | 3.690 | 0.000 | 0.400 | 0.288 |");
        assert_eq!(lines.len(), 4);
        let empty = SimulationSummary {
            levels: vec![0.10, 0.05],
            rows: vec![],
        };
        assert_eq!(render_markdown(&empty).lines().count(), 2);
    }

    #[test]
    fn report_merges_panels_and_rejects_mismatched_schemas() {
        let text = render_csv(&summary());
        let panels: Vec<Panel> = (0..4)
            .map(|k| parse_csv(&format!("# n = {}\n# T = 8\n{text}", 100 * (k + 1)), "p").unwrap())
            .collect();
        let md = merge_report(&panels).unwrap();
        assert_eq!(md.matches("**n = ").count(), 4);
        assert_eq!(md.matches("**Estimator**").count(), 2);
        let single = merge_report(&panels[..1]).unwrap();
        assert_eq!(single.matches("**n = ").count(), 1);

        let odd = SimulationSummary {
            levels: vec![0.01],
            rows: vec![],
        };
        let other = parse_csv(&render_csv(&odd), "odd").unwrap();
        let mixed = vec![panels[0].clone(), other];
        assert!(matches!(
            merge_report(&mixed),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(matches!(
            parse_csv("a,b\n1,2\n", "bad"),
            Err(Error::SchemaMismatch(_))
        ));
    }
}
