use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected text, csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: &str, header: &[&str]) -> Self {
        Table { title: title.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row<S: ToString>(&mut self, cells: &[S]) {
        self.rows.push(cells.iter().map(|c| c.to_string()).collect());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub details: Vec<(String, String)>,
}

impl CheckOutcome {
    pub fn new(name: &str, pass: bool) -> Self {
        CheckOutcome { name: name.into(), pass, details: Vec::new() }
    }

    pub fn detail(mut self, key: &str, value: impl ToString) -> Self {
        self.details.push((key.into(), value.to_string()));
        self
    }

    pub fn verdict(&self) -> &'static str {
        if self.pass { "PASS" } else { "FAIL" }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub protocol: String,
    pub tables: Vec<Table>,
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn new(scenario: &str, protocol: &str) -> Self {
        Report { scenario: scenario.into(), protocol: protocol.into(), tables: Vec::new(), checks: Vec::new() }
    }

    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| !c.pass)
    }

    pub fn render(&self, format: Format, color: bool) -> String {
        match format {
            Format::Text => self.text(color),
            Format::Csv => self.csv(),
            Format::Json => serde_json::to_string_pretty(self).expect("serializable") + "\n",
        }
    }

    fn text(&self, color: bool) -> String {
        let mut s = format!("scenario: {} ({})\n", self.scenario, self.protocol);
        for t in &self.tables {
            let _ = write!(s, "\n== {} ==\n", t.title);
            let mut widths: Vec<usize> = t.header.iter().map(|h| h.chars().count()).collect();
            for r in &t.rows {
                for (i, c) in r.iter().enumerate() {
                    if i < widths.len() {
                        widths[i] = widths[i].max(c.chars().count());
                    } else {
                        widths.push(c.chars().count());
                    }
                }
            }
            for line in std::iter::once(&t.header).chain(&t.rows) {
                let cells: Vec<String> =
                    line.iter().enumerate().map(|(i, c)| format!("{c:<w$}", w = widths[i])).collect();
                s.push_str(cells.join("  ").trim_end());
                s.push('\n');
            }
        }
        if !self.checks.is_empty() {
            s.push_str("\n== checks ==\n");
            for c in &self.checks {
                let v = match (color, c.pass) {
                    (true, true) => "\x1b[32mPASS\x1b[0m".to_string(),
                    (true, false) => "\x1b[31mFAIL\x1b[0m".to_string(),
                    _ => c.verdict().to_string(),
                };
                let _ = writeln!(s, "{v} {}", c.name);
                for (k, d) in &c.details {
                    let _ = writeln!(s, "    {k}: {d}");
                }
            }
        }
        s
    }

    /// Every line starts with a section name; header lines are prefixed with `#`.
    fn csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let _ = w.write_record(["scenario", &self.scenario, &self.protocol]);
        for t in &self.tables {
            let mut head = vec![format!("#{}", t.title)];
            head.extend(t.header.iter().cloned());
            let _ = w.write_record(&head);
            for r in &t.rows {
                let mut rec = vec![t.title.clone()];
                rec.extend(r.iter().cloned());
                let _ = w.write_record(&rec);
            }
        }
        for c in &self.checks {
            let mut rec = vec!["check".to_string(), c.name.clone(), c.verdict().to_string()];
            rec.extend(c.details.iter().map(|(k, v)| format!("{k}={v}")));
            let _ = w.write_record(&rec);
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("demo", "P1");
        let mut t = Table::new("settlement", &["party", "utility"]);
        t.row(&["lender", "0"]);
        t.row(&["borrower", "-1/2"]);
        r.tables.push(t);
        r.checks.push(CheckOutcome::new("theorem1", true).detail("root", "(0, 0)"));
        r
    }

    #[test]
    fn csv_lines_are_greppable() {
        let csv = sample().render(Format::Csv, false);
        assert!(csv.contains("\nsettlement,borrower,-1/2\n"), "{csv}");
        assert!(csv.contains("check,theorem1,PASS,\"root=(0, 0)\""), "{csv}");
    }

    #[test]
    fn text_colors_only_on_request() {
        let r = sample();
        assert!(!r.render(Format::Text, false).contains('\x1b'));
        assert!(r.render(Format::Text, true).contains("\x1b[32mPASS"));
        assert!(r.render(Format::Text, false).contains("borrower  -1/2"));
    }

    #[test]
    fn json_round_trips_through_serde() {
        let j = sample().render(Format::Json, false);
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["checks"][0]["pass"], true);
    }
}
