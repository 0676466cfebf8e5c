//! CSV tables, a small SVG line-chart writer, and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::aggregate::AggregateSeries;

/// A rectangular table with a fixed header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let rows = r
            .records()
            .map(|rec| {
                rec.map(|rec| rec.iter().map(String::from).collect())
                    .map_err(|e| Error::Parse(e.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Long-format series table: `iteration, series, mean, ci_low, ci_high`.
pub fn series_table(series: &[(String, AggregateSeries)]) -> Table {
    let mut t = Table::new(&["iteration", "series", "mean", "ci_low", "ci_high", "replicates"]);
    for (name, s) in series {
        for i in 0..s.len() {
            t.push(vec![
                s.x_axis[i].to_string(),
                name.clone(),
                num(s.mean[i]),
                num(s.ci_low[i]),
                num(s.ci_high[i]),
                s.replicates.to_string(),
            ]);
        }
    }
    t
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line chart of the series means with shaded bands; log-scaled `y` when
/// every plotted value is positive.
pub fn svg_chart(title: &str, series: &[(String, AggregateSeries)]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let xs = series.iter().flat_map(|(_, s)| s.x_axis.iter().map(|x| *x as f64));
    let ys = series
        .iter()
        .flat_map(|(_, s)| s.ci_low.iter().chain(&s.ci_high).chain(&s.mean).copied())
        .filter(|v| v.is_finite());
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let ys: Vec<f64> = ys.collect();
    let log = !ys.is_empty() && ys.iter().all(|v| *v > 0.0);
    let tr = |v: f64| if log { v.log10() } else { v };
    let (y0, y1) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(tr(*v)), b.max(tr(*v))));
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let px = |x: f64| pad + (x - x0) / span(x0, x1) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (tr(y) - y0) / span(y0, y1) * (h - 2.0 * pad);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<path d="M{pad} {pad} L{pad} {} L{} {}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad,
        h - pad
    );
    if ys.is_empty() || !x0.is_finite() {
        out.push_str("</svg>\n");
        return out;
    }
    let label = |v: f64| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    for (v, y) in [(y0, h - pad), (y1, pad)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            pad - 4.0,
            label(v)
        );
    }
    for (v, x) in [(x0, pad), (x1, w - pad)] {
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{v}</text>"#,
            h - pad + 14.0
        );
    }
    for (k, (name, s)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let ok = |i: &usize| s.ci_low[*i].is_finite() && s.ci_high[*i].is_finite() && (!log || s.ci_low[*i] > 0.0);
        let idx: Vec<usize> = (0..s.len()).filter(ok).collect();
        if !idx.is_empty() {
            let mut band = String::new();
            for i in &idx {
                let _ = write!(band, "{:.2},{:.2} ", px(s.x_axis[*i] as f64), py(s.ci_high[*i]));
            }
            for i in idx.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", px(s.x_axis[*i] as f64), py(s.ci_low[*i]));
            }
            let _ = writeln!(
                out,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.trim_end()
            );
        }
        let line: Vec<String> = (0..s.len())
            .filter(|i| s.mean[*i].is_finite() && (!log || s.mean[*i] > 0.0))
            .map(|i| format!("{:.2},{:.2}", px(s.x_axis[i] as f64), py(s.mean[i])))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            w - pad - 110.0,
            pad + 14.0 * (k as f64 + 1.0),
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Ordered `key = value` lines; no timestamps, so reruns are byte-identical.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(experiment: &str, config_hash: &str) -> Self {
        let mut m = Self::default();
        m.set("experiment", experiment);
        m.set("config_sha256", config_hash);
        m.set("zoprox_version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Parse(format!("manifest line '{line}'")))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("manifest.txt");
        fs::write(&path, self.render())?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(dir.join("manifest.txt"))?)
    }
}
