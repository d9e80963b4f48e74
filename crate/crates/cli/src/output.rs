//! CSV, metadata and gnuplot output.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), so every value
//! reads back bit for bit. Lines end in `\n`.

use std::collections::BTreeMap;

use ringwalk::evolve::Distribution;
use ringwalk::spectrum::{MomentumGrid, SpectrumResult};
use ringwalk::Component;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const SPECTRUM_HEADER: [&str; 3] = ["k", "branch", "omega"];
pub const GRID_SPECTRUM_HEADER: [&str; 4] = ["k_a", "k_b", "branch", "omega"];
pub const DISTRIBUTION_HEADER: [&str; 3] = ["site", "comp", "prob"];
pub const SECTORS_HEADER: [&str; 3] = ["t", "p_ab", "p_cd"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory csv writer");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// `k,branch,omega` for sweeps, `k_a,k_b,branch,omega` for full grids.
pub fn spectrum_csv(result: &SpectrumResult) -> String {
    let mut w = writer();
    let full = matches!(result.grid, MomentumGrid::Full { .. });
    if full {
        w.write_record(GRID_SPECTRUM_HEADER).unwrap();
    } else {
        w.write_record(SPECTRUM_HEADER).unwrap();
    }
    let axis = result.grid.sweep_values().map(|(a, _)| a);
    for (&(ka, kb), phases) in result.points.iter().zip(&result.bands) {
        for (branch, &omega) in phases.iter().enumerate() {
            let b = branch.to_string();
            let o = fmt_f64(omega);
            if full {
                w.write_record([fmt_f64(ka), fmt_f64(kb), b, o]).unwrap();
            } else {
                let k = match axis {
                    Some(ringwalk::spectrum::Axis::Kb) => kb,
                    _ => ka,
                };
                w.write_record([fmt_f64(k), b, o]).unwrap();
            }
        }
    }
    finish(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub k: f64,
    pub branch: usize,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionRow {
    pub site: usize,
    pub comp: Component,
    pub prob: f64,
}

#[derive(Deserialize)]
struct RawDistributionRow {
    site: usize,
    comp: String,
    prob: f64,
}

fn reader<'a>(text: &'a str, header: &[&str], what: &'static str) -> Result<csv::Reader<&'a [u8]>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let found = r.headers().map_err(|e| CliError::parse(what, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::parse(
            what,
            format!(
                "expected header {:?}, found {:?}",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(r)
}

/// Reads a `k,branch,omega` file.
pub fn parse_spectrum_csv(text: &str) -> Result<Vec<SpectrumRow>, CliError> {
    const WHAT: &str = "spectrum csv";
    let mut rows = Vec::new();
    for rec in reader(text, &SPECTRUM_HEADER, WHAT)?.deserialize() {
        let row: SpectrumRow = rec.map_err(|e| CliError::parse(WHAT, e))?;
        if !(row.k.is_finite() && row.omega.is_finite()) {
            return Err(CliError::parse(WHAT, "non-finite value"));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a `site,comp,prob` file.
pub fn parse_distribution_csv(text: &str) -> Result<Vec<DistributionRow>, CliError> {
    const WHAT: &str = "distribution csv";
    let mut rows = Vec::new();
    for rec in reader(text, &DISTRIBUTION_HEADER, WHAT)?.deserialize() {
        let raw: RawDistributionRow = rec.map_err(|e| CliError::parse(WHAT, e))?;
        let comp: Component = raw
            .comp
            .parse()
            .map_err(|_| CliError::parse(WHAT, format!("unknown component {:?}", raw.comp)))?;
        if !(raw.prob.is_finite() && raw.prob >= 0.0) {
            return Err(CliError::parse(WHAT, "probability must be finite and non-negative"));
        }
        rows.push(DistributionRow {
            site: raw.site,
            comp,
            prob: raw.prob,
        });
    }
    Ok(rows)
}

pub fn distribution_csv(dist: &Distribution) -> String {
    let mut w = writer();
    w.write_record(DISTRIBUTION_HEADER).unwrap();
    for (site, probs) in dist.probs.iter().enumerate() {
        for c in Component::ALL {
            w.write_record([site.to_string(), c.label().to_string(), fmt_f64(probs[c.index()])])
                .unwrap();
        }
    }
    finish(w)
}

pub fn sectors_csv(series: &[(u64, f64, f64)]) -> String {
    let mut w = writer();
    w.write_record(SECTORS_HEADER).unwrap();
    for &(t, ab, cd) in series {
        w.write_record([t.to_string(), fmt_f64(ab), fmt_f64(cd)]).unwrap();
    }
    finish(w)
}

/// Two-column table with a custom header.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = writer();
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(r).unwrap();
    }
    finish(w)
}

/// Sibling `<stem>.meta.json`: config echo, pinned choices and results.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    pub config: ExperimentConfig,
    pub pinned: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
}

impl Metadata {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Metadata {
            tool: "ringwalk",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            figure: None,
            config: config.clone(),
            pinned: BTreeMap::new(),
            outputs: Vec::new(),
            results: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata serializes");
        s.push('\n');
        s
    }
}

fn gp_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\'', "''")
}

fn gp_header(png: &str, title: &str) -> String {
    format!(
        "set datafile separator ','\nset terminal pngcairo size 900,650\nset output '{}'\nset title '{}'\n",
        gp_escape(png),
        gp_escape(title)
    )
}

/// Scatter of eigenphase against the swept momentum.
pub fn spectrum_gnuplot(csv: &str, png: &str, title: &str, xlabel: &str) -> String {
    format!(
        "{}set xlabel '{}'\nset ylabel 'omega'\nset xrange [-pi:pi]\nset yrange [-pi:pi]\n\
         plot '{}' skip 1 using 1:3 with points pt 7 ps 0.25 lc rgb '#1f4e9a' notitle\n",
        gp_header(png, title),
        gp_escape(xlabel),
        gp_escape(csv)
    )
}

/// Surface points of eigenphase over the full momentum grid.
pub fn grid_spectrum_gnuplot(csv: &str, png: &str, title: &str) -> String {
    format!(
        "{}set xlabel 'K_a'\nset ylabel 'K_b'\nset zlabel 'omega'\n\
         splot '{}' skip 1 using 1:2:4 with points pt 7 ps 0.2 notitle\n",
        gp_header(png, title),
        gp_escape(csv)
    )
}

/// Per-component probabilities against site, one panel per CSV.
pub fn distribution_gnuplot(csvs: &[String], png: &str, title: &str) -> String {
    let mut s = gp_header(png, title);
    s.push_str("set xlabel 'site'\nset ylabel 'probability'\nset style data impulses\n");
    if csvs.len() > 1 {
        s.push_str(&format!("set multiplot layout {},1\n", csvs.len()));
    }
    for csv in csvs {
        let f = gp_escape(csv);
        s.push_str(&format!(
            "plot for [c in 'A B C D'] '{f}' skip 1 using 1:(strcol(2) eq c ? $3 : 1/0) title c\n"
        ));
    }
    if csvs.len() > 1 {
        s.push_str("unset multiplot\n");
    }
    s
}

pub fn sectors_gnuplot(csv: &str, png: &str, title: &str) -> String {
    format!(
        "{}set xlabel 't'\nset ylabel 'occupation'\nset yrange [0:1]\n\
         plot '{f}' skip 1 using 1:2 with linespoints title 'A+B', \\\n     '{f}' skip 1 using 1:3 with linespoints title 'C+D'\n",
        gp_header(png, title),
        f = gp_escape(csv)
    )
}
