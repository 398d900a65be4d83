//! Figure-shaped tables derived from run and sweep output directories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::error::{ExpError, Result};
use crate::experiment::{sweep_keys, SweepParam, SweepSpec};
use crate::runner::create_dir;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(ExpError::io(path))
}

/// Header and rows of a CSV written by this crate (no quoting).
fn table(text: &str) -> (Vec<&str>, Vec<Vec<&str>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").split(',').collect();
    let rows = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
    (header, rows)
}

fn column(header: &[&str], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| *h == name)
        .ok_or_else(|| ExpError::Input(format!("{}: missing column `{name}`", path.display())))
}

/// Writes plot tables for the run or sweep in `input` to `out` and returns the
/// files written.
pub fn emit(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    if input.join("aggregate.csv").exists() {
        emit_sweep(input, out)
    } else if input.join("trace.csv").exists() {
        emit_run(input, out)
    } else {
        Err(ExpError::Input(format!(
            "{}: no trace.csv or aggregate.csv to plot",
            input.display()
        )))
    }
}

/// `cwnd.csv` with one column per flow and `queue.csv`.
fn emit_run(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let path = input.join("trace.csv");
    let text = read(&path)?;
    let (header, rows) = table(&text);
    let (ct, cf, cw, cq) = (
        column(&header, "t", &path)?,
        column(&header, "flow_id", &path)?,
        column(&header, "cwnd_pkts", &path)?,
        column(&header, "queue_pkts", &path)?,
    );
    let mut flows: Vec<&str> = Vec::new();
    // Rows of one sample instant are contiguous in trace.csv.
    let mut by_t: Vec<(&str, &str, Vec<&str>)> = Vec::new();
    for r in &rows {
        if r.len() != header.len() {
            return Err(ExpError::Input(format!("{}: ragged row", path.display())));
        }
        if !flows.contains(&r[cf]) {
            flows.push(r[cf]);
        }
        match by_t.last_mut() {
            Some((t, _, w)) if *t == r[ct] => w.push(r[cw]),
            _ => by_t.push((r[ct], r[cq], vec![r[cw]])),
        }
    }
    create_dir(out)?;
    let mut cwnd = String::from("t");
    for f in &flows {
        write!(cwnd, ",flow_{f}").expect("String write");
    }
    cwnd.push('\n');
    let mut queue = String::from("t,queue_pkts\n");
    for (t, q, ws) in &by_t {
        writeln!(cwnd, "{t},{}", ws.join(",")).expect("String write");
        writeln!(queue, "{t},{q}").expect("String write");
    }
    let files = vec![out.join("cwnd.csv"), out.join("queue.csv")];
    fs::write(&files[0], cwnd).map_err(ExpError::io(&files[0]))?;
    fs::write(&files[1], queue).map_err(ExpError::io(&files[1]))?;
    Ok(files)
}

/// Metric against the swept parameter, one file per x-axis form.
fn emit_sweep(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let manifest = read(&input.join("manifest.conf"))?;
    let spec = SweepSpec::from_config(&Config::parse(&manifest, &sweep_keys())?)?;
    let path = input.join("aggregate.csv");
    let text = read(&path)?;
    let (header, rows) = table(&text);
    let idx = |n: &str| column(&header, n, &path);
    let (cp, cn) = (idx("param")?, idx("n_flows")?);
    let (em, ev, fm, fv) = (idx("eta_mean")?, idx("eta_var")?, idx("jain_long_mean")?, idx("jain_long_var")?);
    let pick = |p: SweepParam, r: &[&str]| -> Result<f64> {
        let s = if p == SweepParam::NFlows { r[cn] } else { r[cp] };
        s.parse().map_err(|_| ExpError::Input(format!("{}: bad {} value `{s}`", path.display(), p.name())))
    };
    let short = |p: SweepParam| match p {
        SweepParam::DropProb => "p",
        SweepParam::Beta => "beta",
        SweepParam::NFlows => "n_flows",
    };
    let series = spec.series.as_ref().map(|(p, _)| *p);
    let mut pts: Vec<(f64, Option<f64>, &[&str])> = Vec::new();
    for r in &rows {
        if r.len() != header.len() {
            return Err(ExpError::Input(format!("{}: ragged row", path.display())));
        }
        let s = series.map(|p| pick(p, r)).transpose()?;
        pts.push((pick(spec.parameter, r)?, s, r.as_slice()));
    }
    let mut forms = vec![(short(spec.parameter).to_string(), false)];
    if spec.parameter == SweepParam::Beta {
        forms.push(("one_minus_beta".to_string(), true));
    }
    create_dir(out)?;
    let mut files = Vec::new();
    for (x, flip) in forms {
        let mut s = x.clone();
        if let Some(p) = series {
            write!(s, ",{}", short(p)).expect("String write");
        }
        s.push_str(",eta_mean,eta_var,F_mean,F_var\n");
        for (v, sv, r) in &pts {
            let xv = if flip { 1.0 - v } else { *v };
            write!(s, "{xv}").expect("String write");
            if let Some(sv) = sv {
                write!(s, ",{sv}").expect("String write");
            }
            writeln!(s, ",{},{},{},{}", r[em], r[ev], r[fm], r[fv]).expect("String write");
        }
        let f = out.join(format!("metric_vs_{x}.csv"));
        fs::write(&f, s).map_err(ExpError::io(&f))?;
        files.push(f);
    }
    Ok(files)
}
