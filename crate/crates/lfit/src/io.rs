//! Table persistence.
//!
//! Two formats:
//!
//! * **CSV** — the interchange contract. Metadata in leading `#` comment
//!   lines, then a header `theta_1,...,theta_d,s_1,...,s_q`, then one row
//!   per simulation. Values use the shortest representation that parses
//!   back to the identical double.
//! * **Binary cache** — magic bytes `LFIT1`, little-endian u64 dimensions
//!   and raw f64 bits; bit-exact and fast for large tables.
//!
//! Saving also writes a `<path>.columns.txt` sidecar listing the summary
//! column names, when the table knows them.

use crate::error::{Error, Result};
use crate::simulators::PriorSpec;
use crate::table::{SimulationTable, TableMeta};
use ndarray::Array2;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 5] = b"LFIT1";

/// Saves a table, choosing the format by extension: `.bin` is the binary
/// cache, anything else the CSV format.
pub fn save_table(table: &SimulationTable, path: &Path) -> Result<()> {
    if path.extension().map_or(false, |e| e == "bin") {
        save_table_bin(table, path)?;
    } else {
        save_table_csv(table, path)?;
    }
    write_column_manifest(table, path)
}

/// Loads a table, sniffing the format from the leading magic bytes.
pub fn load_table(path: &Path) -> Result<SimulationTable> {
    let mut head = [0u8; 5];
    let n_read = File::open(path)?.read(&mut head)?;
    if n_read == 5 && &head == MAGIC {
        load_table_bin(path)
    } else {
        load_table_csv(path)
    }
}

fn write_column_manifest(table: &SimulationTable, table_path: &Path) -> Result<()> {
    let names = &table.meta().summary_names;
    if names.is_empty() {
        return Ok(());
    }
    let mut path = table_path.as_os_str().to_owned();
    path.push(".columns.txt");
    let mut w = BufWriter::new(File::create(Path::new(&path))?);
    for name in names {
        writeln!(w, "{name}")?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn format_prior(prior: &PriorSpec) -> String {
    prior
        .ranges()
        .iter()
        .map(|(lo, hi)| format!("{lo}:{hi}"))
        .collect::<Vec<_>>()
        .join(";")
}

pub(crate) fn parse_prior(text: &str) -> Result<PriorSpec> {
    let mut ranges = Vec::new();
    for part in text.split(';') {
        let (lo, hi) = part
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("bad prior range '{part}'")))?;
        let lo: f64 = lo
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad prior bound '{lo}'")))?;
        let hi: f64 = hi
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad prior bound '{hi}'")))?;
        ranges.push((lo, hi));
    }
    PriorSpec::new(ranges)
}

pub fn save_table_csv(table: &SimulationTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let meta = table.meta();
    writeln!(w, "# model={}", meta.model)?;
    writeln!(w, "# seed={}", meta.seed)?;
    writeln!(w, "# prior={}", format_prior(&meta.prior))?;
    if !meta.param_names.is_empty() {
        writeln!(w, "# param_names={}", meta.param_names.join(","))?;
    }
    if !meta.summary_names.is_empty() {
        writeln!(w, "# summary_names={}", meta.summary_names.join(","))?;
    }

    let d = table.param_dim();
    let q = table.summary_dim();
    let header: Vec<String> = (1..=d)
        .map(|j| format!("theta_{j}"))
        .chain((1..=q).map(|j| format!("s_{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;

    let mut line = String::with_capacity((d + q) * 24);
    for i in 0..table.n_sims() {
        line.clear();
        for (pos, v) in table
            .param_row(i)
            .iter()
            .chain(table.summary_row(i).iter())
            .enumerate()
        {
            if pos > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_table_csv(path: &Path) -> Result<SimulationTable> {
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);

    let mut model = String::from("unknown");
    let mut seed = 0u64;
    let mut prior: Option<PriorSpec> = None;
    let mut param_names: Vec<String> = Vec::new();
    let mut summary_names: Vec<String> = Vec::new();

    let mut header: Option<(usize, usize)> = None; // (d, q)
    let mut params: Vec<f64> = Vec::new();
    let mut summaries: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "model" => model = value.trim().to_string(),
                    "seed" => {
                        seed = value.trim().parse().map_err(|_| Error::Parse {
                            path: display.clone(),
                            line: line_no,
                            msg: format!("bad seed '{value}'"),
                        })?
                    }
                    "prior" => prior = Some(parse_prior(value.trim())?),
                    "param_names" => {
                        param_names = value.trim().split(',').map(str::to_string).collect()
                    }
                    "summary_names" => {
                        summary_names = value.trim().split(',').map(str::to_string).collect()
                    }
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        match header {
            None => {
                let d = fields.iter().take_while(|f| f.starts_with("theta_")).count();
                let q = fields.len() - d;
                if d == 0 || q == 0 || !fields[d..].iter().all(|f| f.starts_with("s_")) {
                    return Err(Error::Parse {
                        path: display,
                        line: line_no,
                        msg: "header must be theta_1..theta_d,s_1..s_q".into(),
                    });
                }
                header = Some((d, q));
            }
            Some((d, q)) => {
                if fields.len() != d + q {
                    return Err(Error::Parse {
                        path: display,
                        line: line_no,
                        msg: format!("expected {} fields, found {}", d + q, fields.len()),
                    });
                }
                for (col, field) in fields.iter().enumerate() {
                    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                        path: display.clone(),
                        line: line_no,
                        msg: format!("bad number '{field}' in column {}", col + 1),
                    })?;
                    if col < d {
                        params.push(v);
                    } else {
                        summaries.push(v);
                    }
                }
                n_rows += 1;
            }
        }
    }

    let (d, q) = header.ok_or_else(|| {
        Error::Format(format!("{display}: no header row (empty file?)"))
    })?;
    if n_rows == 0 {
        return Err(Error::Format(format!("{display}: table has no data rows")));
    }
    let prior =
        prior.unwrap_or_else(|| PriorSpec::new(vec![(0.0, 1.0); d]).expect("static ranges"));

    let params = Array2::from_shape_vec((n_rows, d), params)
        .map_err(|e| Error::Format(format!("{display}: {e}")))?;
    let summaries = Array2::from_shape_vec((n_rows, q), summaries)
        .map_err(|e| Error::Format(format!("{display}: {e}")))?;
    SimulationTable::new(
        params,
        summaries,
        TableMeta::new(model, prior, seed, param_names, summary_names),
    )
}

pub fn save_table_bin(table: &SimulationTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let meta = table.meta();
    write_u64(&mut w, table.n_sims() as u64)?;
    write_u64(&mut w, table.param_dim() as u64)?;
    write_u64(&mut w, table.summary_dim() as u64)?;
    write_string(&mut w, &meta.model)?;
    write_u64(&mut w, meta.seed)?;
    write_u64(&mut w, meta.prior.ranges().len() as u64)?;
    for &(lo, hi) in meta.prior.ranges() {
        write_f64(&mut w, lo)?;
        write_f64(&mut w, hi)?;
    }
    write_u64(&mut w, meta.param_names.len() as u64)?;
    for name in &meta.param_names {
        write_string(&mut w, name)?;
    }
    write_u64(&mut w, meta.summary_names.len() as u64)?;
    for name in &meta.summary_names {
        write_string(&mut w, name)?;
    }
    for v in table.params().iter() {
        write_f64(&mut w, *v)?;
    }
    for v in table.summaries().iter() {
        write_f64(&mut w, *v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_table_bin(path: &Path) -> Result<SimulationTable> {
    let display = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format(format!("{display}: file too short for magic")))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{display}: bad magic bytes (not an LFIT1 cache)"
        )));
    }
    let n = read_u64(&mut r, &display)? as usize;
    let d = read_u64(&mut r, &display)? as usize;
    let q = read_u64(&mut r, &display)? as usize;
    const MAX_ELEMENTS: u128 = 1 << 34;
    if n == 0 || d == 0 || q == 0 || (n as u128) * ((d + q) as u128) > MAX_ELEMENTS {
        return Err(Error::Format(format!(
            "{display}: implausible dimensions {n} x ({d} + {q})"
        )));
    }
    let model = read_string(&mut r, &display)?;
    let seed = read_u64(&mut r, &display)?;
    let n_ranges = read_u64(&mut r, &display)? as usize;
    let mut ranges = Vec::with_capacity(n_ranges);
    for _ in 0..n_ranges {
        let lo = read_f64(&mut r, &display)?;
        let hi = read_f64(&mut r, &display)?;
        ranges.push((lo, hi));
    }
    let prior = PriorSpec::new(ranges)?;
    let n_param_names = read_u64(&mut r, &display)? as usize;
    let mut param_names = Vec::with_capacity(n_param_names);
    for _ in 0..n_param_names {
        param_names.push(read_string(&mut r, &display)?);
    }
    let n_summary_names = read_u64(&mut r, &display)? as usize;
    let mut summary_names = Vec::with_capacity(n_summary_names);
    for _ in 0..n_summary_names {
        summary_names.push(read_string(&mut r, &display)?);
    }

    let mut params = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        params.push(read_f64(&mut r, &display)?);
    }
    let mut summaries = Vec::with_capacity(n * q);
    for _ in 0..n * q {
        summaries.push(read_f64(&mut r, &display)?);
    }

    let params = Array2::from_shape_vec((n, d), params)
        .map_err(|e| Error::Format(format!("{display}: {e}")))?;
    let summaries = Array2::from_shape_vec((n, q), summaries)
        .map_err(|e| Error::Format(format!("{display}: {e}")))?;
    SimulationTable::new(
        params,
        summaries,
        TableMeta::new(model, prior, seed, param_names, summary_names),
    )
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u64(w, s.len() as u64)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R, path: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{path}: truncated file")))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R, path: &str) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r, path)?))
}

fn read_string<R: Read>(r: &mut R, path: &str) -> Result<String> {
    let len = read_u64(r, path)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("{path}: implausible string length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{path}: truncated string")))?;
    String::from_utf8(buf).map_err(|_| Error::Format(format!("{path}: invalid utf-8")))
}
