//! CSV tables, weight files, run manifests and the binary policy format.
//!
//! Every text artifact starts with one comment line of space separated
//! `key=value` pairs, the first of which is `params_hash`. Readers check that
//! hash against the parameters they were given.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use toml::{Table, Value};

use crate::model::{Direction, Grid, ModelParams, State};
use crate::policy::{price_of_threshold, PolicyTable};
use crate::simulator::{SignalPoint, SimTrace};
use crate::solvers::{FeatureScaling, SolveReport, TableMeta, ValueTable, WeightVector, N_FEATURES};
use crate::{Error, Result};

fn meta_line(meta: &TableMeta) -> String {
    format!(
        "# params_hash={} solver={} iterations={} tol={:e} final_change={:e} resolution={:e}\n",
        meta.params_hash, meta.solver, meta.iterations, meta.tol, meta.final_change, meta.resolution
    )
}

/// Splits an artifact into its leading comment pairs and the remaining body.
fn split_header<'a>(path: &Path, text: &'a str) -> Result<(BTreeMap<String, String>, &'a str)> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let first = first
        .strip_prefix('#')
        .ok_or_else(|| Error::artifact(path, "missing `# params_hash=` header line"))?;
    let mut pairs = BTreeMap::new();
    for tok in first.split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            pairs.insert(k.to_string(), v.to_string());
        }
    }
    if !pairs.contains_key("params_hash") {
        return Err(Error::artifact(path, "header line has no params_hash"));
    }
    Ok((pairs, body))
}

fn check_hash(expected: &str, found: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Integrity {
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

fn meta_from(path: &Path, pairs: &BTreeMap<String, String>) -> Result<TableMeta> {
    let num = |key: &str| -> Result<f64> {
        pairs
            .get(key)
            .map(|v| v.parse::<f64>())
            .transpose()
            .map_err(|_| Error::artifact(path, format!("bad `{key}` in header")))
            .map(|v| v.unwrap_or(0.0))
    };
    Ok(TableMeta {
        solver: pairs.get("solver").cloned().unwrap_or_default(),
        iterations: num("iterations")? as usize,
        tol: num("tol")?,
        final_change: num("final_change")?,
        params_hash: pairs["params_hash"].clone(),
        resolution: num("resolution")?,
    })
}

/// Reads `i,y,D,<value...>` rows back into grid order.
fn read_rows(path: &Path, body: &str, params: &ModelParams, header: &[&str]) -> Result<Vec<f64>> {
    let grid = params.grid();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::artifact(path, format!("expected header {}, got {}", header.join(","), got.join(","))));
    }
    let mut out = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| -> Result<&str> {
            rec.get(j)
                .ok_or_else(|| Error::artifact(path, format!("row {} is short", line + 1)))
        };
        let bad = |what: &str| Error::artifact(path, format!("row {}: bad {what}", line + 1));
        let i: u32 = field(0)?.parse().map_err(|_| bad("i"))?;
        let y: f64 = field(1)?.parse().map_err(|_| bad("y"))?;
        let d: i64 = field(2)?.parse().map_err(|_| bad("D"))?;
        let v: f64 = field(3)?.parse().map_err(|_| bad("value"))?;
        let k = (y * f64::from(params.k_max())).round() as i32;
        if (params.y_of(k) - y).abs() > 1e-9 {
            return Err(bad("y (not on the signal grid)"));
        }
        let s = State::new(i, k, Direction::from_sign(d)?);
        let idx = grid
            .try_index(&s)
            .map_err(|_| Error::artifact(path, format!("row {}: state {s} outside the grid", line + 1)))?;
        if seen[idx] {
            return Err(Error::artifact(path, format!("duplicate state {s}")));
        }
        seen[idx] = true;
        out[idx] = v;
    }
    if let Some(miss) = seen.iter().position(|s| !s) {
        return Err(Error::artifact(path, format!("missing state {}", grid.state(miss))));
    }
    Ok(out)
}

fn write_rows(path: &Path, meta: &TableMeta, params: &ModelParams, header: &[&str], row: impl Fn(usize) -> Vec<String>) -> Result<()> {
    let grid = params.grid();
    let mut buf = meta_line(meta).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for (idx, s) in grid.states().enumerate() {
            let mut rec = vec![s.i.to_string(), params.y_of(s.k).to_string(), s.dir.sign().to_string()];
            rec.extend(row(idx));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_value_csv(path: &Path, params: &ModelParams, table: &ValueTable) -> Result<()> {
    check_grid(params, table.grid())?;
    write_rows(path, &table.meta, params, &["i", "y", "D", "J"], |idx| vec![table.at(idx).to_string()])
}

pub fn read_value_csv(path: &Path, params: &ModelParams) -> Result<ValueTable> {
    let text = fs::read_to_string(path)?;
    let (pairs, body) = split_header(path, &text)?;
    check_hash(&params.params_hash(), &pairs["params_hash"])?;
    let meta = meta_from(path, &pairs)?;
    let j = read_rows(path, body, params, &["i", "y", "D", "J"])?;
    ValueTable::new(params.grid(), j, meta)
}

pub fn write_policy_csv(path: &Path, params: &ModelParams, policy: &PolicyTable) -> Result<()> {
    check_grid(params, policy.grid())?;
    let prices: Vec<f64> = policy
        .values()
        .iter()
        .map(|&u| price_of_threshold(params, u))
        .collect::<Result<_>>()?;
    write_rows(path, &policy.meta, params, &["i", "y", "D", "u", "pi"], |idx| {
        vec![policy.at(idx).to_string(), prices[idx].to_string()]
    })
}

pub fn read_policy_csv(path: &Path, params: &ModelParams) -> Result<PolicyTable> {
    let text = fs::read_to_string(path)?;
    let (pairs, body) = split_header(path, &text)?;
    check_hash(&params.params_hash(), &pairs["params_hash"])?;
    let meta = meta_from(path, &pairs)?;
    let u = read_rows(path, body, params, &["i", "y", "D", "u", "pi"])?;
    let table = PolicyTable::new(params.grid(), u, meta)?;
    table.check_against(params)?;
    Ok(table)
}

fn check_grid(params: &ModelParams, grid: Grid) -> Result<()> {
    if grid == params.grid() {
        Ok(())
    } else {
        Err(Error::Domain("table grid does not match the model".into()))
    }
}

/// Header line with the hash and the count scaling, then the twelve weights
/// one per line in feature order (up block, then down block; each
/// `i^2, i, y^2, y, i*y, 1` in rescaled coordinates).
pub fn write_weights(path: &Path, params: &ModelParams, w: &WeightVector) -> Result<()> {
    let mut s = format!(
        "# params_hash={} i_lo={} i_hi={}\n",
        params.params_hash(),
        w.scaling.i_lo,
        w.scaling.i_hi
    );
    for v in &w.r {
        s.push_str(&format!("{v}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_weights(path: &Path, params: &ModelParams) -> Result<WeightVector> {
    let text = fs::read_to_string(path)?;
    let (pairs, body) = split_header(path, &text)?;
    check_hash(&params.params_hash(), &pairs["params_hash"])?;
    let scale = |k: &str| -> Result<f64> {
        pairs
            .get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::artifact(path, format!("missing `{k}`")))
    };
    let vals: Vec<f64> = body
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<f64>().map_err(|_| Error::artifact(path, format!("bad weight `{l}`"))))
        .collect::<Result<_>>()?;
    if vals.len() != N_FEATURES {
        return Err(Error::artifact(path, format!("expected {N_FEATURES} weights, found {}", vals.len())));
    }
    let mut r = [0.0; N_FEATURES];
    r.copy_from_slice(&vals);
    WeightVector::new(
        r,
        FeatureScaling {
            i_lo: scale("i_lo")?,
            i_hi: scale("i_hi")?,
        },
    )
}

/// Flat key-value description of a solve.
pub fn manifest(params: &ModelParams, report: &SolveReport, extra: &[(&str, Value)]) -> Table {
    let mut t = Table::new();
    t.insert("params_hash".into(), Value::String(params.params_hash()));
    t.insert("solver".into(), Value::String(report.solver.to_string()));
    t.insert("converged".into(), Value::Boolean(report.converged));
    t.insert("iterations".into(), Value::Integer(report.iterations as i64));
    t.insert("seconds".into(), Value::Float(report.seconds));
    if let Some(last) = report.history.last() {
        t.insert("final_change".into(), Value::Float(*last));
    }
    if let Some(seed) = report.seed {
        t.insert("seed".into(), Value::Integer(seed as i64));
    }
    if report.transitions > 0 {
        t.insert("transitions".into(), Value::Integer(report.transitions as i64));
    }
    if let Some(w) = &report.weights {
        t.insert("feature_i_lo".into(), Value::Float(w.scaling.i_lo));
        t.insert("feature_i_hi".into(), Value::Float(w.scaling.i_hi));
    }
    t.insert("dt".into(), Value::Float(params.dt()));
    t.insert("alpha".into(), Value::Float(params.alpha()));
    for (k, v) in extra {
        t.insert((*k).into(), v.clone());
    }
    t
}

pub fn write_manifest(path: &Path, table: &Table) -> Result<()> {
    let text = toml::to_string(table).map_err(|e| Error::artifact(path, e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    text.parse::<Table>().map_err(|e| Error::artifact(path, e.to_string()))
}

/// Fails with an integrity error unless the manifest was produced under
/// `params`.
pub fn check_manifest(path: &Path, params: &ModelParams) -> Result<Table> {
    let m = read_manifest(path)?;
    let found = m
        .get("params_hash")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::artifact(path, "manifest has no params_hash"))?;
    check_hash(&params.params_hash(), found)?;
    Ok(m)
}

pub fn write_signal_csv(path: &Path, params: &ModelParams, signal: &[SignalPoint]) -> Result<()> {
    let mut buf = format!("# params_hash={}\n", params.params_hash()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["t", "y", "D"])?;
        for (n, p) in signal.iter().enumerate() {
            w.write_record([
                (n as f64 * params.tau_y()).to_string(),
                params.y_of(p.k).to_string(),
                p.dir.sign().to_string(),
            ])?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, params: &ModelParams, trace: &SimTrace) -> Result<()> {
    let mut buf = format!("# params_hash={} seed={}\n", params.params_hash(), trace.seed).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["t", "y", "D", "i", "e", "u"])?;
        for r in &trace.rows {
            w.write_record([
                r.t.to_string(),
                params.y_of(r.k).to_string(),
                r.dir.sign().to_string(),
                r.i.to_string(),
                r.e.to_string(),
                r.u.to_string(),
            ])?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Histogram of each snapshot: `buckets` equal bins over the comfort band
/// plus one bin above it reaching `ceiling`. Idle zones below the band are
/// counted in the first bin.
pub fn write_snapshots_csv(path: &Path, params: &ModelParams, trace: &SimTrace, buckets: usize, ceiling: f64) -> Result<()> {
    let (lo, hi) = (params.t_min(), params.t_max());
    let width = (hi - lo) / buckets as f64;
    let mut buf = format!("# params_hash={} seed={}\n", params.params_hash(), trace.seed).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["t", "bucket_low", "bucket_high", "count"])?;
        for snap in &trace.snapshots {
            let mut counts = vec![0usize; buckets + 1];
            for &x in &snap.idle {
                let b = if x >= hi {
                    buckets
                } else {
                    (((x - lo) / width).floor().max(0.0) as usize).min(buckets - 1)
                };
                counts[b] += 1;
            }
            for (b, c) in counts.iter().enumerate() {
                let (l, h) = if b < buckets {
                    (lo + b as f64 * width, lo + (b + 1) as f64 * width)
                } else {
                    (hi, ceiling)
                };
                w.write_record([snap.t.to_string(), l.to_string(), h.to_string(), c.to_string()])?;
            }
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

const MAGIC: &[u8; 8] = b"RGDPPOL1";

/// Little-endian binary form of a policy table:
///
/// ```text
/// magic        8 bytes  "RGDPPOL1"
/// n1, n2       u32, u32
/// k_max        u32
/// iterations   u64
/// tol, final_change, resolution   f64 x 3
/// hash_len     u32, then hash bytes (UTF-8)
/// solver_len   u32, then solver bytes (UTF-8)
/// thresholds   f64 x (2 (n2 - n1 + 1) (2 k_max + 1)), in (D, y, i) order
/// ```
pub fn encode_policy(p: &PolicyTable) -> Vec<u8> {
    let g = p.grid();
    let mut out = Vec::with_capacity(64 + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&g.n1.to_le_bytes());
    out.extend_from_slice(&g.n2.to_le_bytes());
    out.extend_from_slice(&(g.k_max as u32).to_le_bytes());
    out.extend_from_slice(&(p.meta.iterations as u64).to_le_bytes());
    for v in [p.meta.tol, p.meta.final_change, p.meta.resolution] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in [&p.meta.params_hash, &p.meta.solver] {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    for v in p.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Domain("truncated policy blob".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Domain("policy blob string is not UTF-8".into()))
    }
}

pub fn decode_policy(buf: &[u8]) -> Result<PolicyTable> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Domain("not a policy blob".into()));
    }
    let n1 = c.u32()?;
    let n2 = c.u32()?;
    let k_max = c.u32()?;
    if n1 > n2 || k_max == 0 || k_max > i32::MAX as u32 / 2 {
        return Err(Error::Domain("policy blob has an invalid grid".into()));
    }
    let grid = Grid {
        n1,
        n2,
        k_max: k_max as i32,
    };
    let iterations = c.u64()? as usize;
    let tol = c.f64()?;
    let final_change = c.f64()?;
    let resolution = c.f64()?;
    let params_hash = c.string()?;
    let solver = c.string()?;
    let expected = grid.len().checked_mul(8).ok_or_else(|| Error::Domain("policy blob too large".into()))?;
    if buf.len() - c.pos != expected {
        return Err(Error::Domain(format!(
            "policy blob has {} payload bytes, grid needs {expected}",
            buf.len() - c.pos
        )));
    }
    let u = (0..grid.len()).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    PolicyTable::new(
        grid,
        u,
        TableMeta {
            solver,
            iterations,
            tol,
            final_change,
            params_hash,
            resolution,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSpec;

    fn small() -> ModelParams {
        ParamSpec {
            n: 12,
            n2: 12,
            n_bar: 6.0,
            r: 2.0,
            delta_y: 0.5,
            ..ParamSpec::default()
        }
        .build()
        .unwrap()
    }

    #[test]
    fn csv_round_trip_and_hash_check() {
        let p = small();
        let dir = tempfile::tempdir().unwrap();
        let g = p.grid();
        let mut meta = TableMeta::synthetic(p.params_hash());
        meta.solver = "avi".into();
        meta.tol = 1e-6;
        meta.final_change = 5e-7;
        let j: Vec<f64> = (0..g.len()).map(|x| (x as f64).sqrt() * 1.1e-3 - 0.3).collect();
        let t = ValueTable::new(g, j, meta.clone()).unwrap();
        let path = dir.path().join("value.csv");
        write_value_csv(&path, &p, &t).unwrap();
        let back = read_value_csv(&path, &p).unwrap();
        assert_eq!(back, t);

        let pol = PolicyTable::new(g, (0..g.len()).map(|x| (x % 11) as f64 * 0.9).collect(), meta).unwrap();
        let path = dir.path().join("policy.csv");
        write_policy_csv(&path, &p, &pol).unwrap();
        assert_eq!(read_policy_csv(&path, &p).unwrap(), pol);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap() == "i,y,D,u,pi");
        assert!(text.lines().nth(2).unwrap().starts_with("0,-1,-1,"));

        let other = ParamSpec {
            mu: 0.6,
            ..p.spec().clone()
        }
        .build()
        .unwrap();
        assert!(matches!(read_policy_csv(&path, &other), Err(Error::Integrity { .. })));
    }

    #[test]
    fn weights_round_trip() {
        let p = small();
        let dir = tempfile::tempdir().unwrap();
        let w = WeightVector::new(
            [1.0, -2.5, 3.25, 0.0, 1e-9, 7.0, -1.0, 2.0, 0.5, -0.25, 4.0, 8.0],
            FeatureScaling::for_params(&p),
        )
        .unwrap();
        let path = dir.path().join("weights.txt");
        write_weights(&path, &p, &w).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 12);
        assert_eq!(read_weights(&path, &p).unwrap(), w);
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(decode_policy(b"nope").is_err());
        let p = small();
        let pol = PolicyTable::constant(p.grid(), 2.0, TableMeta::synthetic("abc"));
        let mut blob = encode_policy(&pol);
        assert_eq!(decode_policy(&blob).unwrap(), pol);
        blob.pop();
        assert!(decode_policy(&blob).is_err());
    }
}
