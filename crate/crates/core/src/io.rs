//! File formats: channel dataset CSV, flat key=value config files, and the
//! interleaved real/imag CSV used for basis matrices.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{Complex, DVector};

use crate::channel::{ChannelDataset, ChannelSample, SystemConfig};
use crate::error::{Error, Result};
use crate::scalar::{dbm_to_mw, mw_to_dbm, Real};
use crate::stiefel::{CMatrix, CVector};

fn fmt<R: Real>(v: R) -> String {
    format!("{:?}", v.to_f64().unwrap_or(f64::NAN))
}

fn parse_real<R: Real>(s: &str) -> Result<R> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    R::from_f64(v).ok_or_else(|| Error::Parse(format!("value out of range: {s:?}")))
}

/// Dataset header: `t,re_hjb_1,im_hjb_1,...,re_haw,im_haw,re_hjw_1,...`
pub fn dataset_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for k in 1..=n {
        h.push(format!("re_hjb_{k}"));
        h.push(format!("im_hjb_{k}"));
    }
    h.push("re_haw".into());
    h.push("im_haw".into());
    for k in 1..=n {
        h.push(format!("re_hjw_{k}"));
        h.push(format!("im_hjw_{k}"));
    }
    h
}

pub fn write_dataset_csv<R: Real>(ds: &ChannelDataset<R>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    let n = ds.samples.first().map_or(0, |s| s.h_jb.len());
    w.write_record(dataset_header(n))?;
    for (t, s) in ds.samples.iter().enumerate() {
        let mut row = vec![t.to_string()];
        for z in s.h_jb.iter() {
            row.push(fmt(z.re));
            row.push(fmt(z.im));
        }
        row.push(fmt(s.h_aw.re));
        row.push(fmt(s.h_aw.im));
        for z in s.h_jw.iter() {
            row.push(fmt(z.re));
            row.push(fmt(z.im));
        }
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_dataset_csv<R: Real>(path: &Path, seed: u64) -> Result<ChannelDataset<R>> {
    let mut r = csv::Reader::from_path(path).map_err(Error::from)?;
    let headers = r.headers()?.clone();
    let width = headers.len();
    if width < 3 || (width - 3) % 4 != 0 {
        return Err(Error::Parse(format!(
            "unexpected dataset column count {width}"
        )));
    }
    let n = (width - 3) / 4;
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let get = |i: usize| -> Result<R> { parse_real(&rec[i]) };
        let mut h_jb = CVector::<R>::zeros(n);
        for k in 0..n {
            h_jb[k] = Complex::new(get(1 + 2 * k)?, get(2 + 2 * k)?);
        }
        let base = 1 + 2 * n;
        let h_aw = Complex::new(get(base)?, get(base + 1)?);
        let mut h_jw = CVector::<R>::zeros(n);
        for k in 0..n {
            h_jw[k] = Complex::new(get(base + 2 + 2 * k)?, get(base + 3 + 2 * k)?);
        }
        samples.push(ChannelSample { h_jb, h_aw, h_jw });
    }
    Ok(ChannelDataset { samples, seed })
}

/// Flat key=value serialization of a config, echoed into results directories.
/// Powers are written in dBm; the frozen channel constants are written
/// entrywise so a dump fully determines the run.
pub fn config_to_kv<R: Real>(cfg: &SystemConfig<R>) -> BTreeMap<String, String> {
    let mut kv = BTreeMap::new();
    kv.insert("n".into(), cfg.n.to_string());
    kv.insert("p".into(), cfg.p.to_string());
    kv.insert("P_a_dbm".into(), fmt(mw_to_dbm(cfg.p_a)));
    kv.insert("P_j_dbm".into(), fmt(mw_to_dbm(cfg.p_j)));
    kv.insert("sigma_w2_dbm".into(), fmt(mw_to_dbm(cfg.sigma_w2)));
    kv.insert("sigma_b2_dbm".into(), fmt(mw_to_dbm(cfg.sigma_b2)));
    kv.insert("sigma_aw2".into(), fmt(cfg.sigma_aw2));
    kv.insert("mu".into(), fmt(cfg.mu));
    kv.insert("T".into(), cfg.t.to_string());
    kv.insert("scaled".into(), cfg.scaled.to_string());
    kv.insert("h_ab_re".into(), fmt(cfg.h_ab.re));
    kv.insert("h_ab_im".into(), fmt(cfg.h_ab.im));
    for k in 0..cfg.n {
        kv.insert(format!("h_jb_hat_{}_re", k + 1), fmt(cfg.h_jb_hat[k].re));
        kv.insert(format!("h_jb_hat_{}_im", k + 1), fmt(cfg.h_jb_hat[k].im));
        kv.insert(format!("sigma_jb2_{}", k + 1), fmt(cfg.sigma_jb2[k]));
        kv.insert(format!("sigma_jw2_{}", k + 1), fmt(cfg.sigma_jw2[k]));
    }
    kv
}

pub fn config_from_kv<R: Real>(kv: &BTreeMap<String, String>) -> Result<SystemConfig<R>> {
    let get = |key: &str| -> Result<&String> {
        kv.get(key)
            .ok_or_else(|| Error::Parse(format!("missing config key {key:?}")))
    };
    let n: usize = get("n")?
        .parse()
        .map_err(|_| Error::Parse("bad n".into()))?;
    let p: usize = get("p")?
        .parse()
        .map_err(|_| Error::Parse("bad p".into()))?;
    let t: usize = get("T")?
        .parse()
        .map_err(|_| Error::Parse("bad T".into()))?;
    let scaled: bool = get("scaled")?
        .parse()
        .map_err(|_| Error::Parse("bad scaled".into()))?;
    let mut h_jb_hat = CVector::<R>::zeros(n);
    let mut sigma_jb2 = DVector::<R>::zeros(n);
    let mut sigma_jw2 = DVector::<R>::zeros(n);
    for k in 0..n {
        h_jb_hat[k] = Complex::new(
            parse_real(get(&format!("h_jb_hat_{}_re", k + 1))?)?,
            parse_real(get(&format!("h_jb_hat_{}_im", k + 1))?)?,
        );
        sigma_jb2[k] = parse_real(get(&format!("sigma_jb2_{}", k + 1))?)?;
        sigma_jw2[k] = parse_real(get(&format!("sigma_jw2_{}", k + 1))?)?;
    }
    let cfg = SystemConfig {
        n,
        p,
        p_a: dbm_to_mw(parse_real(get("P_a_dbm")?)?),
        p_j: dbm_to_mw(parse_real(get("P_j_dbm")?)?),
        sigma_w2: dbm_to_mw(parse_real(get("sigma_w2_dbm")?)?),
        sigma_b2: dbm_to_mw(parse_real(get("sigma_b2_dbm")?)?),
        h_ab: Complex::new(parse_real(get("h_ab_re")?)?, parse_real(get("h_ab_im")?)?),
        h_jb_hat,
        sigma_jb2,
        sigma_aw2: parse_real(get("sigma_aw2")?)?,
        sigma_jw2,
        mu: parse_real(get("mu")?)?,
        t,
        scaled,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_kv(kv: &BTreeMap<String, String>, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for (k, v) in kv {
        writeln!(f, "{k}={v}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_kv(&text)
}

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(kv)
}

/// Writes a complex matrix as CSV rows of interleaved real/imag entries:
/// row i is `re_xi1,im_xi1,re_xi2,im_xi2,...`.
pub fn write_complex_matrix_csv<R: Real>(m: &CMatrix<R>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    for i in 0..m.nrows() {
        let mut row = Vec::with_capacity(2 * m.ncols());
        for j in 0..m.ncols() {
            row.push(fmt(m[(i, j)].re));
            row.push(fmt(m[(i, j)].im));
        }
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_complex_matrix_csv<R: Real>(path: &Path) -> Result<CMatrix<R>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(Error::from)?;
    let mut rows: Vec<Vec<Complex<R>>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() % 2 != 0 {
            return Err(Error::Parse("odd column count in matrix CSV".into()));
        }
        let mut row = Vec::with_capacity(rec.len() / 2);
        for j in 0..rec.len() / 2 {
            row.push(Complex::new(
                parse_real(&rec[2 * j])?,
                parse_real(&rec[2 * j + 1])?,
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix CSV".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix CSV".into()));
    }
    Ok(CMatrix::<R>::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
