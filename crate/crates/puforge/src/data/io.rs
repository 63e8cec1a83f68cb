//! Text file format for datasets.
//!
//! Line 1 is a versioned header:
//! `puforge-data v1 n=<n> d=<d> prior=<p> r=<r> seed=<s>`
//! followed by exactly `n` sample rows of `d` comma-separated feature
//! values, the true label (`+1`/`-1`), and the mark (`P`, `U`, or `-` when
//! the dataset is fully supervised; `r` is `-` in that case too).
//!
//! Floats are written with 17 significant digits so a save/load round trip
//! is bit-exact. A header prior written as `empirical:<p>` declares the
//! value to be the recomputed class frequency; the loader re-counts and
//! rejects the file when they disagree by more than `1/n`.

use crate::data::{Dataset, PuMark, Sample};
use crate::error::{Error, Result};
use crate::nn::fmt_f64;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "puforge-data";
const VERSION: &str = "v1";

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let r_field = match dataset.r {
        Some(r) => fmt_f64(r),
        None => "-".to_string(),
    };
    writeln!(
        out,
        "{MAGIC} {VERSION} n={} d={} prior={} r={} seed={}",
        dataset.len(),
        dataset.dim,
        fmt_f64(dataset.pi_p),
        r_field,
        dataset.seed
    )
    .unwrap();
    for s in &dataset.samples {
        if s.features.len() != dataset.dim {
            return Err(Error::shape("sample features", dataset.dim, s.features.len()));
        }
        for f in &s.features {
            out.push_str(&fmt_f64(*f));
            out.push(',');
        }
        out.push_str(if s.true_label == 1 { "+1" } else { "-1" });
        out.push(',');
        out.push_str(match s.mark {
            Some(PuMark::P) => "P",
            Some(PuMark::U) => "U",
            None => "-",
        });
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct Header {
    n: usize,
    d: usize,
    prior: f64,
    prior_is_empirical: bool,
    r: Option<f64>,
    seed: u64,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut toks = line.split_whitespace();
    if toks.next() != Some(MAGIC) {
        return Err(Error::parse(1, format!("expected '{MAGIC}' magic")));
    }
    match toks.next() {
        Some(VERSION) => {}
        Some(v) => return Err(Error::parse(1, format!("unsupported version '{v}'"))),
        None => return Err(Error::parse(1, "missing version")),
    }
    let mut field = |key: &str| -> Result<String> {
        let tok = toks
            .next()
            .ok_or_else(|| Error::parse(1, format!("missing header field '{key}'")))?;
        tok.strip_prefix(&format!("{key}="))
            .map(str::to_string)
            .ok_or_else(|| Error::parse(1, format!("expected '{key}=', got '{tok}'")))
    };
    let n: usize = field("n")?
        .parse()
        .map_err(|_| Error::parse(1, "bad sample count"))?;
    let d: usize = field("d")?
        .parse()
        .map_err(|_| Error::parse(1, "bad dimension"))?;
    let prior_raw = field("prior")?;
    let (prior_is_empirical, prior_str) = match prior_raw.strip_prefix("empirical:") {
        Some(rest) => (true, rest.to_string()),
        None => (false, prior_raw),
    };
    let prior: f64 = prior_str
        .parse()
        .map_err(|_| Error::parse(1, "bad prior"))?;
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::parse(1, format!("prior must be in (0, 1), got {prior}")));
    }
    let r_raw = field("r")?;
    let r = if r_raw == "-" {
        None
    } else {
        let r: f64 = r_raw.parse().map_err(|_| Error::parse(1, "bad r"))?;
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::parse(1, format!("r must be in (0, 1], got {r}")));
        }
        Some(r)
    };
    let seed: u64 = field("seed")?
        .parse()
        .map_err(|_| Error::parse(1, "bad seed"))?;
    Ok(Header {
        n,
        d,
        prior,
        prior_is_empirical,
        r,
        seed,
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read dataset {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file"))?;
    let header = parse_header(header_line)?;

    let mut samples = Vec::with_capacity(header.n);
    for _ in 0..header.n {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| {
                Error::parse(
                    samples.len() + 2,
                    format!("expected {} rows, file ends after {}", header.n, samples.len()),
                )
            })?;
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.d + 2 {
            return Err(Error::parse(
                line_no,
                format!("expected {} fields, got {}", header.d + 2, fields.len()),
            ));
        }
        let mut features = Vec::with_capacity(header.d);
        for tok in &fields[..header.d] {
            features.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(line_no, format!("bad feature '{tok}'")))?,
            );
        }
        let true_label = match fields[header.d] {
            "+1" | "1" => 1i8,
            "-1" => -1,
            other => return Err(Error::parse(line_no, format!("bad label '{other}'"))),
        };
        let mark = match fields[header.d + 1] {
            "P" => Some(PuMark::P),
            "U" => Some(PuMark::U),
            "-" => None,
            other => return Err(Error::parse(line_no, format!("bad mark '{other}'"))),
        };
        samples.push(Sample {
            features,
            true_label,
            mark,
        });
    }
    if let Some((idx, line)) = lines.next() {
        if !line.trim().is_empty() {
            return Err(Error::parse(idx + 1, "trailing content after last row"));
        }
    }

    let marked = samples.iter().filter(|s| s.mark.is_some()).count();
    if marked != 0 && marked != samples.len() {
        return Err(Error::data(format!(
            "marks must cover all samples or none, found {marked} of {}",
            samples.len()
        )));
    }
    if (marked > 0) != header.r.is_some() {
        return Err(Error::data(
            "header r and per-sample marks disagree about the PU view",
        ));
    }
    if samples
        .iter()
        .any(|s| s.mark == Some(PuMark::P) && s.true_label != 1)
    {
        return Err(Error::data("a P-marked sample has a negative true label"));
    }
    if header.prior_is_empirical {
        let n_pos = samples.iter().filter(|s| s.true_label == 1).count();
        let empirical = n_pos as f64 / header.n as f64;
        if (header.prior - empirical).abs() > 1.0 / header.n as f64 {
            return Err(Error::data(format!(
                "empirical prior {} disagrees with recount {empirical}",
                header.prior
            )));
        }
    }
    Ok(Dataset {
        samples,
        dim: header.d,
        pi_p: header.prior,
        r: header.r,
        seed: header.seed,
    })
}
