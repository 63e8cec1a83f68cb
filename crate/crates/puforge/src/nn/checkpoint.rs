use crate::error::{Error, Result};
use crate::nn::model::{Activation, ModelParams};
use std::fmt::Write as _;
use std::path::Path;

const HEADER: &str = "puforge-model v1";

/// Formats an f64 with 17 significant digits, enough for an exact
/// parse-back of every finite double.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes a model to the versioned text format:
/// header, `dims`, `activation`, then one block per layer holding the
/// row-major weight rows followed by a `bias` line.
pub fn save_model(model: &ModelParams, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str("dims");
    for d in &model.layer_dims {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    writeln!(out, "activation {}", model.activation.name()).unwrap();
    for l in 0..model.num_layers() {
        writeln!(out, "layer {l}").unwrap();
        let in_dim = model.layer_dims[l];
        let out_dim = model.layer_dims[l + 1];
        for j in 0..out_dim {
            let row = &model.weights[l][j * in_dim..(j + 1) * in_dim];
            let line: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        let bias: Vec<String> = model.biases[l].iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "bias {}", bias.join(" ")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    num: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some(line) => {
                self.num += 1;
                Ok((self.num, line))
            }
            None => Err(Error::parse(self.num + 1, "unexpected end of file")),
        }
    }
}

fn parse_floats(line: &str, num: usize, expected: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(num, format!("bad {what} value '{tok}'")))
        })
        .collect();
    let vals = vals?;
    if vals.len() != expected {
        return Err(Error::parse(
            num,
            format!("{what} expects {expected} values, got {}", vals.len()),
        ));
    }
    Ok(vals)
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = Lines {
        inner: text.lines(),
        num: 0,
    };

    let (num, header) = lines.next()?;
    if header.trim_end() != HEADER {
        return Err(Error::parse(num, format!("expected '{HEADER}'")));
    }

    let (num, dims_line) = lines.next()?;
    let mut toks = dims_line.split_whitespace();
    if toks.next() != Some("dims") {
        return Err(Error::parse(num, "expected 'dims' line"));
    }
    let layer_dims: Result<Vec<usize>> = toks
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::parse(num, format!("bad dimension '{t}'")))
        })
        .collect();
    let layer_dims = layer_dims?;
    if layer_dims.len() < 2 {
        return Err(Error::parse(num, "dims line needs at least two entries"));
    }

    let (num, act_line) = lines.next()?;
    let act_name = act_line
        .strip_prefix("activation ")
        .ok_or_else(|| Error::parse(num, "expected 'activation' line"))?;
    let activation = Activation::from_name(act_name.trim())
        .ok_or_else(|| Error::parse(num, format!("unknown activation '{act_name}'")))?;

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..layer_dims.len() - 1 {
        let (num, layer_line) = lines.next()?;
        if layer_line.trim() != format!("layer {l}") {
            return Err(Error::parse(num, format!("expected 'layer {l}'")));
        }
        let in_dim = layer_dims[l];
        let out_dim = layer_dims[l + 1];
        let mut w = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..out_dim {
            let (num, row) = lines.next()?;
            w.extend(parse_floats(row, num, in_dim, "weight row")?);
        }
        let (num, bias_line) = lines.next()?;
        let bias_body = bias_line
            .strip_prefix("bias ")
            .ok_or_else(|| Error::parse(num, "expected 'bias' line"))?;
        biases.push(parse_floats(bias_body, num, out_dim, "bias")?);
        weights.push(w);
    }
    if let Some(extra) = lines.inner.next() {
        if !extra.trim().is_empty() {
            return Err(Error::parse(lines.num + 1, "trailing content after model"));
        }
    }
    Ok(ModelParams {
        layer_dims,
        weights,
        biases,
        activation,
    })
}
