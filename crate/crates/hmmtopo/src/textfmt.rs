//! Versioned text serialization for models, one model per file.
//!
//! Grammar (line oriented, `#` starts a comment line, tokens separated by
//! single spaces):
//!
//! ```text
//! HMMTOPO 1
//! label <token>
//! states <N> dim <D>
//! transitions
//! <N+2 rows of N+2 linear probabilities>    # row/column order: entry, state 0..N-1, exit
//! state <index> <name>                      # N blocks, in state order
//! mixture <M>
//! weight <w>                                # M repetitions of weight/mean/var
//! mean <D values>
//! var <D values>
//! end
//! ```
//!
//! Every float is printed with 17 significant digits (`{:.16e}`), which
//! pins the `f64` bit pattern: parse → print is the identity on files this
//! module wrote. A custom format instead of an existing toolkit's keeps
//! round trips bit-stable with zero external dependencies.

use std::fs;
use std::path::Path;

use crate::emission::{Gaussian, GmmEmission};
use crate::error::{Error, Result};
use crate::model::{HmmModel, Node, TransitionMatrix};

/// Render a float with 17 significant digits.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialize a model to its canonical text form.
pub fn model_to_string(model: &HmmModel) -> String {
    let n = model.n_states();
    let d = model.dim();
    let mut out = String::new();
    out.push_str("HMMTOPO 1\n");
    out.push_str(&format!("label {}\n", model.label()));
    out.push_str(&format!("states {n} dim {d}\n"));
    out.push_str("transitions\n");
    let t = model.transitions();
    for from in t.nodes() {
        let row: Vec<String> = t
            .nodes()
            .map(|to| fmt_f64(t.prob(from, to).linear()))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    for (i, e) in model.emissions().iter().enumerate() {
        out.push_str(&format!("state {i} {}\n", model.state_name(i)));
        out.push_str(&format!("mixture {}\n", e.m()));
        for (w, c) in e.weights().iter().zip(e.components()) {
            out.push_str(&format!("weight {}\n", fmt_f64(*w)));
            let mean: Vec<String> = c.mean().iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&format!("mean {}\n", mean.join(" ")));
            let var: Vec<String> = c.var().iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&format!("var {}\n", var.join(" ")));
        }
    }
    out.push_str("end\n");
    out
}

pub fn write_model(model: &HmmModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

struct LineReader<'a> {
    path: &'a Path,
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> LineReader<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .collect();
        LineReader {
            path,
            lines,
            pos: 0,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::ModelParse {
            path: self.path.into(),
            line,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let item = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err(self.lines.len() + 1, "unexpected end of file"))?;
        self.pos += 1;
        Ok(item)
    }
}

fn parse_floats(reader: &LineReader, line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| reader.err(line, format!("bad float `{t}`")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(reader.err(
            line,
            format!("expected {expected} values, got {}", vals.len()),
        ));
    }
    Ok(vals)
}

/// Parse a model from its text form.
pub fn model_from_string(path: &Path, text: &str) -> Result<HmmModel> {
    let mut r = LineReader::new(path, text);

    let (ln, header) = r.next()?;
    if header.trim() != "HMMTOPO 1" {
        return Err(r.err(ln, format!("bad header `{header}`, expected `HMMTOPO 1`")));
    }

    let (ln, label_line) = r.next()?;
    let label = label_line
        .strip_prefix("label ")
        .ok_or_else(|| r.err(ln, "expected `label <token>`"))?
        .trim()
        .to_string();
    if label.is_empty() || label.contains(char::is_whitespace) {
        return Err(r.err(ln, "label must be a single non-empty token"));
    }

    let (ln, dims) = r.next()?;
    let toks: Vec<&str> = dims.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "states" || toks[2] != "dim" {
        return Err(r.err(ln, "expected `states <N> dim <D>`"));
    }
    let n: usize = toks[1]
        .parse()
        .map_err(|_| r.err(ln, format!("bad state count `{}`", toks[1])))?;
    let d: usize = toks[3]
        .parse()
        .map_err(|_| r.err(ln, format!("bad dimension `{}`", toks[3])))?;
    if n == 0 || d == 0 {
        return Err(r.err(ln, format!("degenerate model shape states={n} dim={d}")));
    }

    let (ln, marker) = r.next()?;
    if marker.trim() != "transitions" {
        return Err(r.err(ln, "expected `transitions`"));
    }
    let mut trans = TransitionMatrix::new(n);
    let side = n + 2;
    for i in 0..side {
        let (ln, row) = r.next()?;
        let vals = parse_floats(&r, ln, row, side)?;
        for (j, &p) in vals.iter().enumerate() {
            if p < 0.0 || p > 1.0 + 1e-9 || !p.is_finite() {
                return Err(r.err(ln, format!("bad probability {p}")));
            }
            if p > 0.0 {
                trans.set_ln(Node::from_index(i, n), Node::from_index(j, n), p.ln());
            }
        }
    }

    let mut state_names = Vec::with_capacity(n);
    let mut emissions = Vec::with_capacity(n);
    for i in 0..n {
        let (ln, header) = r.next()?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != "state" {
            return Err(r.err(ln, format!("expected `state {i} <name>`")));
        }
        let idx: usize = toks[1]
            .parse()
            .map_err(|_| r.err(ln, format!("bad state index `{}`", toks[1])))?;
        if idx != i {
            return Err(r.err(ln, format!("state blocks out of order: got {idx}, expected {i}")));
        }
        state_names.push(toks[2].to_string());

        let (ln, mline) = r.next()?;
        let m: usize = mline
            .strip_prefix("mixture ")
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| r.err(ln, "expected `mixture <M>`"))?;
        if m == 0 {
            return Err(r.err(ln, "mixture must have at least one component"));
        }
        let mut weights = Vec::with_capacity(m);
        let mut comps = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, wline) = r.next()?;
            let w: f64 = wline
                .strip_prefix("weight ")
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| r.err(ln, "expected `weight <w>`"))?;
            let (ln, mline) = r.next()?;
            let mean = parse_floats(
                &r,
                ln,
                mline
                    .strip_prefix("mean ")
                    .ok_or_else(|| r.err(ln, "expected `mean <values>`"))?,
                d,
            )?;
            let (ln, vline) = r.next()?;
            let var = parse_floats(
                &r,
                ln,
                vline
                    .strip_prefix("var ")
                    .ok_or_else(|| r.err(ln, "expected `var <values>`"))?,
                d,
            )?;
            weights.push(w);
            comps.push(Gaussian::new(mean, var)?);
        }
        emissions.push(GmmEmission::new(weights, comps)?);
    }

    let (ln, fin) = r.next()?;
    if fin.trim() != "end" {
        return Err(r.err(ln, "expected `end`"));
    }

    HmmModel::with_state_names(label, state_names, trans, emissions)
}

pub fn read_model(path: &Path) -> Result<HmmModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_string(path, &text)
}

/// Load every `*.hmm` file in a directory, sorted by file name.
pub fn read_model_dir(dir: &Path) -> Result<Vec<HmmModel>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "hmm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Usage(format!(
            "no .hmm model files in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| read_model(p)).collect()
}
