//! Versioned plain-text model files. Values are written with 17 significant
//! digits so a save/load round trip reproduces every parameter bitwise.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::dense::Activation;
use crate::models::{DenseNet, KernelRidge, Model, RbfNet};
use crate::tensor::Tensor2;

const MAGIC: &str = "regraft-model";
const VERSION: &str = "v1";

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let run = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        match model {
            Model::Dense(m) => {
                writeln!(w, "{} {} dense", MAGIC, VERSION)?;
                writeln!(w, "input_dim {}", crate::models::Predictor::input_dim(m))?;
                writeln!(w, "output_dim {}", m.output_dim())?;
                write!(w, "hidden")?;
                for h in m.hidden() {
                    write!(w, " {}", h)?;
                }
                writeln!(w)?;
                writeln!(w, "activation {}", m.activation().name())?;
                write_params(w, crate::models::Differentiable::params(m))?;
            }
            Model::Rbf(m) => {
                writeln!(w, "{} {} rbf", MAGIC, VERSION)?;
                writeln!(w, "input_dim {}", crate::models::Predictor::input_dim(m))?;
                writeln!(w, "centers {}", m.centers())?;
                write_params(w, crate::models::Differentiable::params(m))?;
            }
            Model::Krr(m) => {
                let (support, alpha, sigma, lambda) = m.raw_parts();
                writeln!(w, "{} {} krr", MAGIC, VERSION)?;
                writeln!(w, "input_dim {}", m.input_dim())?;
                writeln!(w, "support {}", m.support_count())?;
                writeln!(w, "sigma {:.16e}", sigma)?;
                writeln!(w, "lambda {:.16e}", lambda)?;
                let mut all = Vec::with_capacity(support.len() + alpha.len());
                all.extend_from_slice(support.data());
                all.extend_from_slice(alpha.data());
                write_params(w, &all)?;
            }
        }
        w.flush()
    };
    run(&mut w).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_params(w: &mut impl Write, params: &[f64]) -> std::io::Result<()> {
    writeln!(w, "params {}", params.len())?;
    for p in params {
        writeln!(w, "{:.16e}", p)?;
    }
    Ok(())
}

struct LineReader {
    path: String,
    lines: std::io::Lines<BufReader<File>>,
    lineno: usize,
}

impl LineReader {
    fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(LineReader {
            path: path.display().to_string(),
            lines: BufReader::new(file).lines(),
            lineno: 0,
        })
    }

    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::parse(&self.path, self.lineno, msg)
    }

    fn next_line(&mut self) -> Result<String> {
        self.lineno += 1;
        match self.lines.next() {
            Some(Ok(line)) => Ok(line),
            Some(Err(e)) => Err(Error::io(self.path.clone(), e)),
            None => Err(self.fail("unexpected end of file")),
        }
    }

    /// Read a `key value...` line, returning the value part.
    fn keyed(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.trim().to_string()),
            _ if line.trim() == key => Ok(String::new()),
            _ => Err(self.fail(format!("expected {:?} line, got {:?}", key, line))),
        }
    }

    fn keyed_usize(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| self.fail(format!("{} must be an integer, got {:?}", key, v)))
    }

    fn keyed_f64(&mut self, key: &str) -> Result<f64> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| self.fail(format!("{} must be a number, got {:?}", key, v)))
    }

    fn params(&mut self, expected: usize) -> Result<Vec<f64>> {
        let n = self.keyed_usize("params")?;
        if n != expected {
            return Err(self.fail(format!("expected {} parameters, header says {}", expected, n)));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let line = self.next_line()?;
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| self.fail(format!("bad parameter value {:?}", line)))?;
            out.push(v);
        }
        Ok(out)
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    let mut r = LineReader::open(path)?;
    let header = r.next_line()?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(r.fail(format!("not a model file: {:?}", header)));
    }
    match parts.next() {
        Some(VERSION) => {}
        Some(other) => return Err(r.fail(format!("unsupported format version {:?}", other))),
        None => return Err(r.fail("missing format version")),
    }
    let kind = parts
        .next()
        .ok_or_else(|| r.fail("missing model kind"))?
        .to_string();

    match kind.as_str() {
        "dense" => {
            let input_dim = r.keyed_usize("input_dim")?;
            let output_dim = r.keyed_usize("output_dim")?;
            let hidden_raw = r.keyed("hidden")?;
            let hidden: Vec<usize> = hidden_raw
                .split_whitespace()
                .map(|s| {
                    s.parse()
                        .map_err(|_| r.fail(format!("bad hidden width {:?}", s)))
                })
                .collect::<Result<_>>()?;
            let act_raw = r.keyed("activation")?;
            let activation = Activation::parse(&act_raw).map_err(|_| {
                r.fail(format!("unknown activation {:?}", act_raw))
            })?;
            let mut widths = vec![input_dim];
            widths.extend_from_slice(&hidden);
            widths.push(output_dim);
            let count: usize = widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum();
            let theta = r.params(count)?;
            let net = DenseNet::from_raw(input_dim, hidden, output_dim, activation, theta)
                .map_err(|e| r.fail(e.to_string()))?;
            Ok(Model::Dense(net))
        }
        "rbf" => {
            let input_dim = r.keyed_usize("input_dim")?;
            let centers = r.keyed_usize("centers")?;
            let theta = r.params(centers * input_dim + 2 * centers + 1)?;
            let net = RbfNet::from_raw(input_dim, centers, theta)
                .map_err(|e| r.fail(e.to_string()))?;
            Ok(Model::Rbf(net))
        }
        "krr" => {
            let input_dim = r.keyed_usize("input_dim")?;
            let support = r.keyed_usize("support")?;
            let sigma = r.keyed_f64("sigma")?;
            let lambda = r.keyed_f64("lambda")?;
            let raw = r.params(support * input_dim + support)?;
            let sup = Tensor2::from_vec(support, input_dim, raw[..support * input_dim].to_vec())?;
            let alpha = Tensor2::from_vec(support, 1, raw[support * input_dim..].to_vec())?;
            let m = KernelRidge::from_raw(sup, alpha, sigma, lambda)
                .map_err(|e| r.fail(e.to_string()))?;
            Ok(Model::Krr(m))
        }
        other => Err(r.fail(format!("unknown model kind {:?}", other))),
    }
}
