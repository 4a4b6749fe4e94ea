//! Trained models: decision function, KKT violator test and the plain-text
//! model file format.
//!
//! File layout:
//!
//! ```text
//! randsvm-model v1 <task> <kernel> <param> <C> <bias> <nsv>
//! <index> <dualCoef> [<feature>:<value> ...]
//! ```
//!
//! `<task>` is `classify` or `regress:<epsilon>`, `<kernel>` is `linear`
//! (param `-`) or `gaussian` (param sigma). Each support-vector line carries
//! its training index, its coefficient and its features, so a model file
//! predicts on its own. Reals are written with 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dataset::{SparseDataset, SparseVec};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

const MAGIC: &str = "randsvm-model";
const VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Task {
    Classify,
    /// Regression with an insensitive tube of half-width `epsilon`.
    Regress { epsilon: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub task: Task,
    pub kernel: KernelSpec,
    pub c: f64,
    pub bias: f64,
    /// Indices into the training dataset.
    pub sv_indices: Vec<usize>,
    /// `alpha_i * y_i` for classification, `alpha_i+ - alpha_i-` for regression.
    pub dual_coef: Vec<f64>,
    pub sv_vectors: Vec<SparseVec>,
}

impl SvmModel {
    /// Model with no support vectors; its decision function is the constant `bias`.
    pub fn constant(task: Task, kernel: KernelSpec, c: f64, bias: f64) -> Self {
        Self {
            task,
            kernel,
            c,
            bias,
            sv_indices: Vec::new(),
            dual_coef: Vec::new(),
            sv_vectors: Vec::new(),
        }
    }

    pub fn n_sv(&self) -> usize {
        self.sv_indices.len()
    }

    pub fn decision(&self, x: &SparseVec) -> f64 {
        let sum: f64 = self
            .sv_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, &c)| c * self.kernel.eval_unchecked(sv, x))
            .sum();
        sum + self.bias
    }

    /// Primal weight vector for linear models, as dense coordinates `1..=d`.
    pub fn linear_weights(&self, d: usize) -> Option<Vec<f64>> {
        if self.kernel != KernelSpec::Linear {
            return None;
        }
        let mut w = vec![0.0; d];
        for (sv, &c) in self.sv_vectors.iter().zip(&self.dual_coef) {
            for &(i, v) in sv.entries() {
                if (i as usize) <= d {
                    w[i as usize - 1] += c * v;
                }
            }
        }
        Some(w)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let task = match self.task {
            Task::Classify => "classify".to_string(),
            Task::Regress { epsilon } => format!("regress:{epsilon:.16e}"),
        };
        let (kernel, param) = match self.kernel {
            KernelSpec::Linear => ("linear", "-".to_string()),
            KernelSpec::Gaussian { sigma } => ("gaussian", format!("{sigma:.16e}")),
        };
        writeln!(
            w,
            "{MAGIC} {VERSION} {task} {kernel} {param} {:.16e} {:.16e} {}",
            self.c,
            self.bias,
            self.n_sv()
        )?;
        for ((idx, coef), sv) in self.sv_indices.iter().zip(&self.dual_coef).zip(&self.sv_vectors) {
            write!(w, "{idx} {coef:.16e}")?;
            for &(i, v) in sv.entries() {
                write!(w, " {i}:{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn read_from(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.ok_or_else(|| perr(1, "empty model file"))?;
        let tok: Vec<&str> = header.split_ascii_whitespace().collect();
        if tok.len() != 8 || tok[0] != MAGIC {
            return Err(perr(1, "not a randsvm model header"));
        }
        if tok[1] != VERSION {
            return Err(perr(1, &format!("unsupported model version {}", tok[1])));
        }
        let task = match tok[2] {
            "classify" => Task::Classify,
            t => match t.strip_prefix("regress:") {
                Some(e) => Task::Regress { epsilon: num(e, 1)? },
                None => return Err(perr(1, &format!("unknown task {t}"))),
            },
        };
        let kernel = match (tok[3], tok[4]) {
            ("linear", "-") => KernelSpec::Linear,
            ("gaussian", s) => KernelSpec::gaussian(num(s, 1)?)?,
            (k, _) => return Err(perr(1, &format!("unknown kernel {k}"))),
        };
        let c = num(tok[5], 1)?;
        let bias = num(tok[6], 1)?;
        let nsv: usize = tok[7].parse().map_err(|_| perr(1, "bad support vector count"))?;

        let mut model = Self::constant(task, kernel, c, bias);
        for k in 0..nsv {
            let lineno = k + 2;
            let line = lines
                .next()
                .transpose()?
                .ok_or_else(|| perr(lineno, "missing support vector line"))?;
            let mut parts = line.split_ascii_whitespace();
            let idx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| perr(lineno, "bad support vector index"))?;
            let coef = num(parts.next().unwrap_or(""), lineno)?;
            let mut entries = Vec::new();
            for p in parts {
                let (i, v) = p.split_once(':').ok_or_else(|| perr(lineno, "bad feature"))?;
                let i: u32 = i.parse().map_err(|_| perr(lineno, "bad feature index"))?;
                entries.push((i, num(v, lineno)?));
            }
            let sv = SparseVec::new(entries).map_err(|e| perr(lineno, &e.to_string()))?;
            model.sv_indices.push(idx);
            model.dual_coef.push(coef);
            model.sv_vectors.push(sv);
        }
        Ok(model)
    }
}

fn perr(line: usize, msg: &str) -> Error {
    Error::Parse { line, msg: msg.to_string() }
}

fn num(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| perr(line, &format!("bad number {s:?}")))
}

/// Raw decision value `f(x) = sum_i coef_i k(sv_i, x) + bias`.
pub fn predict(model: &SvmModel, x: &SparseVec) -> f64 {
    model.decision(x)
}

/// KKT test for a point with zero dual coefficient: margin violation
/// `y f(x) < 1 - tol` for classification, tube violation
/// `|f(x) - y| > epsilon + tol` for regression.
pub fn violates(model: &SvmModel, ds: &SparseDataset, i: usize, tol: f64) -> bool {
    let f = model.decision(ds.x(i));
    let y = ds.y(i);
    match model.task {
        Task::Classify => y * f < 1.0 - tol,
        Task::Regress { epsilon } => (f - y).abs() > epsilon + tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabelKind;

    fn one_d(x: f64) -> SparseVec {
        SparseVec::from_dense(&[x])
    }

    fn unit_model() -> SvmModel {
        // Two-point solution: alpha = 0.5 each, w = 1, b = 0.
        SvmModel {
            task: Task::Classify,
            kernel: KernelSpec::Linear,
            c: 10.0,
            bias: 0.0,
            sv_indices: vec![0, 1],
            dual_coef: vec![0.5, -0.5],
            sv_vectors: vec![one_d(1.0), one_d(-1.0)],
        }
    }

    #[test]
    fn predict_two_point_model() {
        assert_eq!(predict(&unit_model(), &one_d(2.0)), 2.0);
        let flat = SvmModel::constant(Task::Regress { epsilon: 0.1 }, KernelSpec::Linear, 1.0, 3.0);
        assert_eq!(predict(&flat, &one_d(7.0)), 3.0);
    }

    #[test]
    fn violator_predicate() {
        let ds = SparseDataset::new(
            vec![one_d(2.0), one_d(0.5)],
            vec![1.0, 1.0],
            LabelKind::Binary,
        )
        .unwrap();
        let m = unit_model();
        assert!(!violates(&m, &ds, 0, 1e-3));
        assert!(violates(&m, &ds, 1, 1e-3));

        let reg = SparseDataset::new(vec![one_d(0.0)], vec![-0.1005], LabelKind::Real).unwrap();
        let flat = SvmModel::constant(Task::Regress { epsilon: 0.1 }, KernelSpec::Linear, 1.0, 0.0);
        assert!(!violates(&flat, &reg, 0, 1e-3));
        let far = SparseDataset::new(vec![one_d(0.0)], vec![0.2], LabelKind::Real).unwrap();
        assert!(violates(&flat, &far, 0, 1e-3));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let mut m = unit_model();
        m.kernel = KernelSpec::Gaussian { sigma: 0.1 + 0.2 };
        m.bias = 1.0 / 3.0;
        m.task = Task::Regress { epsilon: 0.7 };
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("randsvm-model v1 regress:"));
        let back = SvmModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let x = one_d(0.123);
        assert_eq!(predict(&back, &x).to_bits(), predict(&m, &x).to_bits());
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(SvmModel::read_from("".as_bytes()).is_err());
        assert!(SvmModel::read_from("randsvm-model v2 classify linear - 1 0 0\n".as_bytes()).is_err());
        assert!(SvmModel::read_from("randsvm-model v1 classify poly - 1 0 0\n".as_bytes()).is_err());
        assert!(SvmModel::read_from("randsvm-model v1 classify linear - 1 0 2\n0 1.0 1:1\n".as_bytes())
            .is_err());
        let ok = SvmModel::read_from("randsvm-model v1 classify linear - 1 0.5 0\n".as_bytes()).unwrap();
        assert_eq!(ok.bias, 0.5);
    }

    #[test]
    fn linear_weights_accumulate() {
        let w = unit_model().linear_weights(1).unwrap();
        assert_eq!(w, vec![1.0]);
    }
}
