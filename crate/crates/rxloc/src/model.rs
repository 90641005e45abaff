//! Unified trained-model wrapper: feature normalization, km conversion,
//! and one versioned flat-text serialization scheme for every family.
//!
//! All models operate on z-scored features and targets normalized by the
//! line length they were trained for. The wrapper stores the train-split
//! normalization constants so a saved model is self-contained: feed it
//! raw feature vectors, get km back.

use std::fmt::Write as _;
use std::path::Path;
use std::str::SplitWhitespace;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::eval::EvalModel;
use crate::mlp::{self, Algorithm, MlpSpec, MlpWeights, TrainConfigNN};
use crate::regression::gpr::{fit_gpr, GprHyper, GprKernel, GprModel};
use crate::regression::linear::{fit_linear, LinearModel, LinearVariant, Term};
use crate::regression::tree::{fit_tree, Node, TreeModel};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Mlp,
    Linear,
    Tree,
    Gpr,
}

impl ModelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::Mlp => "mlp",
            ModelFamily::Linear => "linear",
            ModelFamily::Tree => "tree",
            ModelFamily::Gpr => "gpr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Mlp(MlpWeights),
    Linear(LinearModel),
    Tree(TreeModel),
    Gpr(GprModel),
}

impl ModelKind {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelKind::Mlp(_) => ModelFamily::Mlp,
            ModelKind::Linear(_) => ModelFamily::Linear,
            ModelKind::Tree(_) => ModelFamily::Tree,
            ModelKind::Gpr(_) => ModelFamily::Gpr,
        }
    }
}

/// How to build one model of the comparison roster.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelRecipe {
    Mlp {
        hidden: usize,
        cascade: bool,
        algorithm: Algorithm,
        max_epochs: usize,
        goal_mse: f64,
        grad_tol: f64,
    },
    Linear {
        variant: LinearVariant,
    },
    Tree {
        min_leaf: usize,
    },
    Gpr {
        kernel: GprKernel,
        hyper: GprHyper,
        optimize: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub name: String,
    /// Per-feature z-score constants from the training split.
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Normalized target times this is a distance in km.
    pub total_length_km: f64,
    pub kind: ModelKind,
}

/// Train-split mean and population standard deviation per feature.
/// Constant features get std 1 so they z-score to exactly zero.
pub fn zscore_stats(x: &DMatrix<f64>, rows: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("z-score row set".into()));
    }
    let n = rows.len() as f64;
    let d = x.ncols();
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for c in 0..d {
        let mu = rows.iter().map(|&r| x[(r, c)]).sum::<f64>() / n;
        let var = rows.iter().map(|&r| (x[(r, c)] - mu).powi(2)).sum::<f64>() / n;
        mean[c] = mu;
        let s = var.sqrt();
        std[c] = if s == 0.0 { 1.0 } else { s };
    }
    Ok((mean, std))
}

fn apply_zscore(raw: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    raw.iter()
        .zip(mean.iter().zip(std))
        .map(|(v, (m, s))| (v - m) / s)
        .collect()
}

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        self.kind.family()
    }

    pub fn input_dim(&self) -> usize {
        self.feature_mean.len()
    }

    /// Prediction in normalized units from a raw feature vector.
    pub fn predict_norm(&self, raw: &[f64]) -> Result<f64> {
        if raw.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: raw.len(),
            });
        }
        let z = apply_zscore(raw, &self.feature_mean, &self.feature_std);
        match &self.kind {
            ModelKind::Mlp(w) => {
                let out = mlp::forward(w, &DVector::from_vec(z))?;
                Ok(out[0])
            }
            ModelKind::Linear(m) => m.predict(&z),
            ModelKind::Tree(m) => m.predict(&z),
            ModelKind::Gpr(m) => m.predict(&z),
        }
    }

    pub fn predict_km(&self, raw: &[f64]) -> Result<f64> {
        Ok(self.predict_norm(raw)? * self.total_length_km)
    }
}

impl EvalModel for TrainedModel {
    fn model_name(&self) -> &str {
        &self.name
    }
    fn predict_norm(&self, features: &[f64]) -> Result<f64> {
        TrainedModel::predict_norm(self, features)
    }
}

/// Z-score the training rows, fit the recipe, and wrap the result.
/// Failures come back tagged with the model name.
pub fn train_model(
    name: &str,
    recipe: &ModelRecipe,
    x_raw: &DMatrix<f64>,
    train_rows: &[usize],
    y_norm: &DVector<f64>,
    total_length_km: f64,
    seed: u64,
) -> Result<TrainedModel> {
    let build = || -> Result<TrainedModel> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput {
                what: "model name".into(),
                why: format!("{name:?} must be non-empty without whitespace"),
            });
        }
        if y_norm.len() != x_raw.nrows() {
            return Err(Error::LengthMismatch {
                left: x_raw.nrows(),
                right: y_norm.len(),
            });
        }
        if !(total_length_km > 0.0) {
            return Err(Error::InvalidInput {
                what: "model training".into(),
                why: format!("total length must be positive, got {total_length_km}"),
            });
        }
        let (mean, std) = zscore_stats(x_raw, train_rows)?;
        let d = x_raw.ncols();
        let xz = DMatrix::from_fn(train_rows.len(), d, |r, c| {
            (x_raw[(train_rows[r], c)] - mean[c]) / std[c]
        });
        let y = DVector::from_fn(train_rows.len(), |r, _| y_norm[train_rows[r]]);
        let kind = match recipe {
            ModelRecipe::Mlp {
                hidden,
                cascade,
                algorithm,
                max_epochs,
                goal_mse,
                grad_tol,
            } => {
                let spec = MlpSpec::new(d, *hidden, 1, *cascade);
                let mut cfg = TrainConfigNN::new(*algorithm, seed);
                cfg.max_epochs = *max_epochs;
                cfg.goal_mse = *goal_mse;
                cfg.grad_tol = *grad_tol;
                let targets = DMatrix::from_fn(y.len(), 1, |r, _| y[r]);
                let result = mlp::train(&spec, &cfg, &xz, &targets)?;
                ModelKind::Mlp(result.weights)
            }
            ModelRecipe::Linear { variant } => ModelKind::Linear(fit_linear(&xz, &y, *variant)?),
            ModelRecipe::Tree { min_leaf } => ModelKind::Tree(fit_tree(&xz, &y, *min_leaf)?),
            ModelRecipe::Gpr {
                kernel,
                hyper,
                optimize,
            } => ModelKind::Gpr(fit_gpr(&xz, &y, *kernel, hyper, *optimize)?),
        };
        Ok(TrainedModel {
            name: name.to_string(),
            feature_mean: mean,
            feature_std: std,
            total_length_km,
            kind,
        })
    };
    build().map_err(|e| match e {
        already @ Error::Model { .. } => already,
        other => Error::Model {
            model: name.to_string(),
            source: Box::new(other),
        },
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_floats(out: &mut String, label: &str, values: impl Iterator<Item = f64>) {
    out.push_str(label);
    for v in values {
        let _ = write!(out, " {}", fmt_f64(v));
    }
    out.push('\n');
}

fn term_text(t: &Term) -> String {
    match t {
        Term::Constant => "const".to_string(),
        Term::Linear(i) => format!("lin {i}"),
        Term::Interaction(i, j) => format!("inter {i} {j}"),
    }
}

impl TrainedModel {
    /// Versioned, line-oriented text form. All floats are written with 17
    /// significant digits so parsing reproduces them bit for bit.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rxloc-model {FORMAT_VERSION}");
        let _ = writeln!(s, "name {}", self.name);
        let _ = writeln!(s, "total_length_km {}", fmt_f64(self.total_length_km));
        let _ = writeln!(s, "features {}", self.input_dim());
        push_floats(&mut s, "mean", self.feature_mean.iter().copied());
        push_floats(&mut s, "std", self.feature_std.iter().copied());
        let _ = writeln!(s, "family {}", self.family().as_str());
        match &self.kind {
            ModelKind::Mlp(w) => {
                let _ = writeln!(
                    s,
                    "mlp {} {} {} {}",
                    w.spec.input_dim,
                    w.spec.hidden_dim,
                    w.spec.output_dim,
                    u8::from(w.spec.cascade)
                );
                push_floats(&mut s, "params", w.flatten().iter().copied());
            }
            ModelKind::Linear(m) => {
                let _ = writeln!(
                    s,
                    "linear {} {} {}",
                    m.variant.as_str(),
                    m.input_dim,
                    u8::from(m.irls_converged)
                );
                let _ = writeln!(s, "terms {}", m.terms.len());
                for (t, c) in m.terms.iter().zip(&m.coeffs) {
                    let _ = writeln!(s, "term {} {}", term_text(t), fmt_f64(*c));
                }
                let _ = writeln!(s, "dropped {}", m.dropped_terms.len());
                for t in &m.dropped_terms {
                    let _ = writeln!(s, "drop {}", term_text(t));
                }
            }
            ModelKind::Tree(m) => {
                let _ = writeln!(s, "tree {} {}", m.min_leaf, m.input_dim);
                let _ = writeln!(s, "nodes {}", m.nodes.len());
                for n in &m.nodes {
                    match n {
                        Node::Leaf { value, count } => {
                            let _ = writeln!(s, "leaf {} {count}", fmt_f64(*value));
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            let _ = writeln!(
                                s,
                                "split {feature} {} {left} {right}",
                                fmt_f64(*threshold)
                            );
                        }
                    }
                }
            }
            ModelKind::Gpr(m) => {
                let _ = writeln!(
                    s,
                    "gpr {} {} {}",
                    m.kernel.as_str(),
                    fmt_f64(m.jitter_used),
                    fmt_f64(m.log_marginal_likelihood)
                );
                let _ = writeln!(
                    s,
                    "hyper {} {} {} {}",
                    fmt_f64(m.hyper.sigma_f),
                    fmt_f64(m.hyper.length),
                    fmt_f64(m.hyper.sigma_n),
                    fmt_f64(m.hyper.alpha)
                );
                let _ = writeln!(s, "train {} {}", m.x_train.nrows(), m.x_train.ncols());
                for r in 0..m.x_train.nrows() {
                    push_floats(&mut s, "row", m.x_train.row(r).iter().copied());
                }
                push_floats(&mut s, "coeffs", m.coeffs.iter().copied());
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str, origin: &str) -> Result<TrainedModel> {
        let mut cur = Cursor::new(text, origin);
        let mut head = cur.line_starting("rxloc-model")?;
        let version: u32 = cur.field(&mut head, "format version")?;
        if version != FORMAT_VERSION {
            return Err(cur.malformed(format!(
                "unsupported format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let mut line = cur.line_starting("name")?;
        let name = cur.rest(&mut line, "model name")?;
        let mut line = cur.line_starting("total_length_km")?;
        let total_length_km: f64 = cur.field(&mut line, "total length")?;
        let mut line = cur.line_starting("features")?;
        let d: usize = cur.field(&mut line, "feature count")?;
        let feature_mean = cur.float_list("mean", d)?;
        let feature_std = cur.float_list("std", d)?;
        let mut line = cur.line_starting("family")?;
        let family: String = cur.field(&mut line, "family tag")?;
        let kind = match family.as_str() {
            "mlp" => cur.parse_mlp()?,
            "linear" => cur.parse_linear()?,
            "tree" => cur.parse_tree()?,
            "gpr" => cur.parse_gpr()?,
            other => return Err(cur.malformed(format!("unknown model family {other:?}"))),
        };
        cur.line_starting("end")?;
        Ok(TrainedModel {
            name,
            feature_mean,
            feature_std,
            total_length_km,
            kind,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let text = std::fs::read_to_string(path)?;
        TrainedModel::from_text(&text, &path.display().to_string())
    }
}

/// Line-by-line parser with location-carrying errors.
struct Cursor<'a> {
    lines: std::str::Lines<'a>,
    origin: &'a str,
    line_no: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, origin: &'a str) -> Self {
        Cursor {
            lines: text.lines(),
            origin,
            line_no: 0,
        }
    }

    fn malformed(&self, why: String) -> Error {
        Error::MalformedArtifact {
            path: self.origin.to_string(),
            why: format!("line {}: {why}", self.line_no),
        }
    }

    /// Next line, which must begin with `keyword`; returns the remainder.
    fn line_starting(&mut self, keyword: &str) -> Result<SplitWhitespace<'a>> {
        let line = self
            .lines
            .next()
            .ok_or_else(|| self.malformed(format!("unexpected end of file, wanted {keyword:?}")))?;
        self.line_no += 1;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == keyword => Ok(parts),
            Some(k) => Err(self.malformed(format!("expected {keyword:?}, found {k:?}"))),
            None => Err(self.malformed(format!("blank line where {keyword:?} was expected"))),
        }
    }

    fn field<T: std::str::FromStr>(
        &self,
        parts: &mut SplitWhitespace<'a>,
        what: &str,
    ) -> Result<T> {
        let token = parts
            .next()
            .ok_or_else(|| self.malformed(format!("missing {what}")))?;
        token
            .parse()
            .map_err(|_| self.malformed(format!("unreadable {what}: {token:?}")))
    }

    fn rest(&self, parts: &mut SplitWhitespace<'a>, what: &str) -> Result<String> {
        let s = parts.collect::<Vec<_>>().join(" ");
        if s.is_empty() {
            Err(self.malformed(format!("missing {what}")))
        } else {
            Ok(s)
        }
    }

    fn done(&self, mut parts: SplitWhitespace<'a>, context: &str) -> Result<()> {
        match parts.next() {
            None => Ok(()),
            Some(extra) => Err(self.malformed(format!("trailing {extra:?} after {context}"))),
        }
    }

    fn float_list(&mut self, keyword: &str, expected: usize) -> Result<Vec<f64>> {
        let mut parts = self.line_starting(keyword)?;
        let mut out = Vec::with_capacity(expected);
        for i in 0..expected {
            out.push(self.field(&mut parts, &format!("{keyword}[{i}]"))?);
        }
        self.done(parts, keyword)?;
        Ok(out)
    }

    fn parse_mlp(&mut self) -> Result<ModelKind> {
        let mut line = self.line_starting("mlp")?;
        let input_dim: usize = self.field(&mut line, "input width")?;
        let hidden_dim: usize = self.field(&mut line, "hidden width")?;
        let output_dim: usize = self.field(&mut line, "output width")?;
        let cascade_flag: u8 = self.field(&mut line, "cascade flag")?;
        self.done(line, "mlp header")?;
        let spec = MlpSpec::new(input_dim, hidden_dim, output_dim, cascade_flag != 0);
        let params = self.float_list("params", spec.n_params())?;
        let weights = MlpWeights::from_flat(spec, &DVector::from_vec(params))
            .map_err(|e| self.malformed(format!("inconsistent weight block: {e}")))?;
        Ok(ModelKind::Mlp(weights))
    }

    fn parse_term(&self, parts: &mut SplitWhitespace<'a>) -> Result<Term> {
        let tag: String = self.field(parts, "term tag")?;
        match tag.as_str() {
            "const" => Ok(Term::Constant),
            "lin" => Ok(Term::Linear(self.field(parts, "term feature")?)),
            "inter" => Ok(Term::Interaction(
                self.field(parts, "term feature")?,
                self.field(parts, "term feature")?,
            )),
            other => Err(self.malformed(format!("unknown term tag {other:?}"))),
        }
    }

    fn parse_linear(&mut self) -> Result<ModelKind> {
        let mut line = self.line_starting("linear")?;
        let variant: String = self.field(&mut line, "variant")?;
        let variant = match variant.as_str() {
            "ols" => LinearVariant::Ols,
            "interactions" => LinearVariant::Interactions,
            "robust" => LinearVariant::Robust,
            "stepwise" => LinearVariant::Stepwise,
            other => return Err(self.malformed(format!("unknown linear variant {other:?}"))),
        };
        let input_dim: usize = self.field(&mut line, "input width")?;
        let irls_flag: u8 = self.field(&mut line, "irls flag")?;
        self.done(line, "linear header")?;
        let mut line = self.line_starting("terms")?;
        let n_terms: usize = self.field(&mut line, "term count")?;
        let mut terms = Vec::with_capacity(n_terms);
        let mut coeffs = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let mut line = self.line_starting("term")?;
            terms.push(self.parse_term(&mut line)?);
            coeffs.push(self.field(&mut line, "coefficient")?);
            self.done(line, "term")?;
        }
        let mut line = self.line_starting("dropped")?;
        let n_dropped: usize = self.field(&mut line, "dropped count")?;
        let mut dropped_terms = Vec::with_capacity(n_dropped);
        for _ in 0..n_dropped {
            let mut line = self.line_starting("drop")?;
            dropped_terms.push(self.parse_term(&mut line)?);
            self.done(line, "drop")?;
        }
        Ok(ModelKind::Linear(LinearModel {
            variant,
            input_dim,
            terms,
            coeffs,
            dropped_terms,
            irls_converged: irls_flag != 0,
        }))
    }

    fn parse_tree(&mut self) -> Result<ModelKind> {
        let mut line = self.line_starting("tree")?;
        let min_leaf: usize = self.field(&mut line, "min leaf")?;
        let input_dim: usize = self.field(&mut line, "input width")?;
        self.done(line, "tree header")?;
        let mut line = self.line_starting("nodes")?;
        let n_nodes: usize = self.field(&mut line, "node count")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let line = self
                .lines
                .next()
                .ok_or_else(|| self.malformed("unexpected end of node list".into()))?;
            self.line_no += 1;
            let mut parts = line.split_whitespace();
            let tag = parts
                .next()
                .ok_or_else(|| self.malformed("blank line in node list".into()))?;
            let node = match tag {
                "leaf" => Node::Leaf {
                    value: self.field(&mut parts, "leaf value")?,
                    count: self.field(&mut parts, "leaf count")?,
                },
                "split" => Node::Split {
                    feature: self.field(&mut parts, "split feature")?,
                    threshold: self.field(&mut parts, "split threshold")?,
                    left: self.field(&mut parts, "left child")?,
                    right: self.field(&mut parts, "right child")?,
                },
                other => return Err(self.malformed(format!("unknown node tag {other:?}"))),
            };
            self.done(parts, "node")?;
            nodes.push(node);
        }
        for node in &nodes {
            if let Node::Split { left, right, .. } = node {
                if *left >= nodes.len() || *right >= nodes.len() {
                    return Err(self.malformed("node child index out of range".into()));
                }
            }
        }
        Ok(ModelKind::Tree(TreeModel {
            min_leaf,
            input_dim,
            nodes,
        }))
    }

    fn parse_gpr(&mut self) -> Result<ModelKind> {
        let mut line = self.line_starting("gpr")?;
        let kernel: String = self.field(&mut line, "kernel tag")?;
        let kernel = match kernel.as_str() {
            "se" => GprKernel::SquaredExponential,
            "matern52" => GprKernel::Matern52,
            "exp" => GprKernel::Exponential,
            "rq" => GprKernel::RationalQuadratic,
            other => return Err(self.malformed(format!("unknown kernel {other:?}"))),
        };
        let jitter_used: f64 = self.field(&mut line, "jitter")?;
        let log_marginal_likelihood: f64 = self.field(&mut line, "log marginal likelihood")?;
        self.done(line, "gpr header")?;
        let mut line = self.line_starting("hyper")?;
        let hyper = GprHyper {
            sigma_f: self.field(&mut line, "sigma_f")?,
            length: self.field(&mut line, "length")?,
            sigma_n: self.field(&mut line, "sigma_n")?,
            alpha: self.field(&mut line, "alpha")?,
        };
        self.done(line, "hyper")?;
        let mut line = self.line_starting("train")?;
        let n: usize = self.field(&mut line, "training rows")?;
        let d: usize = self.field(&mut line, "training cols")?;
        self.done(line, "train header")?;
        let mut x_train = DMatrix::zeros(n, d);
        for r in 0..n {
            let row = self.float_list("row", d)?;
            for (c, v) in row.into_iter().enumerate() {
                x_train[(r, c)] = v;
            }
        }
        let coeffs = DVector::from_vec(self.float_list("coeffs", n)?);
        Ok(ModelKind::Gpr(GprModel {
            kernel,
            hyper,
            x_train,
            coeffs,
            jitter_used,
            log_marginal_likelihood,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use approx::assert_relative_eq;

    /// Raw (un-normalized) features with a linear target in km.
    fn km_dataset(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>, f64) {
        let mut rng = SplitMix64::new(seed);
        let x = DMatrix::from_fn(n, 3, |_, _| rng.next_range(10.0, 90.0));
        let total = 200.0;
        let y_km = DVector::from_fn(n, |i, _| 20.0 + 1.5 * x[(i, 0)] + 0.25 * x[(i, 2)]);
        let y_norm = y_km.map(|v| v / total);
        (x, y_norm, total)
    }

    fn all_rows(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    fn probe_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..x.nrows().min(5))
            .map(|r| x.row(r).iter().copied().collect())
            .collect()
    }

    fn assert_roundtrip(model: &TrainedModel, probes: &[Vec<f64>]) {
        let text = model.to_text();
        let back = TrainedModel::from_text(&text, "test").unwrap();
        assert_eq!(model.name, back.name);
        assert_eq!(model.family(), back.family());
        for p in probes {
            let a = model.predict_norm(p).unwrap();
            let b = back.predict_norm(p).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "prediction drifted through text");
        }
        // Ensure full structural equality too, not just behavioral.
        assert_eq!(*model, back);
    }

    #[test]
    fn ols_wrapper_recovers_linear_km_relation() {
        let (x, y_norm, total) = km_dataset(24, 41);
        let rows = all_rows(24);
        let recipe = ModelRecipe::Linear {
            variant: LinearVariant::Ols,
        };
        let m = train_model("linear", &recipe, &x, &rows, &y_norm, total, 0).unwrap();
        // Z-scoring is affine, so OLS still fits the exact relation.
        for r in 0..x.nrows() {
            let raw: Vec<f64> = x.row(r).iter().copied().collect();
            let km = m.predict_km(&raw).unwrap();
            assert_relative_eq!(km, y_norm[r] * total, max_relative = 1e-9);
        }
    }

    #[test]
    fn constant_feature_does_not_poison_normalization() {
        let mut rng = SplitMix64::new(42);
        let x = DMatrix::from_fn(12, 2, |r, c| if c == 0 { 7.5 } else { rng.next_range(0.0, 1.0) * r as f64 });
        let y = DVector::from_fn(12, |r, _| 0.1 + 0.002 * r as f64);
        let rows = all_rows(12);
        let m = train_model(
            "tree",
            &ModelRecipe::Tree { min_leaf: 4 },
            &x,
            &rows,
            &y,
            50.0,
            0,
        )
        .unwrap();
        assert_eq!(m.feature_std[0], 1.0);
        let p = m.predict_norm(&[7.5, 3.0]).unwrap();
        assert!(p.is_finite());
    }

    #[test]
    fn mlp_training_is_seed_deterministic() {
        let (x, y_norm, total) = km_dataset(16, 43);
        let rows = all_rows(16);
        let recipe = ModelRecipe::Mlp {
            hidden: 4,
            cascade: false,
            algorithm: Algorithm::Lm,
            max_epochs: 30,
            goal_mse: 0.0,
            grad_tol: 1e-10,
        };
        let a = train_model("ff-lm", &recipe, &x, &rows, &y_norm, total, 99).unwrap();
        let b = train_model("ff-lm", &recipe, &x, &rows, &y_norm, total, 99).unwrap();
        assert_eq!(a, b);
        let c = train_model("ff-lm", &recipe, &x, &rows, &y_norm, total, 100).unwrap();
        let probe: Vec<f64> = x.row(0).iter().copied().collect();
        // Different seed, different initial weights, different fit.
        assert_ne!(
            a.predict_norm(&probe).unwrap().to_bits(),
            c.predict_norm(&probe).unwrap().to_bits()
        );
    }

    #[test]
    fn every_family_survives_the_text_roundtrip() {
        let (x, y_norm, total) = km_dataset(20, 44);
        let rows = all_rows(20);
        let probes = probe_rows(&x);
        let recipes: Vec<(&str, ModelRecipe)> = vec![
            (
                "cf-lm",
                ModelRecipe::Mlp {
                    hidden: 3,
                    cascade: true,
                    algorithm: Algorithm::Lm,
                    max_epochs: 20,
                    goal_mse: 0.0,
                    grad_tol: 1e-10,
                },
            ),
            (
                "stepwise",
                ModelRecipe::Linear {
                    variant: LinearVariant::Stepwise,
                },
            ),
            ("tree-fine", ModelRecipe::Tree { min_leaf: 4 }),
            (
                "gpr-rq",
                ModelRecipe::Gpr {
                    kernel: GprKernel::RationalQuadratic,
                    hyper: GprHyper::default(),
                    optimize: false,
                },
            ),
        ];
        for (name, recipe) in &recipes {
            let m = train_model(name, recipe, &x, &rows, &y_norm, total, 7).unwrap();
            assert_roundtrip(&m, &probes);
        }
    }

    #[test]
    fn save_and_load_through_a_file() {
        let (x, y_norm, total) = km_dataset(15, 45);
        let rows = all_rows(15);
        let m = train_model(
            "robust",
            &ModelRecipe::Linear {
                variant: LinearVariant::Robust,
            },
            &x,
            &rows,
            &y_norm,
            total,
            0,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("robust.txt");
        m.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn malformed_texts_are_rejected_with_location() {
        let (x, y_norm, total) = km_dataset(12, 46);
        let rows = all_rows(12);
        let m = train_model(
            "tree-medium",
            &ModelRecipe::Tree { min_leaf: 4 },
            &x,
            &rows,
            &y_norm,
            total,
            0,
        )
        .unwrap();
        let good = m.to_text();

        let cases: Vec<String> = vec![
            good.replacen("rxloc-model 1", "rxloc-model 2", 1),
            good.replacen("rxloc-model", "other-model", 1),
            good.replacen("family tree", "family forest", 1),
            good.lines().take(4).collect::<Vec<_>>().join("\n"),
            good.replacen("mean ", "mean bogus ", 1),
        ];
        for (i, text) in cases.iter().enumerate() {
            let err = TrainedModel::from_text(text, "case").unwrap_err();
            match err {
                Error::MalformedArtifact { why, .. } => {
                    assert!(why.contains("line"), "case {i}: {why}")
                }
                other => panic!("case {i}: expected malformed artifact, got {other}"),
            }
        }
    }

    #[test]
    fn training_failures_carry_the_model_name() {
        let x = DMatrix::<f64>::zeros(1, 2);
        let y = DVector::<f64>::zeros(1);
        let err = train_model(
            "gpr-se",
            &ModelRecipe::Gpr {
                kernel: GprKernel::SquaredExponential,
                hyper: GprHyper::default(),
                optimize: false,
            },
            &x,
            &[0],
            &y,
            100.0,
            0,
        )
        .unwrap_err();
        match err {
            Error::Model { model, .. } => assert_eq!(model, "gpr-se"),
            other => panic!("expected model-tagged error, got {other}"),
        }
    }

    #[test]
    fn km_prediction_is_norm_times_length() {
        let (x, y_norm, total) = km_dataset(18, 47);
        let rows = all_rows(18);
        let m = train_model(
            "gpr-se",
            &ModelRecipe::Gpr {
                kernel: GprKernel::SquaredExponential,
                hyper: GprHyper::default(),
                optimize: false,
            },
            &x,
            &rows,
            &y_norm,
            total,
            0,
        )
        .unwrap();
        let raw: Vec<f64> = x.row(3).iter().copied().collect();
        let n = m.predict_norm(&raw).unwrap();
        let km = m.predict_km(&raw).unwrap();
        assert_eq!(km.to_bits(), (n * total).to_bits());
    }
}
