use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::numkit::{Matrix, ParamSet, SeededRng};

/// Fully connected layer with a rectifier on its output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out × in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Feature extractor: a stack of ReLU dense layers. Zero layers is the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Backbone {
    input_dim: usize,
    layers: Vec<Dense>,
}

/// Intermediate values kept for backprop: `inputs[l]` feeds layer `l`,
/// `pre[l]` is its pre-activation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    pub features: Vec<f64>,
}

impl Backbone {
    /// He-initialised MLP with the given hidden widths.
    pub fn new(input_dim: usize, widths: &[usize], rng: &mut SeededRng) -> Result<Self> {
        if input_dim == 0 || widths.contains(&0) {
            bail!(Parameter, "layer widths must be positive");
        }
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input_dim;
        for &w in widths {
            let std = (2.0 / fan_in as f64).sqrt();
            let data = (0..w * fan_in).map(|_| std * rng.normal()).collect();
            layers.push(Dense {
                weight: Matrix::from_vec(w, fan_in, data)?,
                bias: vec![0.0; w],
            });
            fan_in = w;
        }
        Ok(Self { input_dim, layers })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            input_dim: dim,
            layers: Vec::new(),
        }
    }

    pub fn from_layers(input_dim: usize, layers: Vec<Dense>) -> Result<Self> {
        let mut fan_in = input_dim;
        for (i, l) in layers.iter().enumerate() {
            if l.weight.cols() != fan_in || l.bias.len() != l.weight.rows() {
                bail!(Shape, "layer {i} does not compose: weight {:?}, bias {}", l.weight.shape(), l.bias.len());
            }
            fan_in = l.weight.rows();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.weight.rows())
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.weight.rows()).collect()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.input_dim {
            bail!(Shape, "input of dim {} into backbone expecting {}", x.len(), self.input_dim);
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.weight.matvec(&a)?;
            for (zi, bi) in z.iter_mut().zip(&layer.bias) {
                *zi += bi;
            }
            let next = z.iter().map(|&v| v.max(0.0)).collect();
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        Ok(ForwardCache { inputs, pre, features: a })
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.features)
    }

    /// Accumulates `∂L/∂θ` given `∂L/∂features` into `grads`.
    pub(crate) fn backward(&self, cache: &ForwardCache, dfeat: &[f64], grads: &mut ParamSet) -> Result<()> {
        let mut delta = dfeat.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            for (d, z) in delta.iter_mut().zip(&cache.pre[l]) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
            let (wname, bname) = param_names(l);
            grads
                .get_mut(&wname)
                .expect("gradient set built from this backbone")
                .add_outer(1.0, &delta, &cache.inputs[l]);
            let gb = grads.get_mut(&bname).expect("gradient set built from this backbone");
            crate::numkit::axpy(1.0, &delta, gb.as_mut_slice());
            if l > 0 {
                delta = layer.weight.matvec_t(&delta)?;
            }
        }
        Ok(())
    }

    pub fn sum_sq(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weight.frobenius_sq() + l.bias.iter().map(|b| b * b).sum::<f64>())
            .sum()
    }

    pub(crate) fn write_params(&self, out: &mut ParamSet) -> Result<()> {
        for (l, layer) in self.layers.iter().enumerate() {
            let (w, b) = param_names(l);
            out.insert(w, layer.weight.clone())?;
            out.insert(b, Matrix::from_vec(1, layer.bias.len(), layer.bias.clone())?)?;
        }
        Ok(())
    }

    pub(crate) fn read_params(&mut self, params: &ParamSet) -> Result<()> {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let (w, b) = param_names(l);
            let wm = params.require(&w)?;
            let bm = params.require(&b)?;
            if wm.shape() != layer.weight.shape() || bm.as_slice().len() != layer.bias.len() {
                bail!(Shape, "layer {l} parameter shape changed");
            }
            layer.weight = wm.clone();
            layer.bias = bm.as_slice().to_vec();
        }
        Ok(())
    }
}

pub(crate) fn param_names(layer: usize) -> (String, String) {
    (format!("backbone.{layer}.weight"), format!("backbone.{layer}.bias"))
}

pub const CLASSIFIER_PARAM: &str = "classifier.weight";

/// Linear classifier with one row per known class; class order is append-only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    class_ids: Vec<String>,
    weights: Matrix,
}

impl Classifier {
    pub fn new(class_ids: Vec<String>, weights: Matrix) -> Result<Self> {
        if class_ids.len() != weights.rows() {
            bail!(Shape, "{} class ids for {} rows", class_ids.len(), weights.rows());
        }
        let mut seen = std::collections::HashSet::new();
        for id in &class_ids {
            if !seen.insert(id.as_str()) {
                bail!(Label, "duplicate class id {id}");
            }
        }
        Ok(Self { class_ids, weights })
    }

    pub fn random(class_ids: Vec<String>, feature_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        let std = (1.0 / feature_dim as f64).sqrt();
        let data = (0..class_ids.len() * feature_dim).map(|_| std * rng.normal()).collect();
        let weights = Matrix::from_vec(class_ids.len(), feature_dim, data)?;
        Self::new(class_ids, weights)
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.class_ids.iter().position(|c| c == id)
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.weights.matvec(features)
    }
}

/// Appends rows for `new_ids`; existing rows are left untouched.
pub fn extend_classifier(classifier: &Classifier, new_ids: &[String], init: &[Vec<f64>]) -> Result<Classifier> {
    if new_ids.len() != init.len() {
        bail!(Shape, "{} new ids with {} initial rows", new_ids.len(), init.len());
    }
    let mut out = classifier.clone();
    for (id, row) in new_ids.iter().zip(init) {
        if out.class_ids.contains(id) {
            bail!(Label, "class {id} already present");
        }
        if row.len() != out.weights.cols() {
            bail!(Shape, "initial row of dim {} for a dim-{} classifier", row.len(), out.weights.cols());
        }
        out.weights.push_row(row)?;
        out.class_ids.push(id.clone());
    }
    Ok(out)
}

/// Backbone `f_θ` plus classifier `η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub backbone: Backbone,
    pub classifier: Classifier,
}

impl Model {
    pub fn new(backbone: Backbone, classifier: Classifier) -> Result<Self> {
        if classifier.weights().cols() != backbone.feature_dim() {
            bail!(
                Shape,
                "classifier width {} does not match feature dim {}",
                classifier.weights().cols(),
                backbone.feature_dim()
            );
        }
        Ok(Self { backbone, classifier })
    }

    pub fn init(input_dim: usize, widths: &[usize], class_ids: Vec<String>, rng: &mut SeededRng) -> Result<Self> {
        let backbone = Backbone::new(input_dim, widths, rng)?;
        let classifier = Classifier::random(class_ids, backbone.feature_dim(), rng)?;
        Self::new(backbone, classifier)
    }

    /// `θ` then `η`, in a fixed order.
    pub fn params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        self.backbone.write_params(&mut p).expect("fresh names");
        p.insert(CLASSIFIER_PARAM, self.classifier.weights().clone()).expect("fresh name");
        p
    }

    pub fn set_params(&mut self, params: &ParamSet) -> Result<()> {
        self.params().check_compatible(params)?;
        self.backbone.read_params(params)?;
        *self.classifier.weights_mut() = params.require(CLASSIFIER_PARAM)?.clone();
        Ok(())
    }

    pub fn with_params(&self, params: &ParamSet) -> Result<Self> {
        let mut m = self.clone();
        m.set_params(params)?;
        Ok(m)
    }

    pub fn zero_grads(&self) -> ParamSet {
        self.params().zeros_like()
    }
}

/// Per-class scores `η · f_θ(x)` (no softmax).
pub fn forward_logits(backbone: &Backbone, classifier: &Classifier, x: &[f64]) -> Result<Vec<f64>> {
    classifier.logits(&backbone.features(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FscilError;

    #[test]
    fn identity_backbone_logits() {
        let bb = Backbone::identity(2);
        let clf = Classifier::new(vec!["a".into(), "b".into()], Matrix::identity(2)).unwrap();
        assert_eq!(forward_logits(&bb, &clf, &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(forward_logits(&bb, &clf, &[1.0]), Err(FscilError::Shape(_))));
    }

    #[test]
    fn scaling_classifier_scales_logits() {
        let mut rng = SeededRng::new(1);
        let m = Model::init(3, &[4], vec!["a".into(), "b".into(), "c".into()], &mut rng).unwrap();
        let x = [0.3, -0.7, 1.2];
        let base = forward_logits(&m.backbone, &m.classifier, &x).unwrap();
        let mut scaled = m.classifier.clone();
        for v in scaled.weights_mut().as_mut_slice() {
            *v *= 2.5;
        }
        let s = forward_logits(&m.backbone, &scaled, &x).unwrap();
        for (a, b) in base.iter().zip(&s) {
            assert!((a * 2.5 - b).abs() < 1e-12);
        }
        assert_eq!(crate::numkit::argmax(&base), crate::numkit::argmax(&s));
    }

    #[test]
    fn forward_matches_manual_layers() {
        let mut rng = SeededRng::new(8);
        let m = Model::init(3, &[5], vec!["a".into(), "b".into()], &mut rng).unwrap();
        let x = rng.normal_vec(3);
        let l = &m.backbone.layers()[0];
        let mut h = vec![0.0; 5];
        for i in 0..5 {
            let mut z = l.bias[i];
            for j in 0..3 {
                z += l.weight[(i, j)] * x[j];
            }
            h[i] = if z > 0.0 { z } else { 0.0 };
        }
        let mut expect = vec![0.0; 2];
        for c in 0..2 {
            for i in 0..5 {
                expect[c] += m.classifier.weights()[(c, i)] * h[i];
            }
        }
        let got = forward_logits(&m.backbone, &m.classifier, &x).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn extend_appends_rows_and_keeps_old() {
        let mut rng = SeededRng::new(2);
        let ids: Vec<String> = (0..60).map(|i| format!("b{i}")).collect();
        let clf = Classifier::random(ids, 4, &mut rng).unwrap();
        let new: Vec<String> = (0..5).map(|i| format!("n{i}")).collect();
        let init: Vec<Vec<f64>> = (0..5).map(|_| rng.normal_vec(4)).collect();
        let ext = extend_classifier(&clf, &new, &init).unwrap();
        assert_eq!(ext.num_classes(), 65);
        for r in 0..60 {
            assert_eq!(ext.weights().row(r), clf.weights().row(r));
        }
        for (i, row) in init.iter().enumerate() {
            assert_eq!(ext.weights().row(60 + i), row.as_slice());
        }
        assert_eq!(extend_classifier(&clf, &[], &[]).unwrap(), clf);
        assert!(matches!(
            extend_classifier(&clf, &["b3".to_string()], &[vec![0.0; 4]]),
            Err(FscilError::Label(_))
        ));
    }

    #[test]
    fn appending_weaker_rows_keeps_argmax() {
        let mut rng = SeededRng::new(4);
        let m = Model::init(3, &[6], vec!["a".into(), "b".into()], &mut rng).unwrap();
        let x = rng.normal_vec(3);
        let feats = m.backbone.features(&x).unwrap();
        let logits = m.classifier.logits(&feats).unwrap();
        let best = crate::numkit::argmax(&logits).unwrap();
        // a row scoring strictly below the current best on this input
        let weak: Vec<f64> = m.classifier.weights().row(best).iter().map(|v| v * 0.5).collect();
        let ext = extend_classifier(&m.classifier, &["c".into()], &[weak]).unwrap();
        let l2 = ext.logits(&feats).unwrap();
        if logits[best] > 0.0 {
            assert_eq!(crate::numkit::argmax(&l2), Some(best));
        }
    }

    #[test]
    fn params_round_trip() {
        let mut rng = SeededRng::new(3);
        let m = Model::init(4, &[6, 5], vec!["x".into(), "y".into()], &mut rng).unwrap();
        let p = m.params();
        let names: Vec<&str> = p.names().collect();
        assert_eq!(
            names,
            ["backbone.0.weight", "backbone.0.bias", "backbone.1.weight", "backbone.1.bias", "classifier.weight"]
        );
        let mut m2 = Model::init(4, &[6, 5], vec!["x".into(), "y".into()], &mut SeededRng::new(99)).unwrap();
        m2.set_params(&p).unwrap();
        assert_eq!(m, m2);
    }
}
