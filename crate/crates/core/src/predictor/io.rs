//! JSON persistence for trained patch models. A model file carries the
//! parameters, the training configuration that produced them, and the
//! patch geometry needed to apply them to another stack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::linear::LinearModel;
use super::mlp::{Activation, Mlp};
use super::{PatchGeometry, TrainConfig};

/// Either trained predictor, ready to serialize or apply.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel<S: Scalar> {
    Linear(LinearModel<S>),
    Adversarial { generator: Mlp<S>, discriminator: Mlp<S> },
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activations: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    feature_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<NetworkDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    discriminator: Option<NetworkDoc>,
    train: TrainConfig,
    patch: PatchGeometry,
}

fn network_doc<S: Scalar>(m: &Mlp<S>) -> NetworkDoc {
    let to_f64 = |v: &Vec<S>| v.iter().map(|&x| x.into_f64()).collect::<Vec<f64>>();
    let layers = m.layer_sizes().len() - 1;
    let mut activations: Vec<String> =
        (0..layers - 1).map(|_| Activation::LeakyRelu.label().to_string()).collect();
    activations.push(m.output_activation().label().to_string());
    NetworkDoc {
        layer_sizes: m.layer_sizes().to_vec(),
        weights: m.weights().iter().map(to_f64).collect(),
        biases: m.biases().iter().map(to_f64).collect(),
        activations,
    }
}

fn network_from_doc<S: Scalar>(doc: &NetworkDoc) -> Result<Mlp<S>> {
    if doc.layer_sizes.len() < 2 {
        return Err(Error::format("network needs at least two layer sizes"));
    }
    let layers = doc.layer_sizes.len() - 1;
    if doc.activations.len() != layers {
        return Err(Error::format(format!(
            "expected {layers} activation tags, found {}",
            doc.activations.len()
        )));
    }
    for tag in &doc.activations[..layers - 1] {
        if Activation::parse(tag)? != Activation::LeakyRelu {
            return Err(Error::format(format!("hidden layers must be leaky_relu, found {tag:?}")));
        }
    }
    let output = Activation::parse(&doc.activations[layers - 1])?;
    let from_f64 =
        |v: &Vec<f64>| v.iter().map(|&x| S::from_f64_lossy(x)).collect::<Vec<S>>();
    Mlp::from_parts(
        doc.layer_sizes.clone(),
        doc.weights.iter().map(from_f64).collect(),
        doc.biases.iter().map(from_f64).collect(),
        output,
    )
}

pub fn model_to_json<S: Scalar>(
    model: &TrainedModel<S>,
    cfg: &TrainConfig,
    geometry: &PatchGeometry,
) -> String {
    let doc = match model {
        TrainedModel::Linear(m) => ModelDoc {
            kind: "linear".to_string(),
            feature_dim: Some(m.feature_dim()),
            target_count: Some(m.target_count()),
            weights: Some(m.weights().iter().map(|&w| w.into_f64()).collect()),
            bias: Some(m.bias().iter().map(|&b| b.into_f64()).collect()),
            generator: None,
            discriminator: None,
            train: cfg.clone(),
            patch: geometry.clone(),
        },
        TrainedModel::Adversarial { generator, discriminator } => ModelDoc {
            kind: "adversarial".to_string(),
            feature_dim: None,
            target_count: None,
            weights: None,
            bias: None,
            generator: Some(network_doc(generator)),
            discriminator: Some(network_doc(discriminator)),
            train: cfg.clone(),
            patch: geometry.clone(),
        },
    };
    serde_json::to_string_pretty(&doc).expect("model documents always serialize")
}

pub fn model_from_json<S: Scalar>(text: &str) -> Result<(TrainedModel<S>, TrainConfig, PatchGeometry)> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| Error::format(format!("bad model file: {e}")))?;
    let model = match doc.kind.as_str() {
        "linear" => {
            let (Some(f), Some(t), Some(w), Some(b)) =
                (doc.feature_dim, doc.target_count, doc.weights, doc.bias)
            else {
                return Err(Error::format("linear model file is missing parameter fields"));
            };
            let w: Vec<S> = w.into_iter().map(S::from_f64_lossy).collect();
            let b: Vec<S> = b.into_iter().map(S::from_f64_lossy).collect();
            TrainedModel::Linear(LinearModel::from_parts(f, t, w, b)?)
        }
        "adversarial" => {
            let (Some(g), Some(d)) = (&doc.generator, &doc.discriminator) else {
                return Err(Error::format("adversarial model file is missing a network"));
            };
            TrainedModel::Adversarial {
                generator: network_from_doc(g)?,
                discriminator: network_from_doc(d)?,
            }
        }
        other => return Err(Error::format(format!("unknown model kind {other:?}"))),
    };
    doc.train.validate()?;
    Ok((model, doc.train, doc.patch))
}
