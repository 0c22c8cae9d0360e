//! `*.ebm.json` checkpoints.
//!
//! Floats are written in shortest round-trip decimal form, so a save/load
//! cycle reproduces every parameter bit for bit.

use serde_json::{json, Map, Value};

use super::{EbmModel, MlpSpec, TrainingMeta};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u64 = 1;
const FORMAT: &str = "ebm-checkpoint";

pub fn save_checkpoint(model: &EbmModel) -> Vec<u8> {
    let doc = json!({
        "format": FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": model.spec(),
        "seed": model.seed(),
        "theta": model.theta(),
        "meta": model.meta,
    });
    let mut out = serde_json::to_vec_pretty(&doc).expect("checkpoint is always serializable");
    out.push(b'\n');
    out
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| bad(name, "missing"))
}

fn bad(path: &str, msg: impl Into<String>) -> Error {
    Error::Checkpoint { path: path.to_string(), msg: msg.into() }
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<EbmModel> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| bad("$", e.to_string()))?;
    let obj = doc.as_object().ok_or_else(|| bad("$", "expected an object"))?;

    match field(obj, "format")?.as_str() {
        Some(FORMAT) => {}
        _ => return Err(bad("format", format!("expected \"{FORMAT}\""))),
    }
    match field(obj, "version")?.as_u64() {
        Some(CHECKPOINT_VERSION) => {}
        other => return Err(bad("version", format!("unsupported version {other:?}, expected {CHECKPOINT_VERSION}"))),
    }
    let spec: MlpSpec = serde_json::from_value(field(obj, "spec")?.clone()).map_err(|e| bad("spec", e.to_string()))?;
    spec.validate().map_err(|e| bad("spec", e.to_string()))?;
    let seed = field(obj, "seed")?.as_u64().ok_or_else(|| bad("seed", "expected an unsigned integer"))?;

    let raw = field(obj, "theta")?.as_array().ok_or_else(|| bad("theta", "expected an array"))?;
    let theta = raw
        .iter()
        .enumerate()
        .map(|(i, v)| v.as_f64().ok_or_else(|| bad(&format!("theta[{i}]"), "expected a number")))
        .collect::<Result<Vec<f64>>>()?;
    if theta.len() != spec.num_params() {
        return Err(bad("theta", format!("{} entries, spec needs {}", theta.len(), spec.num_params())));
    }
    let meta: Option<TrainingMeta> = match obj.get("meta") {
        None | Some(Value::Null) => None,
        Some(v) => Some(serde_json::from_value(v.clone()).map_err(|e| bad("meta", e.to_string()))?),
    };
    let mut model = EbmModel::with_theta(spec, theta, seed)?;
    model.meta = meta;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;

    #[test]
    fn round_trip_is_bitwise() {
        let mut m = EbmModel::init(MlpSpec::default().with_activation(Activation::Softplus), 3).unwrap();
        m.theta_mut()[0] = 0.1 + 0.2;
        m.theta_mut()[1] = -1.0e-300;
        m.meta = Some(TrainingMeta {
            method: "nce+".into(),
            hyperparameters: [("beta".to_string(), 0.025), ("M".to_string(), 1024.0)].into_iter().collect(),
            epochs: 75,
        });
        let bytes = save_checkpoint(&m);
        let back = load_checkpoint(&bytes).unwrap();
        let bits = |t: &[f64]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(m.theta()), bits(back.theta()));
        assert_eq!(back.spec().activation, Activation::Softplus);
        assert_eq!(back.meta, m.meta);
        assert_eq!(back.seed(), 3);
        assert_eq!(m.forward(0.4, -0.2).unwrap().to_bits(), back.forward(0.4, -0.2).unwrap().to_bits());
    }

    #[test]
    fn truncated_payload_fails() {
        let m = EbmModel::init(MlpSpec::default(), 3).unwrap();
        let bytes = save_checkpoint(&m);
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(load_checkpoint(cut), Err(Error::Checkpoint { .. })));
    }

    #[test]
    fn errors_name_the_field() {
        let m = EbmModel::init(MlpSpec::default(), 3).unwrap();
        let mut doc: Value = serde_json::from_slice(&save_checkpoint(&m)).unwrap();
        doc["version"] = json!(99);
        match load_checkpoint(&serde_json::to_vec(&doc).unwrap()) {
            Err(Error::Checkpoint { path, .. }) => assert_eq!(path, "version"),
            other => panic!("{other:?}"),
        }
        let mut doc: Value = serde_json::from_slice(&save_checkpoint(&m)).unwrap();
        doc["theta"][5] = json!("x");
        match load_checkpoint(&serde_json::to_vec(&doc).unwrap()) {
            Err(Error::Checkpoint { path, .. }) => assert_eq!(path, "theta[5]"),
            other => panic!("{other:?}"),
        }
        let mut doc: Value = serde_json::from_slice(&save_checkpoint(&m)).unwrap();
        doc["theta"].as_array_mut().unwrap().pop();
        match load_checkpoint(&serde_json::to_vec(&doc).unwrap()) {
            Err(Error::Checkpoint { path, .. }) => assert_eq!(path, "theta"),
            other => panic!("{other:?}"),
        }
    }
}
