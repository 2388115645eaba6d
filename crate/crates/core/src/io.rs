//! File formats: model JSON, dataset CSV, and commented CSV output.
//!
//! The model file is plain JSON:
//! `{"layers":[{"weights":[[..]],"bias":[..],"activation":"relu"|"identity"}],
//!   "head":"regression"|"classification","temperature":1.0}`.
//! Datasets are CSV with a header row; one column may be designated as the
//! label column. All emitted CSVs start with `#`-prefixed comment lines that
//! echo the effective configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::net::{Activation, Dataset, DenseLayer, Head, Labels, Network};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    layers: Vec<LayerFile>,
    head: Head,
    temperature: f64,
}

pub fn network_to_json(net: &Network) -> String {
    let file = ModelFile {
        layers: net
            .layers()
            .iter()
            .map(|l| LayerFile {
                weights: (0..l.out_dim())
                    .map(|r| (0..l.in_dim()).map(|c| l.weight(r, c)).collect())
                    .collect(),
                bias: l.bias().to_vec(),
                activation: l.activation(),
            })
            .collect(),
        head: net.head(),
        temperature: net.temperature(),
    };
    serde_json::to_string_pretty(&file).expect("network serialization cannot fail")
}

pub fn network_from_json(text: &str) -> Result<Network> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("model file: {e}")))?;
    let layers: Vec<DenseLayer> = file
        .layers
        .into_iter()
        .map(|l| DenseLayer::new(l.weights, l.bias, l.activation))
        .collect::<Result<_>>()?;
    Network::new(layers, file.head, file.temperature)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    network_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_model(path: impl AsRef<Path>, net: &Network) -> Result<()> {
    std::fs::write(path, network_to_json(net) + "\n")?;
    Ok(())
}

/// How to interpret the label column of a dataset CSV.
#[derive(Debug, Clone, Copy)]
pub enum LabelSpec<'a> {
    None,
    Class(&'a str),
    Target(&'a str),
}

/// Parse a dataset CSV: header row names the columns, every value is a
/// decimal float, `#` lines are ignored. Non-label columns become inputs in
/// header order.
pub fn dataset_from_csv(text: &str, label: LabelSpec<'_>) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("dataset CSV has no header"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let label_name = match label {
        LabelSpec::None => None,
        LabelSpec::Class(name) | LabelSpec::Target(name) => Some(name),
    };
    let label_idx = match label_name {
        Some(name) => Some(
            columns
                .iter()
                .position(|&c| c == name)
                .ok_or_else(|| Error::parse(format!("label column '{name}' not in header")))?,
        ),
        None => None,
    };
    let input_dim = columns.len() - label_idx.map_or(0, |_| 1);
    if input_dim == 0 {
        return Err(Error::parse("dataset CSV has no input columns"));
    }

    let mut inputs = Vec::new();
    let mut classes = Vec::new();
    let mut targets = Vec::new();
    let mut n = 0usize;
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::parse(format!(
                "row {} has {} fields, header has {}",
                lineno + 2,
                fields.len(),
                columns.len()
            )));
        }
        for (i, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(format!("row {}: bad number '{f}'", lineno + 2)))?;
            if Some(i) == label_idx {
                match label {
                    LabelSpec::Class(_) => {
                        if v.fract() != 0.0 || v < 0.0 {
                            return Err(Error::parse(format!(
                                "row {}: class label {v} is not a nonnegative integer",
                                lineno + 2
                            )));
                        }
                        classes.push(v as usize);
                    }
                    LabelSpec::Target(_) => targets.push(v),
                    LabelSpec::None => unreachable!(),
                }
            } else {
                inputs.push(v);
            }
        }
        n += 1;
    }
    let labels = match label {
        LabelSpec::None => None,
        LabelSpec::Class(_) => Some(Labels::Classes(classes)),
        LabelSpec::Target(_) => Some(Labels::Targets {
            values: targets,
            dim: 1,
        }),
    };
    Dataset::new(inputs, n, input_dim, labels)
}

pub fn load_dataset(path: impl AsRef<Path>, label: LabelSpec<'_>) -> Result<Dataset> {
    dataset_from_csv(&std::fs::read_to_string(path)?, label)
}

/// Emit a dataset as CSV with input columns `x0..x{d-1}` and, when labels
/// are present, a final `label` column.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let d = data.input_dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    if data.labels().is_some() {
        header.push("label".to_string());
    }
    let mut out = header.join(",");
    out.push('\n');
    for s in 0..data.len() {
        let mut fields: Vec<String> = data.input(s).iter().map(|v| format!("{v:.16e}")).collect();
        match data.labels() {
            Some(Labels::Classes(c)) => fields.push(c[s].to_string()),
            Some(Labels::Targets { .. }) => {
                fields.push(format!("{:.16e}", data.target(s).unwrap()[0]))
            }
            None => {}
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    std::fs::write(path, dataset_to_csv(data))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SidecarLayer {
    Mask {
        layer: usize,
        keep: Vec<bool>,
    },
    Codebook {
        layer: usize,
        centroids: Vec<f64>,
        /// Zero-based cluster index per weight, in flat-index order.
        assignments: Vec<usize>,
        cluster_sizes: Vec<usize>,
    },
}

#[derive(Serialize, Deserialize)]
struct SidecarFile {
    compressor: String,
    include_bias: bool,
    layers: Vec<SidecarLayer>,
}

/// Serialize the per-layer masks/codebooks that produced a compressed model.
pub fn sidecar_to_json(
    compressor: &str,
    include_bias: bool,
    artifacts: &[(usize, crate::metrics::LayerArtifact)],
) -> String {
    use crate::metrics::LayerArtifact;
    let layers = artifacts
        .iter()
        .map(|(l, a)| match a {
            LayerArtifact::Mask(m) => SidecarLayer::Mask {
                layer: *l,
                keep: m.keep().to_vec(),
            },
            LayerArtifact::Codebook(cb) => SidecarLayer::Codebook {
                layer: *l,
                centroids: cb.centroids().to_vec(),
                assignments: cb.assignments().to_vec(),
                cluster_sizes: cb.cluster_sizes().to_vec(),
            },
        })
        .collect();
    let file = SidecarFile {
        compressor: compressor.to_string(),
        include_bias,
        layers,
    };
    serde_json::to_string_pretty(&file).expect("sidecar serialization cannot fail")
}

pub fn save_sidecar(
    path: impl AsRef<Path>,
    compressor: &str,
    include_bias: bool,
    artifacts: &[(usize, crate::metrics::LayerArtifact)],
) -> Result<()> {
    std::fs::write(path, sidecar_to_json(compressor, include_bias, artifacts) + "\n")?;
    Ok(())
}

/// Assemble a commented CSV document: `# ...` lines, the column header, then
/// the data rows.
pub fn csv_document(comments: &[String], columns: &str, rows: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(columns);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

pub fn write_csv(
    path: impl AsRef<Path>,
    comments: &[String],
    columns: &str,
    rows: &[String],
) -> Result<()> {
    std::fs::write(path, csv_document(comments, columns, rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::FlatIndexer;

    #[test]
    fn model_json_roundtrip_is_exact() {
        let net = crate::synth::two_class_mlp(1);
        let json = network_to_json(&net);
        let back = network_from_json(&json).unwrap();
        let idx = FlatIndexer::new(&net, true);
        assert_eq!(idx.flatten(&net), idx.flatten(&back));
        assert_eq!(net.temperature(), back.temperature());
        assert_eq!(net.head(), back.head());
    }

    #[test]
    fn model_json_matches_documented_shape() {
        let json = r#"{
            "layers": [
                {"weights": [[2.0]], "bias": [0.0], "activation": "identity"}
            ],
            "head": "regression",
            "temperature": 1.0
        }"#;
        let net = network_from_json(json).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![6.0]);
    }

    #[test]
    fn malformed_model_is_a_parse_error() {
        assert!(matches!(
            network_from_json("{\"layers\": []"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn dataset_csv_roundtrip_with_class_labels() {
        let text = "x0,x1,label\n0.5,-1.0,0\n1.5,2.0,1\n";
        let data = dataset_from_csv(text, LabelSpec::Class("label")).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.input(1), &[1.5, 2.0]);
        assert_eq!(data.class(0), Some(0));
        let emitted = dataset_to_csv(&data);
        let back = dataset_from_csv(&emitted, LabelSpec::Class("label")).unwrap();
        assert_eq!(back.input(1), data.input(1));
        assert_eq!(back.class(1), Some(1));
    }

    #[test]
    fn dataset_csv_label_column_can_sit_anywhere() {
        let text = "y,x0,x1\n3.5,1.0,2.0\n";
        let data = dataset_from_csv(text, LabelSpec::Target("y")).unwrap();
        assert_eq!(data.input(0), &[1.0, 2.0]);
        assert_eq!(data.target(0), Some(&[3.5][..]));
    }

    #[test]
    fn dataset_csv_errors() {
        assert!(dataset_from_csv("", LabelSpec::None).is_err());
        assert!(dataset_from_csv("x0\n", LabelSpec::None).is_err()); // empty dataset
        assert!(dataset_from_csv("x0\n1.0\n", LabelSpec::Class("label")).is_err());
        assert!(dataset_from_csv("x0,label\n1.0,0.5\n", LabelSpec::Class("label")).is_err());
        assert!(dataset_from_csv("x0\nnot_a_number\n", LabelSpec::None).is_err());
    }

    #[test]
    fn csv_document_places_comments_first() {
        let doc = csv_document(
            &["seed: 7".to_string()],
            "a,b",
            &["1,2".to_string(), "3,4".to_string()],
        );
        assert_eq!(doc, "# seed: 7\na,b\n1,2\n3,4\n");
    }
}
