//! Plain-text parameter checkpoints.
//!
//! ```text
//! raicl-mlp v1
//! layer_dims 6 16 8
//! layer 0
//! <one line per weight row, space separated>
//! bias <values>
//! layer 1
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting.

use std::fmt::Write as _;
use std::path::Path;

use super::MlpParams;
use crate::error::{Error, Result};
use crate::fsio;

const HEADER: &str = "raicl-mlp v1";

pub fn render_checkpoint(p: &MlpParams) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    let dims: Vec<String> = p.layer_dims().iter().map(ToString::to_string).collect();
    writeln!(out, "layer_dims {}", dims.join(" ")).unwrap();
    for (i, l) in p.layers.iter().enumerate() {
        writeln!(out, "layer {i}").unwrap();
        for row in l.weights.chunks_exact(l.inputs) {
            writeln!(out, "{}", join(row)).unwrap();
        }
        writeln!(out, "bias {}", join(&l.bias)).unwrap();
    }
    out
}

fn join(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_checkpoint(text: &str) -> Result<MlpParams> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("checkpoint truncated, expected {what}"),
        })
    };

    let (n, header) = next("header")?;
    if header != HEADER {
        return Err(Error::Parse {
            line: n,
            message: format!("expected header {HEADER:?}, found {header:?}"),
        });
    }
    let (n, dims_line) = next("layer_dims")?;
    let dims: Vec<usize> = dims_line
        .strip_prefix("layer_dims")
        .ok_or_else(|| Error::Parse {
            line: n,
            message: "expected `layer_dims`".into(),
        })?
        .split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| Error::Parse {
                line: n,
                message: format!("bad layer width {t:?}"),
            })
        })
        .collect::<Result<_>>()?;
    let mut params = MlpParams::zeros(&dims)?;

    for (li, layer) in params.layers.iter_mut().enumerate() {
        let (n, tag) = next("layer tag")?;
        if tag != format!("layer {li}") {
            return Err(Error::Parse {
                line: n,
                message: format!("expected `layer {li}`, found {tag:?}"),
            });
        }
        for row in 0..layer.outputs {
            let (n, line) = next("weight row")?;
            let vals = parse_floats(line, n)?;
            if vals.len() != layer.inputs {
                return Err(Error::Parse {
                    line: n,
                    message: format!("expected {} weights, found {}", layer.inputs, vals.len()),
                });
            }
            layer.weights[row * layer.inputs..(row + 1) * layer.inputs].copy_from_slice(&vals);
        }
        let (n, line) = next("bias")?;
        let vals = parse_floats(
            line.strip_prefix("bias").ok_or_else(|| Error::Parse {
                line: n,
                message: "expected `bias`".into(),
            })?,
            n,
        )?;
        if vals.len() != layer.outputs {
            return Err(Error::Parse {
                line: n,
                message: format!("expected {} biases, found {}", layer.outputs, vals.len()),
            });
        }
        layer.bias.copy_from_slice(&vals);
    }
    if !params.is_finite() {
        return Err(Error::Parse {
            line: 0,
            message: "checkpoint contains non-finite values".into(),
        });
    }
    Ok(params)
}

fn parse_floats(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad number {t:?}"),
            })
        })
        .collect()
}

pub fn save_checkpoint(p: &MlpParams, path: &Path) -> Result<()> {
    fsio::write_atomic(path, render_checkpoint(p).as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<MlpParams> {
    parse_checkpoint(&fsio::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_of_small_network() {
        let mut p = MlpParams::zeros(&[2, 1]).unwrap();
        p.layers[0].weights = vec![0.5, -1.25];
        p.layers[0].bias = vec![1e-7];
        assert_eq!(
            render_checkpoint(&p),
            "raicl-mlp v1\nlayer_dims 2 1\nlayer 0\n0.5 -1.25\nbias 0.0000001\n"
        );
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(parse_checkpoint("raicl-mlp v2\nlayer_dims 1 1\n").is_err());
    }

    #[test]
    fn truncated_rejected() {
        let p = MlpParams::init(&[3, 2], 1).unwrap();
        let text = render_checkpoint(&p);
        let cut: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(parse_checkpoint(&cut).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(seed in any::<u64>(), hidden in 1usize..6) {
            let p = MlpParams::init(&[3, hidden, 2], seed).unwrap();
            let text = render_checkpoint(&p);
            let q = parse_checkpoint(&text).unwrap();
            prop_assert_eq!(&p, &q);
            prop_assert_eq!(render_checkpoint(&q), text);
        }
    }
}
