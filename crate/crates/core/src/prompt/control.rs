//! Rendering control vectors as labeled number lists and parsing them back.
//!
//! A control vector of length `C = intervals × channels` is laid out
//! interval-major: entry `i * channels + c` is channel `c` at interval `i`.
//! Each channel renders as `Label: [v0, v1, ...]` with two decimals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlLayout {
    /// Channel labels in per-interval order.
    pub channels: Vec<String>,
    pub intervals: usize,
}

impl ControlLayout {
    pub fn standard_channels() -> Vec<String> {
        ["Speed", "Course", "Accel", "Curvature"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    /// Speed, course, acceleration and curvature over `intervals` steps.
    pub fn with_intervals(intervals: usize) -> Self {
        Self {
            channels: Self::standard_channels(),
            intervals,
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len() * self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, values: &[f64], channel: usize) -> Vec<f64> {
        (0..self.intervals)
            .map(|i| values[i * self.channels.len() + channel])
            .collect()
    }
}

impl Default for ControlLayout {
    /// Seven inter-frame intervals of four channels (`C = 28`).
    fn default() -> Self {
        Self::with_intervals(7)
    }
}

pub fn format_value(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders labeled lists, e.g. `Speed: [5.00] Course: [1.50]`.
pub fn render_lists(items: &[(&str, &[f64])]) -> String {
    items
        .iter()
        .map(|(label, vals)| {
            let inner: Vec<String> = vals.iter().map(|v| format_value(*v)).collect();
            format!("{label}: [{}]", inner.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn serialize_control_signals(control_vec: &[f64], layout: &ControlLayout) -> Result<String> {
    if control_vec.is_empty() || layout.is_empty() {
        return Err(Error::Dimension(
            "cannot serialize an empty control vector".into(),
        ));
    }
    if control_vec.len() != layout.len() {
        return Err(Error::Dimension(format!(
            "control vector has {} values, layout expects {} ({} intervals × {} channels)",
            control_vec.len(),
            layout.len(),
            layout.intervals,
            layout.channels.len()
        )));
    }
    let per_channel: Vec<Vec<f64>> = (0..layout.channels.len())
        .map(|c| layout.channel(control_vec, c))
        .collect();
    let items: Vec<(&str, &[f64])> = layout
        .channels
        .iter()
        .zip(&per_channel)
        .map(|(l, v)| (l.as_str(), v.as_slice()))
        .collect();
    Ok(render_lists(&items))
}

/// Parses one rendered number; the error names `field`.
pub fn parse_number(s: &str, field: &str) -> Result<f64> {
    let t = s.trim();
    let v: f64 = t.parse().map_err(|_| Error::Response {
        field: field.to_string(),
        message: format!("{t:?} is not a number"),
        raw: s.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::Response {
            field: field.to_string(),
            message: format!("{t:?} is not finite"),
            raw: s.to_string(),
        });
    }
    Ok(v)
}

/// Extracts the list following `Label: [` in `text`.
pub fn parse_list(text: &str, label: &str) -> Result<Vec<f64>> {
    let key = format!("{label}: [");
    let start = text.find(&key).ok_or_else(|| Error::Response {
        field: label.to_string(),
        message: format!("no `{key}` list found"),
        raw: text.to_string(),
    })? + key.len();
    let end = text[start..].find(']').ok_or_else(|| Error::Response {
        field: label.to_string(),
        message: "unterminated list".into(),
        raw: text.to_string(),
    })? + start;
    let body = text[start..end].trim();
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split(',').map(|t| parse_number(t, label)).collect()
}

/// Inverse of [`serialize_control_signals`], exact to two decimals.
pub fn parse_control_signals(text: &str, layout: &ControlLayout) -> Result<Vec<f64>> {
    let mut out = vec![0.0; layout.len()];
    for (c, label) in layout.channels.iter().enumerate() {
        let vals = parse_list(text, label)?;
        if vals.len() != layout.intervals {
            return Err(Error::Response {
                field: label.clone(),
                message: format!("expected {} values, found {}", layout.intervals, vals.len()),
                raw: text.to_string(),
            });
        }
        for (i, v) in vals.into_iter().enumerate() {
            out[i * layout.channels.len() + c] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_interval_template() {
        let s =
            serialize_control_signals(&[5.0, 1.5, 0.0, 0.01], &ControlLayout::with_intervals(1))
                .unwrap();
        assert_eq!(
            s,
            "Speed: [5.00] Course: [1.50] Accel: [0.00] Curvature: [0.01]"
        );
    }

    #[test]
    fn interval_major_layout() {
        let layout = ControlLayout::with_intervals(2);
        let s =
            serialize_control_signals(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], &layout).unwrap();
        assert_eq!(
            s,
            "Speed: [1.00, 5.00] Course: [2.00, 6.00] Accel: [3.00, 7.00] Curvature: [4.00, 8.00]"
        );
    }

    #[test]
    fn empty_and_mismatched_vectors_rejected() {
        let layout = ControlLayout::with_intervals(1);
        assert!(serialize_control_signals(&[], &layout).is_err());
        assert!(serialize_control_signals(&[1.0, 2.0], &layout).is_err());
    }

    #[test]
    fn default_layout_is_28_wide() {
        assert_eq!(ControlLayout::default().len(), 28);
    }

    #[test]
    fn malformed_number_names_field() {
        let err = parse_list("Speed: [1.0] Course: [abc]", "Course").unwrap_err();
        match err {
            Error::Response { field, .. } => assert_eq!(field, "Course"),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn parse_back_recovers_two_decimals(vals in proptest::collection::vec(-1e4f64..1e4, 8)) {
            let layout = ControlLayout::with_intervals(2);
            let text = serialize_control_signals(&vals, &layout).unwrap();
            let back = parse_control_signals(&text, &layout).unwrap();
            for (a, b) in vals.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 0.005 + 1e-9, "{} vs {}", a, b);
                prop_assert_eq!(format_value(*a), format_value(*b));
            }
        }
    }
}
