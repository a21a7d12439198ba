//! Shared explanation types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gradcam,
    Lime,
    Shap,
    Lrp,
    Aee,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gradcam => "gradcam",
            Method::Lime => "lime",
            Method::Shap => "shap",
            Method::Lrp => "lrp",
            Method::Aee => "aee",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "gradcam" => Ok(Method::Gradcam),
            "lime" => Ok(Method::Lime),
            "shap" => Ok(Method::Shap),
            "lrp" => Ok(Method::Lrp),
            "aee" => Ok(Method::Aee),
            other => Err(Error::Parse(format!(
                "unknown method '{other}' (expected gradcam, lime, shap, lrp, or aee)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the explanation attributes to: one latent unit or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Latent(usize),
    Combined,
}

impl Target {
    pub fn label(self) -> String {
        match self {
            Target::Latent(i) => format!("latent{i}"),
            Target::Combined => "combined".to_string(),
        }
    }

    pub fn parse(s: &str) -> Result<Target> {
        if s == "combined" {
            return Ok(Target::Combined);
        }
        if let Some(rest) = s.strip_prefix("latent") {
            if let Ok(i) = rest.parse::<usize>() {
                return Ok(Target::Latent(i));
            }
        }
        Err(Error::Parse(format!(
            "unknown target '{s}' (expected combined or latent<i>)"
        )))
    }
}

/// Per-time-step importance for one series, one method, one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub series_id: String,
    pub method: Method,
    pub target: Target,
    pub values: Vec<f64>,
}

impl Explanation {
    pub fn new(
        series_id: impl Into<String>,
        method: Method,
        target: Target,
        values: Vec<f64>,
    ) -> Result<Explanation> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "{method} explanation contains non-finite values"
            )));
        }
        Ok(Explanation { series_id: series_id.into(), method, target, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mean of absolute per-latent explanations: the combined-mode reduction
/// shared by every method.
pub fn combine_mean_abs(
    series_id: &str,
    method: Method,
    per_latent: &[Explanation],
) -> Result<Explanation> {
    if per_latent.is_empty() {
        return Err(Error::Parameter("no per-latent explanations to combine".into()));
    }
    let n = per_latent[0].len();
    if per_latent.iter().any(|e| e.len() != n) {
        return Err(Error::Dimension("per-latent explanation lengths differ".into()));
    }
    let k = per_latent.len() as f64;
    let values = (0..n)
        .map(|i| per_latent.iter().map(|e| e.values[i].abs()).sum::<f64>() / k)
        .collect();
    Explanation::new(series_id, method, Target::Combined, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_labels_roundtrip() {
        assert_eq!(Target::Latent(2).label(), "latent2");
        assert_eq!(Target::parse("latent2").unwrap(), Target::Latent(2));
        assert_eq!(Target::parse("combined").unwrap(), Target::Combined);
        assert!(Target::parse("latentx").is_err());
    }

    #[test]
    fn method_names_roundtrip() {
        for m in [Method::Gradcam, Method::Lime, Method::Shap, Method::Lrp, Method::Aee] {
            assert_eq!(Method::parse(m.as_str()).unwrap(), m);
        }
        assert!(Method::parse("saliency").is_err());
    }

    #[test]
    fn single_latent_combined_is_absolute_value() {
        let e = Explanation::new("s", Method::Lrp, Target::Latent(0), vec![-1.0, 2.0, -3.0])
            .unwrap();
        let c = combine_mean_abs("s", Method::Lrp, &[e]).unwrap();
        assert_eq!(c.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.target, Target::Combined);
    }

    #[test]
    fn identical_per_latent_maps_combine_to_their_absolute() {
        let e1 = Explanation::new("s", Method::Shap, Target::Latent(0), vec![1.0, -2.0]).unwrap();
        let e2 = Explanation::new("s", Method::Shap, Target::Latent(1), vec![1.0, -2.0]).unwrap();
        let c = combine_mean_abs("s", Method::Shap, &[e1, e2]).unwrap();
        assert_eq!(c.values, vec![1.0, 2.0]);
    }

    #[test]
    fn non_finite_values_rejected() {
        assert!(Explanation::new("s", Method::Lime, Target::Combined, vec![f64::NAN]).is_err());
    }
}
