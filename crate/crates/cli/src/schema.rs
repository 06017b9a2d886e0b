//! JSON Schema for experiment configs, printed by `--print-schema`.

use serde_json::{json, Value};

use crate::config::ExperimentId;

fn positive() -> Value {
    json!({"type": "number", "exclusiveMinimum": 0})
}

fn range() -> Value {
    json!({"type": "array", "items": positive(), "minItems": 2, "maxItems": 2})
}

pub fn config_schema() -> Value {
    let ids: Vec<&str> = ExperimentId::ALL.iter().map(|e| e.as_str()).collect();
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "ExperimentConfig",
        "description": "Only `experiment` is required; every other field defaults to that experiment's preset. Nested objects are merged field by field, arrays are replaced.",
        "type": "object",
        "required": ["experiment"],
        "additionalProperties": false,
        "properties": {
            "experiment": {"enum": ids},
            "graph": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "models": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"enum": ["erdos-renyi", "preferential-attachment", "random-weighted"]},
                        "description": "One series per model."
                    },
                    "n": {"type": "integer", "minimum": 2},
                    "edge_probability": {"type": "number", "minimum": 0, "maximum": 1}
                }
            },
            "bandwidth": {"type": "integer", "minimum": 1, "description": "|K|, the number of retained eigenvectors."},
            "prior": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "signal_variance": positive(),
                    "noise": {
                        "oneOf": [
                            {
                                "type": "object",
                                "required": ["levels"],
                                "additionalProperties": false,
                                "properties": {"levels": {"type": "array", "items": positive(), "minItems": 1}},
                                "description": "Homoscedastic noise; each level is its own series."
                            },
                            {
                                "type": "object",
                                "required": ["per_node_uniform"],
                                "additionalProperties": false,
                                "properties": {"per_node_uniform": range()},
                                "description": "Per-node variances drawn uniformly from [lo, hi]."
                            },
                            {
                                "type": "object",
                                "required": ["per_trial_log_uniform"],
                                "additionalProperties": false,
                                "properties": {"per_trial_log_uniform": range()},
                                "description": "One homoscedastic level per trial, log-uniform on [lo, hi]."
                            }
                        ]
                    },
                    "transform": {
                        "oneOf": [
                            {"const": "identity"},
                            {
                                "type": "object",
                                "required": ["gaussian"],
                                "additionalProperties": false,
                                "properties": {
                                    "gaussian": {
                                        "type": "object",
                                        "required": ["rows"],
                                        "additionalProperties": false,
                                        "properties": {"rows": {"type": "integer", "minimum": 1}}
                                    }
                                }
                            }
                        ]
                    }
                }
            },
            "budget": {
                "type": ["integer", "null"],
                "minimum": 1,
                "description": "Sampling budget; null means |K| (n for fig5-greedy-vs-bound)."
            },
            "trials": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
            "samplers": {
                "type": "array",
                "minItems": 1,
                "items": {"enum": ["greedy", "greedy-logdet", "uniform", "leverage", "rank-leverage"]}
            },
            "reductions": {
                "type": "array",
                "minItems": 1,
                "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "description": "Target MSE reductions relative to the empty set."
            },
            "exhaustive_cap": {"type": "integer", "minimum": 1},
            "alpha_max_nodes": {"type": "integer", "minimum": 1},
            "kpca": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "train": {"type": "integer", "minimum": 2},
                    "test": {"type": "integer", "minimum": 1},
                    "radial_noise": {"type": "number", "minimum": 0},
                    "degree": {"type": "integer", "minimum": 1},
                    "components": {"type": "integer", "minimum": 1},
                    "sigma_w2": positive(),
                    "budgets": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}}
                }
            },
            "output": {"type": ["string", "null"], "description": "Output directory; --out overrides it."}
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    /// Every preset field appears in the schema and nothing else does.
    #[test]
    fn schema_covers_config_fields() {
        let schema = config_schema();
        let props = schema["properties"].as_object().unwrap();
        for id in ExperimentId::ALL {
            let cfg = serde_json::to_value(ExperimentConfig::preset(id)).unwrap();
            let fields = cfg.as_object().unwrap();
            assert_eq!(fields.len(), props.len());
            for (k, v) in fields {
                let p = props
                    .get(k)
                    .unwrap_or_else(|| panic!("{k} missing from schema"));
                if let (Some(obj), Some(sub)) = (v.as_object(), p.get("properties")) {
                    for key in obj.keys() {
                        assert!(sub.get(key).is_some(), "{k}.{key} missing from schema");
                    }
                }
            }
        }
    }
}
