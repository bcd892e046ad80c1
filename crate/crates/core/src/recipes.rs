//! Built-in experiment configurations, one per figure of the reference study.

use crate::config::ExperimentConfig;
use crate::error::{Result, SimError};

const RECIPES: &[(&str, &str)] = &[
    ("fig2", include_str!("../recipes/fig2.json")),
    ("fig3", include_str!("../recipes/fig3.json")),
    ("fig4a", include_str!("../recipes/fig4a.json")),
    ("fig4b", include_str!("../recipes/fig4b.json")),
    ("fig5a", include_str!("../recipes/fig5a.json")),
    ("fig5b", include_str!("../recipes/fig5b.json")),
    ("fig6", include_str!("../recipes/fig6.json")),
    ("fig7", include_str!("../recipes/fig7.json")),
    ("fig8a", include_str!("../recipes/fig8a.json")),
    ("fig8b", include_str!("../recipes/fig8b.json")),
    ("fig9", include_str!("../recipes/fig9.json")),
    ("fig10", include_str!("../recipes/fig10.json")),
    ("fig11", include_str!("../recipes/fig11.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    RECIPES.iter().map(|(n, _)| *n)
}

/// Raw JSON of a recipe.
pub fn source(name: &str) -> Option<&'static str> {
    RECIPES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let text = source(name).ok_or_else(|| {
        let known: Vec<&str> = names().collect();
        SimError::InvalidConfig(vec![format!(
            "unknown recipe {name}; known: {}",
            known.join(", ")
        )])
    })?;
    ExperimentConfig::from_json(text)
}
