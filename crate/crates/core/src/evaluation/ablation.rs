use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingConfig;
use crate::model::ModelVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Test,
}

/// Outcome of one (model variant, embedding config) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub variant: ModelVariant,
    pub embedding: EmbeddingConfig,
    pub seed: u64,
    pub dev_f1: Option<f64>,
    pub test_f1: Option<f64>,
    /// Set when the run failed.
    pub error: Option<String>,
}

/// Markdown table with the four model variants as rows and the seven
/// embedding configurations as columns. Scores are rounded to three decimals;
/// cells that were not run show `-`, failed cells show `failed`.
///
/// ```
/// use tsd_core::embeddings::EmbeddingConfig;
/// use tsd_core::evaluation::{ablation_table, AblationCell, Split};
/// use tsd_core::model::ModelVariant;
///
/// let cell = AblationCell {
///     variant: ModelVariant::BiGruAttention,
///     embedding: EmbeddingConfig::Ensemble,
///     seed: 27,
///     dev_f1: Some(0.6684),
///     test_f1: None,
///     error: None,
/// };
/// let table = ablation_table(&[cell], Split::Dev);
/// assert!(table.lines().last().unwrap().ends_with("| 0.668 |"));
/// ```
pub fn ablation_table(cells: &[AblationCell], split: Split) -> String {
    let mut out = String::from("| Model |");
    for c in EmbeddingConfig::ALL {
        write!(out, " {c} |").unwrap();
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(EmbeddingConfig::ALL.len()));
    for variant in ModelVariant::ALL {
        write!(out, "\n| {variant} |").unwrap();
        for embedding in EmbeddingConfig::ALL {
            let cell = cells.iter().find(|c| c.variant == variant && c.embedding == embedding);
            let text = match cell {
                None => "-".to_string(),
                Some(c) if c.error.is_some() => "failed".to_string(),
                Some(c) => match split {
                    Split::Dev => c.dev_f1,
                    Split::Test => c.test_f1,
                }
                .map_or("-".to_string(), |f| format!("{f:.3}")),
            };
            write!(out, " {text} |").unwrap();
        }
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_four_by_seven() {
        let cells: Vec<AblationCell> = ModelVariant::ALL
            .into_iter()
            .flat_map(|v| EmbeddingConfig::ALL.into_iter().map(move |e| (v, e)))
            .enumerate()
            .map(|(i, (variant, embedding))| AblationCell {
                variant,
                embedding,
                seed: i as u64,
                dev_f1: Some(i as f64 / 100.0),
                test_f1: None,
                error: (i == 3).then(|| "boom".into()),
            })
            .collect();
        let table = ablation_table(&cells, Split::Dev);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2 + 4);
        assert!(lines[0].contains("| GloVe | GPT-2 | RoBERTa | RG | GoR | GoG | Ensemble |"));
        assert_eq!(
            lines[2],
            "| BiLSTM | 0.000 | 0.010 | 0.020 | failed | 0.040 | 0.050 | 0.060 |"
        );
        assert!(lines[5].starts_with("| BiGRU+Attention |"));
        for l in &lines[2..] {
            assert_eq!(l.matches('|').count(), 9);
        }
        let test = ablation_table(&cells, Split::Test);
        assert!(test.lines().nth(3).unwrap().ends_with("| - |"));
    }
}
