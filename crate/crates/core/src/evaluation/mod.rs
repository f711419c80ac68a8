//! From token predictions back to character offsets, and span F1 scoring.
//!
//! ```
//! use std::collections::BTreeSet;
//! use tsd_core::evaluation::span_f1;
//!
//! let s: BTreeSet<usize> = [0, 1].into();
//! let g: BTreeSet<usize> = [1, 2].into();
//! assert_eq!(span_f1(&s, &g), 0.5);
//! assert_eq!(span_f1(&BTreeSet::new(), &BTreeSet::new()), 1.0);
//! ```

mod ablation;
mod decode;
mod metric;
mod report;

pub use ablation::{ablation_table, AblationCell, Split};
pub use decode::{decode_spans, mean_span_f1, predict_spans, DecodeOptions};
pub use metric::{precision_recall, span_f1, SpanPrediction};
pub use report::{evaluate, read_predictions, write_predictions, F1Summary, ScoreReport};
