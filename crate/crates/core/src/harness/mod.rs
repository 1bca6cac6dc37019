//! Session windows, end-to-end generation, scenario evaluation and the
//! exploit taxonomy.

pub mod evaluate;
pub mod generate;
pub mod mode;
pub mod taxonomy;

pub use evaluate::{evaluate, Cell, EvalError, EvaluationMatrix, OutcomeRecord, ProfileSets};
pub use generate::{generate, GenerateOptions, GenerateSummary, Generated};
pub use mode::{window, Mode, ModeError, Window};
pub use taxonomy::{
    attack_classes, classify, AttackClass, EffectiveRange, Impact, Target, TaxonomyReport,
};
