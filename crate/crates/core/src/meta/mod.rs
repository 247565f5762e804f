//! Few-shot sine regression with a stochastic prompt encoder and an MI
//! regularizer on the task embedding, plus a first-order MAML baseline.

pub mod checkpoint;
pub mod eval;
pub mod fomaml;
pub mod learner;
pub mod prompt;
pub mod task;

pub use checkpoint::{load_checkpoint, save_checkpoint, Learner};
pub use eval::{adapt_predict, eval_fomaml, eval_meta, predict_ensemble, MetaEvalReport, TaskEval};
pub use fomaml::{FomamlConfig, FomamlState};
pub use learner::{
    draw_noise, lambda_gradient_gap, sample_batch, DataEmbedding, MetaConfig, MetaLosses,
    MetaTrainState,
};
pub use prompt::{prompt_encode, prompt_encode_data, rkhs_embed, PromptBackend, PromptConfig, PromptEncoder};
pub use task::{sample_episode, sample_task, Episode, SineTask};
