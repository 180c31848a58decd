//! Control synthesis for LTL objectives on probabilistically-labeled MDPs.
//!
//! A model ([`plmdp::Plmdp`]) is composed on the fly with a limit-deterministic
//! Büchi automaton ([`automaton::Ldba`]); tabular Q-learning
//! ([`learner::run_learning`]) is driven by a reward paid whenever the run
//! reaches an accepting set still owed a visit. The [`verifier`] enumerates
//! the product and computes exact satisfaction probabilities for checking
//! learned policies.

pub mod alphabet;
pub mod assets;
pub mod automaton;
pub mod envs;
pub mod error;
pub mod graph;
pub mod learner;
pub mod ltl;
pub mod plmdp;
pub mod product;
pub mod rng;
pub mod verifier;

pub use alphabet::{Alphabet, LabelSet};
pub use automaton::{accepting_frontier, load_ldba, Acceptance, Frontier, Ldba, Part};
pub use error::{Error, Result};
pub use learner::{
    execute_policy, extract_policy, greedy_action, run_learning, LearnConfig, LearnOutcome,
    LearningCurve, Policy, QTable, Trace,
};
pub use ltl::{holds_on_lasso, parse_ltl, Formula, Lasso};
pub use plmdp::{load_plmdp, Plmdp};
pub use product::{
    enumerate_product, reward_and_update, ExplicitProduct, Product, ProductAction, ProductState,
    RewardConfig,
};
pub use rng::Streams;
pub use verifier::{
    accepting_mecs, closeness, counterexample_returns, counterexample_threshold,
    max_satisfaction_probability, mec_decomposition, policy_satisfaction_probability, verify,
    VerifyReport,
};
