//! Ranking target types for entity-bearing keyword queries.
//!
//! The crate covers the whole workflow: loading a type taxonomy and a typed
//! entity corpus ([`kb`]), entity retrieval ([`retrieval`]), the
//! entity-centric and type-centric baselines ([`typescore`]), the 25-feature
//! representation of query-type pairs ([`features`]), a random-forest
//! pointwise ranker ([`ltr`]), ground-truth construction ([`collection`]),
//! NDCG evaluation ([`eval`]) and the end-to-end experiment driver
//! ([`pipeline`]).

pub mod collection;
pub mod error;
pub mod eval;
pub mod features;
pub mod kb;
pub mod ltr;
pub mod pipeline;
pub mod queries;
pub mod ranking;
pub mod retrieval;
pub mod synthetic;
pub mod text;
pub mod typescore;

pub use error::{Error, Result};
pub use kb::{KnowledgeBase, TypeIdx, EntityIdx, NIL_TOKEN};
pub use ranking::{ScoredItem, ScoredList};
pub use retrieval::{RetrievalModel, RetrievalParams};
