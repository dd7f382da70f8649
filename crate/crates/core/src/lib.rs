//! Tone-aware, multilingual support chatbot engine.
//!
//! A turn is transcribed (optionally), language-detected and translated to
//! English, scored for tone, classified for intents and entities, routed
//! through the dialog tree, and translated back into the user's language.

pub mod assets;
pub mod config;
pub mod dialog;
pub mod eval;
pub mod lang;
pub mod mock_server;
pub mod nlu;
pub mod pipeline;
pub mod service;
pub mod skill;
pub mod speech;
pub mod text;
pub mod tone;

pub use assets::Assets;
pub use config::PipelineConfig;
pub use pipeline::{Engine, EngineError, TurnInput, TurnResult};
