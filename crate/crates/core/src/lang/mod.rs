//! Language identification and translation around the English core.

mod detect;
mod provider;
mod translate;

pub use detect::{
    detect_language, detect_language_weighted, trigram_counts, Detection, LanguageProfile,
    ProfileDocument, ProfileError, DEFAULT_STOPWORD_WEIGHT, DEFAULT_TRIGRAM_WEIGHT, UNDETERMINED,
};
pub(crate) use provider::http_agent;
pub use provider::{
    DetectRequest, DetectResponse, HttpTranslationProvider, MockTranslationProvider, ProviderError,
    TranslateRequest, TranslateResponse, TranslationProvider, DEFAULT_PROVIDER_TIMEOUT,
};
pub use translate::{
    load_phrase_table, translate, PhraseRow, PhraseTable, PhraseTableError, Provenance, Segment,
    TranslationResult,
};

pub const ENGLISH: &str = "en";

/// Built-in language profiles, in a fixed order.
pub const SHIPPED_PROFILES: [(&str, &str); 4] = [
    ("en", include_str!("../../assets/profiles/en.json")),
    ("es", include_str!("../../assets/profiles/es.json")),
    ("fr", include_str!("../../assets/profiles/fr.json")),
    ("de", include_str!("../../assets/profiles/de.json")),
];

pub const SHIPPED_PHRASE_TABLE: &str = include_str!("../../assets/phrase_table.csv");

pub fn shipped_profiles() -> Vec<LanguageProfile> {
    SHIPPED_PROFILES
        .iter()
        .map(|(_, doc)| LanguageProfile::from_json(doc).expect("shipped profile is valid"))
        .collect()
}
