//! Loading the skill, lexicon, phrase table and language profiles.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::lang::{
    load_phrase_table, shipped_profiles, LanguageProfile, PhraseTable, PhraseTableError,
    ProfileError, ENGLISH, SHIPPED_PHRASE_TABLE,
};
use crate::skill::{parse_skill, Skill, SkillError, EXAM_STRESS_SKILL};
use crate::tone::{load_lexicon, Lexicon, LexiconError, SHIPPED_LEXICON};

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("skill {path}: {source}")]
    Skill { path: String, source: SkillError },
    #[error("lexicon {path}: {source}")]
    Lexicon { path: String, source: LexiconError },
    #[error("phrase table {path}: {source}")]
    PhraseTable {
        path: String,
        source: PhraseTableError,
    },
    #[error("language profile {path}: {source}")]
    Profile { path: String, source: ProfileError },
}

fn read(path: &Path) -> Result<String, AssetError> {
    std::fs::read_to_string(path).map_err(|source| AssetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct Assets {
    pub skill: Skill,
    pub lexicon: Lexicon,
    pub phrase_table: PhraseTable,
    pub profiles: Vec<LanguageProfile>,
}

impl Assets {
    pub fn shipped() -> Assets {
        Assets {
            skill: parse_skill(EXAM_STRESS_SKILL).expect("shipped skill is valid"),
            lexicon: load_lexicon(SHIPPED_LEXICON).expect("shipped lexicon is valid"),
            phrase_table: load_phrase_table(SHIPPED_PHRASE_TABLE)
                .expect("shipped phrase table is valid"),
            profiles: shipped_profiles(),
        }
    }

    /// Load every asset named in `config`, using shipped assets for the rest.
    pub fn load(config: &PipelineConfig) -> Result<Assets, AssetError> {
        let shipped = Assets::shipped();
        let skill = match &config.skill {
            Some(p) => parse_skill(&read(p)?).map_err(|source| AssetError::Skill {
                path: p.display().to_string(),
                source,
            })?,
            None => shipped.skill,
        };
        let lexicon = match &config.lexicon {
            Some(p) => load_lexicon(&read(p)?).map_err(|source| AssetError::Lexicon {
                path: p.display().to_string(),
                source,
            })?,
            None => shipped.lexicon,
        };
        let phrase_table = match &config.phrase_table {
            Some(p) => load_phrase_table(&read(p)?).map_err(|source| AssetError::PhraseTable {
                path: p.display().to_string(),
                source,
            })?,
            None => shipped.phrase_table,
        };
        let profiles = match &config.profiles_dir {
            Some(dir) => load_profiles(dir)?,
            None => shipped.profiles,
        };
        Ok(Assets {
            skill,
            lexicon,
            phrase_table,
            profiles,
        })
    }

    /// Skill responses with no phrase-table row into one of `languages`.
    pub fn translation_gaps(&self, languages: &[String]) -> Vec<(String, String)> {
        let mut texts: Vec<&str> = self.skill.responses();
        if let Some(reprompt) = self.skill.metadata.get(crate::pipeline::REPROMPT_KEY) {
            texts.push(reprompt);
        }
        let mut gaps = Vec::new();
        for lang in languages.iter().filter(|l| l.as_str() != ENGLISH) {
            for text in &texts {
                if self.phrase_table.lookup(text, ENGLISH, lang).is_none() {
                    gaps.push((lang.clone(), text.to_string()));
                }
            }
        }
        gaps
    }
}

/// Every `*.json` file in `dir`, sorted by file name.
pub fn load_profiles(dir: &Path) -> Result<Vec<LanguageProfile>, AssetError> {
    let entries = std::fs::read_dir(dir).map_err(|source| AssetError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            LanguageProfile::from_json(&read(p)?).map_err(|source| AssetError::Profile {
                path: p.display().to_string(),
                source,
            })
        })
        .collect()
}
