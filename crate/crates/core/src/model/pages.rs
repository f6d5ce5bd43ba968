//! JSON-Lines page dumps: one wiki page per line.

use super::ntriples::{ParseMode, ParseReport};
use super::WikiId;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PageError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

/// A link from a page of one wiki to a page of another wiki.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterWikiLink {
    pub target_wiki: WikiId,
    pub target_title: String,
    pub fragment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    /// Empty for the lead section.
    pub title: String,
    pub links: Vec<InterWikiLink>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageRecord {
    pub wiki: WikiId,
    pub title: String,
    pub label: String,
    pub is_redirect_to: Option<String>,
    pub categories: Vec<String>,
    pub first_sentence: String,
    pub sections: Vec<Section>,
}

impl PageRecord {
    pub fn links(&self) -> impl Iterator<Item = (&Section, &InterWikiLink)> {
        self.sections.iter().flat_map(|s| s.links.iter().map(move |l| (s, l)))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    wiki: String,
    title: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSection {
    title: String,
    links: Vec<RawLink>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPage {
    wiki: String,
    title: String,
    label: String,
    redirect_to: Option<String>,
    categories: Vec<String>,
    first_sentence: String,
    sections: Vec<RawSection>,
}

impl PageRecord {
    fn from_raw(raw: RawPage) -> Result<Self, String> {
        let wiki = WikiId::new(&raw.wiki).map_err(|e| e.to_string())?;
        if raw.title.trim().is_empty() {
            return Err("empty page title".into());
        }
        if matches!(&raw.redirect_to, Some(r) if r.trim().is_empty()) {
            return Err("empty redirect target".into());
        }
        let mut sections = Vec::with_capacity(raw.sections.len());
        for s in raw.sections {
            let mut links = Vec::new();
            for l in s.links {
                let target_wiki = WikiId::new(&l.wiki).map_err(|e| e.to_string())?;
                if target_wiki == wiki {
                    continue;
                }
                let (title, fragment) = match l.title.split_once('#') {
                    Some((t, f)) => (t.to_string(), Some(f.to_string())),
                    None => (l.title, None),
                };
                if title.trim().is_empty() {
                    return Err("inter-wiki link without a page title".into());
                }
                links.push(InterWikiLink { target_wiki, target_title: title, fragment });
            }
            sections.push(Section { title: s.title, links });
        }
        Ok(PageRecord {
            wiki,
            title: raw.title,
            label: raw.label,
            is_redirect_to: raw.redirect_to,
            categories: raw.categories,
            first_sentence: raw.first_sentence,
            sections,
        })
    }

    /// Serializes back to the dump's JSON object form.
    pub fn to_json(&self) -> String {
        let raw = RawPage {
            wiki: self.wiki.to_string(),
            title: self.title.clone(),
            label: self.label.clone(),
            redirect_to: self.is_redirect_to.clone(),
            categories: self.categories.clone(),
            first_sentence: self.first_sentence.clone(),
            sections: self
                .sections
                .iter()
                .map(|s| RawSection {
                    title: s.title.clone(),
                    links: s
                        .links
                        .iter()
                        .map(|l| RawLink {
                            wiki: l.target_wiki.to_string(),
                            title: match &l.fragment {
                                Some(f) => format!("{}#{}", l.target_title, f),
                                None => l.target_title.clone(),
                            },
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("page records always serialize")
    }
}

pub fn parse_page_dump(
    path: &Path,
    mode: ParseMode,
) -> Result<(Vec<PageRecord>, ParseReport), PageError> {
    read_page_dump(BufReader::new(File::open(path)?), mode)
}

pub fn read_page_dump(
    reader: impl BufRead,
    mode: ParseMode,
) -> Result<(Vec<PageRecord>, ParseReport), PageError> {
    let mut report = ParseReport::default();
    let mut pages = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        report.lines += 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawPage>(&line)
            .map_err(|e| e.to_string())
            .and_then(PageRecord::from_raw);
        match parsed {
            Ok(p) => {
                pages.push(p);
                report.records += 1;
            }
            Err(message) => match mode {
                ParseMode::Strict => return Err(PageError::Schema { line: idx + 1, message }),
                ParseMode::Lenient => report.record_error(idx + 1, message),
            },
        }
    }
    Ok((pages, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRODO: &str = r#"{"wiki":"lotr","title":"Frodo","label":"Frodo","redirect_to":null,"categories":["Hobbits"],"first_sentence":"Frodo is a hobbit.","sections":[{"title":"External links","links":[{"wiki":"tolkien","title":"Frodo#Early_life"},{"wiki":"lotr","title":"Sam"}]}]}"#;

    #[test]
    fn fragment_is_split_and_intra_wiki_links_dropped() {
        let (pages, report) = read_page_dump(FRODO.as_bytes(), ParseMode::Strict).unwrap();
        assert_eq!(report.records, 1);
        let links = &pages[0].sections[0].links;
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].target_title, "Frodo");
        assert_eq!(links[0].fragment.as_deref(), Some("Early_life"));
        assert_eq!(links[0].target_wiki.as_str(), "tolkien");
    }

    #[test]
    fn redirect_passes_through() {
        let line = r#"{"wiki":"lotr","title":"Strider","label":"Strider","redirect_to":"Aragorn II","categories":[],"first_sentence":"","sections":[]}"#;
        let (pages, _) = read_page_dump(line.as_bytes(), ParseMode::Strict).unwrap();
        assert_eq!(pages[0].is_redirect_to.as_deref(), Some("Aragorn II"));
    }

    #[test]
    fn malformed_line_is_skipped_in_lenient_mode() {
        let text = format!("{FRODO}\n{{\"wiki\": \"lotr\", \"title\": 3}}\n{}\n", FRODO.replace("Frodo\"", "Sam\""));
        let (pages, report) = read_page_dump(text.as_bytes(), ParseMode::Lenient).unwrap();
        assert_eq!(pages.len(), 2);
        assert_eq!(report.skipped, 1);
        assert!(matches!(
            read_page_dump(text.as_bytes(), ParseMode::Strict),
            Err(PageError::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let (pages, _) = read_page_dump(FRODO.as_bytes(), ParseMode::Strict).unwrap();
        let again = pages[0].to_json();
        let (back, _) = read_page_dump(again.as_bytes(), ParseMode::Strict).unwrap();
        assert_eq!(back, pages);
    }
}
