//! Closed label sets for the three prediction granularities.
//!
//! A [`Taxonomy`] owns the nationality labels together with their region and
//! continent hierarchy. Every nationality maps to exactly one region and every
//! region to exactly one continent; both mappings are total over the loaded
//! set. Labels are validated at construction — a [`Label`] can only be
//! obtained by normalizing a string against a loaded set, so downstream code
//! never sees an out-of-set label.
//!
//! The taxonomy is immutable after load and safe to share across tasks.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A canonical, validated label at some granularity (nationality, region, or
/// continent). Construction goes through [`Taxonomy`] / [`LabelSpace`]
/// normalization, which guarantees set membership.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(String);

impl Label {
    pub(crate) fn new_unchecked(canonical: impl Into<String>) -> Self {
        Label(canonical.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Label {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Prediction granularity: which label universe the pipeline runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Nationality,
    Region14,
    Continent6,
}

impl Granularity {
    /// Singular attribute noun as it appears mid-sentence in prompts.
    pub fn noun(self) -> &'static str {
        match self {
            Granularity::Nationality => "nationality",
            Granularity::Region14 => "region",
            Granularity::Continent6 => "continent",
        }
    }

    /// Plural attribute noun.
    pub fn noun_plural(self) -> &'static str {
        match self {
            Granularity::Nationality => "nationalities",
            Granularity::Region14 => "regions",
            Granularity::Continent6 => "continents",
        }
    }

    /// Capitalized singular, used in the structured-output field example.
    pub fn noun_title(self) -> &'static str {
        match self {
            Granularity::Nationality => "Nationality",
            Granularity::Region14 => "Region",
            Granularity::Continent6 => "Continent",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.noun())
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("failed to read taxonomy file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("taxonomy file is missing the `nationality\tregion\tcontinent` header row")]
    MissingHeader,
    #[error("taxonomy line {line}: expected 3 tab-separated fields, got {got}")]
    BadRow { line: usize, got: usize },
    #[error("taxonomy line {line}: empty field")]
    EmptyField { line: usize },
    #[error("duplicate nationality label {label:?} (labels are unique case-insensitively)")]
    DuplicateLabel { label: String },
    #[error("nationality {label:?} is mapped to two regions: {first:?} and {second:?}")]
    ConflictingRegion {
        label: String,
        first: String,
        second: String,
    },
    #[error("region {region:?} is mapped to two continents: {first:?} and {second:?}")]
    ConflictingContinent {
        region: String,
        first: String,
        second: String,
    },
    #[error("count mismatch: expected {expected} {what}, found {actual}")]
    CountMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },
    #[error("bad expect directive on line {line}: {text:?}")]
    BadDirective { line: usize, text: String },
    #[error("taxonomy is empty")]
    Empty,
}

/// Counts declared in the file via `# expect:` / `# expect-region:` comments.
#[derive(Debug, Default, Clone)]
struct DeclaredCounts {
    nationalities: Option<usize>,
    regions: Option<usize>,
    continents: Option<usize>,
    per_region: Vec<(String, usize)>,
}

/// The loaded label hierarchy. Immutable; share behind an `Arc`.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    nationalities: Vec<Label>,
    regions: Vec<Label>,
    continents: Vec<Label>,
    region_of: HashMap<Label, Label>,
    continent_of: HashMap<Label, Label>,
    lower_nat: HashMap<String, usize>,
}

impl Taxonomy {
    /// Load a taxonomy from a tab-separated file (`nationality\tregion\tcontinent`,
    /// header row required, `#` comment lines allowed). Declared `expect`
    /// counts are enforced.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parse taxonomy file contents. See [`Taxonomy::load`].
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut declared = DeclaredCounts::default();
        let mut rows: Vec<(String, String, String)> = Vec::new();
        let mut saw_header = false;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                parse_directive(comment.trim(), line_no, &mut declared)?;
                continue;
            }
            if !saw_header {
                let header: Vec<&str> = line.split('\t').map(str::trim).collect();
                if header != ["nationality", "region", "continent"] {
                    return Err(TaxonomyError::MissingHeader);
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(TaxonomyError::BadRow {
                    line: line_no,
                    got: fields.len(),
                });
            }
            let (n, r, c) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
            if n.is_empty() || r.is_empty() || c.is_empty() {
                return Err(TaxonomyError::EmptyField { line: line_no });
            }
            rows.push((n.to_string(), r.to_string(), c.to_string()));
        }

        if !saw_header {
            return Err(TaxonomyError::MissingHeader);
        }
        let taxonomy = Self::from_rows(
            rows.iter()
                .map(|(n, r, c)| (n.as_str(), r.as_str(), c.as_str())),
        )?;
        taxonomy.check_declared(&declared)?;
        Ok(taxonomy)
    }

    /// Build a taxonomy from explicit rows. Used by the loader and by tests
    /// that need miniature label sets.
    pub fn from_rows<'a>(
        rows: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    ) -> Result<Self, TaxonomyError> {
        let mut nationalities: Vec<Label> = Vec::new();
        let mut regions: Vec<Label> = Vec::new();
        let mut continents: Vec<Label> = Vec::new();
        let mut region_of: HashMap<Label, Label> = HashMap::new();
        let mut continent_of: HashMap<Label, Label> = HashMap::new();
        let mut lower_nat: HashMap<String, usize> = HashMap::new();
        let mut lower_reg: HashMap<String, String> = HashMap::new();
        let mut lower_cont: HashMap<String, String> = HashMap::new();

        for (n, r, c) in rows {
            let nat = Label::new_unchecked(n);
            let lower = n.to_lowercase();
            if let Some(&prev) = lower_nat.get(&lower) {
                let prev_region = &region_of[&nationalities[prev]];
                if prev_region.as_str() != r {
                    return Err(TaxonomyError::ConflictingRegion {
                        label: n.to_string(),
                        first: prev_region.as_str().to_string(),
                        second: r.to_string(),
                    });
                }
                return Err(TaxonomyError::DuplicateLabel {
                    label: n.to_string(),
                });
            }

            let region_canon = lower_reg
                .entry(r.to_lowercase())
                .or_insert_with(|| r.to_string())
                .clone();
            let region = Label::new_unchecked(region_canon);
            if !regions.contains(&region) {
                regions.push(region.clone());
            }

            let cont_canon = lower_cont
                .entry(c.to_lowercase())
                .or_insert_with(|| c.to_string())
                .clone();
            let continent = Label::new_unchecked(cont_canon);
            match continent_of.get(&region) {
                Some(existing) if existing != &continent => {
                    return Err(TaxonomyError::ConflictingContinent {
                        region: region.as_str().to_string(),
                        first: existing.as_str().to_string(),
                        second: continent.as_str().to_string(),
                    });
                }
                Some(_) => {}
                None => {
                    continent_of.insert(region.clone(), continent.clone());
                }
            }
            if !continents.contains(&continent) {
                continents.push(continent);
            }

            lower_nat.insert(lower, nationalities.len());
            region_of.insert(nat.clone(), region);
            nationalities.push(nat);
        }

        if nationalities.is_empty() {
            return Err(TaxonomyError::Empty);
        }

        Ok(Taxonomy {
            nationalities,
            regions,
            continents,
            region_of,
            continent_of,
            lower_nat,
        })
    }

    fn check_declared(&self, declared: &DeclaredCounts) -> Result<(), TaxonomyError> {
        let checks = [
            (
                "nationalities",
                declared.nationalities,
                self.nationalities.len(),
            ),
            ("regions", declared.regions, self.regions.len()),
            ("continents", declared.continents, self.continents.len()),
        ];
        for (what, expected, actual) in checks {
            if let Some(expected) = expected {
                if expected != actual {
                    return Err(TaxonomyError::CountMismatch {
                        what: what.to_string(),
                        expected,
                        actual,
                    });
                }
            }
        }
        for (region, expected) in &declared.per_region {
            let actual = self.region_count(region);
            if actual != *expected {
                return Err(TaxonomyError::CountMismatch {
                    what: format!("nationalities in region {region:?}"),
                    expected: *expected,
                    actual,
                });
            }
        }
        Ok(())
    }

    /// Canonical nationality labels in file order.
    pub fn nationalities(&self) -> &[Label] {
        &self.nationalities
    }

    /// Region labels in order of first appearance.
    pub fn regions(&self) -> &[Label] {
        &self.regions
    }

    /// Continent labels in order of first appearance.
    pub fn continents(&self) -> &[Label] {
        &self.continents
    }

    /// Case-insensitive, whitespace-trimmed match against the nationality set.
    /// Absence is a value, not an error.
    pub fn normalize_nationality(&self, raw: &str) -> Option<Label> {
        self.lower_nat
            .get(&raw.trim().to_lowercase())
            .map(|&idx| self.nationalities[idx].clone())
    }

    /// Region of a nationality. Total over the loaded set; `None` only when
    /// the label is not a nationality of this taxonomy.
    pub fn region_of(&self, nationality: &Label) -> Option<&Label> {
        self.region_of.get(nationality)
    }

    /// Continent of a region.
    pub fn continent_of_region(&self, region: &Label) -> Option<&Label> {
        self.continent_of.get(region)
    }

    /// Continent of a nationality (composition of the two mappings).
    pub fn continent_of(&self, nationality: &Label) -> Option<&Label> {
        self.region_of(nationality)
            .and_then(|r| self.continent_of_region(r))
    }

    /// Number of nationalities mapped to `region` (case-insensitive).
    pub fn region_count(&self, region: &str) -> usize {
        let want = region.to_lowercase();
        self.region_of
            .values()
            .filter(|r| r.as_str().to_lowercase() == want)
            .count()
    }

    /// The label universe at a given granularity.
    pub fn label_space(&self, granularity: Granularity) -> LabelSpace {
        let labels = match granularity {
            Granularity::Nationality => self.nationalities.clone(),
            Granularity::Region14 => self.regions.clone(),
            Granularity::Continent6 => self.continents.clone(),
        };
        LabelSpace::new(granularity, labels)
    }
}

fn parse_directive(
    comment: &str,
    line: usize,
    declared: &mut DeclaredCounts,
) -> Result<(), TaxonomyError> {
    if let Some(rest) = comment.strip_prefix("expect:") {
        for pair in rest.split_whitespace() {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| TaxonomyError::BadDirective {
                    line,
                    text: comment.to_string(),
                })?;
            let value: usize = value.parse().map_err(|_| TaxonomyError::BadDirective {
                line,
                text: comment.to_string(),
            })?;
            match key {
                "nationalities" => declared.nationalities = Some(value),
                "regions" => declared.regions = Some(value),
                "continents" => declared.continents = Some(value),
                _ => {
                    return Err(TaxonomyError::BadDirective {
                        line,
                        text: comment.to_string(),
                    })
                }
            }
        }
    } else if let Some(rest) = comment.strip_prefix("expect-region:") {
        let (region, count) = rest
            .rsplit_once('=')
            .ok_or_else(|| TaxonomyError::BadDirective {
                line,
                text: comment.to_string(),
            })?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| TaxonomyError::BadDirective {
                line,
                text: comment.to_string(),
            })?;
        declared.per_region.push((region.trim().to_string(), count));
    }
    Ok(())
}

/// The active label universe for one pipeline run: the 99 nationalities, the
/// 14 regions, or the 6 continents, with case-insensitive normalization.
#[derive(Debug, Clone)]
pub struct LabelSpace {
    granularity: Granularity,
    labels: Vec<Label>,
    lower: HashMap<String, usize>,
}

impl LabelSpace {
    fn new(granularity: Granularity, labels: Vec<Label>) -> Self {
        let lower = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str().to_lowercase(), i))
            .collect();
        LabelSpace {
            granularity,
            labels,
            lower,
        }
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.lower.contains_key(&label.as_str().to_lowercase())
    }

    /// Trim surrounding whitespace and match case-insensitively against the
    /// canonical labels. Returns the canonical form, or `None` if out of set.
    pub fn normalize(&self, raw: &str) -> Option<Label> {
        self.lower
            .get(&raw.trim().to_lowercase())
            .map(|&idx| self.labels[idx].clone())
    }

    /// The comma-separated label list substituted into prompts.
    pub fn prompt_label_list(&self) -> String {
        let names: Vec<&str> = self.labels.iter().map(Label::as_str).collect();
        names.join(", ")
    }
}
