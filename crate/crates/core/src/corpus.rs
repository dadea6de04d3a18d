//! Corpus ingestion: raw post loading, the preprocessing pipeline,
//! vocabularies, splits, and dataset statistics.

use crate::error::{Error, Result};
use crate::langid::{LangCode, LangIdentifier};
use crate::rng::{fnv1a64, shuffle};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

/// A post as found in a corpus file, before any cleaning.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    pub user_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hashtags: Vec<String>,
}

/// A preprocessed post ready for the model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CleanPost {
    pub id: String,
    pub user_index: usize,
    pub token_text: String,
    pub lang: LangCode,
    /// Nonempty set of hashtag vocabulary indices.
    pub tag_indices: BTreeSet<usize>,
}

/// Bidirectional string <-> dense index map.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    to_index: HashMap<String, usize>,
    strings: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> usize {
        if let Some(&i) = self.to_index.get(s) {
            return i;
        }
        let i = self.strings.len();
        self.strings.push(s.to_string());
        self.to_index.insert(s.to_string(), i);
        i
    }

    pub fn lookup(&self, s: &str) -> Option<usize> {
        self.to_index.get(s).copied()
    }

    pub fn string(&self, i: usize) -> &str {
        &self.strings[i]
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn strings(&self) -> &[String] {
        &self.strings
    }

    pub fn from_strings(strings: Vec<String>) -> Self {
        let to_index = strings
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Interner { to_index, strings }
    }
}

/// Hashtag, user, and language vocabularies.
#[derive(Clone, Debug)]
pub struct Vocab {
    pub hashtags: Interner,
    pub users: Interner,
    pub languages: Interner,
}

impl Vocab {
    /// Empty hashtag/user vocabularies; the language vocabulary always holds
    /// the eight supported codes in canonical order.
    pub fn new() -> Self {
        let mut languages = Interner::default();
        for code in LangCode::ALL {
            languages.intern(code.as_str());
        }
        Vocab {
            hashtags: Interner::default(),
            users: Interner::default(),
            languages,
        }
    }

    pub fn lang_index(&self, lang: LangCode) -> usize {
        self.languages.lookup(lang.as_str()).unwrap()
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

/// Corpus-level statistics. Averages are exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusStats {
    pub n_posts: usize,
    pub n_users: usize,
    pub n_hashtags: usize,
    pub avg_tags_per_post: Rational,
    pub avg_posts_per_user: Rational,
}

/// Reduced nonnegative fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num.max(1), den);
        let g = if num == 0 { den } else { g };
        Rational {
            num: num / g,
            den: den / g,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Rational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}", self.as_f64())
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Counters reported alongside ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub lines: usize,
    pub malformed_lines: usize,
    pub too_short: usize,
    pub no_tags: usize,
    pub duplicates: usize,
    pub unknown_language: usize,
    pub pruned_by_tag_filter: usize,
}

/// Read one JSON post per line. Malformed lines are skipped and counted.
pub fn load_corpus(path: &Path) -> Result<(Vec<RawPost>, IngestReport)> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("cannot open corpus {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut posts = Vec::new();
    let mut report = IngestReport::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        match serde_json::from_str::<RawPost>(&line) {
            Ok(post) if !post.id.is_empty() && !post.user_id.is_empty() => posts.push(post),
            Ok(_) => {
                report.malformed_lines += 1;
                log::warn!("line {}: empty id or user_id, skipped", lineno + 1);
            }
            Err(e) => {
                report.malformed_lines += 1;
                log::warn!("line {}: malformed post skipped: {e}", lineno + 1);
            }
        }
    }
    Ok((posts, report))
}

fn starts_ignore_ascii_case(haystack: &[u8], pattern: &[u8]) -> bool {
    haystack.len() >= pattern.len() && haystack[..pattern.len()].eq_ignore_ascii_case(pattern)
}

/// Strip URL substrings: from any occurrence of http://, https:// or www.
/// up to the next whitespace.
fn strip_urls(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let rest = &bytes[i..];
        if starts_ignore_ascii_case(rest, b"http://")
            || starts_ignore_ascii_case(rest, b"https://")
            || starts_ignore_ascii_case(rest, b"www.")
        {
            while let Some(&(_, next)) = iter.peek() {
                if next.is_whitespace() {
                    break;
                }
                iter.next();
            }
            continue;
        }
        out.push(c);
    }
    out
}

/// Extract `#tag` tokens, returning (text without them, lowercased tags with
/// the marker stripped).
fn extract_hashtags(text: &str) -> (String, Vec<String>) {
    let mut tags = Vec::new();
    let mut rest = Vec::new();
    for token in text.split_whitespace() {
        if let Some(tag) = token.strip_prefix('#') {
            if !tag.is_empty() {
                tags.push(tag.to_lowercase());
            }
        } else {
            rest.push(token);
        }
    }
    (rest.join(" "), tags)
}

/// Keep Unicode letters, digits, spaces, and full stops; drop the rest.
fn filter_chars(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphabetic() || c.is_numeric() || *c == ' ' || *c == '.')
        .collect()
}

/// Apply the cleaning pipeline to the text alone: URL removal, hashtag
/// extraction, lowercasing, character filtering, whitespace normalization.
pub fn clean_text(text: &str) -> (String, Vec<String>) {
    let no_urls = strip_urls(text);
    let (without_tags, tags) = extract_hashtags(&no_urls);
    let lowered = without_tags.to_lowercase();
    let filtered = filter_chars(&lowered);
    let normalized = filtered.split_whitespace().collect::<Vec<_>>().join(" ");
    (normalized, tags)
}

/// Why a raw post was rejected by [`preprocess`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    TooShort,
    NoTags,
    Duplicate,
    UnknownLanguage,
}

/// Preprocess one raw post. Returns the cleaned post, or the reason it was
/// dropped. Vocabulary entries are interned only for kept posts.
pub fn preprocess(
    raw: &RawPost,
    vocab: &mut Vocab,
    seen: &mut HashSet<(usize, String)>,
    identifier: &LangIdentifier,
) -> std::result::Result<CleanPost, DropReason> {
    let (token_text, extracted) = clean_text(&raw.text);

    if token_text.split_whitespace().count() < 3 {
        return Err(DropReason::TooShort);
    }

    let mut tags: BTreeSet<String> = BTreeSet::new();
    for tag in extracted {
        tags.insert(tag);
    }
    for tag in &raw.hashtags {
        let t = tag.trim_start_matches('#').to_lowercase();
        if !t.is_empty() {
            tags.insert(t);
        }
    }
    if tags.is_empty() {
        return Err(DropReason::NoTags);
    }

    let lang = match raw.lang.as_deref() {
        Some(code) => LangCode::parse(code).map_err(|_| DropReason::UnknownLanguage)?,
        None => identifier
            .identify(&token_text)
            .map_err(|_| DropReason::UnknownLanguage)?,
    };

    // Duplicate key is (author, cleaned text); dedupe before interning tags
    // so dropped posts leave no vocabulary residue.
    let user_key = match vocab.users.lookup(&raw.user_id) {
        Some(i) => i,
        None => usize::MAX, // unseen user cannot collide
    };
    if user_key != usize::MAX && seen.contains(&(user_key, token_text.clone())) {
        return Err(DropReason::Duplicate);
    }

    let user_index = vocab.users.intern(&raw.user_id);
    seen.insert((user_index, token_text.clone()));
    let tag_indices = tags.iter().map(|t| vocab.hashtags.intern(t)).collect();

    Ok(CleanPost {
        id: raw.id.clone(),
        user_index,
        token_text,
        lang,
        tag_indices,
    })
}

/// A fully ingested corpus.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub posts: Vec<CleanPost>,
    pub vocab: Vocab,
    pub report: IngestReport,
}

/// Run the full pipeline over raw posts: preprocess, dedupe, then apply the
/// hashtag frequency filter / cap and reindex densely.
pub fn ingest(
    raw_posts: &[RawPost],
    identifier: &LangIdentifier,
    min_tag_freq: usize,
    hashtag_cap: usize,
    mut report: IngestReport,
) -> Result<Corpus> {
    let mut vocab = Vocab::new();
    let mut seen = HashSet::new();
    let mut posts = Vec::new();
    for raw in raw_posts {
        match preprocess(raw, &mut vocab, &mut seen, identifier) {
            Ok(post) => posts.push(post),
            Err(DropReason::TooShort) => report.too_short += 1,
            Err(DropReason::NoTags) => report.no_tags += 1,
            Err(DropReason::Duplicate) => report.duplicates += 1,
            Err(DropReason::UnknownLanguage) => {
                report.unknown_language += 1;
                log::debug!("post {}: language unidentified, dropped", raw.id);
            }
        }
    }

    if min_tag_freq > 1 || hashtag_cap > 0 {
        prune_tags(&mut posts, &mut vocab, min_tag_freq, hashtag_cap, &mut report);
    }

    Ok(Corpus {
        posts,
        vocab,
        report,
    })
}

/// Drop hashtags below the frequency floor (and beyond the cap, most frequent
/// first), then drop posts left without tags and rebuild dense indices.
fn prune_tags(
    posts: &mut Vec<CleanPost>,
    vocab: &mut Vocab,
    min_tag_freq: usize,
    hashtag_cap: usize,
    report: &mut IngestReport,
) {
    let mut freq = vec![0usize; vocab.hashtags.len()];
    for post in posts.iter() {
        for &t in &post.tag_indices {
            freq[t] += 1;
        }
    }
    let mut keep: Vec<usize> = (0..freq.len())
        .filter(|&t| freq[t] >= min_tag_freq.max(1))
        .collect();
    if hashtag_cap > 0 && keep.len() > hashtag_cap {
        // Most frequent first; ties keep the earlier vocabulary index.
        keep.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(a.cmp(&b)));
        keep.truncate(hashtag_cap);
        keep.sort_unstable();
    }

    let mut remap = vec![usize::MAX; freq.len()];
    let mut strings = Vec::with_capacity(keep.len());
    for (new_idx, &old_idx) in keep.iter().enumerate() {
        remap[old_idx] = new_idx;
        strings.push(vocab.hashtags.string(old_idx).to_string());
    }
    vocab.hashtags = Interner::from_strings(strings);

    posts.retain_mut(|post| {
        let remapped: BTreeSet<usize> = post
            .tag_indices
            .iter()
            .filter_map(|&t| (remap[t] != usize::MAX).then_some(remap[t]))
            .collect();
        if remapped.is_empty() {
            report.pruned_by_tag_filter += 1;
            false
        } else {
            post.tag_indices = remapped;
            true
        }
    });
}

/// Three disjoint post lists.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Vec<CleanPost>,
    pub val: Vec<CleanPost>,
    pub test: Vec<CleanPost>,
}

/// Deterministic split: canonical sort by id, seeded shuffle, floor-sized
/// val/test with the remainder in train.
pub fn split(posts: &[CleanPost], ratios: (f64, f64, f64), seed: u64) -> Result<Splits> {
    let (r_train, r_val, r_test) = ratios;
    if r_train <= 0.0 || r_val <= 0.0 || r_test <= 0.0 {
        return Err(Error::config("split ratios must be positive"));
    }
    if (r_train + r_val + r_test - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split ratios must sum to 1, got {}",
            r_train + r_val + r_test
        )));
    }
    if posts.len() < 3 {
        return Err(Error::data(format!(
            "need at least 3 posts to split, got {}",
            posts.len()
        )));
    }

    let mut ordered: Vec<CleanPost> = posts.to_vec();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    shuffle(&mut ordered, seed);

    let n = ordered.len();
    let n_val = (n as f64 * r_val).floor() as usize;
    let n_test = (n as f64 * r_test).floor() as usize;
    let n_train = n - n_val - n_test;

    let train = ordered[..n_train].to_vec();
    let val = ordered[n_train..n_train + n_val].to_vec();
    let test = ordered[n_train + n_val..].to_vec();
    Ok(Splits { train, val, test })
}

/// Exact corpus statistics.
pub fn stats(posts: &[CleanPost]) -> Result<CorpusStats> {
    if posts.is_empty() {
        return Err(Error::data("stats over an empty corpus"));
    }
    let total_tags: u64 = posts.iter().map(|p| p.tag_indices.len() as u64).sum();
    let mut users = BTreeSet::new();
    let mut tags = BTreeSet::new();
    for post in posts {
        users.insert(post.user_index);
        tags.extend(post.tag_indices.iter().copied());
    }
    Ok(CorpusStats {
        n_posts: posts.len(),
        n_users: users.len(),
        n_hashtags: tags.len(),
        avg_tags_per_post: Rational::new(total_tags, posts.len() as u64),
        avg_posts_per_user: Rational::new(posts.len() as u64, users.len() as u64),
    })
}

impl CorpusStats {
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "metric,value")?;
        writeln!(w, "n_posts,{}", self.n_posts)?;
        writeln!(w, "n_users,{}", self.n_users)?;
        writeln!(w, "n_hashtags,{}", self.n_hashtags)?;
        writeln!(w, "avg_tags_per_post,{}", self.avg_tags_per_post)?;
        writeln!(w, "avg_posts_per_user,{}", self.avg_posts_per_user)?;
        Ok(())
    }
}

/// Digest of a split (post ids in order), for checkpoint verification.
pub fn split_digest(splits: &Splits) -> u64 {
    let mut bytes = Vec::new();
    for (name, part) in [
        ("train", &splits.train),
        ("val", &splits.val),
        ("test", &splits.test),
    ] {
        bytes.extend_from_slice(name.as_bytes());
        for post in part.iter() {
            bytes.extend_from_slice(post.id.as_bytes());
            bytes.push(0);
        }
    }
    fnv1a64(&bytes)
}
