//! Language identification for the eight supported codes.
//!
//! Seven of the eight languages are uniquely determined by their script, so
//! identification is script detection first. Only Hindi and Marathi share a
//! script (Devanagari); that pair is resolved with ranked character-trigram
//! profiles compared by the Cavnar-Trenkle out-of-place distance.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

/// Top-R trigrams kept per profile.
pub const PROFILE_SIZE: usize = 300;

/// The supported language codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LangCode {
    Bn,
    Hi,
    Mr,
    Gu,
    Kn,
    Te,
    Ta,
    En,
}

/// Language family groups used to gate tweet-tweet edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    IndoAryan,
    Dravidian,
    English,
}

impl LangCode {
    /// All codes in canonical order.
    pub const ALL: [LangCode; 8] = [
        LangCode::Bn,
        LangCode::Hi,
        LangCode::Mr,
        LangCode::Gu,
        LangCode::Kn,
        LangCode::Te,
        LangCode::Ta,
        LangCode::En,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LangCode::Bn => "bn",
            LangCode::Hi => "hi",
            LangCode::Mr => "mr",
            LangCode::Gu => "gu",
            LangCode::Kn => "kn",
            LangCode::Te => "te",
            LangCode::Ta => "ta",
            LangCode::En => "en",
        }
    }

    pub fn parse(s: &str) -> Result<LangCode> {
        match s {
            "bn" => Ok(LangCode::Bn),
            "hi" => Ok(LangCode::Hi),
            "mr" => Ok(LangCode::Mr),
            "gu" => Ok(LangCode::Gu),
            "kn" => Ok(LangCode::Kn),
            "te" => Ok(LangCode::Te),
            "ta" => Ok(LangCode::Ta),
            "en" => Ok(LangCode::En),
            other => Err(Error::data(format!("unsupported language code: {other:?}"))),
        }
    }

    pub fn family(&self) -> Family {
        family_of(*self)
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Family group of a language code. Total over the enumeration.
pub fn family_of(lang: LangCode) -> Family {
    match lang {
        LangCode::Bn | LangCode::Hi | LangCode::Mr | LangCode::Gu => Family::IndoAryan,
        LangCode::Kn | LangCode::Te | LangCode::Ta => Family::Dravidian,
        LangCode::En => Family::English,
    }
}

/// Unicode blocks that decide scripts, in tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Script {
    Bengali,
    Devanagari,
    Gujarati,
    Kannada,
    Telugu,
    Tamil,
    Latin,
}

impl Script {
    pub const ALL: [Script; 7] = [
        Script::Bengali,
        Script::Devanagari,
        Script::Gujarati,
        Script::Kannada,
        Script::Telugu,
        Script::Tamil,
        Script::Latin,
    ];

    fn contains(&self, c: char) -> bool {
        let u = c as u32;
        match self {
            Script::Bengali => (0x0980..=0x09FF).contains(&u),
            Script::Devanagari => (0x0900..=0x097F).contains(&u),
            Script::Gujarati => (0x0A80..=0x0AFF).contains(&u),
            Script::Kannada => (0x0C80..=0x0CFF).contains(&u),
            Script::Telugu => (0x0C00..=0x0C7F).contains(&u),
            Script::Tamil => (0x0B80..=0x0BFF).contains(&u),
            Script::Latin => c.is_ascii_alphabetic(),
        }
    }
}

/// Per-script character counts for one text.
#[derive(Clone, Debug, Default)]
pub struct ScriptHistogram {
    counts: [usize; 7],
}

impl ScriptHistogram {
    pub fn count(&self, script: Script) -> usize {
        self.counts[Script::ALL.iter().position(|s| *s == script).unwrap()]
    }

    /// Script with the highest count; ties break in [`Script::ALL`] order.
    /// None when no character fell in any known block.
    pub fn dominant(&self) -> Option<Script> {
        let (best, &n) = self
            .counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        if n == 0 {
            None
        } else {
            Some(Script::ALL[best])
        }
    }
}

/// Count characters per script block.
pub fn detect_script(text: &str) -> ScriptHistogram {
    let mut hist = ScriptHistogram::default();
    for c in text.chars() {
        for (i, script) in Script::ALL.iter().enumerate() {
            if script.contains(c) {
                hist.counts[i] += 1;
                break;
            }
        }
    }
    hist
}

/// Ranked table of the most frequent character trigrams of one language,
/// built only from labeled training text of that language.
#[derive(Clone, Debug)]
pub struct NGramProfile {
    pub lang: LangCode,
    /// trigram -> rank, starting at 1, unique per trigram.
    ranks: HashMap<String, usize>,
}

impl NGramProfile {
    /// Build a profile from labeled text, keeping the top `limit` trigrams.
    pub fn from_text(lang: LangCode, text: &str, limit: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for tri in trigrams(text) {
            *counts.entry(tri).or_insert(0) += 1;
        }
        let mut ordered: Vec<(String, usize)> = counts.into_iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ordered.truncate(limit);
        let ranks = ordered
            .into_iter()
            .enumerate()
            .map(|(i, (tri, _))| (tri, i + 1))
            .collect();
        NGramProfile { lang, ranks }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn rank(&self, trigram: &str) -> Option<usize> {
        self.ranks.get(trigram).copied()
    }

    /// Entries as (trigram, rank) sorted by rank.
    pub fn entries(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = self.ranks.iter().map(|(t, r)| (t.clone(), *r)).collect();
        out.sort_by_key(|(_, r)| *r);
        out
    }

    /// Cavnar-Trenkle out-of-place distance from a query text to this
    /// profile. Absent trigrams cost the maximum penalty.
    pub fn distance(&self, text: &str) -> usize {
        let query = NGramProfile::from_text(self.lang, text, PROFILE_SIZE);
        let penalty = PROFILE_SIZE;
        let mut total = 0usize;
        for (tri, qrank) in query.entries() {
            total += match self.rank(&tri) {
                Some(r) => r.abs_diff(qrank),
                None => penalty,
            };
        }
        total
    }
}

/// Normalize text for trigram extraction: lowercase, letters and single
/// spaces only.
fn profile_normalize(text: &str) -> Vec<char> {
    let lowered = text.to_lowercase();
    let kept: String = lowered
        .chars()
        .map(|c| if c.is_alphabetic() { c } else { ' ' })
        .collect();
    let joined = kept.split_whitespace().collect::<Vec<_>>().join(" ");
    joined.chars().collect()
}

fn trigrams(text: &str) -> Vec<String> {
    let chars = profile_normalize(text);
    if chars.len() < 3 {
        return Vec::new();
    }
    (0..chars.len() - 2)
        .map(|i| chars[i..i + 3].iter().collect())
        .collect()
}

/// Identifies languages from text. Holds the trigram profiles needed to
/// split the one ambiguous script pair (hi/mr).
#[derive(Clone, Debug)]
pub struct LangIdentifier {
    hi: NGramProfile,
    mr: NGramProfile,
}

impl LangIdentifier {
    /// Identifier backed by the built-in seed corpora.
    pub fn builtin() -> Self {
        LangIdentifier {
            hi: NGramProfile::from_text(LangCode::Hi, HI_SEED, PROFILE_SIZE),
            mr: NGramProfile::from_text(LangCode::Mr, MR_SEED, PROFILE_SIZE),
        }
    }

    /// Identifier from explicit profiles. Requires hi and mr.
    pub fn from_profiles(profiles: Vec<NGramProfile>) -> Result<Self> {
        let mut hi = None;
        let mut mr = None;
        for p in profiles {
            match p.lang {
                LangCode::Hi => hi = Some(p),
                LangCode::Mr => mr = Some(p),
                _ => {}
            }
        }
        match (hi, mr) {
            (Some(hi), Some(mr)) => Ok(LangIdentifier { hi, mr }),
            _ => Err(Error::config(
                "language profiles must include both hi and mr",
            )),
        }
    }

    /// Load profiles from a CSV of lang,trigram,rank rows.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut tables: HashMap<LangCode, HashMap<String, usize>> = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() || (lineno == 0 && line.starts_with("lang,")) {
                continue;
            }
            let (lang_str, rest) = line
                .split_once(',')
                .ok_or_else(|| Error::data(format!("profile line {}: no comma", lineno + 1)))?;
            let (tri, rank_str) = rest
                .rsplit_once(',')
                .ok_or_else(|| Error::data(format!("profile line {}: no rank", lineno + 1)))?;
            let lang = LangCode::parse(lang_str)?;
            let rank: usize = rank_str
                .parse()
                .map_err(|_| Error::data(format!("profile line {}: bad rank", lineno + 1)))?;
            let table = tables.entry(lang).or_default();
            if table.insert(tri.to_string(), rank).is_some() {
                return Err(Error::data(format!(
                    "profile line {}: duplicate trigram for {lang}",
                    lineno + 1
                )));
            }
        }
        let profiles = tables
            .into_iter()
            .map(|(lang, ranks)| NGramProfile { lang, ranks })
            .collect();
        LangIdentifier::from_profiles(profiles)
    }

    /// Write the held profiles as CSV.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "lang,trigram,rank")?;
        for profile in [&self.hi, &self.mr] {
            for (tri, rank) in profile.entries() {
                writeln!(w, "{},{},{}", profile.lang, tri, rank)?;
            }
        }
        Ok(())
    }

    /// Identify the language of `text`.
    ///
    /// Unique scripts map directly to their code; Devanagari resolves by
    /// trigram distance against the hi and mr profiles (ties go to hi).
    pub fn identify(&self, text: &str) -> Result<LangCode> {
        let script = detect_script(text)
            .dominant()
            .ok_or_else(|| Error::UnknownLanguage(preview(text)))?;
        Ok(match script {
            Script::Bengali => LangCode::Bn,
            Script::Gujarati => LangCode::Gu,
            Script::Kannada => LangCode::Kn,
            Script::Telugu => LangCode::Te,
            Script::Tamil => LangCode::Ta,
            Script::Latin => LangCode::En,
            Script::Devanagari => {
                let d_hi = self.hi.distance(text);
                let d_mr = self.mr.distance(text);
                if d_mr < d_hi {
                    LangCode::Mr
                } else {
                    LangCode::Hi
                }
            }
        })
    }
}

fn preview(text: &str) -> String {
    text.chars().take(32).collect()
}

/// Hindi seed sentences for the built-in trigram profile.
pub const HI_SEED: &str = "\
यह एक अच्छा दिन है और हम सब बहुत खुश हैं
मैं कल सुबह बाजार जाऊँगा क्योंकि मुझे सब्जी खरीदनी है
आप कैसे हैं और आपका परिवार कैसा है
हिंदी भारत में सबसे अधिक बोली जाने वाली भाषा है
क्या तुम मेरे साथ खाना खाने चलोगे
उसने कहा कि वह समय पर नहीं आ सकता है
बच्चे स्कूल में पढ़ते हैं और शाम को खेलते हैं
मुझे यह किताब बहुत पसंद है और मैं इसे फिर पढ़ूँगा
हम अगले हफ्ते अपने दोस्तों के साथ दिल्ली जाने वाले हैं
बारिश हो रही है इसलिए छाता लेकर जाओ
भारत की राजधानी नई दिल्ली है और यह बहुत बड़ा शहर है
मेरा नाम राहुल है और मैं एक विद्यार्थी हूँ
यह काम करना बहुत कठिन नहीं है लेकिन समय लगता है
सुबह जल्दी उठकर व्यायाम करना चाहिए
वे लोग कल शाम हमारे घर आने वाले थे
तुम्हारी बात सुनकर मुझे बहुत अच्छा लगा
";

/// Marathi seed sentences for the built-in trigram profile.
pub const MR_SEED: &str = "\
हा एक चांगला दिवस आहे आणि आम्ही सगळे खूप आनंदी आहोत
मी उद्या सकाळी बाजारात जाणार आहे कारण मला भाजी घ्यायची आहे
तुम्ही कसे आहात आणि तुमचे कुटुंब कसे आहे
मराठी महाराष्ट्रात बोलली जाणारी भाषा आहे
तू माझ्याबरोबर जेवायला येशील का
त्याने सांगितले की तो वेळेवर येऊ शकत नाही
मुले शाळेत शिकतात आणि संध्याकाळी खेळतात
मला हे पुस्तक खूप आवडते आणि मी ते पुन्हा वाचणार आहे
आम्ही पुढच्या आठवड्यात आमच्या मित्रांबरोबर मुंबईला जाणार आहोत
पाऊस पडतो आहे म्हणून छत्री घेऊन जा
महाराष्ट्राची राजधानी मुंबई आहे आणि ते खूप मोठे शहर आहे
माझे नाव राहुल आहे आणि मी एक विद्यार्थी आहे
हे काम करणे फार कठीण नाही पण वेळ लागतो
सकाळी लवकर उठून व्यायाम केला पाहिजे
ती माणसे काल संध्याकाळी आमच्या घरी येणार होती
तुझे बोलणे ऐकून मला खूप बरे वाटले
";
