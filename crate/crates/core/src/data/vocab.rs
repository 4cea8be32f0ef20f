use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::Encoding;

/// Dense token numbering. Ids run over `0..len()` in lexicographic token
/// order; the CTC blank takes id `len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    encoding: Encoding,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build<'a, I, S>(token_lists: I, encoding: Encoding) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let set: BTreeSet<&str> = token_lists
            .into_iter()
            .flat_map(|l| l.iter().map(|s| s.as_ref()))
            .collect();
        Self::from_tokens(set.into_iter().map(String::from).collect(), encoding)
    }

    fn from_tokens(tokens: Vec<String>, encoding: Encoding) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            encoding,
            tokens,
            index,
        }
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn blank_id(&self) -> usize {
        self.tokens.len()
    }

    /// Output classes including the blank.
    pub fn num_classes(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).ok_or_else(|| Error::UnknownToken(t.as_ref().to_string())))
            .collect()
    }

    /// Maps ids back to tokens; ids outside the vocabulary are dropped.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().filter_map(|&i| self.token(i).map(String::from)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str, encoding: Encoding) -> Result<Self> {
        let tokens: Vec<String> = text.lines().filter(|l| !l.is_empty()).map(String::from).collect();
        Self::from_list(tokens, encoding)
    }

    /// Builds from an explicit id-ordered token list.
    pub fn from_list(tokens: Vec<String>, encoding: Encoding) -> Result<Self> {
        let vocab = Self::from_tokens(tokens, encoding);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::Config("vocabulary contains duplicate tokens".into()));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, encoding: Encoding) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, encoding)
    }
}
