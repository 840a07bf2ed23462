use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{Corpus, CorpusError, MarkerScheme, REInstance, Role, Span, Token};

/// Input formats understood by [`ingest`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    /// CoNLL-U subset with `# id`, `# relation`, `# subj` and `# obj`
    /// comments and five columns: ID, FORM, UPOS, HEAD, DEPREL.
    #[default]
    ConlluPlus,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conllu-plus" | "conllu" => Ok(Format::ConlluPlus),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    /// When set, relations outside this vocabulary are rejected.
    pub closed_relations: Option<BTreeSet<String>>,
    pub markers: MarkerScheme,
}

/// Reads and validates a corpus file.
pub fn ingest(path: &Path, format: Format, opts: &IngestOptions) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_str(&text, format, opts)
}

pub fn ingest_str(text: &str, format: Format, opts: &IngestOptions) -> Result<Corpus, CorpusError> {
    match format {
        Format::ConlluPlus => {}
    }
    opts.markers.validate().map_err(CorpusError::Scheme)?;

    let mut instances = Vec::new();
    let mut block = Block::default();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !block.is_empty() {
                instances.push(std::mem::take(&mut block).finish(opts)?);
            }
            continue;
        }
        if block.is_empty() {
            block.start_line = lineno;
        }
        if let Some(comment) = line.strip_prefix('#') {
            block.comment(comment, lineno)?;
        } else {
            block.token(line, lineno, &opts.markers)?;
        }
    }
    if !block.is_empty() {
        instances.push(block.finish(opts)?);
    }
    Corpus::new(instances)
}

#[derive(Default)]
struct Block {
    start_line: usize,
    id: Option<String>,
    relation: Option<String>,
    subj: Option<(usize, usize)>,
    obj: Option<(usize, usize)>,
    tokens: Vec<Token>,
    seen_comment: bool,
}

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_range(value: &str, line: usize) -> Result<(usize, usize), CorpusError> {
    let (a, b) = value
        .split_once('-')
        .ok_or_else(|| parse_err(line, format!("span `{value}` is not of the form <start>-<end>")))?;
    let a = a
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid span start in `{value}`")))?;
    let b = b
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid span end in `{value}`")))?;
    Ok((a, b))
}

impl Block {
    fn is_empty(&self) -> bool {
        !self.seen_comment && self.tokens.is_empty()
    }

    fn comment(&mut self, comment: &str, line: usize) -> Result<(), CorpusError> {
        self.seen_comment = true;
        let Some((key, value)) = comment.split_once('=') else {
            return Ok(());
        };
        let value = value.trim();
        let key = key.trim();
        let taken = match key {
            "id" => self.id.replace(value.to_string()).is_some(),
            "relation" => {
                if value.is_empty() {
                    return Err(parse_err(line, "empty relation label"));
                }
                self.relation.replace(value.to_string()).is_some()
            }
            "subj" => self.subj.replace(parse_range(value, line)?).is_some(),
            "obj" => self.obj.replace(parse_range(value, line)?).is_some(),
            _ => false,
        };
        if taken {
            return Err(parse_err(line, format!("duplicate `# {key}` comment")));
        }
        Ok(())
    }

    fn token(&mut self, line_text: &str, line: usize, markers: &MarkerScheme) -> Result<(), CorpusError> {
        let cols: Vec<&str> = line_text.split('\t').collect();
        if cols.len() != 5 {
            return Err(parse_err(
                line,
                format!("expected 5 tab-separated columns, found {}", cols.len()),
            ));
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid token id `{}`", cols[0])))?;
        if index != self.tokens.len() + 1 {
            return Err(parse_err(
                line,
                format!(
                    "token id {index} out of sequence (expected {})",
                    self.tokens.len() + 1
                ),
            ));
        }
        let form = cols[1];
        if form.is_empty() || form.chars().any(char::is_whitespace) {
            return Err(parse_err(line, "token form is empty or contains whitespace"));
        }
        if markers.is_marker(form) {
            return Err(parse_err(
                line,
                format!("token form `{form}` collides with a reserved marker"),
            ));
        }
        let upos = match cols[2] {
            "_" => None,
            "" => return Err(parse_err(line, "empty UPOS column")),
            u => Some(u.to_string()),
        };
        if cols[3] == "_" || cols[4] == "_" {
            return Err(parse_err(
                line,
                "missing dependency parse (`_` in HEAD or DEPREL)",
            ));
        }
        let head: usize = cols[3]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid head `{}`", cols[3])))?;
        if cols[4].is_empty() {
            return Err(parse_err(line, "empty DEPREL column"));
        }
        self.tokens.push(Token {
            index,
            form: form.to_string(),
            head,
            deprel: cols[4].to_string(),
            upos,
        });
        Ok(())
    }

    fn finish(self, opts: &IngestOptions) -> Result<REInstance, CorpusError> {
        let line = self.start_line;
        let missing = |name: &str| parse_err(line, format!("sentence block lacks `# {name} = ...`"));
        let id = self.id.ok_or_else(|| missing("id"))?;
        let relation = self.relation.ok_or_else(|| missing("relation"))?;
        let (ss, se) = self.subj.ok_or_else(|| missing("subj"))?;
        let (os, oe) = self.obj.ok_or_else(|| missing("obj"))?;
        if self.tokens.is_empty() {
            return Err(parse_err(line, format!("sentence `{id}` has no token lines")));
        }
        if let Some(vocab) = &opts.closed_relations {
            if !vocab.contains(&relation) {
                return Err(CorpusError::UnknownRelation { id, relation });
            }
        }
        let inst = REInstance {
            id,
            tokens: self.tokens,
            subject: Span::new(ss, se, Role::Subject),
            object: Span::new(os, oe, Role::Object),
            relation,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// Renders one instance as a CoNLL-U-plus block, including the trailing blank line.
pub fn write_instance(inst: &REInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# id = {}", inst.id);
    let _ = writeln!(out, "# relation = {}", inst.relation);
    let _ = writeln!(out, "# subj = {}", inst.subject);
    let _ = writeln!(out, "# obj = {}", inst.object);
    for t in &inst.tokens {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            t.index,
            t.form,
            t.upos.as_deref().unwrap_or("_"),
            t.head,
            t.deprel
        );
    }
    out.push('\n');
    out
}

pub fn write_instances<'a>(instances: impl IntoIterator<Item = &'a REInstance>) -> String {
    instances.into_iter().map(write_instance).collect()
}
