use std::fmt::Write as _;

use super::{AugmentedInstance, Provenance, RejectReport};
use crate::corpus::{CorpusError, Role, Span};

/// CoNLL-U-plus rendering of generated sentences. HEAD and DEPREL are `_`
/// because generators emit no parse.
pub fn write_augmented(instances: &[AugmentedInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        let p = &inst.provenance;
        let _ = writeln!(out, "# id = {}", inst.id);
        let _ = writeln!(out, "# relation = {}", inst.relation);
        let _ = writeln!(out, "# subj = {}", inst.subject);
        let _ = writeln!(out, "# obj = {}", inst.object);
        let _ = writeln!(out, "# provenance = {}|{}|{}", p.source_id, p.hint, p.backend);
        for (i, form) in inst.tokens.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t_\t_\t_", i + 1, form);
        }
        out.push('\n');
    }
    out
}

/// One JSON object per rejected request.
pub fn write_rejects(report: &RejectReport) -> String {
    let mut out = String::new();
    for r in &report.rejections {
        out.push_str(&serde_json::to_string(r).expect("rejections serialize"));
        out.push('\n');
    }
    out
}

fn err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct Pending {
    start: usize,
    fields: [Option<String>; 5],
    tokens: Vec<String>,
}

const KEYS: [&str; 5] = ["id", "relation", "subj", "obj", "provenance"];

fn span(value: &str, role: Role, line: usize) -> Result<Span, CorpusError> {
    let (a, b) = value
        .split_once('-')
        .ok_or_else(|| err(line, format!("bad span `{value}`")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| err(line, format!("bad span `{value}`")))
    };
    Ok(Span::new(parse(a)?, parse(b)?, role))
}

impl Pending {
    fn finish(self) -> Result<AugmentedInstance, CorpusError> {
        let line = self.start;
        let [id, relation, subj, obj, prov] = self.fields;
        let need =
            |v: Option<String>, k: &str| v.ok_or_else(|| err(line, format!("block lacks `# {k} = ...`")));
        let id = need(id, "id")?;
        let relation = need(relation, "relation")?;
        let subject = span(&need(subj, "subj")?, Role::Subject, line)?;
        let object = span(&need(obj, "obj")?, Role::Object, line)?;
        let prov = need(prov, "provenance")?;
        let (source_id, rest) = prov
            .split_once('|')
            .ok_or_else(|| err(line, "provenance must be <source>|<hint>|<backend>"))?;
        let (hint, backend) = rest
            .rsplit_once('|')
            .ok_or_else(|| err(line, "provenance must be <source>|<hint>|<backend>"))?;
        let n = self.tokens.len();
        for s in [subject, object] {
            if s.start < 1 || s.start > s.end || s.end > n {
                return Err(CorpusError::Span {
                    id,
                    message: format!("{:?} span {} out of bounds for {} tokens", s.role, s, n),
                });
            }
        }
        if subject.overlaps(&object) {
            return Err(CorpusError::Span {
                id,
                message: "subject and object overlap".into(),
            });
        }
        Ok(AugmentedInstance {
            id,
            tokens: self.tokens,
            subject,
            object,
            relation,
            provenance: Provenance {
                source_id: source_id.to_string(),
                hint: hint.to_string(),
                backend: backend.to_string(),
            },
        })
    }
}

/// Reads the output of [`write_augmented`].
pub fn read_augmented(text: &str) -> Result<Vec<AugmentedInstance>, CorpusError> {
    let mut out = Vec::new();
    let mut cur: Option<Pending> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            if let Some(p) = cur.take() {
                out.push(p.finish()?);
            }
            continue;
        }
        let p = cur.get_or_insert_with(|| Pending {
            start: lineno,
            ..Pending::default()
        });
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                if let Some(slot) = KEYS.iter().position(|key| *key == k.trim()) {
                    p.fields[slot] = Some(v.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(err(lineno, format!("expected 5 columns, found {}", cols.len())));
        }
        if cols[0].parse::<usize>().ok() != Some(p.tokens.len() + 1) {
            return Err(err(lineno, format!("token id `{}` out of sequence", cols[0])));
        }
        if cols[1].is_empty() {
            return Err(err(lineno, "empty token form"));
        }
        p.tokens.push(cols[1].to_string());
    }
    if let Some(p) = cur {
        out.push(p.finish()?);
    }
    Ok(out)
}
