use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AugmentError, GenRequest, GenResponse, DEFAULT_CONCURRENCY};
use crate::corpus::{Corpus, MarkedSentence, MarkerScheme, REInstance, Role, Span};
use crate::pattern::{match_targets, MatchConfig, PatternIndex};
use crate::seed::keyed_rng;

/// A generator that turns requests into marked text.
///
/// Implementations return exactly one entry per request, in order. An `Err`
/// entry is a retryable per-request failure; a batch-level `Err` aborts the run.
pub trait Backend: Sync {
    fn name(&self) -> String;

    fn generate_batch(
        &self,
        requests: &[&GenRequest],
    ) -> Result<Vec<Result<GenResponse, String>>, AugmentError>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Template,
    Command(PathBuf),
    Remote(String),
}

impl FromStr for BackendKind {
    type Err = String;

    /// `template`, `command:<path>` or `remote:<url>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "template" {
            return Ok(BackendKind::Template);
        }
        if let Some(path) = s.strip_prefix("command:") {
            if path.is_empty() {
                return Err("`command:` needs a program path".into());
            }
            return Ok(BackendKind::Command(PathBuf::from(path)));
        }
        if let Some(url) = s.strip_prefix("remote:") {
            if url.is_empty() {
                return Err("`remote:` needs a URL".into());
            }
            return Ok(BackendKind::Remote(url.to_string()));
        }
        Err(format!(
            "unknown backend `{s}` (expected template, command:<path> or remote:<url>)"
        ))
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::Template => f.write_str("template"),
            BackendKind::Command(p) => write!(f, "command:{}", p.display()),
            BackendKind::Remote(u) => write!(f, "remote:{u}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub strict_hint: bool,
}

/// Request body shared by the command and remote protocols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest<'a> {
    pub request_id: &'a str,
    pub source_text: &'a str,
    pub hint: &'a str,
    pub relation: &'a str,
}

impl<'a> From<&'a GenRequest> for WireRequest<'a> {
    fn from(r: &'a GenRequest) -> Self {
        WireRequest {
            request_id: &r.request_id,
            source_text: &r.source_text,
            hint: &r.hint,
            relation: &r.relation,
        }
    }
}

/// Deterministic in-process generator: takes a same-relation sentence whose
/// pattern is close to the source's and puts the hint into one of its
/// entity slots.
pub struct TemplateBackend<'a> {
    corpus: &'a Corpus,
    index: PatternIndex,
    cfg: MatchConfig,
    seed: u64,
    scheme: MarkerScheme,
}

impl<'a> TemplateBackend<'a> {
    pub fn new(corpus: &'a Corpus, cfg: MatchConfig, seed: u64, scheme: MarkerScheme) -> Self {
        TemplateBackend {
            corpus,
            index: PatternIndex::build(corpus),
            cfg,
            seed,
            scheme,
        }
    }

    pub fn respond(&self, req: &GenRequest) -> Result<GenResponse, String> {
        let source = self
            .corpus
            .get(&req.source_id)
            .ok_or_else(|| format!("source `{}` is not in the template corpus", req.source_id))?;
        let mut rng = keyed_rng(self.seed, &["template", &req.request_id]);
        let candidates = match_targets(&source.id, &self.index, &self.cfg).unwrap_or_default();
        let base = if candidates.is_empty() {
            source
        } else {
            let (id, _) = &candidates[rng.gen_range(0..candidates.len())];
            self.corpus.get(id).expect("index built from this corpus")
        };
        let role = if rng.gen_bool(0.5) {
            Role::Subject
        } else {
            Role::Object
        };
        Ok(GenResponse {
            request_id: req.request_id.clone(),
            generated_text: substitute(base, role, &req.hint).render(&self.scheme),
        })
    }
}

/// Replaces the tokens of one entity slot with `hint`, shifting the other span.
fn substitute(base: &REInstance, role: Role, hint: &str) -> MarkedSentence {
    let slot = base.span(role);
    let hint_tokens: Vec<String> = hint.split_whitespace().map(str::to_string).collect();
    let mut tokens: Vec<String> = base.forms().take(slot.start - 1).map(str::to_string).collect();
    tokens.extend(hint_tokens.iter().cloned());
    tokens.extend(base.forms().skip(slot.end).map(str::to_string));

    let new_slot = Span::new(slot.start, slot.start + hint_tokens.len() - 1, role);
    let other = match role {
        Role::Subject => base.object,
        Role::Object => base.subject,
    };
    let other = if other.start > slot.end {
        let shift = |i: usize| i + hint_tokens.len() - slot.len();
        Span::new(shift(other.start), shift(other.end), other.role)
    } else {
        other
    };
    let (subject, object) = match role {
        Role::Subject => (new_slot, other),
        Role::Object => (other, new_slot),
    };
    MarkedSentence {
        tokens,
        subject,
        object,
    }
}

impl Backend for TemplateBackend<'_> {
    fn name(&self) -> String {
        BackendKind::Template.to_string()
    }

    fn generate_batch(
        &self,
        requests: &[&GenRequest],
    ) -> Result<Vec<Result<GenResponse, String>>, AugmentError> {
        Ok(requests.par_iter().map(|r| self.respond(r)).collect())
    }
}

/// Child process speaking JSON Lines: one request per stdin line, one
/// response per stdout line, in the same order.
pub struct CommandBackend {
    program: PathBuf,
}

impl CommandBackend {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        CommandBackend {
            program: program.into(),
        }
    }
}

impl Backend for CommandBackend {
    fn name(&self) -> String {
        BackendKind::Command(self.program.clone()).to_string()
    }

    fn generate_batch(
        &self,
        requests: &[&GenRequest],
    ) -> Result<Vec<Result<GenResponse, String>>, AugmentError> {
        let mut child = Command::new(&self.program)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AugmentError::BackendUnavailable(format!("{}: {e}", self.program.display())))?;

        let mut input = Vec::new();
        for r in requests {
            serde_json::to_writer(&mut input, &WireRequest::from(*r)).expect("requests serialize");
            input.push(b'\n');
        }
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        // Feed stdin from a separate thread so a child that streams its
        // answers cannot deadlock against a full pipe.
        let lines = std::thread::scope(|s| {
            s.spawn(move || {
                // A child that exits early closes the pipe; its missing
                // answers surface below as per-request failures.
                let _ = stdin.write_all(&input);
            });
            BufReader::new(stdout).lines().collect::<Vec<_>>()
        });
        let status = child
            .wait()
            .map_err(|e| AugmentError::BackendUnavailable(format!("{}: {e}", self.program.display())))?;

        let mut out = Vec::with_capacity(requests.len());
        let mut lines = lines.into_iter();
        for _ in requests {
            out.push(match lines.next() {
                Some(Ok(line)) => serde_json::from_str::<GenResponse>(&line)
                    .map_err(|e| format!("malformed response line: {e}")),
                Some(Err(e)) => Err(format!("reading generator output: {e}")),
                None => Err(format!("generator produced no response (exit status {status})")),
            });
        }
        Ok(out)
    }
}

/// HTTP generator: one JSON POST per request, bounded concurrency.
pub struct RemoteBackend {
    url: String,
    concurrency: usize,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        RemoteBackend {
            url: url.into(),
            concurrency: DEFAULT_CONCURRENCY,
            agent,
        }
    }

    pub fn with_concurrency(mut self, concurrency: usize) -> Self {
        self.concurrency = concurrency.max(1);
        self
    }

    /// `Ok(Err(_))` is retryable; `Err(_)` means the endpoint is unreachable.
    fn call(&self, req: &GenRequest) -> Result<Result<GenResponse, String>, String> {
        let mut resp = match self.agent.post(&self.url).send_json(WireRequest::from(req)) {
            Ok(resp) => resp,
            Err(
                e @ (ureq::Error::ConnectionFailed
                | ureq::Error::HostNotFound
                | ureq::Error::BadUri(_)
                | ureq::Error::Io(_)),
            ) => return Err(format!("{}: {e}", self.url)),
            Err(e) => return Ok(Err(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status != 200 {
            return Ok(Err(format!("HTTP status {status}")));
        }
        Ok(resp
            .body_mut()
            .read_json::<GenResponse>()
            .map_err(|e| format!("malformed response body: {e}")))
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> String {
        BackendKind::Remote(self.url.clone()).to_string()
    }

    fn generate_batch(
        &self,
        requests: &[&GenRequest],
    ) -> Result<Vec<Result<GenResponse, String>>, AugmentError> {
        let slots: Mutex<Vec<Option<Result<GenResponse, String>>>> = Mutex::new(vec![None; requests.len()]);
        let fatal: Mutex<Option<String>> = Mutex::new(None);
        let next = AtomicUsize::new(0);
        let workers = self.concurrency.min(requests.len()).max(1);

        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if fatal.lock().unwrap().is_some() {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(req) = requests.get(i) else { break };
                    match self.call(req) {
                        Ok(result) => slots.lock().unwrap()[i] = Some(result),
                        Err(msg) => {
                            fatal.lock().unwrap().get_or_insert(msg);
                            break;
                        }
                    }
                });
            }
        });

        if let Some(msg) = fatal.into_inner().unwrap() {
            return Err(AugmentError::BackendUnavailable(msg));
        }
        Ok(slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|r| r.expect("every request answered"))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_marked;
    use crate::corpus::testing::{instance, surgeon};

    fn chosen() -> REInstance {
        instance(
            "s02",
            "Instrument-Agency",
            &[
                ("The", 2, "det"),
                ("player", 4, "nsubj"),
                ("has", 4, "aux"),
                ("chosen", 0, "root"),
                ("the", 6, "det"),
                ("racket", 4, "dobj"),
                (".", 4, "punct"),
            ],
            (2, 2),
            (5, 6),
        )
    }

    fn request(source: &REInstance, hint: &str) -> GenRequest {
        GenRequest {
            request_id: "req-000000".into(),
            source_id: source.id.clone(),
            source_text: crate::corpus::inject_markers(source, &MarkerScheme::default()),
            hint: hint.into(),
            relation: source.relation.clone(),
        }
    }

    #[test]
    fn backend_kinds_parse() {
        assert_eq!("template".parse::<BackendKind>(), Ok(BackendKind::Template));
        assert_eq!(
            "command:/bin/gen".parse::<BackendKind>(),
            Ok(BackendKind::Command("/bin/gen".into()))
        );
        let remote: BackendKind = "remote:http://127.0.0.1:8080/generate".parse().unwrap();
        assert_eq!(remote.to_string(), "remote:http://127.0.0.1:8080/generate");
        assert!("gpt".parse::<BackendKind>().is_err());
        assert!("command:".parse::<BackendKind>().is_err());
    }

    #[test]
    fn wire_request_fields() {
        let r = request(&surgeon(), "program");
        let json = serde_json::to_value(WireRequest::from(&r)).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 4);
        for k in ["request_id", "source_text", "hint", "relation"] {
            assert!(keys.contains(&k.to_string()));
        }
    }

    #[test]
    fn surgeon_with_program_hint_uses_chosen_sentence() {
        // The only same-relation candidate within distance 3 of the surgeon
        // pattern is the "chosen" sentence, so the hint lands in one of its
        // slots: "The program has chosen the racket ." or
        // "The player has chosen program .".
        let corpus = Corpus::new(vec![surgeon(), chosen()]).unwrap();
        let scheme = MarkerScheme::default();
        let backend = TemplateBackend::new(&corpus, MatchConfig::default(), 0, scheme.clone());
        for seed_req in 0..8 {
            let mut req = request(&surgeon(), "program");
            req.request_id = format!("req-{seed_req:06}");
            let resp = backend.respond(&req).unwrap();
            let m = parse_marked(&resp.generated_text, &scheme).unwrap();
            assert!(
                m.tokens.contains(&"chosen".to_string()),
                "{}",
                resp.generated_text
            );
            let s = m.surface(m.subject);
            let o = m.surface(m.object);
            assert!(
                (s == "program" && o == "the racket") || (s == "player" && o == "program"),
                "{}",
                resp.generated_text
            );
        }
    }

    #[test]
    fn single_instance_relation_falls_back_to_source() {
        let corpus = Corpus::new(vec![surgeon()]).unwrap();
        let backend = TemplateBackend::new(&corpus, MatchConfig::default(), 5, MarkerScheme::default());
        let resp = backend.respond(&request(&surgeon(), "big knife")).unwrap();
        let m = parse_marked(&resp.generated_text, &MarkerScheme::default()).unwrap();
        assert!(m.tokens.contains(&"applies".to_string()));
        assert_eq!(m.tokens.len(), surgeon().len() + 1);
        assert!(m.surface(m.subject) == "big knife" || m.surface(m.object) == "big knife");
    }

    #[test]
    fn substitution_shifts_following_span() {
        let out = substitute(&surgeon(), Role::Subject, "head surgeon");
        assert_eq!(out.subject, Span::new(2, 3, Role::Subject));
        assert_eq!(out.object, Span::new(7, 7, Role::Object));
        assert_eq!(out.surface(out.object), "splints");
        let out = substitute(&chosen(), Role::Object, "bat");
        assert_eq!(out.object, Span::new(5, 5, Role::Object));
        assert_eq!(out.tokens.len(), 6);
    }

    #[test]
    fn template_is_seed_deterministic() {
        let corpus = Corpus::new(vec![surgeon(), chosen()]).unwrap();
        let a = TemplateBackend::new(&corpus, MatchConfig::default(), 11, MarkerScheme::default());
        let b = TemplateBackend::new(&corpus, MatchConfig::default(), 11, MarkerScheme::default());
        let req = request(&surgeon(), "program");
        assert_eq!(a.respond(&req), b.respond(&req));
    }
}
