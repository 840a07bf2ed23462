//! Generation of entity-marked pseudo sentences: request sampling, backend
//! dispatch, structural validation and assembly of the augmented corpus.

mod backend;
mod output;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    inject_markers, parse_marked, Corpus, MarkerError, MarkerScheme, REInstance, Role, Span,
};
use crate::seed::keyed_rng;

pub use backend::{
    Backend, BackendKind, BackendSpec, CommandBackend, RemoteBackend, TemplateBackend, WireRequest,
};
pub use output::{read_augmented, write_augmented, write_rejects};

pub const DEFAULT_MAX_RETRIES: usize = 2;
pub const DEFAULT_CONCURRENCY: usize = 8;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("generator backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("augmentation multiple must be at least 1")]
    InvalidMultiple,
    #[error("relation `{0}` has no instances to sample from")]
    RelationTooSmall(String),
}

/// Input to a generator: a marked sentence plus an entity hint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenRequest {
    pub request_id: String,
    pub source_id: String,
    pub source_text: String,
    pub hint: String,
    pub relation: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenResponse {
    pub request_id: String,
    pub generated_text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub hint: String,
    pub backend: String,
}

/// A validated generated sentence. It carries no dependency parse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedInstance {
    pub id: String,
    pub tokens: Vec<String>,
    pub subject: Span,
    pub object: Span,
    pub relation: String,
    pub provenance: Provenance,
}

impl AugmentedInstance {
    pub fn surface(&self, span: Span) -> String {
        self.tokens[span.start - 1..span.end].join(" ")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub request_id: String,
    pub source_id: String,
    pub reason: String,
    pub attempts: usize,
    /// Last text the backend produced, if any.
    pub generated_text: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectReport {
    pub rejections: Vec<Rejection>,
}

impl RejectReport {
    pub fn len(&self) -> usize {
        self.rejections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejections.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct GenerateConfig {
    /// Reject outputs whose marked entities do not contain the hint.
    pub strict_hint: bool,
    /// Extra attempts after the first for a failed request.
    pub max_retries: usize,
    pub scheme: MarkerScheme,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            strict_hint: false,
            max_retries: DEFAULT_MAX_RETRIES,
            scheme: MarkerScheme::default(),
        }
    }
}

/// Draws `multiple` requests per corpus instance. For each slot, the source
/// sentence and the hint entity are drawn uniformly from the slot
/// instance's relation, so the relation distribution is preserved.
pub fn sample_requests(
    corpus: &Corpus,
    multiple: usize,
    seed: u64,
    scheme: &MarkerScheme,
) -> Result<Vec<GenRequest>, AugmentError> {
    if multiple == 0 {
        return Err(AugmentError::InvalidMultiple);
    }
    let pools: BTreeMap<&str, Vec<&REInstance>> = corpus
        .relations
        .iter()
        .map(|r| (r.as_str(), corpus.relation_instances(r).collect()))
        .collect();

    let mut out = Vec::with_capacity(corpus.len() * multiple);
    for inst in &corpus.instances {
        let pool = &pools[inst.relation.as_str()];
        if pool.is_empty() {
            return Err(AugmentError::RelationTooSmall(inst.relation.clone()));
        }
        for _ in 0..multiple {
            let request_id = format!("req-{:06}", out.len());
            let mut rng = keyed_rng(seed, &["request", &request_id]);
            let source = pool[rng.gen_range(0..pool.len())];
            let donor = pool[rng.gen_range(0..pool.len())];
            let role = if rng.gen_bool(0.5) {
                Role::Subject
            } else {
                Role::Object
            };
            out.push(GenRequest {
                source_text: inject_markers(source, scheme),
                source_id: source.id.clone(),
                hint: donor.surface(donor.span(role)),
                relation: inst.relation.clone(),
                request_id,
            });
        }
    }
    Ok(out)
}

fn validate(
    req: &GenRequest,
    resp: &GenResponse,
    cfg: &GenerateConfig,
    backend: &str,
) -> Result<AugmentedInstance, String> {
    if resp.request_id != req.request_id {
        return Err(format!(
            "RequestIdMismatch: expected `{}`, got `{}`",
            req.request_id, resp.request_id
        ));
    }
    let marked = parse_marked(&resp.generated_text, &cfg.scheme).map_err(|e| {
        let kind = match e {
            MarkerError::MissingMarker(_) => "MissingMarker",
            MarkerError::DuplicateMarker(_) => "DuplicateMarker",
            MarkerError::EmptyEntity(_) => "EmptyEntity",
            MarkerError::InterleavedMarkers(_) => "InterleavedMarkers",
        };
        format!("{kind}: {e}")
    })?;
    if cfg.strict_hint {
        let subj = marked.surface(marked.subject);
        let obj = marked.surface(marked.object);
        if !subj.contains(&req.hint) && !obj.contains(&req.hint) {
            return Err(format!("HintMissing: no marked entity contains `{}`", req.hint));
        }
    }
    Ok(AugmentedInstance {
        id: format!("aug-{}", req.request_id),
        tokens: marked.tokens,
        subject: marked.subject,
        object: marked.object,
        relation: req.relation.clone(),
        provenance: Provenance {
            source_id: req.source_id.clone(),
            hint: req.hint.clone(),
            backend: backend.to_string(),
        },
    })
}

/// Sends requests to `backend`, retrying failed ones up to
/// `cfg.max_retries` times. Accepted instances and rejections are both
/// returned in request order.
pub fn generate(
    requests: &[GenRequest],
    backend: &dyn Backend,
    cfg: &GenerateConfig,
) -> Result<(Vec<AugmentedInstance>, RejectReport), AugmentError> {
    let name = backend.name();
    let mut accepted: Vec<Option<AugmentedInstance>> = vec![None; requests.len()];
    let mut failures: Vec<Option<(String, Option<String>)>> = vec![None; requests.len()];
    let mut pending: Vec<usize> = (0..requests.len()).collect();

    for _attempt in 0..=cfg.max_retries {
        if pending.is_empty() {
            break;
        }
        let batch: Vec<&GenRequest> = pending.iter().map(|&i| &requests[i]).collect();
        let responses = backend.generate_batch(&batch)?;
        if responses.len() != batch.len() {
            return Err(AugmentError::BackendUnavailable(format!(
                "{name} answered {} of {} requests",
                responses.len(),
                batch.len()
            )));
        }
        let mut still = Vec::new();
        for (&i, resp) in pending.iter().zip(responses) {
            let outcome = resp.map_err(|e| (e, None)).and_then(|r| {
                validate(&requests[i], &r, cfg, &name).map_err(|e| (e, Some(r.generated_text)))
            });
            match outcome {
                Ok(inst) => accepted[i] = Some(inst),
                Err(fail) => {
                    failures[i] = Some(fail);
                    still.push(i);
                }
            }
        }
        pending = still;
    }

    let rejections = pending
        .into_iter()
        .map(|i| {
            let (reason, text) = failures[i].take().expect("failed request has a reason");
            Rejection {
                request_id: requests[i].request_id.clone(),
                source_id: requests[i].source_id.clone(),
                reason,
                attempts: cfg.max_retries + 1,
                generated_text: text,
            }
        })
        .collect();
    Ok((
        accepted.into_iter().flatten().collect(),
        RejectReport { rejections },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testing::{instance, surgeon};
    use std::sync::Mutex;

    fn other() -> REInstance {
        instance(
            "o1",
            "Other",
            &[
                ("Dogs", 2, "nsubj"),
                ("chase", 0, "root"),
                ("big", 4, "amod"),
                ("cats", 2, "obj"),
            ],
            (1, 1),
            (3, 4),
        )
    }

    #[test]
    fn request_volume_and_relation() {
        let corpus = Corpus::new(vec![surgeon(), other()]).unwrap();
        let reqs = sample_requests(&corpus, 3, 0, &MarkerScheme::default()).unwrap();
        assert_eq!(reqs.len(), 6);
        for r in &reqs {
            let src = corpus.get(&r.source_id).unwrap();
            assert_eq!(src.relation, r.relation);
            assert_eq!(r.source_text, inject_markers(src, &MarkerScheme::default()));
        }
        // single-instance relations can only hint from themselves
        let other_hints: Vec<_> = reqs
            .iter()
            .filter(|r| r.relation == "Other")
            .map(|r| r.hint.as_str())
            .collect();
        assert!(
            other_hints.iter().all(|h| *h == "Dogs" || *h == "big cats"),
            "{other_hints:?}"
        );
    }

    #[test]
    fn zero_multiple_is_rejected() {
        let corpus = Corpus::new(vec![surgeon()]).unwrap();
        assert!(matches!(
            sample_requests(&corpus, 0, 0, &MarkerScheme::default()),
            Err(AugmentError::InvalidMultiple)
        ));
    }

    #[test]
    fn sampling_is_seeded() {
        let corpus = Corpus::new(vec![surgeon(), other()]).unwrap();
        let s = MarkerScheme::default();
        assert_eq!(
            sample_requests(&corpus, 4, 9, &s).unwrap(),
            sample_requests(&corpus, 4, 9, &s).unwrap()
        );
    }

    /// Replays canned outputs, one list per request id, advancing per attempt.
    struct Scripted {
        outputs: BTreeMap<String, Vec<String>>,
        calls: Mutex<BTreeMap<String, usize>>,
    }

    impl Backend for Scripted {
        fn name(&self) -> String {
            "scripted".into()
        }

        fn generate_batch(
            &self,
            requests: &[&GenRequest],
        ) -> Result<Vec<Result<GenResponse, String>>, AugmentError> {
            let mut calls = self.calls.lock().unwrap();
            Ok(requests
                .iter()
                .map(|r| {
                    let n = calls.entry(r.request_id.clone()).or_default();
                    let outs = &self.outputs[&r.request_id];
                    let text = outs[(*n).min(outs.len() - 1)].clone();
                    *n += 1;
                    Ok(GenResponse {
                        request_id: r.request_id.clone(),
                        generated_text: text,
                    })
                })
                .collect())
        }
    }

    fn req(id: &str, hint: &str) -> GenRequest {
        GenRequest {
            request_id: id.into(),
            source_id: "src".into(),
            source_text: "[E_sub] a [/E_sub] b [E_obj] c [/E_obj]".into(),
            hint: hint.into(),
            relation: "Component-Whole".into(),
        }
    }

    #[test]
    fn validation_retry_and_rejection() {
        let good = "The [E_sub] program [/E_sub] was opened by the [E_obj] host [/E_obj] .";
        let missing = "The [E_sub] program [/E_sub] was opened by the [E_obj] host .";
        let backend = Scripted {
            outputs: [
                ("a".to_string(), vec![good.to_string()]),
                ("b".to_string(), vec![missing.to_string()]),
                ("c".to_string(), vec![missing.to_string(), good.to_string()]),
            ]
            .into_iter()
            .collect(),
            calls: Mutex::default(),
        };
        let reqs = [req("a", "program"), req("b", "program"), req("c", "program")];
        let (ok, rejects) = generate(&reqs, &backend, &GenerateConfig::default()).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok[0].relation, "Component-Whole");
        assert_eq!(ok[0].surface(ok[0].subject), "program");
        assert_eq!(ok[1].id, "aug-c");
        assert_eq!(rejects.len(), 1);
        let r = &rejects.rejections[0];
        assert_eq!(r.request_id, "b");
        assert!(r.reason.starts_with("MissingMarker"), "{}", r.reason);
        assert_eq!(r.attempts, 3);
        assert_eq!(backend.calls.lock().unwrap()["b"], 3);
    }

    #[test]
    fn strict_hint() {
        let text = "The [E_sub] program [/E_sub] was opened by the [E_obj] host [/E_obj] .";
        let backend = Scripted {
            outputs: [("a".to_string(), vec![text.to_string()])].into_iter().collect(),
            calls: Mutex::default(),
        };
        let reqs = [req("a", "winemaker")];
        let lax = generate(&reqs, &backend, &GenerateConfig::default()).unwrap();
        assert_eq!(lax.0.len(), 1);
        let cfg = GenerateConfig {
            strict_hint: true,
            max_retries: 0,
            ..GenerateConfig::default()
        };
        let (ok, rejects) = generate(&reqs, &backend, &cfg).unwrap();
        assert!(ok.is_empty());
        assert!(rejects.rejections[0].reason.starts_with("HintMissing"));
    }

    #[test]
    fn mismatched_id_is_rejected() {
        struct Liar;
        impl Backend for Liar {
            fn name(&self) -> String {
                "liar".into()
            }
            fn generate_batch(
                &self,
                requests: &[&GenRequest],
            ) -> Result<Vec<Result<GenResponse, String>>, AugmentError> {
                Ok(requests
                    .iter()
                    .map(|r| {
                        Ok(GenResponse {
                            request_id: "other".into(),
                            generated_text: r.source_text.clone(),
                        })
                    })
                    .collect())
            }
        }
        let (ok, rejects) = generate(&[req("a", "a")], &Liar, &GenerateConfig::default()).unwrap();
        assert!(ok.is_empty());
        assert!(rejects.rejections[0].reason.starts_with("RequestIdMismatch"));
    }
}
