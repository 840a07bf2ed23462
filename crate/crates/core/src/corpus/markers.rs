use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{REInstance, Role, Span};

/// The four reserved tokens delimiting subject and object mentions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerScheme {
    pub subj_open: String,
    pub subj_close: String,
    pub obj_open: String,
    pub obj_close: String,
}

impl Default for MarkerScheme {
    fn default() -> Self {
        MarkerScheme {
            subj_open: "[E_sub]".into(),
            subj_close: "[/E_sub]".into(),
            obj_open: "[E_obj]".into(),
            obj_close: "[/E_obj]".into(),
        }
    }
}

impl MarkerScheme {
    fn all(&self) -> [&str; 4] {
        [&self.subj_open, &self.subj_close, &self.obj_open, &self.obj_close]
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = self.all();
        for (i, m) in all.iter().enumerate() {
            if m.is_empty() || m.chars().any(char::is_whitespace) {
                return Err(format!("marker `{m}` is empty or contains whitespace"));
            }
            if all[..i].contains(m) {
                return Err(format!("marker `{m}` is used twice"));
            }
        }
        Ok(())
    }

    pub fn is_marker(&self, token: &str) -> bool {
        self.all().contains(&token)
    }

    fn open_close(&self, role: Role) -> (&str, &str) {
        match role {
            Role::Subject => (&self.subj_open, &self.subj_close),
            Role::Object => (&self.obj_open, &self.obj_close),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MarkerError {
    #[error("missing marker `{0}`")]
    MissingMarker(String),
    #[error("marker `{0}` occurs more than once")]
    DuplicateMarker(String),
    #[error("marker pair opened by `{0}` encloses no tokens")]
    EmptyEntity(String),
    #[error("marker `{0}` is interleaved with the other entity or out of order")]
    InterleavedMarkers(String),
}

/// Marker-free tokens and the entity spans recovered from a marked sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedSentence {
    pub tokens: Vec<String>,
    pub subject: Span,
    pub object: Span,
}

impl MarkedSentence {
    pub fn surface(&self, span: Span) -> String {
        self.tokens[span.start - 1..span.end].join(" ")
    }

    pub fn render(&self, scheme: &MarkerScheme) -> String {
        render(
            self.tokens.iter().map(String::as_str),
            self.subject,
            self.object,
            scheme,
        )
    }
}

fn render<'a>(
    forms: impl Iterator<Item = &'a str>,
    subject: Span,
    object: Span,
    scheme: &'a MarkerScheme,
) -> String {
    let mut out: Vec<&str> = Vec::new();
    for (i, form) in forms.enumerate() {
        let index = i + 1;
        for span in [subject, object] {
            if index == span.start {
                out.push(scheme.open_close(span.role).0);
            }
        }
        out.push(form);
        for span in [subject, object] {
            if index == span.end {
                out.push(scheme.open_close(span.role).1);
            }
        }
    }
    out.join(" ")
}

/// Joins tokens with single spaces, wrapping subject and object in markers.
pub fn inject_markers(instance: &REInstance, scheme: &MarkerScheme) -> String {
    render(instance.forms(), instance.subject, instance.object, scheme)
}

/// Inverse of [`inject_markers`].
pub fn parse_marked(text: &str, scheme: &MarkerScheme) -> Result<MarkedSentence, MarkerError> {
    let mut tokens = Vec::new();
    // Position (in marker-free tokens) at which each marker was seen.
    let mut seen: [Option<usize>; 4] = [None; 4];
    let markers = scheme.all();
    for tok in text.split_whitespace() {
        match markers.iter().position(|m| *m == tok) {
            Some(k) => {
                if seen[k].is_some() {
                    return Err(MarkerError::DuplicateMarker(tok.to_string()));
                }
                seen[k] = Some(tokens.len());
            }
            None => tokens.push(tok.to_string()),
        }
    }
    for (k, pos) in seen.iter().enumerate() {
        if pos.is_none() {
            return Err(MarkerError::MissingMarker(markers[k].to_string()));
        }
    }
    let [so, sc, oo, oc] = seen.map(Option::unwrap);

    // Marker positions are boundaries in the marker-free sequence; a close
    // seen at boundary b ends the entity at token b (1-based).
    let span = |open: usize, close: usize, role: Role| -> Result<Span, MarkerError> {
        let (open_m, close_m) = scheme.open_close(role);
        if close < open {
            return Err(MarkerError::InterleavedMarkers(close_m.to_string()));
        }
        if close == open {
            return Err(MarkerError::EmptyEntity(open_m.to_string()));
        }
        Ok(Span::new(open + 1, close, role))
    };
    let subject = span(so, sc, Role::Subject)?;
    let object = span(oo, oc, Role::Object)?;
    if subject.overlaps(&object) {
        let culprit = if subject.start < object.start {
            &scheme.obj_open
        } else {
            &scheme.subj_open
        };
        return Err(MarkerError::InterleavedMarkers(culprit.clone()));
    }
    Ok(MarkedSentence {
        tokens,
        subject,
        object,
    })
}
