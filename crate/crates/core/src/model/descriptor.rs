use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{valid_name, IdSource, Millis, ModelError, StreamRef, RESERVED_PREVIOUS, RESERVED_RESULT};
use crate::expr::Expression;

// ---------------------------------------------------------------------------
// Wire documents
// ---------------------------------------------------------------------------

/// A Service Object descriptor as posted by clients and as persisted.
///
/// `streams` and each stream's `channels` accept both the list form
/// (`[{"name": ..}, ..]`) and the keyed-object form (`{"temp": {..}}`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DescriptorDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(rename = "createdAt", default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<Millis>,
    #[serde(rename = "updatedAt", default, skip_serializing_if = "Option::is_none")]
    pub updated_at: Option<Millis>,
    #[serde(default)]
    pub streams: Keyed<StreamDoc>,
    #[serde(default)]
    pub actions: Vec<String>,
}

/// Either a list of named entries or an object keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Keyed<T> {
    List(Vec<T>),
    Map(IndexMap<String, T>),
}

impl<T> Default for Keyed<T> {
    fn default() -> Self {
        Keyed::List(Vec::new())
    }
}

trait Named {
    fn name_mut(&mut self) -> &mut Option<String>;
}

/// Flattens both forms into `(name, entry)` pairs in document order.
fn into_named<T: Named>(keyed: Keyed<T>, what: &str) -> Result<Vec<(String, T)>, ModelError> {
    {
        match keyed {
            Keyed::List(items) => items
                .into_iter()
                .map(|mut item| match item.name_mut().take() {
                    Some(n) => Ok((n, item)),
                    None => Err(ModelError::MalformedDescriptor(format!("{what} without a name"))),
                })
                .collect(),
            Keyed::Map(map) => map
                .into_iter()
                .map(|(key, mut item)| match item.name_mut().take() {
                    Some(n) if n != key => Err(ModelError::MalformedDescriptor(format!(
                        "{what} keyed {key:?} is named {n:?}"
                    ))),
                    _ => Ok((key, item)),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub channels: Keyed<ChannelDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<IndexMap<String, SourceDoc>>,
    #[serde(rename = "pre-filter", default, skip_serializing_if = "Option::is_none")]
    pub pre_filter: Option<String>,
}

impl Named for StreamDoc {
    fn name_mut(&mut self) -> &mut Option<String> {
        &mut self.name
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub value_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(rename = "current-value", default, skip_serializing_if = "Option::is_none")]
    pub current_value: Option<String>,
    #[serde(rename = "post-filter", default, skip_serializing_if = "Option::is_none")]
    pub post_filter: Option<String>,
}

impl Named for ChannelDoc {
    fn name_mut(&mut self) -> &mut Option<String> {
        &mut self.name
    }
}

/// Operand binding inside a composite stream's `sources`. A missing `soId`
/// means "a stream of this same Service Object".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDoc {
    #[serde(rename = "soId", default, skip_serializing_if = "Option::is_none")]
    pub so_id: Option<String>,
    #[serde(rename = "streamId")]
    pub stream_id: String,
}

/// Response shape of `POST /` and `GET /{soId}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoSummary {
    pub id: String,
    pub name: String,
    #[serde(rename = "createdAt")]
    pub created_at: Millis,
    #[serde(rename = "updatedAt")]
    pub updated_at: Millis,
    pub description: String,
    pub streams: Vec<String>,
    pub actions: Vec<String>,
}

/// One entry of `GET /{soId}/streams`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamListing {
    pub name: String,
    pub channels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

// ---------------------------------------------------------------------------
// Validated domain types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceObject {
    pub id: String,
    pub name: String,
    pub description: String,
    pub created_at: Millis,
    pub updated_at: Millis,
    pub streams: IndexMap<String, StreamSpec>,
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub description: Option<String>,
    pub kind: StreamKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamKind {
    Simple { channels: Vec<ChannelDecl> },
    Composite(CompositeStreamSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDecl {
    pub name: String,
    pub value_type: Option<String>,
    pub unit: Option<String>,
}

/// Code and operand bindings of a composite stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeStreamSpec {
    pub channels: IndexMap<String, CompositeChannel>,
    pub pre_filter: Option<Expression>,
    /// alias -> operand stream, sorted by alias.
    pub sources: BTreeMap<String, StreamRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeChannel {
    pub value: Expression,
    pub post_filter: Option<Expression>,
    pub value_type: Option<String>,
    pub unit: Option<String>,
}

impl CompositeStreamSpec {
    /// Every alias referenced by any expression of this stream.
    pub fn referenced_aliases(&self) -> std::collections::BTreeSet<&str> {
        let mut out = std::collections::BTreeSet::new();
        let exprs = self
            .pre_filter
            .iter()
            .chain(self.channels.values().flat_map(|c| std::iter::once(&c.value).chain(c.post_filter.iter())));
        for e in exprs {
            out.extend(e.aliases().map(String::as_str));
        }
        out
    }
}

impl StreamSpec {
    pub fn composite(&self) -> Option<&CompositeStreamSpec> {
        match &self.kind {
            StreamKind::Composite(c) => Some(c),
            StreamKind::Simple { .. } => None,
        }
    }

    pub fn is_composite(&self) -> bool {
        self.composite().is_some()
    }

    pub fn channel_names(&self) -> Vec<String> {
        match &self.kind {
            StreamKind::Simple { channels } => channels.iter().map(|c| c.name.clone()).collect(),
            StreamKind::Composite(c) => c.channels.keys().cloned().collect(),
        }
    }
}

impl ServiceObject {
    pub fn stream(&self, name: &str) -> Option<&StreamSpec> {
        self.streams.get(name)
    }

    pub fn stream_ref(&self, stream: &str) -> StreamRef {
        StreamRef::new(&self.id, stream)
    }

    /// `(target stream, alias, operand)` for every composite binding.
    pub fn bindings(&self) -> impl Iterator<Item = (StreamRef, &str, &StreamRef)> + '_ {
        self.streams.iter().flat_map(move |(name, spec)| {
            spec.composite()
                .into_iter()
                .flat_map(|c| c.sources.iter())
                .map(move |(alias, src)| (self.stream_ref(name), alias.as_str(), src))
        })
    }

    pub fn summary(&self) -> SoSummary {
        SoSummary {
            id: self.id.clone(),
            name: self.name.clone(),
            created_at: self.created_at,
            updated_at: self.updated_at,
            description: self.description.clone(),
            streams: self.streams.keys().cloned().collect(),
            actions: self.actions.clone(),
        }
    }

    pub fn stream_listing(&self) -> Vec<StreamListing> {
        self.streams
            .iter()
            .map(|(name, spec)| StreamListing {
                name: name.clone(),
                channels: spec.channel_names(),
                description: spec.description.clone(),
            })
            .collect()
    }

    /// Full-fidelity document; `from_stored(to_document(so)) == so`.
    pub fn to_document(&self) -> DescriptorDoc {
        let streams = self
            .streams
            .iter()
            .map(|(name, spec)| {
                let (channels, sources, pre_filter) = match &spec.kind {
                    StreamKind::Simple { channels } => (
                        channels
                            .iter()
                            .map(|c| ChannelDoc {
                                name: Some(c.name.clone()),
                                value_type: c.value_type.clone(),
                                unit: c.unit.clone(),
                                ..Default::default()
                            })
                            .collect(),
                        None,
                        None,
                    ),
                    StreamKind::Composite(c) => (
                        c.channels
                            .iter()
                            .map(|(n, ch)| ChannelDoc {
                                name: Some(n.clone()),
                                value_type: ch.value_type.clone(),
                                unit: ch.unit.clone(),
                                current_value: Some(ch.value.source().to_owned()),
                                post_filter: ch.post_filter.as_ref().map(|e| e.source().to_owned()),
                            })
                            .collect(),
                        Some(
                            c.sources
                                .iter()
                                .map(|(alias, r)| {
                                    (
                                        alias.clone(),
                                        SourceDoc {
                                            so_id: Some(r.so_id.clone()),
                                            stream_id: r.stream_id.clone(),
                                        },
                                    )
                                })
                                .collect(),
                        ),
                        c.pre_filter.as_ref().map(|e| e.source().to_owned()),
                    ),
                };
                StreamDoc {
                    name: Some(name.clone()),
                    description: spec.description.clone(),
                    channels: Keyed::List(channels),
                    sources,
                    pre_filter,
                }
            })
            .collect();
        DescriptorDoc {
            id: Some(self.id.clone()),
            name: self.name.clone(),
            description: self.description.clone(),
            created_at: Some(self.created_at),
            updated_at: Some(self.updated_at),
            streams: Keyed::List(streams),
            actions: self.actions.clone(),
        }
    }

    /// Rebuilds a persisted descriptor, keeping its id and timestamps.
    pub fn from_stored(doc: DescriptorDoc) -> Result<Self, ModelError> {
        let id = doc
            .id
            .clone()
            .ok_or_else(|| ModelError::MalformedDescriptor("stored descriptor without id".into()))?;
        let created = doc.created_at.unwrap_or(0);
        let updated = doc.updated_at.unwrap_or(created);
        build(doc, id, created, updated)
    }
}

/// Checks a candidate descriptor and assigns it a fresh id and creation time.
///
/// Any `id`/`createdAt`/`updatedAt` present in the candidate is ignored.
pub fn validate_descriptor(
    doc: DescriptorDoc,
    ids: &mut dyn IdSource,
    now: Millis,
) -> Result<ServiceObject, ModelError> {
    let id = ids.next_id();
    build(doc, id, now, now)
}

/// Validates `doc` as a replacement for an existing descriptor.
pub fn validate_replacement(
    doc: DescriptorDoc,
    existing: &ServiceObject,
    now: Millis,
) -> Result<ServiceObject, ModelError> {
    let updated = now.max(existing.updated_at + 1);
    build(doc, existing.id.clone(), existing.created_at, updated)
}

fn build(doc: DescriptorDoc, id: String, created_at: Millis, updated_at: Millis) -> Result<ServiceObject, ModelError> {
    let malformed = |m: String| ModelError::MalformedDescriptor(m);

    let mut streams = IndexMap::new();
    for (name, sdoc) in into_named(doc.streams, "stream")? {
        if !valid_name(&name) {
            return Err(malformed(format!("invalid stream name {name:?}")));
        }
        if streams.contains_key(&name) {
            return Err(malformed(format!("duplicate stream {name:?}")));
        }
        let spec = build_stream(&id, &name, sdoc)?;
        streams.insert(name, spec);
    }

    let mut seen = HashSet::new();
    for action in &doc.actions {
        if action.is_empty() || !seen.insert(action) {
            return Err(malformed(format!("empty or duplicate action {action:?}")));
        }
    }

    Ok(ServiceObject {
        id,
        name: doc.name,
        description: doc.description,
        created_at,
        updated_at,
        streams,
        actions: doc.actions,
    })
}

fn build_stream(so_id: &str, name: &str, sdoc: StreamDoc) -> Result<StreamSpec, ModelError> {
    let malformed = |m: String| ModelError::MalformedDescriptor(m);
    let channels = into_named(sdoc.channels, "channel")?;
    let mut seen = HashSet::new();
    for (ch, _) in &channels {
        if !valid_name(ch) {
            return Err(malformed(format!("stream {name:?}: invalid channel name {ch:?}")));
        }
        if !seen.insert(ch.clone()) {
            return Err(malformed(format!("stream {name:?}: duplicate channel {ch:?}")));
        }
    }

    let Some(source_docs) = sdoc.sources else {
        if channels.is_empty() {
            return Err(malformed(format!("simple stream {name:?} declares no channels")));
        }
        if let Some((ch, _)) = channels
            .iter()
            .find(|(_, c)| c.current_value.is_some() || c.post_filter.is_some())
        {
            return Err(malformed(format!(
                "stream {name:?} channel {ch:?} carries code but the stream has no sources"
            )));
        }
        if sdoc.pre_filter.is_some() {
            return Err(malformed(format!("stream {name:?} has a pre-filter but no sources")));
        }
        return Ok(StreamSpec {
            description: sdoc.description,
            kind: StreamKind::Simple {
                channels: channels
                    .into_iter()
                    .map(|(n, c)| ChannelDecl {
                        name: n,
                        value_type: c.value_type,
                        unit: c.unit,
                    })
                    .collect(),
            },
        });
    };

    if source_docs.is_empty() {
        return Err(malformed(format!("composite stream {name:?} has empty sources")));
    }
    if channels.is_empty() {
        return Err(malformed(format!("composite stream {name:?} declares no channels")));
    }
    let mut sources = BTreeMap::new();
    for (alias, src) in source_docs {
        if !valid_name(&alias) || alias == RESERVED_PREVIOUS || alias == RESERVED_RESULT {
            return Err(malformed(format!("stream {name:?}: invalid source alias {alias:?}")));
        }
        let so = src.so_id.filter(|s| !s.is_empty()).unwrap_or_else(|| so_id.to_owned());
        if src.stream_id.is_empty() {
            return Err(malformed(format!("stream {name:?}: source {alias:?} has empty streamId")));
        }
        sources.insert(alias, StreamRef::new(so, src.stream_id));
    }

    let compile = |text: &str, channel: Option<&str>, field: &'static str, allow_result: bool| {
        let expr = Expression::parse(text).map_err(|error| ModelError::ExpressionSyntax {
            stream: name.to_owned(),
            channel: channel.map(str::to_owned),
            field,
            error,
        })?;
        for alias in expr.aliases() {
            let known = sources.contains_key(alias)
                || alias == RESERVED_PREVIOUS
                || (allow_result && alias == RESERVED_RESULT);
            if !known {
                return Err(ModelError::DanglingAlias {
                    stream: name.to_owned(),
                    channel: channel.map(str::to_owned),
                    alias: alias.clone(),
                });
            }
        }
        Ok(expr)
    };

    let pre_filter = sdoc
        .pre_filter
        .as_deref()
        .map(|t| compile(t, None, "pre-filter", false))
        .transpose()?;

    let mut out = IndexMap::new();
    for (ch, cdoc) in channels {
        let text = cdoc.current_value.as_deref().ok_or_else(|| {
            malformed(format!("composite stream {name:?} channel {ch:?} has no current-value"))
        })?;
        let value = compile(text, Some(&ch), "current-value", false)?;
        let post_filter = cdoc
            .post_filter
            .as_deref()
            .map(|t| compile(t, Some(&ch), "post-filter", true))
            .transpose()?;
        out.insert(
            ch,
            CompositeChannel {
                value,
                post_filter,
                value_type: cdoc.value_type,
                unit: cdoc.unit,
            },
        );
    }

    Ok(StreamSpec {
        description: sdoc.description,
        kind: StreamKind::Composite(CompositeStreamSpec {
            channels: out,
            pre_filter,
            sources,
        }),
    })
}

/// Resolves every operand binding of `spec`, in alias order.
///
/// `exists` answers whether a stream is currently registered.
pub fn resolve_bindings(
    spec: &CompositeStreamSpec,
    exists: impl Fn(&StreamRef) -> bool,
) -> Result<Vec<(String, StreamRef)>, ModelError> {
    spec.sources
        .iter()
        .map(|(alias, r)| {
            if exists(r) {
                Ok((alias.clone(), r.clone()))
            } else {
                Err(ModelError::UnknownSource {
                    alias: alias.clone(),
                    stream: r.clone(),
                })
            }
        })
        .collect()
}
