//! Provenance DAG over signed manifests.
//!
//! Origin edges point from a derived object to the manifests it was made
//! from. Facsimile edges are symmetric annotations and never take part in
//! tracing or closure checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};

use crate::binding::verify_binding;
use crate::codec::{self, Format, MapBuilder, Value};
use crate::crypto::{verify_signed_manifest, CryptoError, SignedManifest, TrustStore};
use crate::ledger::write_atomic;
use crate::manifest::{compute_manifest_id, FacsimileRelation, Manifest, ManifestError, ManifestId};

#[derive(Debug, thiserror::Error)]
pub enum ProvenanceError {
    #[error("adding {0} would create a cycle")]
    CycleDetected(ManifestId),
    #[error("envelope rejected: {0}")]
    BadSignature(CryptoError),
    #[error("a different envelope is already stored under {0}")]
    DuplicateId(ManifestId),
    #[error("unknown manifest {0}")]
    UnknownId(ManifestId),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt graph store: {0}")]
    CorruptStore(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub envelope: SignedManifest,
    pub envelope_bytes: Vec<u8>,
    pub manifest: Manifest,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FacsimileEdge {
    /// The smaller id of the pair.
    pub a: ManifestId,
    pub b: ManifestId,
    pub relation: FacsimileRelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ancestors,
    Descendants,
}

#[derive(Debug, Clone, Default)]
pub struct ProvenanceGraph {
    nodes: BTreeMap<ManifestId, Node>,
    parents: BTreeMap<ManifestId, Vec<ManifestId>>,
    children: BTreeMap<ManifestId, BTreeSet<ManifestId>>,
    facsimiles: BTreeSet<FacsimileEdge>,
}

impl ProvenanceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: &ManifestId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &ManifestId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &ManifestId> {
        self.nodes.keys()
    }

    pub fn parents(&self, id: &ManifestId) -> &[ManifestId] {
        self.parents.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn facsimile_edges(&self) -> impl Iterator<Item = &FacsimileEdge> {
        self.facsimiles.iter()
    }

    /// Ids referenced by an edge but not present as nodes.
    pub fn unresolved(&self) -> BTreeSet<ManifestId> {
        let mut out = BTreeSet::new();
        for ps in self.parents.values() {
            out.extend(ps.iter().filter(|p| !self.nodes.contains_key(*p)).cloned());
        }
        for e in &self.facsimiles {
            for id in [&e.a, &e.b] {
                if !self.nodes.contains_key(id) {
                    out.insert(id.clone());
                }
            }
        }
        out
    }

    /// Verifies `envelope` and inserts it under its manifest id. Re-adding
    /// byte-identical envelope bytes is a no-op.
    pub fn add_manifest(
        &mut self,
        envelope: SignedManifest,
        trust: &TrustStore,
        at: DateTime<Utc>,
    ) -> Result<ManifestId, ProvenanceError> {
        let (manifest, _) =
            verify_signed_manifest(&envelope, trust, at).map_err(ProvenanceError::BadSignature)?;
        let id = compute_manifest_id(&manifest)?;
        let envelope_bytes = envelope.to_bytes();
        self.insert(
            id.clone(),
            Node {
                envelope,
                envelope_bytes,
                manifest,
            },
        )?;
        Ok(id)
    }

    fn insert(&mut self, id: ManifestId, node: Node) -> Result<(), ProvenanceError> {
        if let Some(existing) = self.nodes.get(&id) {
            return if existing.envelope_bytes == node.envelope_bytes {
                Ok(())
            } else {
                Err(ProvenanceError::DuplicateId(id))
            };
        }
        let parents = node.manifest.origin_manifest_ids.clone();
        if parents.iter().any(|p| *p == id || self.reaches(p, &id)) {
            return Err(ProvenanceError::CycleDetected(id));
        }
        for p in &parents {
            self.children.entry(p.clone()).or_default().insert(id.clone());
        }
        for f in &node.manifest.facsimiles {
            let (a, b) = if f.manifest_id <= id {
                (f.manifest_id.clone(), id.clone())
            } else {
                (id.clone(), f.manifest_id.clone())
            };
            self.facsimiles.insert(FacsimileEdge {
                a,
                b,
                relation: f.relation,
            });
        }
        self.parents.insert(id.clone(), parents);
        self.nodes.insert(id, node);
        Ok(())
    }

    /// The listed nodes with their own edges. Parents outside the set show
    /// up as unresolved.
    pub fn subgraph<'a>(&self, ids: impl IntoIterator<Item = &'a ManifestId>) -> ProvenanceGraph {
        let mut g = ProvenanceGraph::new();
        for id in ids {
            if let Some(n) = self.nodes.get(id) {
                g.insert(id.clone(), n.clone())
                    .expect("a subset of an acyclic graph is acyclic");
            }
        }
        g
    }

    /// Whether `target` is `from` or one of its ancestors.
    fn reaches(&self, from: &ManifestId, target: &ManifestId) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(cur) = stack.pop() {
            if cur == target {
                return true;
            }
            if seen.insert(cur) {
                stack.extend(self.parents(cur));
            }
        }
        false
    }

    fn neighbours(&self, id: &ManifestId, dir: Direction) -> Vec<&ManifestId> {
        match dir {
            Direction::Ancestors => self.parents(id).iter().collect(),
            Direction::Descendants => self
                .children
                .get(id)
                .map(|c| c.iter().collect())
                .unwrap_or_default(),
        }
    }

    /// Topological walk from `id` in `dir`, starting with `id`; ties go to
    /// the smaller id. Unresolved ancestors are included.
    pub fn trace(&self, id: &ManifestId, dir: Direction) -> Result<Vec<ManifestId>, ProvenanceError> {
        if !self.nodes.contains_key(id) {
            return Err(ProvenanceError::UnknownId(id.clone()));
        }
        let mut reach: BTreeSet<&ManifestId> = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            if reach.insert(cur) {
                stack.extend(self.neighbours(cur, dir));
            }
        }
        let mut indegree: BTreeMap<&ManifestId, usize> = reach.iter().map(|n| (*n, 0)).collect();
        for n in &reach {
            for m in self.neighbours(n, dir) {
                *indegree.get_mut(m).unwrap() += 1;
            }
        }
        let mut ready: BTreeSet<&ManifestId> =
            indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut order = Vec::with_capacity(reach.len());
        while let Some(n) = ready.pop_first() {
            order.push(n.clone());
            for m in self.neighbours(n, dir) {
                let d = indegree.get_mut(m).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(m);
                }
            }
        }
        Ok(order)
    }

    pub fn verify_closure(
        &self,
        id: &ManifestId,
        content: &dyn ContentResolver,
        trust: &TrustStore,
        at: DateTime<Utc>,
        policy: &ClosurePolicy,
    ) -> Result<ClosureReport, ProvenanceError> {
        let order = self.trace(id, Direction::Ancestors)?;
        let mut nodes = Vec::with_capacity(order.len());
        for nid in order {
            nodes.push(self.check_node(nid, content, trust, at, policy)?);
        }
        let passed = nodes.iter().all(|n| match n.status {
            NodeStatus::Verified | NodeStatus::SignatureOnly => true,
            NodeStatus::Unresolved => policy.permissive,
            NodeStatus::Failed => false,
        });
        Ok(ClosureReport {
            root: id.clone(),
            passed,
            nodes,
        })
    }

    fn check_node(
        &self,
        id: ManifestId,
        content: &dyn ContentResolver,
        trust: &TrustStore,
        at: DateTime<Utc>,
        policy: &ClosurePolicy,
    ) -> Result<NodeReport, ProvenanceError> {
        let mut report = NodeReport {
            id,
            object_id: None,
            status: NodeStatus::Unresolved,
            details: Vec::new(),
        };
        let Some(node) = self.nodes.get(&report.id) else {
            report.details.push("manifest not available".into());
            return Ok(report);
        };
        report.object_id = Some(node.manifest.object_id.clone());
        if let Err(e) = verify_signed_manifest(&node.envelope, trust, at) {
            report.status = NodeStatus::Failed;
            report.details.push(format!("signature: {e}"));
            return Ok(report);
        }
        let sets: Vec<_> = match policy
            .binding
            .as_deref()
            .and_then(|name| node.manifest.binding(name))
        {
            Some(set) => vec![set],
            None => node.manifest.bindings.iter().collect(),
        };
        let mut checked = 0;
        for set in sets {
            let Some(reader) = content.open(&report.id, &node.manifest)? else {
                break;
            };
            checked += 1;
            match verify_binding(reader, set) {
                Ok(r) if r.passed => {}
                Ok(r) => {
                    report.status = NodeStatus::Failed;
                    let issues: Vec<String> = r.issues.iter().map(|i| i.to_string()).collect();
                    report
                        .details
                        .push(format!("binding {:?} failed: {}", set.name, issues.join("; ")));
                }
                Err(e) => {
                    report.status = NodeStatus::Failed;
                    report.details.push(format!("binding {:?}: {e}", set.name));
                }
            }
        }
        if report.status != NodeStatus::Failed {
            report.status = if checked > 0 {
                NodeStatus::Verified
            } else if policy.permissive {
                NodeStatus::SignatureOnly
            } else {
                report.details.push("content not available".into());
                NodeStatus::Unresolved
            };
        }
        Ok(report)
    }

    pub fn export(&self, format: ExportFormat) -> Vec<u8> {
        match format {
            ExportFormat::Dot => self.export_dot().into_bytes(),
            ExportFormat::Json => codec::encode(&self.export_value(), Format::Json),
        }
    }

    fn export_dot(&self) -> String {
        let q = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        let mut out = String::from("digraph provenance {\n");
        for (id, node) in &self.nodes {
            let label = format!("{} ({})", node.manifest.object_id, node.manifest.object_type.as_str());
            out.push_str(&format!("  {} [label={}];\n", q(id.as_str()), q(&label)));
        }
        for id in self.unresolved() {
            out.push_str(&format!("  {} [style=dotted, label=\"unresolved\"];\n", q(id.as_str())));
        }
        for (child, ps) in &self.parents {
            for p in ps {
                out.push_str(&format!("  {} -> {};\n", q(child.as_str()), q(p.as_str())));
            }
        }
        for e in &self.facsimiles {
            out.push_str(&format!(
                "  {} -> {} [dir=none, style=dashed, label={}];\n",
                q(e.a.as_str()),
                q(e.b.as_str()),
                q(e.relation.as_str())
            ));
        }
        out.push_str("}\n");
        out
    }

    fn export_value(&self) -> Value {
        let mut nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|(id, n)| {
                MapBuilder::new()
                    .put("id", Value::text(id.as_str()))
                    .put("objectId", Value::text(&n.manifest.object_id))
                    .put("objectType", Value::text(n.manifest.object_type.as_str()))
                    .put("resolved", Value::Bool(true))
                    .build()
            })
            .collect();
        nodes.extend(self.unresolved().into_iter().map(|id| {
            MapBuilder::new()
                .put("id", Value::text(id.as_str()))
                .put("resolved", Value::Bool(false))
                .build()
        }));
        let origin: Vec<Value> = self
            .parents
            .iter()
            .flat_map(|(c, ps)| {
                ps.iter().map(move |p| {
                    MapBuilder::new()
                        .put("child", Value::text(c.as_str()))
                        .put("parent", Value::text(p.as_str()))
                        .build()
                })
            })
            .collect();
        let facsimile: Vec<Value> = self
            .facsimiles
            .iter()
            .map(|e| {
                MapBuilder::new()
                    .put("a", Value::text(e.a.as_str()))
                    .put("b", Value::text(e.b.as_str()))
                    .put("relation", Value::text(e.relation.as_str()))
                    .build()
            })
            .collect();
        MapBuilder::new()
            .put("facsimileEdges", Value::Array(facsimile))
            .put("nodes", Value::Array(nodes))
            .put("originEdges", Value::Array(origin))
            .build()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dot" => Some(ExportFormat::Dot),
            "json" => Some(ExportFormat::Json),
            _ => None,
        }
    }
}

/// Supplies payload bytes for a manifest during closure checks. Called once
/// per binding set to be checked.
pub trait ContentResolver {
    fn open(&self, id: &ManifestId, manifest: &Manifest) -> io::Result<Option<Box<dyn Read + '_>>>;
}

/// Content held in memory, keyed by manifest id.
#[derive(Debug, Default, Clone)]
pub struct MemoryContent(pub BTreeMap<ManifestId, Vec<u8>>);

impl ContentResolver for MemoryContent {
    fn open(&self, id: &ManifestId, _: &Manifest) -> io::Result<Option<Box<dyn Read + '_>>> {
        Ok(self.0.get(id).map(|b| Box::new(b.as_slice()) as Box<dyn Read>))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClosurePolicy {
    /// Check only this binding set where a manifest has it.
    pub binding: Option<String>,
    /// Missing content or manifests do not fail the closure.
    pub permissive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Verified,
    SignatureOnly,
    Unresolved,
    Failed,
}

impl NodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Verified => "verified",
            NodeStatus::SignatureOnly => "signature-only",
            NodeStatus::Unresolved => "unresolved",
            NodeStatus::Failed => "FAILED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeReport {
    pub id: ManifestId,
    pub object_id: Option<String>,
    pub status: NodeStatus,
    pub details: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureReport {
    pub root: ManifestId,
    pub passed: bool,
    /// In ancestor trace order.
    pub nodes: Vec<NodeReport>,
}

impl ClosureReport {
    pub fn status_of(&self, id: &ManifestId) -> Option<NodeStatus> {
        self.nodes.iter().find(|n| n.id == *id).map(|n| n.status)
    }

    pub fn failed(&self) -> impl Iterator<Item = &NodeReport> {
        self.nodes.iter().filter(|n| n.status == NodeStatus::Failed)
    }
}

/// Copy-on-write handle: readers take a snapshot, writers swap in a new graph.
#[derive(Debug, Default, Clone)]
pub struct SharedGraph(Arc<RwLock<Arc<ProvenanceGraph>>>);

impl SharedGraph {
    pub fn new(graph: ProvenanceGraph) -> Self {
        SharedGraph(Arc::new(RwLock::new(Arc::new(graph))))
    }

    pub fn snapshot(&self) -> Arc<ProvenanceGraph> {
        self.0.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn update<T>(
        &self,
        f: impl FnOnce(&mut ProvenanceGraph) -> Result<T, ProvenanceError>,
    ) -> Result<T, ProvenanceError> {
        let mut guard = self.0.write().unwrap_or_else(|e| e.into_inner());
        let mut next = ProvenanceGraph::clone(&guard);
        let out = f(&mut next)?;
        *guard = Arc::new(next);
        Ok(out)
    }
}

const ENVELOPE_EXT: &str = "env";
const INDEX_FILE: &str = "index.json";

/// Directory of `<manifestId>.env` files plus a derived `index.json`.
#[derive(Debug, Clone)]
pub struct GraphStore {
    dir: PathBuf,
}

impl GraphStore {
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(GraphStore {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn envelope_path(&self, id: &ManifestId) -> PathBuf {
        self.dir.join(format!("{}.{ENVELOPE_EXT}", id.as_str()))
    }

    /// Loads every stored envelope. Signatures were checked when stored and
    /// are checked again by closure verification.
    pub fn load(&self) -> Result<ProvenanceGraph, ProvenanceError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == ENVELOPE_EXT))
            .collect();
        paths.sort();
        let mut graph = ProvenanceGraph::new();
        for path in paths {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let bad = |msg: String| ProvenanceError::CorruptStore(format!("{}: {msg}", path.display()));
            let bytes = fs::read(&path)?;
            let envelope = SignedManifest::from_bytes(&bytes).map_err(|e| bad(e.to_string()))?;
            let manifest = envelope.manifest_unverified().map_err(|e| bad(e.to_string()))?;
            let id = compute_manifest_id(&manifest)?;
            if id.as_str() != name {
                return Err(bad(format!("file name does not match manifest id {id}")));
            }
            graph.insert(
                id,
                Node {
                    envelope,
                    envelope_bytes: bytes,
                    manifest,
                },
            )?;
        }
        Ok(graph)
    }

    /// Adds to `graph` and persists the envelope.
    pub fn add(
        &self,
        graph: &mut ProvenanceGraph,
        envelope: SignedManifest,
        trust: &TrustStore,
        at: DateTime<Utc>,
    ) -> Result<ManifestId, ProvenanceError> {
        let id = graph.add_manifest(envelope, trust, at)?;
        let path = self.envelope_path(&id);
        if !path.exists() {
            write_atomic(&path, &graph.nodes[&id].envelope_bytes)?;
        }
        self.write_index(graph)?;
        Ok(id)
    }

    pub fn write_index(&self, graph: &ProvenanceGraph) -> io::Result<()> {
        let entries: Vec<Value> = graph
            .nodes
            .iter()
            .map(|(id, n)| {
                MapBuilder::new()
                    .put("id", Value::text(id.as_str()))
                    .put("objectId", Value::text(&n.manifest.object_id))
                    .put(
                        "origins",
                        Value::Array(
                            graph.parents(id).iter().map(|p| Value::text(p.as_str())).collect(),
                        ),
                    )
                    .build()
            })
            .collect();
        let doc = MapBuilder::new().put("manifests", Value::Array(entries)).build();
        write_atomic(&self.dir.join(INDEX_FILE), &codec::encode(&doc, Format::Json))
    }
}
