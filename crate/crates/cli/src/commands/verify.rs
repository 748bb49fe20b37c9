use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::Args;
use serde_json::json;
use vamp_core::binding::{verify_binding, BindingError, VerificationReport};
use vamp_core::container::{
    self, extract_path, open_payload, ContainerError, ContainerHeader, ManifestRegistry,
    ResolveError, SIDECAR_SUFFIX,
};
use vamp_core::crypto::{verify_signed_manifest, SignedManifest, TrustStore};
use vamp_core::manifest::{Manifest, ManifestId};
use vamp_core::provenance::{
    ClosurePolicy, ClosureReport, ContentResolver, Direction, GraphStore, NodeReport, NodeStatus,
    ProvenanceError, ProvenanceGraph,
};
use vamp_registry::RegistryClient;

use crate::error::{CliError, CliResult};
use crate::files;
use crate::{Global, OutputMode};

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub object: PathBuf,
    /// Envelope to check against, instead of resolving one.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Check only this binding set.
    #[arg(long = "set")]
    pub set: Option<String>,
    /// Also verify every ancestor in the provenance graph.
    #[arg(long)]
    pub closure: bool,
    /// Ancestors without content or manifests do not fail the closure.
    #[arg(long, requires = "closure")]
    pub permissive: bool,
    /// Facsimile manifests named by the object must resolve and verify.
    #[arg(long)]
    pub require_facsimiles: bool,
    /// Directories searched for ancestor sidecars and containers. The
    /// object's own directory is always searched.
    #[arg(long = "search")]
    pub search: Vec<PathBuf>,
    /// Verify as of this time instead of now (YYYY-MM-DDTHH:MM:SSZ).
    #[arg(long)]
    pub at: Option<String>,
}

#[derive(Default)]
struct Report {
    object: String,
    manifest_id: Option<String>,
    source: Option<String>,
    signer: Option<String>,
    signature_error: Option<String>,
    bindings: Vec<VerificationReport>,
    closure: Option<ClosureReport>,
    facsimiles: Vec<(String, String)>,
    warnings: Vec<String>,
    error: Option<String>,
}

impl Report {
    fn passed(&self) -> bool {
        self.error.is_none()
            && self.signature_error.is_none()
            && !self.bindings.is_empty()
            && self.bindings.iter().all(|b| b.passed)
            && self.closure.as_ref().is_none_or(|c| c.passed)
            && self.facsimiles.iter().all(|(_, s)| s == "verified")
    }

    fn to_json(&self) -> serde_json::Value {
        json!({
            "object": self.object,
            "passed": self.passed(),
            "manifestId": self.manifest_id,
            "source": self.source,
            "signer": self.signer,
            "signature": {
                "passed": self.signature_error.is_none() && self.manifest_id.is_some(),
                "error": self.signature_error,
            },
            "bindings": self.bindings.iter().map(|b| json!({
                "name": b.binding,
                "kind": b.kind.as_str(),
                "passed": b.passed,
                "failingUnits": b.failing_units,
                "issues": b.issues.iter().map(|i| i.to_string()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "closure": self.closure.as_ref().map(|c| json!({
                "passed": c.passed,
                "nodes": c.nodes.iter().map(|n| json!({
                    "id": n.id.as_str(),
                    "objectId": n.object_id,
                    "status": n.status.as_str(),
                    "details": n.details,
                })).collect::<Vec<_>>(),
            })),
            "facsimiles": self.facsimiles.iter().map(|(id, s)| json!({"id": id, "status": s})).collect::<Vec<_>>(),
            "warnings": self.warnings,
            "error": self.error,
        })
    }

    fn print_human(&self) {
        println!("object:    {}", self.object);
        if let Some(id) = &self.manifest_id {
            println!(
                "manifest:  {id} ({})",
                self.source.as_deref().unwrap_or("given")
            );
        }
        if let Some(s) = &self.signer {
            println!("signer:    {s}");
        }
        match (&self.signature_error, &self.manifest_id) {
            (Some(e), _) => println!("signature: FAILED {e}"),
            (None, Some(_)) => println!("signature: ok"),
            _ => {}
        }
        for b in &self.bindings {
            if b.passed {
                println!("binding {}: ok", b.binding);
            } else {
                let issues: Vec<String> = b.issues.iter().map(|i| i.to_string()).collect();
                if b.failing_units.is_empty() {
                    println!("binding {}: FAILED {}", b.binding, issues.join("; "));
                } else {
                    println!(
                        "binding {}: FAILED units {:?} ({})",
                        b.binding,
                        b.failing_units,
                        issues.join("; ")
                    );
                }
            }
        }
        if let Some(c) = &self.closure {
            println!("closure:");
            for n in &c.nodes {
                let name = n.object_id.as_deref().unwrap_or("?");
                if n.details.is_empty() {
                    println!("  {} {} {}", n.status.as_str(), n.id, name);
                } else {
                    println!("  {} {} {} ({})", n.status.as_str(), n.id, name, n.details.join("; "));
                }
            }
        }
        for (id, status) in &self.facsimiles {
            println!("facsimile {id}: {status}");
        }
        for w in &self.warnings {
            println!("warning: {w}");
        }
        if let Some(e) = &self.error {
            println!("error: {e}");
        }
        println!("result: {}", if self.passed() { "verified" } else { "FAILED" });
    }
}

/// Payload files for manifests, keyed by manifest id.
#[derive(Default)]
struct LocalContent {
    paths: BTreeMap<ManifestId, PathBuf>,
}

fn locator_path(locator: &str) -> Option<PathBuf> {
    if let Some(rest) = locator.strip_prefix("file://") {
        return Some(PathBuf::from(rest));
    }
    (!locator.contains("://")).then(|| PathBuf::from(locator))
}

impl ContentResolver for LocalContent {
    fn open(&self, id: &ManifestId, manifest: &Manifest) -> io::Result<Option<Box<dyn Read + '_>>> {
        let path = match self.paths.get(id) {
            Some(p) => p.clone(),
            None => match manifest.master_copy_locator.as_deref().and_then(locator_path) {
                Some(p) if p.is_file() => p,
                _ => return Ok(None),
            },
        };
        let header = extract_path(&path).map_err(|e| match e {
            ContainerError::Io(e) => e,
            other => io::Error::new(io::ErrorKind::InvalidData, other.to_string()),
        })?;
        Ok(Some(Box::new(open_payload(&path, &header)?)))
    }
}

/// Envelopes and payload paths found next to files in `dirs`.
fn scan_dirs(dirs: &[PathBuf]) -> (BTreeMap<ManifestId, Vec<u8>>, BTreeMap<ManifestId, PathBuf>) {
    let mut envelopes = BTreeMap::new();
    let mut content = BTreeMap::new();
    for dir in dirs {
        let Ok(entries) = fs::read_dir(dir) else { continue };
        let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths.into_iter().filter(|p| p.is_file()) {
            let name = path.to_string_lossy();
            let (bytes, payload_path) = if let Some(obj) = name.strip_suffix(SIDECAR_SUFFIX) {
                let Ok(bytes) = fs::read(&path) else { continue };
                (bytes, PathBuf::from(obj))
            } else {
                match extract_path(&path) {
                    Ok(h) => match h.envelope_bytes() {
                        Some(b) => (b.to_vec(), path.clone()),
                        None => continue,
                    },
                    Err(_) => continue,
                }
            };
            let Ok(id) = SignedManifest::from_bytes(&bytes).and_then(|e| {
                e.manifest_id()
                    .map_err(|e| vamp_core::crypto::CryptoError::MalformedPayload(e.to_string()))
            }) else {
                continue;
            };
            if payload_path.is_file() {
                content.entry(id.clone()).or_insert(payload_path);
            }
            envelopes.entry(id).or_insert(bytes);
        }
    }
    (envelopes, content)
}

struct ClosureInputs<'a> {
    trust: &'a TrustStore,
    at: DateTime<Utc>,
    client: Option<&'a RegistryClient>,
    local: BTreeMap<ManifestId, Vec<u8>>,
}

impl ClosureInputs<'_> {
    fn find(&self, id: &ManifestId) -> CliResult<Option<Vec<u8>>> {
        if let Some(b) = self.local.get(id) {
            return Ok(Some(b.clone()));
        }
        match self.client {
            Some(c) => Ok(c
                .fetch(id)
                .map_err(super::registry::client_error)?
                .map(|r| r.envelope)),
            None => Ok(None),
        }
    }

    /// Pulls missing manifests for `wanted` into the graph. Returns the ids
    /// whose envelopes were found but rejected, with the reason.
    fn fill(
        &self,
        graph: &mut ProvenanceGraph,
        root: &ManifestId,
        extra: &[ManifestId],
    ) -> CliResult<BTreeMap<ManifestId, String>> {
        let mut rejected = BTreeMap::new();
        let mut tried = BTreeSet::new();
        loop {
            let mut wanted: Vec<ManifestId> = graph
                .trace(root, Direction::Ancestors)
                .map_err(|e| CliError::verify(e))?
                .into_iter()
                .chain(extra.iter().cloned())
                .filter(|id| !graph.contains(id) && !tried.contains(id))
                .collect();
            wanted.dedup();
            if wanted.is_empty() {
                return Ok(rejected);
            }
            for id in wanted {
                tried.insert(id.clone());
                let Some(bytes) = self.find(&id)? else { continue };
                let env = match SignedManifest::from_bytes(&bytes) {
                    Ok(e) => e,
                    Err(e) => {
                        rejected.insert(id, e.to_string());
                        continue;
                    }
                };
                match env.manifest_id() {
                    Ok(actual) if actual == id => {}
                    Ok(actual) => {
                        rejected.insert(id, format!("envelope carries manifest {actual}"));
                        continue;
                    }
                    Err(e) => {
                        rejected.insert(id, e.to_string());
                        continue;
                    }
                }
                match graph.add_manifest(env, self.trust, self.at) {
                    Ok(_) => {}
                    Err(e @ ProvenanceError::BadSignature(_)) => {
                        rejected.insert(id, e.to_string());
                    }
                    Err(e) => return Err(CliError::verify(e)),
                }
            }
        }
    }
}

fn resolve_error(e: ResolveError) -> CliError {
    match e {
        ResolveError::Container(ContainerError::Io(e)) => CliError::env(e),
        ResolveError::Registry(m) => CliError::env(format!("registry lookup failed: {m}")),
        other => CliError::verify(other),
    }
}

struct Target {
    envelope: SignedManifest,
    header: ContainerHeader,
}

fn locate(global: &Global, args: &VerifyArgs, report: &mut Report) -> CliResult<Target> {
    if let Some(m) = &args.manifest {
        let (envelope, _) = files::envelope(m)?;
        let header = extract_path(&args.object).map_err(|e| match e {
            ContainerError::Io(e) => CliError::env(e),
            other => CliError::verify(other),
        })?;
        report.source = Some(m.display().to_string());
        return Ok(Target { envelope, header });
    }
    let client = global.registry.as_deref().map(RegistryClient::new);
    let registry = client.as_ref().map(|c| c as &dyn ManifestRegistry);
    let resolved = container::resolve_manifest(&args.object, registry).map_err(resolve_error)?;
    report.source = Some(resolved.source.as_str().to_owned());
    report.warnings.extend(resolved.warnings);
    Ok(Target {
        envelope: resolved.envelope,
        header: resolved.header,
    })
}

fn run(global: &Global, args: &VerifyArgs, report: &mut Report) -> CliResult {
    let trust = files::trust_store(&global.trust_dir)?;
    let at = super::at_time(args.at.as_deref())?;
    let target = locate(global, args, report)?;
    let env = &target.envelope;
    report.manifest_id = env.manifest_id().ok().map(|id| id.to_string());
    report.signer = env.signer_subject().map(str::to_owned);
    let manifest = match verify_signed_manifest(env, &trust, at) {
        Ok((m, _)) => m,
        Err(e) => {
            report.signature_error = Some(e.to_string());
            return Ok(());
        }
    };

    let sets: Vec<_> = match &args.set {
        Some(name) => match manifest.binding(name) {
            Some(s) => vec![s],
            None => {
                report.error = Some(format!("manifest has no binding set {name:?}"));
                return Ok(());
            }
        },
        None => manifest.bindings.iter().collect(),
    };
    for set in sets {
        let payload = open_payload(&args.object, &target.header)?;
        let r = verify_binding(payload, set).map_err(|e| match e {
            BindingError::Io(e) => CliError::env(e),
            other => CliError::verify(other),
        })?;
        report.bindings.push(r);
    }

    if !args.closure && !args.require_facsimiles {
        return Ok(());
    }
    let id = env.manifest_id().map_err(CliError::verify)?;
    let mut graph = match &global.graph_dir {
        Some(dir) => GraphStore::open(dir)?.load().map_err(CliError::env)?,
        None => ProvenanceGraph::new(),
    };
    if !graph.contains(&id) {
        graph.add_manifest(env.clone(), &trust, at).map_err(CliError::verify)?;
    }
    let mut dirs = args.search.clone();
    dirs.push(
        args.object
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf(),
    );
    let (local, mut content) = scan_dirs(&dirs);
    content.insert(id.clone(), args.object.clone());
    let client = global.registry.as_deref().map(RegistryClient::new);
    let inputs = ClosureInputs {
        trust: &trust,
        at,
        client: client.as_ref(),
        local,
    };
    let facsimile_ids: Vec<ManifestId> = if args.require_facsimiles {
        manifest.facsimiles.iter().map(|f| f.manifest_id.clone()).collect()
    } else {
        Vec::new()
    };
    let rejected = inputs.fill(&mut graph, &id, &facsimile_ids)?;

    for fid in &facsimile_ids {
        let status = if let Some(why) = rejected.get(fid) {
            format!("FAILED {why}")
        } else if graph.contains(fid) {
            "verified".to_owned()
        } else {
            "unresolved".to_owned()
        };
        report.facsimiles.push((fid.to_string(), status));
    }

    if args.closure {
        let policy = ClosurePolicy {
            binding: args.set.clone(),
            permissive: args.permissive,
        };
        let content = LocalContent { paths: content };
        let mut closure = graph
            .verify_closure(&id, &content, &trust, at, &policy)
            .map_err(|e| match e {
                ProvenanceError::Io(e) => CliError::env(e),
                other => CliError::verify(other),
            })?;
        for node in closure.nodes.iter_mut() {
            if let Some(why) = rejected.get(&node.id) {
                *node = NodeReport {
                    id: node.id.clone(),
                    object_id: None,
                    status: NodeStatus::Failed,
                    details: vec![why.clone()],
                };
                closure.passed = false;
            }
        }
        report.closure = Some(closure);
    }
    Ok(())
}

pub fn verify(global: &Global, args: &VerifyArgs) -> CliResult {
    let mut report = Report {
        object: args.object.display().to_string(),
        ..Report::default()
    };
    if let Err(e) = run(global, args, &mut report) {
        if e.code != crate::error::VERIFY_FAILED {
            return Err(e);
        }
        report.error = Some(e.message);
    }
    match global.output {
        OutputMode::Json => files::print_json(&report.to_json()),
        OutputMode::Human => report.print_human(),
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::reported())
    }
}
